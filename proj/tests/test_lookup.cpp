#include "oracles.hpp"

#include "l3d/lookup_io.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace l3d;

namespace {

std::vector<DatasetRecord> horse_records(std::size_t n, std::uint64_t seed) {
  const auto sk = species_skeleton(Species::horse);
  auto cfg = GenConfig::defaults_for(Species::horse);
  cfg.target_count = n;
  cfg.seed = seed;
  return generate(cfg, sk, species_action_library(Species::horse, sk));
}

LookupEntry entry(std::initializer_list<double> xyz, std::string action, std::uint64_t id) {
  LookupEntry e;
  e.pose.resize(static_cast<Eigen::Index>(xyz.size() / 3), 3);
  std::copy(xyz.begin(), xyz.end(), e.pose.data());
  e.action = std::move(action);
  e.record_id = id;
  e.frame_index = id;
  return e;
}

Points3 random_soft(Rng& rng, std::size_t k) {
  Points3 q(static_cast<Eigen::Index>(k), 3);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(-0.1, 1.1);
  return q;
}

}  // namespace

TEST(LookupTable, TwoEntryHandCase) {
  const LookupTable t({1}, {entry({0, 0, 0, 0.1, 0.1, 0.1}, "A", 0), entry({0, 0, 0, 0.9, 0.9, 0.9}, "B", 1)});
  Points3 q(1, 3);
  q << 0.8, 0.8, 0.8;
  for (auto mode : {QueryMode::indexed, QueryMode::brute_force}) {
    const auto r = t.query(q, mode);
    EXPECT_EQ(r.index, 1u);
    EXPECT_EQ(r.action, "B");
    EXPECT_NEAR(r.distance, std::sqrt(3 * 0.01), 1e-15);
  }
}

TEST(LookupTable, TiesGoToLowestIndex) {
  const LookupTable t({0}, {entry({0.5, 0.5, 0.5, 0, 0, 0}, "A", 0), entry({0.5, 0.5, 0.5, 1, 1, 1}, "B", 1)});
  Points3 q(1, 3);
  q << 0.5, 0.5, 0.5;
  EXPECT_EQ(t.query(q, QueryMode::indexed).index, 0u);
  EXPECT_EQ(t.query(q, QueryMode::brute_force).index, 0u);
}

TEST(LookupTable, SelfQueryFindsEveryEntry) {
  const auto sk = species_skeleton(Species::horse);
  const auto table = build_table(horse_records(400, 3), sk.soft_subset());
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (auto mode : {QueryMode::indexed, QueryMode::brute_force}) {
      const auto r = table.query(table.soft_rows(i), mode);
      EXPECT_EQ(r.distance, 0.0);
      EXPECT_EQ(table.soft_rows(r.index), table.soft_rows(i));
    }
  }
}

TEST(LookupTable, AgreesWithLinearScan) {
  const auto sk = species_skeleton(Species::horse);
  const auto table = build_table(horse_records(600, 4), sk.soft_subset());
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const auto q = random_soft(rng, sk.soft_size());
    const auto want = oracle::linear_scan(table, q);
    for (auto mode : {QueryMode::indexed, QueryMode::brute_force}) {
      const auto got = table.query(q, mode);
      EXPECT_EQ(got.index, want.index);
      EXPECT_EQ(got.distance, want.distance);
    }
  }
}

TEST(LookupTable, RejectsBadInput) {
  const LookupTable t({0}, {entry({0, 0, 0, 1, 1, 1}, "A", 0)});
  EXPECT_THROW(t.query(Points3::Zero(2, 3)), ContractError);
  EXPECT_THROW(LookupTable({0}, {entry({0, 0, 0, 2, 1, 1}, "A", 0)}), ContractError);
  EXPECT_THROW(LookupTable({2}, {entry({0, 0, 0, 1, 1, 1}, "A", 0)}), ContractError);
  EXPECT_THROW(LookupTable({0}, {}), ContractError);
}

TEST(LookupTableIo, JsonlAndBinaryRoundTrip) {
  const auto sk = species_skeleton(Species::horse);
  const auto table = build_table(horse_records(120, 5), sk.soft_subset());
  EXPECT_TRUE(deserialize_table(serialize_table_jsonl(table)) == table);
  EXPECT_TRUE(deserialize_table(serialize_table_binary(table)) == table);
  const auto dir = std::filesystem::temp_directory_path() / "l3d_test_table";
  save_table(dir / "t.jsonl", table);
  save_table(dir / "t.bin", table, TableEncoding::binary);
  EXPECT_TRUE(load_table(dir / "t.jsonl") == table);
  EXPECT_TRUE(load_table(dir / "t.bin") == table);
}

TEST(LookupTableIo, RejectsCorruption) {
  const auto sk = species_skeleton(Species::horse);
  const auto table = build_table(horse_records(30, 6), sk.soft_subset());
  auto bin = serialize_table_binary(table);
  bin[bin.size() - 3] = static_cast<char>(bin[bin.size() - 3] ^ 0x10);
  EXPECT_THROW(deserialize_table(bin), FormatError);
  EXPECT_THROW(deserialize_table(serialize_table_binary(table).substr(0, 200)), FormatError);
  EXPECT_THROW(deserialize_table("{\"format\":\"other\"}\n"), FormatError);
}

TEST(Pca, CollinearPointsHaveOneComponent) {
  RowMatrix x(5, 3);
  for (int i = 0; i < 5; ++i) x.row(i) << i, 2.0 * i, -1.0 * i;
  const auto r = pca(x, 2);
  EXPECT_TRUE(r.rank_deficient);
  ASSERT_EQ(r.components.cols(), 1);
  const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, -1).normalized();
  EXPECT_NEAR(std::abs(r.components.col(0).dot(dir)), 1.0, 1e-12);
  EXPECT_NEAR(r.eigenvalues(0), 6.0 * 2.5, 1e-9);  // |(1,2,-1)|^2 * var(0..4)
}

TEST(Pca, ComponentsAreOrthonormalEigenvectors) {
  Rng rng(1);
  RowMatrix x(200, 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < 6; ++j) x(i, j) = rng.normal() * (j + 1);
  const auto r = pca(x, 3);
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / 199.0;
  EXPECT_TRUE((r.components.transpose() * r.components).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_LT((cov * r.components.col(j) - r.eigenvalues(j) * r.components.col(j)).norm(), 1e-9);
    if (j > 0) EXPECT_GE(r.eigenvalues(j - 1), r.eigenvalues(j));
  }
  EXPECT_TRUE(r.projections.isApprox(c * r.components, 1e-12));
}

TEST(Pca, FullRankReconstructsData) {
  Rng rng(2);
  RowMatrix x(30, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  const auto r = pca(x, 4);
  const RowMatrix back = (r.projections * r.components.transpose()).rowwise() + r.mean;
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KMeans, SeparatesBlobs) {
  Rng rng(3);
  RowMatrix x(90, 2);
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  for (Eigen::Index i = 0; i < 90; ++i) {
    x(i, 0) = centers[i % 3][0] + 0.3 * rng.normal();
    x(i, 1) = centers[i % 3][1] + 0.3 * rng.normal();
  }
  KMeansOptions o;
  o.k = 3;
  const auto r = kmeans(x, o);
  EXPECT_TRUE(r.converged);
  for (Eigen::Index i = 3; i < 90; ++i)
    EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], r.assignments[static_cast<std::size_t>(i % 3)]);
  EXPECT_EQ(std::set<std::size_t>(r.assignments.begin(), r.assignments.end()).size(), 3u);
}

TEST(KMeans, KEqualsNGivesZeroInertia) {
  Rng rng(4);
  RowMatrix x(7, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  KMeansOptions o;
  o.k = 7;
  const auto r = kmeans(x, o);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(std::set<std::size_t>(r.assignments.begin(), r.assignments.end()).size(), 7u);
  o.k = 8;
  EXPECT_THROW(kmeans(x, o), ContractError);
}

TEST(KMeans, InertiaNeverIncreases) {
  Rng rng(5);
  RowMatrix x(300, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  KMeansOptions o;
  o.k = 8;
  o.restarts = 1;
  const auto r = kmeans(x, o);
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
    EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] * (1 + 1e-12));
}

TEST(KMeans, DeterministicPerSeed) {
  Rng rng(6);
  RowMatrix x(100, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  KMeansOptions o;
  o.k = 5;
  o.seed = 9;
  EXPECT_EQ(kmeans(x, o).assignments, kmeans(x, o).assignments);
}

TEST(ClusterTable, SummaryIsConsistent) {
  const auto sk = species_skeleton(Species::horse);
  const auto table = build_table(horse_records(300, 7), sk.soft_subset());
  KMeansOptions o;
  o.k = 6;
  const auto rep = cluster_table(table, o);
  ASSERT_EQ(rep.clusters.size(), 6u);
  std::size_t total = 0;
  for (const auto& c : rep.clusters) {
    total += c.size;
    EXPECT_GT(c.purity, 0.0);
    EXPECT_LE(c.purity, 1.0);
  }
  EXPECT_EQ(total, table.size());
  EXPECT_EQ(rep.pca2.rows(), static_cast<Eigen::Index>(table.size()));
  const auto csv = cluster_assignments_csv(table, rep);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(table.size() + 1));
}
