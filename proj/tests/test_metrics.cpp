#include "oracles.hpp"

#include "l3d/evaluation.hpp"

#include <gtest/gtest.h>

using namespace l3d;

namespace {

std::vector<Points3> random_poses(Rng& rng, std::size_t n, Eigen::Index k, double noise = 0.0,
                                  const std::vector<Points3>* base = nullptr) {
  std::vector<Points3> out;
  for (std::size_t i = 0; i < n; ++i) {
    Points3 p(k, 3);
    for (Eigen::Index j = 0; j < p.size(); ++j)
      p.data()[j] = (base ? (*base)[i].data()[j] : rng.uniform()) + noise * rng.normal();
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST(Metrics, WorkedExamples) {
  Points3 gt(2, 3);
  gt << 0, 0, 0, 1, 0, 0;  // bbox diagonal 1
  Points3 pred = gt;
  pred(0, 0) = 0.1;  // within 0.2, outside 0.05
  pred(1, 1) = 0.5;  // outside both
  EXPECT_NEAR(mse({pred}, {gt}), (0.01 + 0.25) / 6.0, 1e-16);
  EXPECT_EQ(pdj({pred}, {gt}, 0.2), 0.5);
  EXPECT_EQ(pdj({pred}, {gt}, 0.05), 0.0);
  EXPECT_EQ(pdj({gt}, {gt}, 0.05), 1.0);
  EXPECT_EQ(mse({gt}, {gt}), 0.0);
}

TEST(Metrics, BoundaryDistanceCounts) {
  Points3 gt(2, 3);
  gt << 0, 0, 0, 2, 0, 0;
  Points3 pred = gt;
  pred(0, 0) = 0.5;  // exactly 0.25 * 2
  EXPECT_EQ(pdj({pred}, {gt}, 0.25), 1.0);
}

TEST(Metrics, MatchLoopOracles) {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const auto gt = random_poses(rng, 20, 13);
    const auto pred = random_poses(rng, 20, 13, 0.05, &gt);
    EXPECT_NEAR(mse(pred, gt), oracle::mse_loop(pred, gt), 1e-12);
    for (double x : {0.02, 0.05, 0.1, 0.2, 0.5})
      EXPECT_NEAR(pdj(pred, gt, x), oracle::pdj_count(pred, gt, x), 1e-12);
  }
}

TEST(Metrics, PdjIsMonotoneInThreshold) {
  Rng rng(2);
  const auto gt = random_poses(rng, 50, 16);
  const auto pred = random_poses(rng, 50, 16, 0.1, &gt);
  double prev = 0.0;
  for (double x = 0.01; x < 1.0; x += 0.01) {
    const double v = pdj(pred, gt, x);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_GE(pdj(pred, gt, 0.2), pdj(pred, gt, 0.05));
}

TEST(Metrics, MseIsSymmetricAndRigidInvariant) {
  Rng rng(3);
  const auto a = random_poses(rng, 10, 8);
  const auto b = random_poses(rng, 10, 8);
  EXPECT_EQ(mse(a, b), mse(b, a));
  const Quat r = oracle::random_rotation(rng);
  const Eigen::RowVector3d t(3, -2, 7);
  auto move = [&](std::vector<Points3> ps) {
    for (auto& p : ps)
      for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = (r * p.row(i).transpose()).transpose() + t;
    return ps;
  };
  EXPECT_NEAR(mse(move(a), move(b)), mse(a, b), 1e-12);
}

TEST(Metrics, PdjIsSimilarityInvariantUnderScaleAndShift) {
  Rng rng(4);
  const auto gt = random_poses(rng, 30, 10);
  const auto pred = random_poses(rng, 30, 10, 0.08, &gt);
  auto move = [](std::vector<Points3> ps) {
    for (auto& p : ps) p = (2.0 * p).rowwise() + Eigen::RowVector3d(1, 2, 3);
    return ps;
  };
  for (double x : {0.05, 0.2}) EXPECT_EQ(pdj(move(pred), move(gt), x), pdj(pred, gt, x));
}

TEST(Metrics, RejectsMismatchedInput) {
  const Points3 a = Points3::Zero(2, 3);
  const Points3 b = Points3::Zero(3, 3);
  EXPECT_THROW(mse({a}, {b}), ContractError);
  EXPECT_THROW(mse({}, {}), ContractError);
  EXPECT_THROW(pdj({a}, {a}, 0.2), ContractError);  // zero bbox diagonal
  Points3 g(2, 3);
  g << 0, 0, 0, 1, 1, 1;
  EXPECT_THROW(pdj({g}, {g}, 0.0), ContractError);
}

TEST(Evaluation, ReportsEveryVariant) {
  const auto sk = species_skeleton(Species::macaque);
  auto cfg = GenConfig::defaults_for(Species::macaque);
  cfg.target_count = 100;
  const auto data = make_lift_data(generate(cfg, sk, species_action_library(Species::macaque, sk)), sk.soft_subset());
  LifterConfig lc;
  lc.k_s = data.k_s;
  lc.token_dim = 8;
  lc.hidden_dim = 16;
  lc.heads = 0;
  const auto m0 = init_lifter(lc);
  lc.heads = 2;
  const auto m2 = init_lifter(lc);
  const auto rep = evaluate({{"H=0", m0}, {"H=2", m2}}, data, 1, "toy");
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& r : rep.rows) {
    EXPECT_GT(r.mse, 0.0);
    EXPECT_GE(r.pdj_02, r.pdj_005);
  }
  const auto csv = eval_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,mse,pdj@0.2,pdj@0.05");
  EXPECT_NE(eval_text(rep).find("H=2"), std::string::npos);
  lc.k_s = 4;
  EXPECT_THROW(evaluate({{"bad", LifterModel(lc)}}, data, 1), ContractError);
}
