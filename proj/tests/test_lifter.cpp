#include "oracles.hpp"

#include "l3d/model_io.hpp"

#include <gtest/gtest.h>

using namespace l3d;

namespace {

using LD = long double;

LifterConfig tiny(Eigen::Index heads) {
  LifterConfig c;
  c.k_s = 3;
  c.token_dim = 8;
  c.heads = heads;
  c.hidden_dim = 16;
  c.seed = 3;
  return c;
}

template <class S>
void randomize(LifterNet<S>& net, Rng& rng, double a = 0.5) {
  for (auto& p : net.params) p = static_cast<S>(rng.uniform(-a, a));
}

template <class S>
Mat<S> random_mat(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat<S> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform());
  return m;
}

Points2 random_k2d(Rng& rng, Eigen::Index k) {
  Points2 p(k, 2);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
  return p;
}

LiftData tiny_dataset(std::size_t n, std::uint64_t seed) {
  const auto sk = species_skeleton(Species::macaque);
  auto cfg = GenConfig::defaults_for(Species::macaque);
  cfg.target_count = n;
  cfg.seed = seed;
  return make_lift_data(generate(cfg, sk, species_action_library(Species::macaque, sk)), sk.soft_subset());
}

}  // namespace

TEST(LifterLoss, WorkedExamples) {
  Points3 a = Points3::Zero(2, 3);
  EXPECT_EQ(loss(a, a), 0.0);
  Points3 b = a;
  b.array() += 0.1;
  EXPECT_NEAR(loss(a, b), 0.01, 1e-16);
}

TEST(LifterLoss, MatchesScalarLoop) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    Points3 a(13, 3), b(13, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a.data()[i] = rng.uniform();
      b.data()[i] = rng.uniform();
    }
    EXPECT_NEAR(loss(a, b), oracle::mse_loop({a}, {b}), 1e-15);
  }
}

TEST(LifterLayout, ParameterCountAndKeyBias) {
  const auto c = tiny(2);
  const auto layout = tensor_layout(c);
  // embed 2x8 + index 3x8, q/k/v/out 8x8 with biases on q, v, out, fc1 24x16+16, fc2 16x9+9
  EXPECT_EQ(parameter_count(layout), 16 + 24 + 4 * 64 + 3 * 8 + 24 * 16 + 16 + 16 * 9 + 9);
  for (const auto& t : layout) EXPECT_NE(t.name, "attn.k.bias");
  EXPECT_EQ(parameter_count(tensor_layout(tiny(0))), 16 + 24 + 24 * 16 + 16 + 16 * 9 + 9);
}

TEST(LifterConfig, RejectsUnsupportedHeads) {
  auto c = tiny(3);
  EXPECT_THROW(c.validate(), ContractError);
  c = tiny(4);
  c.token_dim = 6;
  EXPECT_THROW(c.validate(), ContractError);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  auto net = init_lifter(tiny(GetParam())).cast<LD>();
  Rng rng(5);
  randomize(net, rng);
  const auto x = random_mat<LD>(rng, 4, 6);
  const auto y = random_mat<LD>(rng, 4, 9);
  const auto lg = gradients(net, x, y);
  const LD h = 1e-6L;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.params.size(); ++i) {
    auto p = net;
    p.params[i] += h;
    const LD up = gradients(p, x, y).loss;
    p.params[i] -= 2 * h;
    const LD down = gradients(p, x, y).loss;
    const LD fd = (up - down) / (2 * h);
    const double rel = static_cast<double>(std::abs(fd - lg.grad[i]) / (std::abs(fd) + std::abs(lg.grad[i]) + 1e-12L));
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Heads, GradientCheck, ::testing::Values(0, 2, 4));

TEST(LifterForward, AttentionRowsAreDistributions) {
  auto net = init_lifter(tiny(4));
  Rng rng(2);
  randomize(net, rng, 2.0);
  const auto maps = attention_maps(net, random_k2d(rng, 3));
  ASSERT_EQ(maps.size(), 4u);
  for (const auto& a : maps) {
    ASSERT_EQ(a.rows(), 3);
    EXPECT_GE(a.minCoeff(), 0.0);
    for (Eigen::Index r = 0; r < 3; ++r) EXPECT_NEAR(a.row(r).sum(), 1.0, 1e-12);
  }
  EXPECT_TRUE(attention_maps(init_lifter(tiny(0)), random_k2d(rng, 3)).empty());
}

TEST(LifterForward, SingleTokenAttendsToItself) {
  auto c = tiny(2);
  c.k_s = 1;
  auto net = init_lifter(c);
  Rng rng(3);
  randomize(net, rng);
  for (const auto& a : attention_maps(net, random_k2d(rng, 1))) EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
}

TEST(LifterForward, AttentionIsPermutationEquivariantWithoutIndexEmbedding) {
  auto net = init_lifter(tiny(2));
  Rng rng(4);
  randomize(net, rng);
  net.tensor("embed.index").setZero();
  const auto x = random_k2d(rng, 3);
  const std::array<Eigen::Index, 3> perm{2, 0, 1};
  Points2 xp(3, 2);
  for (Eigen::Index i = 0; i < 3; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const auto y = encode_tokens(net, x);
  const auto yp = encode_tokens(net, xp);
  for (Eigen::Index i = 0; i < 3; ++i)
    EXPECT_LT((yp.row(i) - y.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LifterForward, ZeroWeightsGiveZeroOutput) {
  const LifterModel net(tiny(4));
  Rng rng(5);
  EXPECT_EQ(forward(net, random_k2d(rng, 3)), Points3::Zero(3, 3));
}

TEST(LifterForward, OutputBiasPassesThrough) {
  LifterModel net(tiny(2));
  net.tensor("mlp.fc2.bias").setConstant(0.25);
  Rng rng(6);
  EXPECT_EQ(forward(net, random_k2d(rng, 3)), Points3::Constant(3, 3, 0.25));
}

TEST(LifterForward, WrongKeypointCountIsContractError) {
  const auto net = init_lifter(tiny(2));
  Rng rng(7);
  EXPECT_THROW(forward(net, random_k2d(rng, 4)), ContractError);
}

TEST(LifterGradients, DuplicatedBatchHasSameGradient) {
  auto net = init_lifter(tiny(2));
  Rng rng(8);
  randomize(net, rng);
  const auto x = random_mat<double>(rng, 3, 6);
  const auto y = random_mat<double>(rng, 3, 9);
  Mat<double> x2(6, 6), y2(6, 9);
  x2 << x, x;
  y2 << y, y;
  const auto a = gradients(net, x, y);
  const auto b = gradients(net, x2, y2);
  EXPECT_NEAR(a.loss, b.loss, 1e-15);
  EXPECT_LT((a.grad - b.grad).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LifterGradients, ZeroResidualGivesZeroGradient) {
  auto net = init_lifter(tiny(4));
  Rng rng(9);
  randomize(net, rng);
  const auto x = random_mat<double>(rng, 5, 6);
  ForwardCache<double> cache;
  forward_batch(net, x, cache);
  const auto lg = gradients(net, x, cache.out);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LifterInit, DeterministicPerSeed) {
  auto c = tiny(2);
  EXPECT_EQ(init_lifter(c).params, init_lifter(c).params);
  auto d = c;
  d.seed = 4;
  EXPECT_NE(init_lifter(c).params, init_lifter(d).params);
  const auto m = init_lifter(c);
  for (const auto& t : m.layout)
    if (t.is_bias()) EXPECT_EQ(m.tensor(t.name).cwiseAbs().maxCoeff(), 0.0) << t.name;
}

TEST(LifterSplit, PartitionsIndices) {
  const auto s = split_indices(101, 7);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.train.size(), 81u);
  std::vector<Eigen::Index> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  std::sort(all.begin(), all.end());
  for (Eigen::Index i = 0; i < 101; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
  EXPECT_EQ(split_indices(101, 7).val, s.val);
  EXPECT_EQ(split_indices(2, 0).val.size(), 1u);
}

TEST(LifterTraining, OverfitsATinySet) {
  const auto data = tiny_dataset(10, 1);
  LifterConfig c;
  c.k_s = data.k_s;
  c.token_dim = 16;
  c.heads = 2;
  c.hidden_dim = 64;
  c.epochs = 500;
  c.batch_size = 8;
  c.learning_rate = 3e-3;
  const auto res = train(data, c);
  EXPECT_LT(res.report.train_mse.back(), 1e-3);
}

TEST(LifterTraining, LossMostlyDecreasesEarlyAndIsDeterministic) {
  const auto data = tiny_dataset(300, 2);
  LifterConfig c;
  c.k_s = data.k_s;
  c.token_dim = 16;
  c.heads = 2;
  c.hidden_dim = 64;
  c.epochs = 6;
  c.seed = 5;
  const auto a = train(data, c);
  int drops = 0;
  for (std::size_t e = 1; e < 6; ++e) drops += a.report.train_mse[e] <= a.report.train_mse[e - 1];
  EXPECT_GE(drops, 4);
  const auto b = train(data, c);
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.report.val_mse, b.report.val_mse);
  EXPECT_NEAR(a.report.final_val_mse, *std::min_element(a.report.val_mse.begin(), a.report.val_mse.end()), 1e-15);
}

TEST(LifterTraining, KeypointCountMismatchIsContractError) {
  const auto data = tiny_dataset(20, 3);
  auto c = tiny(2);
  EXPECT_THROW(train(data, c), ContractError);
}

TEST(ModelIo, RoundTripIsFloat32Exact) {
  auto m = init_lifter(tiny(2));
  const auto bytes = serialize_model(m, {{"note", "x"}});
  const auto back = deserialize_model(bytes);
  EXPECT_EQ(back.model.config, m.config);
  EXPECT_EQ(back.metadata.at("note"), "x");
  EXPECT_EQ(back.model.params, m.params.cast<float>().cast<double>());
  EXPECT_EQ(serialize_model(back.model, {{"note", "x"}}), bytes);
}

TEST(ModelIo, RejectsCorruption) {
  const auto bytes = serialize_model(init_lifter(tiny(4)));
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), FormatError);
  bad = bytes;
  bad.back() = static_cast<char>(bad.back() ^ 0x40);
  EXPECT_THROW(deserialize_model(bad), FormatError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 4)), FormatError);
  EXPECT_THROW(deserialize_model("L3DMODEL"), FormatError);
}

TEST(ModelIo, FileRoundTrip) {
  const auto m = init_lifter(tiny(0));
  const auto path = std::filesystem::temp_directory_path() / "l3d_test_model" / "m.l3dm";
  save_model(path, m);
  EXPECT_EQ(load_model(path).model.params, m.params.cast<float>().cast<double>());
  EXPECT_THROW(load_model(path.parent_path() / "missing.l3dm"), IoError);
}
