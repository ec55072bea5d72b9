#pragma once

// 2D -> 3D lifting network: token embedding, one residual multi-head
// self-attention block, and a two-layer output MLP. Gradients are derived by
// hand; the network is templated on the scalar type so gradient checks can
// run in extended precision.

#include "l3d/datagen.hpp"
#include "l3d/metrics.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <type_traits>

namespace l3d {

struct LifterConfig {
  std::size_t k_s = 13;
  Eigen::Index token_dim = 64;
  Eigen::Index heads = 4;
  Eigen::Index hidden_dim = 256;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    require(k_s >= 1, "lifter: k_s must be >= 1");
    require(token_dim >= 1 && hidden_dim >= 1, "lifter: layer widths must be >= 1");
    require(heads == 0 || heads == 2 || heads == 4, "lifter: heads must be 0, 2 or 4");
    require(heads == 0 || token_dim % heads == 0, "lifter: token_dim must be divisible by heads");
    require(epochs >= 1 && batch_size >= 1, "lifter: epochs and batch_size must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "lifter: learning_rate must be positive");
  }

  bool operator==(const LifterConfig&) const = default;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return rows * cols; }
  bool is_bias() const { return name.ends_with(".bias"); }
};

/// Named tensors in storage order. The key projection has no bias: a bias on
/// keys shifts every score in a softmax row equally and has zero gradient.
inline std::vector<TensorSpec> tensor_layout(const LifterConfig& c) {
  const auto k = static_cast<Eigen::Index>(c.k_s);
  const auto d = c.token_dim;
  std::vector<TensorSpec> out;
  Eigen::Index off = 0;
  auto add = [&](std::string name, Eigen::Index r, Eigen::Index cols) {
    out.push_back({std::move(name), r, cols, off});
    off += r * cols;
  };
  add("embed.weight", 2, d);
  add("embed.index", k, d);
  if (c.heads > 0) {
    add("attn.q.weight", d, d);
    add("attn.q.bias", 1, d);
    add("attn.k.weight", d, d);
    add("attn.v.weight", d, d);
    add("attn.v.bias", 1, d);
    add("attn.out.weight", d, d);
    add("attn.out.bias", 1, d);
  }
  add("mlp.fc1.weight", k * d, c.hidden_dim);
  add("mlp.fc1.bias", 1, c.hidden_dim);
  add("mlp.fc2.weight", c.hidden_dim, 3 * k);
  add("mlp.fc2.bias", 1, 3 * k);
  return out;
}

inline Eigen::Index parameter_count(const std::vector<TensorSpec>& layout) {
  return layout.empty() ? 0 : layout.back().offset + layout.back().size();
}

/// Matrix views over a flat parameter (or gradient) vector.
template <class T>
struct TensorViews {
  using S = std::remove_const_t<T>;
  using M = Eigen::Map<std::conditional_t<std::is_const_v<T>, const Mat<S>, Mat<S>>>;

  TensorViews(T* base, const std::vector<TensorSpec>& layout)
      : embed(at(base, layout, "embed.weight")),
        index(at(base, layout, "embed.index")),
        wq(at(base, layout, "attn.q.weight")),
        bq(at(base, layout, "attn.q.bias")),
        wk(at(base, layout, "attn.k.weight")),
        wv(at(base, layout, "attn.v.weight")),
        bv(at(base, layout, "attn.v.bias")),
        wo(at(base, layout, "attn.out.weight")),
        bo(at(base, layout, "attn.out.bias")),
        w1(at(base, layout, "mlp.fc1.weight")),
        b1(at(base, layout, "mlp.fc1.bias")),
        w2(at(base, layout, "mlp.fc2.weight")),
        b2(at(base, layout, "mlp.fc2.bias")) {}

  M embed, index, wq, bq, wk, wv, bv, wo, bo, w1, b1, w2, b2;

 private:
  static M at(T* base, const std::vector<TensorSpec>& layout, std::string_view name) {
    for (const auto& t : layout)
      if (t.name == name) return M(base + t.offset, t.rows, t.cols);
    return M(nullptr, 0, 0);
  }
};

template <class S>
struct LifterNet {
  LifterConfig config;
  std::vector<TensorSpec> layout;
  Vec<S> params;

  LifterNet() = default;
  explicit LifterNet(const LifterConfig& c) : config(c), layout(tensor_layout(c)) {
    c.validate();
    params = Vec<S>::Zero(parameter_count(layout));
  }

  TensorViews<const S> views() const { return {params.data(), layout}; }
  TensorViews<S> views() { return {params.data(), layout}; }

  const TensorSpec& spec(std::string_view name) const {
    for (const auto& t : layout)
      if (t.name == name) return t;
    throw ContractError("lifter has no tensor named '" + std::string(name) + "'");
  }

  Eigen::Map<Mat<S>> tensor(std::string_view name) {
    const auto& t = spec(name);
    return {params.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<const Mat<S>> tensor(std::string_view name) const {
    const auto& t = spec(name);
    return {params.data() + t.offset, t.rows, t.cols};
  }

  template <class U>
  LifterNet<U> cast() const {
    LifterNet<U> out;
    out.config = config;
    out.layout = layout;
    out.params = params.template cast<U>();
    return out;
  }
};

using LifterModel = LifterNet<double>;

/// Fan-in scaled uniform weights, zero biases.
inline LifterModel init_lifter(const LifterConfig& c) {
  LifterModel m(c);
  auto rng = Rng::stream(c.seed, 0x11f7e4, 0);
  for (const auto& t : m.layout) {
    if (t.is_bias()) continue;
    const double fan_in = t.name == "embed.index" ? 2.0 : static_cast<double>(t.rows);
    const double a = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < t.size(); ++i) m.params[t.offset + i] = rng.uniform(-a, a);
  }
  return m;
}

namespace detail {

template <class S>
S gelu(S x) {
  const S c = std::sqrt(S(2) / S(M_PI));
  const S u = c * (x + S(0.044715) * x * x * x);
  return S(0.5) * x * (S(1) + std::tanh(u));
}

template <class S>
S gelu_grad(S x) {
  const S c = std::sqrt(S(2) / S(M_PI));
  const S u = c * (x + S(0.044715) * x * x * x);
  const S th = std::tanh(u);
  return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * c * (S(1) + S(3) * S(0.044715) * x * x);
}

}  // namespace detail

/// Intermediate activations of a batch forward pass. Rows of `x` are
/// flattened k_s x 2 inputs; rows of `out` are flattened k_s x 3 outputs.
template <class S>
struct ForwardCache {
  Mat<S> tokens_in;  // (B*k) x 2
  Mat<S> t;          // embedded tokens, (B*k) x D
  Mat<S> q, k, v, o;
  std::vector<Mat<S>> attn;  // B*H matrices, k x k
  Mat<S> y;                  // block output, (B*k) x D
  Mat<S> hpre, g;            // B x hidden
  Mat<S> out;                // B x 3k
};

template <class S>
void forward_batch(const LifterNet<S>& net, const Mat<S>& x, ForwardCache<S>& c) {
  const auto& cfg = net.config;
  const auto k = static_cast<Eigen::Index>(cfg.k_s);
  const Eigen::Index d = cfg.token_dim;
  const Eigen::Index nb = x.rows();
  require(x.cols() == 2 * k, "lifter input must have 2*k_s columns");
  const auto w = net.views();

  c.tokens_in = Eigen::Map<const Mat<S>>(x.data(), nb * k, 2);
  c.t = c.tokens_in * w.embed;
  for (Eigen::Index b = 0; b < nb; ++b) c.t.middleRows(b * k, k) += w.index;

  if (cfg.heads > 0) {
    const Eigen::Index h_count = cfg.heads;
    const Eigen::Index dh = d / h_count;
    const S scale = S(1) / std::sqrt(S(dh));
    c.q = c.t * w.wq;
    c.q.rowwise() += w.bq.row(0);
    c.k = c.t * w.wk;
    c.v = c.t * w.wv;
    c.v.rowwise() += w.bv.row(0);
    c.o.resize(nb * k, d);
    c.attn.resize(static_cast<std::size_t>(nb * h_count));
    for (Eigen::Index b = 0; b < nb; ++b) {
      for (Eigen::Index h = 0; h < h_count; ++h) {
        auto& a = c.attn[static_cast<std::size_t>(b * h_count + h)];
        a = (c.q.block(b * k, h * dh, k, dh) * c.k.block(b * k, h * dh, k, dh).transpose()) * scale;
        for (Eigen::Index r = 0; r < k; ++r) {
          auto row = a.row(r);
          row.array() = (row.array() - row.maxCoeff()).exp();
          row /= row.sum();
        }
        c.o.block(b * k, h * dh, k, dh) = a * c.v.block(b * k, h * dh, k, dh);
      }
    }
    c.y = c.o * w.wo;
    c.y.rowwise() += w.bo.row(0);
    c.y += c.t;
  } else {
    c.y = c.t;
  }

  const Eigen::Map<const Mat<S>> z(c.y.data(), nb, k * d);
  c.hpre = z * w.w1;
  c.hpre.rowwise() += w.b1.row(0);
  c.g = c.hpre.unaryExpr([](S v) { return detail::gelu(v); });
  c.out = c.g * w.w2;
  c.out.rowwise() += w.b2.row(0);
}

template <class S>
struct LossGrad {
  S loss = S(0);
  Vec<S> grad;
};

/// Mean squared error of the batch and its exact gradient for every weight.
template <class S>
LossGrad<S> gradients(const LifterNet<S>& net, const Mat<S>& x, const Mat<S>& target) {
  require(x.rows() >= 1, "gradients need a non-empty batch");
  require(target.rows() == x.rows() && target.cols() == static_cast<Eigen::Index>(3 * net.config.k_s),
          "gradient target shape mismatch");
  ForwardCache<S> c;
  forward_batch(net, x, c);

  const auto& cfg = net.config;
  const auto k = static_cast<Eigen::Index>(cfg.k_s);
  const Eigen::Index d = cfg.token_dim;
  const Eigen::Index nb = x.rows();
  const auto w = net.views();

  LossGrad<S> res;
  res.grad = Vec<S>::Zero(net.params.size());
  TensorViews<S> gw(res.grad.data(), net.layout);

  const Mat<S> resid = c.out - target;
  const S n = S(resid.size());
  res.loss = resid.squaredNorm() / n;
  const Mat<S> d_out = resid * (S(2) / n);

  gw.w2 = c.g.transpose() * d_out;
  gw.b2 = d_out.colwise().sum();
  Mat<S> d_h = d_out * w.w2.transpose();
  d_h.array() *= c.hpre.unaryExpr([](S v) { return detail::gelu_grad(v); }).array();
  const Eigen::Map<const Mat<S>> z(c.y.data(), nb, k * d);
  gw.w1 = z.transpose() * d_h;
  gw.b1 = d_h.colwise().sum();
  const Mat<S> d_z = d_h * w.w1.transpose();
  const Eigen::Map<const Mat<S>> d_y(d_z.data(), nb * k, d);

  Mat<S> d_t = d_y;
  if (cfg.heads > 0) {
    const Eigen::Index h_count = cfg.heads;
    const Eigen::Index dh = d / h_count;
    const S scale = S(1) / std::sqrt(S(dh));
    gw.wo = c.o.transpose() * d_y;
    gw.bo = d_y.colwise().sum();
    const Mat<S> d_o = d_y * w.wo.transpose();
    Mat<S> d_q(nb * k, d), d_k(nb * k, d), d_v(nb * k, d);
    for (Eigen::Index b = 0; b < nb; ++b) {
      for (Eigen::Index h = 0; h < h_count; ++h) {
        const auto& a = c.attn[static_cast<std::size_t>(b * h_count + h)];
        const auto d_ob = d_o.block(b * k, h * dh, k, dh);
        const Mat<S> d_a = d_ob * c.v.block(b * k, h * dh, k, dh).transpose();
        d_v.block(b * k, h * dh, k, dh) = a.transpose() * d_ob;
        Mat<S> d_s = a.cwiseProduct(d_a);
        const Vec<S> row_dot = d_s.rowwise().sum();
        d_s -= a.cwiseProduct(row_dot.replicate(1, k));
        d_s *= scale;
        d_q.block(b * k, h * dh, k, dh) = d_s * c.k.block(b * k, h * dh, k, dh);
        d_k.block(b * k, h * dh, k, dh) = d_s.transpose() * c.q.block(b * k, h * dh, k, dh);
      }
    }
    gw.wq = c.t.transpose() * d_q;
    gw.bq = d_q.colwise().sum();
    gw.wk = c.t.transpose() * d_k;
    gw.wv = c.t.transpose() * d_v;
    gw.bv = d_v.colwise().sum();
    d_t += d_q * w.wq.transpose() + d_k * w.wk.transpose() + d_v * w.wv.transpose();
  }

  gw.embed = c.tokens_in.transpose() * d_t;
  for (Eigen::Index b = 0; b < nb; ++b) gw.index += d_t.middleRows(b * k, k);
  return res;
}

namespace detail {

inline void check_input(const LifterConfig& cfg, const Points2& k2d) {
  require(k2d.rows() == static_cast<Eigen::Index>(cfg.k_s),
          "lifter input has " + std::to_string(k2d.rows()) + " keypoints, model expects " +
              std::to_string(cfg.k_s));
  require(k2d.allFinite(), "lifter input contains non-finite values");
}

template <class S>
Mat<S> flatten_input(const Points2& k2d) {
  return Eigen::Map<const Mat<double>>(k2d.data(), 1, k2d.size()).template cast<S>();
}

}  // namespace detail

template <class S>
Points3 forward(const LifterNet<S>& net, const Points2& k2d) {
  detail::check_input(net.config, k2d);
  ForwardCache<S> c;
  forward_batch(net, detail::flatten_input<S>(k2d), c);
  const auto k = static_cast<Eigen::Index>(net.config.k_s);
  return Eigen::Map<const Mat<S>>(c.out.data(), k, 3).template cast<double>();
}

/// Token matrix after the attention block (k_s x token_dim), before flattening.
template <class S>
Mat<double> encode_tokens(const LifterNet<S>& net, const Points2& k2d) {
  detail::check_input(net.config, k2d);
  ForwardCache<S> c;
  forward_batch(net, detail::flatten_input<S>(k2d), c);
  return c.y.template cast<double>();
}

/// Per-head attention matrices (k_s x k_s); empty when heads == 0.
template <class S>
std::vector<Mat<double>> attention_maps(const LifterNet<S>& net, const Points2& k2d) {
  detail::check_input(net.config, k2d);
  ForwardCache<S> c;
  forward_batch(net, detail::flatten_input<S>(k2d), c);
  std::vector<Mat<double>> out;
  for (const auto& a : c.attn) out.push_back(a.template cast<double>());
  return out;
}

/// Mean squared difference over all k*3 components.
inline double loss(const Points3& pred, const Points3& target) {
  require(pred.rows() == target.rows(), "loss: shape mismatch");
  require(pred.rows() > 0, "loss: empty pose");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

/// Forward pass with input checks. Coordinates outside [0,1] are reported
/// through `warn` but still lifted.
inline Points3 lift(const LifterModel& m, const Points2& k2d,
                    const std::function<void(const std::string&)>& warn = {}) {
  detail::check_input(m.config, k2d);
  if (warn && (k2d.minCoeff() < 0.0 || k2d.maxCoeff() > 1.0))
    warn("lifter input outside [0,1]; was it normalized?");
  return forward(m, k2d);
}

/// Network inputs and soft 3D targets, one flattened row per record.
struct LiftData {
  Mat<double> x;  // n x 2k
  Mat<double> y;  // n x 3k
  std::size_t k_s = 0;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

inline LiftData make_lift_data(const std::vector<DatasetRecord>& records,
                               const std::vector<std::size_t>& soft_subset) {
  LiftData d;
  d.k_s = soft_subset.size();
  const auto k = static_cast<Eigen::Index>(d.k_s);
  const auto n = static_cast<Eigen::Index>(records.size());
  d.x.resize(n, 2 * k);
  d.y.resize(n, 3 * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    require(r.k2d_norm.rows() == k, "record " + std::to_string(r.id) + " has " +
                                        std::to_string(r.k2d_norm.rows()) + " 2D keypoints, expected " +
                                        std::to_string(k));
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto src = static_cast<Eigen::Index>(soft_subset[static_cast<std::size_t>(j)]);
      require(src < r.k3d_norm.rows(), "soft subset index out of range for record " + std::to_string(r.id));
      d.x.block(i, 2 * j, 1, 2) = r.k2d_norm.row(j);
      d.y.block(i, 3 * j, 1, 3) = r.k3d_norm.row(src);
    }
  }
  return d;
}

/// Deterministic train/validation split: seeded shuffle, first 80% train.
struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> val;
};

inline Split split_indices(std::size_t n, std::uint64_t seed) {
  require(n >= 2, "training needs at least 2 records");
  std::vector<Eigen::Index> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<Eigen::Index>(i);
  auto rng = Rng::stream(seed, 0x5b117, 0);
  rng.shuffle(idx.begin(), idx.end());
  const std::size_t n_val = std::clamp<std::size_t>(n / 5, 1, n - 1);
  Split s;
  s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  s.val.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  require(!s.train.empty() && !s.val.empty(), "empty train or validation split");
  return s;
}

struct TrainReport {
  std::uint64_t seed = 0;
  std::vector<double> train_mse;  // mean over the epoch's batches
  std::vector<double> val_mse;
  std::size_t best_epoch = 0;  // 0-based
  double final_val_mse = 0.0;
  double final_pdj_02 = 0.0;
  double final_pdj_005 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  double wall_seconds = 0.0;  // informational; never written to output files
};

struct TrainResult {
  LifterModel model;
  TrainReport report;
};

namespace detail {

inline Mat<double> gather(const Mat<double>& m, std::span<const Eigen::Index> rows) {
  Mat<double> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

inline Mat<double> predict_rows(const LifterModel& m, const Mat<double>& x) {
  constexpr Eigen::Index kChunk = 256;
  Mat<double> out(x.rows(), static_cast<Eigen::Index>(3 * m.config.k_s));
  ForwardCache<double> c;
  for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - s);
    forward_batch(m, Mat<double>(x.middleRows(s, len)), c);
    out.middleRows(s, len) = c.out;
  }
  return out;
}

inline std::vector<Points3> rows_to_poses(const Mat<double>& m, std::size_t k) {
  std::vector<Points3> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out.push_back(Eigen::Map<const Mat<double>>(m.row(i).data(), static_cast<Eigen::Index>(k), 3));
  return out;
}

}  // namespace detail

/// Predicts every row of `x` (n x 2k) and returns n poses.
inline std::vector<Points3> predict(const LifterModel& m, const Mat<double>& x) {
  return detail::rows_to_poses(detail::predict_rows(m, x), m.config.k_s);
}

struct EpochProgress {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

/// Mini-batch Adam training. Returns the weights of the epoch with the lowest
/// validation MSE.
inline TrainResult train(const LiftData& data, const LifterConfig& cfg,
                         const std::function<void(const EpochProgress&)>& progress = {}) {
  cfg.validate();
  require(data.k_s == cfg.k_s, "dataset k_s (" + std::to_string(data.k_s) + ") differs from config k_s (" +
                                   std::to_string(cfg.k_s) + ")");
  const auto t0 = std::chrono::steady_clock::now();
  const Split split = split_indices(data.size(), cfg.seed);
  const Mat<double> x_val = detail::gather(data.x, split.val);
  const Mat<double> y_val = detail::gather(data.y, split.val);

  TrainResult res{init_lifter(cfg), {}};
  auto& rep = res.report;
  rep.seed = cfg.seed;
  rep.n_train = split.train.size();
  rep.n_val = split.val.size();

  LifterModel& m = res.model;
  Vec<double> best = m.params;
  double best_val = std::numeric_limits<double>::infinity();
  Vec<double> m1 = Vec<double>::Zero(m.params.size());
  Vec<double> m2 = Vec<double>::Zero(m.params.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  std::vector<Eigen::Index> order = split.train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto rng = Rng::stream(cfg.seed, 0xe90c, epoch);
    rng.shuffle(order.begin(), order.end());
    double sum = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const auto len = std::min(cfg.batch_size, order.size() - s);
      const std::span<const Eigen::Index> rows(order.data() + s, len);
      const auto lg = gradients(m, detail::gather(data.x, rows), detail::gather(data.y, rows));
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
        throw Error("non_finite", "non-finite loss or gradient in epoch " + std::to_string(epoch));
      sum += lg.loss * static_cast<double>(len);
      b1t *= beta1;
      b2t *= beta2;
      m1 = beta1 * m1 + (1.0 - beta1) * lg.grad;
      m2 = beta2 * m2 + (1.0 - beta2) * lg.grad.cwiseProduct(lg.grad);
      m.params.array() -= cfg.learning_rate * (m1.array() / (1.0 - b1t)) /
                          ((m2.array() / (1.0 - b2t)).sqrt() + eps);
    }
    if (!m.params.allFinite()) throw Error("non_finite", "non-finite weights after epoch " + std::to_string(epoch));
    const double train_mse = sum / static_cast<double>(order.size());
    const double val_mse = (detail::predict_rows(m, x_val) - y_val).squaredNorm() / static_cast<double>(y_val.size());
    rep.train_mse.push_back(train_mse);
    rep.val_mse.push_back(val_mse);
    if (val_mse < best_val) {
      best_val = val_mse;
      best = m.params;
      rep.best_epoch = epoch;
    }
    if (progress) progress({epoch, train_mse, val_mse});
  }

  m.params = best;
  const auto pred = predict(m, x_val);
  const auto gt = detail::rows_to_poses(y_val, cfg.k_s);
  rep.final_val_mse = mse(pred, gt);
  rep.final_pdj_02 = pdj(pred, gt, 0.2);
  rep.final_pdj_005 = pdj(pred, gt, 0.05);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline std::string train_report_csv(const TrainReport& r) {
  std::ostringstream ss;
  ss.precision(9);
  ss << "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < r.train_mse.size(); ++e)
    ss << e + 1 << ',' << r.train_mse[e] << ',' << r.val_mse[e] << '\n';
  return ss.str();
}

}  // namespace l3d
