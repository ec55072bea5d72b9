#pragma once

// Deep-pose lookup table: nearest-neighbour completion of soft poses, plus
// PCA and k-means analysis of the stored poses.

#include "l3d/common.hpp"
#include "l3d/datagen.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace l3d {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LookupEntry {
  Points3 pose;  // k_d x 3, unit-cube normalized
  std::string action;
  std::uint64_t frame_index = 0;
  std::uint64_t record_id = 0;
};

namespace detail {

/// Squared Euclidean distance, summed in index order. Every query path
/// uses this so exhaustive and indexed searches agree bit for bit.
inline double squared_distance(const double* a, const double* b, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Best {
  double d2 = std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();

  void offer(double d2_new, std::size_t i) {
    if (d2_new < d2 || (d2_new == d2 && i < index)) {
      d2 = d2_new;
      index = i;
    }
  }
};

/// Exact k-d tree over the rows of a matrix. Ties resolve to the lowest row.
class KdTree {
 public:
  explicit KdTree(RowMatrix points, std::size_t leaf_size = 8) : pts_(std::move(points)), leaf_size_(leaf_size) {
    order_.resize(static_cast<std::size_t>(pts_.rows()));
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) build(0, order_.size());
  }

  Best nearest(const double* q) const {
    Best best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_ (leaves)
    Eigen::Index dim = -1;           // -1 for a leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;
    const auto& p = pts_;
    Eigen::Index dim = 0;
    double widest = -1.0;
    for (Eigen::Index d = 0; d < p.cols(); ++d) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const double v = p(static_cast<Eigen::Index>(order_[i]), d);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        dim = d;
      }
    }
    if (widest <= 0.0) return id;  // all points identical: keep as leaf
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       const double va = p(static_cast<Eigen::Index>(a), dim);
                       const double vb = p(static_cast<Eigen::Index>(b), dim);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = p(static_cast<Eigen::Index>(order_[mid]), dim);
    // Left holds values <= split, right holds values >= split.
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].dim = dim;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const double* q, Best& best) const {
    const Node& n = nodes_[id];
    const auto& p = pts_;
    if (n.dim < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const auto row = static_cast<Eigen::Index>(order_[i]);
        best.offer(squared_distance(q, p.row(row).data(), p.cols()), order_[i]);
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    const std::size_t near = diff <= 0.0 ? n.left : n.right;
    const std::size_t far = diff <= 0.0 ? n.right : n.left;
    search(near, q, best);
    // Equality still visits: an equally distant point may have a lower index.
    if (diff * diff <= best.d2) search(far, q, best);
  }

  RowMatrix pts_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace detail

struct QueryResult {
  std::size_t index = 0;
  double distance = 0.0;
  Points3 pose;
  std::string action;
};

enum class QueryMode { indexed, brute_force };

/// Immutable after construction; safe for concurrent queries.
class LookupTable {
 public:
  LookupTable(std::vector<std::size_t> soft_subset, std::vector<LookupEntry> entries)
      : soft_(std::move(soft_subset)), entries_(std::move(entries)) {
    require(!entries_.empty(), "lookup table needs at least one entry");
    require(!soft_.empty(), "lookup table needs a soft subset");
    kd_ = static_cast<std::size_t>(entries_.front().pose.rows());
    for (std::size_t k = 0; k < soft_.size(); ++k) {
      require(soft_[k] < kd_, "soft subset index out of range");
      if (k > 0) require(soft_[k] > soft_[k - 1], "soft subset must be strictly increasing");
    }
    const auto n = static_cast<Eigen::Index>(entries_.size());
    full_.resize(n, static_cast<Eigen::Index>(3 * kd_));
    soft_rows_.resize(n, static_cast<Eigen::Index>(3 * soft_.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& e = entries_[static_cast<std::size_t>(i)];
      require(static_cast<std::size_t>(e.pose.rows()) == kd_,
              "entry " + std::to_string(i) + " has " + std::to_string(e.pose.rows()) + " keypoints, expected " +
                  std::to_string(kd_));
      require(e.pose.allFinite() && e.pose.minCoeff() >= 0.0 && e.pose.maxCoeff() <= 1.0,
              "entry " + std::to_string(i) + " is not unit-cube normalized");
      for (std::size_t r = 0; r < kd_; ++r)
        for (int c = 0; c < 3; ++c) full_(i, static_cast<Eigen::Index>(3 * r + c)) = e.pose(static_cast<Eigen::Index>(r), c);
      for (std::size_t k = 0; k < soft_.size(); ++k)
        for (int c = 0; c < 3; ++c)
          soft_rows_(i, static_cast<Eigen::Index>(3 * k + c)) = e.pose(static_cast<Eigen::Index>(soft_[k]), c);
    }
    tree_ = std::make_shared<const detail::KdTree>(soft_rows_);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t k_d() const noexcept { return kd_; }
  const std::vector<std::size_t>& soft_subset() const noexcept { return soft_; }
  const std::vector<LookupEntry>& entries() const noexcept { return entries_; }
  const LookupEntry& entry(std::size_t i) const { return entries_.at(i); }

  /// n x 3k_d flattened deep poses.
  const RowMatrix& flattened() const noexcept { return full_; }
  /// n x 3k_s flattened soft rows.
  const RowMatrix& soft_vectors() const noexcept { return soft_rows_; }

  Points3 soft_rows(std::size_t i) const {
    Points3 out(static_cast<Eigen::Index>(soft_.size()), 3);
    for (std::size_t k = 0; k < soft_.size(); ++k)
      out.row(static_cast<Eigen::Index>(k)) = entries_.at(i).pose.row(static_cast<Eigen::Index>(soft_[k]));
    return out;
  }

  QueryResult query(const Points3& soft_pose, QueryMode mode = QueryMode::indexed) const {
    require(static_cast<std::size_t>(soft_pose.rows()) == soft_.size(),
            "query has " + std::to_string(soft_pose.rows()) + " keypoints, table soft subset has " +
                std::to_string(soft_.size()));
    require(soft_pose.allFinite(), "query pose must be finite");
    const double* q = soft_pose.data();  // row-major k_s x 3 == flattened order
    detail::Best best;
    if (mode == QueryMode::brute_force) {
      for (Eigen::Index i = 0; i < soft_rows_.rows(); ++i)
        best.offer(detail::squared_distance(q, soft_rows_.row(i).data(), soft_rows_.cols()),
                   static_cast<std::size_t>(i));
    } else {
      best = tree_->nearest(q);
    }
    QueryResult r;
    r.index = best.index;
    r.distance = std::sqrt(best.d2);
    r.pose = entries_[best.index].pose;
    r.action = entries_[best.index].action;
    return r;
  }

  bool operator==(const LookupTable& o) const {
    if (soft_ != o.soft_ || entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = o.entries_[i];
      if (a.action != b.action || a.frame_index != b.frame_index || a.record_id != b.record_id ||
          a.pose.rows() != b.pose.rows() || a.pose != b.pose)
        return false;
    }
    return true;
  }

 private:
  std::vector<std::size_t> soft_;
  std::vector<LookupEntry> entries_;
  std::size_t kd_ = 0;
  RowMatrix full_;
  RowMatrix soft_rows_;
  std::shared_ptr<const detail::KdTree> tree_;
};

/// One entry per record, in dataset order.
inline LookupTable build_table(const std::vector<DatasetRecord>& records, std::vector<std::size_t> soft_subset) {
  require(!records.empty(), "cannot build a lookup table from an empty dataset");
  std::vector<LookupEntry> entries;
  entries.reserve(records.size());
  const auto kd = records.front().k3d_norm.rows();
  for (const auto& r : records) {
    require(r.k3d_norm.rows() == kd, "record " + std::to_string(r.id) + " has inconsistent k_d");
    entries.push_back({r.k3d_norm, r.action, r.frame_index, r.id});
  }
  return LookupTable(std::move(soft_subset), std::move(entries));
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;     // d x m, orthonormal columns
  Eigen::VectorXd eigenvalues;    // m, descending (sample covariance)
  Eigen::VectorXd spectrum;       // all d eigenvalues, descending
  RowMatrix projections;          // n x m
  bool rank_deficient = false;    // fewer than the requested components exist
};

/// Principal components of the rows of `data` via a symmetric eigensolve of
/// the sample covariance. Each component's largest-magnitude coordinate is
/// made positive.
inline PcaResult pca(const RowMatrix& data, Eigen::Index n_components) {
  require(data.rows() >= 2, "PCA needs at least two rows");
  require(n_components >= 1 && n_components <= data.cols(), "bad component count");
  PcaResult r;
  r.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - r.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  require(es.info() == Eigen::Success, "eigensolver failed");
  const Eigen::Index d = cov.rows();
  r.spectrum = es.eigenvalues().reverse().cwiseMax(0.0);
  const double tol = std::max(r.spectrum(0), 1e-300) * 1e-12 * static_cast<double>(d);
  Eigen::Index rank = 0;
  while (rank < d && r.spectrum(rank) > tol) ++rank;
  const Eigen::Index m = std::min(n_components, rank);
  r.rank_deficient = m < n_components;
  r.components.resize(d, m);
  r.eigenvalues.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    r.components.col(j) = v;
    r.eigenvalues(j) = r.spectrum(j);
  }
  r.projections = centered * r.components;
  return r;
}

inline PcaResult pca(const LookupTable& table, Eigen::Index n_components = 2) {
  return pca(table.flattened(), n_components);
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 300;
  std::size_t restarts = 4;  // best final inertia wins; ties to the earliest
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  RowMatrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> inertia_history;  // after each assignment step
};

namespace detail {

inline KMeansResult kmeans_once(const RowMatrix& x, std::size_t k, Rng& rng, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::Index d = x.cols();
  KMeansResult r;
  r.centroids.resize(static_cast<Eigen::Index>(k), d);

  // k-means++ seeding.
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t first = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += dist2[i];
      if (total > 0.0) {
        double u = rng.uniform() * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (dist2[i] <= 0.0) continue;
          pick = i;
          u -= dist2[i];
          if (u < 0.0) break;
        }
      } else {
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      }
    }
    chosen[pick] = 1;
    r.centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i], squared_distance(x.row(static_cast<Eigen::Index>(i)).data(),
                                                     r.centroids.row(static_cast<Eigen::Index>(c)).data(), d));
  }

  r.assignments.assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> own(n, 0.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Best b;
      for (std::size_t c = 0; c < k; ++c)
        b.offer(squared_distance(x.row(static_cast<Eigen::Index>(i)).data(),
                                 r.centroids.row(static_cast<Eigen::Index>(c)).data(), d),
                c);
      if (b.index != r.assignments[i]) changed = true;
      r.assignments[i] = b.index;
      own[i] = b.d2;
      inertia += b.d2;
    }
    r.inertia = inertia;
    r.inertia_history.push_back(inertia);
    r.iterations = it + 1;
    if (!changed) {
      r.converged = true;
      break;
    }
    // Update step; an emptied cluster takes the point farthest from its centroid.
    RowMatrix sums = RowMatrix::Zero(static_cast<Eigen::Index>(k), d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(r.assignments[i])) += x.row(static_cast<Eigen::Index>(i));
      ++counts[r.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        r.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      } else {
        const auto far = static_cast<std::size_t>(std::max_element(own.begin(), own.end()) - own.begin());
        r.centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
        own[far] = 0.0;
      }
    }
  }
  return r;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; stops when assignments are
/// stable or after `max_iterations`.
inline KMeansResult kmeans(const RowMatrix& x, const KMeansOptions& opt) {
  require(opt.k >= 1, "k must be positive");
  require(static_cast<std::size_t>(x.rows()) >= opt.k,
          "k = " + std::to_string(opt.k) + " exceeds the " + std::to_string(x.rows()) + " entries");
  require(opt.restarts >= 1 && opt.max_iterations >= 1, "restarts and iterations must be positive");
  Rng rng(opt.seed);
  std::optional<KMeansResult> best;
  for (std::size_t r = 0; r < opt.restarts; ++r) {
    auto run = detail::kmeans_once(x, opt.k, rng, opt.max_iterations);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  return *best;
}

struct ClusterSummary {
  std::size_t size = 0;
  std::string majority_action;
  double purity = 0.0;
};

struct ClusterReport {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::vector<ClusterSummary> clusters;
  RowMatrix pca2;  // n x 2 (fewer columns if the table is rank deficient)
  double inertia = 0.0;
  std::size_t iterations = 0;
};

/// k-means over full deep poses, with per-cluster majority-action purity and
/// a 2-component PCA projection for plotting.
inline ClusterReport cluster_table(const LookupTable& table, const KMeansOptions& opt) {
  const auto km = kmeans(table.flattened(), opt);
  ClusterReport rep;
  rep.k = opt.k;
  rep.assignments = km.assignments;
  rep.inertia = km.inertia;
  rep.iterations = km.iterations;
  std::vector<std::map<std::string, std::size_t>> tallies(opt.k);
  for (std::size_t i = 0; i < table.size(); ++i) ++tallies[km.assignments[i]][table.entry(i).action];
  for (const auto& t : tallies) {
    ClusterSummary s;
    for (const auto& [action, count] : t) {
      s.size += count;
      if (count > s.purity) {  // map order: ties go to the alphabetically first action
        s.purity = static_cast<double>(count);
        s.majority_action = action;
      }
    }
    s.purity = s.size > 0 ? s.purity / static_cast<double>(s.size) : 0.0;
    rep.clusters.push_back(s);
  }
  rep.pca2 = table.size() >= 2 ? pca(table, 2).projections : RowMatrix::Zero(static_cast<Eigen::Index>(table.size()), 2);
  return rep;
}

}  // namespace l3d
