#pragma once

// Side-by-side evaluation of lifter variants on a validation split.

#include "l3d/lifter.hpp"
#include "l3d/metrics.hpp"

#include <iomanip>

namespace l3d {

struct EvalRow {
  std::string variant;
  double mse = 0.0;
  double pdj_02 = 0.0;
  double pdj_005 = 0.0;
};

struct EvalReport {
  std::string dataset_id;
  std::string split;
  std::string bbox = "3d";  // PDJ uses the ground-truth 3D bounding-box diagonal
  std::vector<EvalRow> rows;
};

struct Variant {
  std::string name;
  LifterModel model;
};

/// Lifts every validation record with each variant. The split is the same
/// seeded 80/20 split that training uses.
inline EvalReport evaluate(const std::vector<Variant>& variants, const LiftData& data, std::uint64_t split_seed,
                           std::string dataset_id = {}) {
  require(!variants.empty(), "evaluate needs at least one model");
  for (const auto& v : variants)
    require(v.model.config.k_s == data.k_s, "model '" + v.name + "' has k_s " + std::to_string(v.model.config.k_s) +
                                                 ", dataset has " + std::to_string(data.k_s));
  const auto split = split_indices(data.size(), split_seed);
  const Mat<double> x = detail::gather(data.x, split.val);
  const auto gt = detail::rows_to_poses(detail::gather(data.y, split.val), data.k_s);
  const auto diag = bbox_diagonals(gt);

  EvalReport rep;
  rep.dataset_id = std::move(dataset_id);
  rep.split = "validation " + std::to_string(split.val.size()) + " of " + std::to_string(data.size()) +
              " records, split seed " + std::to_string(split_seed);
  for (const auto& v : variants) {
    const auto pred = predict(v.model, x);
    rep.rows.push_back({v.name, mse(pred, gt), pdj(pred, gt, diag, 0.2), pdj(pred, gt, diag, 0.05)});
  }
  return rep;
}

inline std::string eval_csv(const EvalReport& r) {
  std::ostringstream ss;
  ss.precision(9);
  ss << "variant,mse,pdj@0.2,pdj@0.05\n";
  for (const auto& row : r.rows) ss << row.variant << ',' << row.mse << ',' << row.pdj_02 << ',' << row.pdj_005 << '\n';
  return ss.str();
}

inline std::string eval_text(const EvalReport& r) {
  std::size_t w = std::string("Model").size();
  for (const auto& row : r.rows) w = std::max(w, row.variant.size());
  std::ostringstream ss;
  ss << "dataset: " << (r.dataset_id.empty() ? "-" : r.dataset_id) << "\n"
     << "split:   " << r.split << "\n"
     << "pdj bbox: " << r.bbox << "\n\n";
  ss << std::left << std::setw(static_cast<int>(w)) << "Model" << std::right << std::setw(10) << "MSE"
     << std::setw(10) << "PDJ@0.2" << std::setw(10) << "PDJ@0.05" << '\n';
  ss << std::string(w + 30, '-') << '\n';
  ss << std::fixed;
  for (const auto& row : r.rows)
    ss << std::left << std::setw(static_cast<int>(w)) << row.variant << std::right << std::setprecision(4)
       << std::setw(10) << row.mse << std::setprecision(3) << std::setw(10) << row.pdj_02 << std::setw(10)
       << row.pdj_005 << '\n';
  return ss.str();
}

}  // namespace l3d
