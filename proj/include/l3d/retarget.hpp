#pragma once

// Pose retargeting by per-bone shortest-arc rotations, and per-channel
// histogram specification for tone transfer.

#include "l3d/dataset_io.hpp"
#include "l3d/lookup.hpp"
#include "l3d/skeleton.hpp"

#include <array>

namespace l3d {

/// Minimal rotation taking direction `from` onto direction `to` (neither
/// needs to be unit length). Antiparallel inputs rotate by pi about a fixed
/// axis perpendicular to `from`: from x e_x, or from x e_y when `from` is
/// nearly parallel to e_x.
inline Quat shortest_arc(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const double w = 1.0 + a.dot(b);
  if (w < 1e-12) {
    Vec3 axis = a.cross(Vec3::UnitX());
    if (axis.squaredNorm() < 1e-6) axis = a.cross(Vec3::UnitY());
    axis.normalize();
    return Quat(0.0, axis.x(), axis.y(), axis.z());
  }
  const Vec3 v = a.cross(b);
  return Quat(w, v.x(), v.y(), v.z()).normalized();
}

inline constexpr double kMinBoneLength = 1e-12;

/// Twist-free joint rotations reproducing `pose` on `sk`. The root rotation
/// is identity; each bone's rotation is expressed in its parent's frame.
inline PoseAngles solve_angles(const Skeleton& sk, const Pose3D& pose) {
  require(static_cast<std::size_t>(pose.rows()) == sk.size(),
          "pose has " + std::to_string(pose.rows()) + " keypoints, skeleton has " + std::to_string(sk.size()));
  require(pose.allFinite(), "pose contains non-finite coordinates");
  const auto n = sk.size();

  std::vector<double> ratios;
  ratios.reserve(n);
  for (std::size_t i = 1; i < n; ++i) {
    const auto& b = sk.bone(i);
    const Vec3 obs = (pose.row(static_cast<Eigen::Index>(i)) - pose.row(static_cast<Eigen::Index>(*b.parent))).transpose();
    const double len = obs.norm();
    if (!(len > kMinBoneLength)) throw SingularBoneError(b.name, "observed bone '" + b.name + "' has zero length");
    ratios.push_back(len / b.rest_offset.norm());
  }

  PoseAngles a = PoseAngles::identity(n);
  a.root_translation = pose.row(0).transpose();
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    const std::size_t m = ratios.size() / 2;
    a.root_scale = ratios.size() % 2 ? ratios[m] : 0.5 * (ratios[m - 1] + ratios[m]);
  }

  std::vector<Quat> global(n, Quat::Identity());
  for (std::size_t i = 1; i < n; ++i) {
    const auto& b = sk.bone(i);
    const std::size_t p = *b.parent;
    const Vec3 obs = (pose.row(static_cast<Eigen::Index>(i)) - pose.row(static_cast<Eigen::Index>(p))).transpose();
    const Quat world = shortest_arc(global[p] * b.rest_offset, obs);
    Quat local = (global[p].conjugate() * world * global[p]).normalized();
    if (local.w() < 0.0) local.coeffs() = -local.coeffs();
    a.rotations[i] = local;
    global[i] = (global[p] * local).normalized();
  }
  return a;
}

struct RetargetResult {
  PoseAngles angles;
  Pose3D reconstructed;
  std::vector<double> residual;  // per keypoint, unit-cube units
  QueryResult match;

  double residual_mean() const {
    double s = 0.0;
    for (double r : residual) s += r;
    return residual.empty() ? 0.0 : s / static_cast<double>(residual.size());
  }
  double residual_max() const {
    return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
  }
};

/// Angles for a deep pose plus the FK reconstruction and per-keypoint error.
inline RetargetResult retarget_deep(const Skeleton& sk, const Pose3D& deep) {
  RetargetResult r;
  r.angles = solve_angles(sk, deep);
  r.reconstructed = forward_kinematics(sk, r.angles);
  r.residual.resize(sk.size());
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    r.residual[i] = (r.reconstructed.row(row) - deep.row(row)).norm();
  }
  return r;
}

/// Lifted soft pose -> nearest deep pose in the table -> skeleton angles.
inline RetargetResult retarget(const Skeleton& sk, const Points3& lifted_soft, const LookupTable& table,
                               QueryMode mode = QueryMode::indexed) {
  require(table.k_d() == sk.size(), "lookup table k_d (" + std::to_string(table.k_d()) +
                                        ") does not match skeleton (" + std::to_string(sk.size()) + ")");
  auto match = table.query(lifted_soft, mode);
  auto r = retarget_deep(sk, match.pose);
  r.match = std::move(match);
  return r;
}

inline nlohmann::json retarget_to_json(const Skeleton& sk, const RetargetResult& r) {
  nlohmann::json bones = nlohmann::json::array();
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const auto& q = r.angles.rotations[i];
    bones.push_back({{"name", sk.bone(i).name}, {"quaternion", {q.w(), q.x(), q.y(), q.z()}}});
  }
  const auto& t = r.angles.root_translation;
  return {{"skeleton_hash", hex64(sk.hash())},
          {"bones", std::move(bones)},
          {"root_translation", {t.x(), t.y(), t.z()}},
          {"root_scale", r.angles.root_scale},
          {"residual", {{"mean", r.residual_mean()}, {"max", r.residual_max()}}},
          {"match", {{"entry", r.match.index}, {"distance", r.match.distance}, {"action", r.match.action}}}};
}

// ---------------------------------------------------------------------------
// Tone transfer

using Histogram = std::array<std::uint64_t, 256>;
using ChannelMap = std::array<std::uint8_t, 256>;

struct ToneMap {
  std::vector<ChannelMap> channels;
};

inline Histogram histogram(std::span<const std::uint8_t> pixels) {
  Histogram h{};
  for (auto p : pixels) ++h[p];
  return h;
}

/// Histogram specification for one channel. Each target level maps through
/// the midpoint of its CDF step to the smallest source level whose CDF
/// reaches it, so a constant channel lands on the source median.
inline ChannelMap match_channel(const Histogram& source, const Histogram& target) {
  std::uint64_t ns = 0, nt = 0;
  for (int v = 0; v < 256; ++v) {
    ns += source[static_cast<std::size_t>(v)];
    nt += target[static_cast<std::size_t>(v)];
  }
  require(ns > 0, "source histogram is empty");
  require(nt > 0, "target channel has no pixels");
  // Work in doubled integer units to keep the midpoint exact:
  // level v maps to the first s with 2*Cs(s)*nt >= (2*Ct(v-1) + ht(v))*ns.
  std::array<std::uint64_t, 256> cs{};
  std::uint64_t acc = 0;
  for (std::size_t s = 0; s < 256; ++s) cs[s] = acc += source[s];
  ChannelMap map{};
  std::uint64_t below = 0;
  std::size_t s = 0;
  for (std::size_t v = 0; v < 256; ++v) {
    const unsigned __int128 want = static_cast<unsigned __int128>(2 * below + target[v]) * ns;
    while (s < 255 && static_cast<unsigned __int128>(2 * cs[s]) * nt < want) ++s;
    map[v] = static_cast<std::uint8_t>(s);
    below += target[v];
  }
  return map;
}

/// Remaps each target channel so its distribution follows the matching
/// source histogram. Channels are modified in place.
inline ToneMap tone_transfer(std::span<const Histogram> source, std::vector<std::vector<std::uint8_t>>& target) {
  require(source.size() == target.size(), "tone transfer: channel count mismatch");
  require(!target.empty(), "tone transfer: no channels");
  ToneMap tm;
  for (std::size_t c = 0; c < target.size(); ++c) {
    require(!target[c].empty(), "tone transfer: channel " + std::to_string(c) + " is empty");
    tm.channels.push_back(match_channel(source[c], histogram(target[c])));
    for (auto& p : target[c]) p = tm.channels.back()[p];
  }
  return tm;
}

/// One row per channel, 256 comma-separated output levels.
inline std::string tone_map_csv(const ToneMap& tm) {
  std::ostringstream ss;
  for (const auto& ch : tm.channels) {
    for (std::size_t v = 0; v < 256; ++v) ss << (v ? "," : "") << static_cast<int>(ch[v]);
    ss << '\n';
  }
  return ss.str();
}

}  // namespace l3d
