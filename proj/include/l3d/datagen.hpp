#pragma once

// Synthetic dataset generation: animate a rig along procedural action
// curves, orbit a pinhole camera around it, project and normalize.

#include "l3d/common.hpp"
#include "l3d/embedded_data.hpp"
#include "l3d/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace l3d {

inline constexpr int kActionFormatVersion = 1;

// Action names per species, as listed in the per-action variance table.
inline const std::vector<std::string>& species_actions(Species s) {
  static const std::vector<std::string> macaque{
      "Attack",   "Climb Down",   "Climb Right",  "Climb Up", "Climb Left", "Hit Left",
      "Hit Right", "Idle",        "Jump Forward", "Jump Inplace", "Jump Run", "Run",
      "Sitting",  "Turn Left",    "Turn Right",   "Walk"};
  static const std::vector<std::string> horse{"Attack", "Buck",  "Death", "Eat",
                                              "Falling", "Gallop", "Idle", "Jump",
                                              "Jump Run", "Sleep", "Swim", "Walk"};
  static const std::vector<std::string> none;
  switch (s) {
    case Species::macaque: return macaque;
    case Species::horse: return horse;
    case Species::custom: break;
  }
  return none;
}

inline std::size_t default_target_count(Species s) {
  return s == Species::horse ? 6000 : 8000;
}

// ---------------------------------------------------------------------------
// Camera

struct Camera {
  Vec3 position = Vec3(0, 0, -5);
  Vec3 target = Vec3::Zero();
  double fov_y = deg2rad(60.0);
  int width = 640;
  int height = 480;

  void validate() const {
    require(position.allFinite() && target.allFinite(), "camera position/target must be finite");
    require((position - target).norm() > 0.0, "camera position equals target");
    require(fov_y > 0.0 && fov_y < M_PI, "camera fov_y must be in (0, pi)");
    require(width > 0 && height > 0, "camera image size must be positive");
  }

  /// Look direction, unit length.
  Vec3 forward() const { return (target - position).normalized(); }

  /// Rows: right, up, forward. Camera-frame coordinates are R * (p - position).
  /// Degenerate if looking straight along the world up axis.
  Mat3 basis() const {
    const Vec3 f = forward();
    const Vec3 world_up(0, 1, 0);
    Vec3 right = world_up.cross(f);
    require(right.norm() > 1e-12, "camera looks along the world up axis");
    right.normalize();
    const Vec3 up = f.cross(right);
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = up.transpose();
    r.row(2) = f.transpose();
    return r;
  }

  double focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }
  Vec2 principal_point() const { return Vec2(0.5 * width, 0.5 * height); }
};

inline constexpr double kMinDepth = 1e-9;

/// Pinhole projection to pixel coordinates, one row per point.
inline Points2 project(const Camera& cam, const Points3& pts) {
  cam.validate();
  const Mat3 r = cam.basis();
  const double f = cam.focal();
  const Vec2 c = cam.principal_point();
  Points2 out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vec3 p = r * (pts.row(i).transpose() - cam.position);
    if (!(p.z() > kMinDepth))
      throw DegenerateProjectionError("point " + std::to_string(i) + " at depth " +
                                      std::to_string(p.z()) + " is not in front of the camera");
    out(i, 0) = f * p.x() / p.z() + c.x();
    out(i, 1) = f * p.y() / p.z() + c.y();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

/// Shift to per-axis minimum zero and divide every axis by the largest
/// per-axis extent. The dominant axis spans exactly [0, 1].
template <int Cols>
Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> normalize_extent(
    const Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor>& pts) {
  require(pts.rows() >= 2, "normalization needs at least two points");
  require(pts.allFinite(), "normalization input must be finite");
  const auto lo = pts.colwise().minCoeff().eval();
  const auto hi = pts.colwise().maxCoeff().eval();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw DegenerateExtentError("all points coincide");
  Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> out(pts.rows(), Cols);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (int c = 0; c < Cols; ++c) out(i, c) = (pts(i, c) - lo(c)) / extent;
  return out;
}

inline Points2 normalize2d(const Points2& raw) { return normalize_extent<2>(raw); }
inline Points3 normalize3d(const Points3& pose) { return normalize_extent<3>(pose); }

// ---------------------------------------------------------------------------
// Actions

/// One scalar angle curve (degrees) on one axis of one bone.
struct Channel {
  enum class Kind { sine, keys };
  std::size_t bone = 0;
  int axis = 0;  // 0 = x (roll), 1 = y (yaw), 2 = z (pitch)
  Kind kind = Kind::sine;
  // sine: offset + amp * sin(2 pi cycles phase + phase_deg)
  double offset = 0.0, amp = 0.0, cycles = 1.0, phase_deg = 0.0;
  // keys: (phase in [0,1], degrees), strictly increasing phase
  std::vector<std::pair<double, double>> keys;

  /// Angle in degrees at normalized phase u in [0, 1).
  double eval(double u) const {
    if (kind == Kind::sine) return offset + amp * std::sin(2.0 * M_PI * cycles * u + deg2rad(phase_deg));
    if (keys.size() == 1) return keys[0].second;
    if (u <= keys.front().first) return keys.front().second;
    if (u >= keys.back().first) return keys.back().second;
    std::size_t i = 0;
    while (keys[i + 1].first < u) ++i;
    // Catmull-Rom over values with clamped end tangents.
    const double p0 = keys[i == 0 ? 0 : i - 1].second;
    const double p1 = keys[i].second;
    const double p2 = keys[i + 1].second;
    const double p3 = keys[std::min(i + 2, keys.size() - 1)].second;
    const double s = (u - keys[i].first) / (keys[i + 1].first - keys[i].first);
    const double s2 = s * s, s3 = s2 * s;
    return 0.5 * (2.0 * p1 + (-p0 + p2) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s3);
  }
};

struct ActionSequence {
  std::string name;
  double duration = 1.0;  // seconds; the sequence loops
  std::vector<Channel> channels;

  /// Local bone rotations at time t (seconds). Per bone the summed angles
  /// compose as R = Ry(yaw) * Rz(pitch) * Rx(roll).
  PoseAngles evaluate(const Skeleton& sk, double t) const {
    require(duration > 0.0, "action duration must be positive");
    double u = std::fmod(t, duration) / duration;
    if (u < 0.0) u += 1.0;
    std::vector<Vec3> angles(sk.size(), Vec3::Zero());
    for (const auto& c : channels) {
      require(c.bone < sk.size(), "action '" + name + "' references bone out of range");
      angles[c.bone][c.axis] += c.eval(u);
    }
    PoseAngles a = PoseAngles::identity(sk.size());
    for (std::size_t i = 0; i < sk.size(); ++i) {
      const Vec3& e = angles[i];
      a.rotations[i] = (Eigen::AngleAxisd(deg2rad(e.y()), Vec3::UnitY()) *
                        Eigen::AngleAxisd(deg2rad(e.z()), Vec3::UnitZ()) *
                        Eigen::AngleAxisd(deg2rad(e.x()), Vec3::UnitX()))
                           .normalized();
    }
    return a;
  }
};

inline std::vector<ActionSequence> actions_from_json(const nlohmann::json& j, const Skeleton& sk) {
  try {
    if (j.at("version").get<int>() != kActionFormatVersion)
      throw FormatError("unsupported action file version");
    std::vector<ActionSequence> out;
    for (const auto& ja : j.at("actions")) {
      ActionSequence a;
      a.name = ja.at("name").get<std::string>();
      a.duration = ja.at("duration").get<double>();
      if (!(a.duration > 0.0)) throw FormatError("action '" + a.name + "' has non-positive duration");
      for (const auto& jc : ja.at("channels")) {
        Channel c;
        const auto bone = jc.at("bone").get<std::string>();
        const auto idx = sk.index_of(bone);
        if (!idx) throw FormatError("action '" + a.name + "' references unknown bone '" + bone + "'");
        c.bone = *idx;
        const auto axis = jc.at("axis").get<std::string>();
        if (axis == "x") c.axis = 0;
        else if (axis == "y") c.axis = 1;
        else if (axis == "z") c.axis = 2;
        else throw FormatError("bad axis '" + axis + "'");
        if (jc.contains("keys")) {
          c.kind = Channel::Kind::keys;
          for (const auto& k : jc.at("keys")) c.keys.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
          if (c.keys.empty()) throw FormatError("empty key list");
          for (std::size_t i = 1; i < c.keys.size(); ++i)
            if (!(c.keys[i].first > c.keys[i - 1].first)) throw FormatError("key phases must increase");
        } else {
          c.kind = Channel::Kind::sine;
          c.offset = jc.value("offset", 0.0);
          c.amp = jc.value("amp", 0.0);
          c.cycles = jc.value("cycles", 1.0);
          c.phase_deg = jc.value("phase", 0.0);
        }
        a.channels.push_back(std::move(c));
      }
      out.push_back(std::move(a));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("action json: ") + e.what());
  }
}

/// The procedural action library shipped for a canonical species.
inline std::vector<ActionSequence> species_action_library(Species s, const Skeleton& sk) {
  std::string_view text;
  switch (s) {
    case Species::macaque: text = embedded::kMacaqueActions; break;
    case Species::horse: text = embedded::kHorseActions; break;
    case Species::custom: throw ContractError("no action library for custom species");
  }
  return actions_from_json(nlohmann::json::parse(text), sk);
}

// ---------------------------------------------------------------------------
// Generation

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct OrbitConfig {
  Range radius{2.5, 3.5};
  Range elevation{deg2rad(5.0), deg2rad(35.0)};  // radians above the horizon
  double revolutions = 1.0;
};

struct GenConfig {
  std::uint64_t seed = 0;
  double fps = 10.0;
  std::size_t target_count = 8000;
  Range scale{0.8, 1.2};
  OrbitConfig orbit;
  int image_width = 640;
  int image_height = 480;
  double pose_jitter_deg = 1.5;  // per-bone random rotation, std dev

  static GenConfig defaults_for(Species s) {
    GenConfig c;
    c.target_count = default_target_count(s);
    return c;
  }

  void validate() const {
    require(fps > 0.0, "fps must be positive");
    require(target_count > 0, "target_count must be positive");
    require(scale.min > 0.0 && scale.max >= scale.min, "scale range must be positive and ordered");
    require(orbit.radius.min > 0.0 && orbit.radius.max >= orbit.radius.min, "bad orbit radius range");
    require(orbit.elevation.max >= orbit.elevation.min && std::abs(orbit.elevation.min) < deg2rad(89.0) &&
                std::abs(orbit.elevation.max) < deg2rad(89.0),
            "orbit elevation must stay within (-89, 89) degrees");
    require(image_width > 0 && image_height > 0, "image size must be positive");
    require(pose_jitter_deg >= 0.0, "pose jitter must be non-negative");
  }
};

inline constexpr double kFovMargin = 1.1;

/// Camera on a spherical spiral around the origin. Azimuth advances
/// linearly with t; radius and elevation come from the frame's stream.
/// The field of view fits a sphere of `subject_radius` with 10% margin.
inline Camera orbit_camera(const GenConfig& cfg, double t, Rng& rng,
                           double subject_radius = 0.5 * std::sqrt(3.0)) {
  require(t >= 0.0 && t <= 1.0, "orbit time must lie in [0, 1]");
  const double azimuth = 2.0 * M_PI * cfg.orbit.revolutions * t;
  const double radius = rng.uniform(cfg.orbit.radius.min, cfg.orbit.radius.max);
  const double elevation = rng.uniform(cfg.orbit.elevation.min, cfg.orbit.elevation.max);
  require(radius > kFovMargin * subject_radius, "orbit radius too small to frame the subject");
  Camera cam;
  cam.position = Vec3(radius * std::cos(elevation) * std::cos(azimuth), radius * std::sin(elevation),
                      radius * std::cos(elevation) * std::sin(azimuth));
  cam.target = Vec3::Zero();
  cam.width = cfg.image_width;
  cam.height = cfg.image_height;
  // Half-angle of the cone containing the margin sphere; widen the vertical
  // fov for portrait images so the horizontal half-angle also covers it.
  const double half = std::asin(kFovMargin * subject_radius / radius);
  const double aspect = static_cast<double>(cam.height) / cam.width;
  cam.fov_y = 2.0 * std::atan(std::tan(half) * std::max(1.0, aspect));
  return cam;
}

struct DatasetRecord {
  std::uint64_t id = 0;
  Species species = Species::custom;
  std::string action;
  std::uint64_t frame_index = 0;
  Points2 k2d_norm;  // k_s x 2
  Points3 k3d_norm;  // k_d x 3
  Camera camera;
  double subject_scale = 1.0;
};

/// Range checks every emitted record must pass. Returns an empty string
/// when valid, else the first violation.
inline std::string lint_record(const DatasetRecord& r) {
  if (r.k2d_norm.rows() < 2 || r.k3d_norm.rows() < 2) return "too few keypoints";
  if (!r.k2d_norm.allFinite() || !r.k3d_norm.allFinite()) return "non-finite coordinates";
  if (r.k2d_norm.minCoeff() < 0.0 || r.k2d_norm.maxCoeff() > 1.0) return "k2d_norm outside [0,1]";
  if (r.k3d_norm.minCoeff() < 0.0 || r.k3d_norm.maxCoeff() > 1.0) return "k3d_norm outside [0,1]";
  bool dominant = false;
  for (int c = 0; c < 2; ++c)
    dominant |= r.k2d_norm.col(c).minCoeff() == 0.0 && r.k2d_norm.col(c).maxCoeff() == 1.0;
  if (!dominant) return "k2d_norm has no axis spanning exactly [0,1]";
  if (!(r.subject_scale > 0.0)) return "subject_scale must be positive";
  return {};
}

/// Per-action record quotas proportional to duration, summing to `total`
/// (largest remainder, ties to the earlier action).
inline std::vector<std::size_t> action_quotas(const std::vector<ActionSequence>& actions, std::size_t total) {
  require(!actions.empty(), "no actions");
  double sum = 0.0;
  for (const auto& a : actions) sum += a.duration;
  std::vector<std::size_t> q(actions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double exact = static_cast<double>(total) * actions[i].duration / sum;
    q[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += q[i];
    rem.emplace_back(exact - static_cast<double>(q[i]), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++q[rem[k % rem.size()].second];
  return q;
}

/// Builds the record for one (action, frame) key. Pure: depends only on its
/// arguments, so frames may be produced in any order.
inline DatasetRecord make_record(const GenConfig& cfg, const Skeleton& sk, const ActionSequence& action,
                                 std::size_t action_index, std::uint64_t frame, std::size_t quota) {
  Rng rng = Rng::stream(cfg.seed, action_index, frame);
  PoseAngles angles = action.evaluate(sk, static_cast<double>(frame) / cfg.fps);
  if (cfg.pose_jitter_deg > 0.0) {
    const double sigma = deg2rad(cfg.pose_jitter_deg);
    for (auto& q : angles.rotations) {
      const Vec3 v(sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal());
      const double angle = v.norm();
      if (angle > 0.0) q = (q * Quat(Eigen::AngleAxisd(angle, v / angle))).normalized();
    }
  }
  DatasetRecord r;
  r.species = sk.species();
  r.action = action.name;
  r.frame_index = frame;
  r.subject_scale = rng.uniform(cfg.scale.min, cfg.scale.max);
  angles.root_scale = r.subject_scale;

  const double t = static_cast<double>(frame % quota) / static_cast<double>(quota);
  r.camera = orbit_camera(cfg, t, rng, sk.max_reach() * cfg.scale.max);

  const Pose3D pose = forward_kinematics(sk, angles);
  const Points2 pixels = project(r.camera, pose);
  Points2 soft(static_cast<Eigen::Index>(sk.soft_size()), 2);
  for (std::size_t k = 0; k < sk.soft_size(); ++k)
    soft.row(static_cast<Eigen::Index>(k)) = pixels.row(static_cast<Eigen::Index>(sk.soft_subset()[k]));
  r.k2d_norm = normalize2d(soft);
  r.k3d_norm = normalize3d(pose);
  return r;
}

using WarningSink = std::function<void(const std::string&)>;

/// Full dataset, ordered by (action index, frame index). Frames whose
/// projection or normalization degenerates are skipped and replaced.
inline std::vector<DatasetRecord> generate(const GenConfig& cfg, const Skeleton& sk,
                                           const std::vector<ActionSequence>& actions,
                                           const WarningSink& warn = {}) {
  cfg.validate();
  require(!actions.empty(), "no actions supplied");
  if (sk.species() != Species::custom) {
    std::set<std::string> have, want(species_actions(sk.species()).begin(), species_actions(sk.species()).end());
    for (const auto& a : actions) have.insert(a.name);
    for (const auto& w : want)
      require(have.count(w) > 0, "action set is missing '" + w + "'");
  }
  require(cfg.orbit.radius.min > kFovMargin * sk.max_reach() * cfg.scale.max,
          "orbit radius range too small to frame the subject");

  const auto quotas = action_quotas(actions, cfg.target_count);
  std::vector<DatasetRecord> out;
  out.reserve(cfg.target_count);
  for (std::size_t ai = 0; ai < actions.size(); ++ai) {
    std::size_t made = 0;
    const std::uint64_t max_frames = 10 * quotas[ai] + 100;
    for (std::uint64_t f = 0; made < quotas[ai]; ++f) {
      if (f >= max_frames)
        throw Error("generation", "action '" + actions[ai].name + "' produced too many degenerate frames");
      try {
        DatasetRecord r = make_record(cfg, sk, actions[ai], ai, f, quotas[ai]);
        r.id = out.size();
        out.push_back(std::move(r));
        ++made;
      } catch (const DegenerateProjectionError& e) {
        if (warn) warn("skipping " + actions[ai].name + " frame " + std::to_string(f) + ": " + e.what());
      } catch (const DegenerateExtentError& e) {
        if (warn) warn("skipping " + actions[ai].name + " frame " + std::to_string(f) + ": " + e.what());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-action spread

struct ActionSpread {
  std::string action;
  std::size_t count = 0;
  Vec3 sigma = Vec3::Zero();
};

/// For each action (first-appearance order): the population standard
/// deviation of each normalized 3D coordinate across the action's frames,
/// averaged over keypoints, per axis.
inline std::vector<ActionSpread> variance_report(const std::vector<DatasetRecord>& data) {
  require(!data.empty(), "variance report needs records");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const DatasetRecord*>> groups;
  for (const auto& r : data) {
    auto [it, inserted] = groups.try_emplace(r.action);
    if (inserted) order.push_back(r.action);
    it->second.push_back(&r);
  }
  std::vector<ActionSpread> out;
  for (const auto& name : order) {
    const auto& g = groups[name];
    const Eigen::Index k = g.front()->k3d_norm.rows();
    Points3 mean = Points3::Zero(k, 3);
    for (const auto* r : g) {
      require(r->k3d_norm.rows() == k, "inconsistent keypoint count in action '" + name + "'");
      mean += r->k3d_norm;
    }
    mean /= static_cast<double>(g.size());
    Points3 var = Points3::Zero(k, 3);
    for (const auto* r : g) var += (r->k3d_norm - mean).array().square().matrix();
    var /= static_cast<double>(g.size());
    ActionSpread s;
    s.action = name;
    s.count = g.size();
    s.sigma = var.array().sqrt().colwise().mean().transpose();
    out.push_back(s);
  }
  return out;
}

}  // namespace l3d
