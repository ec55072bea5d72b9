#pragma once

#include "l3d/common.hpp"
#include "l3d/embedded_data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace l3d {

inline constexpr int kSkeletonFormatVersion = 1;

/// `custom` covers ad-hoc rigs (test chains, user files); the two canonical
/// species carry fixed keypoint counts.
enum class Species { macaque, horse, custom };

inline std::string_view to_string(Species s) {
  switch (s) {
    case Species::macaque: return "macaque";
    case Species::horse: return "horse";
    case Species::custom: return "custom";
  }
  return "custom";
}

inline Species species_from_string(std::string_view s) {
  if (s == "macaque") return Species::macaque;
  if (s == "horse") return Species::horse;
  if (s == "custom") return Species::custom;
  throw ContractError("unknown species '" + std::string(s) + "'");
}

struct Bone {
  std::string name;
  std::optional<std::size_t> parent;  // empty for the root
  Vec3 rest_offset = Vec3::Zero();    // from the parent joint, rest pose
};

/// World coordinates of every keypoint, one row per bone.
using Pose3D = Points3;

/// Detector keypoint name for each deep keypoint; empty when the detector
/// set has no counterpart. Rows follow the deep keypoint order.
struct Correspondence {
  std::string_view deep;
  std::string_view detector;
};

inline constexpr std::array<Correspondence, 29> kMacaqueCorrespondence{{
    {"Nose", "Nose"},
    {"Neck", ""},
    {"Left Scapula", "Left Shoulder"},
    {"Right Scapula", "Right Shoulder"},
    {"Left Humerus", ""},
    {"Right Humerus", ""},
    {"Left Forearm", "Left Elbow"},
    {"Right Forearm", "Right Elbow"},
    {"Left Hand", "Left Wrist"},
    {"Right Hand", "Right Wrist"},
    {"Spine Top", ""},
    {"Spine Middle", ""},
    {"Spine Bottom", ""},
    {"Left Thigh", "Left Hip"},
    {"Right Thigh", "Right Hip"},
    {"Left Knee", "Left Knee"},
    {"Right Knee", "Right Knee"},
    {"Left Ankle", "Left Ankle"},
    {"Right Ankle", "Right Ankle"},
    {"Right Foot", ""},
    {"Left Foot", ""},
    {"Pelvis", ""},
    {"Tail Top", ""},
    {"Tail Upper", ""},
    {"Tail Upper Middle", ""},
    {"Tail Middle", ""},
    {"Tail Lower Middle", ""},
    {"Tail Lower", ""},
    {"Tail End", ""},
}};

inline constexpr std::array<Correspondence, 33> kHorseCorrespondence{{
    {"Nose", "Nose"},
    {"Head", "Head"},
    {"Neck Top", ""},
    {"Neck Middle", ""},
    {"Neck Low", "Mid shoulder"},
    {"Right Clavicle", ""},
    {"Right Upperarm", ""},
    {"Right Forearm", "Nearknee"},
    {"Right Foreankle", "Nearfrontfetlock"},
    {"Right Forefeet", "Nearfrontfoot"},
    {"Left Clavicle", ""},
    {"Left Upperarm", ""},
    {"Left Forearm", "Offknee"},
    {"Left Foreankle", "Offfrontfetlock"},
    {"Left Forefeet", "Offfrontfoot"},
    {"Spine Top", ""},
    {"Spine Middle", ""},
    {"Spine End", ""},
    {"Penvis", "Ischium"},
    {"Right Thigh", ""},
    {"Right Calf", ""},
    {"Right Backarm", "Nearhindhock"},
    {"Right Backankle", "Nearhindfetlock"},
    {"Right Backfeet", "Nearhindfoot"},
    {"Left Thigh", ""},
    {"Left Calf", ""},
    {"Left Backarm", "Offhindhock"},
    {"Left Backankle", "Offhindfetlock"},
    {"Left Backfeet", "Offhindfoot"},
    {"Tail Top", ""},
    {"Tail Middle", ""},
    {"Tail Low", ""},
    {"Tail End", ""},
}};

inline std::span<const Correspondence> correspondence_table(Species s) {
  switch (s) {
    case Species::macaque: return kMacaqueCorrespondence;
    case Species::horse: return kHorseCorrespondence;
    case Species::custom: break;
  }
  return {};
}

/// Expected (soft, deep) keypoint counts for a canonical species.
inline std::pair<std::size_t, std::size_t> keypoint_counts(Species s) {
  switch (s) {
    case Species::macaque: return {13, 29};
    case Species::horse: return {16, 33};
    case Species::custom: break;
  }
  throw ContractError("custom skeletons have no fixed keypoint counts");
}

/// Bone hierarchy in topological (root-first) order plus the soft subset:
/// the keypoints that ordinary 2D detectors also report.
class Skeleton {
 public:
  Skeleton(Species species, std::vector<Bone> bones, std::vector<std::size_t> soft_subset)
      : species_(species), bones_(std::move(bones)), soft_(std::move(soft_subset)) {
    validate();
  }

  Species species() const noexcept { return species_; }
  std::size_t size() const noexcept { return bones_.size(); }
  std::size_t soft_size() const noexcept { return soft_.size(); }
  const std::vector<Bone>& bones() const noexcept { return bones_; }
  const Bone& bone(std::size_t i) const { return bones_.at(i); }
  const std::vector<std::size_t>& soft_subset() const noexcept { return soft_; }

  std::vector<std::string> keypoint_names() const {
    std::vector<std::string> names;
    names.reserve(bones_.size());
    for (const auto& b : bones_) names.push_back(b.name);
    return names;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < bones_.size(); ++i)
      if (bones_[i].name == name) return i;
    return std::nullopt;
  }

  /// Largest root-to-keypoint path length; bounds the reach of any pose.
  double max_reach() const {
    std::vector<double> reach(bones_.size(), 0.0);
    double best = 0.0;
    for (std::size_t i = 0; i < bones_.size(); ++i) {
      if (bones_[i].parent) reach[i] = reach[*bones_[i].parent] + bones_[i].rest_offset.norm();
      best = std::max(best, reach[i]);
    }
    return best;
  }

  nlohmann::json to_json() const {
    nlohmann::json bones = nlohmann::json::array();
    for (const auto& b : bones_) {
      nlohmann::json jb;
      jb["name"] = b.name;
      jb["parent"] = b.parent ? nlohmann::json(*b.parent) : nlohmann::json(nullptr);
      jb["rest_offset"] = {b.rest_offset.x(), b.rest_offset.y(), b.rest_offset.z()};
      bones.push_back(std::move(jb));
    }
    return {{"version", kSkeletonFormatVersion},
            {"species", std::string(to_string(species_))},
            {"bones", std::move(bones)},
            {"soft_subset", soft_}};
  }

  static Skeleton from_json(const nlohmann::json& j) {
    try {
      const int version = j.at("version").get<int>();
      if (version != kSkeletonFormatVersion)
        throw FormatError("skeleton format version " + std::to_string(version) +
                          " unsupported (expected " + std::to_string(kSkeletonFormatVersion) + ")");
      std::vector<Bone> bones;
      for (const auto& jb : j.at("bones")) {
        Bone b;
        b.name = jb.at("name").get<std::string>();
        if (!jb.at("parent").is_null()) b.parent = jb.at("parent").get<std::size_t>();
        const auto& off = jb.at("rest_offset");
        if (off.size() != 3) throw FormatError("rest_offset of '" + b.name + "' must have 3 entries");
        b.rest_offset = Vec3(off[0].get<double>(), off[1].get<double>(), off[2].get<double>());
        bones.push_back(std::move(b));
      }
      return Skeleton(species_from_string(j.at("species").get<std::string>()), std::move(bones),
                      j.at("soft_subset").get<std::vector<std::size_t>>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("skeleton json: ") + e.what());
    }
  }

  /// Content hash over the canonical JSON serialization.
  std::uint64_t hash() const { return fnv1a64(to_json().dump()); }

 private:
  void validate() const {
    require(!bones_.empty(), "skeleton has no bones");
    require(!bones_[0].parent, "first bone must be the root");
    for (std::size_t i = 0; i < bones_.size(); ++i) {
      const auto& b = bones_[i];
      if (i > 0) {
        require(b.parent.has_value(), "bone '" + b.name + "' is a second root");
        require(*b.parent < i, "bone '" + b.name + "' is not topologically sorted");
        require(b.rest_offset.norm() > 0.0, "bone '" + b.name + "' has a zero rest offset");
      }
      require(b.rest_offset.allFinite(), "bone '" + b.name + "' has a non-finite rest offset");
    }
    require(!soft_.empty(), "soft subset is empty");
    for (std::size_t k = 0; k < soft_.size(); ++k) {
      require(soft_[k] < bones_.size(), "soft subset index out of range");
      if (k > 0) require(soft_[k] > soft_[k - 1], "soft subset must be strictly increasing");
    }
    if (species_ != Species::custom) {
      const auto [ks, kd] = keypoint_counts(species_);
      require(bones_.size() == kd && soft_.size() == ks,
              std::string(to_string(species_)) + " skeleton must have " + std::to_string(kd) +
                  " bones and " + std::to_string(ks) + " soft keypoints");
    }
  }

  Species species_;
  std::vector<Bone> bones_;
  std::vector<std::size_t> soft_;
};

inline Skeleton skeleton_from_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("skeleton json: ") + e.what());
  }
  return Skeleton::from_json(j);
}

/// The canonical rig shipped with the library.
inline Skeleton species_skeleton(Species s) {
  switch (s) {
    case Species::macaque: return skeleton_from_string(embedded::kMacaqueSkeleton);
    case Species::horse: return skeleton_from_string(embedded::kHorseSkeleton);
    case Species::custom: break;
  }
  throw ContractError("no canonical skeleton for custom species");
}

/// Per-bone local rotations. rotations[i] rotates bone i's rest offset
/// relative to its parent's accumulated frame.
struct PoseAngles {
  std::vector<Quat> rotations;
  Vec3 root_translation = Vec3::Zero();
  double root_scale = 1.0;

  static PoseAngles identity(std::size_t n) {
    PoseAngles a;
    a.rotations.assign(n, Quat::Identity());
    return a;
  }

  /// Accepts rotation matrices; each is projected onto SO(3) and stored as a
  /// unit quaternion.
  static PoseAngles from_matrices(std::span<const Mat3> mats, const Vec3& translation = Vec3::Zero(),
                                  double scale = 1.0) {
    PoseAngles a;
    a.root_translation = translation;
    a.root_scale = scale;
    a.rotations.reserve(mats.size());
    for (const auto& m : mats) {
      Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Mat3 r = svd.matrixU() * svd.matrixV().transpose();
      require(r.determinant() > 0.0, "rotation matrix has negative determinant");
      a.rotations.push_back(Quat(r).normalized());
    }
    a.validate();
    return a;
  }

  void validate() const {
    require(root_scale > 0.0 && std::isfinite(root_scale), "root_scale must be positive");
    require(root_translation.allFinite(), "root_translation must be finite");
    for (const auto& q : rotations)
      require(std::abs(q.norm() - 1.0) <= 1e-9, "rotation is not a unit quaternion");
  }
};

/// Global (accumulated) rotation of every bone.
inline std::vector<Quat> accumulated_rotations(const Skeleton& sk, const PoseAngles& a) {
  std::vector<Quat> global(sk.size());
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const auto& p = sk.bone(i).parent;
    global[i] = p ? global[*p] * a.rotations[i] : a.rotations[i];
  }
  return global;
}

inline Pose3D forward_kinematics(const Skeleton& sk, const PoseAngles& a) {
  require(a.rotations.size() == sk.size(),
          "pose angles have " + std::to_string(a.rotations.size()) + " rotations, skeleton has " +
              std::to_string(sk.size()) + " bones");
  a.validate();
  Pose3D out(static_cast<Eigen::Index>(sk.size()), 3);
  const auto global = accumulated_rotations(sk, a);
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const auto& b = sk.bone(i);
    const auto row = static_cast<Eigen::Index>(i);
    if (!b.parent) {
      out.row(row) = a.root_translation.transpose();
    } else {
      const Vec3 parent = out.row(static_cast<Eigen::Index>(*b.parent)).transpose();
      out.row(row) = (parent + a.root_scale * (global[i] * b.rest_offset)).transpose();
    }
  }
  return out;
}

inline Pose3D rest_pose(const Skeleton& sk) {
  return forward_kinematics(sk, PoseAngles::identity(sk.size()));
}

/// Rows of `pose` at the soft subset, in soft order.
inline Points3 soft_projection(const Skeleton& sk, const Pose3D& pose) {
  require(static_cast<std::size_t>(pose.rows()) == sk.size(), "pose does not match skeleton");
  Points3 out(static_cast<Eigen::Index>(sk.soft_size()), 3);
  for (std::size_t k = 0; k < sk.soft_size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = pose.row(static_cast<Eigen::Index>(sk.soft_subset()[k]));
  return out;
}

}  // namespace l3d
