#pragma once

// Independent reference computations used to check the library. They take
// deliberately different routes (explicit matrix chains, scalar loops,
// exhaustive scans) and share no code with the implementations they check.

#include "l3d/datagen.hpp"
#include "l3d/lookup.hpp"

#include <array>
#include <vector>

namespace oracle {

using Mat4 = Eigen::Matrix4d;

/// Rotation matrix of a unit quaternion written out component-wise.
inline l3d::Mat3 quat_matrix(const l3d::Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  l3d::Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

/// FK by composing one 4x4 transform per joint: world_i = world_parent *
/// [R_i | R_i * s * offset_i]. Joint i sits at world_i's translation.
inline l3d::Pose3D fk_matrix_chain(const l3d::Skeleton& sk, const l3d::PoseAngles& a) {
  const auto n = sk.size();
  std::vector<Mat4> world(n);
  l3d::Pose3D out(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const l3d::Mat3 r = quat_matrix(a.rotations[i]);
    Mat4 local = Mat4::Identity();
    local.topLeftCorner<3, 3>() = r;
    const auto& b = sk.bone(i);
    if (!b.parent) {
      Mat4 t = Mat4::Identity();
      t.topRightCorner<3, 1>() = a.root_translation;
      world[i] = t * local;
    } else {
      local.topRightCorner<3, 1>() = r * (a.root_scale * b.rest_offset);
      world[i] = world[*b.parent] * local;
    }
    out.row(static_cast<Eigen::Index>(i)) = world[i].topRightCorner<3, 1>().transpose();
  }
  return out;
}

/// Pinhole projection via an explicit 3x4 intrinsic * 4x4 view matrix.
inline l3d::Points2 project_homogeneous(const l3d::Camera& cam, const l3d::Points3& pts) {
  const l3d::Vec3 z = (cam.target - cam.position) / (cam.target - cam.position).norm();
  const l3d::Vec3 up(0, 1, 0);
  l3d::Vec3 x(up.y() * z.z() - up.z() * z.y(), up.z() * z.x() - up.x() * z.z(), up.x() * z.y() - up.y() * z.x());
  x /= x.norm();
  const l3d::Vec3 y(z.y() * x.z() - z.z() * x.y(), z.z() * x.x() - z.x() * x.z(), z.x() * x.y() - z.y() * x.x());
  Mat4 view = Mat4::Identity();
  view.block<1, 3>(0, 0) = x.transpose();
  view.block<1, 3>(1, 0) = y.transpose();
  view.block<1, 3>(2, 0) = z.transpose();
  view(0, 3) = -x.dot(cam.position);
  view(1, 3) = -y.dot(cam.position);
  view(2, 3) = -z.dot(cam.position);
  const double f = cam.height / (2.0 * std::tan(cam.fov_y / 2.0));
  Eigen::Matrix<double, 3, 4> k = Eigen::Matrix<double, 3, 4>::Zero();
  k(0, 0) = f;
  k(1, 1) = f;
  k(0, 2) = cam.width / 2.0;
  k(1, 2) = cam.height / 2.0;
  k(2, 2) = 1.0;
  l3d::Points2 out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::Vector4d p(pts(i, 0), pts(i, 1), pts(i, 2), 1.0);
    const Eigen::Vector3d h = k * (view * p);
    out(i, 0) = h(0) / h(2);
    out(i, 1) = h(1) / h(2);
  }
  return out;
}

/// Mean squared error by explicit scalar loops.
inline double mse_loop(const std::vector<l3d::Points3>& a, const std::vector<l3d::Points3>& b) {
  double s = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Eigen::Index r = 0; r < a[i].rows(); ++r)
      for (int c = 0; c < 3; ++c) {
        const double d = a[i](r, c) - b[i](r, c);
        s += d * d;
        ++n;
      }
  return s / static_cast<double>(n);
}

/// PDJ by counting joints one at a time against the box diagonal of gt.
inline double pdj_count(const std::vector<l3d::Points3>& pred, const std::vector<l3d::Points3>& gt, double x) {
  long hit = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (Eigen::Index r = 0; r < gt[i].rows(); ++r)
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], gt[i](r, c));
        hi[c] = std::max(hi[c], gt[i](r, c));
      }
    const double d = std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                               (hi[2] - lo[2]) * (hi[2] - lo[2]));
    for (Eigen::Index r = 0; r < gt[i].rows(); ++r) {
      double e = 0.0;
      for (int c = 0; c < 3; ++c) e += (pred[i](r, c) - gt[i](r, c)) * (pred[i](r, c) - gt[i](r, c));
      if (std::sqrt(e) <= x * d) ++hit;
      ++total;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

struct ScanHit {
  std::size_t index;
  double distance;
};

/// Nearest entry by linear scan over the soft rows of every table pose.
inline ScanHit linear_scan(const l3d::LookupTable& t, const l3d::Points3& q) {
  ScanHit best{0, std::numeric_limits<double>::infinity()};
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& pose = t.entry(i).pose;
    double d2 = 0.0;
    for (std::size_t k = 0; k < t.soft_subset().size(); ++k)
      for (int c = 0; c < 3; ++c) {
        const double d = q(static_cast<Eigen::Index>(k), c) - pose(static_cast<Eigen::Index>(t.soft_subset()[k]), c);
        d2 += d * d;
      }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = {i, std::sqrt(d2)};
    }
  }
  return best;
}

/// Random rotation, uniformly distributed (normalized Gaussian 4-vector).
inline l3d::Quat random_rotation(l3d::Rng& rng) {
  l3d::Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

/// Random twist-free rotation for a bone: the shortest arc taking the
/// rest direction to a random direction, built from axis and angle.
inline l3d::Quat random_swing(l3d::Rng& rng, const l3d::Vec3& rest) {
  l3d::Vec3 target(rng.normal(), rng.normal(), rng.normal());
  target.normalize();
  const l3d::Vec3 a = rest.normalized();
  l3d::Vec3 axis = a.cross(target);
  const double s = axis.norm();
  if (s < 1e-9) return l3d::Quat::Identity();
  const double angle = std::atan2(s, a.dot(target));
  return l3d::Quat(Eigen::AngleAxisd(angle, axis / s));
}

}  // namespace oracle
