#include "eyecontact/gaze.hpp"

#include "eyecontact/error.hpp"

#include <algorithm>
#include <cmath>

namespace eyecontact {

Eigen::Vector3d angles_to_vector(const GazeAngles& g) {
  const double cp = std::cos(g.pitch);
  return {-cp * std::sin(g.yaw), -std::sin(g.pitch), -cp * std::cos(g.yaw)};
}

GazeAngles vector_to_angles(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorCode::InvalidArgument, "cannot take the angles of a zero vector");
  const Eigen::Vector3d u = v / n;
  GazeAngles g;
  g.pitch = std::asin(std::clamp(-u.y(), -1.0, 1.0));
  // Yaw is undefined at the poles; report 0 there.
  g.yaw = std::hypot(u.x(), u.z()) < 1e-12 ? 0.0 : std::atan2(-u.x(), -u.z());
  return g;
}

EffectiveGaze apply_threshold(const std::optional<GazeAngles>& gaze_n, const GazeAngles& headpose_n,
                              double pitch_limit, double yaw_limit) {
  const bool outside =
      std::abs(headpose_n.pitch) > pitch_limit || std::abs(headpose_n.yaw) > yaw_limit;
  if (!gaze_n || outside) return {headpose_n, GazeSource::HeadPoseProxy};
  return {*gaze_n, GazeSource::Gaze};
}

Eigen::Vector3d gaze_origin(const HeadPose& pose, const FaceModel3D& model,
                            const LandmarkIndexMap& idx) {
  const Eigen::Vector3d a = pose.apply(model.eye_a_midpoint(idx));
  const Eigen::Vector3d b = pose.apply(model.eye_b_midpoint(idx));
  return 0.5 * (a + b);
}

std::optional<GazePoint2D> intersect_plane(const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir) {
  if (dir.z() == 0.0 || !dir.allFinite() || !origin.allFinite()) return std::nullopt;
  const double s = -origin.z() / dir.z();
  if (!(s > 0.0) && origin.z() != 0.0) return std::nullopt;
  const Eigen::Vector3d p = origin + s * dir;
  return GazePoint2D{p.x(), p.y()};
}

}  // namespace eyecontact
