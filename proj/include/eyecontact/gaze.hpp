#pragma once

#include "eyecontact/headpose.hpp"
#include "eyecontact/types.hpp"

#include <Eigen/Core>

#include <optional>

namespace eyecontact {

/// v = (-cos p sin y, -sin p, -cos p cos y).
Eigen::Vector3d angles_to_vector(const GazeAngles& g);

/// Inverse of angles_to_vector; the input need not be unit length.
GazeAngles vector_to_angles(const Eigen::Vector3d& v);

enum class GazeSource { Gaze, HeadPoseProxy };

struct EffectiveGaze {
  GazeAngles angles;
  GazeSource source = GazeSource::Gaze;
};

/// Falls back to the head direction when the gaze estimate is missing or the
/// normalized head pose leaves [-pitch_limit, pitch_limit] x [-yaw_limit, yaw_limit].
/// Limits are inclusive.
EffectiveGaze apply_threshold(const std::optional<GazeAngles>& gaze_n, const GazeAngles& headpose_n,
                              double pitch_limit = deg2rad(40.0),
                              double yaw_limit = deg2rad(40.0));

/// Camera-space midpoint of the two eye midpoints, mm.
Eigen::Vector3d gaze_origin(const HeadPose& pose, const FaceModel3D& model,
                            const LandmarkIndexMap& idx = {});

/// Intersection of the ray origin + s * dir (s > 0) with the z = 0 plane.
/// Empty when the ray is parallel to the plane or points away from it.
std::optional<GazePoint2D> intersect_plane(const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir);

}  // namespace eyecontact
