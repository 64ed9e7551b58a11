#pragma once

#include "eyecontact/headpose.hpp"
#include "eyecontact/image.hpp"
#include "eyecontact/types.hpp"

#include <Eigen/Core>

#include <optional>

namespace eyecontact {

/// Head coordinate system in camera coordinates. x runs from the first eye
/// (landmarks 36/39) to the second (42/45), y from the eyes toward the mouth,
/// z = x cross y points toward the back of the head.
struct HeadFrame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d x_axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d y_axis = Eigen::Vector3d::UnitY();
  Eigen::Vector3d z_axis = Eigen::Vector3d::UnitZ();

  /// Direction the face is pointing (-z).
  Eigen::Vector3d facing() const { return -z_axis; }
};

HeadFrame head_frame(const HeadPose& pose, const FaceModel3D& model,
                     const LandmarkIndexMap& idx = {});

/// Frame from camera-space eye and mouth midpoints.
HeadFrame head_frame_from_midpoints(const Eigen::Vector3d& eye_a, const Eigen::Vector3d& eye_b,
                                    const Eigen::Vector3d& mouth);

struct NormParams {
  double focal_norm = 960.0;
  double distance_norm = 300.0;
  int out_width = 448;
  int out_height = 448;

  Eigen::Matrix3d camera_matrix() const;
};

struct NormalizationResult {
  Eigen::Matrix3d warp = Eigen::Matrix3d::Identity();  // real px -> normalized px
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();   // camera -> normalized camera
  double scale = 1.0;
  GazeAngles headpose_n;
  std::optional<GazeAngles> gaze_n;
};

/// Virtual camera looking straight at frame.origin from params.distance_norm
/// with head roll removed. `gaze_camera`, when given, is a camera-space gaze
/// direction that is carried into normalized space.
NormalizationResult normalization_transform(const HeadFrame& frame, const CameraIntrinsics& k_real,
                                            const NormParams& params = {},
                                            const std::optional<Eigen::Vector3d>& gaze_camera = {});

/// Angles of rot * v.
GazeAngles rotate_to_normalized(const Eigen::Matrix3d& rot, const Eigen::Vector3d& v);

/// Inverse-mapped bilinear resampling. Samples whose source position falls
/// outside the source pixel area are black.
Image warp_image(const Image& src, const Eigen::Matrix3d& warp, int out_width, int out_height);

}  // namespace eyecontact
