#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace eyecontact {

/// Pinhole camera without distortion.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Eigen::Matrix3d matrix() const;
  Eigen::Vector2d project(const Eigen::Vector3d& p) const;
};

/// Uncalibrated front camera: focal length equal to the image width and the
/// principal point at the pixel-grid centre.
CameraIntrinsics default_intrinsics(int width, int height);

/// Indices into the 68-point scheme used to build the head frame.
struct LandmarkIndexMap {
  int eye_a_outer = 36;
  int eye_a_inner = 39;
  int eye_b_inner = 42;
  int eye_b_outer = 45;
  int mouth_a = 48;
  int mouth_b = 54;
};

class FaceModel3D {
 public:
  static constexpr std::size_t kPointCount = 68;

  explicit FaceModel3D(std::vector<Eigen::Vector3d> points);

  /// Plain text, one "x y z" triple (mm) per line; '#' starts a comment.
  static FaceModel3D load(const std::string& path);
  static FaceModel3D parse(const std::string& text);

  /// The generic model shipped in data/face_model_68.txt.
  static const FaceModel3D& canonical();

  std::span<const Eigen::Vector3d> points() const { return points_; }
  const Eigen::Vector3d& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }

  Eigen::Vector3d eye_a_midpoint(const LandmarkIndexMap& idx = {}) const;
  Eigen::Vector3d eye_b_midpoint(const LandmarkIndexMap& idx = {}) const;
  Eigen::Vector3d mouth_midpoint(const LandmarkIndexMap& idx = {}) const;

 private:
  std::vector<Eigen::Vector3d> points_;
};

/// Rigid model-to-camera transform; translation in mm.
struct HeadPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double reprojection_rmse = 0.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& model_point) const {
    return rotation * model_point + translation;
  }
};

double reprojection_rmse(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                         std::span<const Eigen::Vector3d> model,
                         std::span<const Eigen::Vector2d> image, const CameraIntrinsics& k);

std::vector<Eigen::Vector2d> project_points(const HeadPose& pose,
                                            std::span<const Eigen::Vector3d> model,
                                            const CameraIntrinsics& k);

/// Efficient PnP (four virtual control points). Needs at least four
/// correspondences; the returned pose has its reprojection error filled in.
HeadPose solve_epnp(std::span<const Eigen::Vector3d> model, std::span<const Eigen::Vector2d> image,
                    const CameraIntrinsics& k);

struct LmOptions {
  int max_iters = 50;
  double tol = 1e-10;
  double lambda0 = 1e-3;
};

/// Levenberg-Marquardt refinement of the reprojection error over rotation and
/// translation. Only steps that lower the error are taken, so the result is
/// never worse than `initial`.
HeadPose refine_lm(const HeadPose& initial, std::span<const Eigen::Vector3d> model,
                   std::span<const Eigen::Vector2d> image, const CameraIntrinsics& k,
                   const LmOptions& options = {});

// Constant-velocity Kalman filter on (rotation vector, translation).

using KalmanVector = Eigen::Matrix<double, 12, 1>;
using KalmanMatrix = Eigen::Matrix<double, 12, 12>;

struct KalmanConfig {
  double process_sigma_rot = 0.02;    // rad/s^2
  double process_sigma_t = 5.0;       // mm/s^2
  double measurement_sigma_rot = 0.05;  // rad
  double measurement_sigma_t = 10.0;    // mm
  double prior_sigma_rot_velocity = 0.5;  // rad/s
  double prior_sigma_t_velocity = 100.0;  // mm/s
  // A measurement this far from the last smoothed pose restarts the filter.
  double gate_rot_deg = 30.0;
  double gate_t_mm = 150.0;
};

struct KalmanState {
  KalmanVector x = KalmanVector::Zero();
  KalmanMatrix covariance = KalmanMatrix::Identity();
  double t = 0.0;
};

std::pair<KalmanState, HeadPose> kalman_step(const std::optional<KalmanState>& state,
                                             const HeadPose& measurement, double t,
                                             const KalmanConfig& config = {});

Eigen::Vector3d rotation_to_vector(const Eigen::Matrix3d& r);
Eigen::Matrix3d vector_to_rotation(const Eigen::Vector3d& v);

/// Nearest rotation matrix in the Frobenius sense.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// R = Rz(roll) * Ry(yaw) * Rx(pitch).
Eigen::Matrix3d euler_to_rotation(double pitch, double yaw, double roll);

}  // namespace eyecontact
