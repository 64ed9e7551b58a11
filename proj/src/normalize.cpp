#include "eyecontact/normalize.hpp"

#include "eyecontact/error.hpp"
#include "eyecontact/gaze.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace eyecontact {

HeadFrame head_frame_from_midpoints(const Eigen::Vector3d& eye_a, const Eigen::Vector3d& eye_b,
                                    const Eigen::Vector3d& mouth) {
  const Eigen::Vector3d across = eye_b - eye_a;
  const Eigen::Vector3d eyes = 0.5 * (eye_a + eye_b);
  const Eigen::Vector3d down = mouth - eyes;
  const double scale = std::max(across.norm(), down.norm());
  if (!(scale > 0.0) || across.cross(down).norm() <= 1e-9 * scale * scale)
    throw Error(ErrorCode::Degenerate, "eye and mouth midpoints are collinear");

  HeadFrame f;
  f.origin = (eye_a + eye_b + mouth) / 3.0;
  f.x_axis = across.normalized();
  f.y_axis = (down - down.dot(f.x_axis) * f.x_axis).normalized();
  f.z_axis = f.x_axis.cross(f.y_axis).normalized();
  return f;
}

HeadFrame head_frame(const HeadPose& pose, const FaceModel3D& model, const LandmarkIndexMap& idx) {
  return head_frame_from_midpoints(pose.apply(model.eye_a_midpoint(idx)),
                                   pose.apply(model.eye_b_midpoint(idx)),
                                   pose.apply(model.mouth_midpoint(idx)));
}

Eigen::Matrix3d NormParams::camera_matrix() const {
  Eigen::Matrix3d k;
  k << focal_norm, 0, out_width / 2.0 - 0.5, 0, focal_norm, out_height / 2.0 - 0.5, 0, 0, 1;
  return k;
}

GazeAngles rotate_to_normalized(const Eigen::Matrix3d& rot, const Eigen::Vector3d& v) {
  return vector_to_angles(rot * v);
}

NormalizationResult normalization_transform(const HeadFrame& frame, const CameraIntrinsics& k_real,
                                            const NormParams& params,
                                            const std::optional<Eigen::Vector3d>& gaze_camera) {
  if (!(params.focal_norm > 0) || !(params.distance_norm > 0) || params.out_width < 1 ||
      params.out_height < 1)
    throw Error(ErrorCode::InvalidArgument, "normalization parameters must be positive");
  const Eigen::Vector3d& c = frame.origin;
  const double d = c.norm();
  if (!(d > 0.0)) throw Error(ErrorCode::Degenerate, "face centre coincides with the camera");
  if (!(c.z() > 0.0)) throw Error(ErrorCode::InvalidArgument, "face centre is behind the camera");

  const Eigen::Vector3d z_r = c / d;
  const Eigen::Vector3d y_raw = z_r.cross(frame.x_axis);
  if (y_raw.norm() < 1e-12)
    throw Error(ErrorCode::Degenerate, "head x-axis is parallel to the viewing direction");
  const Eigen::Vector3d y_r = y_raw.normalized();
  const Eigen::Vector3d x_r = y_r.cross(z_r);

  NormalizationResult out;
  out.rot.row(0) = x_r.transpose();
  out.rot.row(1) = y_r.transpose();
  out.rot.row(2) = z_r.transpose();
  out.scale = params.distance_norm / d;

  const Eigen::Matrix3d s = Eigen::Vector3d(1.0, 1.0, out.scale).asDiagonal();
  out.warp = params.camera_matrix() * s * out.rot * k_real.matrix().inverse();

  out.headpose_n = rotate_to_normalized(out.rot, frame.facing());
  if (gaze_camera) out.gaze_n = rotate_to_normalized(out.rot, *gaze_camera);
  return out;
}

Image warp_image(const Image& src, const Eigen::Matrix3d& warp, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1)
    throw Error(ErrorCode::InvalidArgument, "output size must be positive");
  if (src.channels != 1 && src.channels != 3)
    throw Error(ErrorCode::InvalidArgument, "images must have 1 or 3 channels");
  Eigen::FullPivLU<Eigen::Matrix3d> lu(warp);
  if (!lu.isInvertible() || !warp.allFinite())
    throw Error(ErrorCode::Degenerate, "warp matrix is singular");
  const Eigen::Matrix3d inv = lu.inverse();

  Image out(out_width, out_height, src.channels);
  const double max_x = src.width - 0.5;
  const double max_y = src.height - 0.5;
  for (int v = 0; v < out_height; ++v) {
    for (int u = 0; u < out_width; ++u) {
      const Eigen::Vector3d p = inv * Eigen::Vector3d(u, v, 1.0);
      if (!(std::abs(p.z()) > 0.0)) continue;
      const double sx = p.x() / p.z();
      const double sy = p.y() / p.z();
      if (!(sx >= -0.5 && sx <= max_x && sy >= -0.5 && sy <= max_y)) continue;

      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const double ax = sx - fx0;
      const double ay = sy - fy0;
      const int x0 = std::clamp(static_cast<int>(fx0), 0, src.width - 1);
      const int y0 = std::clamp(static_cast<int>(fy0), 0, src.height - 1);
      const int x1 = std::clamp(static_cast<int>(fx0) + 1, 0, src.width - 1);
      const int y1 = std::clamp(static_cast<int>(fy0) + 1, 0, src.height - 1);
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1.0 - ax) * src.at(x0, y0, c) + ax * src.at(x1, y0, c);
        const double bottom = (1.0 - ax) * src.at(x0, y1, c) + ax * src.at(x1, y1, c);
        const double value = (1.0 - ay) * top + ay * bottom;
        out.at(u, v, c) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace eyecontact
