#include "eyecontact/headpose.hpp"

#include "eyecontact/error.hpp"
#include "eyecontact/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace eyecontact {
namespace {

const char kCanonicalModel[] =
#include "face_model_data.inc"
    ;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Residual vector (u - u_obs, v - v_obs) stacked per point. Returns false if a
// point falls on or behind the camera plane.
bool residuals(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
               std::span<const Eigen::Vector3d> model, std::span<const Eigen::Vector2d> image,
               const CameraIntrinsics& k, Eigen::VectorXd& out) {
  out.resize(static_cast<Eigen::Index>(2 * model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Eigen::Vector3d pc = r * model[i] + t;
    if (!(pc.z() > 0.0)) return false;
    const Eigen::Vector2d uv = k.project(pc);
    out.segment<2>(static_cast<Eigen::Index>(2 * i)) = uv - image[i];
  }
  return out.allFinite();
}

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d m;
  m << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return m;
}

Eigen::Vector2d CameraIntrinsics::project(const Eigen::Vector3d& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

CameraIntrinsics default_intrinsics(int width, int height) {
  if (width < 1 || height < 1)
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  CameraIntrinsics k;
  k.fx = k.fy = static_cast<double>(width);
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

FaceModel3D::FaceModel3D(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.size() != kPointCount)
    throw Error(ErrorCode::Schema, "face model needs exactly 68 points, got " +
                                       std::to_string(points_.size()));
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : points_) {
    if (!p.allFinite()) throw Error(ErrorCode::Schema, "face model point is not finite");
    c += p;
  }
  c /= static_cast<double>(points_.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points_) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (eig.eigenvalues()(1) <= 1e-9 * std::max(1.0, eig.eigenvalues()(2)))
    throw Error(ErrorCode::Degenerate, "face model points are collinear");
}

FaceModel3D FaceModel3D::parse(const std::string& text) {
  std::istringstream in(text);
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z))
      throw Error(ErrorCode::Parse, "face model line " + std::to_string(line_no) +
                                        ": expected \"x y z\"");
    std::string rest;
    if (ls >> rest)
      throw Error(ErrorCode::Parse,
                  "face model line " + std::to_string(line_no) + ": trailing content");
    pts.emplace_back(x, y, z);
  }
  return FaceModel3D(std::move(pts));
}

FaceModel3D FaceModel3D::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open face model: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

const FaceModel3D& FaceModel3D::canonical() {
  static const FaceModel3D model = parse(kCanonicalModel);
  return model;
}

Eigen::Vector3d FaceModel3D::eye_a_midpoint(const LandmarkIndexMap& idx) const {
  return 0.5 * (points_.at(idx.eye_a_outer) + points_.at(idx.eye_a_inner));
}

Eigen::Vector3d FaceModel3D::eye_b_midpoint(const LandmarkIndexMap& idx) const {
  return 0.5 * (points_.at(idx.eye_b_inner) + points_.at(idx.eye_b_outer));
}

Eigen::Vector3d FaceModel3D::mouth_midpoint(const LandmarkIndexMap& idx) const {
  return 0.5 * (points_.at(idx.mouth_a) + points_.at(idx.mouth_b));
}

double reprojection_rmse(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                         std::span<const Eigen::Vector3d> model,
                         std::span<const Eigen::Vector2d> image, const CameraIntrinsics& k) {
  if (model.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    sum += (k.project(rotation * model[i] + translation) - image[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(model.size()));
}

std::vector<Eigen::Vector2d> project_points(const HeadPose& pose,
                                            std::span<const Eigen::Vector3d> model,
                                            const CameraIntrinsics& k) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(model.size());
  for (const auto& p : model) out.push_back(k.project(pose.apply(p)));
  return out;
}

HeadPose refine_lm(const HeadPose& initial, std::span<const Eigen::Vector3d> model,
                   std::span<const Eigen::Vector2d> image, const CameraIntrinsics& k,
                   const LmOptions& options) {
  if (model.size() != image.size() || model.empty())
    throw Error(ErrorCode::Dimension, "LM: model and image point counts differ");

  Eigen::Matrix3d r = initial.rotation;
  Eigen::Vector3d t = initial.translation;
  Eigen::VectorXd res;
  if (!residuals(r, t, model, image, k, res))
    throw Error(ErrorCode::Numeric, "LM: non-finite residuals at the initial pose");
  double cost = res.squaredNorm();
  double lambda = options.lambda0;

  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd jac(2 * n, 6);
  Eigen::VectorXd candidate_res;

  for (int iter = 0; iter < options.max_iters; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d rx = r * model[static_cast<std::size_t>(i)];
      const Eigen::Vector3d pc = rx + t;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0, -k.fx * pc.x() * iz * iz, 0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      jac.block<2, 3>(2 * i, 0) = -dproj * skew(rx);
      jac.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * res;

    bool accepted = false;
    Eigen::Matrix<double, 6, 1> step;
    while (!accepted) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      for (int d = 0; d < 6; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      step = a.ldlt().solve(-g);
      if (!step.allFinite()) return HeadPose{r, t, std::sqrt(cost / static_cast<double>(n))};
      if (step.norm() < options.tol) break;

      const Eigen::Matrix3d r_new = orthonormalize(vector_to_rotation(step.head<3>()) * r);
      const Eigen::Vector3d t_new = t + step.tail<3>();
      if (residuals(r_new, t_new, model, image, k, candidate_res) &&
          candidate_res.squaredNorm() < cost) {
        r = r_new;
        t = t_new;
        res = candidate_res;
        cost = res.squaredNorm();
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) break;
      }
    }
    if (!accepted) break;
    if (step.norm() < options.tol) break;
  }

  HeadPose out;
  out.rotation = r;
  out.translation = t;
  out.reprojection_rmse = std::sqrt(cost / static_cast<double>(n));
  return out;
}

Eigen::Vector3d rotation_to_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Eigen::Matrix3d vector_to_rotation(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

Eigen::Matrix3d euler_to_rotation(double pitch, double yaw, double roll) {
  return (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

std::pair<KalmanState, HeadPose> kalman_step(const std::optional<KalmanState>& state,
                                             const HeadPose& measurement, double t,
                                             const KalmanConfig& config) {
  const Eigen::Vector3d r_meas = rotation_to_vector(measurement.rotation);
  const double var_rot = config.measurement_sigma_rot * config.measurement_sigma_rot;
  const double var_t = config.measurement_sigma_t * config.measurement_sigma_t;

  if (!state) {
    KalmanState s;
    s.x.setZero();
    s.x.segment<3>(0) = r_meas;
    s.x.segment<3>(3) = measurement.translation;
    KalmanVector diag;
    diag << Eigen::Vector3d::Constant(var_rot), Eigen::Vector3d::Constant(var_t),
        Eigen::Vector3d::Constant(config.prior_sigma_rot_velocity *
                                  config.prior_sigma_rot_velocity),
        Eigen::Vector3d::Constant(config.prior_sigma_t_velocity * config.prior_sigma_t_velocity);
    s.covariance = diag.asDiagonal();
    s.t = t;
    return {s, measurement};
  }

  const double dt = t - state->t;
  if (!(dt > 0.0))
    throw Error(ErrorCode::InvalidArgument, "Kalman: timestamps must be strictly increasing");

  KalmanMatrix f = KalmanMatrix::Identity();
  f.block<6, 6>(0, 6) = dt * Eigen::Matrix<double, 6, 6>::Identity();

  // Piecewise-constant white acceleration per axis.
  KalmanMatrix q = KalmanMatrix::Zero();
  const double g0 = 0.5 * dt * dt;
  const double g1 = dt;
  for (int axis = 0; axis < 6; ++axis) {
    const double sigma = axis < 3 ? config.process_sigma_rot : config.process_sigma_t;
    const double s2 = sigma * sigma;
    q(axis, axis) = s2 * g0 * g0;
    q(axis, axis + 6) = q(axis + 6, axis) = s2 * g0 * g1;
    q(axis + 6, axis + 6) = s2 * g1 * g1;
  }

  KalmanState s;
  s.t = t;
  s.x = f * state->x;
  s.covariance = f * state->covariance * f.transpose() + q;

  // Pick the rotation-vector representative nearest the prediction.
  Eigen::Vector3d r_obs = r_meas;
  const double angle = r_meas.norm();
  if (angle > 1e-12) {
    const Eigen::Vector3d alt = r_meas * ((angle - 2.0 * kPi) / angle);
    if ((alt - s.x.segment<3>(0)).norm() < (r_obs - s.x.segment<3>(0)).norm()) r_obs = alt;
  }

  Eigen::Matrix<double, 6, 1> z;
  z << r_obs, measurement.translation;
  Eigen::Matrix<double, 6, 12> h = Eigen::Matrix<double, 6, 12>::Zero();
  h.block<6, 6>(0, 0).setIdentity();
  Eigen::Matrix<double, 6, 6> rm = Eigen::Matrix<double, 6, 6>::Zero();
  rm.diagonal() << Eigen::Vector3d::Constant(var_rot), Eigen::Vector3d::Constant(var_t);

  const Eigen::Matrix<double, 6, 6> innov_cov = h * s.covariance * h.transpose() + rm;
  const Eigen::Matrix<double, 12, 6> gain =
      s.covariance * h.transpose() * innov_cov.inverse();
  s.x += gain * (z - h * s.x);
  const KalmanMatrix ikh = KalmanMatrix::Identity() - gain * h;
  s.covariance = ikh * s.covariance * ikh.transpose() + gain * rm * gain.transpose();
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();

  HeadPose smoothed;
  smoothed.rotation = orthonormalize(vector_to_rotation(s.x.segment<3>(0)));
  smoothed.translation = s.x.segment<3>(3);
  smoothed.reprojection_rmse = measurement.reprojection_rmse;
  return {s, smoothed};
}

}  // namespace eyecontact
