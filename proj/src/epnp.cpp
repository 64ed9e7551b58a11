#include "eyecontact/error.hpp"
#include "eyecontact/headpose.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>

namespace eyecontact {
namespace {

using Mat6x10 = Eigen::Matrix<double, 6, 10>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec4 = Eigen::Vector4d;

constexpr std::array<std::pair<int, int>, 6> kControlPairs{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct Solution {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
  double rmse = std::numeric_limits<double>::infinity();
};

// Control points: centroid plus the principal axes of the model cloud scaled
// by their standard deviations.
std::array<Eigen::Vector3d, 4> choose_control_points(std::span<const Eigen::Vector3d> pts) {
  const auto n = static_cast<double>(pts.size());
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - centroid) * (p - centroid).transpose();
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d values = eig.eigenvalues();  // ascending
  const double largest = values(2);
  if (!(largest > 0.0)) throw Error(ErrorCode::Degenerate, "EPnP: model points coincide");
  if (values(1) < 1e-12 * largest)
    throw Error(ErrorCode::Degenerate, "EPnP: model points are collinear");

  std::array<Eigen::Vector3d, 4> cws;
  cws[0] = centroid;
  for (int i = 0; i < 3; ++i) {
    // A planar model has a null third axis; keep it non-zero so the
    // barycentric system stays invertible.
    const double s = std::sqrt(std::max(values(2 - i), 1e-6 * largest));
    cws[i + 1] = centroid + s * eig.eigenvectors().col(2 - i);
  }
  return cws;
}

std::vector<Eigen::Vector4d> barycentric(std::span<const Eigen::Vector3d> pts,
                                         const std::array<Eigen::Vector3d, 4>& cws) {
  Eigen::Matrix3d cc;
  for (int j = 0; j < 3; ++j) cc.col(j) = cws[j + 1] - cws[0];
  const Eigen::Matrix3d inv = cc.inverse();
  std::vector<Eigen::Vector4d> alphas;
  alphas.reserve(pts.size());
  for (const auto& p : pts) {
    const Eigen::Vector3d a = inv * (p - cws[0]);
    alphas.emplace_back(1.0 - a.sum(), a(0), a(1), a(2));
  }
  return alphas;
}

Solution rigid_fit(std::span<const Eigen::Vector3d> world, const std::vector<Eigen::Vector3d>& cam) {
  const auto n = static_cast<double>(world.size());
  Eigen::Vector3d wc = Eigen::Vector3d::Zero(), cc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    wc += world[i];
    cc += cam[i];
  }
  wc /= n;
  cc /= n;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) h += (cam[i] - cc) * (world[i] - wc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  Solution s;
  s.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  s.translation = cc - s.rotation * wc;
  return s;
}

Mat6x10 build_l6x10(const std::array<Eigen::Matrix<double, 12, 1>, 4>& v) {
  Mat6x10 l;
  for (int r = 0; r < 6; ++r) {
    const auto [a, b] = kControlPairs[r];
    std::array<Eigen::Vector3d, 4> dv;
    for (int i = 0; i < 4; ++i) dv[i] = v[i].segment<3>(3 * a) - v[i].segment<3>(3 * b);
    l(r, 0) = dv[0].dot(dv[0]);
    l(r, 1) = 2.0 * dv[0].dot(dv[1]);
    l(r, 2) = dv[1].dot(dv[1]);
    l(r, 3) = 2.0 * dv[0].dot(dv[2]);
    l(r, 4) = 2.0 * dv[1].dot(dv[2]);
    l(r, 5) = dv[2].dot(dv[2]);
    l(r, 6) = 2.0 * dv[0].dot(dv[3]);
    l(r, 7) = 2.0 * dv[1].dot(dv[3]);
    l(r, 8) = 2.0 * dv[2].dot(dv[3]);
    l(r, 9) = dv[3].dot(dv[3]);
  }
  return l;
}

template <int Cols>
Eigen::Matrix<double, Cols, 1> lstsq(const Eigen::Matrix<double, 6, Cols>& a, const Vec6& b) {
  return a.colPivHouseholderQr().solve(b);
}

Vec4 betas_approx_1(const Mat6x10& l, const Vec6& rho) {
  Eigen::Matrix<double, 6, 4> a;
  a << l.col(0), l.col(1), l.col(3), l.col(6);
  const Vec4 b4 = lstsq<4>(a, rho);
  Vec4 betas;
  if (b4(0) < 0) {
    const double s = std::sqrt(-b4(0));
    betas << s, -b4(1) / s, -b4(2) / s, -b4(3) / s;
  } else {
    const double s = std::sqrt(b4(0));
    betas << s, b4(1) / s, b4(2) / s, b4(3) / s;
  }
  return betas;
}

Vec4 betas_approx_2(const Mat6x10& l, const Vec6& rho) {
  Eigen::Matrix<double, 6, 3> a;
  a << l.col(0), l.col(1), l.col(2);
  const Eigen::Vector3d b3 = lstsq<3>(a, rho);
  Vec4 betas = Vec4::Zero();
  if (b3(0) < 0) {
    betas(0) = std::sqrt(-b3(0));
    betas(1) = b3(2) < 0 ? std::sqrt(-b3(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(b3(0));
    betas(1) = b3(2) > 0 ? std::sqrt(b3(2)) : 0.0;
  }
  if (b3(1) < 0) betas(0) = -betas(0);
  return betas;
}

Vec4 betas_approx_3(const Mat6x10& l, const Vec6& rho) {
  Eigen::Matrix<double, 6, 5> a;
  a << l.col(0), l.col(1), l.col(2), l.col(3), l.col(4);
  const Eigen::Matrix<double, 5, 1> b5 = lstsq<5>(a, rho);
  Vec4 betas = Vec4::Zero();
  if (b5(0) < 0) {
    betas(0) = std::sqrt(-b5(0));
    betas(1) = b5(2) < 0 ? std::sqrt(-b5(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(b5(0));
    betas(1) = b5(2) > 0 ? std::sqrt(b5(2)) : 0.0;
  }
  if (b5(1) < 0) betas(0) = -betas(0);
  betas(2) = betas(0) != 0.0 ? b5(3) / betas(0) : 0.0;
  return betas;
}

void gauss_newton(const Mat6x10& l, const Vec6& rho, Vec4& betas) {
  for (int iter = 0; iter < 5; ++iter) {
    Eigen::Matrix<double, 6, 4> a;
    Vec6 b;
    for (int i = 0; i < 6; ++i) {
      const auto r = l.row(i);
      a(i, 0) = 2 * r(0) * betas(0) + r(1) * betas(1) + r(3) * betas(2) + r(6) * betas(3);
      a(i, 1) = r(1) * betas(0) + 2 * r(2) * betas(1) + r(4) * betas(2) + r(7) * betas(3);
      a(i, 2) = r(3) * betas(0) + r(4) * betas(1) + 2 * r(5) * betas(2) + r(8) * betas(3);
      a(i, 3) = r(6) * betas(0) + r(7) * betas(1) + r(8) * betas(2) + 2 * r(9) * betas(3);
      b(i) = rho(i) - (r(0) * betas(0) * betas(0) + r(1) * betas(0) * betas(1) +
                       r(2) * betas(1) * betas(1) + r(3) * betas(0) * betas(2) +
                       r(4) * betas(1) * betas(2) + r(5) * betas(2) * betas(2) +
                       r(6) * betas(0) * betas(3) + r(7) * betas(1) * betas(3) +
                       r(8) * betas(2) * betas(3) + r(9) * betas(3) * betas(3));
    }
    betas += a.colPivHouseholderQr().solve(b);
  }
}

}  // namespace

HeadPose solve_epnp(std::span<const Eigen::Vector3d> model, std::span<const Eigen::Vector2d> image,
                    const CameraIntrinsics& k) {
  if (model.size() != image.size())
    throw Error(ErrorCode::Dimension, "EPnP: model and image point counts differ");
  if (model.size() < 4) throw Error(ErrorCode::InvalidArgument, "EPnP: needs at least 4 points");
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!model[i].allFinite() || !image[i].allFinite())
      throw Error(ErrorCode::InvalidArgument, "EPnP: non-finite correspondence");
  }

  Eigen::Vector2d centre = Eigen::Vector2d::Zero();
  for (const auto& uv : image) centre += uv;
  centre /= static_cast<double>(image.size());
  double spread = 0.0;
  for (const auto& uv : image) spread = std::max(spread, (uv - centre).norm());
  if (spread < 1e-6 * std::max(k.fx, k.fy))
    throw Error(ErrorCode::Degenerate, "EPnP: image points collapse to a single point");

  const auto cws = choose_control_points(model);
  const auto alphas = barycentric(model, cws);

  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd m(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = alphas[i];
    const Eigen::Vector2d& uv = image[i];
    for (int j = 0; j < 4; ++j) {
      m(2 * i, 3 * j) = a(j) * k.fx;
      m(2 * i, 3 * j + 1) = 0.0;
      m(2 * i, 3 * j + 2) = a(j) * (k.cx - uv.x());
      m(2 * i + 1, 3 * j) = 0.0;
      m(2 * i + 1, 3 * j + 1) = a(j) * k.fy;
      m(2 * i + 1, 3 * j + 2) = a(j) * (k.cy - uv.y());
    }
  }
  const Eigen::Matrix<double, 12, 12> mtm = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(mtm);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorCode::Degenerate, "EPnP: eigen decomposition failed");

  // v[0] belongs to the smallest eigenvalue.
  std::array<Eigen::Matrix<double, 12, 1>, 4> v;
  for (int i = 0; i < 4; ++i) v[i] = eig.eigenvectors().col(i);

  const Mat6x10 l = build_l6x10(v);
  Vec6 rho;
  for (int r = 0; r < 6; ++r) {
    const auto [a, b] = kControlPairs[r];
    rho(r) = (cws[a] - cws[b]).squaredNorm();
  }

  auto evaluate = [&](Vec4 betas) {
    gauss_newton(l, rho, betas);
    std::array<Eigen::Vector3d, 4> ccs;
    for (int j = 0; j < 4; ++j) {
      ccs[j].setZero();
      for (int i = 0; i < 4; ++i) ccs[j] += betas(i) * v[i].segment<3>(3 * j);
    }
    std::vector<Eigen::Vector3d> pcs(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
      pcs[i] = alphas[i](0) * ccs[0] + alphas[i](1) * ccs[1] + alphas[i](2) * ccs[2] +
               alphas[i](3) * ccs[3];
    }
    // The null-space solution is defined up to sign; keep the points in front.
    double mean_z = 0.0;
    for (const auto& p : pcs) mean_z += p.z();
    if (mean_z < 0) {
      for (auto& p : pcs) p = -p;
    }
    Solution s = rigid_fit(model, pcs);
    if (!s.rotation.allFinite() || !s.translation.allFinite()) return s;
    s.rmse = reprojection_rmse(s.rotation, s.translation, model, image, k);
    return s;
  };

  Solution best;
  for (const Vec4& betas :
       {betas_approx_1(l, rho), betas_approx_2(l, rho), betas_approx_3(l, rho)}) {
    if (!betas.allFinite()) continue;
    Solution s = evaluate(betas);
    if (std::isfinite(s.rmse) && s.rmse < best.rmse) best = s;
  }
  if (!std::isfinite(best.rmse))
    throw Error(ErrorCode::Degenerate, "EPnP: control-point system is degenerate");
  if (best.translation.z() <= 0.0)
    throw Error(ErrorCode::Degenerate, "EPnP: solution places the face behind the camera");

  HeadPose pose;
  pose.rotation = best.rotation;
  pose.translation = best.translation;
  pose.reprojection_rmse = best.rmse;
  return pose;
}

}  // namespace eyecontact
