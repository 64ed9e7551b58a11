#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eyecontact/error.hpp"
#include "eyecontact/gaze.hpp"
#include "eyecontact/image.hpp"
#include "eyecontact/normalize.hpp"
#include "eyecontact/synth.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace eyecontact;

namespace {

HeadFrame random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HeadPose pose;
  pose.rotation = testing::random_rotation(rng, 60);
  pose.translation = {200 * u(rng), 200 * u(rng), 500 + 300 * u(rng)};
  return head_frame(pose, FaceModel3D::canonical());
}

}  // namespace

TEST_CASE("head_frame from hand-placed midpoints") {
  const HeadFrame f = head_frame_from_midpoints({-30, -20, 600}, {30, -20, 600}, {0, 40, 600});
  CHECK((f.x_axis - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  CHECK((f.y_axis - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
  CHECK((f.z_axis - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  CHECK((f.origin - Eigen::Vector3d(0, 0, 600)).norm() < 1e-12);
  CHECK((f.facing() - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);

  CHECK_THROWS_AS(head_frame_from_midpoints({-30, 0, 600}, {30, 0, 600}, {60, 0, 600}), Error);
}

TEST_CASE("head_frame axes are orthonormal and right-handed") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const HeadFrame f = random_frame(rng);
    CHECK(std::abs(f.x_axis.dot(f.y_axis)) < 1e-9);
    CHECK(std::abs(f.y_axis.dot(f.z_axis)) < 1e-9);
    CHECK(std::abs(f.x_axis.dot(f.z_axis)) < 1e-9);
    CHECK((f.x_axis.cross(f.y_axis) - f.z_axis).norm() < 1e-9);
  }
}

TEST_CASE("normalization of a centred head is the identity rotation") {
  HeadFrame f;
  f.origin = {0, 0, 600};
  const auto r = normalization_transform(f, default_intrinsics(640, 480));
  CHECK((r.rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(r.scale == doctest::Approx(0.5));
  CHECK(r.headpose_n.pitch == doctest::Approx(0.0));
  CHECK(r.headpose_n.yaw == doctest::Approx(0.0));
  CHECK_FALSE(r.gaze_n);
}

TEST_CASE("normalization looks at the face and cancels roll") {
  std::mt19937_64 rng(17);
  const auto k = default_intrinsics(640, 480);
  for (int i = 0; i < 1000; ++i) {
    const HeadFrame f = random_frame(rng);
    const auto r = normalization_transform(f, k);
    const Eigen::Vector3d c = r.rot * f.origin;
    CHECK(std::abs(c.x()) < 1e-9);
    CHECK(std::abs(c.y()) < 1e-9);
    CHECK(std::abs(c.z() - f.origin.norm()) < 1e-9);
    CHECK(std::abs((r.rot * f.x_axis).y()) < 1e-9);
    CHECK((r.rot * r.rot.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.scale > 0.0);
    CHECK(std::abs(r.warp.determinant()) > 0.0);
  }
}

TEST_CASE("warp is the stated matrix product") {
  std::mt19937_64 rng(2);
  const auto k = default_intrinsics(640, 480);
  NormParams p;
  const HeadFrame f = random_frame(rng);
  const auto r = normalization_transform(f, k, p);
  Eigen::Matrix3d kn;
  kn << 960, 0, 223.5, 0, 960, 223.5, 0, 0, 1;
  const Eigen::Matrix3d expected =
      kn * Eigen::Vector3d(1, 1, r.scale).asDiagonal() * r.rot * k.matrix().inverse();
  CHECK((r.warp - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalizing a normalized configuration is the identity") {
  std::mt19937_64 rng(23);
  const auto k = default_intrinsics(640, 480);
  NormParams p;
  for (int i = 0; i < 200; ++i) {
    const HeadFrame f = random_frame(rng);
    const auto r = normalization_transform(f, k, p);
    HeadFrame g;
    g.origin = r.scale * (r.rot * f.origin);
    g.x_axis = r.rot * f.x_axis;
    g.y_axis = r.rot * f.y_axis;
    g.z_axis = r.rot * f.z_axis;
    const auto again = normalization_transform(g, k, p);
    CHECK((again.rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(again.scale - 1.0) < 1e-6);
  }
}

TEST_CASE("gaze and head pose are rotated into normalized space") {
  HeadFrame f;
  f.origin = {0, 0, 500};
  const Eigen::Vector3d gaze = angles_to_vector({0.1, -0.2});
  const auto r = normalization_transform(f, default_intrinsics(640, 480), {}, gaze);
  REQUIRE(r.gaze_n);
  CHECK(r.gaze_n->pitch == doctest::Approx(0.1));
  CHECK(r.gaze_n->yaw == doctest::Approx(-0.2));

  const GazeAngles a = rotate_to_normalized(Eigen::Matrix3d::Identity(), {0, 0, -1});
  CHECK(a.pitch == doctest::Approx(0.0));
  CHECK_THROWS_AS(rotate_to_normalized(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()),
                  Error);
}

TEST_CASE("normalization errors") {
  const auto k = default_intrinsics(640, 480);
  HeadFrame at_origin;
  at_origin.origin = Eigen::Vector3d::Zero();
  CHECK_THROWS_AS(normalization_transform(at_origin, k), Error);

  HeadFrame parallel;
  parallel.origin = {300, 0, 400};
  parallel.x_axis = {0.6, 0, 0.8};
  CHECK_THROWS_AS(normalization_transform(parallel, k), Error);

  NormParams bad;
  bad.focal_norm = 0;
  HeadFrame f;
  f.origin = {0, 0, 500};
  CHECK_THROWS_AS(normalization_transform(f, k, bad), Error);
}

TEST_CASE("face centre lands at the normalized image centre") {
  const FaceModel3D& model = FaceModel3D::canonical();
  const PoseScene scene = generate_pose_scene(model, 100, 0.0, 31);
  NormParams p;
  for (const HeadPose& pose : scene.poses) {
    const HeadFrame f = head_frame(pose, model);
    const auto r = normalization_transform(f, scene.intrinsics, p);
    const Eigen::Vector2d px = scene.intrinsics.project(f.origin);
    const Eigen::Vector3d h = r.warp * Eigen::Vector3d(px.x(), px.y(), 1.0);
    const Eigen::Vector2d q = h.head<2>() / h.z();
    CHECK((q - Eigen::Vector2d(223.5, 223.5)).norm() < 1.0);
  }
}

TEST_CASE("warp_image with the identity copies the image") {
  Image src(5, 4, 3);
  for (std::size_t i = 0; i < src.data.size(); ++i) src.data[i] = static_cast<std::uint8_t>(i * 7);
  const Image out = warp_image(src, Eigen::Matrix3d::Identity(), 5, 4);
  CHECK(out == src);
}

TEST_CASE("warp_image 2x scale keeps corner colours") {
  Image src(2, 2, 1);
  src.at(0, 0) = 255;
  src.at(1, 0) = 0;
  src.at(0, 1) = 0;
  src.at(1, 1) = 255;
  Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
  scale(0, 0) = scale(1, 1) = 2.0;
  const Image out = warp_image(src, scale, 4, 4);
  CHECK(out.at(0, 0) == 255);
  CHECK(out.at(3, 0) == 0);
  CHECK(out.at(0, 3) == 0);
  CHECK(out.at(3, 3) == 255);
}

TEST_CASE("warp_image outside the source is black; singular warps are refused") {
  Image src(8, 8, 1);
  std::fill(src.data.begin(), src.data.end(), 200);
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = 1000.0;
  const Image out = warp_image(src, shift, 8, 8);
  for (auto v : out.data) CHECK(v == 0);

  CHECK_THROWS_AS(warp_image(src, Eigen::Matrix3d::Zero(), 8, 8), Error);
  CHECK_THROWS_AS(warp_image(src, Eigen::Matrix3d::Identity(), 0, 8), Error);
}

TEST_CASE("PNG roundtrip") {
  const auto dir = testing::temp_dir("png");
  for (int channels : {1, 3}) {
    Image img(7, 5, channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 13);
    const std::string path = (dir / ("img" + std::to_string(channels) + ".png")).string();
    write_png(img, path);
    CHECK(read_png(path) == img);
  }
  CHECK_THROWS_AS(read_png((dir / "missing.png").string()), Error);
}
