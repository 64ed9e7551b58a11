#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eyecontact/error.hpp"
#include "eyecontact/labeling.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace eyecontact;

namespace {

FrameRecord face(std::optional<double> confidence, bool detected = true) {
  FrameRecord r;
  r.session_id = "s";
  r.participant_id = "p";
  r.image_w = 640;
  r.image_h = 480;
  r.face_detected = detected;
  r.face_confidence = confidence;
  return r;
}

std::vector<GazePoint2D> blobs(std::uint64_t seed, std::vector<int>& truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 10.0);
  std::vector<GazePoint2D> pts;
  truth.clear();
  for (int i = 0; i < 200; ++i) {
    pts.push_back({n(rng), n(rng)});
    truth.push_back(0);
  }
  for (int i = 0; i < 200; ++i) {
    pts.push_back({150 + n(rng), 200 + n(rng)});
    truth.push_back(1);
  }
  return pts;
}

// Agreement of cluster ids with generation labels under the best matching.
double agreement(const ClusterAssignment& a, const std::vector<int>& truth) {
  std::size_t best = 0;
  for (int flip = 0; flip < 2; ++flip) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (a.labels[i] != kNoise && (a.labels[i] ^ flip) == truth[i]) ++ok;
    }
    best = std::max(best, ok);
  }
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("filter_confidence keeps confident detections, boundary inclusive") {
  std::vector<FrameRecord> rs{face(0.95), face(0.85), face(0.9)};
  CHECK(filter_confidence(rs, 0.9) == std::vector<std::size_t>{0, 2});
  CHECK(filter_confidence(rs) == std::vector<std::size_t>{0, 2});
  CHECK(filter_confidence(rs, 0.0) == std::vector<std::size_t>{0, 1, 2});

  std::vector<FrameRecord> none{face(std::nullopt, false), face(std::nullopt, false)};
  CHECK(filter_confidence(none, 0.0).empty());

  std::vector<FrameRecord> unknown{face(std::nullopt)};
  CHECK(filter_confidence(unknown, 0.9).empty());
  CHECK(filter_confidence(unknown, 0.0).size() == 1);
}

TEST_CASE("default_min_pts") {
  CHECK(default_min_pts(0) == 5);
  CHECK(default_min_pts(400) == 5);
  CHECK(default_min_pts(501) == 6);
  CHECK(default_min_pts(1000) == 10);
}

TEST_CASE("OPTICS ordering basics") {
  std::vector<GazePoint2D> pts{{0, 0}, {1, 0}, {0, 1}, {10, 10}, {11, 10}};
  const OpticsOrdering o = optics_order(pts, 2, std::numeric_limits<double>::infinity());
  REQUIRE(o.ordering.size() == 5);
  CHECK(std::set<std::size_t>(o.ordering.begin(), o.ordering.end()).size() == 5);
  CHECK(std::isinf(o.reachability[o.ordering[0]]));
  // Core distance with min_pts = 2 counts the point itself: the nearest neighbour.
  CHECK(o.core_distance[0] == doctest::Approx(1.0));
  CHECK(o.core_distance[3] == doctest::Approx(1.0));
  // The jump between the groups shows up once in the ordering.
  int big = 0;
  for (std::size_t k = 1; k < 5; ++k) big += o.reachability[o.ordering[k]] > 5.0 ? 1 : 0;
  CHECK(big == 1);
}

TEST_CASE("planted two-cluster scene") {
  std::vector<int> truth;
  const auto pts = blobs(42, truth);
  OpticsParams p;
  p.min_pts = default_min_pts(pts.size());
  const ClusterAssignment a = optics_cluster(pts, p);
  CHECK(a.cluster_count() == 2);
  CHECK(agreement(a, truth) >= 0.99);

  const int device = select_device_cluster(a);
  const auto c = a.centroids[static_cast<std::size_t>(device)];
  CHECK(std::hypot(c.x, c.y) < 10.0);
}

TEST_CASE("planted scene holds across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<int> truth;
    const auto pts = blobs(seed, truth);
    OpticsParams p;
    const ClusterAssignment a = optics_cluster(pts, p);
    CHECK(a.cluster_count() == 2);
    CHECK(agreement(a, truth) >= 0.99);
  }
}

TEST_CASE("cluster assignment invariants") {
  std::vector<int> truth;
  const auto pts = blobs(7, truth);
  const ClusterAssignment a = optics_cluster(pts, {});
  REQUIRE(a.labels.size() == pts.size());
  for (std::size_t c = 0; c < a.cluster_count(); ++c) {
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (a.labels[i] == static_cast<int>(c)) {
        sx += pts[i].x;
        sy += pts[i].y;
        ++n;
      }
    }
    CHECK(n == a.sizes[c]);
    CHECK(a.centroids[c].x == doctest::Approx(sx / static_cast<double>(n)));
    CHECK(a.centroids[c].y == doctest::Approx(sy / static_cast<double>(n)));
  }
  for (int l : a.labels) CHECK((l == kNoise || (l >= 0 && l < static_cast<int>(a.cluster_count()))));
}

TEST_CASE("identical points form one cluster") {
  std::vector<GazePoint2D> pts(20, GazePoint2D{5, 5});
  const ClusterAssignment a = optics_cluster(pts, {});
  CHECK(a.cluster_count() == 1);
  for (int l : a.labels) CHECK(l == 0);
}

TEST_CASE("optics_cluster preconditions") {
  std::vector<GazePoint2D> three{{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(optics_cluster(three, {}), Error);
  std::vector<GazePoint2D> bad(10, GazePoint2D{0, 0});
  bad[3].x = std::nan("");
  CHECK_THROWS_AS(optics_cluster(bad, {}), Error);
  OpticsParams p;
  p.xi = 1.5;
  std::vector<GazePoint2D> ok(10, GazePoint2D{0, 0});
  CHECK_THROWS_AS(optics_cluster(ok, p), Error);
}

namespace {

ClusterAssignment manual(std::vector<GazePoint2D> centroids, std::vector<std::size_t> sizes) {
  ClusterAssignment a;
  a.centroids = std::move(centroids);
  a.sizes = std::move(sizes);
  for (std::size_t c = 0; c < a.sizes.size(); ++c)
    for (std::size_t k = 0; k < a.sizes[c]; ++k) a.labels.push_back(static_cast<int>(c));
  return a;
}

}  // namespace

TEST_CASE("select_device_cluster") {
  CHECK(select_device_cluster(manual({{5, 3}, {150, 200}}, {10, 10})) == 0);
  CHECK(select_device_cluster(manual({{150, 200}, {5, 3}}, {10, 10})) == 1);
  CHECK(select_device_cluster(manual({{40, 40}}, {3})) == 0);
  // Equal norms: larger cluster, then lower id.
  CHECK(select_device_cluster(manual({{100, 0}, {0, 100}}, {50, 80})) == 1);
  CHECK(select_device_cluster(manual({{100, 0}, {0, 100}}, {80, 80})) == 0);

  ClusterAssignment all_noise;
  all_noise.labels = {kNoise, kNoise};
  CHECK_THROWS_AS(select_device_cluster(all_noise), Error);
  try {
    select_device_cluster(all_noise);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoDeviceCluster);
  }
}

TEST_CASE("device selection is invariant under rotation about the origin") {
  std::vector<int> truth;
  auto pts = blobs(3, truth);
  const ClusterAssignment a = optics_cluster(pts, {});
  const int device = select_device_cluster(a);
  for (double angle : {0.3, 1.7, 3.0}) {
    ClusterAssignment r = a;
    for (auto& c : r.centroids) {
      const double x = c.x * std::cos(angle) - c.y * std::sin(angle);
      const double y = c.x * std::sin(angle) + c.y * std::cos(angle);
      c = {x, y};
    }
    CHECK(select_device_cluster(r) == device);
  }
}

TEST_CASE("assign_labels") {
  ClusterAssignment a = manual({{0, 0}, {100, 100}}, {10, 5});
  a.labels.push_back(kNoise);
  a.labels.push_back(kNoise);
  const auto labels = assign_labels(a, 0);
  std::size_t pos = 0, neg = 0;
  for (const auto& l : labels) {
    REQUIRE(l);
    (*l == Label::EyeContact ? pos : neg)++;
  }
  CHECK(pos == 10);
  CHECK(neg == 7);
  CHECK(pos + neg == a.labels.size());

  const auto dropped = assign_labels(a, 0, true);
  CHECK(!dropped[15]);
  CHECK(!dropped[16]);
  CHECK(dropped[14] == Label::NoEyeContact);

  const auto all = assign_labels(manual({{0, 0}}, {4}), 0);
  for (const auto& l : all) CHECK(l == Label::EyeContact);

  CHECK_THROWS_AS(assign_labels(a, 5), Error);
}
