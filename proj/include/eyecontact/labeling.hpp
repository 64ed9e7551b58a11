#pragma once

#include "eyecontact/records.hpp"
#include "eyecontact/types.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace eyecontact {

/// Indices of records with a detected face whose confidence is at least
/// `min_confidence`. A missing confidence only passes when the threshold is 0.
std::vector<std::size_t> filter_confidence(std::span<const FrameRecord> records,
                                           double min_confidence = 0.9);

struct OpticsParams {
  int min_pts = 5;
  double max_eps = std::numeric_limits<double>::infinity();
  double xi = 0.05;
  /// Smallest cluster kept by the xi extraction; 0 means min_pts.
  int min_cluster_size = 0;
};

/// min_pts = max(5, ceil(1% of n)).
int default_min_pts(std::size_t n);

/// Raw OPTICS output, indexed by input point unless stated otherwise.
struct OpticsOrdering {
  std::vector<std::size_t> ordering;
  std::vector<double> reachability;  // inf when undefined
  std::vector<double> core_distance;
  std::vector<long> predecessor;  // -1 when none
};

OpticsOrdering optics_order(std::span<const GazePoint2D> points, int min_pts, double max_eps);

/// Clusters as inclusive [start, end] ranges over the OPTICS ordering, found
/// by the steep-area xi method (with predecessor correction). Nested clusters
/// are all reported.
std::vector<std::pair<std::size_t, std::size_t>> xi_clusters(const OpticsOrdering& o, double xi,
                                                             int min_pts, int min_cluster_size);

constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // per point: cluster id or kNoise
  std::vector<GazePoint2D> centroids;
  std::vector<std::size_t> sizes;
  OpticsOrdering optics;
  std::vector<std::pair<std::size_t, std::size_t>> hierarchy;

  std::size_t cluster_count() const { return centroids.size(); }
};

/// OPTICS ordering plus xi extraction. Flat clusters are chosen from the xi
/// hierarchy by excess of mass (the most stable non-overlapping set); the
/// cluster spanning the whole ordering is only used when it is the only one.
/// Ids follow the ordering.
ClusterAssignment optics_cluster(std::span<const GazePoint2D> points, const OpticsParams& params);

/// Cluster with the centroid nearest the origin; ties go to the larger
/// cluster, then the lower id. Throws NoDeviceCluster when everything is noise.
int select_device_cluster(const ClusterAssignment& assignment);

/// EyeContact for members of the device cluster, NoEyeContact for everything
/// else. With `drop_noise`, noise points get no label.
std::vector<std::optional<Label>> assign_labels(const ClusterAssignment& assignment,
                                                int device_cluster, bool drop_noise = false);

}  // namespace eyecontact
