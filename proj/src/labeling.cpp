#include "eyecontact/labeling.hpp"

#include "eyecontact/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace eyecontact {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(const GazePoint2D& a, const GazePoint2D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Largest index reachable from `start` along steep points, tolerating at most
// min_pts consecutive points that are neither steep nor going the other way.
std::size_t extend_region(const std::vector<bool>& steep, const std::vector<bool>& other_way,
                          std::size_t start, int min_pts) {
  const std::size_t n = steep.size();
  int non_steep = 0;
  std::size_t end = start;
  for (std::size_t index = start; index < n; ++index) {
    if (steep[index]) {
      non_steep = 0;
      end = index;
    } else if (!other_way[index]) {
      if (++non_steep > min_pts) break;
    } else {
      return end;
    }
  }
  return end;
}

struct SteepDownArea {
  std::size_t start;
  std::size_t end;
  double mib;
};

void update_filter_sdas(std::vector<SteepDownArea>& sdas, double mib, double xi_complement,
                        const std::vector<double>& reach) {
  if (std::isinf(mib)) {
    sdas.clear();
    return;
  }
  std::erase_if(sdas, [&](const SteepDownArea& a) { return !(mib <= reach[a.start] * xi_complement); });
  for (auto& a : sdas) a.mib = std::max(a.mib, mib);
}

bool correct_predecessor(const std::vector<double>& reach, const std::vector<long>& pred,
                         const std::vector<std::size_t>& ordering, std::size_t& s, std::size_t& e) {
  while (s < e) {
    if (reach[s] > reach[e]) return true;
    const long p_e = pred[e];
    for (std::size_t i = s; i < e; ++i) {
      if (p_e >= 0 && static_cast<std::size_t>(p_e) == ordering[i]) return true;
    }
    --e;
  }
  return false;
}

}  // namespace

std::vector<std::size_t> filter_confidence(std::span<const FrameRecord> records,
                                           double min_confidence) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.face_detected) continue;
    if (r.face_confidence ? *r.face_confidence >= min_confidence : min_confidence <= 0.0)
      keep.push_back(i);
  }
  return keep;
}

int default_min_pts(std::size_t n) {
  return std::max(5, static_cast<int>(std::ceil(0.01 * static_cast<double>(n))));
}

OpticsOrdering optics_order(std::span<const GazePoint2D> points, int min_pts, double max_eps) {
  const std::size_t n = points.size();
  if (min_pts < 1) throw Error(ErrorCode::InvalidArgument, "OPTICS min_pts must be positive");
  if (n < static_cast<std::size_t>(min_pts))
    throw Error(ErrorCode::InvalidArgument, "OPTICS needs at least min_pts points");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorCode::InvalidArgument, "OPTICS input point is not finite");
  }

  OpticsOrdering o;
  o.reachability.assign(n, kInf);
  o.core_distance.assign(n, kInf);
  o.predecessor.assign(n, -1);
  o.ordering.reserve(n);

  // The point itself counts toward min_pts.
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = dist(points[i], points[j]);
    std::nth_element(row.begin(), row.begin() + (min_pts - 1), row.end());
    const double core = row[static_cast<std::size_t>(min_pts - 1)];
    if (core <= max_eps) o.core_distance[i] = core;
  }

  std::vector<bool> processed(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t point = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (processed[i]) continue;
      if (point == n || o.reachability[i] < o.reachability[point]) point = i;
    }
    processed[point] = true;
    o.ordering.push_back(point);
    const double core = o.core_distance[point];
    if (std::isinf(core)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (processed[j]) continue;
      const double d = dist(points[point], points[j]);
      if (d > max_eps) continue;
      const double reach = std::max(core, d);
      if (reach < o.reachability[j]) {
        o.reachability[j] = reach;
        o.predecessor[j] = static_cast<long>(point);
      }
    }
  }
  return o;
}

std::vector<std::pair<std::size_t, std::size_t>> xi_clusters(const OpticsOrdering& o, double xi,
                                                             int min_pts, int min_cluster_size) {
  if (!(xi > 0.0 && xi < 1.0)) throw Error(ErrorCode::InvalidArgument, "xi must lie in (0, 1)");
  const std::size_t n = o.ordering.size();
  if (min_cluster_size <= 0) min_cluster_size = min_pts;

  // Reachability plot with a trailing inf so a cluster can end at the last point.
  std::vector<double> reach(n + 1);
  std::vector<long> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    reach[i] = o.reachability[o.ordering[i]];
    pred[i] = o.predecessor[o.ordering[i]];
  }
  reach[n] = kInf;

  const double xi_complement = 1.0 - xi;
  std::vector<bool> steep_up(n), steep_down(n), down(n), up(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = reach[i] / reach[i + 1];  // NaN compares false
    steep_up[i] = ratio <= xi_complement;
    steep_down[i] = ratio >= 1.0 / xi_complement;
    down[i] = ratio > 1.0;
    up[i] = ratio < 1.0;
  }

  std::vector<SteepDownArea> sdas;
  std::vector<std::pair<std::size_t, std::size_t>> clusters;
  std::size_t index = 0;
  double mib = 0.0;

  for (std::size_t steep_index = 0; steep_index < n; ++steep_index) {
    if (!steep_up[steep_index] && !steep_down[steep_index]) continue;
    if (steep_index < index) continue;

    for (std::size_t i = index; i <= steep_index; ++i) mib = std::max(mib, reach[i]);

    if (steep_down[steep_index]) {
      update_filter_sdas(sdas, mib, xi_complement, reach);
      const std::size_t d_start = steep_index;
      const std::size_t d_end = extend_region(steep_down, up, d_start, min_pts);
      sdas.push_back({d_start, d_end, 0.0});
      index = d_end + 1;
      mib = reach[index];
    } else {
      update_filter_sdas(sdas, mib, xi_complement, reach);
      const std::size_t u_start = steep_index;
      const std::size_t u_end = extend_region(steep_up, down, u_start, min_pts);
      index = u_end + 1;
      mib = reach[index];

      std::vector<std::pair<std::size_t, std::size_t>> found;
      for (const auto& d : sdas) {
        std::size_t c_start = d.start;
        std::size_t c_end = u_end;
        if (reach[c_end + 1] * xi_complement < d.mib) continue;

        const double d_max = reach[d.start];
        if (d_max * xi_complement >= reach[c_end + 1]) {
          while (reach[c_start + 1] > reach[c_end + 1] && c_start < d.end) ++c_start;
        } else if (reach[c_end + 1] * xi_complement >= d_max) {
          while (c_end > u_start && reach[c_end - 1] > d_max) --c_end;
        }

        if (!correct_predecessor(reach, pred, o.ordering, c_start, c_end)) continue;
        if (c_end - c_start + 1 < static_cast<std::size_t>(min_cluster_size)) continue;
        if (c_start > d.end) continue;
        if (c_end < u_start) continue;
        found.emplace_back(c_start, c_end);
      }
      // Inner clusters first.
      clusters.insert(clusters.end(), found.rbegin(), found.rend());
    }
  }
  return clusters;
}

ClusterAssignment optics_cluster(std::span<const GazePoint2D> points, const OpticsParams& params) {
  ClusterAssignment out;
  out.optics = optics_order(points, params.min_pts, params.max_eps);
  out.hierarchy = xi_clusters(out.optics, params.xi, params.min_pts, params.min_cluster_size);

  const std::size_t n = points.size();
  using Range = std::pair<std::size_t, std::size_t>;
  std::vector<Range> all = out.hierarchy;
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  auto inside = [](const Range& inner, const Range& outer_range) {
    return inner != outer_range && outer_range.first <= inner.first && inner.second <= outer_range.second;
  };
  // Maximal proper sub-clusters of c.
  auto children = [&](const Range& c) {
    std::vector<Range> kids;
    for (const auto& k : all) {
      if (!inside(k, c)) continue;
      const bool nested = std::any_of(all.begin(), all.end(),
                                      [&](const Range& o) { return inside(k, o) && inside(o, c); });
      if (!nested) kids.push_back(k);
    }
    return kids;
  };
  // Excess-of-mass selection over the hierarchy, in density units 1/eps.
  // A cluster is born at the reachability that separates it from its
  // neighbours and dies when its first sub-cluster splits off; each member
  // contributes the density range over which it belongs to the cluster.
  constexpr double kFloor = 1e-9;
  auto reach_at = [&](std::size_t pos) {
    return pos < n ? out.optics.reachability[out.optics.ordering[pos]] : kInf;
  };
  auto lambda = [&](double eps) { return 1.0 / std::max(eps, kFloor); };
  auto birth = [&](const Range& c) { return std::min(reach_at(c.first), reach_at(c.second + 1)); };
  std::function<std::pair<double, std::vector<Range>>(const Range&)> select =
      [&](const Range& c) -> std::pair<double, std::vector<Range>> {
    const std::vector<Range> kids = children(c);
    double death_eps = 0.0;
    for (const auto& k : kids) death_eps = std::max(death_eps, birth(k));
    const double born = lambda(birth(c));
    const double dies = kids.empty() ? kInf : lambda(death_eps);
    double own = 0.0;
    for (std::size_t pos = c.first; pos <= c.second; ++pos) {
      const double core = out.optics.core_distance[out.optics.ordering[pos]];
      own += std::max(0.0, std::min(lambda(core), dies) - born);
    }
    double below = 0.0;
    std::vector<Range> picked;
    for (const auto& k : kids) {
      auto [score, ranges] = select(k);
      below += score;
      picked.insert(picked.end(), ranges.begin(), ranges.end());
    }
    if (kids.empty() || own >= below) return {own, {c}};
    return {below, picked};
  };
  std::vector<Range> outer;
  const Range whole{0, n - 1};
  // The whole ordering only counts as a cluster when nothing else was found.
  std::vector<Range> roots = children(whole);
  if (roots.empty() && std::find(all.begin(), all.end(), whole) != all.end()) roots = {whole};
  for (const auto& r : roots) {
    const auto picked = select(r).second;
    outer.insert(outer.end(), picked.begin(), picked.end());
  }
  std::sort(outer.begin(), outer.end());

  out.labels.assign(n, kNoise);
  for (std::size_t id = 0; id < outer.size(); ++id) {
    GazePoint2D sum{};
    std::size_t count = 0;
    for (std::size_t pos = outer[id].first; pos <= outer[id].second; ++pos) {
      const std::size_t p = out.optics.ordering[pos];
      if (out.labels[p] != kNoise) continue;
      out.labels[p] = static_cast<int>(id);
      sum.x += points[p].x;
      sum.y += points[p].y;
      ++count;
    }
    out.sizes.push_back(count);
    out.centroids.push_back({sum.x / static_cast<double>(count), sum.y / static_cast<double>(count)});
  }
  return out;
}

int select_device_cluster(const ClusterAssignment& assignment) {
  if (assignment.cluster_count() == 0)
    throw Error(ErrorCode::NoDeviceCluster, "no cluster found; every gaze point is noise");
  int best = 0;
  auto norm2 = [&](int id) {
    const auto& c = assignment.centroids[static_cast<std::size_t>(id)];
    return c.x * c.x + c.y * c.y;
  };
  for (int id = 1; id < static_cast<int>(assignment.cluster_count()); ++id) {
    const double a = norm2(id);
    const double b = norm2(best);
    if (a < b || (a == b && assignment.sizes[static_cast<std::size_t>(id)] >
                                assignment.sizes[static_cast<std::size_t>(best)]))
      best = id;
  }
  return best;
}

std::vector<std::optional<Label>> assign_labels(const ClusterAssignment& assignment,
                                                int device_cluster, bool drop_noise) {
  if (device_cluster < 0 || device_cluster >= static_cast<int>(assignment.cluster_count()))
    throw Error(ErrorCode::NoDeviceCluster, "device cluster id out of range");
  std::vector<std::optional<Label>> labels;
  labels.reserve(assignment.labels.size());
  for (int id : assignment.labels) {
    if (id == device_cluster) labels.emplace_back(Label::EyeContact);
    else if (id == kNoise && drop_noise) labels.emplace_back(std::nullopt);
    else labels.emplace_back(Label::NoEyeContact);
  }
  return labels;
}

}  // namespace eyecontact
