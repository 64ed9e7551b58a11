#pragma once

#include "eyecontact/classify.hpp"
#include "eyecontact/headpose.hpp"
#include "eyecontact/labeling.hpp"
#include "eyecontact/normalize.hpp"
#include "eyecontact/records.hpp"

#include <string>

namespace eyecontact {

enum class GazePlane { Camera, Normalized };

/// Every tunable of the pipeline. Defaults follow the published method where
/// it gives a value (40 deg thresholds, 0.9 confidence, 95% variance, 960 px,
/// 300 mm, 448 px).
struct PipelineConfig {
  double threshold_pitch_deg = 40.0;
  double threshold_yaw_deg = 40.0;
  double confidence_min = 0.9;

  int optics_min_pts = 0;  // 0: max(5, 1% of the samples)
  double optics_max_eps = std::numeric_limits<double>::infinity();
  double optics_xi = 0.05;
  bool drop_noise = false;
  GazePlane gaze_plane = GazePlane::Camera;

  double pca_retain = 0.95;
  SvmOptions svm;

  NormParams norm;
  bool kalman_enabled = true;
  KalmanConfig kalman;
  LmOptions lm;

  double glance_max = 1.5;
  double max_frame_span = 1.0;
  double max_gap = 30.0;

  std::string face_model;  // empty: the built-in generic model
};

/// Keys are the flat names documented in the README; unknown keys, wrong
/// types and out-of-range values are rejected.
PipelineConfig config_from_json(const Json& j);
Json config_to_json(const PipelineConfig& c);

/// Applies the keys present in `overrides` on top of `base`.
PipelineConfig merge_config(const PipelineConfig& base, const Json& overrides);

PipelineConfig load_config(const std::string& path);

void validate_config(const PipelineConfig& c);

}  // namespace eyecontact
