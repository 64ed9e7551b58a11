#include "eyecontact/config.hpp"

#include "eyecontact/error.hpp"

#include <cmath>
#include <functional>
#include <map>

namespace eyecontact {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "config \"" + key + "\": " + what);
}

double get_number(const std::string& key, const Json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key, "expected a finite number");
  return d;
}

int get_int(const std::string& key, const Json& v) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

bool get_bool(const std::string& key, const Json& v) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const std::string& key, const Json& v) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const Json&)>;

Setter number(double PipelineConfig::*field) {
  return [field](PipelineConfig& c, const std::string& k, const Json& v) { c.*field = get_number(k, v); };
}

template <typename Sub>
Setter nested_number(Sub PipelineConfig::*sub, double Sub::*field) {
  return [sub, field](PipelineConfig& c, const std::string& k, const Json& v) {
    (c.*sub).*field = get_number(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"threshold_pitch_deg", number(&PipelineConfig::threshold_pitch_deg)},
      {"threshold_yaw_deg", number(&PipelineConfig::threshold_yaw_deg)},
      {"confidence_min", number(&PipelineConfig::confidence_min)},
      {"optics_min_pts",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.optics_min_pts = get_int(k, v); }},
      {"optics_max_eps",
       [](PipelineConfig& c, const std::string& k, const Json& v) {
         c.optics_max_eps =
             v.is_null() ? std::numeric_limits<double>::infinity() : get_number(k, v);
       }},
      {"optics_xi", number(&PipelineConfig::optics_xi)},
      {"drop_noise",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.drop_noise = get_bool(k, v); }},
      {"gaze_plane",
       [](PipelineConfig& c, const std::string& k, const Json& v) {
         const std::string s = get_string(k, v);
         if (s == "camera") c.gaze_plane = GazePlane::Camera;
         else if (s == "normalized") c.gaze_plane = GazePlane::Normalized;
         else bad(k, "expected \"camera\" or \"normalized\"");
       }},
      {"pca_retain", number(&PipelineConfig::pca_retain)},
      {"svm_c", nested_number(&PipelineConfig::svm, &SvmOptions::c)},
      {"svm_weighting",
       [](PipelineConfig& c, const std::string& k, const Json& v) {
         const std::string s = get_string(k, v);
         if (s == "balanced") c.svm.weighting = ClassWeighting::Balanced;
         else if (s == "none") c.svm.weighting = ClassWeighting::None;
         else if (s == "custom") c.svm.weighting = ClassWeighting::Custom;
         else bad(k, "expected \"balanced\", \"none\" or \"custom\"");
       }},
      {"svm_weight_pos", nested_number(&PipelineConfig::svm, &SvmOptions::weight_pos)},
      {"svm_weight_neg", nested_number(&PipelineConfig::svm, &SvmOptions::weight_neg)},
      {"svm_max_epochs",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.svm.max_epochs = get_int(k, v); }},
      {"svm_tol", nested_number(&PipelineConfig::svm, &SvmOptions::tol)},
      {"seed",
       [](PipelineConfig& c, const std::string& k, const Json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           bad(k, "expected a non-negative integer");
         c.svm.seed = v.get<unsigned long long>();
       }},
      {"focal_norm", nested_number(&PipelineConfig::norm, &NormParams::focal_norm)},
      {"distance_norm", nested_number(&PipelineConfig::norm, &NormParams::distance_norm)},
      {"norm_width",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.norm.out_width = get_int(k, v); }},
      {"norm_height",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.norm.out_height = get_int(k, v); }},
      {"kalman_enabled",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.kalman_enabled = get_bool(k, v); }},
      {"kalman_process_sigma_rot",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::process_sigma_rot)},
      {"kalman_process_sigma_t",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::process_sigma_t)},
      {"kalman_measurement_sigma_rot",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::measurement_sigma_rot)},
      {"kalman_measurement_sigma_t",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::measurement_sigma_t)},
      {"kalman_prior_sigma_rot_velocity",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::prior_sigma_rot_velocity)},
      {"kalman_prior_sigma_t_velocity",
       nested_number(&PipelineConfig::kalman, &KalmanConfig::prior_sigma_t_velocity)},
      {"kalman_gate_rot_deg", nested_number(&PipelineConfig::kalman, &KalmanConfig::gate_rot_deg)},
      {"kalman_gate_t_mm", nested_number(&PipelineConfig::kalman, &KalmanConfig::gate_t_mm)},
      {"lm_max_iters",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.lm.max_iters = get_int(k, v); }},
      {"lm_tol", nested_number(&PipelineConfig::lm, &LmOptions::tol)},
      {"glance_max", number(&PipelineConfig::glance_max)},
      {"max_frame_span", number(&PipelineConfig::max_frame_span)},
      {"max_gap", number(&PipelineConfig::max_gap)},
      {"face_model",
       [](PipelineConfig& c, const std::string& k, const Json& v) { c.face_model = get_string(k, v); }},
  };
  return table;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) bad(key, what);
}

}  // namespace

void validate_config(const PipelineConfig& c) {
  require(c.threshold_pitch_deg > 0 && c.threshold_pitch_deg <= 90, "threshold_pitch_deg",
          "must lie in (0, 90]");
  require(c.threshold_yaw_deg > 0 && c.threshold_yaw_deg <= 180, "threshold_yaw_deg",
          "must lie in (0, 180]");
  require(c.confidence_min >= 0 && c.confidence_min <= 1, "confidence_min", "must lie in [0, 1]");
  require(c.optics_min_pts >= 0, "optics_min_pts", "must be >= 0 (0 selects the default)");
  require(c.optics_max_eps > 0, "optics_max_eps", "must be positive or null");
  require(c.optics_xi > 0 && c.optics_xi < 1, "optics_xi", "must lie in (0, 1)");
  require(c.pca_retain > 0 && c.pca_retain <= 1, "pca_retain", "must lie in (0, 1]");
  require(c.svm.c > 0, "svm_c", "must be positive");
  require(c.svm.weight_pos > 0, "svm_weight_pos", "must be positive");
  require(c.svm.weight_neg > 0, "svm_weight_neg", "must be positive");
  require(c.svm.max_epochs >= 1, "svm_max_epochs", "must be >= 1");
  require(c.svm.tol > 0, "svm_tol", "must be positive");
  require(c.norm.focal_norm > 0, "focal_norm", "must be positive");
  require(c.norm.distance_norm > 0, "distance_norm", "must be positive");
  require(c.norm.out_width >= 1, "norm_width", "must be >= 1");
  require(c.norm.out_height >= 1, "norm_height", "must be >= 1");
  require(c.kalman.process_sigma_rot >= 0, "kalman_process_sigma_rot", "must be >= 0");
  require(c.kalman.process_sigma_t >= 0, "kalman_process_sigma_t", "must be >= 0");
  require(c.kalman.measurement_sigma_rot > 0, "kalman_measurement_sigma_rot", "must be positive");
  require(c.kalman.measurement_sigma_t > 0, "kalman_measurement_sigma_t", "must be positive");
  require(c.kalman.prior_sigma_rot_velocity > 0, "kalman_prior_sigma_rot_velocity",
          "must be positive");
  require(c.kalman.prior_sigma_t_velocity > 0, "kalman_prior_sigma_t_velocity",
          "must be positive");
  require(c.kalman.gate_rot_deg > 0, "kalman_gate_rot_deg", "must be positive");
  require(c.kalman.gate_t_mm > 0, "kalman_gate_t_mm", "must be positive");
  require(c.lm.max_iters >= 0, "lm_max_iters", "must be >= 0");
  require(c.lm.tol > 0, "lm_tol", "must be positive");
  require(c.glance_max > 0, "glance_max", "must be positive");
  require(c.max_frame_span > 0, "max_frame_span", "must be positive");
  require(c.max_gap > 0, "max_gap", "must be positive");
}

PipelineConfig merge_config(const PipelineConfig& base, const Json& overrides) {
  if (!overrides.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  PipelineConfig c = base;
  for (const auto& [key, value] : overrides.items()) {
    auto it = setters().find(key);
    if (it == setters().end()) bad(key, "unknown key");
    it->second(c, key, value);
  }
  validate_config(c);
  return c;
}

PipelineConfig config_from_json(const Json& j) { return merge_config(PipelineConfig{}, j); }

Json config_to_json(const PipelineConfig& c) {
  Json j = Json::object();
  j["threshold_pitch_deg"] = c.threshold_pitch_deg;
  j["threshold_yaw_deg"] = c.threshold_yaw_deg;
  j["confidence_min"] = c.confidence_min;
  j["optics_min_pts"] = c.optics_min_pts;
  j["optics_max_eps"] = std::isinf(c.optics_max_eps) ? Json(nullptr) : Json(c.optics_max_eps);
  j["optics_xi"] = c.optics_xi;
  j["drop_noise"] = c.drop_noise;
  j["gaze_plane"] = c.gaze_plane == GazePlane::Camera ? "camera" : "normalized";
  j["pca_retain"] = c.pca_retain;
  j["svm_c"] = c.svm.c;
  j["svm_weighting"] = c.svm.weighting == ClassWeighting::Balanced ? "balanced"
                       : c.svm.weighting == ClassWeighting::None   ? "none"
                                                                   : "custom";
  j["svm_weight_pos"] = c.svm.weight_pos;
  j["svm_weight_neg"] = c.svm.weight_neg;
  j["svm_max_epochs"] = c.svm.max_epochs;
  j["svm_tol"] = c.svm.tol;
  j["seed"] = c.svm.seed;
  j["focal_norm"] = c.norm.focal_norm;
  j["distance_norm"] = c.norm.distance_norm;
  j["norm_width"] = c.norm.out_width;
  j["norm_height"] = c.norm.out_height;
  j["kalman_enabled"] = c.kalman_enabled;
  j["kalman_process_sigma_rot"] = c.kalman.process_sigma_rot;
  j["kalman_process_sigma_t"] = c.kalman.process_sigma_t;
  j["kalman_measurement_sigma_rot"] = c.kalman.measurement_sigma_rot;
  j["kalman_measurement_sigma_t"] = c.kalman.measurement_sigma_t;
  j["kalman_prior_sigma_rot_velocity"] = c.kalman.prior_sigma_rot_velocity;
  j["kalman_prior_sigma_t_velocity"] = c.kalman.prior_sigma_t_velocity;
  j["kalman_gate_rot_deg"] = c.kalman.gate_rot_deg;
  j["kalman_gate_t_mm"] = c.kalman.gate_t_mm;
  j["lm_max_iters"] = c.lm.max_iters;
  j["lm_tol"] = c.lm.tol;
  j["glance_max"] = c.glance_max;
  j["max_frame_span"] = c.max_frame_span;
  j["max_gap"] = c.max_gap;
  j["face_model"] = c.face_model;
  return j;
}

PipelineConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace eyecontact
