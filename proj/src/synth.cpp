#include "eyecontact/synth.hpp"

#include "eyecontact/error.hpp"
#include "eyecontact/gaze.hpp"
#include "eyecontact/normalize.hpp"
#include "eyecontact/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace eyecontact {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "synth config \"" + key + "\": " + what);
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) bad(key, what);
}

double num(const std::string& key, const Json& v) {
  if (!v.is_number() || !std::isfinite(v.get<double>())) bad(key, "expected a finite number");
  return v.get<double>();
}

int integer(const std::string& key, const Json& v) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

TargetDistribution target_from(const std::string& key, const Json& v) {
  if (!v.is_object()) bad(key, "expected an object with x, y and sigma");
  TargetDistribution t;
  for (const auto& [k, x] : v.items()) {
    if (k == "x") t.x = num(key + ".x", x);
    else if (k == "y") t.y = num(key + ".y", x);
    else if (k == "sigma") t.sigma = num(key + ".sigma", x);
    else bad(key + "." + k, "unknown key");
  }
  return t;
}

Json target_json(const TargetDistribution& t) {
  Json j = Json::object();
  j["x"] = t.x;
  j["y"] = t.y;
  j["sigma"] = t.sigma;
  return j;
}

using Field = std::function<void(SynthConfig&, const std::string&, const Json&)>;

Field real(double SynthConfig::*f) {
  return [f](SynthConfig& c, const std::string& k, const Json& v) { c.*f = num(k, v); };
}

Field whole(int SynthConfig::*f) {
  return [f](SynthConfig& c, const std::string& k, const Json& v) { c.*f = integer(k, v); };
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"participants", whole(&SynthConfig::participants)},
      {"sessions_per_participant", whole(&SynthConfig::sessions_per_participant)},
      {"frames_per_session", whole(&SynthConfig::frames_per_session)},
      {"frame_interval", real(&SynthConfig::frame_interval)},
      {"device_share", real(&SynthConfig::device_share)},
      {"focus_persistence", real(&SynthConfig::focus_persistence)},
      {"device",
       [](SynthConfig& c, const std::string& k, const Json& v) { c.device = target_from(k, v); }},
      {"environment",
       [](SynthConfig& c, const std::string& k, const Json& v) {
         if (!v.is_array()) bad(k, "expected an array of targets");
         c.environment.clear();
         for (std::size_t i = 0; i < v.size(); ++i)
           c.environment.push_back(target_from(k + "[" + std::to_string(i) + "]", v[i]));
       }},
      {"image_w", whole(&SynthConfig::image_w)},
      {"image_h", whole(&SynthConfig::image_h)},
      {"distance_min", real(&SynthConfig::distance_min)},
      {"distance_max", real(&SynthConfig::distance_max)},
      {"lateral_range", real(&SynthConfig::lateral_range)},
      {"head_deviation_deg", real(&SynthConfig::head_deviation_deg)},
      {"head_range_deg", real(&SynthConfig::head_range_deg)},
      {"roll_range_deg", real(&SynthConfig::roll_range_deg)},
      {"extreme_share", real(&SynthConfig::extreme_share)},
      {"extreme_min_deg", real(&SynthConfig::extreme_min_deg)},
      {"landmark_noise_px", real(&SynthConfig::landmark_noise_px)},
      {"gaze_noise_deg", real(&SynthConfig::gaze_noise_deg)},
      {"extreme_gaze_noise_deg", real(&SynthConfig::extreme_gaze_noise_deg)},
      {"feature_dim", whole(&SynthConfig::feature_dim)},
      {"separation", real(&SynthConfig::separation)},
      {"feature_sigma", real(&SynthConfig::feature_sigma)},
      {"low_confidence_share", real(&SynthConfig::low_confidence_share)},
      {"no_face_share", real(&SynthConfig::no_face_share)},
      {"illumination",
       [](SynthConfig& c, const std::string& k, const Json& v) {
         if (!v.is_array()) bad(k, "expected an array of strings");
         c.illumination.clear();
         for (const auto& s : v) {
           if (!s.is_string()) bad(k, "expected an array of strings");
           c.illumination.push_back(s.get<std::string>());
         }
       }},
      {"seed",
       [](SynthConfig& c, const std::string& k, const Json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           bad(k, "expected a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
  };
  return table;
}

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void validate_synth_config(const SynthConfig& c) {
  require(c.participants >= 1, "participants", "must be >= 1");
  require(c.sessions_per_participant >= 1, "sessions_per_participant", "must be >= 1");
  require(c.frames_per_session >= 1, "frames_per_session", "must be >= 1");
  require(c.frame_interval > 0, "frame_interval", "must be positive");
  require(unit(c.device_share), "device_share", "must lie in [0, 1]");
  require(unit(c.focus_persistence), "focus_persistence", "must lie in [0, 1]");
  require(c.device.sigma >= 0, "device.sigma", "must be >= 0");
  require(!c.environment.empty(), "environment", "needs at least one target");
  const double device_norm = std::hypot(c.device.x, c.device.y);
  for (std::size_t i = 0; i < c.environment.size(); ++i) {
    const auto& e = c.environment[i];
    const std::string key = "environment[" + std::to_string(i) + "]";
    require(e.sigma >= 0, key + ".sigma", "must be >= 0");
    require(std::hypot(e.x, e.y) > 0.0, key, "target lies at the camera origin");
    require(std::hypot(e.x, e.y) > device_norm, key,
            "target is not farther from the camera than the device target");
    require(std::hypot(e.x - c.device.x, e.y - c.device.y) > 3.0 * (e.sigma + c.device.sigma), key,
            "target overlaps the device target (centres closer than 3 combined sigmas)");
  }
  require(c.image_w >= 1, "image_w", "must be >= 1");
  require(c.image_h >= 1, "image_h", "must be >= 1");
  require(c.distance_min > 0, "distance_min", "must be positive");
  require(c.distance_max >= c.distance_min, "distance_max", "must be >= distance_min");
  require(c.lateral_range >= 0 && c.lateral_range < c.distance_min / 2, "lateral_range",
          "must lie in [0, distance_min / 2)");
  require(c.head_deviation_deg >= 0, "head_deviation_deg", "must be >= 0");
  require(c.head_range_deg > 0 && c.head_range_deg <= 75, "head_range_deg", "must lie in (0, 75]");
  require(c.roll_range_deg >= 0 && c.roll_range_deg <= 45, "roll_range_deg", "must lie in [0, 45]");
  require(unit(c.extreme_share), "extreme_share", "must lie in [0, 1]");
  require(c.extreme_min_deg > 0 && c.extreme_min_deg <= c.head_range_deg, "extreme_min_deg",
          "must lie in (0, head_range_deg]");
  require(c.landmark_noise_px >= 0, "landmark_noise_px", "must be >= 0");
  require(c.gaze_noise_deg >= 0, "gaze_noise_deg", "must be >= 0");
  require(c.extreme_gaze_noise_deg >= 0, "extreme_gaze_noise_deg", "must be >= 0");
  require(c.feature_dim >= 1, "feature_dim", "must be >= 1");
  require(c.separation >= 0, "separation", "must be >= 0");
  require(c.feature_sigma > 0, "feature_sigma", "must be > 0");
  require(unit(c.low_confidence_share), "low_confidence_share", "must lie in [0, 1]");
  require(unit(c.no_face_share), "no_face_share", "must lie in [0, 1]");
}

SynthConfig synth_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "synth config must be a JSON object");
  SynthConfig c;
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) bad(key, "unknown key");
    it->second(c, key, value);
  }
  validate_synth_config(c);
  return c;
}

Json synth_config_to_json(const SynthConfig& c) {
  Json j = Json::object();
  j["participants"] = c.participants;
  j["sessions_per_participant"] = c.sessions_per_participant;
  j["frames_per_session"] = c.frames_per_session;
  j["frame_interval"] = c.frame_interval;
  j["device_share"] = c.device_share;
  j["focus_persistence"] = c.focus_persistence;
  j["device"] = target_json(c.device);
  j["environment"] = Json::array();
  for (const auto& e : c.environment) j["environment"].push_back(target_json(e));
  j["image_w"] = c.image_w;
  j["image_h"] = c.image_h;
  j["distance_min"] = c.distance_min;
  j["distance_max"] = c.distance_max;
  j["lateral_range"] = c.lateral_range;
  j["head_deviation_deg"] = c.head_deviation_deg;
  j["head_range_deg"] = c.head_range_deg;
  j["roll_range_deg"] = c.roll_range_deg;
  j["extreme_share"] = c.extreme_share;
  j["extreme_min_deg"] = c.extreme_min_deg;
  j["landmark_noise_px"] = c.landmark_noise_px;
  j["gaze_noise_deg"] = c.gaze_noise_deg;
  j["extreme_gaze_noise_deg"] = c.extreme_gaze_noise_deg;
  j["feature_dim"] = c.feature_dim;
  j["separation"] = c.separation;
  j["feature_sigma"] = c.feature_sigma;
  j["low_confidence_share"] = c.low_confidence_share;
  j["no_face_share"] = c.no_face_share;
  j["illumination"] = c.illumination;
  j["seed"] = c.seed;
  return j;
}

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gauss(Rng& rng, double sigma) {
  if (sigma == 0.0) {
    rng.discard(1);
    return 0.0;
  }
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

bool chance(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

// Rotation into a roll-free virtual camera looking at `c`.
Eigen::Matrix3d look_at(const Eigen::Vector3d& c) {
  const Eigen::Vector3d z = c.normalized();
  const Eigen::Vector3d y = z.cross(Eigen::Vector3d::UnitX()).normalized();
  const Eigen::Vector3d x = y.cross(z);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

// Head rotation whose facing direction is `facing` (camera coords), rolled by `roll`.
Eigen::Matrix3d head_rotation(const Eigen::Vector3d& facing, const Eigen::Vector3d& x_hint,
                              double roll) {
  const Eigen::Vector3d z = -facing.normalized();
  Eigen::Vector3d x = (x_hint - x_hint.dot(z) * z).normalized();
  x = Eigen::AngleAxisd(roll, z) * x;
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

GazeAngles clamp_angles(GazeAngles g) {
  g.pitch = std::clamp(g.pitch, -kPi / 2, kPi / 2);
  g.yaw = std::remainder(g.yaw, 2 * kPi);
  return g;
}

std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

struct SessionPlan {
  int participant;
  int session;
};

void generate_session(const SynthConfig& cfg, const FaceModel3D& model, const SessionPlan& plan,
                      const Eigen::VectorXd& class_axis, Dataset& records,
                      std::vector<TruthRow>& truth) {
  Rng rng = stream(cfg.seed, static_cast<std::uint64_t>(plan.participant) + 1,
                   static_cast<std::uint64_t>(plan.session) + 1);
  const std::string participant = "p" + two_digits(plan.participant + 1);
  const std::string session = participant + "-s" + std::to_string(plan.session + 1);
  const CameraIntrinsics k = default_intrinsics(cfg.image_w, cfg.image_h);
  const Eigen::Vector3d eye_mid = 0.5 * (model.eye_a_midpoint() + model.eye_b_midpoint());
  std::optional<std::string> illumination;
  if (!cfg.illumination.empty())
    illumination = cfg.illumination[static_cast<std::size_t>(plan.participant + plan.session) %
                                    cfg.illumination.size()];

  // The head sits at a per-session place and drifts slowly around it.
  const double distance = uniform(rng, cfg.distance_min, cfg.distance_max);
  const double base_x = uniform(rng, -cfg.lateral_range, cfg.lateral_range);
  const double base_y = uniform(rng, -cfg.lateral_range, cfg.lateral_range);
  const double drift_phase = uniform(rng, 0.0, 2 * kPi);
  const double drift = std::min(10.0, cfg.lateral_range * 0.2);

  bool device = chance(rng, cfg.device_share);
  const double range = deg2rad(cfg.head_range_deg);

  for (int f = 0; f < cfg.frames_per_session; ++f) {
    if (f > 0 && !chance(rng, cfg.focus_persistence)) device = chance(rng, cfg.device_share);
    const double t = f * cfg.frame_interval;

    const TargetDistribution& dist =
        device ? cfg.device
               : cfg.environment[std::uniform_int_distribution<std::size_t>(
                     0, cfg.environment.size() - 1)(rng)];
    const Eigen::Vector3d target(dist.x + gauss(rng, dist.sigma), dist.y + gauss(rng, dist.sigma),
                                 0.0);

    const double phase = drift_phase + 0.05 * t;
    Eigen::Vector3d origin(base_x + drift * std::cos(phase), base_y + drift * std::sin(phase), 0.0);
    origin.z() = std::sqrt(distance * distance - origin.head<2>().squaredNorm());

    const Eigen::Matrix3d frame = look_at(origin);
    const Eigen::Vector3d to_target = (target - origin).normalized();
    const GazeAngles target_n = vector_to_angles(frame * to_target);

    const bool extreme = !device && chance(rng, cfg.extreme_share);
    GazeAngles head_n;
    if (extreme) {
      const double lo = deg2rad(cfg.extreme_min_deg);
      const double sign = target_n.yaw < 0 ? -1.0 : 1.0;
      head_n.yaw = sign * uniform(rng, lo, range);
      head_n.pitch = std::clamp(target_n.pitch + gauss(rng, deg2rad(cfg.head_deviation_deg)),
                                -range, range);
    } else {
      const double dev = deg2rad(cfg.head_deviation_deg);
      head_n.pitch = std::clamp(target_n.pitch + gauss(rng, dev), -range, range);
      head_n.yaw = std::clamp(target_n.yaw + gauss(rng, dev), -range, range);
    }
    const double roll = deg2rad(uniform(rng, -cfg.roll_range_deg, cfg.roll_range_deg));
    const Eigen::Vector3d facing = frame.transpose() * angles_to_vector(head_n);

    HeadPose pose;
    pose.rotation = head_rotation(facing, frame.row(0).transpose(), roll);
    pose.translation = origin - pose.rotation * eye_mid;

    FrameRecord r;
    r.session_id = session;
    r.participant_id = participant;
    r.t = t;
    r.image_w = cfg.image_w;
    r.image_h = cfg.image_h;
    r.ground_truth = device ? Label::EyeContact : Label::NoEyeContact;
    r.illumination = illumination;

    // Every frame consumes the same draws so that shares do not shift the stream.
    const bool no_face = chance(rng, cfg.no_face_share);
    const bool low_conf = chance(rng, cfg.low_confidence_share);
    const double confidence = low_conf ? uniform(rng, 0.5, 0.9) : uniform(rng, 0.9, 1.0);

    Landmarks lm{};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
      const Eigen::Vector2d p = k.project(pose.apply(model[i]));
      lm[2 * i] = p.x() + gauss(rng, cfg.landmark_noise_px);
      lm[2 * i + 1] = p.y() + gauss(rng, cfg.landmark_noise_px);
    }

    const NormalizationResult norm = normalization_transform(head_frame(pose, model), k);
    GazeAngles gaze = rotate_to_normalized(norm.rot, to_target);
    const double gaze_sigma = deg2rad(extreme ? cfg.extreme_gaze_noise_deg : cfg.gaze_noise_deg);
    gaze.pitch += gauss(rng, gaze_sigma);
    gaze.yaw += gauss(rng, gaze_sigma);

    std::vector<double> features(static_cast<std::size_t>(cfg.feature_dim));
    const double half = (device ? 0.5 : -0.5) * cfg.separation;
    for (int d = 0; d < cfg.feature_dim; ++d)
      features[static_cast<std::size_t>(d)] =
          cfg.feature_sigma * (half * class_axis(d) + gauss(rng, 1.0));

    if (!no_face) {
      r.face_detected = true;
      r.face_confidence = confidence;
      r.landmarks = lm;
      r.gaze_estimate = clamp_angles(gaze);
      r.features = std::move(features);
    }
    records.push_back(std::move(r));

    TruthRow row;
    row.session_id = session;
    row.t = t;
    row.focus = device ? Label::EyeContact : Label::NoEyeContact;
    row.target_x = target.x();
    row.target_y = target.y();
    row.head_pitch_n = norm.headpose_n.pitch;
    row.head_yaw_n = norm.headpose_n.yaw;
    row.extreme = extreme;
    const Eigen::Vector3d rv = rotation_to_vector(pose.rotation);
    row.rvec = {rv.x(), rv.y(), rv.z()};
    row.translation = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
    truth.push_back(row);
  }
}

}  // namespace

SynthOutput generate(const SynthConfig& config, const FaceModel3D& model) {
  validate_synth_config(config);
  Rng axis_rng = stream(config.seed, 0, 0);
  Eigen::VectorXd axis(config.feature_dim);
  do {
    for (int d = 0; d < config.feature_dim; ++d) axis(d) = gauss(axis_rng, 1.0);
  } while (axis.norm() == 0.0);
  axis.normalize();

  std::vector<SessionPlan> plans;
  for (int p = 0; p < config.participants; ++p)
    for (int s = 0; s < config.sessions_per_participant; ++s) plans.push_back({p, s});

  std::vector<Dataset> records(plans.size());
  std::vector<std::vector<TruthRow>> truth(plans.size());
  parallel_for(plans.size(), static_cast<int>(std::thread::hardware_concurrency()),
               [&](std::size_t i) {
                 generate_session(config, model, plans[i], axis, records[i], truth[i]);
               });

  SynthOutput out;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    out.dataset.insert(out.dataset.end(), records[i].begin(), records[i].end());
    out.truth.insert(out.truth.end(), truth[i].begin(), truth[i].end());
  }
  return out;
}

Json truth_to_json(const TruthRow& row) {
  Json j = Json::object();
  j["session_id"] = row.session_id;
  j["t"] = row.t;
  j["focus"] = row.focus == Label::EyeContact ? "device" : "environment";
  j["target"] = {row.target_x, row.target_y};
  j["head_pitch_n"] = row.head_pitch_n;
  j["head_yaw_n"] = row.head_yaw_n;
  j["extreme"] = row.extreme;
  j["rvec"] = row.rvec;
  j["translation"] = row.translation;
  return j;
}

std::string truth_to_string(const std::vector<TruthRow>& truth) {
  std::ostringstream out;
  for (const auto& row : truth) out << truth_to_json(row).dump() << '\n';
  return out.str();
}

PoseScene generate_pose_scene(const FaceModel3D& model, int n, double noise_px, std::uint64_t seed,
                              double max_angle_deg, double z_min, double z_max) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "pose scene needs at least one pose");
  if (!(noise_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
  if (!(z_min > 0.0) || z_max < z_min)
    throw Error(ErrorCode::InvalidArgument, "depth range must be positive and ordered");
  PoseScene scene{model, {}, {}, default_intrinsics(1280, 960)};
  Rng rng = stream(seed, 0x5ce7e, 0);
  const double a = deg2rad(max_angle_deg);
  for (int i = 0; i < n; ++i) {
    HeadPose pose;
    const double pitch = uniform(rng, -a, a);
    const double yaw = uniform(rng, -a, a);
    const double roll = uniform(rng, -a, a);
    pose.rotation = euler_to_rotation(pitch, yaw, roll);
    const double z = uniform(rng, z_min, z_max);
    pose.translation = {uniform(rng, -0.15, 0.15) * z, uniform(rng, -0.15, 0.15) * z, z};
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(model.size());
    for (const auto& p : model.points()) {
      Eigen::Vector2d q = scene.intrinsics.project(pose.apply(p));
      q.x() += gauss(rng, noise_px);
      q.y() += gauss(rng, noise_px);
      pts.push_back(q);
    }
    scene.poses.push_back(pose);
    scene.landmarks.push_back(std::move(pts));
  }
  return scene;
}

FaceModel3D random_face_model(std::uint64_t seed) {
  Rng rng = stream(seed, 0xface, 0);
  const double scale = uniform(rng, 0.85, 1.15);
  const Eigen::Vector3d shift(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, -20, 20));
  std::vector<Eigen::Vector3d> pts;
  for (const auto& p : FaceModel3D::canonical().points()) {
    pts.push_back(scale * p + shift +
                  Eigen::Vector3d(gauss(rng, 3.0), gauss(rng, 3.0), gauss(rng, 3.0)));
  }
  return FaceModel3D(std::move(pts));
}

}  // namespace eyecontact
