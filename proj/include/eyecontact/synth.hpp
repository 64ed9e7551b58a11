#pragma once

#include "eyecontact/headpose.hpp"
#include "eyecontact/records.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eyecontact {

struct TargetDistribution {
  double x = 0.0;  // mm, camera z=0 plane
  double y = 0.0;
  double sigma = 15.0;
};

struct SynthConfig {
  int participants = 5;
  int sessions_per_participant = 1;
  int frames_per_session = 200;
  double frame_interval = 0.1;   // s
  double device_share = 0.5;     // probability a frame's true focus is the device
  double focus_persistence = 0.9;  // probability the focus carries over to the next frame

  TargetDistribution device{0.0, 50.0, 15.0};
  std::vector<TargetDistribution> environment{
      {-350.0, 250.0, 50.0}, {350.0, 300.0, 50.0}, {0.0, 650.0, 60.0}};

  int image_w = 640;
  int image_h = 480;
  double distance_min = 350.0;  // mm, gaze origin to camera
  double distance_max = 500.0;
  double lateral_range = 60.0;  // mm, uniform offset of the head in x and y
  double head_deviation_deg = 8.0;  // head direction scatter around the target
  double head_range_deg = 60.0;     // bound on normalized head pitch/yaw
  double roll_range_deg = 10.0;
  double extreme_share = 0.1;       // environment frames whose head turns past the threshold
  double extreme_min_deg = 48.0;

  double landmark_noise_px = 0.0;
  double gaze_noise_deg = 2.0;
  double extreme_gaze_noise_deg = 20.0;

  int feature_dim = 64;
  double separation = 6.0;  // distance between class means in units of the per-axis sigma
  double feature_sigma = 0.1;

  double low_confidence_share = 0.05;
  double no_face_share = 0.02;
  std::vector<std::string> illumination{"bright", "dim"};

  std::uint64_t seed = 1;
};

SynthConfig synth_config_from_json(const Json& j);
Json synth_config_to_json(const SynthConfig& c);
void validate_synth_config(const SynthConfig& c);

struct TruthRow {
  std::string session_id;
  double t = 0.0;
  Label focus = Label::NoEyeContact;
  double target_x = 0.0;
  double target_y = 0.0;
  double head_pitch_n = 0.0;  // rad, normalized head pose of the true pose
  double head_yaw_n = 0.0;
  bool extreme = false;
  std::array<double, 3> rvec{};
  std::array<double, 3> translation{};
};

struct SynthOutput {
  Dataset dataset;
  std::vector<TruthRow> truth;  // aligned with dataset
};

/// Deterministic for a given config (including seed); each session draws from
/// its own stream derived from the seed.
SynthOutput generate(const SynthConfig& config, const FaceModel3D& model);

Json truth_to_json(const TruthRow& row);
std::string truth_to_string(const std::vector<TruthRow>& truth);

struct PoseScene {
  FaceModel3D model;
  std::vector<HeadPose> poses;
  std::vector<std::vector<Eigen::Vector2d>> landmarks;
  CameraIntrinsics intrinsics;
};

/// Random poses with |pitch|, |yaw|, |roll| <= max_angle_deg and depth in
/// [z_min, z_max] mm, projected with Gaussian pixel noise.
PoseScene generate_pose_scene(const FaceModel3D& model, int n, double noise_px, std::uint64_t seed,
                              double max_angle_deg = 60.0, double z_min = 200.0,
                              double z_max = 800.0);

/// A random non-degenerate 68-point model, for tests that must not rely on
/// the built-in geometry.
FaceModel3D random_face_model(std::uint64_t seed);

}  // namespace eyecontact
