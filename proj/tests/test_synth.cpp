#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eyecontact/error.hpp"
#include "eyecontact/pipeline.hpp"
#include "eyecontact/synth.hpp"

#include <cmath>
#include <set>

using namespace eyecontact;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.participants = 3;
  c.frames_per_session = 60;
  c.feature_dim = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("same seed, same bytes; different seed, different data") {
  const FaceModel3D& model = FaceModel3D::canonical();
  const SynthOutput a = generate(small(), model);
  const SynthOutput b = generate(small(), model);
  CHECK(dataset_to_string(a.dataset) == dataset_to_string(b.dataset));
  CHECK(truth_to_string(a.truth) == truth_to_string(b.truth));

  SynthConfig other = small();
  other.seed = 6;
  CHECK(dataset_to_string(generate(other, model).dataset) != dataset_to_string(a.dataset));
}

TEST_CASE("generated records are valid and the truth table matches") {
  const SynthConfig cfg = small();
  const SynthOutput out = generate(cfg, FaceModel3D::canonical());
  const std::size_t n = static_cast<std::size_t>(cfg.participants * cfg.frames_per_session);
  REQUIRE(out.dataset.size() == n);
  REQUIRE(out.truth.size() == n);
  CHECK_NOTHROW(validate_dataset(out.dataset));

  std::set<std::string> participants;
  std::size_t faces = 0, positives = 0, extreme = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord& r = out.dataset[i];
    const TruthRow& t = out.truth[i];
    participants.insert(r.participant_id);
    CHECK(t.session_id == r.session_id);
    CHECK(t.t == r.t);
    REQUIRE(r.ground_truth);
    CHECK(*r.ground_truth == t.focus);
    positives += t.focus == Label::EyeContact;
    extreme += t.extreme;
    if (t.extreme) CHECK(t.focus == Label::NoEyeContact);
    if (r.face_detected) {
      ++faces;
      REQUIRE(r.landmarks);
      REQUIRE(r.features);
      CHECK(r.features->size() == 16);
      CHECK(r.gaze_estimate);
      CHECK(r.illumination);
    }
  }
  CHECK(participants.size() == 3);
  CHECK(faces > n * 9 / 10);
  CHECK(positives > n / 4);
  CHECK(positives < 3 * n / 4);
  CHECK(extreme > 0);
}

TEST_CASE("synthetic landmarks are the projection of the true pose") {
  SynthConfig cfg = small();
  cfg.participants = 1;
  const FaceModel3D& model = FaceModel3D::canonical();
  const SynthOutput out = generate(cfg, model);
  const auto k = default_intrinsics(cfg.image_w, cfg.image_h);
  for (std::size_t i = 0; i < out.dataset.size(); ++i) {
    const FrameRecord& r = out.dataset[i];
    if (!r.landmarks) continue;
    HeadPose pose;
    pose.rotation = vector_to_rotation(Eigen::Vector3d(out.truth[i].rvec.data()));
    pose.translation = Eigen::Vector3d(out.truth[i].translation.data());
    const auto px = project_points(pose, model.points(), k);
    for (std::size_t p = 0; p < kLandmarkCount; ++p) {
      CHECK(std::abs(px[p].x() - (*r.landmarks)[2 * p]) < 1e-6);
      CHECK(std::abs(px[p].y() - (*r.landmarks)[2 * p + 1]) < 1e-6);
    }
  }
}

TEST_CASE("infeasible configs are rejected") {
  const FaceModel3D& model = FaceModel3D::canonical();
  SynthConfig at_origin = small();
  at_origin.environment[0] = {0.0, 0.0, 50.0};
  CHECK_THROWS_AS(generate(at_origin, model), Error);

  SynthConfig overlapping = small();
  overlapping.environment[0] = {20.0, 60.0, 50.0};
  CHECK_THROWS_AS(generate(overlapping, model), Error);

  SynthConfig no_env = small();
  no_env.environment.clear();
  CHECK_THROWS_AS(generate(no_env, model), Error);

  SynthConfig neg_sep = small();
  neg_sep.separation = -1.0;
  CHECK_THROWS_AS(generate(neg_sep, model), Error);

  SynthConfig no_participants = small();
  no_participants.participants = 0;
  CHECK_THROWS_AS(generate(no_participants, model), Error);
}

TEST_CASE("config JSON roundtrip and unknown keys") {
  SynthConfig c = small();
  c.environment.push_back({500, 500, 20});
  const Json j = synth_config_to_json(c);
  CHECK(synth_config_to_json(synth_config_from_json(j)) == j);
  Json bad = j;
  bad["no_such_key"] = 1;
  CHECK_THROWS_AS(synth_config_from_json(bad), Error);
}

TEST_CASE("no_face_share = 1 gives an all-negative prediction") {
  SynthConfig cfg = small();
  cfg.no_face_share = 1.0;
  const SynthOutput out = generate(cfg, FaceModel3D::canonical());
  for (const auto& r : out.dataset) CHECK_FALSE(r.face_detected);

  // Any model: faceless frames never reach it.
  ModelArtifact m;
  m.pca.mean = Eigen::VectorXd::Zero(16);
  m.pca.components = Eigen::MatrixXd::Identity(1, 16);
  m.pca.explained_variance = Eigen::VectorXd::Ones(1);
  m.svm.weights = Eigen::VectorXd::Ones(1);
  m.svm.bias = 100.0;
  for (const auto& p : predict(out.dataset, m)) {
    CHECK(p.label == Label::NoEyeContact);
    CHECK_FALSE(p.score);
  }
  const EvalResult r = evaluate(out.dataset, make_predictor(m));
  CHECK(r.confusion.tp == 0);
  CHECK(r.confusion.fp == 0);
  CHECK(r.confusion.total() == out.dataset.size());
}

TEST_CASE("6 sigma separation without landmark noise gives LOOCV MCC >= 0.95") {
  SynthConfig cfg;
  cfg.seed = 11;
  const FaceModel3D& model = FaceModel3D::canonical();
  const SynthOutput out = generate(cfg, model);
  PipelineConfig pc;
  const Dataset posed = pose_stage(out.dataset, pc, model, 4).dataset;
  const LoocvResult r = loocv_by_participant(posed, make_trainer(pc, LabelSource::Cluster, model), 4);
  CHECK(r.failed_folds == 0);
  CHECK(r.mean_mcc >= 0.95);
}

TEST_CASE("pose scenes") {
  const FaceModel3D& model = FaceModel3D::canonical();
  const PoseScene one = generate_pose_scene(model, 1, 0.0, 3);
  REQUIRE(one.poses.size() == 1);
  REQUIRE(one.landmarks.size() == 1);
  CHECK(one.landmarks[0].size() == kLandmarkCount);

  const PoseScene scene = generate_pose_scene(model, 200, 0.0, 4);
  for (std::size_t i = 0; i < scene.poses.size(); ++i) {
    const HeadPose& p = scene.poses[i];
    CHECK(p.translation.z() >= 200.0);
    CHECK(p.translation.z() <= 800.0);
    const auto px = project_points(p, model.points(), scene.intrinsics);
    for (std::size_t k = 0; k < kLandmarkCount; ++k)
      CHECK((px[k] - scene.landmarks[i][k]).norm() < 1e-9);
  }
  const PoseScene again = generate_pose_scene(model, 200, 0.0, 4);
  CHECK(again.poses[17].translation == scene.poses[17].translation);

  const FaceModel3D r = random_face_model(9);
  CHECK(r.points().size() == kLandmarkCount);
}
