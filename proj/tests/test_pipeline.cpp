#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eyecontact/config.hpp"
#include "eyecontact/error.hpp"
#include "eyecontact/pipeline.hpp"
#include "eyecontact/synth.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace eyecontact;

namespace {

SynthOutput small_synth(std::uint64_t seed = 3) {
  SynthConfig c;
  c.participants = 3;
  c.frames_per_session = 100;
  c.feature_dim = 16;
  c.seed = seed;
  return generate(c, FaceModel3D::canonical());
}

const Dataset& posed_small() {
  static const Dataset d =
      pose_stage(small_synth().dataset, PipelineConfig{}, FaceModel3D::canonical(), 2).dataset;
  return d;
}

}  // namespace

TEST_CASE("config JSON roundtrip, merge and validation") {
  const PipelineConfig d;
  const Json j = config_to_json(d);
  CHECK(config_to_json(config_from_json(j)) == j);
  CHECK(j.at("optics_max_eps").is_null());
  CHECK(j.at("threshold_pitch_deg") == 40.0);
  CHECK(j.at("svm_c") == 1.0);
  CHECK(j.at("confidence_min") == 0.9);
  CHECK(j.at("pca_retain") == 0.95);

  const PipelineConfig m = merge_config(d, Json{{"svm_c", 0.5}, {"gaze_plane", "normalized"}});
  CHECK(m.svm.c == 0.5);
  CHECK(m.gaze_plane == GazePlane::Normalized);
  CHECK(m.threshold_yaw_deg == 40.0);

  CHECK_THROWS_AS(merge_config(d, Json{{"no_such_key", 1}}), Error);
  CHECK_THROWS_AS(merge_config(d, Json{{"svm_c", -1.0}}), Error);
  CHECK_THROWS_AS(merge_config(d, Json{{"svm_c", "big"}}), Error);
  CHECK_THROWS_AS(merge_config(d, Json{{"pca_retain", 0.0}}), Error);
  CHECK_THROWS_AS(merge_config(d, Json{{"gaze_plane", "sideways"}}), Error);
  CHECK_THROWS_AS(merge_config(d, Json{{"svm_weighting", "random"}}), Error);

  const auto dir = testing::temp_dir("config");
  write_text_file((dir / "c.json").string(), R"({"threshold_yaw_deg": 30, "drop_noise": true})");
  const PipelineConfig loaded = load_config((dir / "c.json").string());
  CHECK(loaded.threshold_yaw_deg == 30.0);
  CHECK(loaded.drop_noise);
  write_text_file((dir / "bad.json").string(), "{");
  CHECK_THROWS_AS(load_config((dir / "bad.json").string()), Error);
}

TEST_CASE("pose stage recovers the synthetic head poses") {
  const SynthOutput s = small_synth();
  PipelineConfig cfg;
  cfg.kalman_enabled = false;
  const PoseStageResult r = pose_stage(s.dataset, cfg, FaceModel3D::canonical(), 3);
  CHECK(r.failures.empty());
  REQUIRE(r.dataset.size() == s.dataset.size());
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    const FrameRecord& f = r.dataset[i];
    if (!f.face_detected) {
      CHECK_FALSE(f.pose);
      CHECK_FALSE(f.pose_error);
      continue;
    }
    REQUIRE(f.pose);
    const Eigen::Matrix3d est = vector_to_rotation(Eigen::Vector3d(f.pose->rvec.data()));
    const Eigen::Matrix3d truth = vector_to_rotation(Eigen::Vector3d(s.truth[i].rvec.data()));
    CHECK(rad2deg(rotation_angle_between(est, truth)) < 0.5);
    CHECK((Eigen::Vector3d(f.pose->translation.data()) -
           Eigen::Vector3d(s.truth[i].translation.data()))
              .norm() < 1.0);
    CHECK(std::abs(f.pose->headpose_n.pitch - s.truth[i].head_pitch_n) < deg2rad(1.0));
    CHECK(std::abs(f.pose->headpose_n.yaw - s.truth[i].head_yaw_n) < deg2rad(1.0));
  }
}

TEST_CASE("pose stage is deterministic across worker counts") {
  const SynthOutput s = small_synth(4);
  const PipelineConfig cfg;
  const auto a = pose_stage(s.dataset, cfg, FaceModel3D::canonical(), 1);
  const auto b = pose_stage(s.dataset, cfg, FaceModel3D::canonical(), 4);
  CHECK(dataset_to_string(a.dataset) == dataset_to_string(b.dataset));
  CHECK_FALSE(needs_pose(a.dataset));
  CHECK(needs_pose(s.dataset));
}

TEST_CASE("a corrupt frame gets a pose error and the rest still pose") {
  Dataset d = small_synth().dataset;
  std::size_t bad = 0;
  while (!d[bad].face_detected) ++bad;
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    (*d[bad].landmarks)[2 * k] = 320.0;
    (*d[bad].landmarks)[2 * k + 1] = 240.0;
  }
  const PoseStageResult r = pose_stage(d, PipelineConfig{}, FaceModel3D::canonical());
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].index == bad);
  CHECK(r.failures[0].session_id == d[bad].session_id);
  CHECK(r.dataset[bad].pose_error);
  CHECK_FALSE(r.dataset[bad].pose);
  CHECK(r.dataset[bad + 1].pose);
  CHECK_FALSE(needs_pose(r.dataset));
}

TEST_CASE("gaze points separate device from environment frames") {
  const SynthOutput s = small_synth();
  PipelineConfig cfg;
  const Dataset& posed = posed_small();
  std::size_t device = 0, device_near = 0, env = 0, env_far = 0;
  for (std::size_t i = 0; i < posed.size(); ++i) {
    if (!posed[i].pose) continue;
    const GazeHit h = gaze_point(posed[i], cfg);
    if (!h.point) continue;
    if (s.truth[i].focus == Label::EyeContact) {
      ++device;
      // 2 degrees of gaze noise at about 400 mm is roughly 15 mm on the plane.
      if (std::hypot(h.point->x - s.truth[i].target_x, h.point->y - s.truth[i].target_y) < 60.0)
        ++device_near;
    } else {
      ++env;
      if (std::hypot(h.point->x, h.point->y - 50.0) > 120.0) ++env_far;
    }
  }
  CHECK(device_near >= device * 97 / 100);
  CHECK(env_far >= env * 97 / 100);

  FrameRecord no_pose = s.dataset[0];
  no_pose.pose.reset();
  CHECK_THROWS_AS(gaze_point(no_pose, cfg), Error);
}

TEST_CASE("train in both label modes, predict and score") {
  const Dataset& posed = posed_small();
  const FaceModel3D& model = FaceModel3D::canonical();
  TrainSummary summary;
  const ModelArtifact m = train_model(posed, PipelineConfig{}, LabelSource::Cluster, model, &summary);
  CHECK(summary.clusters >= 2);
  REQUIRE(summary.device_centroid);
  CHECK(std::hypot(summary.device_centroid->x, summary.device_centroid->y - 50.0) < 20.0);
  CHECK(summary.positives > 0);
  CHECK(summary.negatives > 0);
  CHECK(summary.head_pose_proxy > 0);
  CHECK(m.config_snapshot.at("label_source") == "cluster");
  CHECK(to_json(summary).at("label_source") == "cluster");

  const auto preds = predict(posed, m);
  REQUIRE(preds.size() == posed.size());
  const EvalResult r = evaluate_holdout(posed, preds);
  CHECK(r.mcc > 0.9);

  TrainSummary gts;
  const ModelArtifact g = train_model(posed, PipelineConfig{}, LabelSource::GroundTruth, model, &gts);
  CHECK(g.config_snapshot.at("label_source") == "ground-truth");
  CHECK(evaluate_holdout(posed, predict(posed, g)).mcc > 0.9);

  // Training in cluster mode poses unposed data itself.
  const ModelArtifact raw = train_model(small_synth().dataset, PipelineConfig{},
                                        LabelSource::Cluster, model);
  CHECK(predictions_to_string(predict(posed, raw)) == predictions_to_string(preds));
}

TEST_CASE("training failures") {
  const FaceModel3D& model = FaceModel3D::canonical();
  Dataset one_class = posed_small();
  for (auto& r : one_class) r.ground_truth = Label::EyeContact;
  try {
    train_model(one_class, PipelineConfig{}, LabelSource::GroundTruth, model);
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }

  Dataset unlabeled = posed_small();
  for (auto& r : unlabeled) r.ground_truth.reset();
  CHECK_THROWS_AS(train_model(unlabeled, PipelineConfig{}, LabelSource::GroundTruth, model), Error);

  CHECK_THROWS_AS(train_model(Dataset{}, PipelineConfig{}, LabelSource::Cluster, model), Error);
}

TEST_CASE("frames without a face or features predict no contact") {
  ModelArtifact m;
  m.pca.mean = Eigen::VectorXd::Zero(2);
  m.pca.components = Eigen::MatrixXd::Identity(2, 2);
  m.pca.explained_variance = Eigen::VectorXd::Ones(2);
  m.svm.weights = Eigen::Vector2d(1, 0);
  FrameRecord r;
  r.session_id = "s";
  r.participant_id = "p";
  r.face_detected = true;
  CHECK(predict_frame(r, m).label == Label::NoEyeContact);
  CHECK_FALSE(predict_frame(r, m).score);
  r.features = std::vector<double>{2, 5};
  const Prediction p = predict_frame(r, m);
  CHECK(p.label == Label::EyeContact);
  CHECK(*p.score == doctest::Approx(2.0));
  CHECK(predict(Dataset{}, m).empty());
}

TEST_CASE("prediction JSONL roundtrip and strict parsing") {
  const std::vector<Prediction> ps{{"s", "p", 0.5, true, Label::EyeContact, 1.25},
                                   {"s", "p", 0.6, false, Label::NoEyeContact, std::nullopt}};
  std::istringstream in(predictions_to_string(ps));
  CHECK(parse_predictions(in) == ps);
  std::istringstream extra(R"({"session_id":"s","t":0,"label":"contact","bogus":1})");
  CHECK_THROWS_AS(parse_predictions(extra), Error);
  std::istringstream missing(R"({"session_id":"s","label":"contact"})");
  CHECK_THROWS_AS(parse_predictions(missing), Error);
}

TEST_CASE("holdout joins on session and time") {
  Dataset test = posed_small();
  auto preds = predict(test, train_model(test, PipelineConfig{}, LabelSource::GroundTruth,
                                         FaceModel3D::canonical()));
  std::reverse(preds.begin(), preds.end());
  const EvalResult shuffled = evaluate_holdout(test, preds);
  std::reverse(preds.begin(), preds.end());
  CHECK(shuffled.confusion == evaluate_holdout(test, preds).confusion);

  auto dup = preds;
  dup.push_back(preds.front());
  CHECK_THROWS_AS(evaluate_holdout(test, dup), Error);
  auto gap = preds;
  gap.erase(gap.begin() + 5);
  CHECK_THROWS_AS(evaluate_holdout(test, gap), Error);
}

TEST_CASE("attention analysis over predictions") {
  std::vector<Prediction> ps;
  const Label seq[] = {Label::EyeContact, Label::EyeContact, Label::NoEyeContact};
  for (int i = 0; i < 3; ++i) ps.push_back({"a", "p", double(i), true, seq[i], 0.0});
  ps.push_back({"b", "q", 0.0, true, Label::NoEyeContact, 0.0});
  const AttentionAnalysis a = analyze_attention(ps, PipelineConfig{});
  REQUIRE(a.timelines.size() == 2);
  CHECK(a.timelines[0].blocks == std::vector<Block>{{Focus::Device, 0, 2}, {Focus::Environment, 2, 3}});
  CHECK(a.aggregate.device.total == doctest::Approx(2.0));
  CHECK(a.aggregate.environment.total == doctest::Approx(2.0));
  CHECK(a.aggregate.environment.count == 2);
  CHECK(a.aggregate.primary_focus == PrimaryFocus::Tie);
  const Json j = to_json(a);
  CHECK(j.at("attention_reports").size() == 2);
  CHECK(j.at("aggregate").at("glances") == 0);
}
