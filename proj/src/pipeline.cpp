#include "eyecontact/pipeline.hpp"

#include "eyecontact/error.hpp"
#include "eyecontact/labeling.hpp"
#include "eyecontact/normalize.hpp"
#include "eyecontact/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace eyecontact {

FaceModel3D resolve_face_model(const PipelineConfig& config) {
  if (config.face_model.empty()) return FaceModel3D::canonical();
  return FaceModel3D::load(config.face_model);
}

namespace {

std::vector<std::vector<std::size_t>> sessions_of(const Dataset& dataset) {
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(dataset[i].session_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

std::vector<Eigen::Vector2d> image_points(const Landmarks& lm) {
  std::vector<Eigen::Vector2d> pts(kLandmarkCount);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) pts[i] = {lm[2 * i], lm[2 * i + 1]};
  return pts;
}

PoseAnnotation annotate(const HeadPose& pose, const FaceModel3D& model, const CameraIntrinsics& k,
                        const NormParams& norm) {
  const HeadFrame frame = head_frame(pose, model);
  const NormalizationResult n = normalization_transform(frame, k, norm);
  PoseAnnotation a;
  const Eigen::Vector3d r = rotation_to_vector(pose.rotation);
  a.rvec = {r.x(), r.y(), r.z()};
  a.translation = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  a.reprojection_rmse = pose.reprojection_rmse;
  a.headpose_n = n.headpose_n;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.norm_rot[3 * i + j] = n.rot(i, j);
  a.norm_scale = n.scale;
  const Eigen::Vector3d o = gaze_origin(pose, model);
  a.gaze_origin = {o.x(), o.y(), o.z()};
  return a;
}

void pose_session(Dataset& out, const std::vector<std::size_t>& frames, const PipelineConfig& cfg,
                  const FaceModel3D& model, std::vector<PoseFailure>& failures) {
  std::optional<KalmanState> state;
  HeadPose last;
  for (std::size_t i : frames) {
    FrameRecord& r = out[i];
    r.pose.reset();
    r.pose_error.reset();
    if (!r.face_detected || !r.landmarks) continue;
    try {
      const CameraIntrinsics k = default_intrinsics(r.image_w, r.image_h);
      const auto pts = image_points(*r.landmarks);
      HeadPose pose = solve_epnp(model.points(), pts, k);
      pose = refine_lm(pose, model.points(), pts, k, cfg.lm);
      if (!(pose.translation.z() > 0.0))
        throw Error(ErrorCode::Degenerate, "solved head lies behind the camera");
      if (cfg.kalman_enabled) {
        if (state && (r.t - state->t > cfg.max_gap ||
                      rad2deg(rotation_angle_between(pose.rotation, last.rotation)) >
                          cfg.kalman.gate_rot_deg ||
                      (pose.translation - last.translation).norm() > cfg.kalman.gate_t_mm))
          state.reset();
        auto [next, smoothed] = kalman_step(state, pose, r.t, cfg.kalman);
        state = next;
        pose = smoothed;
        last = smoothed;
        pose.reprojection_rmse = reprojection_rmse(pose.rotation, pose.translation, model.points(),
                                                   pts, k);
      }
      r.pose = annotate(pose, model, k, cfg.norm);
    } catch (const std::exception& e) {
      r.pose.reset();
      r.pose_error = e.what();
      failures.push_back({i, r.session_id, r.t, e.what()});
    }
  }
}

}  // namespace

PoseStageResult pose_stage(const Dataset& dataset, const PipelineConfig& config,
                           const FaceModel3D& model, int workers) {
  PoseStageResult result{dataset, {}};
  const auto groups = sessions_of(dataset);
  std::vector<std::vector<PoseFailure>> failures(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t g) {
    pose_session(result.dataset, groups[g], config, model, failures[g]);
  });
  for (auto& f : failures) result.failures.insert(result.failures.end(), f.begin(), f.end());
  std::sort(result.failures.begin(), result.failures.end(),
            [](const PoseFailure& a, const PoseFailure& b) { return a.index < b.index; });
  return result;
}

bool needs_pose(const Dataset& dataset) {
  return std::any_of(dataset.begin(), dataset.end(), [](const FrameRecord& r) {
    return r.face_detected && r.landmarks && !r.pose && !r.pose_error;
  });
}

GazeHit gaze_point(const FrameRecord& record, const PipelineConfig& config) {
  if (!record.pose) throw Error(ErrorCode::InvalidArgument, "frame has no head pose");
  const PoseAnnotation& p = *record.pose;
  const EffectiveGaze eff =
      apply_threshold(record.gaze_estimate, p.headpose_n, deg2rad(config.threshold_pitch_deg),
                      deg2rad(config.threshold_yaw_deg));
  const Eigen::Matrix3d rot = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(
      p.norm_rot.data());
  const Eigen::Vector3d v_n = angles_to_vector(eff.angles);
  const Eigen::Vector3d origin(p.gaze_origin[0], p.gaze_origin[1], p.gaze_origin[2]);

  GazeHit hit;
  hit.source = eff.source;
  if (config.gaze_plane == GazePlane::Camera) hit.point = intersect_plane(origin, rot.transpose() * v_n);
  else hit.point = intersect_plane(rot * origin, v_n);
  return hit;
}

const char* label_source_name(LabelSource s) {
  return s == LabelSource::Cluster ? "cluster" : "ground-truth";
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "cluster") return LabelSource::Cluster;
  if (s == "ground_truth" || s == "ground-truth") return LabelSource::GroundTruth;
  throw Error(ErrorCode::InvalidArgument,
              "label source must be \"cluster\" or \"ground-truth\", got \"" + s + "\"");
}

Json to_json(const TrainSummary& s) {
  Json j = Json::object();
  j["label_source"] = label_source_name(s.source);
  j["frames"] = s.frames;
  j["candidates"] = s.candidates;
  j["skipped_no_pose"] = s.skipped_no_pose;
  j["no_intersection"] = s.no_intersection;
  j["head_pose_proxy"] = s.head_pose_proxy;
  j["clustered"] = s.clustered;
  j["clusters"] = s.clusters;
  j["noise"] = s.noise;
  j["device_cluster"] = s.device_cluster;
  if (s.device_centroid) j["device_centroid"] = {s.device_centroid->x, s.device_centroid->y};
  else j["device_centroid"] = nullptr;
  j["positives"] = s.positives;
  j["negatives"] = s.negatives;
  j["pca_dim"] = s.pca_dim;
  j["svm_epochs"] = s.svm.epochs;
  j["svm_primal"] = s.svm.primal;
  j["svm_dual"] = s.svm.dual;
  return j;
}

namespace {

struct Sample {
  std::size_t index;
  Label label;
};

std::vector<Sample> cluster_labels(const Dataset& data, std::span<const std::size_t> candidates,
                                   const PipelineConfig& cfg, TrainSummary& s) {
  std::vector<Sample> out;
  std::vector<std::size_t> on_plane;
  std::vector<GazePoint2D> points;
  for (std::size_t i : candidates) {
    const FrameRecord& r = data[i];
    if (!r.pose) {
      ++s.skipped_no_pose;
      continue;
    }
    const GazeHit hit = gaze_point(r, cfg);
    if (hit.source == GazeSource::HeadPoseProxy) ++s.head_pose_proxy;
    if (!hit.point) {
      ++s.no_intersection;
      out.push_back({i, Label::NoEyeContact});
      continue;
    }
    on_plane.push_back(i);
    points.push_back(*hit.point);
  }
  s.clustered = points.size();

  OpticsParams params;
  params.min_pts = cfg.optics_min_pts > 0 ? cfg.optics_min_pts : default_min_pts(points.size());
  params.max_eps = cfg.optics_max_eps;
  params.xi = cfg.optics_xi;
  const ClusterAssignment assignment = optics_cluster(points, params);
  s.clusters = assignment.cluster_count();
  s.noise = static_cast<std::size_t>(std::count(assignment.labels.begin(), assignment.labels.end(), kNoise));
  s.device_cluster = select_device_cluster(assignment);
  s.device_centroid = assignment.centroids[static_cast<std::size_t>(s.device_cluster)];
  const auto labels = assign_labels(assignment, s.device_cluster, cfg.drop_noise);
  for (std::size_t k = 0; k < on_plane.size(); ++k) {
    if (labels[k]) out.push_back({on_plane[k], *labels[k]});
  }
  std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.index < b.index; });
  return out;
}

}  // namespace

ModelArtifact train_model(const Dataset& dataset, const PipelineConfig& config, LabelSource source,
                          const FaceModel3D& model, TrainSummary* summary) {
  validate_config(config);
  TrainSummary s;
  s.source = source;
  s.frames = dataset.size();

  const Dataset posed = source == LabelSource::Cluster && needs_pose(dataset)
                            ? pose_stage(dataset, config, model).dataset
                            : dataset;
  const std::vector<std::size_t> candidates = filter_confidence(posed, config.confidence_min);
  s.candidates = candidates.size();

  std::vector<Sample> samples;
  if (source == LabelSource::Cluster) {
    samples = cluster_labels(posed, candidates, config, s);
  } else {
    for (std::size_t i : candidates) {
      if (posed[i].ground_truth) samples.push_back({i, *posed[i].ground_truth});
    }
    if (samples.empty())
      throw Error(ErrorCode::InvalidArgument, "ground-truth training needs labeled frames");
  }

  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no training frames");
  const auto& first = posed[samples.front().index].features;
  if (!first) throw Error(ErrorCode::Schema, "training frames carry no features");
  const auto dim = static_cast<Eigen::Index>(first->size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), dim);
  std::vector<int> y(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& f = posed[samples[k].index].features;
    if (!f) throw Error(ErrorCode::Schema, "training frame has no features");
    if (static_cast<Eigen::Index>(f->size()) != dim)
      throw Error(ErrorCode::Dimension, "training feature dimensions differ");
    x.row(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::RowVectorXd>(f->data(), dim);
    const bool pos = samples[k].label == Label::EyeContact;
    y[k] = pos ? 1 : -1;
    ++(pos ? s.positives : s.negatives);
  }
  if (s.positives == 0 || s.negatives == 0)
    throw Error(ErrorCode::SingleClass, "training labels contain a single class (" +
                                            std::to_string(s.positives) + " positive, " +
                                            std::to_string(s.negatives) + " negative)");

  ModelArtifact artifact;
  artifact.pca = pca_fit(x, config.pca_retain);
  s.pca_dim = artifact.pca.output_dim();
  artifact.svm = svm_train(pca_project_rows(artifact.pca, x), y, config.svm, &s.svm);
  artifact.config_snapshot = config_to_json(config);
  artifact.config_snapshot["label_source"] = label_source_name(source);
  if (summary) *summary = s;
  return artifact;
}

Prediction predict_frame(const FrameRecord& r, const ModelArtifact& artifact) {
  Prediction p{r.session_id, r.participant_id, r.t, r.face_detected, Label::NoEyeContact, {}};
  if (!r.face_detected || !r.features) return p;
  const auto [label, score] = artifact.predict(*r.features);
  p.label = label;
  p.score = score;
  return p;
}

std::vector<Prediction> predict(const Dataset& dataset, const ModelArtifact& artifact) {
  std::vector<Prediction> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset) out.push_back(predict_frame(r, artifact));
  return out;
}

Json prediction_to_json(const Prediction& p) {
  Json j = Json::object();
  j["session_id"] = p.session_id;
  j["participant_id"] = p.participant_id;
  j["t"] = p.t;
  j["face_detected"] = p.face_detected;
  j["label"] = label_name(p.label);
  if (p.score) j["score"] = *p.score;
  return j;
}

Prediction prediction_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "prediction must be a JSON object");
  Prediction p;
  bool seen_session = false, seen_t = false, seen_label = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "session_id" && v.is_string()) {
      p.session_id = v.get<std::string>();
      seen_session = true;
    } else if (key == "participant_id" && v.is_string()) {
      p.participant_id = v.get<std::string>();
    } else if (key == "t" && v.is_number()) {
      p.t = v.get<double>();
      seen_t = true;
    } else if (key == "face_detected" && v.is_boolean()) {
      p.face_detected = v.get<bool>();
    } else if (key == "label" && v.is_string()) {
      p.label = parse_label(v.get<std::string>());
      seen_label = true;
    } else if (key == "score" && v.is_number()) {
      p.score = v.get<double>();
    } else {
      throw Error(ErrorCode::Schema, "unexpected or mistyped prediction field \"" + key + "\"");
    }
  }
  if (!seen_session || !seen_t || !seen_label)
    throw Error(ErrorCode::Schema, "prediction needs \"session_id\", \"t\" and \"label\"");
  return p;
}

void write_predictions(std::span<const Prediction> predictions, std::ostream& out) {
  for (const auto& p : predictions) out << prediction_to_json(p).dump() << '\n';
}

std::string predictions_to_string(std::span<const Prediction> predictions) {
  std::ostringstream out;
  write_predictions(predictions, out);
  return out.str();
}

std::vector<Prediction> parse_predictions(std::istream& in, const std::string& source_name) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    try {
      out.push_back(prediction_from_json(Json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open predictions: " + path);
  return parse_predictions(f, path);
}

Predictor make_predictor(ModelArtifact artifact) {
  return [artifact = std::move(artifact)](const FrameRecord& r) {
    return predict_frame(r, artifact).label;
  };
}

Trainer make_trainer(const PipelineConfig& config, LabelSource source, const FaceModel3D& model) {
  return [config, source, model](const Dataset& train) {
    return make_predictor(train_model(train, config, source, model));
  };
}

EvalResult evaluate_holdout(const Dataset& test, std::span<const Prediction> predictions) {
  std::map<std::pair<std::string, double>, Label> by_key;
  for (const auto& p : predictions) {
    if (!by_key.emplace(std::make_pair(p.session_id, p.t), p.label).second)
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate prediction for session \"" + p.session_id + "\"");
  }
  std::vector<Label> aligned;
  aligned.reserve(test.size());
  for (const auto& r : test) {
    auto it = by_key.find({r.session_id, r.t});
    if (it == by_key.end()) {
      if (!r.ground_truth) {
        aligned.push_back(Label::NoEyeContact);
        continue;
      }
      std::ostringstream msg;
      msg << "no prediction for session \"" << r.session_id << "\" at t=" << r.t;
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    aligned.push_back(it->second);
  }
  return evaluate_predictions(test, aligned);
}

namespace {

void merge_span(SpanStats& into, const SpanStats& s) {
  if (s.count == 0) return;
  if (into.count == 0) {
    into = s;
    return;
  }
  into.min = std::min(into.min, s.min);
  into.max = std::max(into.max, s.max);
  into.count += s.count;
  into.total += s.total;
  into.mean = into.total / static_cast<double>(into.count);
}

}  // namespace

AttentionAnalysis analyze_attention(std::span<const Prediction> predictions,
                                    const PipelineConfig& config) {
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<TimedFocus>> sessions;
  std::vector<std::string> names;
  for (const auto& p : predictions) {
    auto [it, inserted] = slot.try_emplace(p.session_id, sessions.size());
    if (inserted) {
      sessions.emplace_back();
      names.push_back(p.session_id);
    }
    sessions[it->second].push_back(
        {p.t, p.label == Label::EyeContact ? Focus::Device : Focus::Environment});
  }

  AttentionAnalysis a;
  a.aggregate.glance_max = config.glance_max;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (auto& tl : build_timeline(names[s], sessions[s], config.max_frame_span, config.max_gap)) {
      AttentionReport r = attention_report(tl, config.glance_max);
      a.aggregate.glances += r.glances;
      a.aggregate.shifts_env_to_dev += r.shifts_env_to_dev;
      a.aggregate.shifts_dev_to_env += r.shifts_dev_to_env;
      merge_span(a.aggregate.device, r.device);
      merge_span(a.aggregate.environment, r.environment);
      a.timelines.push_back(std::move(tl));
      a.reports.push_back(r);
    }
  }
  const double dev = a.aggregate.device.total, env = a.aggregate.environment.total;
  a.aggregate.primary_focus = dev > env   ? PrimaryFocus::Device
                              : env > dev ? PrimaryFocus::Environment
                                          : PrimaryFocus::Tie;
  return a;
}

Json to_json(const AttentionAnalysis& a) {
  Json j = Json::object();
  Json sessions = Json::array();
  for (std::size_t i = 0; i < a.timelines.size(); ++i) {
    Json s = to_json(a.timelines[i]);
    s["report"] = to_json(a.reports[i]);
    sessions.push_back(std::move(s));
  }
  j["attention_reports"] = std::move(sessions);
  j["aggregate"] = to_json(a.aggregate);
  return j;
}

}  // namespace eyecontact
