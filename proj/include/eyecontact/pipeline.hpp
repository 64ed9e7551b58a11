#pragma once

#include "eyecontact/config.hpp"
#include "eyecontact/gaze.hpp"
#include "eyecontact/metrics.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eyecontact {

/// The configured face model file, or the built-in one when none is set.
FaceModel3D resolve_face_model(const PipelineConfig& config);

struct PoseFailure {
  std::size_t index = 0;
  std::string session_id;
  double t = 0.0;
  std::string message;
};

struct PoseStageResult {
  Dataset dataset;
  std::vector<PoseFailure> failures;
};

/// Solves, refines and smooths the head pose of every frame with landmarks and
/// stores it with its normalization on the record. Sessions run in parallel;
/// frames of one session run in time order. Failures are recorded on the frame
/// ("pose_error") and never stop the run.
PoseStageResult pose_stage(const Dataset& dataset, const PipelineConfig& config,
                           const FaceModel3D& model, int workers = 1);

/// True when any frame with landmarks lacks both a pose and a pose error.
bool needs_pose(const Dataset& dataset);

struct GazeHit {
  std::optional<GazePoint2D> point;  // empty when the ray misses the plane
  GazeSource source = GazeSource::Gaze;
};

/// Effective gaze of a posed frame intersected with the configured plane.
GazeHit gaze_point(const FrameRecord& record, const PipelineConfig& config);

enum class LabelSource { Cluster, GroundTruth };

const char* label_source_name(LabelSource s);
LabelSource parse_label_source(const std::string& s);

struct TrainSummary {
  LabelSource source = LabelSource::Cluster;
  std::size_t frames = 0;
  std::size_t candidates = 0;  // detected faces passing the confidence filter
  std::size_t skipped_no_pose = 0;
  std::size_t no_intersection = 0;
  std::size_t head_pose_proxy = 0;
  std::size_t clustered = 0;
  std::size_t clusters = 0;
  std::size_t noise = 0;
  int device_cluster = -1;
  std::optional<GazePoint2D> device_centroid;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  long pca_dim = 0;
  SvmTrainInfo svm;
};

Json to_json(const TrainSummary& s);

/// Threshold, intersect, filter, cluster and label (Cluster mode) or take the
/// annotations (GroundTruth mode), then fit PCA and the SVM. Frames without a
/// pose are posed on the fly.
ModelArtifact train_model(const Dataset& dataset, const PipelineConfig& config, LabelSource source,
                          const FaceModel3D& model, TrainSummary* summary = nullptr);

struct Prediction {
  std::string session_id;
  std::string participant_id;
  double t = 0.0;
  bool face_detected = false;
  Label label = Label::NoEyeContact;
  std::optional<double> score;

  bool operator==(const Prediction&) const = default;
};

/// Frames without a face, or without features, are NoEyeContact with no score.
Prediction predict_frame(const FrameRecord& record, const ModelArtifact& artifact);
std::vector<Prediction> predict(const Dataset& dataset, const ModelArtifact& artifact);

Json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const Json& j);
void write_predictions(std::span<const Prediction> predictions, std::ostream& out);
std::string predictions_to_string(std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(const std::string& path);
std::vector<Prediction> parse_predictions(std::istream& in, const std::string& source_name = "<stream>");

Predictor make_predictor(ModelArtifact artifact);
Trainer make_trainer(const PipelineConfig& config, LabelSource source, const FaceModel3D& model);

/// Joins predictions to test frames on (session_id, t) and scores them.
EvalResult evaluate_holdout(const Dataset& test, std::span<const Prediction> predictions);

struct AttentionAnalysis {
  std::vector<Timeline> timelines;
  std::vector<AttentionReport> reports;  // one per timeline
  AttentionReport aggregate;
};

/// Device focus is a predicted EyeContact frame; everything else is environment.
AttentionAnalysis analyze_attention(std::span<const Prediction> predictions,
                                    const PipelineConfig& config);
Json to_json(const AttentionAnalysis& a);

}  // namespace eyecontact
