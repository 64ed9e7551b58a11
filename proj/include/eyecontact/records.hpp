#pragma once

#include "eyecontact/classify.hpp"
#include "eyecontact/types.hpp"

#include <json.hpp>

#include <array>
#include <span>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eyecontact {

using Json = nlohmann::ordered_json;

constexpr std::size_t kLandmarkCount = 68;

/// Flat x0, y0, ..., x67, y67 in pixels.
using Landmarks = std::array<double, 2 * kLandmarkCount>;

/// Head-pose and normalization results attached by the pose stage.
struct PoseAnnotation {
  std::array<double, 3> rvec{};         // model -> camera rotation vector, rad
  std::array<double, 3> translation{};  // mm
  double reprojection_rmse = 0.0;       // px, of the smoothed pose
  GazeAngles headpose_n;                // facing direction in normalized space
  std::array<double, 9> norm_rot{};     // camera -> normalized camera, row-major
  double norm_scale = 1.0;
  std::array<double, 3> gaze_origin{};  // mm, camera space

  bool operator==(const PoseAnnotation&) const = default;
};

struct FrameRecord {
  std::string session_id;
  std::string participant_id;
  double t = 0.0;
  int image_w = 0;
  int image_h = 0;
  bool face_detected = false;
  std::optional<double> face_confidence;
  std::optional<Landmarks> landmarks;
  std::optional<std::vector<double>> features;
  std::optional<GazeAngles> gaze_estimate;  // normalized-space angles
  std::optional<Label> ground_truth;
  std::optional<std::string> illumination;
  std::optional<PoseAnnotation> pose;
  std::optional<std::string> pose_error;

  bool operator==(const FrameRecord&) const = default;
};

using Dataset = std::vector<FrameRecord>;

/// Record <-> JSON object. `to_json` omits absent fields.
Json record_to_json(const FrameRecord& r);
FrameRecord record_from_json(const Json& j);

/// Checks every FrameRecord invariant plus dataset-level consistency: one
/// feature dimension and strictly increasing timestamps per session. Records
/// must already be grouped by session.
void validate_dataset(const Dataset& records);

/// One JSON object per line. Lines are grouped by session in order of first
/// appearance; within a session timestamps must strictly increase.
Dataset read_dataset(const std::string& path);
Dataset parse_dataset(std::istream& in, const std::string& source_name = "<stream>");
void write_dataset(const Dataset& records, const std::string& path);
void write_dataset(const Dataset& records, std::ostream& out);

/// Shortest round-trip text of a dataset.
std::string dataset_to_string(const Dataset& records);

/// Trained detector: PCA projection followed by the linear SVM.
struct ModelArtifact {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  PcaModel pca;
  SvmModel svm;
  Json config_snapshot = Json::object();

  /// Decision value of a raw feature vector.
  std::pair<Label, double> predict(std::span<const double> features) const;
};

Json model_to_json(const ModelArtifact& m);
ModelArtifact model_from_json(const Json& j);
void save_model(const ModelArtifact& m, const std::string& path);
ModelArtifact load_model(const std::string& path);

const char* label_name(Label l);
Label parse_label(const std::string& s);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace eyecontact
