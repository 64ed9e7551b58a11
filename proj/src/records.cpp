#include "eyecontact/records.hpp"

#include "eyecontact/error.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace eyecontact {
namespace {

const std::set<std::string> kRecordKeys = {
    "session_id", "participant_id", "t",          "image_w",   "image_h",
    "face_detected", "face_confidence", "landmarks", "features", "gaze_pitch",
    "gaze_yaw",   "label",          "illumination", "pose",     "pose_error"};

const std::set<std::string> kPoseKeys = {"rvec",     "t",          "rmse",       "head_pitch_n",
                                         "head_yaw_n", "norm_rot", "norm_scale", "gaze_origin"};

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::Schema, msg); }

double finite_number(const Json& j, const char* key) {
  if (!j.is_number()) schema_error(std::string("\"") + key + "\" must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(std::string("\"") + key + "\" must be finite");
  return v;
}

const Json& required(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(std::string("missing field \"") + key + "\"");
  return *it;
}

template <std::size_t N>
std::array<double, N> fixed_array(const Json& j, const char* key) {
  if (!j.is_array() || j.size() != N)
    schema_error(std::string("\"") + key + "\" must be an array of " + std::to_string(N) +
                 " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = finite_number(j[i], key);
  return out;
}

Json pose_to_json(const PoseAnnotation& p) {
  Json j = Json::object();
  j["rvec"] = p.rvec;
  j["t"] = p.translation;
  j["rmse"] = p.reprojection_rmse;
  j["head_pitch_n"] = p.headpose_n.pitch;
  j["head_yaw_n"] = p.headpose_n.yaw;
  j["norm_rot"] = p.norm_rot;
  j["norm_scale"] = p.norm_scale;
  j["gaze_origin"] = p.gaze_origin;
  return j;
}

PoseAnnotation pose_from_json(const Json& j) {
  if (!j.is_object()) schema_error("\"pose\" must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!kPoseKeys.contains(key)) schema_error("unknown pose field \"" + key + "\"");
  }
  PoseAnnotation p;
  p.rvec = fixed_array<3>(required(j, "rvec"), "rvec");
  p.translation = fixed_array<3>(required(j, "t"), "pose.t");
  p.reprojection_rmse = finite_number(required(j, "rmse"), "rmse");
  p.headpose_n.pitch = finite_number(required(j, "head_pitch_n"), "head_pitch_n");
  p.headpose_n.yaw = finite_number(required(j, "head_yaw_n"), "head_yaw_n");
  p.norm_rot = fixed_array<9>(required(j, "norm_rot"), "norm_rot");
  p.norm_scale = finite_number(required(j, "norm_scale"), "norm_scale");
  p.gaze_origin = fixed_array<3>(required(j, "gaze_origin"), "gaze_origin");
  if (!(p.norm_scale > 0.0)) schema_error("\"norm_scale\" must be positive");
  return p;
}

void check_record(const FrameRecord& r) {
  if (r.session_id.empty()) schema_error("\"session_id\" must not be empty");
  if (!std::isfinite(r.t)) schema_error("\"t\" must be finite");
  if (r.image_w < 1 || r.image_h < 1) schema_error("image dimensions must be positive");
  if (r.face_confidence && !(*r.face_confidence >= 0.0 && *r.face_confidence <= 1.0))
    schema_error("\"face_confidence\" must lie in [0, 1]");
  if (!r.face_detected && (r.landmarks || r.features || r.gaze_estimate || r.pose))
    schema_error("a frame without a face cannot carry landmarks, features, gaze or pose");
  if (r.landmarks) {
    for (double v : *r.landmarks) {
      if (!std::isfinite(v)) schema_error("landmark coordinates must be finite");
    }
  }
  if (r.features) {
    if (r.features->empty()) schema_error("\"features\" must not be empty");
    for (double v : *r.features) {
      if (!std::isfinite(v)) schema_error("feature values must be finite");
    }
  }
  if (r.gaze_estimate &&
      (!std::isfinite(r.gaze_estimate->pitch) || !std::isfinite(r.gaze_estimate->yaw)))
    schema_error("gaze angles must be finite");
}

// Dataset-level invariants over records already grouped by session. `where`
// maps a record index to a location string for error messages.
template <typename Where>
void check_dataset(const Dataset& records, Where where) {
  std::optional<std::size_t> dim;
  std::map<std::string, double> last_t;
  std::set<std::string> closed;
  std::string current;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    try {
      check_record(r);
    } catch (const Error& e) {
      throw Error(e.code(), where(i) + e.what());
    }
    if (r.features) {
      if (!dim) dim = r.features->size();
      else if (*dim != r.features->size())
        throw Error(ErrorCode::Schema, where(i) + "feature dimension " +
                                           std::to_string(r.features->size()) +
                                           " differs from the dataset's " + std::to_string(*dim));
    }
    if (i == 0 || r.session_id != current) {
      if (i > 0) closed.insert(current);
      if (closed.contains(r.session_id))
        throw Error(ErrorCode::Schema, where(i) + "records of session \"" + r.session_id +
                                           "\" are not contiguous");
      current = r.session_id;
    }
    auto it = last_t.find(r.session_id);
    if (it != last_t.end() && !(r.t > it->second))
      throw Error(ErrorCode::Schema, where(i) + "timestamps of session \"" + r.session_id +
                                         "\" are not strictly increasing");
    last_t[r.session_id] = r.t;
  }
}

}  // namespace

const char* label_name(Label l) { return l == Label::EyeContact ? "contact" : "no_contact"; }

Label parse_label(const std::string& s) {
  if (s == "contact") return Label::EyeContact;
  if (s == "no_contact") return Label::NoEyeContact;
  throw Error(ErrorCode::Schema, "label must be \"contact\" or \"no_contact\", got \"" + s + "\"");
}

Json record_to_json(const FrameRecord& r) {
  Json j = Json::object();
  j["session_id"] = r.session_id;
  j["participant_id"] = r.participant_id;
  j["t"] = r.t;
  j["image_w"] = r.image_w;
  j["image_h"] = r.image_h;
  j["face_detected"] = r.face_detected;
  if (r.face_confidence) j["face_confidence"] = *r.face_confidence;
  if (r.landmarks) j["landmarks"] = *r.landmarks;
  if (r.features) j["features"] = *r.features;
  if (r.gaze_estimate) {
    j["gaze_pitch"] = r.gaze_estimate->pitch;
    j["gaze_yaw"] = r.gaze_estimate->yaw;
  }
  if (r.ground_truth) j["label"] = label_name(*r.ground_truth);
  if (r.illumination) j["illumination"] = *r.illumination;
  if (r.pose) j["pose"] = pose_to_json(*r.pose);
  if (r.pose_error) j["pose_error"] = *r.pose_error;
  return j;
}

FrameRecord record_from_json(const Json& j) {
  if (!j.is_object()) schema_error("record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kRecordKeys.contains(key)) schema_error("unknown field \"" + key + "\"");
  }
  FrameRecord r;
  const Json& sid = required(j, "session_id");
  const Json& pid = required(j, "participant_id");
  if (!sid.is_string()) schema_error("\"session_id\" must be a string");
  if (!pid.is_string()) schema_error("\"participant_id\" must be a string");
  r.session_id = sid.get<std::string>();
  r.participant_id = pid.get<std::string>();
  r.t = finite_number(required(j, "t"), "t");
  const Json& w = required(j, "image_w");
  const Json& h = required(j, "image_h");
  if (!w.is_number_integer() || !h.is_number_integer())
    schema_error("image dimensions must be integers");
  r.image_w = w.get<int>();
  r.image_h = h.get<int>();
  const Json& face = required(j, "face_detected");
  if (!face.is_boolean()) schema_error("\"face_detected\" must be a boolean");
  r.face_detected = face.get<bool>();

  if (auto it = j.find("face_confidence"); it != j.end())
    r.face_confidence = finite_number(*it, "face_confidence");
  if (auto it = j.find("landmarks"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 * kLandmarkCount)
      schema_error("\"landmarks\" must hold 136 numbers (68 points), got " +
                   std::to_string(it->is_array() ? it->size() : 0));
    r.landmarks = fixed_array<2 * kLandmarkCount>(*it, "landmarks");
  }
  if (auto it = j.find("features"); it != j.end()) {
    if (!it->is_array()) schema_error("\"features\" must be an array");
    std::vector<double> f;
    f.reserve(it->size());
    for (const auto& v : *it) f.push_back(finite_number(v, "features"));
    r.features = std::move(f);
  }
  const bool has_pitch = j.contains("gaze_pitch");
  const bool has_yaw = j.contains("gaze_yaw");
  if (has_pitch != has_yaw) schema_error("\"gaze_pitch\" and \"gaze_yaw\" must appear together");
  if (has_pitch) {
    r.gaze_estimate = GazeAngles{finite_number(j["gaze_pitch"], "gaze_pitch"),
                                 finite_number(j["gaze_yaw"], "gaze_yaw")};
  }
  if (auto it = j.find("label"); it != j.end()) {
    if (!it->is_string()) schema_error("\"label\" must be a string");
    r.ground_truth = parse_label(it->get<std::string>());
  }
  if (auto it = j.find("illumination"); it != j.end()) {
    if (!it->is_string()) schema_error("\"illumination\" must be a string");
    r.illumination = it->get<std::string>();
  }
  if (auto it = j.find("pose"); it != j.end()) r.pose = pose_from_json(*it);
  if (auto it = j.find("pose_error"); it != j.end()) {
    if (!it->is_string()) schema_error("\"pose_error\" must be a string");
    r.pose_error = it->get<std::string>();
  }
  check_record(r);
  return r;
}

void validate_dataset(const Dataset& records) {
  check_dataset(records, [](std::size_t i) { return "record " + std::to_string(i) + ": "; });
}

Dataset parse_dataset(std::istream& in, const std::string& source_name) {
  Dataset records;
  std::vector<std::size_t> line_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse, where + e.what());
    }
    try {
      records.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    line_of.push_back(line_no);
  }

  // Timestamps are checked in file order, then sessions are made contiguous.
  std::map<std::string, std::pair<double, std::size_t>> last;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto it = last.find(r.session_id);
    if (it != last.end() && !(r.t > it->second.first))
      throw Error(ErrorCode::Schema, source_name + ":" + std::to_string(line_of[i]) +
                                         ": timestamps of session \"" + r.session_id +
                                         "\" are not strictly increasing");
    last[r.session_id] = {r.t, i};
  }
  std::vector<std::string> session_order;
  std::map<std::string, std::vector<std::size_t>> by_session;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& v = by_session[records[i].session_id];
    if (v.empty()) session_order.push_back(records[i].session_id);
    v.push_back(i);
  }
  Dataset grouped;
  std::vector<std::size_t> grouped_lines;
  grouped.reserve(records.size());
  for (const auto& s : session_order) {
    for (std::size_t i : by_session[s]) {
      grouped.push_back(std::move(records[i]));
      grouped_lines.push_back(line_of[i]);
    }
  }
  check_dataset(grouped, [&](std::size_t i) {
    return source_name + ":" + std::to_string(grouped_lines[i]) + ": ";
  });
  return grouped;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open dataset: " + path);
  return parse_dataset(f, path);
}

void write_dataset(const Dataset& records, std::ostream& out) {
  validate_dataset(records);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::string dataset_to_string(const Dataset& records) {
  std::ostringstream ss;
  write_dataset(records, ss);
  return ss.str();
}

void write_dataset(const Dataset& records, const std::string& path) {
  write_text_file(path, dataset_to_string(records));
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  f << contents;
  f.flush();
  if (!f) throw Error(ErrorCode::Io, "failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Model artifact

std::pair<Label, double> ModelArtifact::predict(std::span<const double> features) const {
  const Eigen::Map<const Eigen::VectorXd> x(features.data(),
                                            static_cast<Eigen::Index>(features.size()));
  const auto [label, score] = svm_predict(svm, pca_project(pca, x));
  return {label > 0 ? Label::EyeContact : Label::NoEyeContact, score};
}

namespace {

Json vector_json(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const Json& j, const char* key, Eigen::Index expected) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
    throw Error(ErrorCode::Schema, std::string("model field \"") + key + "\" must hold " +
                                       std::to_string(expected) + " numbers");
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i)
    v(i) = finite_number(j[static_cast<std::size_t>(i)], key);
  return v;
}

Eigen::Index dim_from(const Json& obj, const char* key) {
  const Json& j = required(obj, key);
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw Error(ErrorCode::Schema, std::string("model field \"") + key +
                                       "\" must be a non-negative integer");
  return static_cast<Eigen::Index>(j.get<long long>());
}

}  // namespace

Json model_to_json(const ModelArtifact& m) {
  Json j = Json::object();
  j["format_version"] = m.format_version;
  Json pca = Json::object();
  pca["input_dim"] = m.pca.input_dim();
  pca["output_dim"] = m.pca.output_dim();
  pca["mean"] = vector_json(m.pca.mean);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> comps =
      m.pca.components;
  pca["components"] = std::vector<double>(comps.data(), comps.data() + comps.size());
  pca["explained_variance"] = vector_json(m.pca.explained_variance);
  j["pca"] = std::move(pca);
  Json svm = Json::object();
  svm["weights"] = vector_json(m.svm.weights);
  svm["bias"] = m.svm.bias;
  svm["bias_scale"] = m.svm.bias_scale;
  svm["c"] = m.svm.c;
  svm["weight_pos"] = m.svm.weight_pos;
  svm["weight_neg"] = m.svm.weight_neg;
  j["svm"] = std::move(svm);
  j["config"] = m.config_snapshot;
  return j;
}

ModelArtifact model_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "model file must hold a JSON object");
  const Json& version = required(j, "format_version");
  if (!version.is_number_integer())
    throw Error(ErrorCode::Schema, "\"format_version\" must be an integer");
  if (version.get<int>() != ModelArtifact::kFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion,
                "unsupported model format_version " + version.dump() + " (expected " +
                    std::to_string(ModelArtifact::kFormatVersion) + ")");
  ModelArtifact m;
  const Json& pca = required(j, "pca");
  const Eigen::Index d = dim_from(pca, "input_dim");
  const Eigen::Index k = dim_from(pca, "output_dim");
  if (k > d) throw Error(ErrorCode::Schema, "PCA output_dim exceeds input_dim");
  m.pca.mean = vector_from(required(pca, "mean"), "mean", d);
  const Eigen::VectorXd flat = vector_from(required(pca, "components"), "components", k * d);
  m.pca.components =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data(), k, d);
  m.pca.explained_variance =
      vector_from(required(pca, "explained_variance"), "explained_variance", k);

  const Json& svm = required(j, "svm");
  m.svm.weights = vector_from(required(svm, "weights"), "weights", k);
  m.svm.bias = finite_number(required(svm, "bias"), "bias");
  m.svm.bias_scale = finite_number(required(svm, "bias_scale"), "bias_scale");
  m.svm.c = finite_number(required(svm, "c"), "c");
  m.svm.weight_pos = finite_number(required(svm, "weight_pos"), "weight_pos");
  m.svm.weight_neg = finite_number(required(svm, "weight_neg"), "weight_neg");
  if (auto it = j.find("config"); it != j.end()) m.config_snapshot = *it;
  return m;
}

void save_model(const ModelArtifact& m, const std::string& path) {
  if (m.pca.output_dim() != m.svm.weights.size())
    throw Error(ErrorCode::Dimension, "PCA output dimension differs from SVM input dimension");
  write_text_file(path, model_to_json(m).dump(1) + "\n");
}

ModelArtifact load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace eyecontact
