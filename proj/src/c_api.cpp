#include "eyecontact/eyecontact.h"

#include "eyecontact/config.hpp"
#include "eyecontact/error.hpp"
#include "eyecontact/image.hpp"
#include "eyecontact/normalize.hpp"
#include "eyecontact/pipeline.hpp"
#include "eyecontact/synth.hpp"

#include <cstring>
#include <new>
#include <sstream>
#include <string>

using namespace eyecontact;

struct ec_config {
  PipelineConfig value;
};
struct ec_dataset {
  Dataset value;
};
struct ec_model {
  ModelArtifact value;
};
struct ec_predictions {
  std::vector<Prediction> value;
};

namespace {

thread_local std::string g_last_error;

ec_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return EC_INVALID_ARGUMENT;
    case ErrorCode::Io: return EC_IO;
    case ErrorCode::Parse: return EC_PARSE;
    case ErrorCode::Schema: return EC_SCHEMA;
    case ErrorCode::Dimension: return EC_DIMENSION;
    case ErrorCode::Numeric: return EC_NUMERIC;
    case ErrorCode::Degenerate: return EC_DEGENERATE;
    case ErrorCode::NoIntersection: return EC_NO_INTERSECTION;
    case ErrorCode::NoDeviceCluster: return EC_NO_DEVICE_CLUSTER;
    case ErrorCode::SingleClass: return EC_SINGLE_CLASS;
    case ErrorCode::NotConverged: return EC_NOT_CONVERGED;
    case ErrorCode::UnsupportedVersion: return EC_UNSUPPORTED_VERSION;
  }
  return EC_INTERNAL;
}

template <typename Fn>
ec_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return EC_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EC_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EC_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return EC_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

LabelSource source_of(ec_label_source s) {
  if (s == EC_LABELS_CLUSTER) return LabelSource::Cluster;
  if (s == EC_LABELS_GROUND_TRUTH) return LabelSource::GroundTruth;
  throw Error(ErrorCode::InvalidArgument, "unknown label source");
}

Json parse_json(const char* text, const char* what) {
  need(text, what);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
}

Dataset posed(const Dataset& d, const PipelineConfig& cfg, int workers) {
  if (!needs_pose(d)) return d;
  return pose_stage(d, cfg, resolve_face_model(cfg), workers).dataset;
}

}  // namespace

extern "C" {

const char* ec_last_error(void) { return g_last_error.c_str(); }

const char* ec_status_name(ec_status status) {
  switch (status) {
    case EC_OK: return "ok";
    case EC_INVALID_ARGUMENT: return "invalid argument";
    case EC_IO: return "I/O error";
    case EC_PARSE: return "parse error";
    case EC_SCHEMA: return "schema error";
    case EC_DIMENSION: return "dimension mismatch";
    case EC_NUMERIC: return "numeric error";
    case EC_DEGENERATE: return "degenerate geometry";
    case EC_NO_INTERSECTION: return "no intersection";
    case EC_NO_DEVICE_CLUSTER: return "no device cluster";
    case EC_SINGLE_CLASS: return "single class";
    case EC_NOT_CONVERGED: return "not converged";
    case EC_UNSUPPORTED_VERSION: return "unsupported version";
    case EC_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ec_string_free(char* s) { delete[] s; }

ec_status ec_config_new(ec_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ec_config{};
  });
}

ec_status ec_config_load(const char* path, ec_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ec_config{load_config(path)};
  });
}

ec_status ec_config_merge_json(ec_config* config, const char* json) {
  return guarded([&] {
    need(config, "config");
    config->value = merge_config(config->value, parse_json(json, "config overrides"));
  });
}

ec_status ec_config_to_json(const ec_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup(config_to_json(config->value).dump(2));
  });
}

void ec_config_free(ec_config* config) { delete config; }

ec_status ec_dataset_read(const char* path, ec_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ec_dataset{read_dataset(path)};
  });
}

ec_status ec_dataset_parse(const char* jsonl, ec_dataset** out) {
  return guarded([&] {
    need(jsonl, "jsonl");
    need(out, "out");
    std::istringstream in(jsonl);
    *out = new ec_dataset{parse_dataset(in)};
  });
}

ec_status ec_dataset_write(const ec_dataset* dataset, const char* path) {
  return guarded([&] {
    need(dataset, "dataset");
    need(path, "path");
    write_dataset(dataset->value, path);
  });
}

ec_status ec_dataset_to_jsonl(const ec_dataset* dataset, char** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(out, "out");
    *out = dup(dataset_to_string(dataset->value));
  });
}

size_t ec_dataset_size(const ec_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

void ec_dataset_free(ec_dataset* dataset) { delete dataset; }

ec_status ec_pose(const ec_dataset* dataset, const ec_config* config, int workers,
                  ec_dataset** out, size_t* failures, char** failure_json) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(out, "out");
    PoseStageResult r = pose_stage(dataset->value, config->value, resolve_face_model(config->value),
                                   workers);
    Json list = Json::array();
    for (const auto& f : r.failures) {
      Json j = Json::object();
      j["index"] = f.index;
      j["session_id"] = f.session_id;
      j["t"] = f.t;
      j["error"] = f.message;
      list.push_back(std::move(j));
    }
    if (failures) *failures = r.failures.size();
    if (failure_json) *failure_json = dup(list.dump());
    *out = new ec_dataset{std::move(r.dataset)};
  });
}

ec_status ec_train(const ec_dataset* dataset, const ec_config* config, ec_label_source source,
                   ec_model** out, char** summary_json) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(out, "out");
    TrainSummary summary;
    ModelArtifact m = train_model(dataset->value, config->value, source_of(source),
                                  resolve_face_model(config->value), &summary);
    if (summary_json) *summary_json = dup(to_json(summary).dump());
    *out = new ec_model{std::move(m)};
  });
}

ec_status ec_model_load(const char* path, ec_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ec_model{load_model(path)};
  });
}

ec_status ec_model_save(const ec_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    save_model(model->value, path);
  });
}

ec_status ec_model_to_json(const ec_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = dup(model_to_json(model->value).dump(1));
  });
}

void ec_model_free(ec_model* model) { delete model; }

ec_status ec_predict(const ec_dataset* dataset, const ec_model* model, ec_predictions** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(model, "model");
    need(out, "out");
    *out = new ec_predictions{predict(dataset->value, model->value)};
  });
}

ec_status ec_predictions_read(const char* path, ec_predictions** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ec_predictions{read_predictions(path)};
  });
}

ec_status ec_predictions_write(const ec_predictions* predictions, const char* path) {
  return guarded([&] {
    need(predictions, "predictions");
    need(path, "path");
    write_text_file(path, predictions_to_string(predictions->value));
  });
}

ec_status ec_predictions_to_jsonl(const ec_predictions* predictions, char** out) {
  return guarded([&] {
    need(predictions, "predictions");
    need(out, "out");
    *out = dup(predictions_to_string(predictions->value));
  });
}

size_t ec_predictions_size(const ec_predictions* predictions) {
  return predictions ? predictions->value.size() : 0;
}

void ec_predictions_free(ec_predictions* predictions) { delete predictions; }

ec_status ec_eval_holdout(const ec_dataset* test, const ec_predictions* predictions,
                          char** report_json) {
  return guarded([&] {
    need(test, "test");
    need(predictions, "predictions");
    need(report_json, "report_json");
    Json j = Json::object();
    j["protocol"] = "holdout";
    j.update(to_json(evaluate_holdout(test->value, predictions->value)));
    *report_json = dup(j.dump());
  });
}

ec_status ec_eval_loocv(const ec_dataset* dataset, const ec_config* config, ec_label_source source,
                        int workers, char** report_json) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(report_json, "report_json");
    const PipelineConfig& cfg = config->value;
    const LabelSource ls = source_of(source);
    const Dataset data = ls == LabelSource::Cluster ? posed(dataset->value, cfg, workers)
                                                    : dataset->value;
    const LoocvResult r =
        loocv_by_participant(data, make_trainer(cfg, ls, resolve_face_model(cfg)), workers);
    Json j = Json::object();
    j["protocol"] = "loocv";
    j["label_source"] = label_source_name(ls);
    j.update(to_json(r));
    *report_json = dup(j.dump());
  });
}

ec_status ec_eval_cross(const ec_dataset* train, const ec_dataset* test, const ec_config* config,
                        ec_label_source source, char** report_json) {
  return guarded([&] {
    need(train, "train");
    need(test, "test");
    need(config, "config");
    need(report_json, "report_json");
    const PipelineConfig& cfg = config->value;
    const LabelSource ls = source_of(source);
    const EvalResult r =
        cross_dataset_eval(train->value, test->value, make_trainer(cfg, ls, resolve_face_model(cfg)));
    Json j = Json::object();
    j["protocol"] = "cross";
    j["label_source"] = label_source_name(ls);
    j.update(to_json(r));
    *report_json = dup(j.dump());
  });
}

ec_status ec_metrics(const ec_predictions* predictions, const ec_config* config,
                     char** report_json) {
  return guarded([&] {
    need(predictions, "predictions");
    need(config, "config");
    need(report_json, "report_json");
    *report_json = dup(to_json(analyze_attention(predictions->value, config->value)).dump());
  });
}

ec_status ec_synth(const char* synth_config_json, int64_t seed_override, ec_dataset** out,
                   char** truth_jsonl) {
  return guarded([&] {
    need(out, "out");
    Json j = parse_json(synth_config_json, "synth config");
    if (seed_override >= 0) {
      if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "synth config must be a JSON object");
      j["seed"] = static_cast<std::uint64_t>(seed_override);
    }
    const SynthConfig cfg = synth_config_from_json(j);
    SynthOutput s = generate(cfg, FaceModel3D::canonical());
    if (truth_jsonl) *truth_jsonl = dup(truth_to_string(s.truth));
    *out = new ec_dataset{std::move(s.dataset)};
  });
}

ec_status ec_warp_png(const ec_dataset* dataset, size_t index, const ec_config* config,
                      const char* input_png, const char* output_png) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(input_png, "input_png");
    need(output_png, "output_png");
    if (index >= dataset->value.size())
      throw Error(ErrorCode::InvalidArgument, "frame index out of range");
    const FrameRecord& r = dataset->value[index];
    if (!r.pose) throw Error(ErrorCode::InvalidArgument, "frame has no pose; run the pose stage first");
    const Image src = read_png(input_png);
    if (src.width != r.image_w || src.height != r.image_h)
      throw Error(ErrorCode::Dimension, "image size differs from the frame's image size");
    const NormParams& norm = config->value.norm;
    const Eigen::Matrix3d rot =
        Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.pose->norm_rot.data());
    const Eigen::Matrix3d s = Eigen::Vector3d(1.0, 1.0, r.pose->norm_scale).asDiagonal();
    const Eigen::Matrix3d warp = norm.camera_matrix() * s * rot *
                                 default_intrinsics(r.image_w, r.image_h).matrix().inverse();
    write_png(warp_image(src, warp, norm.out_width, norm.out_height), output_png);
  });
}

}  // extern "C"
