#include "eyecontact/eyecontact.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using Json = nlohmann::ordered_json;

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kPartial = 3, kProcessing = 4 };

struct Failure {
  int code;
  std::string message;
};

int exit_code(ec_status s) {
  switch (s) {
    case EC_OK: return kOk;
    case EC_INVALID_ARGUMENT:
    case EC_IO:
    case EC_PARSE:
    case EC_SCHEMA:
    case EC_DIMENSION:
    case EC_UNSUPPORTED_VERSION: return kInput;
    default: return kProcessing;
  }
}

void check(ec_status s) {
  if (s != EC_OK) throw Failure{exit_code(s), std::string(ec_status_name(s)) + ": " + ec_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { ec_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) {
  OwnedString owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Config = Handle<ec_config, ec_config_free>;
using Dataset = Handle<ec_dataset, ec_dataset_free>;
using Model = Handle<ec_model, ec_model_free>;
using Predictions = Handle<ec_predictions, ec_predictions_free>;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure{kInput, "cannot open " + path};
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Failure{kInput, "cannot open " + path + " for writing"};
  f << text;
  if (!f) throw Failure{kInput, "failed writing " + path};
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") std::cout << text;
  else write_file(out, text);
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Failure{kInput, what + ": " + e.what()};
  }
}

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::optional<long long> seed;
  std::string out;
  int workers = 1;
};

void add_common(CLI::App* cmd, Common& c, const std::string& config_help) {
  cmd->add_option("--config", c.config, config_help)->check(CLI::ExistingFile);
  cmd->add_option("--set", c.set, "Override a config key, KEY=VALUE (VALUE as JSON)");
  cmd->add_option("--seed", c.seed, "Random seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c.out, "Output path (default: stdout)");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

Json overrides(const Common& c) {
  Json j = Json::object();
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{kUsage, "--set expects KEY=VALUE, got " + kv};
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      j[key] = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      j[key] = value;
    }
  }
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

void load_pipeline_config(const Common& c, Config& cfg) {
  if (c.config.empty()) check(ec_config_new(cfg.out()));
  else check(ec_config_load(c.config.c_str(), cfg.out()));
  check(ec_config_merge_json(cfg.get(), overrides(c).dump().c_str()));
}

Json config_json(const Config& cfg) {
  char* s = nullptr;
  check(ec_config_to_json(cfg.get(), &s));
  return parse_json(take(s), "config");
}

void write_meta(const std::string& out, Json meta) {
  if (out.empty() || out == "-") return;
  write_file(out + ".meta.json", meta.dump(2) + "\n");
}

ec_label_source label_source(const std::string& s) {
  if (s == "cluster") return EC_LABELS_CLUSTER;
  return EC_LABELS_GROUND_TRUTH;
}

std::string fixed(const Json& v) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
  return buf;
}

std::string counts(const Json& cm) {
  return "tp=" + cm["tp"].dump() + " tn=" + cm["tn"].dump() + " fp=" + cm["fp"].dump() +
         " fn=" + cm["fn"].dump();
}

void print_eval_table(const Json& j) {
  std::cerr << "protocol   " << j["protocol"].get<std::string>() << "\n";
  std::cerr << "MCC        " << fixed(j["mcc"]);
  if (j.contains("mcc_stddev")) std::cerr << "  (stddev " << fixed(j["mcc_stddev"]) << ")";
  std::cerr << "\nTNR        " << fixed(j["tnr"]) << "\n";
  std::cerr << "confusion  " << counts(j["confusion"]) << "\n";
  if (j.contains("folds")) {
    for (const auto& f : j["folds"]) {
      std::cerr << "  fold " << f["participant"].get<std::string>() << ": ";
      if (f["failed"].get<bool>()) std::cerr << "FAILED (" << f["error"].get<std::string>() << ")";
      else std::cerr << "MCC " << fixed(f["mcc"]) << "  TNR " << fixed(f["tnr"]);
      std::cerr << "\n";
    }
    if (j["failed_folds"].get<std::size_t>() > 0)
      std::cerr << "warning: " << j["failed_folds"] << " fold(s) failed and were left out of the mean\n";
  }
  if (j.contains("per_illumination")) {
    for (const auto& [tag, r] : j["per_illumination"].items())
      std::cerr << "  " << tag << ": MCC " << fixed(r["mcc"]) << "  TNR " << fixed(r["tnr"]) << "\n";
  }
}

void print_attention_row(const std::string& name, const Json& r) {
  std::cerr << name << "  glances " << r["glances"] << "  shifts E>D " << r["shifts_env_to_dev"]
            << " D>E " << r["shifts_dev_to_env"] << "  device " << fixed(r["device"]["total"])
            << " s  environment " << fixed(r["environment"]["total"]) << " s  primary "
            << r["primary_focus"].get<std::string>() << "\n";
}

int cmd_synth(const Common& c) {
  Json synth = c.config.empty() ? Json::object() : parse_json(read_file(c.config), c.config);
  const Json extra = overrides(c);
  for (const auto& [k, v] : extra.items()) {
    if (k != "seed") synth[k] = v;
  }
  Dataset data;
  char* truth = nullptr;
  check(ec_synth(synth.dump().c_str(), c.seed.value_or(-1), data.out(), &truth));
  const std::string truth_text = take(truth);
  char* jsonl = nullptr;
  check(ec_dataset_to_jsonl(data.get(), &jsonl));
  emit(c.out, take(jsonl));
  if (!c.out.empty() && c.out != "-") {
    write_file(c.out + ".truth.jsonl", truth_text);
    Json meta = Json::object();
    meta["command"] = "synth";
    meta["synth_config"] = synth;
    if (c.seed) meta["synth_config"]["seed"] = *c.seed;
    meta["records"] = ec_dataset_size(data.get());
    write_meta(c.out, meta);
  }
  return kOk;
}

int cmd_pose(const Common& c, const std::string& dataset_path) {
  Config cfg;
  load_pipeline_config(c, cfg);
  Dataset in, out;
  check(ec_dataset_read(dataset_path.c_str(), in.out()));
  std::size_t failures = 0;
  char* failure_json = nullptr;
  check(ec_pose(in.get(), cfg.get(), c.workers, out.out(), &failures, &failure_json));
  const Json failed = parse_json(take(failure_json), "failures");
  char* jsonl = nullptr;
  check(ec_dataset_to_jsonl(out.get(), &jsonl));
  emit(c.out, take(jsonl));
  Json meta = Json::object();
  meta["command"] = "pose";
  meta["config"] = config_json(cfg);
  meta["records"] = ec_dataset_size(out.get());
  meta["failures"] = failed;
  write_meta(c.out, meta);
  for (const auto& f : failed) {
    std::cerr << "warning: frame " << f["index"].get<std::size_t>() << " (session "
              << f["session_id"].get<std::string>() << ", t=" << f["t"].get<double>()
              << "): " << f["error"].get<std::string>() << "\n";
  }
  if (failures > 0) {
    std::cerr << failures << " frame(s) failed the pose stage\n";
    return kPartial;
  }
  return kOk;
}

int cmd_train(const Common& c, const std::string& dataset_path, const std::string& labels,
              const std::string& summary_path) {
  Config cfg;
  load_pipeline_config(c, cfg);
  Dataset in;
  check(ec_dataset_read(dataset_path.c_str(), in.out()));
  Model model;
  char* summary = nullptr;
  check(ec_train(in.get(), cfg.get(), label_source(labels), model.out(), &summary));
  const Json s = parse_json(take(summary), "summary");
  char* text = nullptr;
  check(ec_model_to_json(model.get(), &text));
  emit(c.out, take(text) + "\n");
  if (!summary_path.empty()) write_file(summary_path, s.dump(2) + "\n");
  std::cerr << "trained on " << s["positives"] << " positive and " << s["negatives"]
            << " negative frames; PCA keeps " << s["pca_dim"] << " dimensions\n";
  return kOk;
}

int cmd_predict(const Common& c, const std::string& dataset_path, const std::string& model_path) {
  Dataset in;
  check(ec_dataset_read(dataset_path.c_str(), in.out()));
  Model model;
  check(ec_model_load(model_path.c_str(), model.out()));
  Predictions preds;
  check(ec_predict(in.get(), model.get(), preds.out()));
  char* jsonl = nullptr;
  check(ec_predictions_to_jsonl(preds.get(), &jsonl));
  emit(c.out, take(jsonl));
  char* model_text = nullptr;
  check(ec_model_to_json(model.get(), &model_text));
  Json meta = Json::object();
  meta["command"] = "predict";
  meta["config"] = parse_json(take(model_text), "model")["config"];
  meta["records"] = ec_predictions_size(preds.get());
  write_meta(c.out, meta);
  return kOk;
}

struct EvalArgs {
  std::string protocol = "holdout";
  std::string dataset;
  std::string predictions;
  std::string model;
  std::string train;
  std::string labels = "cluster";
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  Config cfg;
  load_pipeline_config(c, cfg);
  Dataset test;
  check(ec_dataset_read(a.dataset.c_str(), test.out()));
  char* report = nullptr;
  Json config = config_json(cfg);

  if (a.protocol == "holdout") {
    Predictions preds;
    if (!a.predictions.empty()) {
      check(ec_predictions_read(a.predictions.c_str(), preds.out()));
    } else if (!a.model.empty()) {
      Model model;
      check(ec_model_load(a.model.c_str(), model.out()));
      check(ec_predict(test.get(), model.get(), preds.out()));
      char* model_text = nullptr;
      check(ec_model_to_json(model.get(), &model_text));
      config = parse_json(take(model_text), "model")["config"];
    } else {
      throw Failure{kUsage, "holdout evaluation needs --predictions or --model"};
    }
    check(ec_eval_holdout(test.get(), preds.get(), &report));
  } else if (a.protocol == "loocv") {
    check(ec_eval_loocv(test.get(), cfg.get(), label_source(a.labels), c.workers, &report));
  } else {
    if (a.train.empty()) throw Failure{kUsage, "cross-dataset evaluation needs --train"};
    Dataset train;
    check(ec_dataset_read(a.train.c_str(), train.out()));
    check(ec_eval_cross(train.get(), test.get(), cfg.get(), label_source(a.labels), &report));
  }
  Json j = parse_json(take(report), "report");
  j["config"] = std::move(config);
  emit(c.out, j.dump(2) + "\n");
  print_eval_table(j);
  return kOk;
}

int cmd_metrics(const Common& c, const std::string& predictions_path) {
  Config cfg;
  load_pipeline_config(c, cfg);
  Predictions preds;
  check(ec_predictions_read(predictions_path.c_str(), preds.out()));
  char* report = nullptr;
  check(ec_metrics(preds.get(), cfg.get(), &report));
  Json j = parse_json(take(report), "report");
  j["config"] = config_json(cfg);
  emit(c.out, j.dump(2) + "\n");
  for (const auto& r : j["attention_reports"])
    print_attention_row(r["session_id"].get<std::string>(), r["report"]);
  print_attention_row("all", j["aggregate"]);
  return kOk;
}

int cmd_warp(const Common& c, const std::string& dataset_path, std::size_t index,
             const std::string& image) {
  if (c.out.empty() || c.out == "-") throw Failure{kUsage, "warp needs --out for the PNG"};
  Config cfg;
  load_pipeline_config(c, cfg);
  Dataset data;
  check(ec_dataset_read(dataset_path.c_str(), data.out()));
  check(ec_warp_png(data.get(), index, cfg.get(), image.c_str(), c.out.c_str()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eye contact detection pipeline"};
  app.require_subcommand(1);

  Common common;
  const std::string cfg_help = "Pipeline config (JSON)";

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, common, "Generator config (JSON)");

  std::string dataset, model, predictions, labels = "cluster", summary, image;
  std::size_t index = 0;
  const std::vector<std::string> label_choices{"cluster", "ground-truth", "ground_truth"};

  auto* pose = app.add_subcommand("pose", "Estimate head poses and normalization");
  add_common(pose, common, cfg_help);
  pose->add_option("--dataset", dataset, "Input dataset (JSONL)")->required()->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train the eye contact classifier");
  add_common(train, common, cfg_help);
  train->add_option("--dataset", dataset, "Training dataset (JSONL)")->required()->check(CLI::ExistingFile);
  train->add_option("--labels", labels, "Label source")->check(CLI::IsMember(label_choices));
  train->add_option("--summary", summary, "Write a training summary (JSON)");

  auto* pred = app.add_subcommand("predict", "Classify frames with a trained model");
  add_common(pred, common, cfg_help);
  pred->add_option("--dataset", dataset, "Dataset (JSONL)")->required()->check(CLI::ExistingFile);
  pred->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);

  EvalArgs eval_args;
  const std::vector<std::string> protocol_choices{"holdout", "loocv", "cross"};
  auto* eval = app.add_subcommand("eval", "Evaluate against ground truth");
  add_common(eval, common, cfg_help);
  eval->add_option("--protocol", eval_args.protocol, "holdout, loocv or cross")
      ->check(CLI::IsMember(protocol_choices));
  eval->add_option("--dataset", eval_args.dataset, "Test dataset (JSONL)")->required()->check(CLI::ExistingFile);
  eval->add_option("--predictions", eval_args.predictions, "Predictions (holdout)")->check(CLI::ExistingFile);
  eval->add_option("--model", eval_args.model, "Model file (holdout)")->check(CLI::ExistingFile);
  eval->add_option("--train", eval_args.train, "Training dataset (cross)")->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_args.labels, "Label source for training")->check(CLI::IsMember(label_choices));

  auto* metrics = app.add_subcommand("metrics", "Attention metrics from predictions");
  add_common(metrics, common, cfg_help);
  metrics->add_option("--predictions", predictions, "Predictions (JSONL)")->required()->check(CLI::ExistingFile);

  auto* warp = app.add_subcommand("warp", "Warp an image into the normalized face image");
  add_common(warp, common, cfg_help);
  warp->add_option("--dataset", dataset, "Posed dataset (JSONL)")->required()->check(CLI::ExistingFile);
  warp->add_option("--index", index, "Frame index in the dataset")->required();
  warp->add_option("--image", image, "Input PNG")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*pose) return cmd_pose(common, dataset);
    if (*train) return cmd_train(common, dataset, labels, summary);
    if (*pred) return cmd_predict(common, dataset, model);
    if (*eval) return cmd_eval(common, eval_args);
    if (*metrics) return cmd_metrics(common, predictions);
    if (*warp) return cmd_warp(common, dataset, index, image);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kProcessing;
  }
  return kUsage;
}
