#include "eyecontact/metrics.hpp"

#include "eyecontact/error.hpp"
#include "eyecontact/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace eyecontact {

double Timeline::duration() const {
  double total = 0.0;
  for (const auto& b : blocks) total += b.duration();
  return total;
}

std::vector<Timeline> build_timeline(const std::string& session_id,
                                     std::span<const TimedFocus> frames, double max_frame_span,
                                     double max_gap) {
  if (!(max_frame_span > 0.0) || !(max_gap > 0.0))
    throw Error(ErrorCode::InvalidArgument, "max_frame_span and max_gap must be positive");
  std::vector<Timeline> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double t = frames[i].t;
    if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "frame time is not finite");
    if (i + 1 < frames.size() && !(frames[i + 1].t > t))
      throw Error(ErrorCode::InvalidArgument,
                  "frames of session \"" + session_id + "\" are not sorted by time");
    if (i == 0 || frames[i].t - frames[i - 1].t > max_gap) out.push_back({session_id, {}});

    double end = t + max_frame_span;
    if (i + 1 < frames.size()) end = t + std::min(frames[i + 1].t - t, max_frame_span);

    auto& blocks = out.back().blocks;
    if (!blocks.empty() && blocks.back().focus == frames[i].focus) {
      blocks.back().end = end;
    } else {
      blocks.push_back({frames[i].focus, t, end});
    }
  }
  return out;
}

namespace {

SpanStats span_stats(const std::vector<double>& durations) {
  SpanStats s;
  s.count = durations.size();
  if (durations.empty()) return s;
  s.min = *std::min_element(durations.begin(), durations.end());
  s.max = *std::max_element(durations.begin(), durations.end());
  for (double d : durations) s.total += d;
  s.mean = s.total / static_cast<double>(s.count);
  return s;
}

}  // namespace

AttentionReport attention_report(const Timeline& timeline, double glance_max) {
  AttentionReport r;
  r.glance_max = glance_max;
  std::vector<double> device, environment;
  for (std::size_t i = 0; i < timeline.blocks.size(); ++i) {
    const Block& b = timeline.blocks[i];
    if (b.focus == Focus::Device) {
      device.push_back(b.duration());
      if (b.duration() <= glance_max) ++r.glances;
    } else {
      environment.push_back(b.duration());
    }
    if (i > 0 && timeline.blocks[i - 1].focus != b.focus) {
      if (b.focus == Focus::Device) ++r.shifts_env_to_dev;
      else ++r.shifts_dev_to_env;
    }
  }
  r.device = span_stats(device);
  r.environment = span_stats(environment);
  if (r.device.total > r.environment.total) r.primary_focus = PrimaryFocus::Device;
  else if (r.environment.total > r.device.total) r.primary_focus = PrimaryFocus::Environment;
  else r.primary_focus = PrimaryFocus::Tie;
  return r;
}

const char* focus_name(Focus f) { return f == Focus::Device ? "device" : "environment"; }

const char* primary_focus_name(PrimaryFocus f) {
  switch (f) {
    case PrimaryFocus::Device: return "device";
    case PrimaryFocus::Environment: return "environment";
    case PrimaryFocus::Tie: return "tie";
  }
  return "tie";
}

void ConfusionMatrix::add(Label predicted, Label truth) {
  const bool p = predicted == Label::EyeContact;
  const bool t = truth == Label::EyeContact;
  if (p && t) ++tp;
  else if (!p && !t) ++tn;
  else if (p) ++fp;
  else ++fn;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::Dimension, "prediction and ground-truth lengths differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], truth[i]);
  return cm;
}

double mcc(const ConfusionMatrix& cm) {
  const auto tp = static_cast<double>(cm.tp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

std::optional<double> tnr(const ConfusionMatrix& cm) {
  if (cm.tn + cm.fp == 0) return std::nullopt;
  return static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
}

namespace {

void finalize(EvalResult& r) {
  r.mcc = mcc(r.confusion);
  r.tnr = tnr(r.confusion);
  for (auto& [_, sub] : r.per_illumination) finalize(sub);
}

template <typename PredictAt>
EvalResult score(const Dataset& test, PredictAt predict_at) {
  EvalResult r;
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& rec = test[i];
    if (!rec.ground_truth) {
      ++r.unlabeled;
      continue;
    }
    ++labeled;
    const Label predicted = rec.face_detected ? predict_at(i) : Label::NoEyeContact;
    r.confusion.add(predicted, *rec.ground_truth);
    if (rec.illumination) r.per_illumination[*rec.illumination].confusion.add(predicted, *rec.ground_truth);
  }
  if (!test.empty() && labeled == 0)
    throw Error(ErrorCode::InvalidArgument, "test set has no ground-truth labels");
  finalize(r);
  return r;
}

}  // namespace

EvalResult evaluate(const Dataset& test, const Predictor& predictor) {
  return score(test, [&](std::size_t i) { return predictor(test[i]); });
}

EvalResult evaluate_predictions(const Dataset& test, std::span<const Label> predicted) {
  if (predicted.size() != test.size())
    throw Error(ErrorCode::Dimension, "prediction count differs from the test set size");
  return score(test, [&](std::size_t i) { return predicted[i]; });
}

LoocvResult loocv_by_participant(const Dataset& dataset, const Trainer& trainer, int workers) {
  std::set<std::string> ids;
  for (const auto& r : dataset) ids.insert(r.participant_id);
  if (ids.size() < 2)
    throw Error(ErrorCode::InvalidArgument,
                "leave-one-participant-out needs at least two participants");
  const std::vector<std::string> participants(ids.begin(), ids.end());

  LoocvResult out;
  out.folds.resize(participants.size());
  parallel_for(participants.size(), workers, [&](std::size_t f) {
    FoldResult& fold = out.folds[f];
    fold.participant = participants[f];
    Dataset train, test;
    for (const auto& r : dataset) {
      (r.participant_id == fold.participant ? test : train).push_back(r);
    }
    fold.train_size = train.size();
    fold.test_size = test.size();
    try {
      const Predictor predictor = trainer(train);
      fold.result = evaluate(test, predictor);
    } catch (const Error& e) {
      fold.failed = true;
      fold.error = e.what();
    }
  });

  std::vector<double> scores;
  for (const auto& fold : out.folds) {
    if (fold.failed) ++out.failed_folds;
    else scores.push_back(fold.result.mcc);
  }
  if (!scores.empty()) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    out.mean_mcc = sum / static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - out.mean_mcc) * (s - out.mean_mcc);
    out.stddev_mcc = std::sqrt(var / static_cast<double>(scores.size()));
  }
  return out;
}

EvalResult cross_dataset_eval(const Dataset& train, const Dataset& test, const Trainer& trainer) {
  const bool any_label = std::any_of(test.begin(), test.end(),
                                     [](const FrameRecord& r) { return r.ground_truth.has_value(); });
  if (!any_label) throw Error(ErrorCode::InvalidArgument, "test set has no ground-truth labels");
  const Predictor predictor = trainer(train);
  return evaluate(test, predictor);
}

Json to_json(const ConfusionMatrix& cm) {
  Json j = Json::object();
  j["tp"] = cm.tp;
  j["tn"] = cm.tn;
  j["fp"] = cm.fp;
  j["fn"] = cm.fn;
  return j;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json eval_core(const EvalResult& r) {
  Json j = Json::object();
  j["mcc"] = r.mcc;
  j["tnr"] = optional_number(r.tnr);
  j["confusion"] = to_json(r.confusion);
  return j;
}

Json span_json(const SpanStats& s) {
  Json j = Json::object();
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["min"] = s.min;
  j["max"] = s.max;
  j["total"] = s.total;
  return j;
}

}  // namespace

Json to_json(const EvalResult& r) {
  Json j = eval_core(r);
  j["unlabeled"] = r.unlabeled;
  Json strata = Json::object();
  for (const auto& [tag, sub] : r.per_illumination) strata[tag] = eval_core(sub);
  j["per_illumination"] = std::move(strata);
  return j;
}

Json to_json(const LoocvResult& r) {
  Json j = Json::object();
  j["mcc"] = r.mean_mcc;
  j["mcc_stddev"] = r.stddev_mcc;
  ConfusionMatrix pooled;
  for (const auto& f : r.folds) {
    if (!f.failed) pooled += f.result.confusion;
  }
  j["tnr"] = optional_number(tnr(pooled));
  j["confusion"] = to_json(pooled);
  j["failed_folds"] = r.failed_folds;
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    Json fj = Json::object();
    fj["participant"] = f.participant;
    fj["train_size"] = f.train_size;
    fj["test_size"] = f.test_size;
    fj["failed"] = f.failed;
    if (f.failed) {
      fj["error"] = f.error;
    } else {
      fj["mcc"] = f.result.mcc;
      fj["tnr"] = optional_number(f.result.tnr);
      fj["confusion"] = to_json(f.result.confusion);
    }
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  return j;
}

Json to_json(const AttentionReport& r) {
  Json j = Json::object();
  j["glance_max"] = r.glance_max;
  j["glances"] = r.glances;
  j["shifts_env_to_dev"] = r.shifts_env_to_dev;
  j["shifts_dev_to_env"] = r.shifts_dev_to_env;
  j["device"] = span_json(r.device);
  j["environment"] = span_json(r.environment);
  j["primary_focus"] = primary_focus_name(r.primary_focus);
  return j;
}

Json to_json(const Timeline& t) {
  Json j = Json::object();
  j["session_id"] = t.session_id;
  Json blocks = Json::array();
  for (const auto& b : t.blocks) {
    Json bj = Json::object();
    bj["focus"] = focus_name(b.focus);
    bj["start"] = b.start;
    bj["end"] = b.end;
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  return j;
}

}  // namespace eyecontact
