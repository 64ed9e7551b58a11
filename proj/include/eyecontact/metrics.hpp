#pragma once

#include "eyecontact/records.hpp"
#include "eyecontact/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eyecontact {

// Attention timeline

enum class Focus { Device, Environment };

struct Block {
  Focus focus = Focus::Device;
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  bool operator==(const Block&) const = default;
};

/// Maximal alternating attention blocks of one session segment.
struct Timeline {
  std::string session_id;
  std::vector<Block> blocks;

  /// Sum of block durations.
  double duration() const;
};

struct TimedFocus {
  double t = 0.0;
  Focus focus = Focus::Device;
};

/// Each frame covers [t, t + min(gap to next frame, max_frame_span)). A gap
/// longer than max_gap starts a new timeline. Runs of equal focus merge into
/// one block, including across uncovered stretches shorter than max_gap.
std::vector<Timeline> build_timeline(const std::string& session_id,
                                     std::span<const TimedFocus> frames,
                                     double max_frame_span = 1.0, double max_gap = 30.0);

struct SpanStats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double total = 0.0;
};

enum class PrimaryFocus { Device, Environment, Tie };

struct AttentionReport {
  double glance_max = 1.5;
  std::size_t glances = 0;
  std::size_t shifts_env_to_dev = 0;
  std::size_t shifts_dev_to_env = 0;
  SpanStats device;
  SpanStats environment;
  PrimaryFocus primary_focus = PrimaryFocus::Tie;
};

/// A glance is a device block no longer than glance_max seconds.
AttentionReport attention_report(const Timeline& timeline, double glance_max = 1.5);

const char* focus_name(Focus f);
const char* primary_focus_name(PrimaryFocus f);

// Classification scores; EyeContact is the positive class.

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  void add(Label predicted, Label truth);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const ConfusionMatrix& cm);

/// tn / (tn + fp); empty when there are no negatives.
std::optional<double> tnr(const ConfusionMatrix& cm);

// Evaluation protocols

using Predictor = std::function<Label(const FrameRecord&)>;
using Trainer = std::function<Predictor(const Dataset& training)>;

struct EvalResult {
  ConfusionMatrix confusion;
  double mcc = 0.0;
  std::optional<double> tnr;
  std::size_t unlabeled = 0;  // test frames skipped for lack of ground truth
  std::map<std::string, EvalResult> per_illumination;
};

/// Scores `predictor` on every labeled frame; frames without a face count as
/// NoEyeContact without consulting the predictor.
EvalResult evaluate(const Dataset& test, const Predictor& predictor);

/// Scores precomputed predictions aligned with `test`.
EvalResult evaluate_predictions(const Dataset& test, std::span<const Label> predicted);

struct FoldResult {
  std::string participant;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  bool failed = false;
  std::string error;
  EvalResult result;
};

struct LoocvResult {
  std::vector<FoldResult> folds;
  double mean_mcc = 0.0;
  double stddev_mcc = 0.0;  // population standard deviation over successful folds
  std::size_t failed_folds = 0;
};

/// One fold per participant (sorted by id). Folds whose trainer throws are
/// marked failed and left out of the mean.
LoocvResult loocv_by_participant(const Dataset& dataset, const Trainer& trainer, int workers = 1);

/// Trains on all of `train` and scores on `test`.
EvalResult cross_dataset_eval(const Dataset& train, const Dataset& test, const Trainer& trainer);

Json to_json(const ConfusionMatrix& cm);
Json to_json(const EvalResult& r);
Json to_json(const LoocvResult& r);
Json to_json(const AttentionReport& r);
Json to_json(const Timeline& t);

}  // namespace eyecontact
