#pragma once

#include <Eigen/Core>

#include <span>
#include <utility>

namespace eyecontact {

struct PcaModel {
  Eigen::VectorXd mean;                // D
  Eigen::MatrixXd components;          // k x D, orthonormal rows
  Eigen::VectorXd explained_variance;  // k, non-increasing

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.rows(); }
};

/// Keeps the smallest number of leading components whose cumulative share of
/// the sample variance reaches `retain`. Rows of `features` are samples.
PcaModel pca_fit(const Eigen::MatrixXd& features, double retain = 0.95);

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::MatrixXd pca_project_rows(const PcaModel& model, const Eigen::MatrixXd& features);

enum class ClassWeighting { None, Balanced, Custom };

struct SvmOptions {
  double c = 1.0;
  ClassWeighting weighting = ClassWeighting::Balanced;
  double weight_pos = 1.0;  // Custom only
  double weight_neg = 1.0;  // Custom only
  int max_epochs = 1000;
  double tol = 1e-6;
  unsigned long long seed = 0x5eed;
};

/// Linear SVM. The bias is learned as the weight of a constant feature whose
/// value is `bias_scale` (the mean training-sample norm), so the objective is
///   1/2 (|w|^2 + (b / bias_scale)^2) + C * sum_i c_i * max(0, 1 - y_i (w.x_i + b))
/// with c_i the class weight of sample i.
struct SvmModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double bias_scale = 1.0;
  double c = 1.0;
  double weight_pos = 1.0;
  double weight_neg = 1.0;

  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct SvmTrainInfo {
  int epochs = 0;
  double primal = 0.0;
  double dual = 0.0;
};

/// Dual coordinate descent on the weighted hinge loss. `labels` holds +1/-1.
/// Stops once the dual objective changes by less than tol (relative) over an
/// epoch; throws NotConverged with the final duality gap otherwise.
SvmModel svm_train(const Eigen::MatrixXd& samples, std::span<const int> labels,
                   const SvmOptions& options = {}, SvmTrainInfo* info = nullptr);

/// (label, score) with score = w.x + b; a zero score counts as positive.
std::pair<int, double> svm_predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Primal objective of `model` on the given data.
double svm_objective(const SvmModel& model, const Eigen::MatrixXd& samples,
                     std::span<const int> labels);

/// Class weights (positive, negative) the options imply for this label set.
std::pair<double, double> class_weights(const SvmOptions& options, std::span<const int> labels);

}  // namespace eyecontact
