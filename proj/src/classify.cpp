#include "eyecontact/classify.hpp"

#include "eyecontact/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace eyecontact {

PcaModel pca_fit(const Eigen::MatrixXd& features, double retain) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs at least two samples");
  if (d < 1) throw Error(ErrorCode::Dimension, "PCA needs at least one feature");
  if (!(retain > 0.0 && retain <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "PCA retain fraction must lie in (0, 1]");
  if (!features.allFinite()) throw Error(ErrorCode::Numeric, "PCA input is not finite");

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::VectorXd variance = sv.array().square() / static_cast<double>(n - 1);
  const double total = centered.squaredNorm() / static_cast<double>(n - 1);
  if (!(total > 0.0) || !(sv.size() > 0 && sv(0) > 0.0))
    throw Error(ErrorCode::Numeric, "PCA input has zero variance");

  const double floor = sv(0) * std::max<double>(n, d) * 1e-13;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > floor) ++rank;

  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < rank) {
    cumulative += variance(k);
    ++k;
    if (cumulative / total >= retain - 1e-12) break;
  }

  model.components = svd.matrixV().leftCols(k).transpose();
  model.explained_variance = variance.head(k);
  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    model.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (model.components(i, arg) < 0) model.components.row(i) *= -1.0;
  }
  return model;
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.input_dim())
    throw Error(ErrorCode::Dimension, "PCA input has dimension " + std::to_string(x.size()) +
                                          ", model expects " +
                                          std::to_string(model.input_dim()));
  return model.components * (x - model.mean);
}

Eigen::MatrixXd pca_project_rows(const PcaModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.input_dim())
    throw Error(ErrorCode::Dimension, "PCA input dimension mismatch");
  return (features.rowwise() - model.mean.transpose()) * model.components.transpose();
}

double SvmModel::decision(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != weights.size())
    throw Error(ErrorCode::Dimension, "SVM input has dimension " + std::to_string(x.size()) +
                                          ", model expects " + std::to_string(weights.size()));
  return weights.dot(x) + bias;
}

std::pair<int, double> svm_predict(const SvmModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double score = model.decision(x);
  return {score >= 0.0 ? 1 : -1, score};
}

std::pair<double, double> class_weights(const SvmOptions& options, std::span<const int> labels) {
  switch (options.weighting) {
    case ClassWeighting::None:
      return {1.0, 1.0};
    case ClassWeighting::Custom:
      return {options.weight_pos, options.weight_neg};
    case ClassWeighting::Balanced: {
      const auto n = static_cast<double>(labels.size());
      const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
      const double neg = n - pos;
      return {pos > 0 ? n / (2.0 * pos) : 1.0, neg > 0 ? n / (2.0 * neg) : 1.0};
    }
  }
  return {1.0, 1.0};
}

double svm_objective(const SvmModel& model, const Eigen::MatrixXd& samples,
                     std::span<const int> labels) {
  const double b = model.bias / model.bias_scale;
  double value = 0.5 * (model.weights.squaredNorm() + b * b);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double margin = y * (samples.row(i).dot(model.weights) + model.bias);
    const double cw = y > 0 ? model.weight_pos : model.weight_neg;
    value += model.c * cw * std::max(0.0, 1.0 - margin);
  }
  return value;
}

SvmModel svm_train(const Eigen::MatrixXd& samples, std::span<const int> labels,
                   const SvmOptions& options, SvmTrainInfo* info) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index k = samples.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error(ErrorCode::Dimension, "SVM: sample and label counts differ");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "SVM needs at least two samples");
  if (!(options.c > 0.0)) throw Error(ErrorCode::InvalidArgument, "SVM: C must be positive");
  if (!samples.allFinite()) throw Error(ErrorCode::Numeric, "SVM input is not finite");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw Error(ErrorCode::InvalidArgument, "SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg)
    throw Error(ErrorCode::SingleClass, "SVM training data contains a single class");

  const auto [wp, wn] = class_weights(options, labels);
  if (!(wp > 0.0) || !(wn > 0.0))
    throw Error(ErrorCode::InvalidArgument, "SVM class weights must be positive");

  SvmModel model;
  model.c = options.c;
  model.weight_pos = wp;
  model.weight_neg = wn;
  model.bias_scale = samples.rowwise().norm().mean();
  if (!(model.bias_scale > 0.0)) model.bias_scale = 1.0;
  const double bscale = model.bias_scale;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  double wb = 0.0;  // weight of the constant feature
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> upper(static_cast<std::size_t>(n));
  std::vector<double> qii(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    upper[ui] = options.c * (labels[ui] > 0 ? wp : wn);
    qii[ui] = samples.row(i).squaredNorm() + bscale * bscale;
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);

  auto dual_value = [&] {
    double sum = 0.0;
    for (double a : alpha) sum += a;
    return sum - 0.5 * (w.squaredNorm() + wb * wb);
  };

  double dual_prev = 0.0;
  bool converged = false;
  int epoch = 0;
  for (; epoch < options.max_epochs && !converged; ++epoch) {
    // Fisher-Yates with an explicit draw so the order is library-independent.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    bool moved = false;
    for (std::size_t ui : order) {
      const auto i = static_cast<Eigen::Index>(ui);
      const double y = labels[ui];
      const double g = y * (samples.row(i).dot(w) + wb * bscale) - 1.0;
      double pg = g;
      if (alpha[ui] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[ui] >= upper[ui]) pg = std::max(g, 0.0);
      if (std::abs(pg) <= 1e-14) continue;
      const double old = alpha[ui];
      alpha[ui] = std::clamp(old - g / qii[ui], 0.0, upper[ui]);
      const double delta = (alpha[ui] - old) * y;
      if (delta != 0.0) {
        w += delta * samples.row(i).transpose();
        wb += delta * bscale;
        moved = true;
      }
    }
    const double dual = dual_value();
    if (!moved || std::abs(dual - dual_prev) <= options.tol * std::max(1.0, std::abs(dual)))
      converged = true;
    dual_prev = dual;
  }

  model.weights = w;
  model.bias = wb * bscale;
  const double primal = svm_objective(model, samples, labels);
  if (info) {
    info->epochs = epoch;
    info->primal = primal;
    info->dual = dual_prev;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "SVM did not converge after " << options.max_epochs
        << " epochs; duality gap " << (primal - dual_prev);
    throw Error(ErrorCode::NotConverged, msg.str());
  }
  return model;
}

}  // namespace eyecontact
