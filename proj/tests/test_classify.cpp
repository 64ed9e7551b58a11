#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eyecontact/classify.hpp"
#include "eyecontact/error.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace eyecontact;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Blobs make_blobs(std::uint64_t seed, int n_pos, int n_neg, int dim, double sep, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Blobs b;
  b.x.resize(n_pos + n_neg, dim);
  for (int i = 0; i < n_pos + n_neg; ++i) {
    const double shift = i < n_pos ? sep / 2 : -sep / 2;
    for (int d = 0; d < dim; ++d) b.x(i, d) = n(rng) + (d == 0 ? shift : 0.0);
    b.y.push_back(i < n_pos ? 1 : -1);
  }
  return b;
}

double accuracy(const SvmModel& m, const Blobs& b) {
  int ok = 0;
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    ok += svm_predict(m, b.x.row(i).transpose()).first == b.y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(ok) / static_cast<double>(b.x.rows());
}

}  // namespace

TEST_CASE("PCA on axis-aligned variances 9 and 1") {
  // Columns with exact sample variance 9 and 1 built from +-3 and +-1.
  Eigen::MatrixXd x(4, 2);
  x << 3, 1, -3, -1, 3, -1, -3, 1;
  const PcaModel m = pca_fit(x, 0.95);
  CHECK(m.output_dim() == 2);
  REQUIRE(m.explained_variance.size() == 2);
  CHECK(m.explained_variance(0) / m.explained_variance(1) == doctest::Approx(9.0));
  CHECK(std::abs(std::abs(m.components(0, 0)) - 1.0) < 1e-12);

  const PcaModel m9 = pca_fit(x, 0.9);
  CHECK(m9.output_dim() == 1);
}

TEST_CASE("PCA keeps one component for one-dimensional data") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(100, 5);
  const Eigen::VectorXd dir = Eigen::VectorXd::LinSpaced(5, 1, 5).normalized();
  for (int i = 0; i < 100; ++i) x.row(i) = (n(rng) * dir).transpose();
  const PcaModel m = pca_fit(x, 0.95);
  CHECK(m.output_dim() == 1);
  CHECK(std::abs(std::abs(m.components.row(0).dot(dir.transpose())) - 1.0) < 1e-9);
}

TEST_CASE("PCA with retain 1 keeps every informative component") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(50, 6);
  for (int i = 0; i < 50; ++i)
    for (int d = 0; d < 6; ++d) x(i, d) = n(rng);
  const PcaModel m = pca_fit(x, 1.0);
  CHECK(m.output_dim() == 6);
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index k = 1; k < m.explained_variance.size(); ++k)
    CHECK(m.explained_variance(k) <= m.explained_variance(k - 1));
}

TEST_CASE("PCA projection centres and rotates") {
  Eigen::MatrixXd x(4, 2);
  x << 13, 1, 7, -1, 13, -1, 7, 1;
  const PcaModel m = pca_fit(x, 1.0);
  CHECK(m.mean(0) == doctest::Approx(10.0));
  CHECK(m.mean(1) == doctest::Approx(0.0));
  const Eigen::VectorXd p = pca_project(m, Eigen::Vector2d(10, 0));
  CHECK(p.norm() < 1e-12);
  const Eigen::MatrixXd rows = pca_project_rows(m, x);
  CHECK(rows.rows() == 4);
  CHECK((rows.row(0).transpose() - pca_project(m, x.row(0).transpose())).norm() < 1e-12);
  // Projected sample variance matches the explained variance.
  for (Eigen::Index k = 0; k < rows.cols(); ++k) {
    const double var = rows.col(k).squaredNorm() / static_cast<double>(rows.rows() - 1);
    CHECK(var == doctest::Approx(m.explained_variance(k)));
  }
  CHECK_THROWS_AS(pca_project(m, Eigen::Vector3d(1, 2, 3)), Error);
}

TEST_CASE("PCA preconditions") {
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(1, 3)), Error);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(5, 3)), Error);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(5, 3), 0.0), Error);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(5, 3), 1.5), Error);
}

TEST_CASE("SVM separates well-separated blobs") {
  const Blobs b = make_blobs(3, 100, 100, 4, 8.0);
  SvmTrainInfo info;
  const SvmModel m = svm_train(b.x, b.y, {}, &info);
  CHECK(accuracy(m, b) == doctest::Approx(1.0));
  CHECK(info.epochs > 0);
  CHECK(m.weights(0) > 0.0);
  CHECK(info.primal >= info.dual - 1e-9);
}

TEST_CASE("balanced weighting favours the minority class") {
  const Blobs b = make_blobs(4, 270, 30, 2, 1.5);
  SvmOptions none;
  none.weighting = ClassWeighting::None;
  const SvmModel plain = svm_train(b.x, b.y, none);
  const SvmModel balanced = svm_train(b.x, b.y, {});
  auto negative_recall = [&](const SvmModel& m) {
    int ok = 0;
    for (int i = 270; i < 300; ++i) ok += svm_predict(m, b.x.row(i).transpose()).first == -1;
    return ok;
  };
  CHECK(negative_recall(balanced) > negative_recall(plain));
  CHECK(balanced.weight_neg > balanced.weight_pos);

  const auto [wp, wn] = class_weights({}, b.y);
  CHECK(wp == doctest::Approx(300.0 / (2 * 270)));
  CHECK(wn == doctest::Approx(300.0 / (2 * 30)));

  SvmOptions custom;
  custom.weighting = ClassWeighting::Custom;
  custom.weight_pos = 2.0;
  custom.weight_neg = 0.5;
  const auto [cp, cn] = class_weights(custom, b.y);
  CHECK(cp == 2.0);
  CHECK(cn == 0.5);
}

TEST_CASE("SVM preconditions") {
  const Blobs b = make_blobs(5, 10, 10, 2, 4.0);
  std::vector<int> single(20, 1);
  try {
    svm_train(b.x, single);
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }
  std::vector<int> bad = b.y;
  bad[0] = 0;
  CHECK_THROWS_AS(svm_train(b.x, bad), Error);
  std::vector<int> short_labels(b.y.begin(), b.y.begin() + 5);
  CHECK_THROWS_AS(svm_train(b.x, short_labels), Error);
  SvmOptions zero_c;
  zero_c.c = 0.0;
  CHECK_THROWS_AS(svm_train(b.x, b.y, zero_c), Error);
}

TEST_CASE("svm_predict returns sign and score") {
  SvmModel m;
  m.weights = Eigen::Vector2d(1, 0);
  m.bias = 0.0;
  const auto [label, score] = svm_predict(m, Eigen::Vector2d(2, 5));
  CHECK(label == 1);
  CHECK(score == doctest::Approx(2.0));
  CHECK(svm_predict(m, Eigen::Vector2d(-2, 5)).first == -1);
  CHECK(svm_predict(m, Eigen::Vector2d(0, 5)).first == 1);
  m.bias = -1.0;
  CHECK(svm_predict(m, Eigen::Vector2d(1, 0)).second == doctest::Approx(0.0));
  CHECK(svm_predict(m, Eigen::Vector2d(1, 0)).first == 1);
  CHECK_THROWS_AS(svm_predict(m, Eigen::Vector3d(1, 0, 0)), Error);
}

TEST_CASE("training never does worse than the zero model") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Blobs b = make_blobs(seed, 60, 40, 3, 1.0);
    const SvmModel m = svm_train(b.x, b.y);
    SvmModel zero = m;
    zero.weights.setZero();
    zero.bias = 0.0;
    CHECK(svm_objective(m, b.x, b.y) <= svm_objective(zero, b.x, b.y) + 1e-9);
  }
}

TEST_CASE("scaling the features by s matches scaling C by 1/s^2") {
  const Blobs b = make_blobs(21, 50, 50, 3, 2.0);
  const double s = 10.0;
  SvmOptions o;
  o.tol = 1e-10;
  o.max_epochs = 100000;
  const SvmModel m = svm_train(b.x, b.y, o);
  SvmOptions os = o;
  os.c = o.c / (s * s);
  const Eigen::MatrixXd xs = s * b.x;
  const SvmModel ms = svm_train(xs, b.y, os);
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    const double a = m.decision(b.x.row(i).transpose());
    const double c = ms.decision(xs.row(i).transpose());
    CHECK(c == doctest::Approx(a).epsilon(1e-3));
  }
}
