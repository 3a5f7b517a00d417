#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "logloom/errors.hpp"
#include "logloom/metrics.hpp"
#include "oracles.hpp"

using namespace logloom;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> xs) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return p;
}

Eigen::MatrixXd random_rotation(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

}  // namespace

TEST_CASE("hand-computed Davies-Bouldin and Calinski-Harabasz") {
  const auto p = column({0, 2, 10, 12});
  const std::vector<int> l = {0, 0, 1, 1};
  CHECK(davies_bouldin(p, l) == 0.2);
  CHECK(calinski_harabasz(p, l) == 50.0);
  CHECK(evaluate(p, l).log_calinski_harabasz == std::log(50.0));
}

TEST_CASE("two singleton clusters") {
  const auto p = column({0, 1});
  const std::vector<int> l = {0, 1};
  CHECK(silhouette(p, l) == 0.0);
  CHECK(davies_bouldin(p, l) == 0.0);
}

TEST_CASE("tight far blobs have silhouette above 0.9") {
  const auto p = column({0, 0.1, 10, 10.1});
  const std::vector<int> l = {0, 0, 1, 1};
  // a = 0.1 everywhere; outer points have b = 10.05, inner ones b = 9.95.
  const double s = silhouette(p, l);
  CHECK(s == doctest::Approx(1.0 - 0.05 / 10.05 - 0.05 / 9.95).epsilon(1e-12));
  CHECK(s > 0.9);
}

TEST_CASE("overlapping identical positions give silhouette 0") {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(6, 2, 3.0);
  CHECK(silhouette(p, {0, 1, 0, 1, 0, 1}) == 0.0);
}

TEST_CASE("metrics match brute-force oracles on 50 random instances") {
  std::mt19937_64 rng(50);
  for (int t = 0; t < 50; ++t) {
    const auto in = oracle::random_metric_instance(rng);
    const double sc = silhouette(in.points, in.labels);
    CHECK(std::abs(sc - oracle::silhouette(in.points, in.labels, in.k)) < 1e-10);
    CHECK(sc >= -1.0);
    CHECK(sc <= 1.0);
    const double db = davies_bouldin(in.points, in.labels);
    CHECK(std::abs(db - oracle::davies_bouldin(in.points, in.labels, in.k)) < 1e-10);
    CHECK(db >= 0.0);
    const double ch = calinski_harabasz(in.points, in.labels);
    CHECK(std::abs(ch - oracle::calinski_harabasz(in.points, in.labels, in.k)) < 1e-10 * std::max(1.0, ch));
  }
}

TEST_CASE("metrics are invariant to translation and rotation") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 20; ++t) {
    const auto in = oracle::random_metric_instance(rng);
    const Eigen::MatrixXd R = random_rotation(static_cast<int>(in.points.cols()), rng);
    Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(in.points.cols(), 5.0 * (t - 10));
    const Eigen::MatrixXd moved = (in.points * R).rowwise() + shift;
    const auto a = evaluate(in.points, in.labels);
    const auto b = evaluate(moved, in.labels);
    CHECK(std::abs(a.silhouette - b.silhouette) < 1e-10);
    CHECK(std::abs(a.davies_bouldin - b.davies_bouldin) < 1e-10);
    CHECK(std::abs(a.calinski_harabasz - b.calinski_harabasz) < 1e-8 * a.calinski_harabasz);
  }
}

TEST_CASE("separating clusters lowers DB and raises CH") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd base(20, 2);
  std::vector<int> l;
  for (int i = 0; i < 20; ++i) {
    base.row(i) << g(rng), g(rng);
    l.push_back(i < 10 ? 0 : 1);
  }
  double last_db = std::numeric_limits<double>::infinity(), last_ch = 0.0;
  for (double gap : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    Eigen::MatrixXd p = base;
    p.bottomRows(10).col(0).array() += gap;
    const double db = davies_bouldin(p, l), ch = calinski_harabasz(p, l);
    CHECK(db < last_db);
    CHECK(ch > last_ch);
    last_db = db;
    last_ch = ch;
  }
}

TEST_CASE("zero within-cluster scatter makes CH infinite") {
  const auto p = column({1, 1, 5, 5});
  CHECK(std::isinf(calinski_harabasz(p, {0, 0, 1, 1})));
  const auto r = evaluate(p, {0, 0, 1, 1});
  CHECK(std::isinf(r.log_calinski_harabasz));
}

TEST_CASE("undefined cases") {
  const auto p = column({0, 1, 2});
  CHECK_THROWS_AS(silhouette(p, {0, 0, 0}), MetricUndefined);
  CHECK_THROWS_AS(davies_bouldin(p, {0, 0, 0}), MetricUndefined);
  CHECK_THROWS_AS(calinski_harabasz(p, {0, 0, 0}), MetricUndefined);
  // Centroids coincide at 1.
  CHECK_THROWS_AS(davies_bouldin(column({0, 2, 1}), {0, 0, 1}), MetricUndefined);
  CHECK_THROWS_AS(silhouette(p, {0, 1}), ContractViolation);
}

TEST_CASE("accuracy") {
  using V = Verdict;
  const std::vector<V> v = {V::kNormal, V::kAbnormal, V::kNormal, V::kAbnormal};
  const std::vector<std::optional<int>> labels = {0, 1, 0, 1};
  CHECK(accuracy(v, labels).accuracy == 1.0);
  std::vector<V> inverted;
  for (V x : v) inverted.push_back(x == V::kNormal ? V::kAbnormal : V::kNormal);
  CHECK(accuracy(inverted, labels).accuracy == 0.0);
  // Half right, half wrong on a balanced set; inversion is the complement.
  const std::vector<V> half = {V::kNormal, V::kNormal, V::kNormal, V::kNormal};
  const std::vector<V> half_inv = {V::kAbnormal, V::kAbnormal, V::kAbnormal, V::kAbnormal};
  CHECK(accuracy(half, labels).accuracy == 0.5);
  CHECK(accuracy(half, labels).accuracy + accuracy(half_inv, labels).accuracy == 1.0);

  const auto r = accuracy(v, {0, std::nullopt, 1, std::nullopt});
  CHECK(r.evaluated == 2);
  CHECK(r.skipped == 2);
  CHECK(r.accuracy == 0.5);
}
