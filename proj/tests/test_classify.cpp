#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "capgest/classify.hpp"
#include "helpers.hpp"

using namespace capgest;

namespace {

int knn_oracle(const Eigen::MatrixXd& ref, const std::vector<int>& y, const Eigen::RowVectorXd& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (Eigen::Index i = 0; i < ref.rows(); ++i) all.emplace_back((ref.row(i) - q).norm(), static_cast<std::size_t>(i));
  std::sort(all.begin(), all.end());
  std::map<int, std::pair<int, double>> votes;
  for (std::size_t i = 0; i < k; ++i) {
    auto& v = votes[y[all[i].second]];
    v.first += 1;
    v.second += all[i].first;
  }
  int best = -1;
  std::pair<int, double> best_v{-1, 0.0};
  for (const auto& [label, v] : votes)
    if (v.first > best_v.first || (v.first == best_v.first && v.second < best_v.second)) {
      best = label;
      best_v = v;
    }
  return best;
}

double angle_deg(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::min(1.0, c)) * 180.0 / std::acos(-1.0);
}

}  // namespace

TEST_CASE("knn basics") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5;
  const auto m1 = knn_fit(x, {0, 1, 2, 3}, 1);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(knn_predict(m1, x.row(i)) == static_cast<int>(i));

  Eigen::MatrixXd y(3, 1);
  y << 0.0, 0.1, 0.2;
  CHECK(knn_predict(knn_fit(y, {7, 7, 3}, 3), Eigen::RowVectorXd::Constant(1, 0.15)) == 7);

  CHECK(testutil::throws_kind(ErrorKind::EmptyModel, [] { knn_fit(Eigen::MatrixXd(0, 2), {}, 1); }));
  CHECK(testutil::throws_kind(ErrorKind::ParamOutOfRange, [&] { knn_fit(x, {0, 1, 2, 3}, 5); }));
}

TEST_CASE("knn ties fall back to summed distance, then label order") {
  Eigen::MatrixXd x(4, 1);
  x << -1.0, 3.0, 1.5, -2.0;
  // Query 0: neighbours at 1.0 (label 2), 1.5 (label 1), 2.0 (label 1), 3.0 (label 2).
  const auto m = knn_fit(x, {2, 2, 1, 1}, 4);
  CHECK(knn_predict(m, Eigen::RowVectorXd::Zero(1)) == 1);

  Eigen::MatrixXd s(2, 1);
  s << -1.0, 1.0;
  CHECK(knn_predict(knn_fit(s, {4, 3}, 2), Eigen::RowVectorXd::Zero(1)) == 3);
}

TEST_CASE("knn agrees with a brute-force oracle") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd ref = testutil::gaussian(200, 3, rng);
  std::vector<int> y(200);
  std::uniform_int_distribution<int> lab(0, 4);
  for (auto& v : y) v = lab(rng);
  const auto m = knn_fit(ref, y, 5);
  const Eigen::MatrixXd q = testutil::gaussian(50, 3, rng);
  for (Eigen::Index i = 0; i < q.rows(); ++i) CHECK(knn_predict(m, q.row(i)) == knn_oracle(ref, y, q.row(i), 5));
}

TEST_CASE("k_nearest returns sorted neighbours") {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd ref = testutil::gaussian(100, 4, rng);
  const auto nn = k_nearest(ref, ref.row(3), 10);
  REQUIRE(nn.size() == 10);
  CHECK(nn[0].index == 3);
  CHECK(nn[0].distance == 0.0);
  for (std::size_t i = 1; i < nn.size(); ++i) CHECK(nn[i].distance >= nn[i - 1].distance);
  CHECK(k_nearest(ref, ref.row(0), 0).empty());
}

TEST_CASE("knn regression") {
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 2, 3, 4;
  const std::vector<double> y = {0, 1, 2, 3, 4};
  CHECK(knn_regress(knn_regressor_fit(x, y, 1), Eigen::RowVectorXd::Constant(1, 2.9)) == 3.0);
  CHECK(knn_regress(knn_regressor_fit(x, y, 2), Eigen::RowVectorXd::Constant(1, 2.5)) == 2.5);
  CHECK(knn_regress(knn_regressor_fit(x, std::vector<double>(5, 1.25), 5), Eigen::RowVectorXd::Constant(1, 9)) == 1.25);
  CHECK(testutil::throws_kind(ErrorKind::EmptyModel, [] { knn_regressor_fit(Eigen::MatrixXd(0, 1), {}, 1); }));
}

TEST_CASE("lda direction matches the closed-form Fisher direction") {
  std::mt19937_64 rng(14);
  const Eigen::Index n = 5000;
  Eigen::MatrixXd x = testutil::gaussian(2 * n, 2, rng);
  std::vector<int> y(2 * n, 0);
  for (Eigen::Index i = n; i < 2 * n; ++i) {
    x(i, 0) += 1.0;
    y[static_cast<std::size_t>(i)] = 1;
  }
  const auto m = lda_fit(x, y);
  Eigen::RowVectorXd expected(2);
  expected << 1.0, 0.0;
  CHECK(angle_deg(m.weights, expected) < 5.0);
  CHECK(m.weights.norm() == doctest::Approx(1.0));
  CHECK(lda_score(m, m.mean1) > 0.0);
  CHECK(lda_score(m, m.mean0) < 0.0);
  CHECK(m.ridge == 0.0);
}

TEST_CASE("lda decisions are invariant to scaling and shifting") {
  std::mt19937_64 rng(15);
  Eigen::MatrixXd x = testutil::gaussian(300, 3, rng);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = i % 2;
    if (y[i]) x.row(static_cast<Eigen::Index>(i)) += Eigen::RowVector3d(1.0, -0.5, 0.3);
  }
  const Eigen::MatrixXd q = testutil::gaussian(100, 3, rng);
  const auto base = lda_fit(x, y);
  const auto scaled = lda_fit(3.0 * x, y);
  const Eigen::RowVector3d shift(4.0, -2.0, 9.0);
  const auto shifted = lda_fit(x.rowwise() + shift, y);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double s = lda_score(base, q.row(i));
    CHECK((s > 0) == (lda_score(scaled, 3.0 * q.row(i)) > 0));
    CHECK((s > 0) == (lda_score(shifted, q.row(i) + shift) > 0));
  }
}

TEST_CASE("lda separates linearly separable data at some threshold") {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd x = testutil::uniform(200, 2, rng);
  std::vector<int> y(200);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    y[static_cast<std::size_t>(i)] = x(i, 0) + x(i, 1) > 1.0;
    if (y[static_cast<std::size_t>(i)]) x.row(i) += Eigen::RowVector2d(0.3, 0.3);
  }
  const auto m = lda_fit(x, y);
  double min_pos = 1e300, max_neg = -1e300;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    (y[static_cast<std::size_t>(i)] ? min_pos : max_neg) =
        y[static_cast<std::size_t>(i)] ? std::min(min_pos, lda_score(m, x.row(i))) : std::max(max_neg, lda_score(m, x.row(i)));
  CHECK(min_pos > max_neg);
}

TEST_CASE("lda regularizes singular scatter and rejects a single class") {
  Eigen::MatrixXd x(6, 3);
  x << 0, 0, 0, 1, 0, 0, 2, 0, 0, 0, 1, 0, 1, 1, 0, 2, 1, 0;
  const auto m = lda_fit(x, {0, 0, 0, 1, 1, 1});
  CHECK(m.ridge > 0.0);
  CHECK(m.weights.allFinite());
  CHECK(lda_score(m, m.mean1) > lda_score(m, m.mean0));
  CHECK(testutil::throws_kind(ErrorKind::SingleClass, [&] { lda_fit(x, {1, 1, 1, 1, 1, 1}); }));
}

TEST_CASE("centroid prediction and score") {
  Eigen::MatrixXd x(4, 1);
  x << -1, 1, 9, 11;
  const auto m = centroid_fit(x, {0, 0, 1, 1});
  CHECK(centroid_score(m, Eigen::RowVectorXd::Constant(1, 2.0), 1) == doctest::Approx(0.2));
  CHECK(centroid_score(m, Eigen::RowVectorXd::Constant(1, 10.0), 1) == 1.0);
  CHECK(centroid_score(m, Eigen::RowVectorXd::Constant(1, 5.0), 1) == 0.5);
  CHECK(centroid_predict(m, Eigen::RowVectorXd::Constant(1, 5.0)) == 0);
  CHECK(centroid_predict(m, Eigen::RowVectorXd::Constant(1, 7.0)) == 1);
  CHECK(centroid_predict_among(m, Eigen::RowVectorXd::Constant(1, 0.0), {1}) == 1);

  const auto same = centroid_fit(Eigen::MatrixXd::Zero(2, 1), {0, 1});
  CHECK(centroid_score(same, Eigen::RowVectorXd::Zero(1), 1) == 0.5);
  CHECK(testutil::throws_kind(ErrorKind::EmptyModel, [] { centroid_fit(Eigen::MatrixXd(0, 1), {}); }));
}

TEST_CASE("centroid score boundary matches prediction") {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd x = testutil::gaussian(100, 3, rng);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = i < 50 ? 0 : 1;
  const auto m = centroid_fit(x, y);
  const Eigen::MatrixXd q = testutil::gaussian(1000, 3, rng, 2.0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double s = centroid_score(m, q.row(i), 1);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK((centroid_predict(m, q.row(i)) == 1) == (s > 0.5));
    // Exact ties go to the lower class, so for class 0 the boundary is inclusive.
    CHECK((centroid_predict(m, q.row(i)) == 0) == (centroid_score(m, q.row(i), 0) >= 0.5));
  }
}
