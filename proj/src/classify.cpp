#include "capgest/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "capgest/error.hpp"

namespace capgest {

std::vector<Neighbor> k_nearest(const Eigen::MatrixXd& reference, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                std::size_t k) {
  if (reference.rows() == 0) throw Error(ErrorKind::EmptyModel, "no reference points");
  if (query.size() != reference.cols())
    throw Error(ErrorKind::DimensionMismatch, "query has " + std::to_string(query.size()) + " features, model " +
                                                  std::to_string(reference.cols()));
  k = std::min<std::size_t>(k, static_cast<std::size_t>(reference.rows()));
  if (k == 0) return {};

  // Bounded insertion into a sorted buffer; (distance, index) order is total.
  std::vector<Neighbor> best;
  best.reserve(k + 1);
  auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    const double d2 = (reference.row(i) - query).squaredNorm();
    if (best.size() == k && !(d2 < best.back().distance)) continue;
    Neighbor n{i, d2};
    best.insert(std::upper_bound(best.begin(), best.end(), n, less), n);
    if (best.size() > k) best.pop_back();
  }
  for (auto& n : best) n.distance = std::sqrt(n.distance);
  return best;
}

KnnModel knn_fit(Eigen::MatrixXd x, std::vector<int> y, std::size_t k) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyModel, "knn_fit: no training points");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error(ErrorKind::DimensionMismatch, "knn_fit: label count");
  if (k < 1 || k > static_cast<std::size_t>(x.rows()))
    throw Error(ErrorKind::ParamOutOfRange, "knn_fit: K must lie in [1, n_reference]");
  return {std::move(x), std::move(y), k};
}

int knn_predict(const KnnModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const auto neighbors = k_nearest(model.reference, x, model.k);
  // class -> (votes, summed distance)
  std::map<int, std::pair<std::size_t, double>> tally;
  for (const auto& n : neighbors) {
    auto& t = tally[model.labels[static_cast<std::size_t>(n.index)]];
    ++t.first;
    t.second += n.distance;
  }
  int best = tally.begin()->first;
  auto best_t = tally.begin()->second;
  for (const auto& [label, t] : tally) {
    if (t.first > best_t.first || (t.first == best_t.first && t.second < best_t.second)) {
      best = label;
      best_t = t;
    }
  }
  return best;
}

KnnRegressor knn_regressor_fit(Eigen::MatrixXd x, std::vector<double> y, std::size_t k) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyModel, "knn_regressor_fit: no training points");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorKind::DimensionMismatch, "knn_regressor_fit: target count");
  if (k < 1 || k > static_cast<std::size_t>(x.rows()))
    throw Error(ErrorKind::ParamOutOfRange, "knn_regressor_fit: K must lie in [1, n_reference]");
  return {std::move(x), std::move(y), k};
}

double knn_regress(const KnnRegressor& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const auto neighbors = k_nearest(model.reference, x, model.k);
  double sum = 0.0;
  for (const auto& n : neighbors) sum += model.targets[static_cast<std::size_t>(n.index)];
  return sum / static_cast<double>(neighbors.size());
}

LdaModel lda_fit(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error(ErrorKind::DimensionMismatch, "lda_fit: label count");
  const Eigen::Index d = x.cols();
  Eigen::RowVectorXd sum0 = Eigen::RowVectorXd::Zero(d), sum1 = Eigen::RowVectorXd::Zero(d);
  std::size_t n0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (y[static_cast<std::size_t>(i)] == 1) {
      sum1 += x.row(i);
      ++n1;
    } else {
      sum0 += x.row(i);
      ++n0;
    }
  }
  if (n0 == 0 || n1 == 0) throw Error(ErrorKind::SingleClass, "lda_fit needs both classes");

  LdaModel m;
  m.mean0 = sum0 / static_cast<double>(n0);
  m.mean1 = sum1 / static_cast<double>(n1);
  m.within_scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd centered(x.rows(), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    centered.row(i) = x.row(i) - (y[static_cast<std::size_t>(i)] == 1 ? m.mean1 : m.mean0);
  m.within_scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  m.within_scatter = m.within_scatter.selfadjointView<Eigen::Lower>();
  const Eigen::RowVectorXd delta = m.mean1 - m.mean0;
  m.between_scatter = delta.transpose() * delta;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(m.within_scatter);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12 ||
                        !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff());
  Eigen::VectorXd w;
  if (singular) {
    const double trace = m.within_scatter.trace();
    m.ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(d) : 1e-6;
    Eigen::MatrixXd reg = m.within_scatter;
    reg.diagonal().array() += m.ridge;
    w = reg.ldlt().solve(delta.transpose());
  } else {
    w = ldlt.solve(delta.transpose());
  }
  const double norm = w.norm();
  if (!(norm > 0.0) || !w.allFinite()) throw Error(ErrorKind::DegenerateInput, "lda_fit: class means coincide");
  m.weights = (w / norm).transpose();
  m.bias = -0.5 * m.weights.dot(m.mean0 + m.mean1);
  return m;
}

double lda_score(const LdaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != model.weights.size()) throw Error(ErrorKind::DimensionMismatch, "lda_score: feature count");
  return model.weights.dot(x) + model.bias;
}

CentroidModel centroid_fit(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyModel, "centroid_fit: no training points");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorKind::DimensionMismatch, "centroid_fit: label count");
  std::set<int> classes(y.begin(), y.end());
  CentroidModel m;
  m.classes.assign(classes.begin(), classes.end());
  m.centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.classes.size()), x.cols());
  std::vector<std::size_t> counts(m.classes.size(), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto c = static_cast<std::size_t>(
        std::lower_bound(m.classes.begin(), m.classes.end(), y[static_cast<std::size_t>(i)]) - m.classes.begin());
    m.centroids.row(static_cast<Eigen::Index>(c)) += x.row(i);
    ++counts[c];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    m.centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  return m;
}

namespace {

double centroid_distance(const CentroidModel& m, std::size_t c, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return (m.centroids.row(static_cast<Eigen::Index>(c)) - x).norm();
}

void check_query(const CentroidModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (m.classes.empty()) throw Error(ErrorKind::EmptyModel, "centroid model has no classes");
  if (x.size() != m.centroids.cols()) throw Error(ErrorKind::DimensionMismatch, "centroid query feature count");
}

}  // namespace

int centroid_predict(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  check_query(model, x);
  std::size_t best = 0;
  double best_d = centroid_distance(model, 0, x);
  for (std::size_t c = 1; c < model.classes.size(); ++c) {
    const double d = centroid_distance(model, c, x);
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return model.classes[best];
}

int centroid_predict_among(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                           const std::vector<int>& allowed) {
  check_query(model, x);
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    if (std::find(allowed.begin(), allowed.end(), model.classes[c]) == allowed.end()) continue;
    const double d = centroid_distance(model, c, x);
    if (!best || d < best_d) {
      best = model.classes[c];
      best_d = d;
    }
  }
  if (!best) throw Error(ErrorKind::EmptyModel, "none of the allowed classes is in the model");
  return *best;
}

double centroid_score(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x, int positive_class) {
  check_query(model, x);
  auto it = std::lower_bound(model.classes.begin(), model.classes.end(), positive_class);
  if (it == model.classes.end() || *it != positive_class)
    throw Error(ErrorKind::EmptyModel, "positive class " + std::to_string(positive_class) + " not in model");
  if (model.classes.size() < 2) throw Error(ErrorKind::SingleClass, "centroid_score needs a negative class");
  const auto pos = static_cast<std::size_t>(it - model.classes.begin());
  const double d_pos = centroid_distance(model, pos, x);
  double d_neg = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.classes.size(); ++c)
    if (c != pos) d_neg = std::min(d_neg, centroid_distance(model, c, x));
  const double total = d_neg + d_pos;
  if (total == 0.0) return 0.5;
  return d_neg / total;
}

}  // namespace capgest
