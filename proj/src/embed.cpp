#include "capgest/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/SVD>

#include "capgest/error.hpp"

namespace capgest {

namespace {

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorKind::DegenerateInput, std::string(what) + ": input contains non-finite values");
}

// Flip each column so its largest-magnitude coordinate is positive.
void fix_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index arg = 0;
    columns.col(j).cwiseAbs().maxCoeff(&arg);
    if (columns(arg, j) < 0.0) columns.col(j) *= -1.0;
  }
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index n_components, bool centered) {
  require_finite(x, "pca_fit");
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorKind::TooFewSamples, "pca_fit: empty matrix");
  if (n_components < 1 || n_components > std::min(x.rows(), x.cols()))
    throw Error(ErrorKind::ParamOutOfRange, "pca_fit: n_components must lie in [1, min(n_samples, n_features)]");

  PcaModel model;
  model.centered = centered;
  model.mean = centered ? Eigen::RowVectorXd(x.colwise().mean()) : Eigen::RowVectorXd::Zero(x.cols());
  const Eigen::MatrixXd xc = centered ? Eigen::MatrixXd(x.rowwise() - model.mean) : x;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  model.components = svd.matrixV().leftCols(n_components);
  fix_signs(model.components);
  model.singular_values = s.head(n_components);

  const double total = xc.squaredNorm();
  model.explained_variance_ratio =
      total > 0.0 ? Eigen::VectorXd(model.singular_values.array().square() / total)
                  : Eigen::VectorXd::Zero(n_components);
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.n_features())
    throw Error(ErrorKind::DimensionMismatch, "pca_transform: expected " + std::to_string(model.n_features()) +
                                                  " features, got " + std::to_string(x.cols()));
  if (model.centered) return (x.rowwise() - model.mean) * model.components;
  return x * model.components;
}

Eigen::RowVectorXd pca_transform_row(const PcaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != model.n_features())
    throw Error(ErrorKind::DimensionMismatch, "pca_transform: feature count mismatch");
  if (model.centered) return (row - model.mean) * model.components;
  return row * model.components;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  return (xc.transpose() * xc) / static_cast<double>(x.rows() - 1);
}

WhitenModel whiten_fit(const Eigen::MatrixXd& x, const WhitenOptions& options) {
  require_finite(x, "whiten_fit");
  if (x.rows() < 2) throw Error(ErrorKind::DegenerateInput, "whiten_fit: need at least 2 samples");
  const auto n = static_cast<double>(x.rows());

  WhitenModel model;
  model.mean = x.colwise().mean();
  Eigen::MatrixXd z = x.rowwise() - model.mean;
  if ((z.cwiseAbs().colwise().maxCoeff().array() == 0.0).all())
    throw Error(ErrorKind::DegenerateInput, "whiten_fit: fewer than 2 distinct samples");

  model.scale = Eigen::RowVectorXd::Ones(x.cols());
  if (options.standardize) {
    const Eigen::RowVectorXd sd = (z.colwise().squaredNorm() / (n - 1.0)).array().sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
      if (sd(j) > 0.0) model.scale(j) = sd(j);
    z = z.array().rowwise() / model.scale.array();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double floor = kWhitenDropTolerance * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  Eigen::Index keep = 0;
  while (keep < s.size() && s(keep) > floor) ++keep;
  if (options.max_components) keep = std::min(keep, *options.max_components);
  if (keep == 0) throw Error(ErrorKind::DegenerateInput, "whiten_fit: no direction with non-negligible variance");

  Eigen::MatrixXd v = svd.matrixV().leftCols(keep);
  fix_signs(v);
  model.singular_values = s.head(keep);
  const Eigen::VectorXd inv = std::sqrt(n - 1.0) * model.singular_values.cwiseInverse();
  model.projection = v * inv.asDiagonal();
  return model;
}

Eigen::RowVectorXd whiten_apply_row(const WhitenModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != model.n_inputs()) throw Error(ErrorKind::DimensionMismatch, "whiten_apply: feature count mismatch");
  const Eigen::RowVectorXd z = (row - model.mean).cwiseQuotient(model.scale);
  return z * model.projection;
}

Eigen::MatrixXd whiten_apply(const WhitenModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.n_inputs()) throw Error(ErrorKind::DimensionMismatch, "whiten_apply: feature count mismatch");
  Eigen::MatrixXd out(x.rows(), model.n_outputs());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = whiten_apply_row(model, x.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Kernel specs

KernelSpec KernelSpec::pca(int n_pc) { return {KernelKind::Pca, n_pc, 0, 0, {}}; }
KernelSpec KernelSpec::poly(int n_pc, int n_poly) { return {KernelKind::Poly, n_pc, n_poly, 0, {}}; }
KernelSpec KernelSpec::knn(int n_pc, int k_nn) { return {KernelKind::Knn, n_pc, 0, k_nn, {}}; }
KernelSpec KernelSpec::concat(KernelSpec a, KernelSpec b) {
  KernelSpec s{KernelKind::Concat, 0, 0, 0, {}};
  s.parts.push_back(std::move(a));
  s.parts.push_back(std::move(b));
  return s;
}

void KernelSpec::validate() const {
  auto fail = [this](const std::string& why) { throw Error(ErrorKind::ParamOutOfRange, encode() + ": " + why); };
  switch (kind) {
    case KernelKind::Pca:
      if (n_pc < 3 || n_pc > 100) fail("N_pc must lie in [3, 100]");
      break;
    case KernelKind::Poly:
      if (n_pc < 2 || n_pc > 20) fail("N_pc must lie in [2, 20]");
      if (n_poly < 2 || n_poly > 7) fail("N_poly must lie in [2, 7]");
      break;
    case KernelKind::Knn:
      if (n_pc < 2 || n_pc > 100) fail("N_pc must lie in [2, 100]");
      if (k_nn < 2 || k_nn > 300) fail("K_nn must lie in [2, 300]");
      break;
    case KernelKind::Concat:
      if (parts.size() != 2) fail("concat needs exactly two parts");
      for (const auto& p : parts) p.validate();
      break;
  }
}

std::string KernelSpec::encode() const {
  switch (kind) {
    case KernelKind::Pca: return "pca:" + std::to_string(n_pc);
    case KernelKind::Poly: return "poly:" + std::to_string(n_pc) + ":" + std::to_string(n_poly);
    case KernelKind::Knn: return "knn:" + std::to_string(n_pc) + ":" + std::to_string(k_nn);
    case KernelKind::Concat:
      if (parts.size() != 2) return "concat()";
      return "concat(" + parts[0].encode() + "," + parts[1].encode() + ")";
  }
  return {};
}

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorKind::Parse, "bad kernel spec '" + std::string(whole) + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

KernelSpec KernelSpec::parse(std::string_view text) {
  text = trim(text);
  const std::string_view whole = text;
  if (text.starts_with("concat(") && text.ends_with(")")) {
    auto inner = text.substr(7, text.size() - 8);
    int depth = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
      if (inner[i] == '(') ++depth;
      if (inner[i] == ')') --depth;
      if (inner[i] == ',' && depth == 0) {
        auto spec = concat(parse(inner.substr(0, i)), parse(inner.substr(i + 1)));
        spec.validate();
        return spec;
      }
    }
    throw Error(ErrorKind::Parse, "bad kernel spec '" + std::string(whole) + "'");
  }
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    auto next = text.find(':', pos);
    fields.push_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  KernelSpec spec;
  if (fields[0] == "pca" && fields.size() == 2) {
    spec = pca(parse_int(fields[1], whole));
  } else if (fields[0] == "poly" && fields.size() == 3) {
    spec = poly(parse_int(fields[1], whole), parse_int(fields[2], whole));
  } else if (fields[0] == "knn" && fields.size() == 3) {
    spec = knn(parse_int(fields[1], whole), parse_int(fields[2], whole));
  } else {
    throw Error(ErrorKind::Parse, "bad kernel spec '" + std::string(whole) + "'");
  }
  spec.validate();
  return spec;
}

std::size_t monomial_count(int n_pc, int n_poly) {
  // C(n_pc + n_poly, n_poly) - 1, computed incrementally to stay exact.
  std::size_t c = 1;
  for (int i = 1; i <= n_poly; ++i) c = c * static_cast<std::size_t>(n_pc + i) / static_cast<std::size_t>(i);
  return c - 1;
}

Eigen::RowVectorXd polynomial_features(const Eigen::Ref<const Eigen::RowVectorXd>& z, int degree) {
  const auto d = static_cast<int>(z.size());
  std::vector<double> out;
  out.reserve(monomial_count(d, degree));
  // Monomials of degree k are extensions of degree k-1 monomials by a variable
  // index >= the last one used, which keeps each combination unique.
  std::vector<double> prev_values = {1.0};
  std::vector<int> prev_last = {0};
  for (int k = 1; k <= degree; ++k) {
    std::vector<double> values;
    std::vector<int> last;
    for (std::size_t m = 0; m < prev_values.size(); ++m)
      for (int v = prev_last[m]; v < d; ++v) {
        values.push_back(prev_values[m] * z(v));
        last.push_back(v);
      }
    out.insert(out.end(), values.begin(), values.end());
    prev_values = std::move(values);
    prev_last = std::move(last);
  }
  return Eigen::Map<Eigen::RowVectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Eigen::RowVectorXd nearest_distances(const Eigen::MatrixXd& reference, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                     int k) {
  if (k < 1 || k > reference.rows()) throw Error(ErrorKind::ParamOutOfRange, "k must lie in [1, n_reference]");
  if (query.size() != reference.cols()) throw Error(ErrorKind::DimensionMismatch, "nearest_distances: width mismatch");
  std::vector<double> d2(static_cast<std::size_t>(reference.rows()));
  for (Eigen::Index i = 0; i < reference.rows(); ++i) d2[static_cast<std::size_t>(i)] = (reference.row(i) - query).squaredNorm();
  std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
  Eigen::RowVectorXd out(k);
  for (int i = 0; i < k; ++i) out(i) = std::sqrt(d2[static_cast<std::size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Fitted kernels

Eigen::Index FittedKernel::n_inputs() const {
  if (spec_.kind == KernelKind::Concat) return parts.empty() ? 0 : parts[0].n_inputs();
  return base.n_inputs();
}

Eigen::Index FittedKernel::n_outputs() const {
  switch (spec_.kind) {
    case KernelKind::Pca: return base.n_outputs();
    case KernelKind::Poly:
    case KernelKind::Knn: return outer ? outer->n_outputs() : 0;
    case KernelKind::Concat: {
      Eigen::Index n = 0;
      for (const auto& p : parts) n += p.n_outputs();
      return n;
    }
  }
  return 0;
}

Eigen::RowVectorXd FittedKernel::apply_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  switch (spec_.kind) {
    case KernelKind::Pca: return whiten_apply_row(base, row);
    case KernelKind::Poly: return whiten_apply_row(*outer, polynomial_features(whiten_apply_row(base, row), spec_.n_poly));
    case KernelKind::Knn:
      return whiten_apply_row(*outer, nearest_distances(reference, whiten_apply_row(base, row), spec_.k_nn));
    case KernelKind::Concat: {
      const Eigen::RowVectorXd a = parts[0].apply_row(row);
      const Eigen::RowVectorXd b = parts[1].apply_row(row);
      Eigen::RowVectorXd out(a.size() + b.size());
      out << a, b;
      return out;
    }
  }
  return {};
}

Eigen::MatrixXd FittedKernel::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != n_inputs()) throw Error(ErrorKind::DimensionMismatch, "kernel_apply: feature count mismatch");
  Eigen::MatrixXd out(x.rows(), n_outputs());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = apply_row(x.row(i));
  return out;
}

FittedKernel kernel_fit(const KernelSpec& spec, const Eigen::MatrixXd& x_train) {
  spec.validate();
  if (x_train.rows() == 0) throw Error(ErrorKind::TooFewSamples, "kernel_fit: empty training set");

  FittedKernel k;
  k.spec_ = spec;
  if (spec.kind == KernelKind::Concat) {
    for (const auto& p : spec.parts) k.parts.push_back(kernel_fit(p, x_train));
    return k;
  }

  k.base = whiten_fit(x_train, {true, spec.n_pc});
  if (spec.kind == KernelKind::Pca) return k;

  const Eigen::MatrixXd z = whiten_apply(k.base, x_train);
  if (spec.kind == KernelKind::Poly) {
    Eigen::MatrixXd expanded(z.rows(), static_cast<Eigen::Index>(monomial_count(static_cast<int>(z.cols()), spec.n_poly)));
    for (Eigen::Index i = 0; i < z.rows(); ++i) expanded.row(i) = polynomial_features(z.row(i), spec.n_poly);
    k.outer = whiten_fit(expanded);
    return k;
  }

  if (spec.k_nn >= x_train.rows())
    throw Error(ErrorKind::ParamOutOfRange, spec.encode() + ": K_nn must be smaller than the training set");
  k.reference = z;
  Eigen::MatrixXd dist(z.rows(), spec.k_nn);
  for (Eigen::Index i = 0; i < z.rows(); ++i) dist.row(i) = nearest_distances(k.reference, z.row(i), spec.k_nn);
  k.outer = whiten_fit(dist);
  return k;
}

// ---------------------------------------------------------------------------
// Intrinsic dimension

bool IntrinsicDimension::measurable() const { return std::isfinite(value); }

double inseparability_probability(double alpha, double n) {
  return std::pow(1.0 - alpha * alpha, (n - 1.0) / 2.0) / (alpha * std::sqrt(2.0 * std::numbers::pi * n));
}

IntrinsicDimension intrinsic_dimension(const Eigen::MatrixXd& x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::ParamOutOfRange, "alpha must lie in (0, 1)");
  if (x.rows() < 20) throw Error(ErrorKind::TooFewSamples, "intrinsic_dimension needs at least 20 samples");
  require_finite(x, "intrinsic_dimension");

  std::vector<Eigen::Index> keep;
  const Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (norms(i) > 0.0) keep.push_back(i);
  if (keep.size() < 20) throw Error(ErrorKind::TooFewSamples, "intrinsic_dimension: too many zero rows");

  Eigen::MatrixXd u(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) u.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]) / norms(keep[i]);

  // On the unit sphere <x, x> = 1, so the inseparability test is <x, y> > alpha.
  const Eigen::Index n = u.rows();
  constexpr Eigen::Index kBlock = 512;
  double fraction_sum = 0.0;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - b);
    const Eigen::MatrixXd g = u.middleRows(b, rows) * u.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index count = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != b + r && g(r, j) > alpha) ++count;
      fraction_sum += static_cast<double>(count) / static_cast<double>(n - 1);
    }
  }

  IntrinsicDimension out;
  out.alpha = alpha;
  out.inseparability = fraction_sum / static_cast<double>(n);
  if (out.inseparability == 0.0) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  double lo = 1.0, hi = 10.0 * static_cast<double>(x.cols());
  const double p = out.inseparability;
  if (p >= inseparability_probability(alpha, lo)) {
    out.value = lo;
    return out;
  }
  if (p <= inseparability_probability(alpha, hi)) {
    out.value = hi;
    return out;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (inseparability_probability(alpha, mid) > p ? lo : hi) = mid;
  }
  out.value = 0.5 * (lo + hi);
  return out;
}

IntrinsicDimension intrinsic_dimension_of_data(const Eigen::MatrixXd& x, double alpha, double condition_number) {
  if (x.rows() < 20) throw Error(ErrorKind::TooFewSamples, "intrinsic_dimension needs at least 20 samples");
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) throw Error(ErrorKind::DegenerateInput, "intrinsic_dimension: constant data");
  // Variance is s^2 / (n - 1); compare squared singular values.
  const double cut = s(0) * s(0) / condition_number;
  Eigen::Index keep = 0;
  while (keep < s.size() && s(keep) * s(keep) >= cut) ++keep;
  const Eigen::VectorXd inv = s.head(keep).cwiseInverse();
  const Eigen::MatrixXd z = xc * svd.matrixV().leftCols(keep) * inv.asDiagonal();
  return intrinsic_dimension(z, alpha);
}

}  // namespace capgest
