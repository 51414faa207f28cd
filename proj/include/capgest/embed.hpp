#pragma once

// Dimension reduction and explicit high-dimensional feature kernels.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace capgest {

/// Principal directions from the SVD of the (optionally centered) data matrix.
struct PcaModel {
  Eigen::MatrixXd components;                // n_features x n_components, orthonormal columns
  Eigen::VectorXd singular_values;           // descending, >= 0
  Eigen::VectorXd explained_variance_ratio;  // per component, sums to <= 1
  Eigen::RowVectorXd mean;                   // zeros when !centered
  bool centered = false;

  Eigen::Index n_features() const { return components.rows(); }
  Eigen::Index n_components() const { return components.cols(); }
};

/// Sign convention: the largest-magnitude coordinate of every component is positive.
/// Rank deficiency shows up as zero singular values, never as an error.
PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index n_components, bool centered);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x);
Eigen::RowVectorXd pca_transform_row(const PcaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Directions whose singular value falls below this (relative to the largest,
/// with an absolute floor of the same value) are dropped during whitening.
inline constexpr double kWhitenDropTolerance = 1e-10;

struct WhitenOptions {
  bool standardize = true;                    // per-feature z-score before rotation
  std::optional<Eigen::Index> max_components; // keep only the leading directions
};

/// Affine map x -> ((x - mean) / scale) * projection with identity training covariance.
struct WhitenModel {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  Eigen::MatrixXd projection;       // rotation with the 1/sigma scaling folded in
  Eigen::VectorXd singular_values;  // of the retained directions

  Eigen::Index n_inputs() const { return mean.size(); }
  Eigen::Index n_outputs() const { return projection.cols(); }
};

WhitenModel whiten_fit(const Eigen::MatrixXd& x, const WhitenOptions& options = {});
Eigen::MatrixXd whiten_apply(const WhitenModel& model, const Eigen::MatrixXd& x);
Eigen::RowVectorXd whiten_apply_row(const WhitenModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Sample covariance (n - 1 normalization).
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Kernels

enum class KernelKind { Pca, Poly, Knn, Concat };

/// Unfitted kernel description. Text encoding: `pca:9`, `poly:5:4`,
/// `knn:10:150`, `concat(pca:20,poly:5:4)`.
struct KernelSpec {
  KernelKind kind = KernelKind::Pca;
  int n_pc = 3;
  int n_poly = 0;
  int k_nn = 0;
  std::vector<KernelSpec> parts;  // exactly two for Concat

  static KernelSpec pca(int n_pc);
  static KernelSpec poly(int n_pc, int n_poly);
  static KernelSpec knn(int n_pc, int k_nn);
  static KernelSpec concat(KernelSpec a, KernelSpec b);

  /// Throws ParamOutOfRange.
  void validate() const;
  std::string encode() const;
  static KernelSpec parse(std::string_view text);

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// C(n_pc + n_poly, n_poly) - 1.
std::size_t monomial_count(int n_pc, int n_poly);
/// All monomials of total degree 1..degree, graded then lexicographic:
/// (x1, x2) degree 2 -> x1, x2, x1^2, x1 x2, x2^2.
Eigen::RowVectorXd polynomial_features(const Eigen::Ref<const Eigen::RowVectorXd>& z, int degree);

/// Sorted distances from `query` to its k nearest rows of `reference`.
Eigen::RowVectorXd nearest_distances(const Eigen::MatrixXd& reference,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& query, int k);

class FittedKernel {
public:
  FittedKernel() = default;

  const KernelSpec& spec() const { return spec_; }
  Eigen::Index n_inputs() const;
  Eigen::Index n_outputs() const;

  /// Row-at-a-time evaluation; the batch path below loops over this so a
  /// sample gets bit-identical features in training and at inference.
  Eigen::RowVectorXd apply_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

  // Fitted state (exposed for serialization).
  KernelSpec spec_;
  WhitenModel base;                 // standardize -> PCA(n_pc) -> whiten
  std::optional<WhitenModel> outer; // post-expansion whitening (Poly, Knn)
  Eigen::MatrixXd reference;        // Knn: whitened training points
  std::vector<FittedKernel> parts;  // Concat
};

FittedKernel kernel_fit(const KernelSpec& spec, const Eigen::MatrixXd& x_train);
inline Eigen::MatrixXd kernel_apply(const FittedKernel& kernel, const Eigen::MatrixXd& x) { return kernel.apply(x); }

// ---------------------------------------------------------------------------
// Fisher-separability intrinsic dimension

struct IntrinsicDimension {
  double value = 0.0;          // +inf when not measurable
  double inseparability = 0.0; // mean fraction of Fisher-inseparable partners per point
  double alpha = 0.8;

  bool measurable() const;
};

/// p(alpha, n) = (1 - alpha^2)^((n - 1) / 2) / (alpha * sqrt(2 pi n)).
double inseparability_probability(double alpha, double n);

/// Expects centered, whitened rows. Each row is projected to the unit sphere;
/// y is inseparable from x when <x, y> > alpha <x, x>.
IntrinsicDimension intrinsic_dimension(const Eigen::MatrixXd& x, double alpha = 0.8);

/// Centers, keeps principal directions with variance >= largest / condition_number,
/// whitens, then estimates.
IntrinsicDimension intrinsic_dimension_of_data(const Eigen::MatrixXd& x, double alpha = 0.8,
                                               double condition_number = 10.0);

}  // namespace capgest
