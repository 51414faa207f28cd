#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace capgest {

struct Neighbor {
  Eigen::Index index = 0;
  double distance = 0.0;
};

/// Exact k nearest rows by Euclidean distance, ordered by (distance, row index).
std::vector<Neighbor> k_nearest(const Eigen::MatrixXd& reference, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                std::size_t k);

/// Majority-vote classifier over integer class codes. Vote ties go to the class
/// whose tied neighbors have the lowest summed distance, then the lowest code.
struct KnnModel {
  Eigen::MatrixXd reference;
  std::vector<int> labels;
  std::size_t k = 5;
};

KnnModel knn_fit(Eigen::MatrixXd x, std::vector<int> y, std::size_t k);
int knn_predict(const KnnModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

struct KnnRegressor {
  Eigen::MatrixXd reference;
  std::vector<double> targets;
  std::size_t k = 5;
};

KnnRegressor knn_regressor_fit(Eigen::MatrixXd x, std::vector<double> y, std::size_t k);
/// Mean target of the k nearest rows.
double knn_regress(const KnnRegressor& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Binary Fisher discriminant; score > 0 leans toward class 1.
struct LdaModel {
  Eigen::RowVectorXd weights;  // unit norm
  double bias = 0.0;
  Eigen::RowVectorXd mean0;
  Eigen::RowVectorXd mean1;
  Eigen::MatrixXd within_scatter;   // S_W
  Eigen::MatrixXd between_scatter;  // S_B
  double ridge = 0.0;               // lambda added to S_W, 0 when not needed
};

/// Labels are 0/1. S_W gets lambda I (lambda = 1e-6 trace(S_W) / d) only when singular.
LdaModel lda_fit(const Eigen::MatrixXd& x, const std::vector<int>& y);
double lda_score(const LdaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Nearest-centroid classifier; classes sorted ascending.
struct CentroidModel {
  std::vector<int> classes;
  Eigen::MatrixXd centroids;  // one row per class
};

CentroidModel centroid_fit(const Eigen::MatrixXd& x, const std::vector<int>& y);
/// argmin distance; ties go to the lowest class code.
int centroid_predict(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
/// Restricted argmin over `allowed` (must be non-empty and a subset of classes).
int centroid_predict_among(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                           const std::vector<int>& allowed);
/// d_neg / (d_neg + d_pos) in [0, 1], where d_neg is the distance to the nearest
/// non-positive centroid; 0.5 when both distances are zero.
double centroid_score(const CentroidModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                      int positive_class);

}  // namespace capgest
