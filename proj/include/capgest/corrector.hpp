#pragma once

// Error-corrector cascade around a frozen PCA + KNN base model.
//
// Inference: the base model predicts; a group classifier picks the error group
// (restricted to groups whose `predicted` label matches the base prediction);
// if that group has an enabled corrector and its score clears the threshold,
// the group's ground-truth label replaces the base prediction.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capgest/classify.hpp"
#include "capgest/embed.hpp"
#include "capgest/signal.hpp"

namespace capgest {

struct ErrorGroup {
  GestureLabel truth = GestureLabel::None;
  GestureLabel predicted = GestureLabel::None;

  /// 5 * index(truth) + index(predicted).
  int id() const { return static_cast<int>(kLabelCount) * label_index(truth) + label_index(predicted); }
  static ErrorGroup from_id(int id);
  std::string describe() const;

  friend bool operator==(const ErrorGroup&, const ErrorGroup&) = default;
};

/// All (truth, predicted) pairs with truth != predicted seen at least
/// `min_support` times, ordered by group id.
std::vector<ErrorGroup> discover_groups(const std::vector<GestureLabel>& truths,
                                        const std::vector<GestureLabel>& base_preds, std::size_t min_support = 10);

struct GroupCandidates {
  std::vector<std::size_t> rows;  // samples whose base prediction is group.predicted
  std::vector<int> labels;        // 1 iff truth == group.truth
  std::size_t positives() const;
};

/// Throws EmptyCandidateSet when no sample carries the group's predicted label.
GroupCandidates label_group_binary(const std::vector<GestureLabel>& truths,
                                   const std::vector<GestureLabel>& base_preds, const ErrorGroup& group);

struct RocPoint {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// One point per distinct score, highest threshold first; a sample counts as
/// positive when score >= threshold. Throws NoPositives.
std::vector<RocPoint> roc_counts(const std::vector<double>& scores, const std::vector<int>& labels);
/// Same sweep without the positives requirement (holdout sets may lack errors).
std::vector<RocPoint> roc_sweep(const std::vector<double>& scores, const std::vector<int>& labels);

/// Counts at an arbitrary threshold, read off a sweep.
RocPoint roc_at(const std::vector<RocPoint>& sweep, double threshold);

/// Highest-TP train threshold with zero false positives on both sweeps.
std::optional<double> select_threshold_zero_fp(const std::vector<RocPoint>& train_roc,
                                               const std::vector<RocPoint>& holdout_roc);

enum class BinaryClassifierKind { Lda, Centroid };
std::string_view to_string(BinaryClassifierKind kind);
BinaryClassifierKind parse_classifier(std::string_view text);

/// Binary scorer over kernel features; larger scores lean toward "this is an error".
struct BinaryScorer {
  BinaryClassifierKind kind = BinaryClassifierKind::Centroid;
  LdaModel lda;
  CentroidModel centroid;

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& features) const;
};

BinaryScorer fit_binary_scorer(BinaryClassifierKind kind, const Eigen::MatrixXd& features,
                               const std::vector<int>& labels);

struct CorrectorStats {
  std::size_t train_candidates = 0;
  std::size_t train_errors = 0;  // positives in the train candidate set
  std::size_t train_tp = 0;
  std::size_t holdout_candidates = 0;
  std::size_t holdout_errors = 0;
  std::size_t holdout_tp = 0;
};

struct Corrector {
  ErrorGroup group;
  FittedKernel kernel;
  BinaryScorer classifier;
  double threshold = 0.0;
  bool enabled = false;
  CorrectorStats stats;

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const;
  bool fires(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const;
};

/// 100-feature samples with ground truth and the base model's predictions.
struct ErrorData {
  const Eigen::MatrixXd* features = nullptr;
  std::vector<GestureLabel> truths;
  std::vector<GestureLabel> base_preds;
};

struct CorrectorTrial {
  KernelSpec kernel;
  BinaryClassifierKind classifier = BinaryClassifierKind::Centroid;
  std::optional<double> threshold;
  CorrectorStats stats;
  std::string failure;  // non-empty when the kernel or classifier could not be fit
};

struct CorrectorSearch {
  std::optional<Corrector> corrector;
  std::vector<CorrectorTrial> trials;
};

/// Grid search over kernels x classifiers; keeps the combination with the most
/// train TPs at zero FP on train and holdout (first in grid order on ties).
CorrectorSearch train_corrector(const ErrorGroup& group, const std::vector<KernelSpec>& kernels,
                                const std::vector<BinaryClassifierKind>& classifiers, const ErrorData& train,
                                const ErrorData& holdout);

enum class GroupClassifierKind { Centroid, LdaOneVsRest };
std::string_view to_string(GroupClassifierKind kind);
GroupClassifierKind parse_group_classifier(std::string_view text);

/// Assigns a sample to one of the known error groups. With fewer than two
/// trainable groups it degrades to gating by base prediction alone.
struct GroupClassifier {
  GroupClassifierKind kind = GroupClassifierKind::Centroid;
  KernelSpec spec = KernelSpec::pca(9);
  std::vector<ErrorGroup> groups;  // by id
  bool fallback = true;
  std::optional<FittedKernel> kernel;
  CentroidModel centroid;        // classes are group ids
  std::vector<LdaModel> one_vs_rest;  // aligned with groups

  /// Groups whose predicted label equals base_pred, or none.
  std::optional<ErrorGroup> assign(const Eigen::Ref<const Eigen::RowVectorXd>& features100,
                                   GestureLabel base_pred) const;
};

/// `error_rows` index misclassified samples; `group_ids` their groups.
/// Throws TooFewGroups when fewer than two groups are present.
GroupClassifier train_group_classifier(const Eigen::MatrixXd& features, const std::vector<std::size_t>& error_rows,
                                       const std::vector<int>& group_ids, const KernelSpec& kernel,
                                       GroupClassifierKind kind = GroupClassifierKind::Centroid);
/// Gate-only classifier for the degenerate case.
GroupClassifier fallback_group_classifier(std::vector<ErrorGroup> groups);

/// Frozen base model: uncentered PCA projection followed by KNN.
struct BaseModel {
  PcaModel pca;
  KnnModel knn;

  GestureLabel predict(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const;
  std::vector<GestureLabel> predict_all(const Eigen::MatrixXd& features) const;
};

struct CorrectionTrace {
  GestureLabel base = GestureLabel::None;
  std::optional<ErrorGroup> group;
  std::optional<double> score;
  bool corrected = false;
  GestureLabel output = GestureLabel::None;
};

struct Cascade {
  BaseModel base;
  GroupClassifier groups;
  std::vector<Corrector> correctors;  // one per discovered group, enabled or not

  const Corrector* corrector_for(const ErrorGroup& group) const;
  CorrectionTrace trace(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const;
};

GestureLabel corrected_predict(const Cascade& cascade, const Eigen::Ref<const Eigen::RowVectorXd>& features100);

struct CorrectorConfig {
  std::vector<KernelSpec> kernels;
  std::vector<BinaryClassifierKind> classifiers = {BinaryClassifierKind::Lda, BinaryClassifierKind::Centroid};
  std::size_t min_support = 10;
  KernelSpec group_kernel = KernelSpec::pca(9);
  GroupClassifierKind group_classifier = GroupClassifierKind::Centroid;

  static std::vector<KernelSpec> default_kernels();
};

struct CascadeAudit {
  std::vector<ErrorGroup> groups;
  std::vector<CorrectorSearch> searches;  // aligned with groups
};

/// Discovers groups on train, fits the group classifier on train errors and one
/// corrector search per group (holdout = validation).
Cascade train_cascade(BaseModel base, const CorrectorConfig& config, const Eigen::MatrixXd& train_x,
                      const std::vector<GestureLabel>& train_y, const Eigen::MatrixXd& holdout_x,
                      const std::vector<GestureLabel>& holdout_y, CascadeAudit* audit = nullptr);

}  // namespace capgest
