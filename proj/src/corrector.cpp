#include "capgest/corrector.hpp"

#include <algorithm>
#include <map>
#include <limits>
#include <numeric>

#include "capgest/error.hpp"
#include "parallel.hpp"

namespace capgest {

ErrorGroup ErrorGroup::from_id(int id) {
  const int n = static_cast<int>(kLabelCount);
  if (id < 0 || id >= n * n || id / n == id % n) throw Error(ErrorKind::Parse, "invalid error group id " + std::to_string(id));
  return {label_from_index(id / n), label_from_index(id % n)};
}

std::string ErrorGroup::describe() const {
  return std::string(to_string(truth)) + " -> " + std::string(to_string(predicted));
}

std::vector<ErrorGroup> discover_groups(const std::vector<GestureLabel>& truths,
                                        const std::vector<GestureLabel>& base_preds, std::size_t min_support) {
  if (truths.size() != base_preds.size()) throw Error(ErrorKind::DimensionMismatch, "discover_groups: length mismatch");
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (truths[i] != base_preds[i]) ++counts[ErrorGroup{truths[i], base_preds[i]}.id()];
  std::vector<ErrorGroup> groups;
  for (const auto& [id, n] : counts)
    if (n >= min_support) groups.push_back(ErrorGroup::from_id(id));
  return groups;
}

std::size_t GroupCandidates::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

GroupCandidates label_group_binary(const std::vector<GestureLabel>& truths,
                                   const std::vector<GestureLabel>& base_preds, const ErrorGroup& group) {
  if (truths.size() != base_preds.size()) throw Error(ErrorKind::DimensionMismatch, "label_group_binary: length mismatch");
  GroupCandidates out;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (base_preds[i] != group.predicted) continue;
    out.rows.push_back(i);
    out.labels.push_back(truths[i] == group.truth ? 1 : 0);
  }
  if (out.rows.empty())
    throw Error(ErrorKind::EmptyCandidateSet, "no sample predicted as " + std::string(to_string(group.predicted)));
  return out;
}

// ---------------------------------------------------------------------------
// ROC

std::vector<RocPoint> roc_sweep(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "roc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> sweep;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    sweep.push_back({t, tp, fp});
  }
  return sweep;
}

std::vector<RocPoint> roc_counts(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (std::find(labels.begin(), labels.end(), 1) == labels.end())
    throw Error(ErrorKind::NoPositives, "ROC sweep needs at least one positive");
  return roc_sweep(scores, labels);
}

RocPoint roc_at(const std::vector<RocPoint>& sweep, double threshold) {
  RocPoint out{threshold, 0, 0};
  for (const auto& p : sweep) {
    if (p.threshold < threshold) break;
    out.tp = p.tp;
    out.fp = p.fp;
  }
  return out;
}

std::optional<double> select_threshold_zero_fp(const std::vector<RocPoint>& train_roc,
                                               const std::vector<RocPoint>& holdout_roc) {
  std::optional<double> best;
  std::size_t best_tp = 0;
  // Both FP counts are non-decreasing as the threshold drops, so the first
  // violation ends the search.
  for (const auto& p : train_roc) {
    if (p.fp > 0 || roc_at(holdout_roc, p.threshold).fp > 0) break;
    if (p.tp > best_tp) {
      best_tp = p.tp;
      best = p.threshold;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Binary scorers

std::string_view to_string(BinaryClassifierKind kind) {
  return kind == BinaryClassifierKind::Lda ? "lda" : "centroid";
}

BinaryClassifierKind parse_classifier(std::string_view text) {
  if (text == "lda") return BinaryClassifierKind::Lda;
  if (text == "centroid") return BinaryClassifierKind::Centroid;
  throw Error(ErrorKind::Parse, "unknown classifier '" + std::string(text) + "'");
}

double BinaryScorer::score(const Eigen::Ref<const Eigen::RowVectorXd>& features) const {
  return kind == BinaryClassifierKind::Lda ? lda_score(lda, features) : centroid_score(centroid, features, 1);
}

BinaryScorer fit_binary_scorer(BinaryClassifierKind kind, const Eigen::MatrixXd& features,
                               const std::vector<int>& labels) {
  BinaryScorer s;
  s.kind = kind;
  if (kind == BinaryClassifierKind::Lda) {
    s.lda = lda_fit(features, labels);
  } else {
    s.centroid = centroid_fit(features, labels);
    if (s.centroid.classes.size() != 2) throw Error(ErrorKind::SingleClass, "centroid scorer needs both classes");
  }
  return s;
}

double Corrector::score(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const {
  return classifier.score(kernel.apply_row(features100));
}

bool Corrector::fires(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const {
  return enabled && score(features100) >= threshold;
}

// ---------------------------------------------------------------------------
// Corrector search

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<std::size_t> rows_predicted_as(const std::vector<GestureLabel>& preds, GestureLabel label) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == label) rows.push_back(i);
  return rows;
}

// Kernel fitted on one candidate set (all samples sharing a base prediction),
// with the train and holdout candidates already mapped through it.
struct KernelFeatures {
  KernelSpec spec;
  std::optional<FittedKernel> kernel;
  Eigen::MatrixXd train;
  Eigen::MatrixXd holdout;
  std::string failure;
};

std::vector<KernelFeatures> fit_candidate_kernels(const std::vector<KernelSpec>& specs, const Eigen::MatrixXd& train_x,
                                                  const Eigen::MatrixXd& holdout_x) {
  std::vector<KernelFeatures> out(specs.size());
  detail::parallel_for(specs.size(), [&](std::size_t i) {
    out[i].spec = specs[i];
    try {
      out[i].kernel = kernel_fit(specs[i], train_x);
      out[i].train = out[i].kernel->apply(train_x);
      out[i].holdout = holdout_x.rows() > 0 ? out[i].kernel->apply(holdout_x) : Eigen::MatrixXd(0, out[i].train.cols());
    } catch (const Error& e) {
      out[i].kernel.reset();
      out[i].failure = e.what();
    }
  });
  return out;
}

std::vector<int> binary_labels(const std::vector<std::size_t>& rows, const std::vector<GestureLabel>& truths,
                               GestureLabel positive) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(truths[r] == positive ? 1 : 0);
  return y;
}

std::vector<double> score_rows(const BinaryScorer& scorer, const Eigen::MatrixXd& features) {
  std::vector<double> s(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) s[static_cast<std::size_t>(i)] = scorer.score(features.row(i));
  return s;
}

CorrectorSearch search_group(const ErrorGroup& group, const std::vector<KernelFeatures>& kernels,
                             const std::vector<BinaryClassifierKind>& classifiers, const std::vector<int>& train_y,
                             const std::vector<int>& holdout_y) {
  CorrectorSearch result;
  CorrectorStats base_stats;
  base_stats.train_candidates = train_y.size();
  base_stats.train_errors = static_cast<std::size_t>(std::count(train_y.begin(), train_y.end(), 1));
  base_stats.holdout_candidates = holdout_y.size();
  base_stats.holdout_errors = static_cast<std::size_t>(std::count(holdout_y.begin(), holdout_y.end(), 1));

  std::size_t best_tp = 0;
  for (const auto& kf : kernels) {
    for (auto kind : classifiers) {
      CorrectorTrial trial;
      trial.kernel = kf.spec;
      trial.classifier = kind;
      trial.stats = base_stats;
      if (!kf.kernel) {
        trial.failure = kf.failure;
        result.trials.push_back(std::move(trial));
        continue;
      }
      try {
        auto scorer = fit_binary_scorer(kind, kf.train, train_y);
        const auto train_roc = roc_counts(score_rows(scorer, kf.train), train_y);
        const auto holdout_roc = roc_sweep(score_rows(scorer, kf.holdout), holdout_y);
        trial.threshold = select_threshold_zero_fp(train_roc, holdout_roc);
        if (trial.threshold) {
          trial.stats.train_tp = roc_at(train_roc, *trial.threshold).tp;
          trial.stats.holdout_tp = roc_at(holdout_roc, *trial.threshold).tp;
          if (trial.stats.train_tp > best_tp) {
            best_tp = trial.stats.train_tp;
            result.corrector = Corrector{group, *kf.kernel, std::move(scorer), *trial.threshold, true, trial.stats};
          }
        }
      } catch (const Error& e) {
        trial.failure = e.what();
      }
      result.trials.push_back(std::move(trial));
    }
  }
  return result;
}

}  // namespace

CorrectorSearch train_corrector(const ErrorGroup& group, const std::vector<KernelSpec>& kernels,
                                const std::vector<BinaryClassifierKind>& classifiers, const ErrorData& train,
                                const ErrorData& holdout) {
  const auto train_rows = rows_predicted_as(train.base_preds, group.predicted);
  const auto holdout_rows =
      holdout.features ? rows_predicted_as(holdout.base_preds, group.predicted) : std::vector<std::size_t>{};
  const auto train_y = binary_labels(train_rows, train.truths, group.truth);
  if (std::find(train_y.begin(), train_y.end(), 1) == train_y.end()) return {};

  const Eigen::MatrixXd train_x = gather_rows(*train.features, train_rows);
  const Eigen::MatrixXd holdout_x =
      holdout.features ? gather_rows(*holdout.features, holdout_rows) : Eigen::MatrixXd(0, train_x.cols());
  const auto fitted = fit_candidate_kernels(kernels, train_x, holdout_x);
  return search_group(group, fitted, classifiers, train_y, binary_labels(holdout_rows, holdout.truths, group.truth));
}

// ---------------------------------------------------------------------------
// Group classifier

std::string_view to_string(GroupClassifierKind kind) {
  return kind == GroupClassifierKind::Centroid ? "centroid" : "lda-ovr";
}

GroupClassifierKind parse_group_classifier(std::string_view text) {
  if (text == "centroid") return GroupClassifierKind::Centroid;
  if (text == "lda-ovr") return GroupClassifierKind::LdaOneVsRest;
  throw Error(ErrorKind::Parse, "unknown group classifier '" + std::string(text) + "'");
}

std::optional<ErrorGroup> GroupClassifier::assign(const Eigen::Ref<const Eigen::RowVectorXd>& features100,
                                                  GestureLabel base_pred) const {
  std::vector<int> allowed;
  for (const auto& g : groups)
    if (g.predicted == base_pred) allowed.push_back(g.id());
  if (allowed.empty()) return std::nullopt;
  if (fallback || !kernel || allowed.size() == 1) return ErrorGroup::from_id(allowed.front());

  const Eigen::RowVectorXd z = kernel->apply_row(features100);
  if (kind == GroupClassifierKind::Centroid) return ErrorGroup::from_id(centroid_predict_among(centroid, z, allowed));

  int best = allowed.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::find(allowed.begin(), allowed.end(), groups[g].id()) == allowed.end()) continue;
    const double s = lda_score(one_vs_rest[g], z);
    if (s > best_score) {
      best_score = s;
      best = groups[g].id();
    }
  }
  return ErrorGroup::from_id(best);
}

GroupClassifier fallback_group_classifier(std::vector<ErrorGroup> groups) {
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
  GroupClassifier gc;
  gc.groups = std::move(groups);
  gc.fallback = true;
  return gc;
}

GroupClassifier train_group_classifier(const Eigen::MatrixXd& features, const std::vector<std::size_t>& error_rows,
                                       const std::vector<int>& group_ids, const KernelSpec& kernel,
                                       GroupClassifierKind kind) {
  if (error_rows.size() != group_ids.size()) throw Error(ErrorKind::DimensionMismatch, "group classifier: label count");
  std::vector<int> distinct(group_ids.begin(), group_ids.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw Error(ErrorKind::TooFewGroups, "group classifier needs at least two error groups");

  GroupClassifier gc;
  gc.kind = kind;
  gc.spec = kernel;
  for (int id : distinct) gc.groups.push_back(ErrorGroup::from_id(id));
  const Eigen::MatrixXd x = gather_rows(features, error_rows);
  gc.kernel = kernel_fit(kernel, x);
  const Eigen::MatrixXd z = gc.kernel->apply(x);
  if (kind == GroupClassifierKind::Centroid) {
    gc.centroid = centroid_fit(z, group_ids);
  } else {
    for (int id : distinct) {
      std::vector<int> y(group_ids.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = group_ids[i] == id ? 1 : 0;
      gc.one_vs_rest.push_back(lda_fit(z, y));
    }
  }
  gc.fallback = false;
  return gc;
}

// ---------------------------------------------------------------------------
// Cascade

GestureLabel BaseModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const {
  return label_from_index(knn_predict(knn, pca_transform_row(pca, features100)));
}

std::vector<GestureLabel> BaseModel::predict_all(const Eigen::MatrixXd& features) const {
  std::vector<GestureLabel> out(static_cast<std::size_t>(features.rows()));
  detail::parallel_for(out.size(), [&](std::size_t i) { out[i] = predict(features.row(static_cast<Eigen::Index>(i))); });
  return out;
}

const Corrector* Cascade::corrector_for(const ErrorGroup& group) const {
  for (const auto& c : correctors)
    if (c.group == group) return &c;
  return nullptr;
}

CorrectionTrace Cascade::trace(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const {
  CorrectionTrace t;
  t.base = base.predict(features100);
  t.output = t.base;
  t.group = groups.assign(features100, t.base);
  if (!t.group) return t;
  const Corrector* c = corrector_for(*t.group);
  if (!c || !c->enabled) return t;
  t.score = c->score(features100);
  if (*t.score >= c->threshold) {
    t.corrected = true;
    t.output = t.group->truth;
  }
  return t;
}

GestureLabel corrected_predict(const Cascade& cascade, const Eigen::Ref<const Eigen::RowVectorXd>& features100) {
  return cascade.trace(features100).output;
}

std::vector<KernelSpec> CorrectorConfig::default_kernels() {
  return {KernelSpec::pca(9),
          KernelSpec::pca(20),
          KernelSpec::poly(5, 3),
          KernelSpec::concat(KernelSpec::pca(10), KernelSpec::poly(5, 4)),
          KernelSpec::concat(KernelSpec::pca(20), KernelSpec::poly(5, 4)),
          KernelSpec::knn(5, 20)};
}

Cascade train_cascade(BaseModel base, const CorrectorConfig& config, const Eigen::MatrixXd& train_x,
                      const std::vector<GestureLabel>& train_y, const Eigen::MatrixXd& holdout_x,
                      const std::vector<GestureLabel>& holdout_y, CascadeAudit* audit) {
  for (const auto& k : config.kernels) k.validate();
  Cascade cascade;
  cascade.base = std::move(base);
  const auto train_pred = cascade.base.predict_all(train_x);
  const auto holdout_pred = cascade.base.predict_all(holdout_x);
  const auto groups = discover_groups(train_y, train_pred, config.min_support);

  std::vector<std::size_t> error_rows;
  std::vector<int> error_groups;
  for (std::size_t i = 0; i < train_y.size(); ++i) {
    const ErrorGroup g{train_y[i], train_pred[i]};
    if (g.truth != g.predicted && std::find(groups.begin(), groups.end(), g) != groups.end()) {
      error_rows.push_back(i);
      error_groups.push_back(g.id());
    }
  }
  cascade.groups = fallback_group_classifier(groups);
  if (groups.size() >= 2) {
    try {
      cascade.groups = train_group_classifier(train_x, error_rows, error_groups, config.group_kernel,
                                              config.group_classifier);
    } catch (const Error&) {
      // Too few errors to fit the kernel: gate by base prediction alone.
    }
  }

  // Groups sharing a predicted label share a candidate set, so kernels are fit
  // once per predicted label.
  std::map<GestureLabel, std::vector<KernelFeatures>> by_prediction;
  for (const auto& g : groups) {
    if (by_prediction.count(g.predicted)) continue;
    const auto rows = rows_predicted_as(train_pred, g.predicted);
    const auto hrows = rows_predicted_as(holdout_pred, g.predicted);
    by_prediction[g.predicted] =
        fit_candidate_kernels(config.kernels, gather_rows(train_x, rows), gather_rows(holdout_x, hrows));
  }

  std::vector<CorrectorSearch> searches(groups.size());
  detail::parallel_for(groups.size(), [&](std::size_t i) {
    const auto& g = groups[i];
    const auto train_ys = binary_labels(rows_predicted_as(train_pred, g.predicted), train_y, g.truth);
    const auto holdout_ys = binary_labels(rows_predicted_as(holdout_pred, g.predicted), holdout_y, g.truth);
    searches[i] = search_group(g, by_prediction.at(g.predicted), config.classifiers, train_ys, holdout_ys);
  });

  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (searches[i].corrector) {
      cascade.correctors.push_back(*searches[i].corrector);
    } else {
      Corrector disabled;
      disabled.group = groups[i];
      disabled.enabled = false;
      if (!searches[i].trials.empty()) {
        disabled.stats = searches[i].trials.front().stats;
        disabled.stats.train_tp = disabled.stats.holdout_tp = 0;
      }
      cascade.correctors.push_back(std::move(disabled));
    }
  }
  if (audit) {
    audit->groups = groups;
    audit->searches = std::move(searches);
  }
  return cascade;
}

}  // namespace capgest
