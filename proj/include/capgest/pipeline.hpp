#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "capgest/corrector.hpp"
#include "capgest/signal.hpp"
#include "capgest/synth.hpp"

namespace capgest {

enum class KnnFitSet { Validation, Train };

struct PipelineConfig {
  // base model
  int n_pcs = 3;
  std::size_t knn_k = 5;
  KnnFitSet knn_fit_on = KnnFitSet::Validation;
  // correctors
  CorrectorConfig corrector = {CorrectorConfig::default_kernels()};
  // data
  UserCounts user_counts;
  std::uint64_t split_seed = 42;
  std::set<std::string> pinned_hold;
  std::size_t stride_frames = 1;
  // synthetic data when no dataset directory is given
  synth::GenConfig synth;
  std::filesystem::path dataset_dir;

  /// Throws ParamOutOfRange.
  void validate() const;

  static PipelineConfig defaults();
  /// key = value lines, '#' comments. Unknown keys are a Parse error.
  static PipelineConfig parse(std::istream& in);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_text() const;
};

/// Documented keys with their defaults, for `--help` and the README.
std::string config_reference();

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::size_t kBundleSizeBudget = 5u * 1024u * 1024u;

struct ModelBundle {
  std::uint32_t version = kBundleVersion;
  Cascade cascade;
  CalibrationTable calibration;  // ranges the training data was normalized with
  std::size_t stride_frames = 1;

  GestureLabel predict(const Eigen::Ref<const Eigen::RowVectorXd>& features100) const {
    return corrected_predict(cascade, features100);
  }
};

struct TrainResult {
  ModelBundle bundle;
  CascadeAudit audit;
};

/// PCA on train, KNN on validation projections, correctors on train errors
/// with validation as the zero-FP holdout. Throws EmptySplit.
TrainResult train_pipeline(const PipelineConfig& config, const DatasetSplit& split,
                           const CalibrationTable& calibration = {});

using ConfusionMatrix = std::array<std::array<std::size_t, kLabelCount>, kLabelCount>;  // [truth][pred]

struct GroupAccuracy {
  ErrorGroup group;
  bool corrector_enabled = false;
  std::size_t candidates = 0;
  double base = 0.0;
  double corrected = 0.0;
};

struct EvalReport {
  std::string split_name;
  std::size_t samples = 0;
  double base_accuracy = 0.0;
  double corrected_accuracy = 0.0;
  ConfusionMatrix base_confusion{};
  ConfusionMatrix corrected_confusion{};
  std::vector<GroupAccuracy> groups;
};

/// Throws EmptyEvalSet.
EvalReport evaluate(const ModelBundle& bundle, const LabeledSet& samples, std::string split_name = {});

struct AccuracySummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;

  static AccuracySummary of(const std::vector<double>& values);
};

struct CvCombo {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> assignment;
  std::vector<EvalReport> reports;  // train, validation, test, hold
};

struct CvSummary {
  std::vector<CvCombo> combos;
  // split name -> (base, corrected)
  std::map<std::string, std::pair<AccuracySummary, AccuracySummary>> accuracy;
};

/// Repeats split -> train -> evaluate with seeds derived from master_seed.
/// Pinned hold users (default: the last two users by name) stay in hold.
CvSummary cross_validate(const PipelineConfig& config, const LabeledSet& data, std::size_t n_combos,
                         std::uint64_t master_seed, const CalibrationTable& calibration = {});

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes);
/// Throws OversizeBundle (nothing written) when the encoding reaches 5 MB.
std::size_t save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws VersionMismatch, CorruptFile.
ModelBundle load_bundle(const std::filesystem::path& path);

struct LatencyStats {
  std::size_t samples = 0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  double mean_ms = 0.0;
  double wall_ms = 0.0;
  std::string hardware;
};

/// Single-threaded per-sample timing of corrected_predict.
LatencyStats bench_latency(const ModelBundle& bundle, const Eigen::MatrixXd& samples, std::size_t warmup,
                           std::size_t iters);

// Reports: human-readable text and JSON records.
std::string format_report(const EvalReport& report);
std::string format_audit(const ModelBundle& bundle);
std::string format_cv(const CvSummary& summary);
std::string format_latency(const LatencyStats& stats);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json audit_json(const ModelBundle& bundle);
nlohmann::json to_json(const CvSummary& summary);
nlohmann::json to_json(const LatencyStats& stats);

/// Synthetic or on-disk recordings, per the config.
RecordingSet load_or_generate(const PipelineConfig& config);
/// Default pinned hold users: the last two users in sorted order.
std::set<std::string> default_pinned_hold(const LabeledSet& data);

}  // namespace capgest
