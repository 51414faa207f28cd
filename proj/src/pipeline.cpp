#include "capgest/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "capgest/dataset_io.hpp"
#include "capgest/error.hpp"
#include "parallel.hpp"

namespace capgest {

namespace {

std::vector<int> label_codes(const std::vector<GestureLabel>& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(label_index(l));
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TrainResult train_pipeline(const PipelineConfig& config, const DatasetSplit& split, const CalibrationTable& calibration) {
  config.validate();
  if (split.train.empty()) throw Error(ErrorKind::EmptySplit, "train split is empty");
  const LabeledSet& knn_set = config.knn_fit_on == KnnFitSet::Validation ? split.validation : split.train;
  if (knn_set.empty()) throw Error(ErrorKind::EmptySplit, "KNN fitting split is empty");

  BaseModel base;
  base.pca = pca_fit(split.train.features, config.n_pcs, false);
  base.knn = knn_fit(pca_transform(base.pca, knn_set.features), label_codes(knn_set.labels),
                     std::min<std::size_t>(config.knn_k, knn_set.size()));

  TrainResult result;
  result.bundle.cascade = train_cascade(std::move(base), config.corrector, split.train.features, split.train.labels,
                                        split.validation.features, split.validation.labels, &result.audit);
  result.bundle.calibration = calibration;
  result.bundle.stride_frames = config.stride_frames;
  return result;
}

EvalReport evaluate(const ModelBundle& bundle, const LabeledSet& samples, std::string split_name) {
  if (samples.empty()) throw Error(ErrorKind::EmptyEvalSet, "no samples to evaluate");
  EvalReport r;
  r.split_name = std::move(split_name);
  r.samples = samples.size();

  std::vector<CorrectionTrace> traces(samples.size());
  detail::parallel_for(samples.size(), [&](std::size_t i) {
    traces[i] = bundle.cascade.trace(samples.features.row(static_cast<Eigen::Index>(i)));
  });

  std::size_t base_ok = 0, corrected_ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto truth = samples.labels[i];
    const auto& t = traces[i];
    base_ok += t.base == truth;
    corrected_ok += t.output == truth;
    ++r.base_confusion[static_cast<std::size_t>(label_index(truth))][static_cast<std::size_t>(label_index(t.base))];
    ++r.corrected_confusion[static_cast<std::size_t>(label_index(truth))][static_cast<std::size_t>(label_index(t.output))];
  }
  r.base_accuracy = static_cast<double>(base_ok) / static_cast<double>(r.samples);
  r.corrected_accuracy = static_cast<double>(corrected_ok) / static_cast<double>(r.samples);

  for (const auto& g : bundle.cascade.groups.groups) {
    GroupAccuracy ga;
    ga.group = g;
    const Corrector* c = bundle.cascade.corrector_for(g);
    ga.corrector_enabled = c && c->enabled;
    std::size_t b = 0, k = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (traces[i].base != g.predicted) continue;
      ++ga.candidates;
      b += traces[i].base == samples.labels[i];
      k += traces[i].output == samples.labels[i];
    }
    if (ga.candidates > 0) {
      ga.base = static_cast<double>(b) / static_cast<double>(ga.candidates);
      ga.corrected = static_cast<double>(k) / static_cast<double>(ga.candidates);
    }
    r.groups.push_back(ga);
  }
  return r;
}

AccuracySummary AccuracySummary::of(const std::vector<double>& values) {
  AccuracySummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

std::set<std::string> default_pinned_hold(const LabeledSet& data) {
  const auto users = data.distinct_users();
  std::set<std::string> out;
  for (std::size_t i = users.size() >= 2 ? users.size() - 2 : 0; i < users.size(); ++i) out.insert(users[i]);
  return out;
}

CvSummary cross_validate(const PipelineConfig& config, const LabeledSet& data, std::size_t n_combos,
                         std::uint64_t master_seed, const CalibrationTable& calibration) {
  const auto users = data.distinct_users();
  if (users.size() < config.user_counts.total())
    throw Error(ErrorKind::NotEnoughUsers, "cross-validation needs " + std::to_string(config.user_counts.total()) +
                                               " users, have " + std::to_string(users.size()));
  std::set<std::string> pinned = config.pinned_hold;
  if (pinned.empty()) {
    const auto defaults = default_pinned_hold(data);
    for (const auto& u : defaults)
      if (pinned.size() < config.user_counts.hold) pinned.insert(u);
  }

  CvSummary summary;
  summary.combos.resize(n_combos);
  detail::parallel_for(n_combos, [&](std::size_t i) {
    auto& combo = summary.combos[i];
    combo.seed = splitmix64(master_seed + i);
    const auto split = split_by_user(data, config.user_counts, combo.seed, pinned);
    combo.assignment = split.assignment;
    const auto trained = train_pipeline(config, split, calibration);
    const std::pair<const char*, const LabeledSet*> parts[] = {
        {"train", &split.train}, {"validation", &split.validation}, {"test", &split.test}, {"hold", &split.hold}};
    for (const auto& [name, set] : parts)
      if (!set->empty()) combo.reports.push_back(evaluate(trained.bundle, *set, name));
  });

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& combo : summary.combos)
    for (const auto& r : combo.reports) {
      acc[r.split_name].first.push_back(r.base_accuracy);
      acc[r.split_name].second.push_back(r.corrected_accuracy);
    }
  for (const auto& [name, v] : acc) summary.accuracy[name] = {AccuracySummary::of(v.first), AccuracySummary::of(v.second)};
  return summary;
}

namespace {

std::string hardware_note() {
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line))
    if (line.rfind("model name", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2) + ", single thread";
    }
  return "unknown CPU, single thread";
}

double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

LatencyStats bench_latency(const ModelBundle& bundle, const Eigen::MatrixXd& samples, std::size_t warmup,
                           std::size_t iters) {
  LatencyStats stats;
  stats.hardware = hardware_note();
  if (samples.rows() == 0 || iters == 0) return stats;

  using clock = std::chrono::steady_clock;
  const auto rows = static_cast<std::size_t>(samples.rows());
  volatile int sink = 0;
  for (std::size_t i = 0; i < warmup; ++i)
    sink = sink + label_index(bundle.predict(samples.row(static_cast<Eigen::Index>(i % rows))));

  std::vector<double> ms(iters);
  const auto wall_start = clock::now();
  for (std::size_t i = 0; i < iters; ++i) {
    // Copy first so the timed call sees a contiguous vector, as a live caller would.
    const Eigen::RowVectorXd x = samples.row(static_cast<Eigen::Index>(i % rows));
    const auto t0 = clock::now();
    sink = sink + label_index(bundle.predict(x));
    const auto t1 = clock::now();
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  stats.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - wall_start).count();

  std::sort(ms.begin(), ms.end());
  stats.samples = iters;
  stats.p50_ms = percentile(ms, 0.50);
  stats.p95_ms = percentile(ms, 0.95);
  stats.max_ms = ms.back();
  stats.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(iters);
  return stats;
}

RecordingSet load_or_generate(const PipelineConfig& config) {
  if (!config.dataset_dir.empty()) return load_dataset(config.dataset_dir);
  return synth::gen_dataset(config.synth);
}

}  // namespace capgest
