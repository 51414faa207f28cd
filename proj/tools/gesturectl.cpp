// gesturectl: synthetic data, training, evaluation, cross-validation,
// latency benchmarking and inspection of gesture-recognition bundles.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 budget violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capgest/dataset_io.hpp"
#include "capgest/error.hpp"
#include "capgest/pipeline.hpp"
#include "capgest/synth.hpp"

namespace {

using namespace capgest;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBudget = 3;

struct BudgetViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string data_dir;
};

PipelineConfig load_config(const Common& common) {
  try {
    auto config = common.config_path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(common.config_path);
    if (!common.data_dir.empty()) config.dataset_dir = common.data_dir;
    return config;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct PreparedData {
  RecordingSet recordings;
  LabeledSet samples;
  DatasetSplit split;
};

PreparedData prepare(const PipelineConfig& config) {
  PreparedData d;
  d.recordings = load_or_generate(config);
  d.samples = build_sliding_set(d.recordings, {config.stride_frames});
  auto pinned = config.pinned_hold;
  if (pinned.empty())
    for (const auto& u : default_pinned_hold(d.samples))
      if (pinned.size() < config.user_counts.hold) pinned.insert(u);
  d.split = split_by_user(d.samples, config.user_counts, config.split_seed, pinned);
  return d;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

int run_synth(const Common& common, const std::string& out_dir) {
  const auto config = load_config(common);
  const auto set = synth::gen_dataset(config.synth);
  save_dataset(out_dir, set);
  std::cout << "wrote " << set.recordings.size() << " recordings for " << set.calibration.users().size()
            << " users to " << out_dir << '\n';
  return 0;
}

int run_train(const Common& common, const std::string& bundle_path, const std::string& audit_path) {
  const auto config = load_config(common);
  const auto data = prepare(config);
  const auto trained = train_pipeline(config, data.split, data.recordings.calibration);
  std::size_t bytes = 0;
  try {
    bytes = save_bundle(trained.bundle, bundle_path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::OversizeBundle) throw BudgetViolation(e.what());
    throw;
  }
  std::cout << "train " << data.split.train.size() << " / validation " << data.split.validation.size()
            << " / test " << data.split.test.size() << " / hold " << data.split.hold.size() << " samples\n";
  std::cout << format_audit(trained.bundle);
  std::cout << "saved " << bundle_path << " (" << bytes << " bytes)\n";
  write_json(audit_path, audit_json(trained.bundle));
  return 0;
}

int run_eval(const Common& common, const std::string& bundle_path, const std::string& split_name,
             const std::string& json_path) {
  const auto config = load_config(common);
  const auto bundle = load_bundle(bundle_path);
  const auto data = prepare(config);
  const std::pair<const char*, const LabeledSet*> parts[] = {{"train", &data.split.train},
                                                             {"validation", &data.split.validation},
                                                             {"test", &data.split.test},
                                                             {"hold", &data.split.hold}};
  nlohmann::json reports = nlohmann::json::array();
  bool any = false;
  for (const auto& [name, set] : parts) {
    if (split_name != "all" && split_name != name) continue;
    any = true;
    if (set->empty()) continue;
    const auto report = evaluate(bundle, *set, name);
    std::cout << format_report(report) << '\n';
    reports.push_back(to_json(report));
  }
  if (!any) throw CLI::ValidationError("--split", "unknown split '" + split_name + "'");
  write_json(json_path, reports);
  return 0;
}

int run_cv(const Common& common, std::size_t combos, std::uint64_t seed, const std::string& json_path) {
  const auto config = load_config(common);
  const auto recordings = load_or_generate(config);
  const auto samples = build_sliding_set(recordings, {config.stride_frames});
  const auto summary = cross_validate(config, samples, combos, seed, recordings.calibration);
  std::cout << format_cv(summary);
  write_json(json_path, to_json(summary));
  return 0;
}

int run_bench(const Common& common, const std::string& bundle_path, std::size_t warmup, std::size_t iters,
              double budget_ms, const std::string& json_path) {
  const auto config = load_config(common);
  const auto bundle = load_bundle(bundle_path);
  const auto data = prepare(config);
  const auto& probe = data.split.test.empty() ? data.split.train : data.split.test;
  const auto stats = bench_latency(bundle, probe.features, warmup, iters);
  std::cout << format_latency(stats);
  write_json(json_path, to_json(stats));
  if (stats.samples > 0 && !(stats.p95_ms < budget_ms))
    throw BudgetViolation("p95 latency " + std::to_string(stats.p95_ms) + " ms exceeds budget " +
                          std::to_string(budget_ms) + " ms");
  return 0;
}

int run_predict(const std::string& bundle_path, const std::string& features_path, const std::string& recordings_dir) {
  const auto bundle = load_bundle(bundle_path);
  if (!recordings_dir.empty()) {
    auto set = load_dataset(recordings_dir);
    if (set.calibration.entries().empty()) set.calibration = bundle.calibration;
    const auto samples = build_sliding_set(set, {bundle.stride_frames});
    for (Eigen::Index i = 0; i < samples.features.rows(); ++i)
      std::cout << to_string(bundle.predict(samples.features.row(i))) << '\n';
    return 0;
  }
  std::ifstream file;
  std::istream* in = &std::cin;
  if (features_path != "-") {
    file.open(features_path);
    if (!file) throw Error(ErrorKind::Io, "cannot read " + features_path);
    in = &file;
  }
  for (const auto& fv : read_feature_vectors(*in)) std::cout << to_string(bundle.predict(fv.view())) << '\n';
  return 0;
}

int run_inspect(const std::string& bundle_path, bool as_json) {
  const auto bundle = load_bundle(bundle_path);
  if (as_json) std::cout << audit_json(bundle).dump(2) << '\n';
  else std::cout << format_audit(bundle);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacitive gesture recognition with an error-corrector cascade"};
  app.require_subcommand(1);
  app.footer("\n" + config_reference() +
             "\nExit codes: 0 success, 1 usage error, 2 data error, 3 budget violation (size/latency).");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Config file (key = value); built-in defaults otherwise");
    sub->add_option("-d,--data", common.data_dir, "Dataset directory; synthetic data from the config otherwise");
  };

  std::string out_dir = "synthetic-data";
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic dataset in the recording/calibration formats");
  add_common(synth_cmd);
  synth_cmd->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();

  std::string bundle_path = "model.bundle";
  std::string json_path;
  auto* train_cmd = app.add_subcommand("train", "Train base model and correctors, save the bundle (< 5 MB)");
  add_common(train_cmd);
  train_cmd->add_option("-o,--out", bundle_path, "Bundle path")->capture_default_str();
  train_cmd->add_option("--audit-json", json_path, "Also write the corrector audit as JSON");

  std::string split_name = "all";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate base vs base+corrector accuracy per split");
  add_common(eval_cmd);
  eval_cmd->add_option("-b,--bundle", bundle_path, "Bundle path")->capture_default_str();
  eval_cmd->add_option("-s,--split", split_name, "train, validation, test, hold or all")->capture_default_str();
  eval_cmd->add_option("--json", json_path, "Also write reports as JSON");

  std::size_t combos = 10;
  std::uint64_t cv_seed = 1;
  auto* cv_cmd = app.add_subcommand("cv", "User-grouped cross-validation with pinned hold users");
  add_common(cv_cmd);
  cv_cmd->add_option("-n,--combos", combos, "Number of user combinations")->capture_default_str();
  cv_cmd->add_option("--seed", cv_seed, "Master seed")->capture_default_str();
  cv_cmd->add_option("--json", json_path, "Also write the summary as JSON");

  std::size_t warmup = 200, iters = 5000;
  double budget_ms = 1.0;
  auto* bench_cmd = app.add_subcommand("bench", "Single-threaded per-sample latency of the corrected prediction");
  add_common(bench_cmd);
  bench_cmd->add_option("-b,--bundle", bundle_path, "Bundle path")->capture_default_str();
  bench_cmd->add_option("--warmup", warmup, "Untimed calls")->capture_default_str();
  bench_cmd->add_option("--iters", iters, "Timed calls")->capture_default_str();
  bench_cmd->add_option("--budget-ms", budget_ms, "Fail (exit 3) when p95 reaches this")->capture_default_str();
  bench_cmd->add_option("--json", json_path, "Also write the stats as JSON");

  std::string features_path, recordings_dir;
  auto* predict_cmd = app.add_subcommand("predict", "Emit one label per line for feature vectors or recordings");
  predict_cmd->add_option("-b,--bundle", bundle_path, "Bundle path")->capture_default_str();
  auto* feat_opt = predict_cmd->add_option("-f,--features", features_path,
                                           "File of 100 comma-separated values per line ('-' = stdin)");
  auto* rec_opt = predict_cmd->add_option("-r,--recordings", recordings_dir,
                                          "Dataset directory; every sliding window is classified");
  feat_opt->excludes(rec_opt);
  predict_cmd->callback([&] {
    if (features_path.empty() && recordings_dir.empty())
      throw CLI::RequiredError("--features or --recordings");
  });

  bool as_json = false;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the corrector audit report of a bundle");
  inspect_cmd->add_option("-b,--bundle", bundle_path, "Bundle path")->capture_default_str();
  inspect_cmd->add_flag("--json", as_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(common, out_dir);
    if (*train_cmd) return run_train(common, bundle_path, json_path);
    if (*eval_cmd) return run_eval(common, bundle_path, split_name, json_path);
    if (*cv_cmd) return run_cv(common, combos, cv_seed, json_path);
    if (*bench_cmd) return run_bench(common, bundle_path, warmup, iters, budget_ms, json_path);
    if (*predict_cmd) return run_predict(bundle_path, features_path, recordings_dir);
    if (*inspect_cmd) return run_inspect(bundle_path, as_json);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BudgetViolation& e) {
    std::cerr << "budget violation: " << e.what() << '\n';
    return kExitBudget;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
