#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capgest/pipeline.hpp"
#include "fixture.hpp"
#include "helpers.hpp"

using namespace capgest;
namespace fs = std::filesystem;

namespace {

PipelineConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return PipelineConfig::parse(in);
}

}  // namespace

TEST_CASE("config defaults and round-trip") {
  const auto d = PipelineConfig::defaults();
  CHECK(d.n_pcs == 3);
  CHECK(d.knn_k == 5);
  CHECK(d.knn_fit_on == KnnFitSet::Validation);
  CHECK(d.corrector.min_support == 10);
  CHECK(d.corrector.group_kernel == KernelSpec::pca(9));
  CHECK(d.synth.n_users == 15);

  const auto back = parse_text(d.to_text());
  CHECK(back.to_text() == d.to_text());

  const auto c = parse_text(
      "# comment\n n_pcs = 4\nknn_k=7\nknn_fit_on = train\nkernels = pca:9; concat(pca:20,poly:5:4)\n"
      "classifiers = centroid\ngroup_classifier = lda-ovr\npinned_hold = u01, u02\nsynth.none_ratio = 0.5\n");
  CHECK(c.n_pcs == 4);
  CHECK(c.knn_k == 7);
  CHECK(c.knn_fit_on == KnnFitSet::Train);
  REQUIRE(c.corrector.kernels.size() == 2);
  CHECK(c.corrector.kernels[1].encode() == "concat(pca:20,poly:5:4)");
  CHECK(c.corrector.classifiers == std::vector<BinaryClassifierKind>{BinaryClassifierKind::Centroid});
  CHECK(c.corrector.group_classifier == GroupClassifierKind::LdaOneVsRest);
  CHECK(c.pinned_hold == std::set<std::string>{"u01", "u02"});
  CHECK(c.synth.none_ratio == 0.5);
  CHECK(config_reference().find("n_pcs = 3") != std::string::npos);
}

TEST_CASE("config errors") {
  CHECK(testutil::throws_kind(ErrorKind::Parse, [] { parse_text("colour = blue\n"); }));
  CHECK(testutil::throws_kind(ErrorKind::Parse, [] { parse_text("n_pcs\n"); }));
  CHECK(testutil::throws_kind(ErrorKind::Parse, [] { parse_text("knn_k = -3\n"); }));
  CHECK(testutil::throws_kind(ErrorKind::ParamOutOfRange, [] { parse_text("n_pcs = 0\n"); }));
  CHECK(testutil::throws_kind(ErrorKind::ParamOutOfRange, [] { parse_text("kernels = poly:30:2\n"); }));
  CHECK(testutil::throws_kind(ErrorKind::ParamOutOfRange, [] { parse_text("pinned_hold = a,b,c\n"); }));
}

TEST_CASE("train_pipeline builds the configured base model") {
  const auto& run = testutil::small_run();
  const auto& bundle = run.trained.bundle;
  CHECK(bundle.version == kBundleVersion);
  CHECK(bundle.cascade.base.pca.n_components() == 3);
  CHECK(bundle.cascade.base.knn.k == 5);
  CHECK(static_cast<std::size_t>(bundle.cascade.base.knn.reference.rows()) == run.split.validation.size());
  std::size_t enabled = 0;
  for (const auto& k : bundle.cascade.correctors) enabled += k.enabled;
  CHECK(enabled >= 1);
  CHECK(bundle.calibration.users().size() == 15);
}

TEST_CASE("training is deterministic") {
  const auto& run = testutil::small_run();
  const auto again = train_pipeline(run.config, run.split, run.recordings.calibration);
  CHECK(serialize_bundle(again.bundle) == serialize_bundle(run.trained.bundle));
  CHECK(format_report(evaluate(again.bundle, run.split.test, "test")) ==
        format_report(evaluate(run.trained.bundle, run.split.test, "test")));
  CHECK(audit_json(again.bundle).dump() == audit_json(run.trained.bundle).dump());
}

TEST_CASE("evaluate report structure") {
  const auto& run = testutil::small_run();
  const auto r = evaluate(run.trained.bundle, run.split.train, "train");
  CHECK(r.samples == run.split.train.size());
  CHECK(r.corrected_accuracy >= r.base_accuracy);

  std::array<std::size_t, kLabelCount> per_class{};
  for (auto l : run.split.train.labels) ++per_class[static_cast<std::size_t>(label_index(l))];
  for (std::size_t t = 0; t < kLabelCount; ++t) {
    CHECK(std::accumulate(r.base_confusion[t].begin(), r.base_confusion[t].end(), std::size_t{0}) == per_class[t]);
    CHECK(std::accumulate(r.corrected_confusion[t].begin(), r.corrected_confusion[t].end(), std::size_t{0}) == per_class[t]);
  }
  CHECK(r.groups.size() == run.trained.bundle.cascade.groups.groups.size());
  const auto text = format_report(r);
  CHECK(text.find("base+corrector") != std::string::npos);
  CHECK(to_json(r)["groups"].size() == r.groups.size());

  CHECK(testutil::throws_kind(ErrorKind::EmptyEvalSet, [&] { evaluate(run.trained.bundle, LabeledSet{}); }));
}

TEST_CASE("evaluate on perfectly predicted samples") {
  const auto& run = testutil::small_run();
  const auto& bundle = run.trained.bundle;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < run.split.test.size(); ++i) {
    const auto row = run.split.test.features.row(static_cast<Eigen::Index>(i));
    if (bundle.cascade.base.predict(row) == run.split.test.labels[i] && bundle.predict(row) == run.split.test.labels[i])
      rows.push_back(i);
  }
  REQUIRE_FALSE(rows.empty());
  const auto r = evaluate(bundle, run.split.test.subset(rows));
  CHECK(r.base_accuracy == 1.0);
  CHECK(r.corrected_accuracy == 1.0);
}

TEST_CASE("bundle round-trip and corruption") {
  const auto& run = testutil::small_run();
  const auto bytes = serialize_bundle(run.trained.bundle);
  CHECK(bytes.size() < kBundleSizeBudget);
  const auto back = deserialize_bundle(bytes);
  CHECK(serialize_bundle(back) == bytes);
  const auto& probe = run.samples;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(probe.features.rows(), 1000); ++i)
    CHECK(back.predict(probe.features.row(i)) == run.trained.bundle.predict(probe.features.row(i)));

  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK(testutil::throws_kind(ErrorKind::CorruptFile, [&] { deserialize_bundle(truncated); }));
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK(testutil::throws_kind(ErrorKind::CorruptFile, [&] { deserialize_bundle(flipped); }));
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(testutil::throws_kind(ErrorKind::CorruptFile, [&] { deserialize_bundle(magic); }));
  auto version = bytes;
  version[8] = static_cast<std::uint8_t>(kBundleVersion + 1);
  CHECK(testutil::throws_kind(ErrorKind::VersionMismatch, [&] { deserialize_bundle(version); }));

  const auto path = fs::temp_directory_path() / "capgest_test.bundle";
  CHECK(save_bundle(run.trained.bundle, path) == bytes.size());
  CHECK(serialize_bundle(load_bundle(path)) == bytes);
  fs::resize_file(path, bytes.size() - 3);
  CHECK(testutil::throws_kind(ErrorKind::CorruptFile, [&] { load_bundle(path); }));
  fs::remove(path);
  CHECK(testutil::throws_kind(ErrorKind::Io, [&] { load_bundle(path); }));
}

TEST_CASE("oversize bundles are refused on save") {
  ModelBundle big = testutil::small_run().trained.bundle;
  big.cascade.base.knn.reference = Eigen::MatrixXd::Ones(300000, 3);
  big.cascade.base.knn.labels.assign(300000, 0);
  const auto path = fs::temp_directory_path() / "capgest_big.bundle";
  CHECK(testutil::throws_kind(ErrorKind::OversizeBundle, [&] { save_bundle(big, path); }));
  CHECK_FALSE(fs::exists(path));
}

TEST_CASE("cross-validation is deterministic and keeps hold users pinned") {
  const auto& run = testutil::small_run();
  auto config = run.config;
  config.corrector.kernels = {KernelSpec::pca(9)};
  const auto a = cross_validate(config, run.samples, 2, 77);
  const auto b = cross_validate(config, run.samples, 2, 77);
  CHECK(to_json(a).dump() == to_json(b).dump());
  REQUIRE(a.combos.size() == 2);
  const auto pinned = default_pinned_hold(run.samples);
  for (const auto& combo : a.combos) {
    for (const auto& u : pinned) CHECK(combo.assignment.at(u) == "hold");
    CHECK(combo.reports.size() == 4);
  }
  CHECK(a.accuracy.at("test").first.count == 2);
  CHECK(format_cv(a).find("hold") != std::string::npos);

  LabeledSet few = run.samples.filter_users({"u01", "u02", "u03"});
  CHECK(testutil::throws_kind(ErrorKind::NotEnoughUsers, [&] { cross_validate(config, few, 1, 1); }));
}

TEST_CASE("latency benchmark") {
  const auto& run = testutil::small_run();
  const auto empty = bench_latency(run.trained.bundle, Eigen::MatrixXd(0, 100), 10, 100);
  CHECK(empty.samples == 0);
  CHECK_FALSE(empty.hardware.empty());
  const auto s = bench_latency(run.trained.bundle, run.split.test.features, 10, 200);
  CHECK(s.samples == 200);
  CHECK(s.p50_ms <= s.p95_ms);
  CHECK(s.p95_ms <= s.max_ms);
  CHECK(format_latency(s).find("p95") != std::string::npos);
}

TEST_CASE("dataset directory round trip feeds the same samples") {
  const auto& run = testutil::small_run();
  const auto dir = fs::temp_directory_path() / "capgest_pipeline_data";
  fs::remove_all(dir);
  save_dataset(dir, run.recordings);
  auto config = run.config;
  config.dataset_dir = dir;
  const auto loaded = build_sliding_set(load_or_generate(config));
  CHECK(loaded.labels == run.samples.labels);
  CHECK(loaded.features == run.samples.features);
  fs::remove_all(dir);
}
