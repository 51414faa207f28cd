#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "capgest/classify.hpp"
#include "capgest/dataset_io.hpp"
#include "capgest/embed.hpp"
#include "capgest/synth.hpp"
#include "helpers.hpp"

using namespace capgest;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

synth::UserProfile quiet_profile() {
  auto p = synth::gen_profile(17, "u01");
  p.amplitude_scale = 1.0;
  p.tempo = 1.0;
  p.sigma_amp = 0.0;
  p.sigma_time_ms = 0.0;
  p.sigma_noise = 0.0;
  return p;
}

const RecordingSet& default_dataset() {
  static const RecordingSet set = synth::gen_dataset({});
  return set;
}

}  // namespace

TEST_CASE("gen_profile is deterministic and within ranges") {
  CHECK(synth::gen_profile(5) == synth::gen_profile(5));
  CHECK_FALSE(synth::gen_profile(5) == synth::gen_profile(6));
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto p = synth::gen_profile(s);
    for (std::size_t c = 0; c < kChannels; ++c) {
      CHECK(p.gain[c] > 0.0);
      const auto cal = p.calibration()[c];
      CHECK(cal.min_raw < cal.max_raw);
      CHECK(p.baseline_raw[c] >= cal.min_raw);
    }
    CHECK(p.sigma_amp >= 0.0);
    CHECK(p.sigma_time_ms >= 0.0);
    CHECK(p.sigma_noise >= 0.0);
  }
}

TEST_CASE("templates activate the documented fingers") {
  auto channels = [](GestureLabel l) {
    std::vector<std::size_t> out;
    for (const auto& p : synth::gesture_template(l).pulses) out.push_back(p.channel);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(channels(GestureLabel::IndexBend) == std::vector<std::size_t>{1});
  CHECK(channels(GestureLabel::Shoot) == std::vector<std::size_t>{1, 2});
  CHECK(channels(GestureLabel::FlickIndex) == std::vector<std::size_t>{1});
  CHECK(channels(GestureLabel::FlickMiddle) == std::vector<std::size_t>{2});
  CHECK(synth::gesture_template(GestureLabel::FlickIndex).span_ms() <
        synth::gesture_template(GestureLabel::IndexBend).span_ms());
}

TEST_CASE("noise-free IndexBend leaves the other fingers at baseline") {
  const auto p = quiet_profile();
  const auto rec = synth::gen_recording(p, GestureLabel::IndexBend, 3);
  REQUIRE(rec.marks.size() == 1);
  CHECK(rec.marks[0].label == GestureLabel::IndexBend);
  for (std::size_t c : {0u, 2u, 3u, 4u})
    for (double v : rec.channels[c]) CHECK(v == p.baseline_raw[c]);
  CHECK(*std::max_element(rec.channels[1].begin(), rec.channels[1].end()) > p.baseline_raw[1]);
}

TEST_CASE("Shoot peaks on index and middle") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = synth::gen_profile(s, "u01");
    const auto rec = synth::gen_recording(p, GestureLabel::Shoot, 1000 + s);
    const auto& tmpl = synth::gesture_template(GestureLabel::Shoot);
    for (const auto& pulse : tmpl.pulses) {
      const auto& trace = rec.channels[pulse.channel];
      const double peak = *std::max_element(trace.begin(), trace.end());
      CHECK(peak > p.baseline_raw[pulse.channel] + 0.5 * p.gain[pulse.channel] * pulse.amplitude);
    }
  }
}

TEST_CASE("None recordings carry no marks") {
  const auto p = synth::gen_profile(1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto rec = synth::gen_recording(p, GestureLabel::None, s);
    CHECK(rec.marks.empty());
    CHECK(rec.frames() >= kWindowFrames);
  }
}

TEST_CASE("generated recordings are valid and stay near the calibration range") {
  const auto p = synth::gen_profile(8, "u01");
  const auto cal = p.calibration();
  for (auto label : kAllLabels)
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto rec = synth::gen_recording(p, label, s);
      CHECK_NOTHROW(rec.validate());
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double slack = 6.0 * p.sigma_noise;
        for (double v : rec.channels[c]) {
          CHECK(v >= cal[c].min_raw - slack);
          CHECK(v <= cal[c].max_raw + slack);
        }
      }
    }
}

TEST_CASE("default dataset has 15 users and over 20,000 sliding samples") {
  const auto& set = default_dataset();
  CHECK(set.calibration.users().size() == 15);
  const auto samples = build_sliding_set(set);
  CHECK(samples.size() > 20000);
  CHECK(samples.distinct_users().size() == 15);

  std::array<std::size_t, kLabelCount> counts{};
  for (auto l : samples.labels) ++counts[static_cast<std::size_t>(label_index(l))];
  for (std::size_t i = 0; i + 1 < kLabelCount; ++i) CHECK(counts[4] > counts[i]);
}

TEST_CASE("dynamic gestures separate with a same-user 3-PC KNN") {
  const auto samples = build_sliding_set(default_dataset());
  std::vector<std::size_t> fit_rows, probe_rows;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (is_dynamic(samples.labels[i])) (i % 2 ? fit_rows : probe_rows).push_back(i);
  const auto fit = samples.subset(fit_rows);
  const auto probe = samples.subset(probe_rows);
  const auto pca = pca_fit(fit.features, 3, false);
  std::vector<int> y;
  for (auto l : fit.labels) y.push_back(label_index(l));
  const auto knn = knn_fit(pca_transform(pca, fit.features), y, 5);
  const Eigen::MatrixXd z = pca_transform(pca, probe.features);
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) ok += knn_predict(knn, z.row(i)) == label_index(probe.labels[i]);
  CHECK(static_cast<double>(ok) / static_cast<double>(probe.size()) >= 0.95);
}

TEST_CASE("same config gives byte-identical dataset files") {
  synth::GenConfig cfg;
  cfg.gestures_per_user_per_class = 3;
  const auto a = fs::temp_directory_path() / "capgest_synth_a";
  const auto b = fs::temp_directory_path() / "capgest_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  save_dataset(a, synth::gen_dataset(cfg));
  save_dataset(b, synth::gen_dataset(cfg));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 15 * 15 * 2 + 1);

  const auto loaded = load_dataset(a);
  const auto original = synth::gen_dataset(cfg);
  REQUIRE(loaded.recordings.size() == original.recordings.size());
  for (std::size_t i = 0; i < loaded.recordings.size(); ++i) {
    CHECK(loaded.recordings[i].channels == original.recordings[i].channels);
    CHECK(loaded.recordings[i].marks == original.recordings[i].marks);
    CHECK(loaded.recordings[i].user_id == original.recordings[i].user_id);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("recording and calibration text formats") {
  auto rec = testutil::flat_recording(3, 0.0, "alice");
  rec.channels[1] = {1.5, 2.25, -0.125};
  rec.sample_rate_hz = 41.5;
  rec.marks = {{0, 2, GestureLabel::Shoot}};

  std::stringstream body;
  write_recording(body, rec);
  const auto back = read_recording(body);
  CHECK(back.user_id == "alice");
  CHECK(back.sample_rate_hz == 41.5);
  CHECK(back.channels == rec.channels);

  std::stringstream ann;
  write_annotations(ann, rec.marks);
  CHECK(read_annotations(ann) == rec.marks);

  CalibrationTable cal;
  cal.set("alice", 3, {10.0, 20.5});
  std::stringstream cal_text;
  write_calibration(cal_text, cal);
  const auto cal_back = read_calibration(cal_text);
  REQUIRE(cal_back.find("alice", 3).has_value());
  CHECK(cal_back.find("alice", 3)->max_raw == 20.5);
  CHECK_FALSE(cal_back.find("alice", 2).has_value());

  std::istringstream bad("# capgest-recording v1\nuser_id,a\nsample_rate_hz,40\nframe,thumb,index,middle,ring,pinky\n0,1,2\n");
  CHECK(testutil::throws_kind(ErrorKind::Parse, [&] { read_recording(bad); }));
  std::istringstream bad_ann("start,end,label\n1,5,wave\n");
  CHECK(testutil::throws_kind(ErrorKind::Parse, [&] { read_annotations(bad_ann); }));
}

TEST_CASE("format_real round-trips exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(parse_real(format_real(v)) == v);
  }
  CHECK(testutil::throws_kind(ErrorKind::Parse, [] { parse_real("1.5x"); }));
}

TEST_CASE("feature vector files need 100 values per line") {
  std::ostringstream line;
  for (int i = 0; i < 100; ++i) line << (i ? "," : "") << i * 0.01;
  std::istringstream ok(line.str() + "\n" + line.str() + "\n");
  const auto rows = read_feature_vectors(ok);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].values[99] == doctest::Approx(0.99));
  std::istringstream short_line("0.1,0.2\n");
  CHECK(testutil::throws_kind(ErrorKind::Parse, [&] { read_feature_vectors(short_line); }));
}
