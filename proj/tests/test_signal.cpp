#include <doctest.h>

#include <random>
#include <set>

#include "capgest/signal.hpp"
#include "helpers.hpp"

using namespace capgest;

namespace {

CalibrationTable table_for(const std::string& user, double lo, double hi) {
  CalibrationTable t;
  for (std::size_t c = 0; c < kChannels; ++c) t.set(user, c, {lo, hi});
  return t;
}

LabeledSet users_set(std::size_t n_users, std::size_t per_user) {
  std::vector<Sample> samples;
  for (std::size_t u = 0; u < n_users; ++u)
    for (std::size_t i = 0; i < per_user; ++i) {
      Sample s;
      s.user_id = (u + 1 < 10 ? "u0" : "u") + std::to_string(u + 1);
      s.matrix.setConstant(static_cast<double>(u) / static_cast<double>(n_users));
      samples.push_back(s);
    }
  return LabeledSet::from_samples(samples);
}

}  // namespace

TEST_CASE("labels round-trip through their names") {
  for (auto l : kAllLabels) CHECK(parse_label(to_string(l)) == l);
  CHECK(to_string(GestureLabel::FlickMiddle) == "flick_middle");
  CHECK(testutil::throws_kind(ErrorKind::Parse, [] { parse_label("wave"); }));
}

TEST_CASE("normalize maps calibration endpoints and midpoints") {
  auto rec = testutil::flat_recording(3, 0.0);
  for (auto& c : rec.channels) c = {100.0, 300.0, 200.0};
  const auto out = normalize(rec, table_for("u01", 100.0, 300.0));
  for (const auto& c : out.channels) {
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 1.0);
    CHECK(c[2] == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("normalize clamps drift and is idempotent on unit ranges") {
  auto rec = testutil::flat_recording(2, 0.0);
  for (auto& c : rec.channels) c = {50.0, 400.0};
  const auto out = normalize(rec, table_for("u01", 100.0, 300.0));
  CHECK(out.channels[2][0] == 0.0);
  CHECK(out.channels[2][1] == 1.0);

  std::mt19937_64 rng(7);
  auto r2 = testutil::flat_recording(40, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& c : r2.channels)
    for (auto& v : c) v = u(rng);
  const auto again = normalize(r2, table_for("u01", 0.0, 1.0));
  CHECK(again.channels == r2.channels);
}

TEST_CASE("normalize errors") {
  auto rec = testutil::flat_recording(5, 1.0);
  CHECK(testutil::throws_kind(ErrorKind::MissingCalibration, [&] { normalize(rec, table_for("u02", 0, 1)); }));
  CalibrationTable partial;
  partial.set("u01", 0, {0.0, 1.0});
  CHECK(testutil::throws_kind(ErrorKind::MissingCalibration, [&] { normalize(rec, partial); }));
  CHECK(testutil::throws_kind(ErrorKind::DegenerateRange, [&] { normalize(rec, table_for("u01", 2.0, 2.0)); }));
}

TEST_CASE("recording validation") {
  auto rec = testutil::flat_recording(30, 0.0);
  rec.marks = {{2, 10, GestureLabel::Shoot}, {10, 20, GestureLabel::Shoot}};
  CHECK(testutil::throws_kind(ErrorKind::InvalidRecording, [&] { rec.validate(); }));
  rec.marks = {{5, 35, GestureLabel::Shoot}};
  CHECK(testutil::throws_kind(ErrorKind::InvalidRecording, [&] { rec.validate(); }));
  rec.marks = {{5, 5, GestureLabel::Shoot}};
  CHECK(testutil::throws_kind(ErrorKind::InvalidRecording, [&] { rec.validate(); }));
  rec.marks = {{0, 29, GestureLabel::Shoot}};
  CHECK_NOTHROW(rec.validate());
  rec.channels[3].pop_back();
  CHECK(testutil::throws_kind(ErrorKind::InvalidRecording, [&] { rec.validate(); }));
}

TEST_CASE("extract_exact resamples to twenty frames") {
  SUBCASE("twenty frames are copied") {
    auto rec = testutil::flat_recording(20, 0.0);
    for (std::size_t t = 0; t < 20; ++t) rec.channels[1][t] = 0.05 * static_cast<double>(t);
    const auto s = extract_exact(rec, {0, 19, GestureLabel::IndexBend});
    CHECK(s.label == GestureLabel::IndexBend);
    for (std::size_t t = 0; t < 20; ++t) CHECK(s.matrix(1, static_cast<Eigen::Index>(t)) == rec.channels[1][t]);
  }
  SUBCASE("constants survive") {
    const auto rec = testutil::flat_recording(50, 0.7);
    const auto s = extract_exact(rec, {5, 44, GestureLabel::Shoot});
    CHECK((s.matrix.array() - 0.7).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("ten-frame ramp keeps endpoints and stays linear") {
    auto rec = testutil::flat_recording(10, 0.0);
    for (std::size_t t = 0; t < 10; ++t) rec.channels[0][t] = 0.1 * static_cast<double>(t);
    const auto s = extract_exact(rec, {0, 9, GestureLabel::FlickIndex});
    for (Eigen::Index t = 0; t < 20; ++t) CHECK(s.matrix(0, t) == doctest::Approx(0.9 * static_cast<double>(t) / 19.0));
  }
  SUBCASE("too short") {
    const auto rec = testutil::flat_recording(10, 0.0);
    CHECK(testutil::throws_kind(ErrorKind::SegmentTooShort, [&] { extract_exact(rec, {2, 3, GestureLabel::Shoot}); }));
  }
}

TEST_CASE("extract_sliding labels windows by their end frame") {
  auto rec = testutil::flat_recording(31, 0.2);
  rec.marks = {{0, 30, GestureLabel::FlickMiddle}};
  const auto windows = extract_sliding(rec, 1);
  REQUIRE(windows.size() == 12);  // ends 19..30
  CHECK(windows[0].label == GestureLabel::None);
  for (std::size_t i = 1; i < windows.size(); ++i) CHECK(windows[i].label == GestureLabel::FlickMiddle);

  CHECK(extract_sliding(testutil::flat_recording(19, 0.0), 1).empty());

  const auto plain = extract_sliding(testutil::flat_recording(100, 0.0), 1);
  CHECK(plain.size() == 81);
  for (const auto& w : plain) CHECK(w.label == GestureLabel::None);

  CHECK(extract_sliding(testutil::flat_recording(100, 0.0), 5).size() == 17);
}

TEST_CASE("extract_sliding window count is frames - 19 on unmarked recordings") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(20, 200);
  for (int i = 0; i < 50; ++i) {
    const auto n = len(rng);
    CHECK(extract_sliding(testutil::flat_recording(n, 0.5), 1).size() == n - 19);
  }
}

TEST_CASE("sample entries stay in [0,1] after normalization and windowing") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> raw(-50.0, 450.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto rec = testutil::flat_recording(60, 0.0);
    for (auto& c : rec.channels)
      for (auto& v : c) v = raw(rng);
    const auto norm = normalize(rec, table_for("u01", 0.0, 400.0));
    for (const auto& s : extract_sliding(norm, 1)) {
      CHECK(s.matrix.minCoeff() >= 0.0);
      CHECK(s.matrix.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("flatten is channel-major and inverts unflatten") {
  Sample zero;
  for (double v : flatten(zero).values) CHECK(v == 0.0);

  Sample thumb;
  thumb.matrix.row(0).setConstant(0.1);
  const auto fv = flatten(thumb);
  for (std::size_t i = 0; i < kFeatures; ++i) CHECK(fv.values[i] == (i < 20 ? 0.1 : 0.0));

  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    Sample s;
    s.matrix = testutil::uniform(5, 20, rng);
    CHECK(unflatten(flatten(s)).matrix == s.matrix);
    CHECK(flatten(s).values[40 + 7] == s.matrix(2, 7));
  }
}

TEST_CASE("split_by_user uses 8/3/2/2 user partitions") {
  const auto data = users_set(15, 4);
  const auto split = split_by_user(data, {}, 42);
  CHECK(split.train.distinct_users().size() == 8);
  CHECK(split.validation.distinct_users().size() == 3);
  CHECK(split.test.distinct_users().size() == 2);
  CHECK(split.hold.distinct_users().size() == 2);
  CHECK(split.train.size() + split.validation.size() + split.test.size() + split.hold.size() == data.size());

  const auto again = split_by_user(data, {}, 42);
  CHECK(again.assignment == split.assignment);
  CHECK(again.train.features == split.train.features);
}

TEST_CASE("pinned hold users stay in hold across seeds") {
  const auto data = users_set(15, 2);
  const std::set<std::string> pinned = {"u14", "u15"};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto split = split_by_user(data, {}, seed, pinned);
    const auto hold = split.hold.distinct_users();
    CHECK(std::set<std::string>(hold.begin(), hold.end()) == pinned);
  }
}

TEST_CASE("split partitions are user-disjoint for all seeds") {
  const auto data = users_set(15, 1);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto split = split_by_user(data, {}, rng());
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto* part : {&split.train, &split.validation, &split.test, &split.hold})
      for (const auto& u : part->distinct_users()) {
        seen.insert(u);
        ++total;
      }
    REQUIRE(total == 15);
    REQUIRE(seen.size() == 15);
  }
}

TEST_CASE("split_by_user needs enough users") {
  const auto data = users_set(10, 2);
  CHECK(testutil::throws_kind(ErrorKind::NotEnoughUsers, [&] { split_by_user(data, {}, 1); }));
}
