#include "capgest/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "capgest/error.hpp"

namespace capgest {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingCalibration: return "MissingCalibration";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::InvalidRecording: return "InvalidRecording";
    case ErrorKind::SegmentTooShort: return "SegmentTooShort";
    case ErrorKind::NotEnoughUsers: return "NotEnoughUsers";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorKind::TooFewGroups: return "TooFewGroups";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::OversizeBundle: return "OversizeBundle";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

GestureLabel label_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kLabelCount))
    throw Error(ErrorKind::Parse, "label index out of range: " + std::to_string(index));
  return static_cast<GestureLabel>(index);
}

std::string_view to_string(GestureLabel l) {
  switch (l) {
    case GestureLabel::IndexBend: return "index_bend";
    case GestureLabel::Shoot: return "shoot";
    case GestureLabel::FlickIndex: return "flick_index";
    case GestureLabel::FlickMiddle: return "flick_middle";
    case GestureLabel::None: return "none";
  }
  return "none";
}

GestureLabel parse_label(std::string_view text) {
  for (auto l : kAllLabels)
    if (to_string(l) == text) return l;
  throw Error(ErrorKind::Parse, "unknown gesture label '" + std::string(text) + "'");
}

void Recording::validate() const {
  const std::size_t n = channels[0].size();
  if (n == 0) throw Error(ErrorKind::InvalidRecording, "recording '" + user_id + "' has no frames");
  for (const auto& c : channels)
    if (c.size() != n) throw Error(ErrorKind::InvalidRecording, "channel lengths differ in '" + user_id + "'");
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::InvalidRecording, "sample rate must be positive");
  std::vector<GestureMark> sorted = marks;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& m = sorted[i];
    if (m.start >= m.end || m.end >= n)
      throw Error(ErrorKind::InvalidRecording, "mark [" + std::to_string(m.start) + ", " + std::to_string(m.end) +
                                                   "] is empty or out of bounds");
    if (i > 0 && sorted[i - 1].end >= m.start) throw Error(ErrorKind::InvalidRecording, "overlapping marks");
  }
}

void CalibrationTable::set(const std::string& user, std::size_t channel, ChannelRange range) {
  if (channel >= kChannels) throw Error(ErrorKind::Parse, "channel index out of range");
  entries_[user][channel] = range;
}

std::optional<ChannelRange> CalibrationTable::find(const std::string& user, std::size_t channel) const {
  auto it = entries_.find(user);
  if (it == entries_.end() || channel >= kChannels) return std::nullopt;
  return it->second[channel];
}

bool CalibrationTable::has_user(const std::string& user) const { return entries_.count(user) > 0; }

std::vector<std::string> CalibrationTable::users() const {
  std::vector<std::string> out;
  for (const auto& [u, _] : entries_) out.push_back(u);
  return out;
}

std::array<ChannelRange, kChannels> fallback_calibration(const Recording& recording) {
  std::array<ChannelRange, kChannels> ranges{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& trace = recording.channels[c];
    auto [lo, hi] = std::minmax_element(trace.begin(), trace.end());
    ranges[c] = {*lo, *hi};
    if (!(*hi > *lo)) ranges[c] = {*lo, *lo + 1.0};
  }
  return ranges;
}

Recording normalize(const Recording& recording, const std::array<ChannelRange, kChannels>& ranges) {
  Recording out = recording;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto [lo, hi] = ranges[c];
    if (!(lo < hi))
      throw Error(ErrorKind::DegenerateRange, "user '" + recording.user_id + "' channel " +
                                                  std::string(kChannelNames[c]) + " has min >= max");
    const double width = hi - lo;
    for (double& v : out.channels[c]) v = std::clamp((v - lo) / width, 0.0, 1.0);
  }
  return out;
}

Recording normalize(const Recording& recording, const CalibrationTable& calib) {
  std::array<ChannelRange, kChannels> ranges{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto r = calib.find(recording.user_id, c);
    if (!r)
      throw Error(ErrorKind::MissingCalibration,
                  "no range for user '" + recording.user_id + "' channel " + std::string(kChannelNames[c]));
    ranges[c] = *r;
  }
  return normalize(recording, ranges);
}

FeatureVector FeatureVector::from_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != static_cast<Eigen::Index>(kFeatures))
    throw Error(ErrorKind::DimensionMismatch, "feature vector needs 100 values, got " + std::to_string(row.size()));
  FeatureVector fv;
  for (std::size_t i = 0; i < kFeatures; ++i) fv.values[i] = row(static_cast<Eigen::Index>(i));
  return fv;
}

Sample extract_exact(const Recording& normalized, const GestureMark& mark) {
  if (mark.end < mark.start + 2)
    throw Error(ErrorKind::SegmentTooShort, "segment [" + std::to_string(mark.start) + ", " +
                                                std::to_string(mark.end) + "] spans fewer than 3 frames");
  if (mark.end >= normalized.frames()) throw Error(ErrorKind::InvalidRecording, "mark out of bounds");

  Sample s;
  s.label = mark.label;
  s.user_id = normalized.user_id;
  const double span = static_cast<double>(mark.end - mark.start);
  for (std::size_t t = 0; t < kWindowFrames; ++t) {
    const double pos = static_cast<double>(mark.start) + span * static_cast<double>(t) / (kWindowFrames - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    lo = std::min(lo, mark.end);
    const std::size_t hi = std::min(lo + 1, mark.end);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const auto& trace = normalized.channels[c];
      const double v = frac == 0.0 ? trace[lo] : trace[lo] + frac * (trace[hi] - trace[lo]);
      s.matrix(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = std::clamp(v, 0.0, 1.0);
    }
  }
  return s;
}

namespace {

// First frame (inclusive) at which a window may end and still carry the mark's label.
std::size_t eligible_end_start(const GestureMark& m) {
  const std::size_t len = m.end - m.start;
  return m.start + (2 * len + 2) / 3;  // ceil(2/3 * len)
}

}  // namespace

std::vector<Sample> extract_sliding(const Recording& normalized, std::size_t stride_frames) {
  if (stride_frames == 0) throw Error(ErrorKind::ParamOutOfRange, "stride must be positive");
  std::vector<Sample> out;
  const std::size_t n = normalized.frames();
  if (n < kWindowFrames) return out;

  for (std::size_t end = kWindowFrames - 1; end < n; end += stride_frames) {
    const std::size_t begin = end + 1 - kWindowFrames;
    GestureLabel label = GestureLabel::None;
    for (const auto& m : normalized.marks)
      if (end >= eligible_end_start(m) && end <= m.end) {
        label = m.label;
        break;
      }
    Sample s;
    s.label = label;
    s.user_id = normalized.user_id;
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t t = 0; t < kWindowFrames; ++t)
        s.matrix(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = normalized.channels[c][begin + t];
    out.push_back(std::move(s));
  }
  return out;
}

FeatureVector flatten(const Sample& sample) {
  FeatureVector fv;
  // Row-major storage makes the raw buffer channel-major already.
  std::copy(sample.matrix.data(), sample.matrix.data() + kFeatures, fv.values.begin());
  return fv;
}

Sample unflatten(const FeatureVector& features, GestureLabel label, std::string user_id) {
  Sample s;
  std::copy(features.values.begin(), features.values.end(), s.matrix.data());
  s.label = label;
  s.user_id = std::move(user_id);
  return s;
}

LabeledSet LabeledSet::from_samples(const std::vector<Sample>& samples) {
  LabeledSet set;
  set.features.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(kFeatures));
  set.labels.reserve(samples.size());
  set.users.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    set.features.row(static_cast<Eigen::Index>(i)) = flatten(samples[i]).view();
    set.labels.push_back(samples[i].label);
    set.users.push_back(samples[i].user_id);
  }
  return set;
}

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& rows) const {
  LabeledSet out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
    out.users.push_back(users[rows[i]]);
  }
  return out;
}

LabeledSet LabeledSet::filter_users(const std::set<std::string>& keep) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < users.size(); ++i)
    if (keep.count(users[i])) rows.push_back(i);
  return subset(rows);
}

std::vector<std::string> LabeledSet::distinct_users() const {
  std::set<std::string> s(users.begin(), users.end());
  return {s.begin(), s.end()};
}

DatasetSplit split_by_user(const LabeledSet& samples, const UserCounts& counts, std::uint64_t seed,
                           const std::set<std::string>& pinned_hold) {
  const auto users = samples.distinct_users();
  if (users.size() < counts.total())
    throw Error(ErrorKind::NotEnoughUsers, "need " + std::to_string(counts.total()) + " users, have " +
                                               std::to_string(users.size()));
  for (const auto& u : pinned_hold)
    if (!std::binary_search(users.begin(), users.end(), u))
      throw Error(ErrorKind::NotEnoughUsers, "pinned hold user '" + u + "' is not in the data");
  if (pinned_hold.size() > counts.hold)
    throw Error(ErrorKind::ParamOutOfRange, "more pinned hold users than hold slots");

  std::vector<std::string> free_users;
  for (const auto& u : users)
    if (!pinned_hold.count(u)) free_users.push_back(u);
  std::mt19937_64 rng(seed);
  std::shuffle(free_users.begin(), free_users.end(), rng);

  std::set<std::string> train, validation, test, hold(pinned_hold.begin(), pinned_hold.end());
  std::size_t next = 0;
  auto take = [&](std::set<std::string>& part, std::size_t n) {
    while (part.size() < n) part.insert(free_users[next++]);
  };
  take(train, counts.train);
  take(validation, counts.validation);
  take(test, counts.test);
  take(hold, counts.hold);

  DatasetSplit split;
  split.train = samples.filter_users(train);
  split.validation = samples.filter_users(validation);
  split.test = samples.filter_users(test);
  split.hold = samples.filter_users(hold);
  for (const auto& u : train) split.assignment[u] = "train";
  for (const auto& u : validation) split.assignment[u] = "validation";
  for (const auto& u : test) split.assignment[u] = "test";
  for (const auto& u : hold) split.assignment[u] = "hold";
  return split;
}

}  // namespace capgest
