#pragma once

// Capacitive recordings and the preprocessing that turns them into
// fixed-size 5x20 samples and user-grouped dataset splits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace capgest {

inline constexpr std::size_t kChannels = 5;
inline constexpr std::size_t kWindowFrames = 20;
inline constexpr std::size_t kFeatures = kChannels * kWindowFrames;
inline constexpr double kNominalRateHz = 40.0;

/// Fixed label order; indices are used for group numbering and tie-breaking.
enum class GestureLabel : std::uint8_t { IndexBend = 0, Shoot = 1, FlickIndex = 2, FlickMiddle = 3, None = 4 };

inline constexpr std::size_t kLabelCount = 5;
inline constexpr std::array<GestureLabel, kLabelCount> kAllLabels = {
    GestureLabel::IndexBend, GestureLabel::Shoot, GestureLabel::FlickIndex, GestureLabel::FlickMiddle,
    GestureLabel::None};

inline constexpr int label_index(GestureLabel l) { return static_cast<int>(l); }
GestureLabel label_from_index(int index);
inline constexpr bool is_dynamic(GestureLabel l) { return l != GestureLabel::None; }

std::string_view to_string(GestureLabel l);
GestureLabel parse_label(std::string_view text);

inline constexpr std::array<std::string_view, kChannels> kChannelNames = {"thumb", "index", "middle", "ring",
                                                                          "pinky"};

/// Inclusive frame range [start, end] bracketing one performed gesture.
struct GestureMark {
  std::size_t start = 0;
  std::size_t end = 0;
  GestureLabel label = GestureLabel::None;

  std::size_t frames() const { return end - start + 1; }
  friend bool operator==(const GestureMark&, const GestureMark&) = default;
};

struct Recording {
  std::string user_id;
  std::array<std::vector<double>, kChannels> channels;
  double sample_rate_hz = kNominalRateHz;
  std::vector<GestureMark> marks;

  std::size_t frames() const { return channels[0].size(); }

  /// Throws InvalidRecording when traces differ in length, are empty, or marks
  /// overlap / fall out of bounds.
  void validate() const;
};

struct ChannelRange {
  double min_raw = 0.0;  // fully open
  double max_raw = 1.0;  // full press
};

/// Per (user, channel) normalization endpoints.
class CalibrationTable {
public:
  void set(const std::string& user, std::size_t channel, ChannelRange range);
  std::optional<ChannelRange> find(const std::string& user, std::size_t channel) const;
  bool has_user(const std::string& user) const;
  std::vector<std::string> users() const;

  const std::map<std::string, std::array<std::optional<ChannelRange>, kChannels>>& entries() const {
    return entries_;
  }

private:
  std::map<std::string, std::array<std::optional<ChannelRange>, kChannels>> entries_;
};

/// Per-channel min/max of the recording itself; used when no calibration
/// file covers a user. Flat channels get a unit-width range around the value.
std::array<ChannelRange, kChannels> fallback_calibration(const Recording& recording);

/// Maps every value to clamp((v - min) / (max - min), 0, 1).
Recording normalize(const Recording& recording, const CalibrationTable& calib);
Recording normalize(const Recording& recording, const std::array<ChannelRange, kChannels>& ranges);

/// 5 channels x 20 timestamps, every entry in [0, 1].
struct Sample {
  Eigen::Matrix<double, kChannels, kWindowFrames, Eigen::RowMajor> matrix =
      Eigen::Matrix<double, kChannels, kWindowFrames, Eigen::RowMajor>::Zero();
  GestureLabel label = GestureLabel::None;
  std::string user_id;
};

/// Flattened channel-major sample: features [20c, 20c+20) belong to channel c.
struct FeatureVector {
  std::array<double, kFeatures> values{};

  Eigen::Map<const Eigen::RowVectorXd> view() const {
    return Eigen::Map<const Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(kFeatures));
  }
  static FeatureVector from_row(const Eigen::Ref<const Eigen::RowVectorXd>& row);
};

/// Resamples the marked segment to 20 frames by linear interpolation.
Sample extract_exact(const Recording& normalized, const GestureMark& mark);

/// 20-frame windows at the given stride. A window ending in the final third of
/// a mark carries that mark's label; every other window is labeled None.
std::vector<Sample> extract_sliding(const Recording& normalized, std::size_t stride_frames = 1);

FeatureVector flatten(const Sample& sample);
Sample unflatten(const FeatureVector& features, GestureLabel label = GestureLabel::None,
                 std::string user_id = {});

/// Row-per-sample feature matrix with aligned labels and user ids.
struct LabeledSet {
  Eigen::MatrixXd features;  // n x 100
  std::vector<GestureLabel> labels;
  std::vector<std::string> users;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  static LabeledSet from_samples(const std::vector<Sample>& samples);
  LabeledSet subset(const std::vector<std::size_t>& rows) const;
  LabeledSet filter_users(const std::set<std::string>& keep) const;
  std::vector<std::string> distinct_users() const;
};

struct UserCounts {
  std::size_t train = 8;
  std::size_t validation = 3;
  std::size_t test = 2;
  std::size_t hold = 2;

  std::size_t total() const { return train + validation + test + hold; }
};

struct DatasetSplit {
  LabeledSet train;
  LabeledSet validation;
  LabeledSet test;
  LabeledSet hold;
  std::map<std::string, std::string> assignment;  // user -> partition name
};

/// Users are shuffled deterministically by seed; pinned users always go to
/// hold. Users beyond the requested counts are left out.
DatasetSplit split_by_user(const LabeledSet& samples, const UserCounts& counts, std::uint64_t seed,
                           const std::set<std::string>& pinned_hold = {});

}  // namespace capgest
