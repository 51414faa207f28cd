#pragma once

// Line-oriented UTF-8 text formats, comma separated.
//
// Recording file (<name>.rec.csv):
//   # capgest-recording v1
//   user_id,<id>
//   sample_rate_hz,<real>
//   frame,thumb,index,middle,ring,pinky
//   <frame>,<raw>,<raw>,<raw>,<raw>,<raw>      (one row per frame)
//
// Annotation file (<name>.ann.csv), next to its recording:
//   # capgest-annotations v1
//   start,end,label
//   <start>,<end>,<label>                        (inclusive frame indices)
//
// Calibration file (calibration.csv):
//   # capgest-calibration v1
//   user_id,channel,min_raw,max_raw
//   <id>,<channel name>,<real>,<real>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "capgest/signal.hpp"

namespace capgest {

inline constexpr int kDatasetFormatVersion = 1;

/// Shortest round-trip decimal text for a double.
std::string format_real(double value);
double parse_real(std::string_view text);

void write_recording(std::ostream& out, const Recording& recording);
void write_annotations(std::ostream& out, const std::vector<GestureMark>& marks);
void write_calibration(std::ostream& out, const CalibrationTable& calib);

Recording read_recording(std::istream& in);
std::vector<GestureMark> read_annotations(std::istream& in);
CalibrationTable read_calibration(std::istream& in);

struct RecordingSet {
  std::vector<Recording> recordings;
  CalibrationTable calibration;
};

/// Writes rec_<index>.rec.csv / .ann.csv pairs plus calibration.csv.
void save_dataset(const std::filesystem::path& dir, const RecordingSet& set);
/// Loads every *.rec.csv in name order; a missing annotation file means no marks.
/// calibration.csv is optional.
RecordingSet load_dataset(const std::filesystem::path& dir);

struct ExtractOptions {
  std::size_t stride_frames = 1;
};

/// normalize (calibration file, falling back to per-recording range) ->
/// sliding windows -> flatten.
LabeledSet build_sliding_set(const RecordingSet& set, const ExtractOptions& opts = {});
/// normalize -> one resampled sample per mark -> flatten.
LabeledSet build_exact_set(const RecordingSet& set);

/// Raw feature-vector stream: one line of 100 comma-separated reals per sample.
std::vector<FeatureVector> read_feature_vectors(std::istream& in);

}  // namespace capgest
