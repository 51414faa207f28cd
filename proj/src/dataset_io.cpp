#include "capgest/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "capgest/error.hpp"

namespace capgest {

namespace fs = std::filesystem;

std::string format_real(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error(ErrorKind::Io, "cannot format number");
  return {buf, ptr};
}

double parse_real(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorKind::Parse, "not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

std::size_t parse_index(std::string_view text) {
  std::size_t v = 0;
  while (!text.empty() && text.back() == '\r') text.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorKind::Parse, "not a frame index: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(',', pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Next non-empty, non-comment line; false at EOF.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!next_line(in, line) || line != header)
    throw Error(ErrorKind::Parse, "expected header '" + std::string(header) + "', got '" + line + "'");
}

std::string key_value(std::istream& in, std::string_view key) {
  std::string line;
  if (!next_line(in, line)) throw Error(ErrorKind::Parse, "missing '" + std::string(key) + "' line");
  auto fields = split_commas(line);
  if (fields.size() != 2 || fields[0] != key)
    throw Error(ErrorKind::Parse, "expected '" + std::string(key) + ",<value>', got '" + line + "'");
  return std::string(fields[1]);
}

std::size_t channel_from_name(std::string_view name) {
  for (std::size_t c = 0; c < kChannels; ++c)
    if (kChannelNames[c] == name) return c;
  return parse_index(name);
}

}  // namespace

void write_recording(std::ostream& out, const Recording& recording) {
  recording.validate();
  out << "# capgest-recording v" << kDatasetFormatVersion << '\n';
  out << "user_id," << recording.user_id << '\n';
  out << "sample_rate_hz," << format_real(recording.sample_rate_hz) << '\n';
  out << "frame";
  for (auto name : kChannelNames) out << ',' << name;
  out << '\n';
  for (std::size_t f = 0; f < recording.frames(); ++f) {
    out << f;
    for (std::size_t c = 0; c < kChannels; ++c) out << ',' << format_real(recording.channels[c][f]);
    out << '\n';
  }
}

void write_annotations(std::ostream& out, const std::vector<GestureMark>& marks) {
  out << "# capgest-annotations v" << kDatasetFormatVersion << '\n';
  out << "start,end,label\n";
  for (const auto& m : marks) out << m.start << ',' << m.end << ',' << to_string(m.label) << '\n';
}

void write_calibration(std::ostream& out, const CalibrationTable& calib) {
  out << "# capgest-calibration v" << kDatasetFormatVersion << '\n';
  out << "user_id,channel,min_raw,max_raw\n";
  for (const auto& [user, ranges] : calib.entries())
    for (std::size_t c = 0; c < kChannels; ++c)
      if (ranges[c])
        out << user << ',' << kChannelNames[c] << ',' << format_real(ranges[c]->min_raw) << ','
            << format_real(ranges[c]->max_raw) << '\n';
}

Recording read_recording(std::istream& in) {
  Recording r;
  r.user_id = key_value(in, "user_id");
  r.sample_rate_hz = parse_real(key_value(in, "sample_rate_hz"));
  expect_header(in, "frame,thumb,index,middle,ring,pinky");
  std::string line;
  std::size_t expected = 0;
  while (next_line(in, line)) {
    auto fields = split_commas(line);
    if (fields.size() != kChannels + 1) throw Error(ErrorKind::Parse, "bad frame row: '" + line + "'");
    if (parse_index(fields[0]) != expected)
      throw Error(ErrorKind::Parse, "frames must be consecutive from 0 (row '" + line + "')");
    ++expected;
    for (std::size_t c = 0; c < kChannels; ++c) r.channels[c].push_back(parse_real(fields[c + 1]));
  }
  r.validate();
  return r;
}

std::vector<GestureMark> read_annotations(std::istream& in) {
  expect_header(in, "start,end,label");
  std::vector<GestureMark> marks;
  std::string line;
  while (next_line(in, line)) {
    auto fields = split_commas(line);
    if (fields.size() != 3) throw Error(ErrorKind::Parse, "bad annotation row: '" + line + "'");
    marks.push_back({parse_index(fields[0]), parse_index(fields[1]), parse_label(fields[2])});
  }
  return marks;
}

CalibrationTable read_calibration(std::istream& in) {
  expect_header(in, "user_id,channel,min_raw,max_raw");
  CalibrationTable table;
  std::string line;
  while (next_line(in, line)) {
    auto fields = split_commas(line);
    if (fields.size() != 4) throw Error(ErrorKind::Parse, "bad calibration row: '" + line + "'");
    table.set(std::string(fields[0]), channel_from_name(fields[1]),
              {parse_real(fields[2]), parse_real(fields[3])});
  }
  return table;
}

void save_dataset(const fs::path& dir, const RecordingSet& set) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < set.recordings.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "rec_%06zu", i);
    std::ofstream rec(dir / (std::string(stem) + ".rec.csv"), std::ios::binary);
    std::ofstream ann(dir / (std::string(stem) + ".ann.csv"), std::ios::binary);
    if (!rec || !ann) throw Error(ErrorKind::Io, "cannot write into " + dir.string());
    write_recording(rec, set.recordings[i]);
    write_annotations(ann, set.recordings[i].marks);
  }
  std::ofstream cal(dir / "calibration.csv", std::ios::binary);
  if (!cal) throw Error(ErrorKind::Io, "cannot write calibration into " + dir.string());
  write_calibration(cal, set.calibration);
}

RecordingSet load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 8 && name.ends_with(".rec.csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  RecordingSet set;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    Recording r = read_recording(in);
    auto ann_path = path;
    ann_path.replace_filename(path.filename().string().substr(0, path.filename().string().size() - 8) + ".ann.csv");
    if (fs::exists(ann_path)) {
      std::ifstream ann(ann_path, std::ios::binary);
      r.marks = read_annotations(ann);
      r.validate();
    }
    set.recordings.push_back(std::move(r));
  }
  if (fs::exists(dir / "calibration.csv")) {
    std::ifstream cal(dir / "calibration.csv", std::ios::binary);
    set.calibration = read_calibration(cal);
  }
  return set;
}

namespace {

Recording normalized_with_fallback(const Recording& r, const CalibrationTable& calib) {
  if (calib.has_user(r.user_id)) return normalize(r, calib);
  return normalize(r, fallback_calibration(r));
}

}  // namespace

LabeledSet build_sliding_set(const RecordingSet& set, const ExtractOptions& opts) {
  std::vector<Sample> samples;
  for (const auto& r : set.recordings) {
    auto windows = extract_sliding(normalized_with_fallback(r, set.calibration), opts.stride_frames);
    samples.insert(samples.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  return LabeledSet::from_samples(samples);
}

LabeledSet build_exact_set(const RecordingSet& set) {
  std::vector<Sample> samples;
  for (const auto& r : set.recordings) {
    const auto norm = normalized_with_fallback(r, set.calibration);
    for (const auto& m : norm.marks) samples.push_back(extract_exact(norm, m));
  }
  return LabeledSet::from_samples(samples);
}

std::vector<FeatureVector> read_feature_vectors(std::istream& in) {
  std::vector<FeatureVector> out;
  std::string line;
  while (next_line(in, line)) {
    auto fields = split_commas(line);
    if (fields.size() != kFeatures)
      throw Error(ErrorKind::Parse, "feature row has " + std::to_string(fields.size()) + " values, expected 100");
    FeatureVector fv;
    for (std::size_t i = 0; i < kFeatures; ++i) fv.values[i] = parse_real(fields[i]);
    out.push_back(fv);
  }
  return out;
}

}  // namespace capgest
