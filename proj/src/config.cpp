#include <fstream>
#include <istream>
#include <sstream>

#include "capgest/dataset_io.hpp"
#include "capgest/error.hpp"
#include "capgest/pipeline.hpp"

namespace capgest {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    if (v.empty() || v.front() == '-' || v.front() == '+') throw std::invalid_argument(v);
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, "config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::defaults() { return PipelineConfig{}; }

void PipelineConfig::validate() const {
  if (n_pcs < 1 || n_pcs > static_cast<int>(kFeatures)) throw Error(ErrorKind::ParamOutOfRange, "n_pcs must lie in [1, 100]");
  if (knn_k < 1) throw Error(ErrorKind::ParamOutOfRange, "knn_k must be positive");
  if (stride_frames < 1) throw Error(ErrorKind::ParamOutOfRange, "stride_frames must be positive");
  if (corrector.classifiers.empty()) throw Error(ErrorKind::ParamOutOfRange, "at least one corrector classifier required");
  for (const auto& k : corrector.kernels) k.validate();
  corrector.group_kernel.validate();
  if (pinned_hold.size() > user_counts.hold)
    throw Error(ErrorKind::ParamOutOfRange, "more pinned hold users than hold slots");
}

PipelineConfig PipelineConfig::parse(std::istream& in) {
  PipelineConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Parse, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "n_pcs") c.n_pcs = static_cast<int>(to_u64(key, value));
    else if (key == "knn_k") c.knn_k = to_u64(key, value);
    else if (key == "knn_fit_on") {
      if (value == "validation") c.knn_fit_on = KnnFitSet::Validation;
      else if (value == "train") c.knn_fit_on = KnnFitSet::Train;
      else throw Error(ErrorKind::Parse, "knn_fit_on must be 'validation' or 'train'");
    } else if (key == "kernels") {
      c.corrector.kernels.clear();
      for (const auto& k : split(value, ';')) c.corrector.kernels.push_back(KernelSpec::parse(k));
    } else if (key == "classifiers") {
      c.corrector.classifiers.clear();
      for (const auto& k : split(value, ',')) c.corrector.classifiers.push_back(parse_classifier(k));
    } else if (key == "min_support") c.corrector.min_support = to_u64(key, value);
    else if (key == "group_kernel") c.corrector.group_kernel = KernelSpec::parse(value);
    else if (key == "group_classifier") c.corrector.group_classifier = parse_group_classifier(value);
    else if (key == "train_users") c.user_counts.train = to_u64(key, value);
    else if (key == "validation_users") c.user_counts.validation = to_u64(key, value);
    else if (key == "test_users") c.user_counts.test = to_u64(key, value);
    else if (key == "hold_users") c.user_counts.hold = to_u64(key, value);
    else if (key == "split_seed") c.split_seed = to_u64(key, value);
    else if (key == "pinned_hold") {
      auto users = split(value, ',');
      c.pinned_hold = {users.begin(), users.end()};
    } else if (key == "stride_frames") c.stride_frames = to_u64(key, value);
    else if (key == "synth.n_users") c.synth.n_users = to_u64(key, value);
    else if (key == "synth.gestures_per_class") c.synth.gestures_per_user_per_class = to_u64(key, value);
    else if (key == "synth.none_ratio") c.synth.none_ratio = parse_real(value);
    else if (key == "synth.seed") c.synth.seed = to_u64(key, value);
    else if (key == "dataset_dir") c.dataset_dir = value;
    else throw Error(ErrorKind::Parse, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
  return parse(in);
}

std::string PipelineConfig::to_text() const {
  std::ostringstream out;
  out << "n_pcs = " << n_pcs << '\n';
  out << "knn_k = " << knn_k << '\n';
  out << "knn_fit_on = " << (knn_fit_on == KnnFitSet::Validation ? "validation" : "train") << '\n';
  out << "kernels = ";
  for (std::size_t i = 0; i < corrector.kernels.size(); ++i) out << (i ? "; " : "") << corrector.kernels[i].encode();
  out << '\n';
  out << "classifiers = ";
  for (std::size_t i = 0; i < corrector.classifiers.size(); ++i) out << (i ? "," : "") << to_string(corrector.classifiers[i]);
  out << '\n';
  out << "min_support = " << corrector.min_support << '\n';
  out << "group_kernel = " << corrector.group_kernel.encode() << '\n';
  out << "group_classifier = " << to_string(corrector.group_classifier) << '\n';
  out << "train_users = " << user_counts.train << '\n';
  out << "validation_users = " << user_counts.validation << '\n';
  out << "test_users = " << user_counts.test << '\n';
  out << "hold_users = " << user_counts.hold << '\n';
  out << "split_seed = " << split_seed << '\n';
  out << "pinned_hold = ";
  bool first = true;
  for (const auto& u : pinned_hold) {
    out << (first ? "" : ",") << u;
    first = false;
  }
  out << '\n';
  out << "stride_frames = " << stride_frames << '\n';
  out << "synth.n_users = " << synth.n_users << '\n';
  out << "synth.gestures_per_class = " << synth.gestures_per_user_per_class << '\n';
  out << "synth.none_ratio = " << format_real(synth.none_ratio) << '\n';
  out << "synth.seed = " << synth.seed << '\n';
  if (!dataset_dir.empty()) out << "dataset_dir = " << dataset_dir.string() << '\n';
  return out.str();
}

std::string config_reference() {
  return "Config file: one 'key = value' per line, '#' starts a comment. Defaults:\n\n" +
         PipelineConfig::defaults().to_text() +
         "\nkernels are ';'-separated kernel specs (pca:N, poly:N:D, knn:N:K, concat(a,b)).\n"
         "pinned_hold empty means: the last two users in sorted order.\n"
         "dataset_dir unset means: generate the synthetic dataset from the synth.* keys.\n";
}

}  // namespace capgest
