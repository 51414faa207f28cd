#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capgest/dataset_io.hpp"
#include "capgest/pipeline.hpp"

namespace capgest {

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

void write_confusion(std::ostringstream& out, const char* title, const ConfusionMatrix& m) {
  out << title << " (rows = truth, columns = prediction)\n";
  out << pad("", 14);
  for (auto l : kAllLabels) out << lpad(std::string(to_string(l)), 14);
  out << '\n';
  for (std::size_t t = 0; t < kLabelCount; ++t) {
    out << pad(std::string(to_string(kAllLabels[t])), 14);
    for (std::size_t p = 0; p < kLabelCount; ++p) out << lpad(std::to_string(m[t][p]), 14);
    out << '\n';
  }
}

nlohmann::json confusion_json(const ConfusionMatrix& m) {
  auto j = nlohmann::json::array();
  for (const auto& row : m) j.push_back(row);
  return j;
}

nlohmann::json summary_json(const AccuracySummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "split " << (r.split_name.empty() ? "-" : r.split_name) << ", " << r.samples << " samples\n";
  out << "accuracy  base " << fixed(r.base_accuracy) << "  base+corrector " << fixed(r.corrected_accuracy) << "\n\n";
  out << pad("error group", 30) << lpad("id", 4) << lpad("corrector", 11) << lpad("candidates", 12) << lpad("base", 9)
      << lpad("corrected", 11) << '\n';
  for (const auto& g : r.groups)
    out << pad(g.group.describe(), 30) << lpad(std::to_string(g.group.id()), 4)
        << lpad(g.corrector_enabled ? "yes" : "no", 11) << lpad(std::to_string(g.candidates), 12)
        << lpad(fixed(g.base), 9) << lpad(fixed(g.corrected), 11) << '\n';
  out << "(group id = 5 * truth index + predicted index, label order index_bend, shoot, flick_index, "
         "flick_middle, none)\n\n";
  write_confusion(out, "base confusion", r.base_confusion);
  out << '\n';
  write_confusion(out, "base+corrector confusion", r.corrected_confusion);
  return out.str();
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"group_id", g.group.id()},
                      {"truth", to_string(g.group.truth)},
                      {"predicted", to_string(g.group.predicted)},
                      {"corrector_enabled", g.corrector_enabled},
                      {"candidates", g.candidates},
                      {"base_accuracy", g.base},
                      {"corrected_accuracy", g.corrected}});
  return {{"split", r.split_name},
          {"samples", r.samples},
          {"base_accuracy", r.base_accuracy},
          {"corrected_accuracy", r.corrected_accuracy},
          {"groups", groups},
          {"base_confusion", confusion_json(r.base_confusion)},
          {"corrected_confusion", confusion_json(r.corrected_confusion)}};
}

std::string format_audit(const ModelBundle& bundle) {
  const auto& c = bundle.cascade;
  std::ostringstream out;
  out << "bundle version " << bundle.version << "\n";
  out << "base model: uncentered PCA with " << c.base.pca.n_components() << " components (explained variance";
  for (Eigen::Index i = 0; i < c.base.pca.explained_variance_ratio.size(); ++i)
    out << ' ' << fixed(c.base.pca.explained_variance_ratio(i));
  out << "), KNN K=" << c.base.knn.k << " over " << c.base.knn.reference.rows() << " reference points\n";
  out << "group classifier: "
      << (c.groups.fallback ? std::string("gate by base prediction only")
                            : std::string(to_string(c.groups.kind)) + " over " + c.groups.spec.encode())
      << ", " << c.groups.groups.size() << " groups\n\n";
  out << pad("error group", 30) << lpad("id", 4) << lpad("enabled", 9) << "  " << pad("kernel", 26)
      << pad("classifier", 11) << lpad("threshold", 12) << lpad("train TP/errors", 17) << lpad("holdout TP/errors", 19)
      << '\n';
  for (const auto& k : c.correctors) {
    out << pad(k.group.describe(), 30) << lpad(std::to_string(k.group.id()), 4) << lpad(k.enabled ? "yes" : "no", 9)
        << "  " << pad(k.enabled ? k.kernel.spec().encode() : "-", 26)
        << pad(k.enabled ? std::string(to_string(k.classifier.kind)) : "-", 11)
        << lpad(k.enabled ? fixed(k.threshold, 6) : "-", 12)
        << lpad(std::to_string(k.stats.train_tp) + "/" + std::to_string(k.stats.train_errors), 17)
        << lpad(std::to_string(k.stats.holdout_tp) + "/" + std::to_string(k.stats.holdout_errors), 19) << '\n';
  }
  return out.str();
}

nlohmann::json audit_json(const ModelBundle& bundle) {
  const auto& c = bundle.cascade;
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& k : c.correctors) {
    nlohmann::json g = {{"group_id", k.group.id()},
                        {"truth", to_string(k.group.truth)},
                        {"predicted", to_string(k.group.predicted)},
                        {"enabled", k.enabled},
                        {"train_candidates", k.stats.train_candidates},
                        {"train_errors", k.stats.train_errors},
                        {"train_tp", k.stats.train_tp},
                        {"holdout_candidates", k.stats.holdout_candidates},
                        {"holdout_errors", k.stats.holdout_errors},
                        {"holdout_tp", k.stats.holdout_tp}};
    if (k.enabled) {
      g["kernel"] = k.kernel.spec().encode();
      g["classifier"] = to_string(k.classifier.kind);
      g["threshold"] = k.threshold;
    }
    groups.push_back(g);
  }
  return {{"version", bundle.version},
          {"base", {{"n_pcs", c.base.pca.n_components()}, {"knn_k", c.base.knn.k}, {"knn_reference", c.base.knn.reference.rows()}}},
          {"group_classifier", c.groups.fallback ? "gate" : std::string(to_string(c.groups.kind))},
          {"group_kernel", c.groups.spec.encode()},
          {"groups", groups}};
}

std::string format_cv(const CvSummary& s) {
  std::ostringstream out;
  out << s.combos.size() << " user combinations\n";
  out << pad("split", 12) << pad("model", 16) << lpad("mean", 9) << lpad("std", 9) << lpad("min", 9) << lpad("max", 9)
      << '\n';
  for (const char* name : {"train", "validation", "test", "hold"}) {
    auto it = s.accuracy.find(name);
    if (it == s.accuracy.end()) continue;
    for (int which = 0; which < 2; ++which) {
      const auto& a = which == 0 ? it->second.first : it->second.second;
      out << pad(name, 12) << pad(which == 0 ? "base" : "base+corrector", 16) << lpad(fixed(a.mean), 9)
          << lpad(fixed(a.stddev), 9) << lpad(fixed(a.min), 9) << lpad(fixed(a.max), 9) << '\n';
    }
  }
  return out.str();
}

nlohmann::json to_json(const CvSummary& s) {
  nlohmann::json combos = nlohmann::json::array();
  for (const auto& c : s.combos) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : c.reports)
      reports.push_back({{"split", r.split_name}, {"base_accuracy", r.base_accuracy}, {"corrected_accuracy", r.corrected_accuracy}});
    combos.push_back({{"seed", c.seed}, {"assignment", c.assignment}, {"reports", reports}});
  }
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [name, v] : s.accuracy) acc[name] = {{"base", summary_json(v.first)}, {"corrected", summary_json(v.second)}};
  return {{"combos", combos}, {"accuracy", acc}};
}

std::string format_latency(const LatencyStats& s) {
  std::ostringstream out;
  out << "corrected_predict latency over " << s.samples << " calls (" << s.hardware << ")\n";
  out << "p50 " << fixed(s.p50_ms, 4) << " ms  p95 " << fixed(s.p95_ms, 4) << " ms  max " << fixed(s.max_ms, 4)
      << " ms  mean " << fixed(s.mean_ms, 4) << " ms  wall " << fixed(s.wall_ms, 1) << " ms\n";
  return out.str();
}

nlohmann::json to_json(const LatencyStats& s) {
  return {{"samples", s.samples}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms},
          {"mean_ms", s.mean_ms}, {"wall_ms", s.wall_ms}, {"hardware", s.hardware}};
}

}  // namespace capgest
