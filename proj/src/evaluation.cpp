#include "tsf/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace tsf {

SequenceResult per_frame_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  return per_frame_metrics(pred, gt, std::vector<bool>(gt.size(), true));
}

SequenceResult per_frame_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt,
                                 const std::vector<bool>& valid) {
  if (pred.size() != gt.size() || gt.size() != valid.size())
    throw DataError("per_frame_metrics: prediction/ground-truth length mismatch");
  SequenceResult r;
  r.os.reserve(gt.size());
  r.pe.reserve(gt.size());
  r.valid = valid;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (valid[i]) {
      r.os.push_back(iou(pred[i], gt[i]));
      r.pe.push_back(center_error(pred[i], gt[i]));
    } else {
      r.os.push_back(0.0);
      r.pe.push_back(0.0);
    }
  }
  return r;
}

namespace {

std::vector<double> success_grid() {
  std::vector<double> th;
  for (int i = 0; i <= 20; ++i) th.push_back(i * 0.05);
  return th;
}

std::vector<double> precision_grid() {
  std::vector<double> th;
  for (int i = 0; i <= 50; ++i) th.push_back(static_cast<double>(i));
  return th;
}

template <typename Keep>
MetricCurve curve_from(const std::vector<SequenceResult>& results, const std::vector<double>& grid,
                       Aggregation mode, Keep keep, bool success_like) {
  MetricCurve c;
  c.thresholds = grid;
  c.values.assign(grid.size(), 0.0);
  if (mode == Aggregation::kPooled) {
    long n = 0;
    std::vector<long> counts(grid.size(), 0);
    for (const auto& r : results)
      for (size_t i = 0; i < r.os.size(); ++i) {
        if (!r.valid[i]) continue;
        ++n;
        for (size_t k = 0; k < grid.size(); ++k)
          if (keep(r, i, grid[k])) ++counts[k];
      }
    if (n == 0) throw DataError("metric curve: no valid frames");
    for (size_t k = 0; k < grid.size(); ++k)
      c.values[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
  } else {
    long seqs = 0;
    for (const auto& r : results) {
      long n = 0;
      std::vector<long> counts(grid.size(), 0);
      for (size_t i = 0; i < r.os.size(); ++i) {
        if (!r.valid[i]) continue;
        ++n;
        for (size_t k = 0; k < grid.size(); ++k)
          if (keep(r, i, grid[k])) ++counts[k];
      }
      if (n == 0) continue;
      ++seqs;
      for (size_t k = 0; k < grid.size(); ++k)
        c.values[k] += static_cast<double>(counts[k]) / static_cast<double>(n);
    }
    if (seqs == 0) throw DataError("metric curve: no valid sequences");
    for (auto& v : c.values) v /= static_cast<double>(seqs);
  }
  c.auc = std::accumulate(c.values.begin(), c.values.end(), 0.0) / static_cast<double>(c.values.size());
  // These hold by construction; a violation means the curve code broke.
  for (size_t k = 1; k < c.values.size(); ++k) {
    if (success_like && c.values[k] > c.values[k - 1] + 1e-12)
      throw NumericalError("success curve not monotone");
    if (!success_like && c.values[k] + 1e-12 < c.values[k - 1])
      throw NumericalError("precision curve not monotone");
  }
  return c;
}

}  // namespace

MetricCurve success_curve(const std::vector<SequenceResult>& results, Aggregation mode) {
  return curve_from(
      results, success_grid(), mode,
      [](const SequenceResult& r, size_t i, double th) { return r.os[i] > th; }, true);
}

MetricCurve precision_curve(const std::vector<SequenceResult>& results, Aggregation mode) {
  return curve_from(
      results, precision_grid(), mode,
      [](const SequenceResult& r, size_t i, double th) { return r.pe[i] < th; }, false);
}

Report aggregate_report(const std::string& tracker, const std::string& dataset,
                        const std::vector<SequenceResult>& results, double fps, Aggregation mode) {
  Report rep;
  rep.tracker = tracker;
  rep.dataset = dataset;
  rep.success = success_curve(results, mode);
  rep.precision = precision_curve(results, mode);
  rep.auc = rep.success.auc;
  rep.precision_at_20 = rep.precision.values.at(20);
  rep.fps = fps;
  for (const auto& r : results) {
    std::vector<SequenceResult> one{r};
    SequenceSummary s;
    s.id = r.id;
    s.frames = r.os.size();
    s.auc = success_curve(one).auc;
    s.precision_at_20 = precision_curve(one).values.at(20);
    double sum = 0.0;
    long n = 0;
    for (size_t i = 0; i < r.os.size(); ++i)
      if (r.valid[i]) {
        sum += r.os[i];
        ++n;
      }
    s.mean_os = n ? sum / static_cast<double>(n) : 0.0;
    s.attributes.assign(r.attributes.begin(), r.attributes.end());
    rep.per_sequence.push_back(std::move(s));
  }
  // Attribute slices: curves over the sequences carrying each tag.
  std::set<std::string> tags;
  for (const auto& r : results) tags.insert(r.attributes.begin(), r.attributes.end());
  for (const auto& tag : tags) {
    std::vector<SequenceResult> slice;
    for (const auto& r : results)
      if (r.attributes.count(tag)) slice.push_back(r);
    if (!slice.empty())
      rep.per_attribute[tag] = {success_curve(slice, mode), precision_curve(slice, mode)};
  }
  return rep;
}

namespace {

json curve_to_json(const MetricCurve& c) {
  return json{{"thresholds", c.thresholds}, {"values", c.values}, {"auc", c.auc}};
}

MetricCurve curve_from_json(const json& j) {
  MetricCurve c;
  c.thresholds = j.at("thresholds").get<std::vector<double>>();
  c.values = j.at("values").get<std::vector<double>>();
  c.auc = j.at("auc").get<double>();
  return c;
}

}  // namespace

std::string report_to_json(const Report& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["tracker"] = r.tracker;
  j["dataset"] = r.dataset;
  j["curves"] = {{"success", curve_to_json(r.success)}, {"precision", curve_to_json(r.precision)}};
  j["auc"] = r.auc;
  j["precision_at_20"] = r.precision_at_20;
  j["fps"] = r.fps;
  j["per_sequence"] = json::array();
  for (const auto& s : r.per_sequence)
    j["per_sequence"].push_back({{"id", s.id},
                                 {"frames", s.frames},
                                 {"auc", s.auc},
                                 {"precision_at_20", s.precision_at_20},
                                 {"mean_os", s.mean_os},
                                 {"attributes", s.attributes}});
  j["per_attribute"] = json::object();
  for (const auto& [tag, curves] : r.per_attribute)
    j["per_attribute"][tag] = {{"success", curve_to_json(curves.first)},
                               {"precision", curve_to_json(curves.second)}};
  return j.dump(2);
}

Report report_from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open report: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  Report r;
  r.schema_version = j.value("schema_version", 1);
  r.tracker = j.at("tracker").get<std::string>();
  r.dataset = j.value("dataset", "");
  r.success = curve_from_json(j.at("curves").at("success"));
  r.precision = curve_from_json(j.at("curves").at("precision"));
  r.auc = j.at("auc").get<double>();
  r.precision_at_20 = j.at("precision_at_20").get<double>();
  r.fps = j.value("fps", 0.0);
  if (j.contains("per_sequence"))
    for (const auto& js : j.at("per_sequence")) {
      SequenceSummary s;
      s.id = js.at("id").get<std::string>();
      s.frames = js.value("frames", 0u);
      s.auc = js.value("auc", 0.0);
      s.precision_at_20 = js.value("precision_at_20", 0.0);
      s.mean_os = js.value("mean_os", 0.0);
      if (js.contains("attributes")) s.attributes = js.at("attributes").get<std::vector<std::string>>();
      r.per_sequence.push_back(std::move(s));
    }
  return r;
}

void write_report(const Report& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write report: " + path);
  f << report_to_json(r) << "\n";
}

Report ope_run(const TrackerModel& model, const TrackConfig& cfg,
               const std::vector<SequenceRecord>& dataset, const std::string& tracker_name,
               const std::string& dataset_name, const std::string& out_dir) {
  if (dataset.empty()) throw DataError("ope_run: empty dataset");
  std::vector<SequenceResult> results;
  double total_seconds = 0.0;
  long total_frames = 0;
  for (const auto& rec : dataset) {
    std::vector<Image> frames;
    frames.reserve(rec.size());
    for (size_t i = 0; i < rec.size(); ++i) frames.push_back(load_frame(rec, i));
    SequenceRun run = run_sequence(frames, rec.gt[0], model, cfg);
    total_seconds += run.seconds;
    total_frames += static_cast<long>(frames.size());
    SequenceResult r = per_frame_metrics(run.boxes, rec.gt, rec.valid);
    r.id = rec.id;
    r.attributes = rec.attributes;
    results.push_back(std::move(r));
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_result_boxes((fs::path(out_dir) / (rec.id + ".txt")).string(), run.boxes);
    }
  }
  const double fps = total_seconds > 0 ? static_cast<double>(total_frames) / total_seconds : 0.0;
  return aggregate_report(tracker_name, dataset_name, results, fps);
}

Report evaluate_results(const std::string& results_dir, const std::vector<SequenceRecord>& dataset,
                        const std::string& tracker_name, const std::string& dataset_name,
                        Aggregation mode) {
  if (dataset.empty()) throw DataError("evaluate_results: empty dataset");
  std::vector<SequenceResult> results;
  double seconds = 0.0;
  long frames = 0;
  for (const auto& rec : dataset) {
    const fs::path file = fs::path(results_dir) / (rec.id + ".txt");
    if (!fs::exists(file)) {
      std::cerr << "warning: missing result file for sequence " << rec.id << "\n";
      continue;
    }
    std::vector<Box> pred = read_result_boxes(file.string());
    if (pred.size() != rec.size()) {
      std::cerr << "warning: sequence " << rec.id << ": " << pred.size() << " results vs "
                << rec.size() << " frames; truncating\n";
      const size_t n = std::min(pred.size(), rec.size());
      pred.resize(n);
    }
    std::vector<Box> gt(rec.gt.begin(), rec.gt.begin() + static_cast<long>(pred.size()));
    std::vector<bool> valid(rec.valid.begin(), rec.valid.begin() + static_cast<long>(pred.size()));
    SequenceResult r = per_frame_metrics(pred, gt, valid);
    r.id = rec.id;
    r.attributes = rec.attributes;
    results.push_back(std::move(r));
    const fs::path sidecar = fs::path(results_dir) / (rec.id + "_meta.json");
    if (fs::exists(sidecar)) {
      std::ifstream sf(sidecar);
      json sj;
      sf >> sj;
      seconds += sj.value("seconds", 0.0);
      frames += static_cast<long>(pred.size());
    }
  }
  if (results.empty()) throw DataError("evaluate_results: no result files matched the dataset");
  const double fps = seconds > 0 ? static_cast<double>(frames) / seconds : 0.0;
  return aggregate_report(tracker_name, dataset_name, results, fps, mode);
}

std::vector<CompareRow> compare_reports(const std::vector<Report>& reports) {
  if (reports.empty()) throw DataError("compare: no reports");
  std::vector<CompareRow> rows;
  for (const auto& r : reports) rows.push_back({r.tracker, r.auc, r.precision_at_20, r.fps});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.auc > b.auc; });
  return rows;
}

std::string compare_table_csv(const std::vector<CompareRow>& rows) {
  std::string out = "tracker,auc,precision_at_20,fps\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.3f\n", r.tracker.c_str(), r.auc,
                  r.precision_at_20, r.fps);
    out += line;
  }
  return out;
}

std::string compare_table_text(const std::vector<CompareRow>& rows) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %8s %14s %8s\n", "tracker", "AUC", "precision@20", "FPS");
  std::string out = line;
  out += std::string(58, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-24s %8.3f %14.3f %8.1f\n", r.tracker.c_str(), r.auc,
                  r.precision_at_20, r.fps);
    out += line;
  }
  return out;
}

std::vector<CompareRow> parse_compare_csv(const std::string& csv) {
  std::vector<CompareRow> rows;
  size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    size_t nl = csv.find('\n', pos);
    if (nl == std::string::npos) nl = csv.size();
    const std::string line = csv.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> toks;
    size_t p = 0;
    while (true) {
      size_t c = line.find(',', p);
      if (c == std::string::npos) {
        toks.push_back(line.substr(p));
        break;
      }
      toks.push_back(line.substr(p, c - p));
      p = c + 1;
    }
    if (toks.size() != 4) throw DataError("compare csv: bad row: " + line);
    rows.push_back({toks[0], std::stod(toks[1]), std::stod(toks[2]), std::stod(toks[3])});
  }
  return rows;
}

}  // namespace tsf
