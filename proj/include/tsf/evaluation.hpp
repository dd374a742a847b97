#pragma once

#include <map>
#include <string>
#include <vector>

#include "tsf/data_io.hpp"
#include "tsf/tracker.hpp"

namespace tsf {

struct MetricCurve {
  std::vector<double> thresholds;
  std::vector<double> values;
  double auc = 0.0;  // mean of values over the grid
};

struct SequenceResult {
  std::string id;
  std::vector<double> os;   // per-frame overlap score
  std::vector<double> pe;   // per-frame center error
  std::vector<bool> valid;  // frames with usable ground truth
  std::set<std::string> attributes;
};

enum class Aggregation { kPooled, kPerSequenceMean };

SequenceResult per_frame_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt);
SequenceResult per_frame_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt,
                                 const std::vector<bool>& valid);

// 21 thresholds 0.00..1.00; strict OS > th.
MetricCurve success_curve(const std::vector<SequenceResult>& results,
                          Aggregation mode = Aggregation::kPooled);
// 51 thresholds 0..50 px; strict PE < th. precision_at_20 is values[20].
MetricCurve precision_curve(const std::vector<SequenceResult>& results,
                            Aggregation mode = Aggregation::kPooled);

struct SequenceSummary {
  std::string id;
  size_t frames = 0;
  double auc = 0.0;
  double precision_at_20 = 0.0;
  double mean_os = 0.0;
  std::vector<std::string> attributes;
};

struct Report {
  int schema_version = 1;
  std::string tracker;
  std::string dataset;
  MetricCurve success;
  MetricCurve precision;
  double auc = 0.0;
  double precision_at_20 = 0.0;
  double fps = 0.0;
  std::vector<SequenceSummary> per_sequence;
  std::map<std::string, std::pair<MetricCurve, MetricCurve>> per_attribute;
};

std::string report_to_json(const Report& r);
Report report_from_json_file(const std::string& path);
void write_report(const Report& r, const std::string& path);

// Builds curves/summaries from per-sequence metric lists.
Report aggregate_report(const std::string& tracker, const std::string& dataset,
                        const std::vector<SequenceResult>& results, double fps,
                        Aggregation mode = Aggregation::kPooled);

// Runs the tracker over every sequence (one-pass, init from first-frame gt)
// and aggregates. Optionally writes per-sequence result files under out_dir.
Report ope_run(const TrackerModel& model, const TrackConfig& cfg,
               const std::vector<SequenceRecord>& dataset, const std::string& tracker_name,
               const std::string& dataset_name, const std::string& out_dir = "");

// Scores existing result files (one <id>.txt per sequence) against a dataset.
Report evaluate_results(const std::string& results_dir, const std::vector<SequenceRecord>& dataset,
                        const std::string& tracker_name, const std::string& dataset_name,
                        Aggregation mode = Aggregation::kPooled);

struct CompareRow {
  std::string tracker;
  double auc = 0.0;
  double precision_at_20 = 0.0;
  double fps = 0.0;
};

// Rows sorted by AUC, best first.
std::vector<CompareRow> compare_reports(const std::vector<Report>& reports);
std::string compare_table_csv(const std::vector<CompareRow>& rows);
std::string compare_table_text(const std::vector<CompareRow>& rows);
std::vector<CompareRow> parse_compare_csv(const std::string& csv);

}  // namespace tsf
