#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tsf/errors.hpp"
#include "tsf/geometry.hpp"

namespace tsf {

enum class DatasetKind { kVotTir, kGtot, kSynthetic };

DatasetKind dataset_kind_from_string(const std::string& s);

struct SequenceRecord {
  std::string id;
  std::vector<std::string> frame_paths;  // empty when frames are in memory
  std::vector<Image> frames;             // synthetic sequences carry frames here
  std::vector<Box> gt;
  std::vector<bool> valid;               // per-frame ground-truth validity
  std::set<std::string> attributes;

  size_t size() const { return gt.size(); }
  bool in_memory() const { return !frames.empty(); }
};

// Frame access regardless of backing; disk frames decode through OpenCV and
// single-channel data is replicated to three planes here, at load.
Image load_frame(const SequenceRecord& rec, size_t index);

struct ParsedGroundTruth {
  std::vector<Box> boxes;
  std::vector<bool> valid;
};

// One line per frame, comma separated; 4 values (x,y,w,h corner-plus-size)
// or 8 values (polygon, reduced to its min/max envelope). NaN or
// non-positive-size lines mark the frame invalid.
ParsedGroundTruth parse_vot_groundtruth(const std::string& path);

// One line per frame, whitespace or comma separated corner pair x1 y1 x2 y2.
std::vector<Box> parse_gtot_groundtruth(const std::string& path);

// Directory layouts are documented in docs/datasets.md; sequences come back
// sorted by id (or in list.txt order when present).
std::vector<SequenceRecord> load_dataset(const std::string& root, DatasetKind kind);

struct TrajectoryPoint {
  double t = 0;  // normalized time in [0,1]
  double x = 0, y = 0;
};

struct SizePoint {
  double t = 0;
  double w = 0, h = 0;  // ground-truth box extent (blob sigma is extent/4)
};

struct SynthSpec {
  std::string id = "synth";
  int height = 160, width = 160;
  int length = 30;
  std::vector<TrajectoryPoint> waypoints;
  std::vector<SizePoint> size_schedule;
  double intensity_start = 190.0, intensity_end = 190.0;
  double noise_sigma = 4.0;
  int distractor_count = 0;
  unsigned long long seed = 1;
  std::vector<std::string> attributes;

  void validate() const {
    if (height < 16 || width < 16 || length < 1) throw DataError("SynthSpec: degenerate frame plan");
    if (waypoints.empty() || size_schedule.empty())
      throw DataError("SynthSpec: waypoints and size_schedule required");
    if (noise_sigma < 0 || distractor_count < 0) throw DataError("SynthSpec: negative noise/distractors");
  }
};

// Gaussian blob over textured noise, fully determined by the spec's seed.
// Ground truth follows the blob's 2-sigma extent and stays inside the frame.
SequenceRecord generate_synthetic(const SynthSpec& spec);

// Materializes sequences as PGM frame directories + VOT-style groundtruth
// files under root. Byte-identical on re-run for equal specs.
void write_synth_dataset(const std::string& root, const std::vector<SynthSpec>& specs);

// Parses a synthesis spec file: {"sequences": [...]} and/or {"random": {...}}.
std::vector<SynthSpec> parse_synth_spec_file(const std::string& path);

struct RandomSuite {
  int count = 10;
  int length = 30;
  int height = 160, width = 160;
  double size_min = 14, size_max = 26;          // initial box extent, px
  double scale_change_min = 1.0, scale_change_max = 1.0;
  double step_px = 3.0;                          // per-frame motion amplitude
  double noise_sigma = 4.0;
  int distractors = 0;
  std::string id_prefix = "seq";
};

std::vector<SynthSpec> make_random_specs(const RandomSuite& suite, unsigned long long seed);

// Tracker result files: one "x1,y1,w,h" line per frame (%.4f fields).
void write_result_boxes(const std::string& path, const std::vector<Box>& boxes);
std::vector<Box> read_result_boxes(const std::string& path);

void write_pgm(const std::string& path, const Image& img);

}  // namespace tsf
