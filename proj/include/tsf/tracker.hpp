#pragma once

#include "tsf/model.hpp"

namespace tsf {

struct TrackConfig {
  double window_influence = 0.40;  // cosine-window mix on the score map
  double penalty_k = 0.10;         // scale/ratio change penalty strength
  double size_lr = 0.30;           // smoothing of the predicted size
  int template_size = 127;
  int instance_size = 255;
  bool update_templates = true;
  // Reserved: pause template updates when the winning score drops below the
  // threshold. Off by default.
  bool confidence_gate = false;
  double confidence_gate_threshold = 0.0;

  void validate() const {
    if (window_influence < 0 || window_influence > 1)
      throw std::invalid_argument("TrackConfig: window_influence outside [0,1]");
    if (penalty_k < 0) throw std::invalid_argument("TrackConfig: negative penalty_k");
    if (size_lr < 0 || size_lr > 1) throw std::invalid_argument("TrackConfig: size_lr outside [0,1]");
    if (template_size <= 0 || instance_size <= template_size)
      throw std::invalid_argument("TrackConfig: instance_size must exceed template_size");
  }
};

struct TrackerState {
  Box current_box;
  TemplateBank bank;
  TrackConfig config;
  long frame_index = 0;

  // Debug/inspection fields filled by track_frame.
  int last_cell_row = -1, last_cell_col = -1;
  double last_score = 0.0;
};

TrackerState tracker_init(const Image& frame0, const Box& box0, const TrackerModel& model,
                          const TrackConfig& cfg);

// One step of the loop: crop, extract, MU-fuse, correlate, select, decode,
// advance the bank. Returns the clamped frame-coordinate box and the winning
// pre-window foreground probability.
std::pair<Box, double> track_frame(TrackerState& state, const Image& frame,
                                   const TrackerModel& model);

struct SequenceRun {
  std::vector<Box> boxes;
  std::vector<double> scores;
  double seconds = 0.0;  // wall time spent inside tracking calls
};

// One-pass evaluation: init on frame 0, never re-initialize. The first
// output is box0 by convention.
SequenceRun run_sequence(const std::vector<Image>& frames, const Box& box0,
                         const TrackerModel& model, const TrackConfig& cfg);

}  // namespace tsf
