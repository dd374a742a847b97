#pragma once

#include "tsf/data_io.hpp"
#include "tsf/evaluation.hpp"
#include "tsf/model.hpp"
#include "tsf/tracker.hpp"

namespace tsf {

struct PairSample {
  Image template_patch;
  Image search_patch;
  Box gt_box_in_patch;
};

// cls 1 = positive, 0 = negative, -1 = ignored ring; reg holds the four side
// distances from each cell's anchor.
struct LabelGrid {
  Tensor cls;  // (Hr,Wr)
  Tensor reg;  // (4,Hr,Wr)
};

struct TrainConfig {
  int stage = 1;
  int epochs = 10;
  int batch_size = 8;
  int warmup_epochs = 2;
  double warmup_lr_start = 2e-4;
  double warmup_lr_end = 1e-3;
  double decay_lr_start = 1e-3;
  double decay_lr_end = 1e-4;
  double lambda_reg = 1.0;
  double momentum = 0.9;
  unsigned long long seed = 1;

  void validate() const {
    if (epochs < 0 || batch_size < 1) throw UsageError("TrainConfig: bad epochs/batch_size");
    if (warmup_lr_start < 0 || warmup_lr_end < 0 || decay_lr_start < 0 || decay_lr_end < 0)
      throw UsageError("TrainConfig: learning-rate endpoints must not be negative");
    if ((decay_lr_start == 0) != (decay_lr_end == 0))
      throw UsageError("TrainConfig: decay endpoints must be both zero or both positive");
  }
  double lr_at(int epoch) const;
};

struct TrainLogRow {
  int epoch = 0;
  double lr = 0.0;
  double cls_loss = 0.0;
  double reg_loss = 0.0;
  double total_loss = 0.0;
};

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

// Cells whose anchor lands in the gt box shrunk by 0.5 are positive, cells
// outside the full box negative, the ring between is ignored. A box with no
// interior cell gets its nearest cell forced positive.
LabelGrid encode_targets(const Box& gt_box_in_patch, const ResponseGeometry& geom);

// Softmax cross-entropy over labelled cells + lambda * mean(1 - IoU) over
// positive cells.
autograd::Var loss_stage1(const ResponsePair& pred, const std::vector<LabelGrid>& labels,
                          double lambda_reg, double* cls_part = nullptr, double* reg_part = nullptr);

// Template/search pair sampling over synthetic (or loaded) sequences.
struct PairSamplerConfig {
  int template_size = 47;
  int instance_size = 95;
  int max_frame_gap = 4;
  double max_center_jitter = 8.0;  // frame pixels
  double scale_jitter = 0.15;
};
std::vector<PairSample> sample_pairs(const std::vector<SequenceRecord>& sequences, int count,
                                     const PairSamplerConfig& cfg, unsigned long long seed);

// Stage 1: SGD with momentum over the warmup/decay schedule; backbone + head
// train, MU stays untouched. Returns the per-epoch log.
std::vector<TrainLogRow> train_stage1(TrackerModel& model, const std::vector<PairSample>& pairs,
                                      const TrainConfig& cfg);

struct MuTuple {
  TemplateBank bank;        // z_in, z_ac, z_cu as of the harvested frame
  TwofoldFeatures z_gt;     // template features at the next frame's gt box
};

// Runs the tracker with updates on and MU zeroed (z_final == z_in) over the
// sequences; per tracked frame the bank plus the next frame's ground-truth
// template are recorded. N frames yield N-1 tuples.
std::vector<MuTuple> harvest_mu_tuples(TrackerModel& model, const TrackConfig& track_cfg,
                                       const std::vector<SequenceRecord>& sequences);

// Stage 2: SGD on the MU parameters only, minimizing mu_loss; log-spaced
// learning-rate decay from decay_lr_start to decay_lr_end.
std::vector<TrainLogRow> train_stage2(TrackerModel& model, const std::vector<MuTuple>& tuples,
                                      const TrainConfig& cfg);

double mean_mu_loss(const TrackerModel& model, const std::vector<MuTuple>& tuples);

}  // namespace tsf
