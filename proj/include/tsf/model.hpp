#pragma once

#include <memory>

#include "tsf/head.hpp"
#include "tsf/template_update.hpp"

namespace tsf {

// Backbone + MU + head behind one parameter store, so a checkpoint is a
// single named-tensor archive covering the whole tracker.
struct TrackerModel {
  BackboneConfig cfg;
  nn::ParamStore store;
  std::unique_ptr<TwofoldBackbone> backbone;
  std::unique_ptr<MUModule> mu;
  std::unique_ptr<SiamHead> head;

  static TrackerModel build(const BackboneConfig& cfg, unsigned long long seed);

  // Toggle which sub-networks receive gradients (stage-1 vs stage-2 training,
  // and everything off while tracking).
  void set_trainable_backbone_head(bool on);
  void set_trainable_mu(bool on);
  void freeze_all();

  std::vector<nn::Var> trainable_params() const;
};

void save_checkpoint(const TrackerModel& model, const std::string& path);
TrackerModel load_checkpoint(const std::string& path);

// FNV-1a over the file bytes; the run manifests record this.
unsigned long long file_checksum(const std::string& path);

}  // namespace tsf
