#include "tsf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

namespace tsf {

using autograd::Var;

double TrainConfig::lr_at(int epoch) const {
  if (epoch < warmup_epochs) {
    if (warmup_epochs == 1) return warmup_lr_end;
    const double a = static_cast<double>(epoch) / (warmup_epochs - 1);
    return warmup_lr_start + a * (warmup_lr_end - warmup_lr_start);
  }
  if (decay_lr_start == 0.0) return 0.0;
  const int decay_epochs = epochs - warmup_epochs;
  if (decay_epochs <= 1) return decay_lr_start;
  const double t = static_cast<double>(epoch - warmup_epochs) / (decay_epochs - 1);
  return decay_lr_start * std::pow(decay_lr_end / decay_lr_start, t);
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write training log: " + path);
  f << "epoch,lr,cls_loss,reg_loss,total_loss\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.8g,%.8g,%.8g,%.8g\n", r.epoch, r.lr, r.cls_loss,
                  r.reg_loss, r.total_loss);
    f << line;
  }
}

LabelGrid encode_targets(const Box& gt, const ResponseGeometry& geom) {
  if (!gt.valid()) throw DataError("encode_targets: invalid box");
  LabelGrid g;
  g.cls = Tensor({geom.rows, geom.cols});
  g.reg = Tensor({4, geom.rows, geom.cols});
  const long plane = static_cast<long>(geom.rows) * geom.cols;
  const Box shrunk{gt.cx, gt.cy, gt.w * 0.5, gt.h * 0.5};
  bool any_pos = false;
  double best_d = 0.0;
  long best_cell = 0;
  for (int i = 0; i < geom.rows; ++i)
    for (int j = 0; j < geom.cols; ++j) {
      const double ax = geom.anchor_x(j), ay = geom.anchor_y(i);
      const long at = static_cast<long>(i) * geom.cols + j;
      g.reg[at] = ax - gt.x1();
      g.reg[plane + at] = ay - gt.y1();
      g.reg[2 * plane + at] = gt.x2() - ax;
      g.reg[3 * plane + at] = gt.y2() - ay;
      const bool in_shrunk =
          ax > shrunk.x1() && ax < shrunk.x2() && ay > shrunk.y1() && ay < shrunk.y2();
      const bool in_full = ax > gt.x1() && ax < gt.x2() && ay > gt.y1() && ay < gt.y2();
      g.cls[at] = in_shrunk ? 1.0 : (in_full ? -1.0 : 0.0);
      if (in_shrunk) any_pos = true;
      const double d = std::hypot(ax - gt.cx, ay - gt.cy);
      if (at == 0 || d < best_d) {
        best_d = d;
        best_cell = at;
      }
    }
  if (!any_pos) g.cls[best_cell] = 1.0;  // degenerate-target rule
  return g;
}

Var loss_stage1(const ResponsePair& pred, const std::vector<LabelGrid>& labels, double lambda_reg,
                double* cls_part, double* reg_part) {
  const int N = pred.cls->value.dim(0);
  if (static_cast<size_t>(N) != labels.size())
    throw DataError("loss_stage1: batch size mismatch");
  const int Hr = pred.rows(), Wr = pred.cols();
  const long plane = static_cast<long>(Hr) * Wr;
  Tensor cls_t({N, Hr, Wr});
  Tensor reg_t({N, 4, Hr, Wr});
  Tensor mask({N, Hr, Wr});
  bool any_labelled = false;
  for (int n = 0; n < N; ++n) {
    const LabelGrid& g = labels[static_cast<size_t>(n)];
    if (g.cls.numel() != plane || g.reg.numel() != 4 * plane)
      throw DataError("loss_stage1: label grid shape mismatch");
    for (long i = 0; i < plane; ++i) {
      cls_t[static_cast<long>(n) * plane + i] = g.cls[i] > 0.5 ? 1.0 : (g.cls[i] < -0.5 ? -1.0 : 0.0);
      if (g.cls[i] > 0.5 || std::abs(g.cls[i]) < 0.5) any_labelled = true;
      mask[static_cast<long>(n) * plane + i] = g.cls[i] > 0.5 ? 1.0 : 0.0;
    }
    for (long i = 0; i < 4 * plane; ++i) reg_t[static_cast<long>(n) * 4 * plane + i] = g.reg[i];
  }
  if (!any_labelled) throw DataError("loss_stage1: sample has no labelled cells");
  Var ce = autograd::softmax_cross_entropy(pred.cls, cls_t);
  Var il = autograd::iou_loss_ltrb(pred.reg, reg_t, mask);
  if (cls_part) *cls_part = ce->value.item();
  if (reg_part) *reg_part = il->value.item();
  return autograd::add(ce, autograd::scale(il, lambda_reg));
}

std::vector<PairSample> sample_pairs(const std::vector<SequenceRecord>& sequences, int count,
                                     const PairSamplerConfig& cfg, unsigned long long seed) {
  if (sequences.empty()) throw DataError("sample_pairs: no sequences");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<PairSample> out;
  out.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    const auto& rec = sequences[static_cast<size_t>(gen() % sequences.size())];
    const size_t n = rec.size();
    const size_t i = static_cast<size_t>(gen() % n);
    const size_t gap = 1 + static_cast<size_t>(gen() % static_cast<unsigned long long>(cfg.max_frame_gap));
    const size_t j = std::min(n - 1, i + gap);

    const Image frame_t = load_frame(rec, i);
    const Image frame_s = load_frame(rec, j);
    const Box& bt = rec.gt[i];
    const Box& bs = rec.gt[j];

    PairSample p;
    CropSpec tspec{bt, exemplar_side(bt), cfg.template_size};
    p.template_patch = crop_patch(frame_t, tspec, channel_means(frame_t));

    const double jx = (2.0 * uni(gen) - 1.0) * cfg.max_center_jitter;
    const double jy = (2.0 * uni(gen) - 1.0) * cfg.max_center_jitter;
    const double js = 1.0 + (2.0 * uni(gen) - 1.0) * cfg.scale_jitter;
    Box crop_center{bs.cx + jx, bs.cy + jy, bs.w, bs.h};
    const double side =
        exemplar_side(bs) * js * static_cast<double>(cfg.instance_size) / cfg.template_size;
    CropSpec sspec{crop_center, side, cfg.instance_size};
    p.search_patch = crop_patch(frame_s, sspec, channel_means(frame_s));
    p.gt_box_in_patch = sspec.frame_to_patch(bs);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// SGD with momentum over whatever currently requires gradients.
class Sgd {
 public:
  explicit Sgd(double momentum) : momentum_(momentum) {}

  void step(const std::vector<Var>& params, double lr) {
    for (const auto& p : params) {
      Tensor& v = velocity_[p.get()];
      if (v.numel() != p->value.numel()) v = Tensor(p->value.shape());
      for (long i = 0; i < p->value.numel(); ++i) {
        v[i] = momentum_ * v[i] + p->grad[i];
        p->value[i] -= lr * v[i];
      }
    }
  }

 private:
  double momentum_;
  std::unordered_map<autograd::Node*, Tensor> velocity_;
};

Tensor stack_images(const std::vector<const Image*>& imgs) {
  const int H = imgs[0]->height, W = imgs[0]->width;
  Tensor t({static_cast<int>(imgs.size()), 3, H, W});
  const long plane = static_cast<long>(H) * W;
  for (size_t n = 0; n < imgs.size(); ++n) {
    const Image& im = *imgs[n];
    for (int c = 0; c < 3; ++c) {
      const double* src = im.plane(im.channels == 3 ? c : 0);
      std::copy(src, src + plane, t.data() + (static_cast<long>(n) * 3 + c) * plane);
    }
  }
  return t;
}

}  // namespace

std::vector<TrainLogRow> train_stage1(TrackerModel& model, const std::vector<PairSample>& pairs,
                                      const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train_stage1: empty dataset");
  model.freeze_all();
  model.set_trainable_backbone_head(true);
  auto params = model.trainable_params();
  Sgd opt(cfg.momentum);
  std::vector<TrainLogRow> log;

  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_gen(cfg.seed * 2654435761ULL + static_cast<unsigned long long>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_gen);
    const double lr = cfg.lr_at(epoch);
    double sum_cls = 0.0, sum_reg = 0.0, sum_total = 0.0;
    long batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<const Image*> tpatches, spatches;
      std::vector<LabelGrid> labels;
      ResponseGeometry geom;
      for (size_t k = start; k < end; ++k) {
        const PairSample& p = pairs[order[k]];
        tpatches.push_back(&p.template_patch);
        spatches.push_back(&p.search_patch);
      }
      Var zt = autograd::leaf(stack_images(tpatches), false);
      Var xt = autograd::leaf(stack_images(spatches), false);
      TwofoldFeatures z = model.backbone->forward(zt, Branch::kTemplate, true);
      TwofoldFeatures x = model.backbone->forward(xt, Branch::kInstance, true);
      ResponsePair shallow = model.head->forward_shallow(z.shallow, x.shallow, true);
      ResponsePair deep = model.head->forward_deep(z.deep, x.deep, true);
      ResponsePair fused = fuse_responses(shallow, deep, model.head->fusion());
      geom = ResponseGeometry{fused.rows(), fused.cols(), 8, 0};
      // Anchors live in search-patch pixels.
      geom.patch_size = pairs[order[start]].search_patch.width;
      for (size_t k = start; k < end; ++k)
        labels.push_back(encode_targets(pairs[order[k]].gt_box_in_patch, geom));

      double cls_part = 0.0, reg_part = 0.0;
      Var loss = loss_stage1(fused, labels, cfg.lambda_reg, &cls_part, &reg_part);
      const double total = loss->value.item();
      if (!std::isfinite(total))
        throw NumericalError("train_stage1: loss diverged (epoch " + std::to_string(epoch) + ")");
      autograd::zero_grad(params);
      autograd::backward(loss);
      opt.step(params, lr);
      sum_cls += cls_part;
      sum_reg += reg_part;
      sum_total += total;
      ++batches;
    }
    log.push_back({epoch, lr, sum_cls / batches, sum_reg / batches, sum_total / batches});
  }
  model.freeze_all();
  return log;
}

std::vector<MuTuple> harvest_mu_tuples(TrackerModel& model, const TrackConfig& track_cfg,
                                       const std::vector<SequenceRecord>& sequences) {
  model.freeze_all();
  model.mu->zero_weights();  // z_final == z_in during harvesting
  TrackConfig cfg = track_cfg;
  cfg.update_templates = true;
  std::vector<MuTuple> tuples;
  for (const auto& rec : sequences) {
    if (rec.size() < 2) continue;
    std::vector<Image> frames;
    for (size_t i = 0; i < rec.size(); ++i) frames.push_back(load_frame(rec, i));
    TrackerState st = tracker_init(frames[0], rec.gt[0], model, cfg);
    for (size_t i = 0; i + 1 < rec.size(); ++i) {
      // Bank after processing frame i, target template from frame i+1's gt.
      if (!rec.valid[i + 1]) {
        track_frame(st, frames[i + 1], model);
        continue;
      }
      MuTuple t;
      t.bank = st.bank;
      CropSpec spec{rec.gt[i + 1], exemplar_side(rec.gt[i + 1]), cfg.template_size};
      Image patch = crop_patch(frames[i + 1], spec, channel_means(frames[i + 1]));
      t.z_gt = model.backbone->forward(autograd::constant(image_to_input(patch)),
                                       Branch::kTemplate, false);
      tuples.push_back(std::move(t));
      track_frame(st, frames[i + 1], model);
    }
  }
  return tuples;
}

std::vector<TrainLogRow> train_stage2(TrackerModel& model, const std::vector<MuTuple>& tuples,
                                      const TrainConfig& cfg) {
  cfg.validate();
  if (tuples.empty()) throw DataError("train_stage2: empty tuple set");
  model.freeze_all();
  model.set_trainable_mu(true);
  auto params = model.trainable_params();
  Sgd opt(cfg.momentum);
  std::vector<TrainLogRow> log;

  std::vector<size_t> order(tuples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_gen(cfg.seed * 40503ULL + static_cast<unsigned long long>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_gen);
    // Log-spaced decay, mirroring the stage-2 schedule shape.
    const double t = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.decay_lr_start * std::pow(cfg.decay_lr_end / cfg.decay_lr_start, t);
    double sum = 0.0;
    long batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      autograd::zero_grad(params);
      double batch_loss = 0.0;
      Var total;
      for (size_t k = start; k < end; ++k) {
        const MuTuple& tu = tuples[order[k]];
        TwofoldFeatures z_final = model.mu->fuse_templates(tu.bank);
        Var l = mu_loss(z_final, tu.z_gt);
        total = total ? autograd::add(total, l) : l;
      }
      Var loss = autograd::scale(total, 1.0 / static_cast<double>(end - start));
      batch_loss = loss->value.item();
      if (!std::isfinite(batch_loss)) throw NumericalError("train_stage2: loss diverged");
      autograd::backward(loss);
      opt.step(params, lr);
      sum += batch_loss;
      ++batches;
    }
    log.push_back({epoch, lr, 0.0, sum / batches, sum / batches});
  }
  model.freeze_all();
  return log;
}

double mean_mu_loss(const TrackerModel& model, const std::vector<MuTuple>& tuples) {
  if (tuples.empty()) throw DataError("mean_mu_loss: empty tuple set");
  double s = 0.0;
  for (const auto& tu : tuples) {
    TwofoldFeatures z_final = model.mu->fuse_templates(tu.bank);
    s += mu_loss(z_final, tu.z_gt)->value.item();
  }
  return s / static_cast<double>(tuples.size());
}

}  // namespace tsf
