#include "tsf/tracker.hpp"

#include <chrono>
#include <cmath>

#include "tsf/errors.hpp"

namespace tsf {

namespace {

Box clamp_to_frame(Box b, const Image& frame) {
  b.w = std::max(b.w, 1.0);
  b.h = std::max(b.h, 1.0);
  b.cx = std::min(std::max(b.cx, 0.0), static_cast<double>(frame.width));
  b.cy = std::min(std::max(b.cy, 0.0), static_cast<double>(frame.height));
  return b;
}

TwofoldFeatures extract_template(const Image& frame, const Box& box, const TrackerModel& model,
                                 const TrackConfig& cfg) {
  CropSpec spec{box, exemplar_side(box), cfg.template_size};
  Image patch = crop_patch(frame, spec, channel_means(frame));
  return model.backbone->forward(autograd::constant(image_to_input(patch)), Branch::kTemplate, false);
}

std::vector<double> hanning(int n) {
  std::vector<double> w(static_cast<size_t>(n), 1.0);
  if (n > 1)
    for (int i = 0; i < n; ++i)
      w[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
  return w;
}

double context_size(double w, double h) {
  const double p = (w + h) / 2.0;
  return std::sqrt((w + p) * (h + p));
}

double change(double r) { return std::max(r, 1.0 / r); }

}  // namespace

TrackerState tracker_init(const Image& frame0, const Box& box0, const TrackerModel& model,
                          const TrackConfig& cfg) {
  cfg.validate();
  if (box0.w < 1.0 || box0.h < 1.0) throw DataError("tracker_init: degenerate initial box");
  Box b = clamp_to_frame(box0, frame0);
  TrackerState st;
  st.config = cfg;
  st.current_box = b;
  st.frame_index = 0;
  TwofoldFeatures z = extract_template(frame0, b, model, cfg);
  st.bank.z_in = z;
  st.bank.z_ac = z;
  st.bank.z_cu = z;
  return st;
}

std::pair<Box, double> track_frame(TrackerState& state, const Image& frame,
                                   const TrackerModel& model) {
  const TrackConfig& cfg = state.config;

  // Step 2 of the loop: instance crop at the previous prediction.
  const double side =
      exemplar_side(state.current_box) * static_cast<double>(cfg.instance_size) / cfg.template_size;
  CropSpec crop{state.current_box, side, cfg.instance_size};
  Image patch = crop_patch(frame, crop, channel_means(frame));
  TwofoldFeatures x =
      model.backbone->forward(autograd::constant(image_to_input(patch)), Branch::kInstance, false);

  // Step 3: optimal template.
  TwofoldFeatures z;
  if (cfg.update_templates) {
    z = model.mu->fuse_templates(state.bank);
    state.bank.z_final = z;
  } else {
    z = state.bank.z_in;
  }

  // Step 4: per-depth responses and adaptive fusion.
  ResponsePair shallow = model.head->forward_shallow(z.shallow, x.shallow, false);
  ResponsePair deep = model.head->forward_deep(z.deep, x.deep, false);
  ResponsePair fused = fuse_responses(shallow, deep, model.head->fusion());

  const int Hr = fused.rows(), Wr = fused.cols();
  ResponseGeometry geom{Hr, Wr, 8, cfg.instance_size};
  const long plane = static_cast<long>(Hr) * Wr;
  const Tensor& cls = fused.cls->value;
  const Tensor& reg = fused.reg->value;

  // Foreground probability, scale/ratio penalty, cosine window.
  const std::vector<double> wr = hanning(Hr), wc = hanning(Wr);
  const Box prev_patch = crop.frame_to_patch(state.current_box);
  double best = -1.0;
  int bi = 0, bj = 0;
  bool all_nan = true;
  for (int i = 0; i < Hr; ++i)
    for (int j = 0; j < Wr; ++j) {
      const long at = static_cast<long>(i) * Wr + j;
      const double l0 = cls[at], l1 = cls[plane + at];
      const double m = std::max(l0, l1);
      const double p1 = std::exp(l1 - m) / (std::exp(l0 - m) + std::exp(l1 - m));
      const double l = reg[at], t = reg[plane + at], r = reg[2 * plane + at], b = reg[3 * plane + at];
      const double bw = std::max(l + r, 1.0), bh = std::max(t + b, 1.0);
      const double rc = change((prev_patch.w / prev_patch.h) / (bw / bh));
      const double sc = change(context_size(bw, bh) / context_size(prev_patch.w, prev_patch.h));
      const double pen = std::exp(-cfg.penalty_k * rc * sc);
      const double pscore =
          p1 * pen * (1.0 - cfg.window_influence) + wr[static_cast<size_t>(i)] * wc[static_cast<size_t>(j)] * cfg.window_influence;
      if (!std::isnan(pscore)) all_nan = false;
      if (pscore > best) {
        best = pscore;
        bi = i;
        bj = j;
      }
    }
  if (all_nan) throw NumericalError("track_frame: response map is all NaN (corrupt weights?)");

  const long at = static_cast<long>(bi) * Wr + bj;
  const double l0 = cls[at], l1 = cls[plane + at];
  const double m = std::max(l0, l1);
  const double raw_score = std::exp(l1 - m) / (std::exp(l0 - m) + std::exp(l1 - m));

  // Step 5: decode the winner, smooth the size, clamp.
  Box decoded = decode_box_at(reg, bi, bj, geom, crop);
  Box next;
  next.cx = decoded.cx;
  next.cy = decoded.cy;
  next.w = (1.0 - cfg.size_lr) * state.current_box.w + cfg.size_lr * decoded.w;
  next.h = (1.0 - cfg.size_lr) * state.current_box.h + cfg.size_lr * decoded.h;
  next = clamp_to_frame(next, frame);

  // Refresh the current template at the new position and roll the bank.
  TwofoldFeatures z_cu_next = extract_template(frame, next, model, cfg);
  const bool do_update =
      cfg.update_templates && (!cfg.confidence_gate || raw_score >= cfg.confidence_gate_threshold);
  const TwofoldFeatures carried = do_update ? state.bank.z_final : state.bank.z_ac;
  state.bank = advance_bank(state.bank, carried, z_cu_next);
  if (cfg.update_templates) state.bank.z_final = z;  // kept for inspection

  state.current_box = next;
  state.frame_index += 1;
  state.last_cell_row = bi;
  state.last_cell_col = bj;
  state.last_score = raw_score;
  return {next, raw_score};
}

SequenceRun run_sequence(const std::vector<Image>& frames, const Box& box0,
                         const TrackerModel& model, const TrackConfig& cfg) {
  if (frames.empty()) throw DataError("run_sequence: empty sequence");
  SequenceRun out;
  out.boxes.reserve(frames.size());
  out.scores.reserve(frames.size());
  const auto t0 = std::chrono::steady_clock::now();
  TrackerState st = tracker_init(frames[0], box0, model, cfg);
  out.boxes.push_back(st.current_box);
  out.scores.push_back(1.0);
  for (size_t i = 1; i < frames.size(); ++i) {
    auto [box, score] = track_frame(st, frames[i], model);
    out.boxes.push_back(box);
    out.scores.push_back(score);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace tsf
