#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "tsf/config.hpp"
#include "tsf/training.hpp"

using namespace tsf;
using autograd::Var;

namespace {

std::vector<SequenceRecord> micro_sequences(int count, int length, unsigned long long seed,
                                            double scale_change = 1.0, double step_px = 2.0) {
  RandomSuite suite;
  suite.count = count;
  suite.length = length;
  suite.height = 96;
  suite.width = 96;
  suite.size_min = 10;
  suite.size_max = 14;
  suite.scale_change_min = scale_change;
  suite.scale_change_max = scale_change;
  suite.step_px = step_px;
  suite.noise_sigma = 3.0;
  std::vector<SequenceRecord> out;
  for (const auto& spec : make_random_specs(suite, seed)) out.push_back(generate_synthetic(spec));
  return out;
}

std::vector<double> non_mu_param_bytes(const TrackerModel& m) {
  std::vector<double> out;
  for (const auto& [name, v] : m.store.params())
    if (name.rfind("mu.", 0) != 0)
      for (long i = 0; i < v->value.numel(); ++i) out.push_back(v->value[i]);
  return out;
}

}  // namespace

TEST_CASE("encode_targets saturation, degenerate and ring structure") {
  ResponseGeometry geom{5, 5, 8, 47};
  // a box twice the patch: its shrunk core still covers every anchor
  LabelGrid sat = encode_targets(Box{23.5, 23.5, 94, 94}, geom);
  for (long i = 0; i < sat.cls.numel(); ++i) CHECK(sat.cls[i] == 1.0);
  // a box exactly the patch: nothing is negative
  LabelGrid full = encode_targets(Box{23.5, 23.5, 47, 47}, geom);
  for (long i = 0; i < full.cls.numel(); ++i) CHECK(full.cls[i] != 0.0);

  // 1 px box: exactly one forced positive
  LabelGrid tiny = encode_targets(Box{20, 20, 1, 1}, geom);
  int pos = 0;
  for (long i = 0; i < tiny.cls.numel(); ++i)
    if (tiny.cls[i] == 1.0) ++pos;
  CHECK(pos == 1);

  // mid-size box: positives inside, negatives outside, ignore ring between
  LabelGrid mid = encode_targets(Box{23.5, 23.5, 20, 20}, geom);
  bool has_pos = false, has_neg = false, has_ign = false;
  for (long i = 0; i < mid.cls.numel(); ++i) {
    has_pos |= mid.cls[i] == 1.0;
    has_neg |= mid.cls[i] == 0.0;
    has_ign |= mid.cls[i] == -1.0;
  }
  CHECK(has_pos);
  CHECK(has_neg);
  CHECK(has_ign);
  CHECK_THROWS(encode_targets(Box{10, 10, -1, 5}, geom));
}

TEST_CASE("encode/decode round trip at positive cells") {
  std::mt19937_64 gen(401);
  ResponseGeometry geom{7, 7, 8, 95};
  CropSpec identity{Box{47.5, 47.5, 1, 1}, 95.0, 95};
  std::uniform_real_distribution<double> c(30.0, 65.0), s(8.0, 30.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Box gt{c(gen), c(gen), s(gen), s(gen)};
    LabelGrid g = encode_targets(gt, geom);
    for (int i = 0; i < geom.rows; ++i)
      for (int j = 0; j < geom.cols; ++j) {
        if (g.cls[static_cast<long>(i) * geom.cols + j] != 1.0) continue;
        const Box dec = decode_box_at(g.reg, i, j, geom, identity);
        CHECK(std::abs(dec.cx - gt.cx) < 1e-5);
        CHECK(std::abs(dec.cy - gt.cy) < 1e-5);
        CHECK(std::abs(dec.w - gt.w) < 1e-5);
        CHECK(std::abs(dec.h - gt.h) < 1e-5);
      }
  }
}

TEST_CASE("stage-1 loss at the optimum and under uniform logits") {
  ResponseGeometry geom{5, 5, 8, 47};
  const Box gt{23.5, 23.5, 24, 24};
  LabelGrid g = encode_targets(gt, geom);
  Tensor cls({1, 2, 5, 5});
  for (long i = 0; i < 25; ++i) {
    cls[i] = g.cls[i] == 1.0 ? -40.0 : 40.0;
    cls[25 + i] = g.cls[i] == 1.0 ? 40.0 : -40.0;
  }
  Tensor reg({1, 4, 5, 5});
  for (long i = 0; i < reg.numel(); ++i) reg[i] = g.reg[i];
  ResponsePair perfect{autograd::leaf(cls), autograd::leaf(reg)};
  CHECK(loss_stage1(perfect, {g}, 1.0)->value.item() < 1e-12);

  ResponsePair uniform{autograd::leaf(Tensor({1, 2, 5, 5}, 0.0)), autograd::leaf(reg)};
  double cls_part = 0, reg_part = 0;
  loss_stage1(uniform, {g}, 1.0, &cls_part, &reg_part);
  CHECK(cls_part == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(reg_part == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("stage-1 loss gradients match finite differences on small maps") {
  std::mt19937_64 gen(403);
  ResponseGeometry geom{5, 5, 8, 47};
  LabelGrid g = encode_targets(Box{23.5, 23.5, 22, 26}, geom);
  Var cls = autograd::leaf(tsft::random_tensor({1, 2, 5, 5}, gen), true);
  Var reg = autograd::leaf(tsft::random_tensor({1, 4, 5, 5}, gen, 0.5, 20.0), true);
  auto build = [&] { return loss_stage1(ResponsePair{cls, reg}, {g}, 1.0); };
  CHECK(tsft::fd_max_rel_err(build, {cls, reg}, 1e-5) < 1e-4);
}

TEST_CASE("learning-rate schedule endpoints") {
  TrainConfig tc;
  tc.epochs = 10;
  tc.warmup_epochs = 2;
  tc.warmup_lr_start = 1e-4;
  tc.warmup_lr_end = 1e-3;
  tc.decay_lr_start = 1e-3;
  tc.decay_lr_end = 1e-4;
  CHECK(tc.lr_at(0) == doctest::Approx(1e-4));
  CHECK(tc.lr_at(1) == doctest::Approx(1e-3));
  CHECK(tc.lr_at(2) == doctest::Approx(1e-3));
  CHECK(tc.lr_at(9) == doctest::Approx(1e-4));
  // exponential in between
  CHECK(tc.lr_at(5) / tc.lr_at(4) == doctest::Approx(tc.lr_at(6) / tc.lr_at(5)).epsilon(1e-9));
}

TEST_CASE("pair sampling keeps the target inside the search patch") {
  auto seqs = micro_sequences(2, 10, 77);
  PairSamplerConfig pc;
  pc.template_size = 31;
  pc.instance_size = 47;
  pc.max_center_jitter = 4.0;
  auto pairs = sample_pairs(seqs, 40, pc, 9);
  CHECK(pairs.size() == 40);
  for (const auto& p : pairs) {
    CHECK(p.template_patch.height == 31);
    CHECK(p.search_patch.height == 47);
    CHECK(p.gt_box_in_patch.cx > 0);
    CHECK(p.gt_box_in_patch.cx < 47);
    CHECK(p.gt_box_in_patch.cy > 0);
    CHECK(p.gt_box_in_patch.cy < 47);
  }
}

TEST_CASE("zero learning rate leaves weights bit-identical") {
  auto seqs = micro_sequences(1, 8, 78);
  PairSamplerConfig pc;
  pc.template_size = 31;
  pc.instance_size = 47;
  auto pairs = sample_pairs(seqs, 8, pc, 10);
  TrackerModel m = TrackerModel::build(tsft::micro_backbone(), 42);
  const auto before = non_mu_param_bytes(m);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.warmup_epochs = 1;
  tc.warmup_lr_start = 0.0;
  tc.warmup_lr_end = 0.0;
  tc.decay_lr_start = 0.0;
  tc.decay_lr_end = 0.0;
  tc.seed = 3;
  auto log = train_stage1(m, pairs, tc);
  const auto after = non_mu_param_bytes(m);
  CHECK(before.size() == after.size());
  size_t diff = 0;
  for (size_t i = 0; i < before.size(); ++i)
    if (before[i] != after[i]) ++diff;
  CHECK(diff == 0);
}

TEST_CASE("seed-pinned training is reproducible") {
  auto seqs = micro_sequences(2, 8, 79);
  PairSamplerConfig pc;
  pc.template_size = 31;
  pc.instance_size = 47;
  auto pairs = sample_pairs(seqs, 24, pc, 11);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 5;
  TrackerModel a = TrackerModel::build(tsft::micro_backbone(), 42);
  TrackerModel b = TrackerModel::build(tsft::micro_backbone(), 42);
  auto la = train_stage1(a, pairs, tc);
  auto lb = train_stage1(b, pairs, tc);
  REQUIRE(la.size() == lb.size());
  for (size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].total_loss == lb[i].total_loss);
    CHECK(la[i].cls_loss == lb[i].cls_loss);
  }
  const auto pa = non_mu_param_bytes(a), pb = non_mu_param_bytes(b);
  size_t diff = 0;
  for (size_t i = 0; i < pa.size(); ++i)
    if (pa[i] != pb[i]) ++diff;
  CHECK(diff == 0);
}

TEST_CASE("training reduces the stage-1 loss on a micro run") {
  auto seqs = micro_sequences(3, 10, 80);
  PairSamplerConfig pc;
  pc.template_size = 31;
  pc.instance_size = 47;
  pc.max_center_jitter = 4.0;
  auto pairs = sample_pairs(seqs, 48, pc, 12);
  TrackerModel m = TrackerModel::build(tsft::micro_backbone(), 42);
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 8;
  tc.warmup_epochs = 1;
  tc.warmup_lr_end = 5e-3;
  tc.decay_lr_start = 5e-3;
  tc.decay_lr_end = 1e-3;
  tc.seed = 6;
  auto log = train_stage1(m, pairs, tc);
  CHECK(log.back().total_loss < log.front().total_loss);
}

TEST_CASE("harvest produces N-1 tuples with the startup invariant") {
  auto seqs = micro_sequences(2, 7, 81);
  TrackerModel m = TrackerModel::build(tsft::micro_backbone(), 42);
  TrackConfig cfg = tsft::micro_track();
  auto tuples = harvest_mu_tuples(m, cfg, seqs);
  CHECK(tuples.size() == 2 * (7 - 1));
  // first tuple of each sequence: z_ac == z_cu == z_in
  for (size_t s = 0; s < 2; ++s) {
    const MuTuple& t = tuples[s * 6];
    CHECK(tsft::bit_equal(t.bank.z_ac.shallow->value, t.bank.z_in.shallow->value));
    CHECK(tsft::bit_equal(t.bank.z_cu.deep->value, t.bank.z_in.deep->value));
  }
  // shapes agree across all tuples
  for (const auto& t : tuples) {
    CHECK(t.bank.z_in.shallow->value.shape() == t.z_gt.shallow->value.shape());
    CHECK(t.bank.z_cu.deep->value.shape() == t.z_gt.deep->value.shape());
  }
  // harvesting used zero MU weights: z_ac stays z_in on later tuples too
  CHECK(tsft::bit_equal(tuples[3].bank.z_ac.shallow->value, tuples[0].bank.z_in.shallow->value));
}

TEST_CASE("stage-2 trains MU only and helps on held-out tuples") {
  auto train_seqs = micro_sequences(3, 8, 82, 1.6);
  auto held_seqs = micro_sequences(2, 8, 83, 1.6);
  TrackerModel m = TrackerModel::build(tsft::micro_backbone(), 42);
  TrackConfig cfg = tsft::micro_track();
  auto train_tuples = harvest_mu_tuples(m, cfg, train_seqs);
  auto held_tuples = harvest_mu_tuples(m, cfg, held_seqs);

  const auto non_mu_before = non_mu_param_bytes(m);
  m.mu->zero_weights();
  const double baseline = mean_mu_loss(m, held_tuples);  // z_final == z_in

  TrainConfig tc;
  tc.stage = 2;
  tc.epochs = 12;
  tc.batch_size = 8;
  tc.warmup_epochs = 0;
  tc.decay_lr_start = 1e-3;
  tc.decay_lr_end = 1e-4;
  tc.seed = 7;
  auto log = train_stage2(m, train_tuples, tc);
  CHECK(log.size() == 12);
  const double trained = mean_mu_loss(m, held_tuples);
  CHECK(trained < baseline);

  // backbone and head untouched
  const auto non_mu_after = non_mu_param_bytes(m);
  size_t diff = 0;
  for (size_t i = 0; i < non_mu_before.size(); ++i)
    if (non_mu_before[i] != non_mu_after[i]) ++diff;
  CHECK(diff == 0);

  // zero epochs is a no-op
  TrackerModel m2 = TrackerModel::build(tsft::micro_backbone(), 43);
  Tensor w_before = m2.store.find("mu.shallow.conv1.weight")->value;
  TrainConfig tc0 = tc;
  tc0.epochs = 0;
  train_stage2(m2, train_tuples, tc0);
  CHECK(tsft::bit_equal(w_before, m2.store.find("mu.shallow.conv1.weight")->value));
}

TEST_CASE("train log csv writes the schedule") {
  std::vector<TrainLogRow> rows{{0, 1e-3, 0.4, 0.3, 0.7}, {1, 5e-4, 0.2, 0.2, 0.4}};
  const std::string path = "/tmp/tsf_test_log.csv";
  write_train_log(path, rows);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,lr,cls_loss,reg_loss,total_loss");
  std::getline(f, line);
  CHECK(line.substr(0, 2) == "0,");
}
