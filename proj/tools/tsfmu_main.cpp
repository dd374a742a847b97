#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tsf/config.hpp"
#include "tsf/data_io.hpp"
#include "tsf/evaluation.hpp"
#include "tsf/model.hpp"
#include "tsf/tracker.hpp"
#include "tsf/training.hpp"
#include "tsf/viz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> sets;
  unsigned long long seed = 1;
  bool seed_given = false;
};

tsf::Config load_config(const GlobalOpts& g) {
  tsf::Config cfg = g.config_path.empty() ? tsf::Config() : tsf::Config::load_file(g.config_path);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw tsf::UsageError("--set expects key=value, got: " + kv);
    cfg.set_dotted(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_given) cfg.set_dotted("seed", std::to_string(g.seed));
  cfg.check_known(tsf::known_config_keys());
  return cfg;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

// Written atomically before any results land in the directory.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const tsf::Config& cfg, unsigned long long seed,
                    const std::string& weights_path, const std::vector<std::string>& outputs) {
  fs::create_directories(out_dir);
  json m;
  m["command"] = command;
  m["config"] = cfg.raw();
  m["seed"] = seed;
  if (!weights_path.empty() && fs::exists(weights_path)) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", tsf::file_checksum(weights_path));
    m["weights_checksum"] = hex;
    m["weights_path"] = weights_path;
  }
  m["created"] = iso_now();
  m["outputs"] = outputs;
  const fs::path tmp = fs::path(out_dir) / "manifest.json.tmp";
  const fs::path dst = fs::path(out_dir) / "manifest.json";
  std::ofstream f(tmp, std::ios::trunc);
  if (!f) throw tsf::DataError("cannot write manifest in " + out_dir);
  f << m.dump(2) << "\n";
  f.close();
  fs::rename(tmp, dst);
}

unsigned long long seed_of(const tsf::Config& cfg) { return cfg.get<unsigned long long>("seed", 1); }

int cmd_synth(const GlobalOpts& g, const std::string& spec_path, const std::string& out) {
  tsf::Config cfg = load_config(g);
  auto specs = tsf::parse_synth_spec_file(spec_path);
  write_manifest(out, "synth", cfg, seed_of(cfg), "", {"list.txt", "manifest.json"});
  tsf::write_synth_dataset(out, specs);
  std::cout << "wrote " << specs.size() << " sequences to " << out << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, int stage, const std::string& data_root,
              const std::string& kind_s, const std::string& init_ckpt, const std::string& out) {
  tsf::Config cfg = load_config(g);
  const auto kind = tsf::dataset_kind_from_string(kind_s);
  auto dataset = tsf::load_dataset(data_root, kind);
  if (dataset.empty()) throw tsf::DataError("no training sequences under " + data_root);

  const unsigned long long seed = seed_of(cfg);
  const std::string ckpt_out =
      (fs::path(out) / ("checkpoint_stage" + std::to_string(stage) + ".tsfw")).string();
  const std::string log_out = (fs::path(out) / ("loss_stage" + std::to_string(stage) + ".csv")).string();

  if (stage == 1) {
    write_manifest(out, "train --stage 1", cfg, seed, init_ckpt,
                   {fs::path(ckpt_out).filename().string(), fs::path(log_out).filename().string()});
    tsf::TrackerModel model =
        init_ckpt.empty()
            ? tsf::TrackerModel::build(tsf::backbone_config_from(cfg),
                                       cfg.get<unsigned long long>("model.seed", seed))
            : tsf::load_checkpoint(init_ckpt);
    tsf::TrainConfig tc = tsf::train_config_from(cfg, 1);
    tc.seed = seed;
    tsf::PairSamplerConfig pc = tsf::pair_sampler_config_from(cfg);
    const int pair_count = cfg.get<int>("train.stage1.pairs", 500);
    auto pairs = tsf::sample_pairs(dataset, pair_count, pc, seed);
    auto log = tsf::train_stage1(model, pairs, tc);
    tsf::write_train_log(log_out, log);
    tsf::save_checkpoint(model, ckpt_out);
    if (!log.empty())
      std::cout << "stage 1 done: loss " << log.front().total_loss << " -> "
                << log.back().total_loss << "\n";
  } else if (stage == 2) {
    if (init_ckpt.empty())
      throw tsf::UsageError("stage 2 requires --init with the stage-1 checkpoint");
    if (!fs::exists(init_ckpt))
      throw tsf::DataError("stage-1 checkpoint not found: " + init_ckpt +
                           " (run `tsfmu train --stage 1` first)");
    write_manifest(out, "train --stage 2", cfg, seed, init_ckpt,
                   {fs::path(ckpt_out).filename().string(), fs::path(log_out).filename().string()});
    tsf::TrackerModel model = tsf::load_checkpoint(init_ckpt);
    tsf::TrackConfig track_cfg = tsf::track_config_from(cfg);
    auto tuples = tsf::harvest_mu_tuples(model, track_cfg, dataset);
    tsf::TrainConfig tc = tsf::train_config_from(cfg, 2);
    tc.seed = seed;
    auto log = tsf::train_stage2(model, tuples, tc);
    tsf::write_train_log(log_out, log);
    tsf::save_checkpoint(model, ckpt_out);
    std::cout << "stage 2 done: " << tuples.size() << " tuples";
    if (!log.empty())
      std::cout << ", loss " << log.front().total_loss << " -> " << log.back().total_loss;
    std::cout << "\n";
  } else {
    throw tsf::UsageError("--stage must be 1 or 2");
  }
  std::cout << "checkpoint: " << ckpt_out << "\n";
  return 0;
}

int cmd_track(const GlobalOpts& g, const std::string& ckpt, const std::string& data_root,
              const std::string& kind_s, const std::string& out, bool no_update, bool tsf_only,
              bool mu_only, int workers) {
  tsf::Config cfg = load_config(g);
  auto dataset = tsf::load_dataset(data_root, tsf::dataset_kind_from_string(kind_s));
  if (dataset.empty()) throw tsf::DataError("no sequences under " + data_root);
  tsf::TrackerModel model = tsf::load_checkpoint(ckpt);
  tsf::TrackConfig track_cfg = tsf::track_config_from(cfg);
  if (no_update || tsf_only) track_cfg.update_templates = false;
  if (mu_only) {
    // Single-depth ablation: silence the shallow maps in the adaptive fusion.
    model.head->fusion().alpha_s->value.fill(0.0);
    model.head->fusion().beta_s->value.fill(0.0);
  }

  std::vector<std::string> outputs;
  for (const auto& rec : dataset) outputs.push_back(rec.id + ".txt");
  write_manifest(out, "track", cfg, seed_of(cfg), ckpt, outputs);

  std::vector<tsf::SequenceRun> runs(dataset.size());
  const int nw = std::max(1, workers);
#pragma omp parallel for schedule(dynamic) num_threads(nw)
  for (long s = 0; s < static_cast<long>(dataset.size()); ++s) {
    const auto& rec = dataset[static_cast<size_t>(s)];
    std::vector<tsf::Image> frames;
    frames.reserve(rec.size());
    for (size_t i = 0; i < rec.size(); ++i) frames.push_back(tsf::load_frame(rec, i));
    runs[static_cast<size_t>(s)] = tsf::run_sequence(frames, rec.gt[0], model, track_cfg);
  }

  double total_seconds = 0;
  long total_frames = 0;
  for (size_t s = 0; s < dataset.size(); ++s) {
    const auto& rec = dataset[s];
    const auto& run = runs[s];
    tsf::write_result_boxes((fs::path(out) / (rec.id + ".txt")).string(), run.boxes);
    json meta;
    meta["sequence"] = rec.id;
    meta["scores"] = run.scores;
    meta["seconds"] = run.seconds;
    meta["fps"] = run.seconds > 0 ? static_cast<double>(run.boxes.size()) / run.seconds : 0.0;
    std::ofstream mf(fs::path(out) / (rec.id + "_meta.json"), std::ios::trunc);
    mf << meta.dump(2) << "\n";
    total_seconds += run.seconds;
    total_frames += static_cast<long>(run.boxes.size());
  }
  json summary;
  summary["total_frames"] = total_frames;
  summary["seconds"] = total_seconds;
  summary["fps"] = total_seconds > 0 ? total_frames / total_seconds : 0.0;
  summary["update_templates"] = track_cfg.update_templates;
  std::ofstream sf(fs::path(out) / "summary.json", std::ios::trunc);
  sf << summary.dump(2) << "\n";
  std::cout << "tracked " << dataset.size() << " sequences, " << total_frames << " frames at "
            << (total_seconds > 0 ? total_frames / total_seconds : 0.0) << " fps\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& results, const std::string& data_root,
             const std::string& kind_s, const std::string& out, bool plots, bool per_seq_mean,
             const std::string& tracker_name) {
  tsf::Config cfg = load_config(g);
  auto dataset = tsf::load_dataset(data_root, tsf::dataset_kind_from_string(kind_s));
  if (dataset.empty()) throw tsf::DataError("no sequences under " + data_root);
  write_manifest(out, "eval", cfg, seed_of(cfg), "", {"report.json"});
  const auto mode = per_seq_mean ? tsf::Aggregation::kPerSequenceMean : tsf::Aggregation::kPooled;
  tsf::Report rep = tsf::evaluate_results(results, dataset, tracker_name, data_root, mode);
  tsf::write_report(rep, (fs::path(out) / "report.json").string());
  if (plots) {
    tsf::plot_curves({{rep.tracker, rep.success}}, "Success plot", "overlap threshold",
                     (fs::path(out) / "success.png").string());
    tsf::plot_curves({{rep.tracker, rep.precision}}, "Precision plot",
                     "center error threshold (px)", (fs::path(out) / "precision.png").string());
  }
  std::cout << "AUC " << rep.auc << ", precision@20 " << rep.precision_at_20 << ", fps " << rep.fps
            << "\n";
  return 0;
}

int cmd_compare(const GlobalOpts& g, const std::vector<std::string>& report_files,
                const std::string& out) {
  tsf::Config cfg = load_config(g);
  std::vector<tsf::Report> reports;
  for (const auto& p : report_files) reports.push_back(tsf::report_from_json_file(p));
  write_manifest(out, "compare", cfg, seed_of(cfg), "", {"table.csv", "table.txt"});
  auto rows = tsf::compare_reports(reports);
  const std::string csv = tsf::compare_table_csv(rows);
  const std::string txt = tsf::compare_table_text(rows);
  std::ofstream(fs::path(out) / "table.csv", std::ios::trunc) << csv;
  std::ofstream(fs::path(out) / "table.txt", std::ios::trunc) << txt;
  std::vector<tsf::CurveSeries> succ, prec;
  for (const auto& r : reports) {
    succ.push_back({r.tracker, r.success});
    prec.push_back({r.tracker, r.precision});
  }
  tsf::plot_curves(succ, "Success plot", "overlap threshold",
                   (fs::path(out) / "compare_success.png").string());
  tsf::plot_curves(prec, "Precision plot", "center error threshold (px)",
                   (fs::path(out) / "compare_precision.png").string());
  std::cout << txt;
  return 0;
}

int cmd_overlay(const GlobalOpts& g, const std::string& results, const std::string& data_root,
                const std::string& kind_s, const std::string& out, int max_frames) {
  tsf::Config cfg = load_config(g);
  auto dataset = tsf::load_dataset(data_root, tsf::dataset_kind_from_string(kind_s));
  if (dataset.empty()) throw tsf::DataError("no sequences under " + data_root);
  write_manifest(out, "overlay", cfg, seed_of(cfg), "", {"legend.txt"});
  std::ofstream legend(fs::path(out) / "legend.txt", std::ios::trunc);
  legend << "groundtruth bgr 0,200,0\nprediction bgr 0,0,255\n";
  long written = 0;
  for (const auto& rec : dataset) {
    const fs::path file = fs::path(results) / (rec.id + ".txt");
    if (!fs::exists(file)) {
      std::cerr << "warning: no results for " << rec.id << ", skipping\n";
      continue;
    }
    auto pred = tsf::read_result_boxes(file.string());
    const fs::path seq_out = fs::path(out) / rec.id;
    fs::create_directories(seq_out);
    size_t n = std::min(pred.size(), rec.size());
    if (max_frames > 0) n = std::min(n, static_cast<size_t>(max_frames));
    for (size_t i = 0; i < n; ++i) {
      std::vector<tsf::OverlayBox> boxes;
      if (rec.valid[i]) boxes.push_back({rec.gt[i], 0, 200, 0});
      boxes.push_back({pred[i], 0, 0, 255});
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.png", i);
      tsf::draw_overlay(tsf::load_frame(rec, i), boxes, (seq_out / name).string());
      ++written;
    }
  }
  if (written == 0) std::cerr << "warning: overlay produced no frames\n";
  std::cout << "wrote " << written << " overlay frames\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twofold structured-features Siamese tracker with multi-template update"};
  app.require_subcommand(1);
  app.fallthrough();  // global --config/--set/--seed may follow the subcommand
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file")->envname("TSFMU_CONFIG");
  app.add_option("--set", g.sets, "Override a config key: --set track.size_lr=0.2");
  auto* seed_opt = app.add_option("--seed", g.seed, "Run seed (overrides config key 'seed')");

  std::string spec_path, out_dir, data_root, kind = "synthetic", ckpt, init_ckpt, results_dir;
  std::string tracker_name = "tsfmu";
  int stage = 1, workers = 1, max_frames = 0;
  bool no_update = false, tsf_only = false, mu_only = false, plots = false, per_seq_mean = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a spec file");
  synth->add_option("--spec", spec_path, "Synthesis spec JSON")->required();
  synth->add_option("--out", out_dir, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train stage 1 (backbone+head) or stage 2 (MU)");
  train->add_option("--stage", stage, "Training stage (1 or 2)")->required();
  train->add_option("--data", data_root, "Training dataset root")->required();
  train->add_option("--kind", kind, "Dataset kind: synthetic, vot_tir, gtot");
  train->add_option("--init", init_ckpt, "Initial checkpoint (required for stage 2)");
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* track = app.add_subcommand("track", "Run the tracker over a dataset");
  track->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  track->add_option("--dataset", data_root, "Dataset root")->required();
  track->add_option("--kind", kind, "Dataset kind");
  track->add_option("--out", out_dir, "Output directory")->required();
  track->add_flag("--no-update", no_update, "Freeze the template bank (no MU updates)");
  track->add_flag("--tsf-only", tsf_only, "Twofold features only, template updating off");
  track->add_flag("--mu-only", mu_only, "Template updating only, shallow depth silenced");
  track->add_option("--workers", workers, "Parallel sequence workers");

  auto* eval = app.add_subcommand("eval", "Score result files against a dataset");
  eval->add_option("--results", results_dir, "Directory with <sequence>.txt results")->required();
  eval->add_option("--dataset", data_root, "Dataset root")->required();
  eval->add_option("--kind", kind, "Dataset kind");
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_option("--tracker", tracker_name, "Tracker name for the report");
  eval->add_flag("--plots", plots, "Emit success/precision plot images");
  eval->add_flag("--per-seq-average", per_seq_mean,
                 "Average per sequence instead of pooling frames");

  std::vector<std::string> report_files;
  auto* compare = app.add_subcommand("compare", "Tabulate and overlay several eval reports");
  compare->add_option("reports", report_files, "report.json files")->required()->expected(-1);
  compare->add_option("--out", out_dir, "Output directory")->required();

  auto* overlay = app.add_subcommand("overlay", "Draw gt/prediction boxes onto frames");
  overlay->add_option("--results", results_dir, "Directory with <sequence>.txt results")->required();
  overlay->add_option("--dataset", data_root, "Dataset root")->required();
  overlay->add_option("--kind", kind, "Dataset kind");
  overlay->add_option("--out", out_dir, "Output directory")->required();
  overlay->add_option("--max-frames", max_frames, "Limit frames per sequence (0 = all)");

  try {
    app.parse(argc, argv);
    g.seed_given = seed_opt->count() > 0;
    if (synth->parsed()) return cmd_synth(g, spec_path, out_dir);
    if (train->parsed()) return cmd_train(g, stage, data_root, kind, init_ckpt, out_dir);
    if (track->parsed())
      return cmd_track(g, ckpt, data_root, kind, out_dir, no_update, tsf_only, mu_only, workers);
    if (eval->parsed())
      return cmd_eval(g, results_dir, data_root, kind, out_dir, plots, per_seq_mean, tracker_name);
    if (compare->parsed()) return cmd_compare(g, report_files, out_dir);
    if (overlay->parsed()) return cmd_overlay(g, results_dir, data_root, kind, out_dir, max_frames);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  } catch (const tsf::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const tsf::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tsf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
