#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "tsf/data_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = TSFMU_BIN;
const std::string kWork = "/tmp/tsf_cli";

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string log = kWork + "/last_out.txt";
  const int rc = std::system((kBin + " " + args + " >" + log + " 2>&1").c_str());
  if (output) {
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(rc);
}

std::string micro_model_flags() {
  return " --set model.stage_channels=[8,16,24,32] --set model.stem_channels=4"
         " --set model.fused_channels=8 --set model.template_spatial=3"
         " --set track.template_size=31 --set track.instance_size=47";
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_micro_spec(const std::string& path, int count, int length) {
  json spec;
  spec["seed"] = 5;
  spec["random"] = {{"count", count},   {"length", length}, {"height", 96},
                    {"width", 96},      {"size_min", 10},   {"size_max", 14},
                    {"step_px", 2.0},   {"noise_sigma", 3.0}};
  std::ofstream f(path, std::ios::trunc);
  f << spec.dump(2);
}

struct CliFixture {
  CliFixture() {
    fs::create_directories(kWork);
    static bool prepared = false;
    if (prepared) return;
    prepared = true;
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    write_micro_spec(kWork + "/spec.json", 3, 8);
    REQUIRE(run_cli("synth --spec " + kWork + "/spec.json --out " + kWork + "/data") == 0);
    REQUIRE(run_cli("train --stage 1 --data " + kWork + "/data --out " + kWork + "/run1" +
                    micro_model_flags() +
                    " --set train.stage1.pairs=32 --set train.stage1.epochs=2"
                    " --set train.stage1.batch_size=8") == 0);
    REQUIRE(run_cli("train --stage 2 --data " + kWork + "/data --init " + kWork +
                    "/run1/checkpoint_stage1.tsfw --out " + kWork + "/run2" + micro_model_flags() +
                    " --set train.stage2.epochs=2") == 0);
  }
};

}  // namespace

TEST_CASE_FIXTURE(CliFixture, "synth writes a loadable deterministic dataset") {
  auto ds = tsf::load_dataset(kWork + "/data", tsf::DatasetKind::kSynthetic);
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].size() == 8);
  CHECK(fs::exists(kWork + "/data/manifest.json"));
  CHECK(fs::exists(kWork + "/data/list.txt"));

  const std::string probe = kWork + "/data/seq000/frames/000000.pgm";
  const std::string before = file_bytes(probe);
  REQUIRE(run_cli("synth --spec " + kWork + "/spec.json --out " + kWork + "/data_again") == 0);
  CHECK(file_bytes(kWork + "/data_again/seq000/frames/000000.pgm") == before);

  // doubling length doubles the frame count
  write_micro_spec(kWork + "/spec2.json", 1, 16);
  REQUIRE(run_cli("synth --spec " + kWork + "/spec2.json --out " + kWork + "/data16") == 0);
  auto ds16 = tsf::load_dataset(kWork + "/data16", tsf::DatasetKind::kSynthetic);
  REQUIRE(ds16.size() == 1);
  CHECK(ds16[0].size() == 16);
}

TEST_CASE_FIXTURE(CliFixture, "exit codes: usage, data and config errors") {
  std::string out;
  CHECK(run_cli("", &out) == 1);
  CHECK(run_cli("synth --spec /tmp/missing_spec.json --out " + kWork + "/x", &out) == 2);
  CHECK(run_cli("synth --spec " + kWork + "/spec.json --out " + kWork +
                    "/x --set bogus.key=1",
                &out) == 1);
  CHECK(out.find("bogus.key") != std::string::npos);
  // stage 2 without a stage-1 checkpoint
  CHECK(run_cli("train --stage 2 --data " + kWork + "/data --out " + kWork + "/x", &out) == 1);
  CHECK(out.find("stage-1") != std::string::npos);
  CHECK(run_cli("train --stage 2 --data " + kWork + "/data --init /tmp/nope.tsfw --out " + kWork +
                    "/x",
                &out) == 2);
}

TEST_CASE_FIXTURE(CliFixture, "train emits manifest, loss log and checkpoint") {
  CHECK(fs::exists(kWork + "/run1/manifest.json"));
  CHECK(fs::exists(kWork + "/run1/loss_stage1.csv"));
  CHECK(fs::exists(kWork + "/run1/checkpoint_stage1.tsfw"));
  CHECK(fs::exists(kWork + "/run2/checkpoint_stage2.tsfw"));
  json m = json::parse(file_bytes(kWork + "/run2/manifest.json"));
  CHECK(m.contains("weights_checksum"));
  CHECK(m["command"] == "train --stage 2");
  std::ifstream log(kWork + "/run1/loss_stage1.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "epoch,lr,cls_loss,reg_loss,total_loss");
}

TEST_CASE_FIXTURE(CliFixture, "track writes per-sequence results with timing sidecars") {
  REQUIRE(run_cli("track --checkpoint " + kWork + "/run2/checkpoint_stage2.tsfw --dataset " +
                  kWork + "/data --out " + kWork + "/trk" + micro_model_flags()) == 0);
  auto ds = tsf::load_dataset(kWork + "/data", tsf::DatasetKind::kSynthetic);
  double sum_seconds = 0;
  long frames = 0;
  for (const auto& rec : ds) {
    const std::string rf = kWork + "/trk/" + rec.id + ".txt";
    REQUIRE(fs::exists(rf));
    CHECK(tsf::read_result_boxes(rf).size() == rec.size());
    json meta = json::parse(file_bytes(kWork + "/trk/" + rec.id + "_meta.json"));
    CHECK(meta["scores"].size() == rec.size());
    sum_seconds += meta["seconds"].get<double>();
    frames += static_cast<long>(rec.size());
  }
  json summary = json::parse(file_bytes(kWork + "/trk/summary.json"));
  const double reported = summary["fps"].get<double>();
  const double recomputed = frames / sum_seconds;
  CHECK(std::abs(reported - recomputed) / recomputed < 0.05);

  // --no-update freezes the bank; the sidecar records the flag
  REQUIRE(run_cli("track --checkpoint " + kWork + "/run2/checkpoint_stage2.tsfw --dataset " +
                  kWork + "/data --out " + kWork + "/trk_nu --no-update" + micro_model_flags()) == 0);
  json s2 = json::parse(file_bytes(kWork + "/trk_nu/summary.json"));
  CHECK(s2["update_templates"] == false);
}

TEST_CASE_FIXTURE(CliFixture, "eval, compare and overlay close the loop") {
  REQUIRE(fs::exists(kWork + "/trk/summary.json"));
  REQUIRE(run_cli("eval --results " + kWork + "/trk --dataset " + kWork + "/data --out " + kWork +
                  "/ev --plots --tracker micro") == 0);
  REQUIRE(fs::exists(kWork + "/ev/report.json"));
  CHECK(fs::exists(kWork + "/ev/success.png"));
  CHECK(fs::exists(kWork + "/ev/precision.png"));
  json rep = json::parse(file_bytes(kWork + "/ev/report.json"));
  CHECK(rep["schema_version"] == 1);
  CHECK(rep["tracker"] == "micro");
  CHECK(rep["curves"]["success"]["values"].size() == 21);
  CHECK(rep["curves"]["precision"]["values"].size() == 51);

  // a second report from the no-update run, then compare
  REQUIRE(run_cli("eval --results " + kWork + "/trk_nu --dataset " + kWork + "/data --out " +
                  kWork + "/ev_nu --tracker micro_nu") == 0);
  REQUIRE(run_cli("compare --out " + kWork + "/cmp " + kWork + "/ev/report.json " + kWork +
                  "/ev_nu/report.json") == 0);
  REQUIRE(fs::exists(kWork + "/cmp/table.csv"));
  std::string csv = file_bytes(kWork + "/cmp/table.csv");
  CHECK(csv.find("micro") != std::string::npos);
  CHECK(fs::exists(kWork + "/cmp/compare_success.png"));

  // identical reports give identical rows
  REQUIRE(run_cli("compare --out " + kWork + "/cmp2 " + kWork + "/ev/report.json " + kWork +
                  "/ev/report.json") == 0);
  std::string csv2 = file_bytes(kWork + "/cmp2/table.csv");
  std::istringstream ss(csv2);
  std::string header, r1, r2;
  std::getline(ss, header);
  std::getline(ss, r1);
  std::getline(ss, r2);
  CHECK(r1 == r2);

  REQUIRE(run_cli("overlay --results " + kWork + "/trk --dataset " + kWork + "/data --out " +
                  kWork + "/ov --max-frames 2") == 0);
  CHECK(fs::exists(kWork + "/ov/legend.txt"));
  // pixel probe: the prediction box edge carries the legend color
  auto ds = tsf::load_dataset(kWork + "/data", tsf::DatasetKind::kSynthetic);
  auto pred = tsf::read_result_boxes(kWork + "/trk/" + ds[0].id + ".txt");
  cv::Mat img = cv::imread(kWork + "/ov/" + ds[0].id + "/000000.png");
  REQUIRE(!img.empty());
  const int px = static_cast<int>(std::lround(pred[0].x1()));
  const int py = static_cast<int>(std::lround(pred[0].y1()));
  const cv::Vec3b c = img.at<cv::Vec3b>(py, px);
  CHECK(c[2] == 255);  // red channel
  CHECK(c[0] == 0);
  CHECK(c[1] == 0);

  // empty results directory: warning, no crash
  std::string out;
  fs::create_directories(kWork + "/empty_results");
  CHECK(run_cli("overlay --results " + kWork + "/empty_results --dataset " + kWork +
                    "/data --out " + kWork + "/ov_empty",
                &out) == 0);
  CHECK(out.find("warning") != std::string::npos);
}
