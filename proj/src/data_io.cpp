#include "tsf/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace tsf {

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "vot_tir" || s == "vot") return DatasetKind::kVotTir;
  if (s == "gtot") return DatasetKind::kGtot;
  if (s == "synthetic" || s == "synth") return DatasetKind::kSynthetic;
  throw UsageError("unknown dataset kind: " + s + " (expected vot_tir, gtot or synthetic)");
}

namespace {

// Strict numeric token: full-token parse, accepts nan for VOT invalid frames.
bool parse_number(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  std::string t = tok;
  if (t == "nan" || t == "NaN" || t == "NAN") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && p == end;
}

std::vector<std::string> split(const std::string& line, const std::string& delims) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (delims.find(ch) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(strip_cr(line));
  // Trailing blank lines are common in benchmark files.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

ParsedGroundTruth parse_vot_groundtruth(const std::string& path) {
  ParsedGroundTruth out;
  const auto lines = read_lines(path);
  for (size_t k = 0; k < lines.size(); ++k) {
    const int lineno = static_cast<int>(k) + 1;
    const auto toks = split(lines[k], ",");
    if (toks.size() != 4 && toks.size() != 8)
      throw ParseError(path, lineno, "expected 4 or 8 comma-separated values, got " +
                                         std::to_string(toks.size()));
    std::vector<double> v(toks.size());
    for (size_t i = 0; i < toks.size(); ++i)
      if (!parse_number(toks[i], v[i]))
        throw ParseError(path, lineno, "bad number '" + toks[i] + "'");
    bool any_nan = std::any_of(v.begin(), v.end(), [](double d) { return std::isnan(d); });
    Box b;
    bool ok = !any_nan;
    if (ok) {
      if (toks.size() == 4) {
        b = Box::from_xywh(v[0], v[1], v[2], v[3]);
      } else {
        double x1 = v[0], y1 = v[1], x2 = v[0], y2 = v[1];
        for (size_t i = 0; i < 8; i += 2) {
          x1 = std::min(x1, v[i]);
          x2 = std::max(x2, v[i]);
          y1 = std::min(y1, v[i + 1]);
          y2 = std::max(y2, v[i + 1]);
        }
        b = Box::from_corner(x1, y1, x2, y2);
      }
      ok = b.w > 0 && b.h > 0;
    }
    out.boxes.push_back(ok ? b : Box{});
    out.valid.push_back(ok);
  }
  if (out.boxes.empty()) throw DataError(path + ": empty ground-truth file");
  return out;
}

std::vector<Box> parse_gtot_groundtruth(const std::string& path) {
  std::vector<Box> out;
  const auto lines = read_lines(path);
  for (size_t k = 0; k < lines.size(); ++k) {
    const int lineno = static_cast<int>(k) + 1;
    const auto toks = split(lines[k], " \t,");
    if (toks.size() != 4)
      throw ParseError(path, lineno, "expected 4 values (x1 y1 x2 y2), got " +
                                         std::to_string(toks.size()));
    double v[4];
    for (size_t i = 0; i < 4; ++i)
      if (!parse_number(toks[i], v[i]) || std::isnan(v[i]))
        throw ParseError(path, lineno, "bad number '" + toks[i] + "'");
    if (v[2] <= v[0]) throw ParseError(path, lineno, "x2 <= x1");
    if (v[3] <= v[1]) throw ParseError(path, lineno, "y2 <= y1");
    out.push_back(Box::from_corner(v[0], v[1], v[2], v[3]));
  }
  if (out.empty()) throw DataError(path + ": empty ground-truth file");
  return out;
}

namespace {

bool is_image_file(const fs::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".pgm" || e == ".bmp" || e == ".ppm";
}

std::vector<std::string> sorted_images(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> read_attributes(const fs::path& seq_dir) {
  std::set<std::string> tags;
  const fs::path attr = seq_dir / "attributes.txt";
  if (fs::exists(attr)) {
    for (const auto& line : read_lines(attr.string()))
      if (!line.empty()) tags.insert(line);
  }
  // VOT-style per-frame tag files: any nonzero entry marks the sequence.
  for (const auto& e : fs::directory_iterator(seq_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".tag") continue;
    for (const auto& line : read_lines(e.path().string())) {
      if (!line.empty() && line != "0") {
        tags.insert(e.path().stem().string());
        break;
      }
    }
  }
  return tags;
}

std::vector<std::string> sequence_ids(const fs::path& root) {
  std::vector<std::string> ids;
  const fs::path list = root / "list.txt";
  if (fs::exists(list)) {
    for (const auto& line : read_lines(list.string()))
      if (!line.empty()) ids.push_back(line);
    return ids;
  }
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::vector<SequenceRecord> load_dataset(const std::string& root, DatasetKind kind) {
  std::vector<SequenceRecord> out;
  if (!fs::is_directory(root)) {
    std::cerr << "warning: dataset root not found or empty: " << root << "\n";
    return out;
  }
  for (const auto& id : sequence_ids(root)) {
    const fs::path dir = fs::path(root) / id;
    if (!fs::is_directory(dir)) {
      std::cerr << "warning: missing sequence directory: " << dir << "\n";
      continue;
    }
    SequenceRecord rec;
    rec.id = id;
    try {
      if (kind == DatasetKind::kGtot) {
        const fs::path gtfile = dir / "groundTruth_i.txt";
        rec.gt = parse_gtot_groundtruth(gtfile.string());
        rec.valid.assign(rec.gt.size(), true);
        rec.frame_paths = sorted_images(dir / "i");  // thermal modality only
      } else {
        const fs::path gtfile = dir / "groundtruth.txt";
        auto parsed = parse_vot_groundtruth(gtfile.string());
        rec.gt = std::move(parsed.boxes);
        rec.valid = std::move(parsed.valid);
        fs::path frames_dir = dir;
        if (fs::is_directory(dir / "frames"))
          frames_dir = dir / "frames";
        else if (fs::is_directory(dir / "color"))
          frames_dir = dir / "color";
        rec.frame_paths = sorted_images(frames_dir);
      }
    } catch (const DataError& e) {
      std::cerr << "warning: skipping sequence " << id << ": " << e.what() << "\n";
      continue;
    }
    if (rec.frame_paths.empty()) {
      std::cerr << "warning: sequence " << id << " has no frames\n";
      continue;
    }
    if (rec.frame_paths.size() != rec.gt.size()) {
      std::cerr << "warning: sequence " << id << ": " << rec.frame_paths.size() << " frames vs "
                << rec.gt.size() << " ground-truth lines; truncating\n";
      const size_t n = std::min(rec.frame_paths.size(), rec.gt.size());
      rec.frame_paths.resize(n);
      rec.gt.resize(n);
      rec.valid.resize(n);
    }
    if (rec.valid.empty() || !rec.valid[0]) {
      std::cerr << "warning: sequence " << id << ": first frame has no valid ground truth\n";
      continue;
    }
    rec.attributes = read_attributes(dir);
    out.push_back(std::move(rec));
  }
  if (out.empty()) std::cerr << "warning: no sequences loaded from " << root << "\n";
  return out;
}

Image load_frame(const SequenceRecord& rec, size_t index) {
  if (rec.in_memory()) {
    if (index >= rec.frames.size()) throw DataError("frame index out of range");
    const Image& src = rec.frames[index];
    if (src.channels == 3) return src;
    Image img(src.height, src.width, 3);
    const long plane = static_cast<long>(src.height) * src.width;
    for (int c = 0; c < 3; ++c)
      std::copy(src.data.begin(), src.data.begin() + plane,
                img.data.begin() + static_cast<long>(c) * plane);
    return img;
  }
  if (index >= rec.frame_paths.size()) throw DataError("frame index out of range");
  const std::string& path = rec.frame_paths[index];
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot read frame: " + path);
  if (m.depth() != CV_8U) {
    cv::Mat tmp;
    double scale = m.depth() == CV_16U ? 255.0 / 65535.0 : 1.0;
    m.convertTo(tmp, CV_8U, scale);
    m = tmp;
  }
  Image img(m.rows, m.cols, 3);
  const int src_ch = m.channels();
  for (int y = 0; y < m.rows; ++y) {
    const unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < m.cols; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<double>(row[x * src_ch + (src_ch == 3 ? c : 0)]);
  }
  return img;
}

namespace {

double lerp_at(double t, double t0, double v0, double t1, double v1) {
  if (t1 <= t0) return v0;
  const double a = (t - t0) / (t1 - t0);
  return v0 + a * (v1 - v0);
}

template <typename P, typename GetT, typename GetV>
double schedule_value(const std::vector<P>& pts, double t, GetT get_t, GetV get_v) {
  if (pts.size() == 1) return get_v(pts[0]);
  if (t <= get_t(pts.front())) return get_v(pts.front());
  if (t >= get_t(pts.back())) return get_v(pts.back());
  for (size_t i = 1; i < pts.size(); ++i)
    if (t <= get_t(pts[i]))
      return lerp_at(t, get_t(pts[i - 1]), get_v(pts[i - 1]), get_t(pts[i]), get_v(pts[i]));
  return get_v(pts.back());
}

struct Blob {
  double cx, cy, sx, sy, amp;
};

void render_blob(Image& img, const Blob& b) {
  const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - 4 * b.sy)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.cy + 4 * b.sy)));
  const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - 4 * b.sx)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.cx + 4 * b.sx)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - b.cx) / b.sx;
      const double dy = (y + 0.5 - b.cy) / b.sy;
      img.at(0, y, x) += b.amp * std::exp(-0.5 * (dx * dx + dy * dy));
    }
}

}  // namespace

SequenceRecord generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1e-12);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Static textured background: broad random bumps over a flat level.
  Image background(spec.height, spec.width, 1);
  for (long i = 0; i < background.height * static_cast<long>(background.width); ++i)
    background.data[static_cast<size_t>(i)] = 60.0;
  const int bumps = 6;
  for (int b = 0; b < bumps; ++b) {
    Blob bump;
    bump.cx = uni(gen) * spec.width;
    bump.cy = uni(gen) * spec.height;
    bump.sx = spec.width * (0.15 + 0.2 * uni(gen));
    bump.sy = spec.height * (0.15 + 0.2 * uni(gen));
    bump.amp = 25.0 * (uni(gen) - 0.3);
    render_blob(background, bump);
  }

  // Distractor blobs on straight random paths.
  struct Distractor {
    double x0, y0, x1, y1, sx, sy, amp;
  };
  std::vector<Distractor> distractors;
  for (int d = 0; d < spec.distractor_count; ++d) {
    Distractor dd;
    dd.x0 = uni(gen) * spec.width;
    dd.y0 = uni(gen) * spec.height;
    dd.x1 = uni(gen) * spec.width;
    dd.y1 = uni(gen) * spec.height;
    dd.sx = 2.0 + 3.0 * uni(gen);
    dd.sy = 2.0 + 3.0 * uni(gen);
    dd.amp = 80.0 + 40.0 * uni(gen);
    distractors.push_back(dd);
  }

  SequenceRecord rec;
  rec.id = spec.id;
  rec.attributes.insert(spec.attributes.begin(), spec.attributes.end());
  for (int f = 0; f < spec.length; ++f) {
    const double t = spec.length > 1 ? static_cast<double>(f) / (spec.length - 1) : 0.0;
    double w = schedule_value(spec.size_schedule, t, [](const SizePoint& p) { return p.t; },
                              [](const SizePoint& p) { return p.w; });
    double h = schedule_value(spec.size_schedule, t, [](const SizePoint& p) { return p.t; },
                              [](const SizePoint& p) { return p.h; });
    w = std::max(4.0, w);
    h = std::max(4.0, h);
    double cx = schedule_value(spec.waypoints, t, [](const TrajectoryPoint& p) { return p.t; },
                               [](const TrajectoryPoint& p) { return p.x; });
    double cy = schedule_value(spec.waypoints, t, [](const TrajectoryPoint& p) { return p.t; },
                               [](const TrajectoryPoint& p) { return p.y; });
    // Keep the ground truth inside the frame.
    cx = std::min(std::max(cx, w / 2), spec.width - w / 2);
    cy = std::min(std::max(cy, h / 2), spec.height - h / 2);

    Image frame = background;
    for (const auto& d : distractors) {
      Blob b{lerp_at(t, 0, d.x0, 1, d.x1), lerp_at(t, 0, d.y0, 1, d.y1), d.sx, d.sy, d.amp};
      render_blob(frame, b);
    }
    const double amp = lerp_at(t, 0, spec.intensity_start, 1, spec.intensity_end);
    render_blob(frame, Blob{cx, cy, w / 4.0, h / 4.0, amp});
    if (spec.noise_sigma > 0)
      for (auto& v : frame.data) v += noise(gen);
    for (auto& v : frame.data) v = std::min(255.0, std::max(0.0, v));

    rec.frames.push_back(std::move(frame));
    rec.gt.push_back(Box{cx, cy, w, h});
    rec.valid.push_back(true);
  }
  return rec;
}

std::vector<SynthSpec> make_random_specs(const RandomSuite& suite, unsigned long long seed) {
  std::vector<SynthSpec> specs;
  for (int i = 0; i < suite.count; ++i) {
    std::mt19937_64 gen(seed * 1000003ULL + static_cast<unsigned long long>(i));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    SynthSpec s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", suite.id_prefix.c_str(), i);
    s.id = buf;
    s.height = suite.height;
    s.width = suite.width;
    s.length = suite.length;
    s.seed = seed * 7919ULL + static_cast<unsigned long long>(i) + 1;
    s.noise_sigma = suite.noise_sigma;
    s.distractor_count = suite.distractors;

    const double w0 = suite.size_min + (suite.size_max - suite.size_min) * uni(gen);
    const double h0 = suite.size_min + (suite.size_max - suite.size_min) * uni(gen);
    const double scale =
        suite.scale_change_min + (suite.scale_change_max - suite.scale_change_min) * uni(gen);
    s.size_schedule = {{0.0, w0, h0}, {1.0, w0 * scale, h0 * scale}};

    const double margin = 0.25 * std::min(suite.width, suite.height);
    double x = margin + uni(gen) * (suite.width - 2 * margin);
    double y = margin + uni(gen) * (suite.height - 2 * margin);
    s.waypoints.push_back({0.0, x, y});
    const int hops = 3;
    double path_len = 0.0;
    for (int k = 1; k <= hops; ++k) {
      const double ang = 2.0 * M_PI * uni(gen);
      const double dist = suite.step_px * suite.length / hops * (0.5 + 0.5 * uni(gen));
      double nx = std::min(std::max(x + dist * std::cos(ang), margin), suite.width - margin);
      double ny = std::min(std::max(y + dist * std::sin(ang), margin), suite.height - margin);
      path_len += std::hypot(nx - x, ny - y);
      x = nx;
      y = ny;
      s.waypoints.push_back({static_cast<double>(k) / hops, x, y});
    }

    if (scale >= 1.3 || scale <= 1.0 / 1.3) s.attributes.push_back("size_change");
    if (path_len >= 0.25 * std::min(suite.width, suite.height))
      s.attributes.push_back("motion_change");
    specs.push_back(std::move(s));
  }
  return specs;
}

void write_pgm(const std::string& path, const Image& img) {
  if (img.channels != 1) throw DataError("write_pgm: single-channel image expected");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write: " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      row[static_cast<size_t>(x)] =
          static_cast<unsigned char>(std::lround(std::min(255.0, std::max(0.0, img.at(0, y, x)))));
    f.write(reinterpret_cast<const char*>(row.data()), img.width);
  }
}

void write_synth_dataset(const std::string& root, const std::vector<SynthSpec>& specs) {
  fs::create_directories(root);
  std::ofstream list(fs::path(root) / "list.txt", std::ios::trunc);
  json manifest;
  manifest["kind"] = "synthetic";
  manifest["sequences"] = json::array();
  for (const auto& spec : specs) {
    SequenceRecord rec = generate_synthetic(spec);
    const fs::path dir = fs::path(root) / rec.id;
    fs::create_directories(dir / "frames");
    std::ofstream gt(dir / "groundtruth.txt", std::ios::trunc);
    for (size_t i = 0; i < rec.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.pgm", i);
      write_pgm((dir / "frames" / name).string(), rec.frames[i]);
      char line[128];
      std::snprintf(line, sizeof(line), "%.4f,%.4f,%.4f,%.4f\n", rec.gt[i].x1(), rec.gt[i].y1(),
                    rec.gt[i].w, rec.gt[i].h);
      gt << line;
    }
    if (!rec.attributes.empty()) {
      std::ofstream attr(dir / "attributes.txt", std::ios::trunc);
      for (const auto& a : rec.attributes) attr << a << "\n";
    }
    list << rec.id << "\n";
    manifest["sequences"].push_back({{"id", rec.id}, {"length", rec.size()}, {"seed", spec.seed}});
  }
  std::ofstream mf(fs::path(root) / "manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << "\n";
}

namespace {

SynthSpec spec_from_json(const json& j) {
  SynthSpec s;
  s.id = j.value("id", s.id);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.length = j.value("length", s.length);
  s.intensity_start = j.value("intensity_start", s.intensity_start);
  s.intensity_end = j.value("intensity_end", s.intensity_end);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.distractor_count = j.value("distractors", s.distractor_count);
  s.seed = j.value("seed", s.seed);
  if (j.contains("attributes")) s.attributes = j.at("attributes").get<std::vector<std::string>>();
  if (j.contains("waypoints"))
    for (const auto& w : j.at("waypoints"))
      s.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
  if (j.contains("size_schedule"))
    for (const auto& p : j.at("size_schedule"))
      s.size_schedule.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  return s;
}

RandomSuite suite_from_json(const json& j) {
  RandomSuite r;
  r.count = j.value("count", r.count);
  r.length = j.value("length", r.length);
  r.height = j.value("height", r.height);
  r.width = j.value("width", r.width);
  r.size_min = j.value("size_min", r.size_min);
  r.size_max = j.value("size_max", r.size_max);
  r.scale_change_min = j.value("scale_change_min", r.scale_change_min);
  r.scale_change_max = j.value("scale_change_max", r.scale_change_max);
  r.step_px = j.value("step_px", r.step_px);
  r.noise_sigma = j.value("noise_sigma", r.noise_sigma);
  r.distractors = j.value("distractors", r.distractors);
  r.id_prefix = j.value("id_prefix", r.id_prefix);
  return r;
}

}  // namespace

std::vector<SynthSpec> parse_synth_spec_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open synth spec: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  std::vector<SynthSpec> specs;
  if (j.contains("sequences"))
    for (const auto& js : j.at("sequences")) specs.push_back(spec_from_json(js));
  if (j.contains("random")) {
    const unsigned long long seed = j.value("seed", 1ULL);
    auto rnd = make_random_specs(suite_from_json(j.at("random")), seed);
    specs.insert(specs.end(), rnd.begin(), rnd.end());
  }
  if (specs.empty()) throw DataError(path + ": no sequences defined");
  return specs;
}

void write_result_boxes(const std::string& path, const std::vector<Box>& boxes) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write: " + path);
  for (const auto& b : boxes) {
    char line[128];
    std::snprintf(line, sizeof(line), "%.4f,%.4f,%.4f,%.4f\n", b.x1(), b.y1(), b.w, b.h);
    f << line;
  }
}

std::vector<Box> read_result_boxes(const std::string& path) {
  std::vector<Box> out;
  const auto lines = read_lines(path);
  for (size_t k = 0; k < lines.size(); ++k) {
    const auto toks = split(lines[k], ",");
    if (toks.size() != 4)
      throw ParseError(path, static_cast<int>(k) + 1, "expected 4 comma-separated values");
    double v[4];
    for (size_t i = 0; i < 4; ++i)
      if (!parse_number(toks[i], v[i]) || std::isnan(v[i]))
        throw ParseError(path, static_cast<int>(k) + 1, "bad number '" + toks[i] + "'");
    out.push_back(Box::from_xywh(v[0], v[1], v[2], v[3]));
  }
  return out;
}

}  // namespace tsf
