// SPDX-License-Identifier: Apache-2.0
#include "dpa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "dpa/checkpoint.hpp"
#include "dpa/netpbm.hpp"

namespace dpa {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double quantize(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::array<double, 3> random_color(Rng& rng) { return {uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9)}; }

ShapeSpec random_shape(Rng& rng, double scale, double r_lo, double r_hi) {
  ShapeSpec s;
  s.kind = static_cast<ShapeKind>(uniform_index(rng, 0, 2));
  s.radius = {uniform(rng, r_lo, r_hi) * scale, uniform(rng, r_lo, r_hi) * scale};
  s.angle = uniform(rng, 0.0, std::numbers::pi);
  s.color = random_color(rng);
  s.stripe_freq = uniform(rng, 0.08, 0.25);
  s.stripe_amp = uniform(rng, 0.0, 0.15);
  if (s.kind == ShapeKind::Polygon) {
    const auto n = uniform_index(rng, 5, 7);
    const double r = std::max(s.radius[0], s.radius[1]);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = kTwoPi * (static_cast<double>(i) + uniform(rng, -0.3, 0.3)) / static_cast<double>(n);
      const double rr = r * uniform(rng, 0.65, 1.0);
      s.vertices.push_back({rr * std::cos(a), rr * std::sin(a)});
    }
  }
  return s;
}

// Start coordinate keeping c + v·t inside [margin, extent − margin] for all t < len,
// shrinking v when the path cannot fit.
double fit_axis(Rng& rng, double& v, double extent, double margin, std::size_t len) {
  const double span = extent - 2.0 * margin;
  const double travel = std::abs(v) * static_cast<double>(len - 1);
  if (travel > span) {
    v *= span / travel;
  }
  const double lo = margin + std::max(0.0, -v * static_cast<double>(len - 1));
  const double hi = extent - margin - std::max(0.0, v * static_cast<double>(len - 1));
  return uniform(rng, lo, std::max(lo, hi));
}

std::array<double, 3> background_color(const BackgroundSpec& bg, double x, double y, std::size_t t) {
  const double u = x - bg.velocity[0] * static_cast<double>(t);
  const double v = y - bg.velocity[1] * static_cast<double>(t);
  auto c = bg.base;
  for (const auto& w : bg.waves) {
    const double s = std::sin(kTwoPi * (w.fx * u + w.fy * v) + w.phase);
    for (int k = 0; k < 3; ++k) c[k] += w.amp[k] * s;
  }
  return c;
}

std::array<double, 2> local_coords(const ShapeSpec& s, double x, double y, std::size_t t) {
  const double px = x - (s.center[0] + s.velocity[0] * static_cast<double>(t));
  const double py = y - (s.center[1] + s.velocity[1] * static_cast<double>(t));
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  return {c * px + sn * py, -sn * px + c * py};
}

std::array<double, 3> shape_color(const ShapeSpec& s, double x, double y, std::size_t t) {
  const auto uv = local_coords(s, x, y, t);
  const double f = 1.0 + s.stripe_amp * std::sin(kTwoPi * s.stripe_freq * uv[0]);
  return {s.color[0] * f, s.color[1] * f, s.color[2] * f};
}

// Topmost layer at a pixel centre: colour, displacement and mask bit.
struct PixelSample {
  std::array<double, 3> color;
  std::array<double, 2> flow;
  std::uint8_t mask;
};

PixelSample sample_pixel(const VideoSpec& spec, std::size_t px, std::size_t py, std::size_t t) {
  const double x = static_cast<double>(px) + 0.5, y = static_cast<double>(py) + 0.5;
  PixelSample s{background_color(spec.background, x, y, t), spec.background.velocity, 0};
  for (const auto& d : spec.distractors)
    if (d.contains(x, y, t)) s = {shape_color(d, x, y, t), d.velocity, 0};
  if (spec.salient.contains(x, y, t)) s = {shape_color(spec.salient, x, y, t), spec.salient.velocity, 1};
  if (spec.occluder && spec.occluder->visible(t) && spec.occluder->shape.contains(x, y, t))
    s = {shape_color(spec.occluder->shape, x, y, t), spec.occluder->shape.velocity, 0};
  return s;
}

void validate_dims(std::size_t len, std::size_t h, std::size_t w) {
  if (len < 4) throw ArgumentError("synthetic video length must be >= 4, got " + std::to_string(len));
  if (h == 0 || w == 0 || h % 16 || w % 16)
    throw ArgumentError("synthetic resolution must be a positive multiple of 16, got " + std::to_string(h) + "x" +
                        std::to_string(w));
}

std::string frame_name(const char* stem, std::size_t t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, t, ext);
  return buf;
}

struct ManifestEntry {
  std::string id;
  std::size_t length, height, width;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.txt";
  std::ifstream f(path);
  if (!f) throw IoError(path.string() + ": cannot open manifest");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    ManifestEntry e;
    std::string extra;
    if (!(is >> e.id >> e.length >> e.height >> e.width) || (is >> extra) || e.length == 0 || e.height == 0 ||
        e.width == 0 || e.id.find('/') != std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest line");
    entries.push_back(e);
  }
  return entries;
}

void write_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) os << e.id << ' ' << e.length << ' ' << e.height << ' ' << e.width << '\n';
  const auto s = os.str();
  write_file_bytes(root / "manifest.txt", std::vector<std::uint8_t>(s.begin(), s.end()));
}

std::filesystem::path require_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw ValidationError(p.string() + ": listed in manifest but missing");
  return p;
}

}  // namespace

std::size_t Mask::area() const { return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), 1)); }

bool ShapeSpec::contains(double x, double y, std::size_t t) const {
  const auto [u, v] = local_coords(*this, x, y, t);
  switch (kind) {
    case ShapeKind::Ellipse: {
      const double a = u / radius[0], b = v / radius[1];
      return a * a + b * b <= 1.0;
    }
    case ShapeKind::Rectangle:
      return std::abs(u) <= radius[0] && std::abs(v) <= radius[1];
    case ShapeKind::Polygon: {
      bool inside = false;
      for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
        const auto& a = vertices[i];
        const auto& b = vertices[j];
        if ((a[1] > v) != (b[1] > v) && u < (b[0] - a[0]) * (v - a[1]) / (b[1] - a[1]) + a[0]) inside = !inside;
      }
      return inside;
    }
  }
  return false;
}

double ShapeSpec::area() const {
  switch (kind) {
    case ShapeKind::Ellipse:
      return std::numbers::pi * radius[0] * radius[1];
    case ShapeKind::Rectangle:
      return 4.0 * radius[0] * radius[1];
    case ShapeKind::Polygon: {
      double a = 0.0;
      for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++)
        a += vertices[j][0] * vertices[i][1] - vertices[i][0] * vertices[j][1];
      return std::abs(a) / 2.0;
    }
  }
  return 0.0;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

VideoSpec random_video_spec(const SyntheticOptions& o, std::size_t index) {
  validate_dims(o.length, o.height, o.width);
  Rng rng(mix_seed(o.seed, index));
  const double scale = static_cast<double>(std::min(o.height, o.width)) / 64.0;
  VideoSpec spec;
  spec.length = o.length;
  spec.height = o.height;
  spec.width = o.width;

  auto& bg = spec.background;
  const double bg_angle = uniform(rng, 0.0, kTwoPi), bg_speed = uniform(rng, 0.5, 1.5) * scale;
  bg.velocity = {bg_speed * std::cos(bg_angle), bg_speed * std::sin(bg_angle)};
  bg.base = {uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
  for (int k = 0; k < 3; ++k) {
    BackgroundSpec::Wave w;
    for (auto& a : w.amp) a = uniform(rng, 0.03, 0.15);
    w.fx = uniform(rng, -0.12, 0.12) / scale;
    w.fy = uniform(rng, -0.12, 0.12) / scale;
    w.phase = uniform(rng, 0.0, kTwoPi);
    bg.waves.push_back(w);
  }

  auto& s = spec.salient;
  s = random_shape(rng, scale, 7.0, 12.0);
  for (;;) {
    const double a = uniform(rng, 0.0, kTwoPi), sp = uniform(rng, 1.0, 2.5) * scale;
    s.velocity = {sp * std::cos(a), sp * std::sin(a)};
    if (std::hypot(s.velocity[0] - bg.velocity[0], s.velocity[1] - bg.velocity[1]) >= scale) break;
  }
  const double margin = 0.5 * std::max(s.radius[0], s.radius[1]);
  s.center[0] = fit_axis(rng, s.velocity[0], static_cast<double>(o.width), margin, o.length);
  s.center[1] = fit_axis(rng, s.velocity[1], static_cast<double>(o.height), margin, o.length);

  const auto n_distractors = uniform_index(rng, 0, 2);
  for (std::size_t i = 0; i < n_distractors; ++i) {
    auto d = random_shape(rng, scale, 5.0, 10.0);
    d.velocity = bg.velocity;
    d.center = {uniform(rng, 0.0, static_cast<double>(o.width)) - bg.velocity[0] * 0.5 * static_cast<double>(o.length),
                uniform(rng, 0.0, static_cast<double>(o.height)) - bg.velocity[1] * 0.5 * static_cast<double>(o.length)};
    spec.distractors.push_back(std::move(d));
  }

  const auto occluded = static_cast<std::size_t>(std::floor(o.difficulty * 0.25 * static_cast<double>(o.length)));
  if (occluded > 0) {
    OccluderSpec occ;
    occ.frame_count = occluded;
    occ.first_frame = uniform_index(rng, 0, o.length - occluded);
    occ.shape = random_shape(rng, scale, 1.0, 1.0);
    occ.shape.kind = ShapeKind::Rectangle;
    occ.shape.vertices.clear();
    const double r = std::max(s.radius[0], s.radius[1]);
    occ.shape.radius = {1.3 * r, 0.45 * r};
    occ.shape.velocity = bg.velocity;
    const double t_mid = static_cast<double>(occ.first_frame) + 0.5 * static_cast<double>(occluded - 1);
    for (int k = 0; k < 2; ++k)
      occ.shape.center[k] = s.center[k] + (s.velocity[k] - bg.velocity[k]) * t_mid;
    spec.occluder = std::move(occ);
  }
  return spec;
}

Tensor displacement_field(const VideoSpec& spec, std::size_t t) {
  const auto h = spec.height, w = spec.width;
  std::vector<double> v(2 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto s = sample_pixel(spec, x, y, t);
      v[y * w + x] = s.flow[0];
      v[h * w + y * w + x] = s.flow[1];
    }
  return Tensor({2, h, w}, std::move(v));
}

Tensor flow_to_color(const Tensor& displacement) {
  if (displacement.rank() != 3 || displacement.dim(0) != 2)
    throw DimensionError("flow_to_color: expected 2×H×W, got " + shape_string(displacement.shape()));
  // Middlebury wheel: 55 hues through red, yellow, green, cyan, blue, magenta.
  static const std::vector<std::array<double, 3>> wheel = [] {
    std::vector<std::array<double, 3>> w;
    constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    for (int i = 0; i < RY; ++i) w.push_back({255.0, std::floor(255.0 * i / RY), 0.0});
    for (int i = 0; i < YG; ++i) w.push_back({255.0 - std::floor(255.0 * i / YG), 255.0, 0.0});
    for (int i = 0; i < GC; ++i) w.push_back({0.0, 255.0, std::floor(255.0 * i / GC)});
    for (int i = 0; i < CB; ++i) w.push_back({0.0, 255.0 - std::floor(255.0 * i / CB), 255.0});
    for (int i = 0; i < BM; ++i) w.push_back({std::floor(255.0 * i / BM), 0.0, 255.0});
    for (int i = 0; i < MR; ++i) w.push_back({255.0, 0.0, 255.0 - std::floor(255.0 * i / MR)});
    return w;
  }();
  const auto h = displacement.dim(1), w = displacement.dim(2), hw = h * w;
  const auto d = displacement.data();
  const auto n = static_cast<double>(wheel.size());
  std::vector<double> out(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    const double u = d[p] / kFlowMaxMagnitude, v = d[hw + p] / kFlowMaxMagnitude;
    const double rad = std::min(1.0, std::hypot(u, v));
    const double a = std::atan2(-v, -u) / std::numbers::pi;
    const double fk = (a + 1.0) / 2.0 * (n - 1.0);
    const auto k0 = static_cast<std::size_t>(std::floor(fk));
    const auto k1 = (k0 + 1) % wheel.size();
    const double f = fk - std::floor(fk);
    for (std::size_t c = 0; c < 3; ++c) {
      const double col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
      out[c * hw + p] = quantize(1.0 - rad * (1.0 - col));
    }
  }
  return Tensor({3, h, w}, std::move(out));
}

VideoSample render_video(const VideoSpec& spec, const std::string& id) {
  validate_dims(spec.length, spec.height, spec.width);
  const auto h = spec.height, w = spec.width, hw = h * w;
  VideoSample video;
  video.id = id;
  for (std::size_t t = 0; t < spec.length; ++t) {
    std::vector<double> rgb(3 * hw), disp(2 * hw);
    Mask mask(h, w);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const auto s = sample_pixel(spec, x, y, t);
        const auto p = y * w + x;
        for (std::size_t c = 0; c < 3; ++c) rgb[c * hw + p] = quantize(s.color[c]);
        disp[p] = s.flow[0];
        disp[hw + p] = s.flow[1];
        mask.pixels[p] = s.mask;
      }
    video.frames.emplace_back(Shape{3, h, w}, std::move(rgb));
    video.flows.push_back(flow_to_color(Tensor({2, h, w}, std::move(disp))));
    video.masks.push_back(std::move(mask));
  }
  return video;
}

Dataset gen_synthetic(const SyntheticOptions& o) {
  validate_dims(o.length, o.height, o.width);
  if (o.difficulty < 0.0 || o.difficulty > 1.0) throw ArgumentError("difficulty must lie in [0, 1]");
  Dataset ds(o.n_videos);
  auto work = [&](unsigned worker, unsigned workers) {
    for (std::size_t i = worker; i < o.n_videos; i += workers) {
      char id[64];
      std::snprintf(id, sizeof id, "%s%04zu", o.id_prefix.c_str(), i);
      ds[i] = render_video(random_video_spec(o, i), id);
    }
  };
  const unsigned jobs = std::max(1u, o.jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    for (auto& t : pool) t.join();
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::vector<ManifestEntry> entries;
  for (const auto& v : dataset) {
    entries.push_back({v.id, v.length(), v.height(), v.width()});
    const auto dir = root / v.id;
    for (std::size_t t = 0; t < v.length(); ++t) {
      netpbm::write_ppm(dir / frame_name("frame", t, "ppm"), v.frames[t]);
      netpbm::write_ppm(dir / frame_name("flow", t, "ppm"), v.flows[t]);
      netpbm::write_pgm(dir / frame_name("mask", t, "pgm"), v.masks[t]);
    }
  }
  std::filesystem::create_directories(root);
  write_manifest(root, entries);
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  for (const auto& e : read_manifest(root)) {
    VideoSample v;
    v.id = e.id;
    const auto dir = root / e.id;
    for (std::size_t t = 0; t < e.length; ++t) {
      auto frame = netpbm::read_ppm(require_file(dir / frame_name("frame", t, "ppm")));
      auto flow = netpbm::read_ppm(require_file(dir / frame_name("flow", t, "ppm")));
      auto mask = netpbm::read_pgm(require_file(dir / frame_name("mask", t, "pgm")));
      const Shape expected{3, e.height, e.width};
      if (frame.shape() != expected || flow.shape() != expected || mask.height != e.height || mask.width != e.width)
        throw ValidationError((dir / frame_name("frame", t, "ppm")).string() + ": extents disagree with manifest (" +
                              std::to_string(e.height) + "x" + std::to_string(e.width) + ")");
      v.frames.push_back(std::move(frame));
      v.flows.push_back(std::move(flow));
      v.masks.push_back(std::move(mask));
    }
    ds.push_back(std::move(v));
  }
  return ds;
}

void save_mask_sequences(const std::vector<MaskSequence>& sequences, const std::filesystem::path& root) {
  std::vector<ManifestEntry> entries;
  for (const auto& s : sequences) {
    if (s.masks.empty()) throw ArgumentError("mask sequence '" + s.id + "' is empty");
    entries.push_back({s.id, s.masks.size(), s.masks.front().height, s.masks.front().width});
    for (std::size_t t = 0; t < s.masks.size(); ++t)
      netpbm::write_pgm(root / s.id / frame_name("mask", t, "pgm"), s.masks[t]);
  }
  std::filesystem::create_directories(root);
  write_manifest(root, entries);
}

std::vector<MaskSequence> load_mask_sequences(const std::filesystem::path& root) {
  std::vector<MaskSequence> out;
  for (const auto& e : read_manifest(root)) {
    MaskSequence s{e.id, {}};
    for (std::size_t t = 0; t < e.length; ++t) {
      const auto path = require_file(root / e.id / frame_name("mask", t, "pgm"));
      auto m = netpbm::read_pgm(path);
      if (m.height != e.height || m.width != e.width)
        throw ValidationError(path.string() + ": extents disagree with manifest");
      s.masks.push_back(std::move(m));
    }
    out.push_back(std::move(s));
  }
  return out;
}

Snippet sample_snippet(const Dataset& dataset, Rng& rng, std::size_t len) {
  if (dataset.empty()) throw ArgumentError("sample_snippet: empty dataset");
  Snippet s;
  s.video = uniform_index(rng, 0, dataset.size() - 1);
  const auto& v = dataset[s.video];
  if (v.length() < len)
    throw ArgumentError("sample_snippet: video '" + v.id + "' has " + std::to_string(v.length()) + " < " +
                        std::to_string(len) + " frames");
  s.start = uniform_index(rng, 0, v.length() - len);
  for (std::size_t t = s.start; t < s.start + len; ++t) {
    s.frames.push_back(v.frames[t]);
    s.flows.push_back(v.flows[t]);
    s.masks.push_back(v.masks[t]);
  }
  return s;
}

}  // namespace dpa
