// SPDX-License-Identifier: Apache-2.0
#include "dpa/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <map>

namespace dpa {

namespace {

void require_same_size(const Mask& a, const Mask& b, const char* op) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError(std::string(op) + ": mask resolution mismatch " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
}

Mask dilate_disk(const Mask& m, int r) {
  Mask out(m.height, m.width);
  const auto h = static_cast<long>(m.height), w = static_cast<long>(m.width);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) continue;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > static_cast<long>(r) * r) continue;
          const long yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) out.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) = 1;
        }
    }
  return out;
}

std::size_t count_hits(const Mask& points, const Mask& region) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.pixels.size(); ++i) n += points.pixels[i] && region.pixels[i];
  return n;
}

}  // namespace

double region_similarity(const Mask& pred, const Mask& gt) {
  require_same_size(pred, gt, "region_similarity");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    inter += pred.pixels[i] && gt.pixels[i];
    uni += pred.pixels[i] || gt.pixels[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Mask boundary_map(const Mask& m) {
  Mask b(m.height, m.width);
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y + 1 == m.height || x + 1 == m.width;
      if (edge || !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1)) b.at(y, x) = 1;
    }
  return b;
}

int boundary_tolerance(std::size_t height, std::size_t width) {
  const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
  return std::max(1, static_cast<int>(std::lround(0.0075 * diag)));
}

double boundary_accuracy(const Mask& pred, const Mask& gt) {
  return boundary_accuracy(pred, gt, boundary_tolerance(gt.height, gt.width));
}

double boundary_accuracy(const Mask& pred, const Mask& gt, int tolerance) {
  require_same_size(pred, gt, "boundary_accuracy");
  const auto pb = boundary_map(pred), gb = boundary_map(gt);
  const auto np = pb.area(), ng = gb.area();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const double precision = static_cast<double>(count_hits(pb, dilate_disk(gb, tolerance))) / static_cast<double>(np);
  const double recall = static_cast<double>(count_hits(gb, dilate_disk(pb, tolerance))) / static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

SequenceScore evaluate_sequence(const std::string& id, const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  if (pred.size() != gt.size())
    throw ArgumentError("evaluate: sequence '" + id + "' has " + std::to_string(pred.size()) + " predicted vs " +
                        std::to_string(gt.size()) + " ground-truth frames");
  if (pred.empty()) throw ArgumentError("evaluate: sequence '" + id + "' is empty");
  SequenceScore s{id, 0.0, 0.0, 0.0};
  for (std::size_t t = 0; t < pred.size(); ++t) {
    s.j += region_similarity(pred[t], gt[t]);
    s.f += boundary_accuracy(pred[t], gt[t]);
  }
  s.j /= static_cast<double>(pred.size());
  s.f /= static_cast<double>(pred.size());
  s.g = (s.j + s.f) / 2.0;
  return s;
}

MetricReport evaluate(const std::vector<MaskSequence>& pred, const std::vector<MaskSequence>& gt) {
  if (pred.size() != gt.size())
    throw ArgumentError("evaluate: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(gt.size()) +
                        " ground-truth sequences");
  std::map<std::string, const MaskSequence*> by_id;
  for (const auto& p : pred) by_id[p.id] = &p;
  MetricReport r;
  for (const auto& g : gt) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw ArgumentError("evaluate: no prediction for sequence '" + g.id + "'");
    r.per_sequence.push_back(evaluate_sequence(g.id, it->second->masks, g.masks));
  }
  for (const auto& s : r.per_sequence) {
    r.j_mean += s.j;
    r.f_mean += s.f;
  }
  if (!r.per_sequence.empty()) {
    r.j_mean /= static_cast<double>(r.per_sequence.size());
    r.f_mean /= static_cast<double>(r.per_sequence.size());
  }
  r.g_mean = (r.j_mean + r.f_mean) / 2.0;
  return r;
}

void write_report_csv(std::ostream& os, const MetricReport& report) {
  os << "sequence,J,F,G\n" << std::fixed << std::setprecision(6);
  for (const auto& s : report.per_sequence) os << s.id << ',' << s.j << ',' << s.f << ',' << s.g << '\n';
  os << "mean," << report.j_mean << ',' << report.f_mean << ',' << report.g_mean << '\n';
}

void write_report_text(std::ostream& os, const MetricReport& report) {
  std::size_t width = 8;
  for (const auto& s : report.per_sequence) width = std::max(width, s.id.size());
  os << std::left << std::setw(static_cast<int>(width)) << "sequence" << std::right << std::setw(8) << "J"
     << std::setw(8) << "F" << std::setw(8) << "G" << '\n'
     << std::fixed << std::setprecision(3);
  for (const auto& s : report.per_sequence)
    os << std::left << std::setw(static_cast<int>(width)) << s.id << std::right << std::setw(8) << s.j << std::setw(8)
       << s.f << std::setw(8) << s.g << '\n';
  os << std::left << std::setw(static_cast<int>(width)) << "mean" << std::right << std::setw(8) << report.j_mean
     << std::setw(8) << report.f_mean << std::setw(8) << report.g_mean << '\n';
}

}  // namespace dpa
