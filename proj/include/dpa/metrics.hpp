// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dpa/data.hpp"

namespace dpa {

/// J: |pred ∩ gt| / |pred ∪ gt|; 1 when both masks are empty.
double region_similarity(const Mask& pred, const Mask& gt);

/// Foreground pixels 4-adjacent to background or to the image edge.
Mask boundary_map(const Mask& m);

/// max(1, round(0.0075 · image diagonal)).
int boundary_tolerance(std::size_t height, std::size_t width);

/// F-measure of boundary precision/recall under a Euclidean matching radius.
/// Both boundaries empty → 1, exactly one empty → 0.
double boundary_accuracy(const Mask& pred, const Mask& gt);
double boundary_accuracy(const Mask& pred, const Mask& gt, int tolerance);

struct SequenceScore {
  std::string id;
  double j = 0.0, f = 0.0, g = 0.0;
};

struct MetricReport {
  std::vector<SequenceScore> per_sequence;
  double j_mean = 0.0, f_mean = 0.0, g_mean = 0.0;
};

SequenceScore evaluate_sequence(const std::string& id, const std::vector<Mask>& pred, const std::vector<Mask>& gt);

/// Per-frame scores averaged per sequence, then across sequences.
MetricReport evaluate(const std::vector<MaskSequence>& pred, const std::vector<MaskSequence>& gt);

void write_report_csv(std::ostream& os, const MetricReport& report);
void write_report_text(std::ostream& os, const MetricReport& report);

}  // namespace dpa
