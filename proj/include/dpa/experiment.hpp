// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpa/data.hpp"
#include "dpa/metrics.hpp"
#include "dpa/network.hpp"
#include "dpa/train.hpp"

namespace dpa {

/// One row of the component ablation: which attention blocks are present,
/// whether each uses prototype embedding, and the number of reference frames.
struct AblationCell {
  std::string label;
  bool ima = false, ifa = false;
  bool ima_prototypes = true, ifa_prototypes = true;
  std::size_t n_refs = 4;

  /// Cells equal in everything but n_refs share one trained model.
  bool same_architecture(const AblationCell& o) const {
    return ima == o.ima && ifa == o.ifa && (!ima || ima_prototypes == o.ima_prototypes) &&
           (!ifa || ifa_prototypes == o.ifa_prototypes);
  }
};

/// Rows I–XI: components on/off, reference count sweep, prototype on/off.
std::vector<AblationCell> full_ablation_grid();
/// Rows I–IV.
std::vector<AblationCell> component_grid();
/// Rows by label (e.g. "I,II,IV") or the names "components" / "full".
std::vector<AblationCell> parse_grid(const std::string& spec);

ModelConfig apply_cell(ModelConfig base, const AblationCell& cell);

struct AblationOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  /// Used when no fixed datasets are supplied; the seed is replaced per run.
  SyntheticOptions train_data, test_data;
  ModelConfig model;
  TrainConfig train;
  std::function<void(const std::string&)> log;
};

struct AblationRow {
  AblationCell cell;
  std::size_t parameter_count = 0;
  double j = 0.0, f = 0.0, g = 0.0;   // means over seeds
  std::vector<double> g_per_seed;
};

/// Trains one model per (architecture, seed) and evaluates every cell on the
/// test set. With fixed datasets every seed reuses them; otherwise each seed
/// generates its own train/test videos.
std::vector<AblationRow> ablate(const std::vector<AblationCell>& cells, const AblationOptions& options,
                                const std::optional<Dataset>& fixed_train = {},
                                const std::optional<Dataset>& fixed_test = {});

std::vector<MaskSequence> ground_truth(const Dataset& dataset);
MetricReport evaluate_model(const DpaModel& model, const Dataset& test, std::size_t n_refs);

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);
void write_ablation_text(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace dpa
