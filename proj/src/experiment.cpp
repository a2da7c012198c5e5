// SPDX-License-Identifier: Apache-2.0
#include "dpa/experiment.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace dpa {

std::vector<AblationCell> full_ablation_grid() {
  return {
      {"I", false, false, true, true, 4},   {"II", true, false, true, true, 4},   {"III", false, true, true, true, 4},
      {"IV", true, true, true, true, 4},    {"V", true, true, true, true, 1},     {"VI", true, true, true, true, 2},
      {"VII", true, true, true, true, 3},   {"VIII", true, true, true, true, 5},  {"IX", true, true, false, true, 4},
      {"X", true, true, true, false, 4},    {"XI", true, true, false, false, 4},
  };
}

std::vector<AblationCell> component_grid() {
  auto g = full_ablation_grid();
  g.resize(4);
  return g;
}

std::vector<AblationCell> parse_grid(const std::string& spec) {
  if (spec == "full") return full_ablation_grid();
  if (spec == "components") return component_grid();
  const auto all = full_ablation_grid();
  std::vector<AblationCell> out;
  std::stringstream ss(spec);
  std::string label;
  while (std::getline(ss, label, ',')) {
    auto it = std::find_if(all.begin(), all.end(), [&](const AblationCell& c) { return c.label == label; });
    if (it == all.end()) throw ArgumentError("unknown ablation row '" + label + "'");
    out.push_back(*it);
  }
  if (out.empty()) throw ArgumentError("empty ablation grid");
  return out;
}

ModelConfig apply_cell(ModelConfig base, const AblationCell& cell) {
  base.ima = cell.ima;
  base.ifa = cell.ifa;
  base.ima_prototypes = cell.ima_prototypes;
  base.ifa_prototypes = cell.ifa_prototypes;
  return base;
}

std::vector<MaskSequence> ground_truth(const Dataset& dataset) {
  std::vector<MaskSequence> out;
  for (const auto& v : dataset) out.push_back({v.id, v.masks});
  return out;
}

MetricReport evaluate_model(const DpaModel& model, const Dataset& test, std::size_t n_refs) {
  std::vector<MaskSequence> pred;
  for (const auto& v : test) pred.push_back({v.id, infer_video(model, v, n_refs)});
  return evaluate(pred, ground_truth(test));
}

std::vector<AblationRow> ablate(const std::vector<AblationCell>& cells, const AblationOptions& options,
                                const std::optional<Dataset>& fixed_train, const std::optional<Dataset>& fixed_test) {
  if (options.seeds.empty()) throw ArgumentError("ablate: no seeds");
  std::vector<AblationRow> rows;
  for (const auto& c : cells) rows.push_back({c, 0, 0.0, 0.0, 0.0, {}});

  for (auto seed : options.seeds) {
    Dataset train_set, test_set;
    if (fixed_train && fixed_test) {
      train_set = *fixed_train;
      test_set = *fixed_test;
    } else {
      auto tr = options.train_data;
      tr.seed = mix_seed(seed, 1);
      tr.id_prefix = "train";
      auto te = options.test_data;
      te.seed = mix_seed(seed, 2);
      te.id_prefix = "test";
      train_set = gen_synthetic(tr);
      test_set = gen_synthetic(te);
    }
    std::vector<bool> done(cells.size(), false);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (done[i]) continue;
      auto mc = apply_cell(options.model, cells[i]);
      mc.seed = mix_seed(seed, 3);
      DpaModel model(mc);
      auto tc = options.train;
      tc.seed = mix_seed(seed, 4);
      const auto curve = train(model, train_set, tc);
      if (options.log) {
        std::ostringstream os;
        os << "seed " << seed << " row " << cells[i].label << ": trained " << tc.steps << " steps, final loss "
           << std::setprecision(4) << curve.back().loss;
        options.log(os.str());
      }
      for (std::size_t k = i; k < cells.size(); ++k) {
        if (done[k] || !cells[k].same_architecture(cells[i])) continue;
        const auto report = evaluate_model(model, test_set, cells[k].n_refs);
        auto& row = rows[k];
        row.parameter_count = model.parameter_count();
        row.j += report.j_mean;
        row.f += report.f_mean;
        row.g_per_seed.push_back(report.g_mean);
        done[k] = true;
        if (options.log) {
          std::ostringstream os;
          os << "seed " << seed << " row " << cells[k].label << ": J=" << std::fixed << std::setprecision(4)
             << report.j_mean << " F=" << report.f_mean << " G=" << report.g_mean;
          options.log(os.str());
        }
      }
    }
  }
  const auto n = static_cast<double>(options.seeds.size());
  for (auto& r : rows) {
    r.j /= n;
    r.f /= n;
    r.g = (r.j + r.f) / 2.0;
  }
  return rows;
}

namespace {
const char* mark(bool on, bool protos) { return on ? (protos ? "w/P" : "w/oP") : "x"; }
}  // namespace

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "row,ima,ifa,n_refs,params,J,F,G\n" << std::fixed << std::setprecision(6);
  for (const auto& r : rows)
    os << r.cell.label << ',' << mark(r.cell.ima, r.cell.ima_prototypes) << ','
       << mark(r.cell.ifa, r.cell.ifa_prototypes) << ',' << (r.cell.ifa ? std::to_string(r.cell.n_refs) : "-") << ','
       << r.parameter_count << ',' << r.j << ',' << r.f << ',' << r.g << '\n';
}

void write_ablation_text(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << std::left << std::setw(6) << "row" << std::setw(6) << "IMA" << std::setw(6) << "IFA" << std::setw(4) << "N"
     << std::right << std::setw(10) << "params" << std::setw(8) << "G" << std::setw(8) << "J" << std::setw(8) << "F"
     << '\n'
     << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    os << std::left << std::setw(6) << r.cell.label << std::setw(6) << mark(r.cell.ima, r.cell.ima_prototypes)
       << std::setw(6) << mark(r.cell.ifa, r.cell.ifa_prototypes) << std::setw(4)
       << (r.cell.ifa ? std::to_string(r.cell.n_refs) : "-") << std::right << std::setw(10) << r.parameter_count
       << std::setw(8) << r.g << std::setw(8) << r.j << std::setw(8) << r.f << '\n';
}

}  // namespace dpa
