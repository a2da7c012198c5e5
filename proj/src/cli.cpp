// SPDX-License-Identifier: Apache-2.0
#include "dpa/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "dpa/checkpoint.hpp"
#include "dpa/data.hpp"
#include "dpa/experiment.hpp"
#include "dpa/ifa.hpp"
#include "dpa/metrics.hpp"
#include "dpa/network.hpp"
#include "dpa/train.hpp"

namespace dpa {

namespace {

namespace fs = std::filesystem;

// `key = value` lines become `--key value` arguments placed before the user's
// own flags, so explicit flags win (options take the last value).
std::vector<std::string> expand_config(std::vector<std::string> args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (it + 1 == args.end()) throw CLI::ArgumentMismatch("--config needs a file path");
  const fs::path path = *(it + 1);
  args.erase(it, it + 2);
  std::ifstream f(path);
  if (!f) throw IoError(path.string() + ": cannot open config file");
  std::vector<std::string> injected;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    injected.push_back("--" + key);
    injected.push_back(value);
  }
  const auto pos = args.empty() ? args.begin() : args.begin() + 1;
  args.insert(pos, injected.begin(), injected.end());
  return args;
}

struct ModelFlags {
  bool ima = true, ifa = true, ima_prototypes = true, ifa_prototypes = true, ifa_appearance_only = false;
  std::string embed = "hw", region = "spatial";

  void add(CLI::App* app) {
    app->add_option("--ima", ima, "Inter-modality attention at blocks 4 and 5")->capture_default_str();
    app->add_option("--ifa", ifa, "Inter-frame attention at block 5")->capture_default_str();
    app->add_option("--ima-prototypes", ima_prototypes, "Prototype embedding inside IMA")->capture_default_str();
    app->add_option("--ifa-prototypes", ifa_prototypes, "Prototype embedding inside IFA")->capture_default_str();
    app->add_option("--ifa-appearance-only", ifa_appearance_only, "IFA on the appearance stream only")
        ->capture_default_str();
    app->add_option("--embed", embed, "IMA key/value embedding: hw | channel")
        ->check(CLI::IsMember({"hw", "channel"}))
        ->capture_default_str();
    app->add_option("--region", region, "Soft-region softmax axis: spatial | channel")
        ->check(CLI::IsMember({"spatial", "channel"}))
        ->capture_default_str();
  }

  ModelConfig config(std::size_t h, std::size_t w, std::uint64_t seed) const {
    ModelConfig c;
    c.height = h;
    c.width = w;
    c.ima = ima;
    c.ifa = ifa;
    c.ima_prototypes = ima_prototypes;
    c.ifa_prototypes = ifa_prototypes;
    c.ifa_appearance_only = ifa_appearance_only;
    c.ima_embed = embed == "hw" ? EmbedMode::HwFc : EmbedMode::ChannelFc;
    c.region_axis = region == "spatial" ? RegionAxis::Spatial : RegionAxis::Channel;
    c.seed = seed;
    return c;
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ArgumentError("invalid seed '" + tok + "'");
    }
  }
  if (out.empty()) throw ArgumentError("no seeds given");
  return out;
}

// Writes to --out when given, otherwise to the result stream.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty()) {
    out << text;
    return;
  }
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-attention video object segmentation toolkit", "dpa"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--jobs", jobs, "Worker threads for data-parallel stages")->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic video dataset");
  SyntheticOptions gen_opts;
  std::string gen_out;
  add_common(gen);
  gen->add_option("--out", gen_out, "Dataset root directory")->required();
  gen->add_option("--videos", gen_opts.n_videos, "Number of videos")->capture_default_str();
  gen->add_option("--len", gen_opts.length, "Frames per video")->capture_default_str();
  gen->add_option("--height", gen_opts.height, "Frame height")->capture_default_str();
  gen->add_option("--width", gen_opts.width, "Frame width")->capture_default_str();
  gen->add_option("--difficulty", gen_opts.difficulty, "Occlusion difficulty in [0,1]")->capture_default_str();
  gen->add_option("--prefix", gen_opts.id_prefix, "Video id prefix")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  TrainConfig train_cfg;
  ModelFlags train_model;
  std::string train_data, train_ckpt, loss_csv;
  add_common(tr);
  tr->add_option("--data", train_data, "Dataset root")->required();
  tr->add_option("--ckpt", train_ckpt, "Output checkpoint path")->required();
  tr->add_option("--steps", train_cfg.steps, "Optimizer steps")->capture_default_str();
  tr->add_option("--batch", train_cfg.batch_size, "Snippets per step")->capture_default_str();
  tr->add_option("--lr-max", train_cfg.lr_max, "Initial learning rate")->capture_default_str();
  tr->add_option("--lr-min", train_cfg.lr_min, "Final learning rate")->capture_default_str();
  tr->add_option("--loss-csv", loss_csv, "Loss curve CSV path (default: stdout)");
  train_model.add(tr);

  // infer
  auto* inf = app.add_subcommand("infer", "Predict masks for every video of a dataset");
  std::string infer_data, infer_ckpt, infer_out, bank_cache;
  std::size_t infer_refs = 4;
  add_common(inf);
  inf->add_option("--data", infer_data, "Dataset root")->required();
  inf->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
  inf->add_option("--out", infer_out, "Prediction root directory")->required();
  inf->add_option("--n-refs", infer_refs, "Reference frames per video")->capture_default_str();
  inf->add_option("--bank-cache", bank_cache, "Directory for cached memory banks");

  // eval
  auto* ev = app.add_subcommand("eval", "Score predicted masks against ground truth");
  std::string eval_pred, eval_gt, eval_csv;
  add_common(ev);
  ev->add_option("--pred", eval_pred, "Prediction root")->required();
  ev->add_option("--gt", eval_gt, "Ground-truth root (dataset or mask tree)")->required();
  ev->add_option("--out", eval_csv, "Per-sequence CSV path");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and score the component ablation grid");
  AblationOptions ab_opts;
  ab_opts.train_data.n_videos = 50;
  ab_opts.test_data.n_videos = 10;
  std::string ab_grid = "components", ab_seeds = "0,1,2", ab_train_dir, ab_test_dir, ab_out;
  std::size_t ab_len = 16, ab_h = 64, ab_w = 64;
  double ab_difficulty = 1.0;
  add_common(ab);
  ab->add_option("--grid", ab_grid, "components | full | comma-separated rows (I..XI)")->capture_default_str();
  ab->add_option("--seeds", ab_seeds, "Comma-separated seeds")->capture_default_str();
  ab->add_option("--train-videos", ab_opts.train_data.n_videos, "Generated training videos")->capture_default_str();
  ab->add_option("--test-videos", ab_opts.test_data.n_videos, "Generated test videos")->capture_default_str();
  ab->add_option("--len", ab_len, "Frames per generated video")->capture_default_str();
  ab->add_option("--height", ab_h, "Frame height")->capture_default_str();
  ab->add_option("--width", ab_w, "Frame width")->capture_default_str();
  ab->add_option("--difficulty", ab_difficulty, "Occlusion difficulty")->capture_default_str();
  ab->add_option("--train-data", ab_train_dir, "Fixed training dataset root");
  ab->add_option("--test-data", ab_test_dir, "Fixed test dataset root");
  ab->add_option("--steps", ab_opts.train.steps, "Optimizer steps per model")->capture_default_str();
  ab->add_option("--batch", ab_opts.train.batch_size, "Snippets per step")->capture_default_str();
  ab->add_option("--lr-max", ab_opts.train.lr_max, "Initial learning rate")->capture_default_str();
  ab->add_option("--lr-min", ab_opts.train.lr_min, "Final learning rate")->capture_default_str();
  ab->add_option("--out", ab_out, "CSV output path");

  // bench
  auto* be = app.add_subcommand("bench", "Parameter count and per-frame forward time");
  ModelFlags bench_model;
  std::size_t bench_h = 64, bench_w = 64, bench_repeats = 50, bench_refs = 4;
  std::string bench_ckpt;
  add_common(be);
  be->add_option("--height", bench_h, "Input height")->capture_default_str();
  be->add_option("--width", bench_w, "Input width")->capture_default_str();
  be->add_option("--repeats", bench_repeats, "Timed forward passes")->capture_default_str();
  be->add_option("--n-refs", bench_refs, "Reference frames for the bank")->capture_default_str();
  be->add_option("--ckpt", bench_ckpt, "Benchmark a saved checkpoint instead of a fresh model");
  bench_model.add(be);

  // sample-frames
  auto* sf = app.add_subcommand("sample-frames", "Print uniformly sampled reference frame indices");
  std::size_t sf_len = 0, sf_n = 0;
  sf->add_option("--len", sf_len, "Video length L")->required();
  sf->add_option("--n", sf_n, "Reference count N")->required();

  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  auto* active = app.get_subcommands().front();
  err << "# " << active->get_name() << " resolved configuration\n" << active->config_to_str(true, false);

  try {
    if (active == gen) {
      gen_opts.seed = seed;
      gen_opts.jobs = jobs;
      const auto ds = gen_synthetic(gen_opts);
      save_dataset(ds, gen_out);
      err << "wrote " << ds.size() << " videos to " << gen_out << '\n';
    } else if (active == tr) {
      const auto ds = load_dataset(train_data);
      if (ds.empty()) throw ValidationError(train_data + ": dataset is empty");
      train_cfg.seed = seed;
      DpaModel model(train_model.config(ds.front().height(), ds.front().width(), seed));
      err << "model parameters: " << model.parameter_count() << '\n';
      const auto curve = train(model, ds, train_cfg, [&](const TrainRecord& r) {
        if (r.step % 50 == 0) err << "step " << r.step << " lr " << r.lr << " loss " << r.loss << '\n';
      });
      model.save(train_ckpt);
      std::ostringstream csv;
      write_loss_csv(csv, curve);
      emit(loss_csv, out, csv.str());
    } else if (active == inf) {
      const auto ds = load_dataset(infer_data);
      const auto bytes = read_file_bytes(infer_ckpt);
      const auto model = DpaModel::deserialize(bytes, infer_ckpt);
      const auto hash = fnv1a64(bytes);
      std::vector<MaskSequence> preds;
      for (const auto& v : ds) {
        VideoBanks banks;
        const fs::path cache_a = bank_cache.empty() ? fs::path() : fs::path(bank_cache) / bank_cache_name(v.id + ".a", infer_refs, hash);
        const fs::path cache_m = bank_cache.empty() ? fs::path() : fs::path(bank_cache) / bank_cache_name(v.id + ".m", infer_refs, hash);
        if (!bank_cache.empty() && model.uses_banks() && fs::exists(cache_a)) {
          sample_reference_indices(v.length(), infer_refs);
          banks.appearance = load_bank(cache_a);
          if (fs::exists(cache_m)) banks.motion = load_bank(cache_m);
        } else {
          banks = build_video_banks(model, v, infer_refs);
          if (!bank_cache.empty() && model.uses_banks()) {
            save_bank(cache_a, banks.appearance);
            if (banks.motion.keys.defined()) save_bank(cache_m, banks.motion);
          }
        }
        MaskSequence seq{v.id, std::vector<Mask>(v.length())};
        std::vector<std::thread> pool;
        const unsigned workers = std::min<unsigned>(jobs, static_cast<unsigned>(v.length()));
        for (unsigned j = 0; j < workers; ++j)
          pool.emplace_back([&, j] {
            for (std::size_t t = j; t < v.length(); t += workers) seq.masks[t] = predict_frame(model, v, t, banks);
          });
        for (auto& th : pool) th.join();
        preds.push_back(std::move(seq));
      }
      save_mask_sequences(preds, infer_out);
      err << "wrote predictions for " << preds.size() << " videos to " << infer_out << '\n';
    } else if (active == ev) {
      const auto report = evaluate(load_mask_sequences(eval_pred), load_mask_sequences(eval_gt));
      write_report_text(out, report);
      out << std::fixed << std::setprecision(3) << "J_M=" << report.j_mean << " F_M=" << report.f_mean
          << " G_M=" << report.g_mean << '\n';
      if (!eval_csv.empty()) {
        std::ostringstream csv;
        write_report_csv(csv, report);
        emit(eval_csv, out, csv.str());
      }
    } else if (active == ab) {
      ab_opts.seeds = parse_seeds(ab_seeds);
      for (auto* d : {&ab_opts.train_data, &ab_opts.test_data}) {
        d->length = ab_len;
        d->height = ab_h;
        d->width = ab_w;
        d->difficulty = ab_difficulty;
        d->jobs = jobs;
      }
      ab_opts.model.height = ab_h;
      ab_opts.model.width = ab_w;
      ab_opts.log = [&](const std::string& s) { err << s << '\n'; };
      std::optional<Dataset> fixed_train, fixed_test;
      if (!ab_train_dir.empty() || !ab_test_dir.empty()) {
        if (ab_train_dir.empty() || ab_test_dir.empty())
          throw ArgumentError("--train-data and --test-data must be given together");
        fixed_train = load_dataset(ab_train_dir);
        fixed_test = load_dataset(ab_test_dir);
        if (fixed_train->empty() || fixed_test->empty()) throw ValidationError("ablation datasets must be nonempty");
        ab_opts.model.height = fixed_train->front().height();
        ab_opts.model.width = fixed_train->front().width();
      }
      const auto rows = ablate(parse_grid(ab_grid), ab_opts, fixed_train, fixed_test);
      write_ablation_text(out, rows);
      std::ostringstream csv;
      write_ablation_csv(csv, rows);
      emit(ab_out, out, csv.str());
    } else if (active == be) {
      const auto model = bench_ckpt.empty() ? DpaModel(bench_model.config(bench_h, bench_w, seed))
                                            : DpaModel::load(bench_ckpt);
      const auto r = bench(model, bench_repeats, bench_refs, seed);
      out << "params,frame_seconds,frame_cv,with_bank_seconds,with_bank_cv\n"
          << r.parameter_count << ',' << std::setprecision(6) << r.frame_seconds << ',' << r.frame_cv << ','
          << r.with_bank_seconds << ',' << r.with_bank_cv << '\n';
    } else if (active == sf) {
      const auto idx = sample_reference_indices(sf_len, sf_n);
      for (std::size_t i = 0; i < idx.size(); ++i) out << (i ? " " : "") << idx[i];
      out << '\n';
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace dpa
