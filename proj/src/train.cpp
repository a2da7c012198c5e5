// SPDX-License-Identifier: Apache-2.0
#include "dpa/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <thread>

#include "dpa/ops.hpp"
#include "dpa/optim.hpp"

namespace dpa {

Tensor snippet_loss(const DpaModel& model, const Snippet& snippet) {
  std::vector<FrameFeatures> feats;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < snippet.frames.size(); ++i) {
    feats.push_back(model.encode(snippet.frames[i], snippet.flows[i]));
    idx.push_back(snippet.start + i);
  }
  const auto banks = model.build_banks(feats, idx);
  Tensor total;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    auto l = cross_entropy(model.decode(feats[i], banks), snippet.masks[i].pixels);
    total = total.defined() ? add(total, l) : l;
  }
  return scale(total, 1.0 / static_cast<double>(feats.size()));
}

std::vector<TrainRecord> train(DpaModel& model, const Dataset& dataset, const TrainConfig& config,
                               const std::function<void(const TrainRecord&)>& on_step) {
  if (dataset.empty()) throw ArgumentError("train: empty dataset");
  if (config.batch_size == 0 || config.steps <= 0) throw ArgumentError("train: batch size and steps must be positive");
  Rng rng(mix_seed(config.seed, 0x7472));
  Adam adam(model.parameters());
  std::vector<TrainRecord> records;
  for (long step = 0; step < config.steps; ++step) {
    const double lr = cosine_lr(step, config.steps, config.lr_max, config.lr_min);
    double loss_value = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto snippet = sample_snippet(dataset, rng, config.snippet_len);
      const auto loss = scale(snippet_loss(model, snippet), 1.0 / static_cast<double>(config.batch_size));
      loss_value += loss.item();
      backward(loss);
    }
    adam.step(lr);
    adam.zero_grad();
    records.push_back({step, lr, loss_value});
    if (on_step) on_step(records.back());
  }
  return records;
}

void write_loss_csv(std::ostream& os, const std::vector<TrainRecord>& records) {
  os << "step,lr,loss\n";
  for (const auto& r : records)
    os << r.step << ',' << std::setprecision(10) << r.lr << ',' << std::setprecision(10) << r.loss << '\n';
}

Mask logits_to_mask(const Tensor& logits) {
  const auto h = logits.dim(1), w = logits.dim(2), hw = h * w;
  const auto l = logits.data();
  Mask m(h, w);
  for (std::size_t p = 0; p < hw; ++p) m.pixels[p] = l[hw + p] > l[p] ? 1 : 0;
  return m;
}

VideoBanks build_video_banks(const DpaModel& model, const VideoSample& video, std::size_t n_refs) {
  const auto idx = sample_reference_indices(video.length(), n_refs);
  if (!model.uses_banks()) return {};
  NoGradGuard guard;
  std::vector<FrameFeatures> refs;
  for (auto i : idx) refs.push_back(model.encode(video.frames[i], video.flows[i]));
  return model.build_banks(refs, idx);
}

Mask predict_frame(const DpaModel& model, const VideoSample& video, std::size_t t, const VideoBanks& banks) {
  NoGradGuard guard;
  return logits_to_mask(model.forward_frame(video.frames.at(t), video.flows.at(t), banks));
}

std::vector<Mask> infer_video(const DpaModel& model, const VideoSample& video, std::size_t n_refs, unsigned jobs) {
  const auto banks = build_video_banks(model, video, n_refs);
  std::vector<Mask> masks(video.length());
  auto work = [&](unsigned worker, unsigned workers) {
    for (std::size_t t = worker; t < video.length(); t += workers) masks[t] = predict_frame(model, video, t, banks);
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    for (auto& th : pool) th.join();
  }
  return masks;
}

namespace {

std::pair<double, double> mean_cv(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= static_cast<double>(xs.size());
  return {m, m > 0.0 ? std::sqrt(var) / m : 0.0};
}

}  // namespace

BenchResult bench(const DpaModel& model, std::size_t repeats, std::size_t n_refs, std::uint64_t seed) {
  if (repeats == 0) throw ArgumentError("bench: repeats must be positive");
  NoGradGuard guard;
  const auto& c = model.config();
  SyntheticOptions so;
  so.seed = seed;
  so.n_videos = 1;
  so.length = std::max<std::size_t>(4, n_refs);
  so.height = c.height;
  so.width = c.width;
  const auto video = gen_synthetic(so).front();
  BenchResult r;
  r.parameter_count = model.parameter_count();
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  const auto banks = build_video_banks(model, video, n_refs);
  (void)model.forward_frame(video.frames[0], video.flows[0], banks);  // warm-up
  std::vector<double> plain, with_bank;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t = i % video.length();
    const auto t0 = clock::now();
    (void)model.forward_frame(video.frames[t], video.flows[t], banks);
    plain.push_back(seconds(t0, clock::now()));
    const auto t1 = clock::now();
    const auto fresh = build_video_banks(model, video, n_refs);
    (void)model.forward_frame(video.frames[t], video.flows[t], fresh);
    with_bank.push_back(seconds(t1, clock::now()));
  }
  std::tie(r.frame_seconds, r.frame_cv) = mean_cv(plain);
  std::tie(r.with_bank_seconds, r.with_bank_cv) = mean_cv(with_bank);
  return r;
}

}  // namespace dpa
