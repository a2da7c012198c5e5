// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "dpa/data.hpp"
#include "dpa/network.hpp"

namespace dpa {

struct TrainConfig {
  std::size_t snippet_len = 4;
  std::size_t batch_size = 1;
  long steps = 500;
  double lr_max = 1e-4;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  /// Reference frames used at inference time.
  std::size_t n_refs = 4;
};

struct TrainRecord {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Mean cross-entropy over the frames of one snippet; the IFA banks are built
/// from the snippet itself so gradients flow through them.
Tensor snippet_loss(const DpaModel& model, const Snippet& snippet);

/// Adam with cosine-annealed rate over `steps` steps of random snippets.
std::vector<TrainRecord> train(DpaModel& model, const Dataset& dataset, const TrainConfig& config,
                               const std::function<void(const TrainRecord&)>& on_step = {});

void write_loss_csv(std::ostream& os, const std::vector<TrainRecord>& records);

/// Argmax over the two logit channels (ties → background).
Mask logits_to_mask(const Tensor& logits);

/// Banks over uniformly sampled reference frames of the whole video.
VideoBanks build_video_banks(const DpaModel& model, const VideoSample& video, std::size_t n_refs);
Mask predict_frame(const DpaModel& model, const VideoSample& video, std::size_t t, const VideoBanks& banks);

/// Builds the banks once, then predicts every frame (in parallel when jobs > 1).
std::vector<Mask> infer_video(const DpaModel& model, const VideoSample& video, std::size_t n_refs, unsigned jobs = 1);

struct BenchResult {
  std::size_t parameter_count = 0;
  double frame_seconds = 0.0, frame_cv = 0.0;      // forward_frame with a prebuilt bank
  double with_bank_seconds = 0.0, with_bank_cv = 0.0;  // bank build + forward_frame
};

BenchResult bench(const DpaModel& model, std::size_t repeats, std::size_t n_refs = 4, std::uint64_t seed = 0);

}  // namespace dpa
