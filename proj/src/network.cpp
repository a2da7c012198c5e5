// SPDX-License-Identifier: Apache-2.0
#include "dpa/network.hpp"

#include "dpa/checkpoint.hpp"
#include "dpa/data.hpp"
#include "dpa/ops.hpp"

namespace dpa {

namespace {

ConvLayer make_conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, Rng& rng,
                    std::size_t dilation = 1, double gain = kReluGain) {
  return {make_weight(name + ".weight", {cout, cin, k, k}, cin * k * k, rng, gain), make_bias(name + ".bias", cout),
          dilation};
}

// Small head weights keep the initial logits near uniform.
constexpr double kHeadGain = 1e-2;

constexpr const char* kConfigRecord = "meta.config";
constexpr double kConfigVersion = 1.0;

std::vector<double> encode_config(const ModelConfig& c) {
  std::vector<double> v{kConfigVersion,
                        static_cast<double>(c.height),
                        static_cast<double>(c.width),
                        static_cast<double>(c.ima),
                        static_cast<double>(c.ifa),
                        static_cast<double>(c.ima_prototypes),
                        static_cast<double>(c.ifa_prototypes),
                        static_cast<double>(c.ifa_appearance_only),
                        static_cast<double>(c.ima_embed),
                        static_cast<double>(c.region_axis)};
  for (auto w : c.encoder_widths) v.push_back(static_cast<double>(w));
  v.push_back(static_cast<double>(c.aspp_branch));
  v.push_back(static_cast<double>(c.aspp_out));
  for (auto w : c.decoder_widths) v.push_back(static_cast<double>(w));
  v.push_back(static_cast<double>(c.seed & 0xffffffffULL));
  v.push_back(static_cast<double>(c.seed >> 32));
  return v;
}

ModelConfig decode_config(std::span<const double> v, const std::string& origin) {
  if (v.size() != 23 || v[0] != kConfigVersion) throw ValidationError(origin + ": unsupported model config record");
  auto sz = [&](std::size_t i) { return static_cast<std::size_t>(v[i]); };
  ModelConfig c;
  c.height = sz(1);
  c.width = sz(2);
  c.ima = v[3] != 0.0;
  c.ifa = v[4] != 0.0;
  c.ima_prototypes = v[5] != 0.0;
  c.ifa_prototypes = v[6] != 0.0;
  c.ifa_appearance_only = v[7] != 0.0;
  c.ima_embed = static_cast<EmbedMode>(sz(8));
  c.region_axis = static_cast<RegionAxis>(sz(9));
  for (std::size_t i = 0; i < 5; ++i) c.encoder_widths[i] = sz(10 + i);
  c.aspp_branch = sz(15);
  c.aspp_out = sz(16);
  for (std::size_t i = 0; i < 4; ++i) c.decoder_widths[i] = sz(17 + i);
  c.seed = static_cast<std::uint64_t>(v[21]) | (static_cast<std::uint64_t>(v[22]) << 32);
  return c;
}

}  // namespace

Tensor ConvLayer::operator()(const Tensor& x) const { return conv2d(x, weight.tensor, bias.tensor, dilation); }

DpaModel::DpaModel(ModelConfig config) : config_(config) {
  const auto h = config_.height, w = config_.width;
  if (h == 0 || w == 0 || h % 16 || w % 16)
    throw ArgumentError("model resolution must be a positive multiple of 16, got " + std::to_string(h) + "x" +
                        std::to_string(w));
  Rng rng(config_.seed);
  const auto& ew = config_.encoder_widths;
  for (auto* stream : {&enc_a_, &enc_m_}) {
    const std::string prefix = stream == &enc_a_ ? "enc_a" : "enc_m";
    std::size_t cin = 3;
    for (std::size_t b = 0; b < 5; ++b) {
      const auto base = prefix + ".b" + std::to_string(b + 1);
      stream->blocks[b][0] = make_conv(base + ".conv1", cin, ew[b], 3, rng);
      stream->blocks[b][1] = make_conv(base + ".conv2", ew[b], ew[b], 3, rng);
      cin = ew[b];
    }
  }
  // Attention blocks draw from their own streams so shared layers match across variants.
  if (config_.ima) {
    Rng ima_rng(mix_seed(config_.seed, 0x494d41));
    ImaOptions o{config_.ima_prototypes, config_.ima_embed, config_.region_axis};
    ima4_.emplace("ima4", ew[3], h / 8, w / 8, o, ima_rng);
    ima5_.emplace("ima5", ew[4], h / 16, w / 16, o, ima_rng);
  }
  if (config_.ifa) {
    Rng ifa_rng(mix_seed(config_.seed, 0x494641));
    IfaOptions o{config_.ifa_prototypes, config_.region_axis};
    ifa_a_.emplace("ifa5_a", ew[4], h / 16, w / 16, o, ifa_rng);
    if (!config_.ifa_appearance_only) ifa_m_.emplace("ifa5_m", ew[4], h / 16, w / 16, o, ifa_rng);
  }
  if (config_.ima && config_.ifa) {
    Rng merge_rng(mix_seed(config_.seed, 0x4d5247));
    auto merge_conv = [&](const std::string& name) {
      return ConvLayer{make_fusion_weight(name + ".weight", ew[4], 2 * ew[4], 0, 1, 0.5, merge_rng),
                       make_bias(name + ".bias", ew[4]), 1};
    };
    fuse_a_ = merge_conv("fuse5_a");
    if (!config_.ifa_appearance_only) fuse_m_ = merge_conv("fuse5_m");
  }
  const std::array<std::size_t, 3> dilations{1, 2, 4};
  for (std::size_t i = 0; i < 3; ++i)
    aspp_branches_[i] = make_conv("aspp.d" + std::to_string(dilations[i]), ew[4], config_.aspp_branch, 3, rng,
                                  dilations[i]);
  aspp_branches_[3] = make_conv("aspp.global", ew[4], config_.aspp_branch, 1, rng);
  aspp_project_ = make_conv("aspp.project", 4 * config_.aspp_branch, config_.aspp_out, 1, rng);
  std::size_t cin = config_.aspp_out;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto skip = ew[3 - i];
    decoder_[i] = make_conv("dec.up" + std::to_string(4 - i), cin + skip, config_.decoder_widths[i], 3, rng);
    cin = config_.decoder_widths[i];
  }
  head_ = make_conv("head", cin, 2, 1, rng, 1, kHeadGain);
}

Tensor DpaModel::run_block(const Stream& s, std::size_t b, const Tensor& x) const {
  return relu(s.blocks[b][1](relu(s.blocks[b][0](x))));
}

FrameFeatures DpaModel::encode(const Tensor& rgb, const Tensor& flow) const {
  const Shape expected{3, config_.height, config_.width};
  if (rgb.shape() != expected || flow.shape() != expected)
    throw DimensionError("encode: model expects " + shape_string(expected) + " inputs, got " +
                         shape_string(rgb.shape()) + " and " + shape_string(flow.shape()));
  FrameFeatures f;
  Tensor a = rgb, m = flow;
  for (std::size_t b = 0; b < 4; ++b) {
    a = run_block(enc_a_, b, b == 0 ? a : avgpool2x(a));
    m = run_block(enc_m_, b, b == 0 ? m : avgpool2x(m));
    if (b == 3 && ima4_) {
      auto r = ima4_->forward(a, m);
      a = r.appearance;
      m = r.motion;
    }
    f.skips[b] = a;
  }
  f.appearance5 = run_block(enc_a_, 4, avgpool2x(a));
  f.motion5 = run_block(enc_m_, 4, avgpool2x(m));
  return f;
}

VideoBanks DpaModel::build_banks(const std::vector<FrameFeatures>& refs, std::vector<std::size_t> frame_indices) const {
  VideoBanks banks;
  if (!config_.ifa) return banks;
  std::vector<Tensor> a, m;
  for (const auto& r : refs) {
    a.push_back(r.appearance5);
    m.push_back(r.motion5);
  }
  banks.appearance = ifa_a_->build_memory(a, frame_indices);
  if (ifa_m_) banks.motion = ifa_m_->build_memory(m, std::move(frame_indices));
  return banks;
}

Tensor DpaModel::aspp(const Tensor& x) const {
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < 3; ++i) parts.push_back(relu(aspp_branches_[i](x)));
  parts.push_back(broadcast_spatial(relu(aspp_branches_[3](global_avg_pool(x))), x.dim(1), x.dim(2)));
  return relu(aspp_project_(concat(parts, 0)));
}

Tensor DpaModel::decode(const FrameFeatures& f, const VideoBanks& banks) const {
  Tensor a = f.appearance5, m = f.motion5;
  Tensor a_ima, m_ima, a_ifa, m_ifa;
  if (ima5_) {
    auto r = ima5_->forward(a, m);
    a_ima = r.appearance;
    m_ima = r.motion;
  }
  if (ifa_a_) a_ifa = ifa_a_->forward(a, banks.appearance);
  if (ifa_m_) m_ifa = ifa_m_->forward(m, banks.motion);

  // Parallel IMA/IFA outputs merge through a 1×1 conv per stream.
  auto merge = [](const Tensor& raw, const Tensor& ima, const Tensor& ifa, const std::optional<ConvLayer>& fuse) {
    if (ima.defined() && ifa.defined()) return (*fuse)(concat(ima, ifa, 0));
    if (ima.defined()) return ima;
    if (ifa.defined()) return ifa;
    return raw;
  };
  const auto za = merge(a, a_ima, a_ifa, fuse_a_);
  const auto zm = merge(m, m_ima, m_ifa, fuse_m_);

  Tensor d = aspp(add(za, zm));
  for (std::size_t i = 0; i < 4; ++i) d = relu(decoder_[i](concat(upsample2x(d), f.skips[3 - i], 0)));
  return head_(d);
}

Tensor DpaModel::forward_frame(const Tensor& rgb, const Tensor& flow, const VideoBanks& banks) const {
  return decode(encode(rgb, flow), banks);
}

ParameterList DpaModel::parameters() const {
  ParameterList out;
  auto add_conv = [&](const ConvLayer& c) {
    out.push_back(c.weight);
    out.push_back(c.bias);
  };
  auto add_all = [&](const ParameterList& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (const auto* s : {&enc_a_, &enc_m_})
    for (const auto& block : s->blocks)
      for (const auto& c : block) add_conv(c);
  if (ima4_) add_all(ima4_->parameters());
  if (ima5_) add_all(ima5_->parameters());
  if (ifa_a_) add_all(ifa_a_->parameters());
  if (ifa_m_) add_all(ifa_m_->parameters());
  if (fuse_a_) add_conv(*fuse_a_);
  if (fuse_m_) add_conv(*fuse_m_);
  for (const auto& c : aspp_branches_) add_conv(c);
  add_conv(aspp_project_);
  for (const auto& c : decoder_) add_conv(c);
  add_conv(head_);
  return out;
}

std::size_t DpaModel::parameter_count() const { return dpa::parameter_count(parameters()); }

std::vector<std::uint8_t> DpaModel::serialize() const {
  std::vector<NamedTensor> records;
  const auto cfg = encode_config(config_);
  records.push_back({kConfigRecord, Tensor({cfg.size()}, cfg)});
  for (const auto& p : parameters()) records.push_back({p.name, p.tensor});
  return encode_records(records);
}

void DpaModel::save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

DpaModel DpaModel::deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto records = decode_records(bytes, origin);
  if (records.empty() || records.front().name != kConfigRecord)
    throw ValidationError(origin + ": checkpoint has no model config record");
  DpaModel model(decode_config(records.front().tensor.data(), origin));
  const auto params = model.parameters();
  if (records.size() != params.size() + 1)
    throw ValidationError(origin + ": checkpoint holds " + std::to_string(records.size() - 1) +
                          " parameters, model has " + std::to_string(params.size()));
  assign_parameters(params, records);
  return model;
}

DpaModel DpaModel::load(const std::filesystem::path& path) { return deserialize(read_file_bytes(path), path.string()); }

}  // namespace dpa
