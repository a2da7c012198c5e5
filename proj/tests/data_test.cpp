// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "dpa/checkpoint.hpp"
#include "dpa/data.hpp"
#include "dpa/netpbm.hpp"

namespace dpa {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dpa_data_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  return files;
}

SyntheticOptions small(std::uint64_t seed, double difficulty = 0.5) {
  SyntheticOptions o;
  o.seed = seed;
  o.n_videos = 4;
  o.length = 8;
  o.height = o.width = 32;
  o.difficulty = difficulty;
  return o;
}

VideoSpec still_shape_spec() {
  VideoSpec spec;
  spec.length = 6;
  spec.height = spec.width = 32;
  spec.background.velocity = {1.25, -0.75};
  spec.background.base = {0.5, 0.4, 0.3};
  spec.salient.kind = ShapeKind::Ellipse;
  spec.salient.center = {16.0, 16.0};
  spec.salient.radius = {7.3, 5.1};
  spec.salient.color = {0.9, 0.1, 0.2};
  return spec;
}

TEST(Synthetic, SeedFixedGenerationIsBitIdentical) {
  const auto a = gen_synthetic(small(3)), b = gen_synthetic(small(3));
  auto parallel_opts = small(3);
  parallel_opts.jobs = 3;
  const auto c = gen_synthetic(parallel_opts);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t v = 0; v < a.size(); ++v) {
    EXPECT_EQ(a[v].id, b[v].id);
    for (std::size_t t = 0; t < a[v].length(); ++t) {
      EXPECT_TRUE(std::ranges::equal(a[v].frames[t].data(), b[v].frames[t].data()));
      EXPECT_TRUE(std::ranges::equal(a[v].flows[t].data(), c[v].flows[t].data()));
      EXPECT_EQ(a[v].masks[t], c[v].masks[t]);
    }
  }
  const auto other = gen_synthetic(small(4));
  EXPECT_FALSE(std::ranges::equal(a[0].frames[0].data(), other[0].frames[0].data()));
}

TEST(Synthetic, ValuesInRangeAndMasksBinary) {
  for (const auto& v : gen_synthetic(small(5, 1.0))) {
    EXPECT_EQ(v.length(), 8u);
    for (std::size_t t = 0; t < v.length(); ++t) {
      for (const auto& im : {v.frames[t], v.flows[t]}) {
        EXPECT_EQ(im.shape(), (Shape{3, 32, 32}));
        for (double x : im.data()) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
      }
      for (auto p : v.masks[t].pixels) ASSERT_LE(p, 1);
    }
  }
}

TEST(Synthetic, RejectsInvalidDimensions) {
  auto o = small(1);
  o.length = 3;
  EXPECT_THROW(gen_synthetic(o), ArgumentError);
  o = small(1);
  o.height = 40;
  EXPECT_THROW(gen_synthetic(o), ArgumentError);
  o = small(1);
  o.difficulty = 1.5;
  EXPECT_THROW(gen_synthetic(o), ArgumentError);
}

TEST(Synthetic, StaticShapeHasZeroFlowInsideMovingBackgroundOutside) {
  const auto spec = still_shape_spec();
  const auto field = displacement_field(spec, 2);
  const auto d = field.data();
  const auto video = render_video(spec, "still");
  const auto& mask = video.masks[2];
  const std::size_t hw = 32 * 32;
  ASSERT_GT(mask.area(), 50u);
  for (std::size_t p = 0; p < hw; ++p) {
    const double mag = std::hypot(d[p], d[hw + p]);
    if (mask.pixels[p])
      EXPECT_NEAR(mag, 0.0, 1e-12);
    else
      EXPECT_GT(mag, 1.0);
  }
}

TEST(Synthetic, TranslationConservesArea) {
  for (auto kind : {ShapeKind::Ellipse, ShapeKind::Rectangle, ShapeKind::Polygon}) {
    auto spec = still_shape_spec();
    spec.height = spec.width = 64;
    spec.salient.kind = kind;
    spec.salient.center = {20.0, 24.0};
    spec.salient.velocity = {1.7, 1.1};
    spec.salient.angle = 0.4;
    spec.salient.radius = {14.0, 10.0};
    spec.salient.vertices = {{-13, -9}, {14, -8}, {11, 12}, {-3, 15}, {-14, 3}};
    const double analytic = spec.salient.area();
    const auto video = render_video(spec, "move");
    for (const auto& m : video.masks)
      EXPECT_NEAR(static_cast<double>(m.area()), analytic, 0.02 * analytic) << static_cast<int>(kind);
  }
}

bool on_edge(const Mask& m, std::size_t y, std::size_t x) {
  for (long dy = -1; dy <= 1; ++dy)
    for (long dx = -1; dx <= 1; ++dx) {
      const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
      if (yy < 0 || xx < 0 || yy >= static_cast<long>(m.height) || xx >= static_cast<long>(m.width)) continue;
      if (m.at(yy, xx) != m.at(y, x)) return true;
    }
  return false;
}

TEST(Synthetic, FlowWarpsMaskOntoNextFrame) {
  auto o = small(9, 0.0);
  o.n_videos = 6;
  o.height = o.width = 128;
  for (std::size_t i = 0; i < o.n_videos; ++i) {
    const auto spec = random_video_spec(o, i);
    const auto video = render_video(spec, "warp");
    for (std::size_t t = 0; t + 1 < video.length(); ++t) {
      const auto field = displacement_field(spec, t);
      const auto d = field.data();
      const auto& cur = video.masks[t];
      const auto& next = video.masks[t + 1];
      const std::size_t n = 128 * 128;
      // Bilinear forward splat, then a 0.5 threshold.
      std::vector<double> weight(n, 0.0);
      for (std::size_t y = 0; y < 128; ++y)
        for (std::size_t x = 0; x < 128; ++x) {
          if (!cur.at(y, x)) continue;
          const auto p = y * 128 + x;
          const double tx = static_cast<double>(x) + d[p], ty = static_cast<double>(y) + d[n + p];
          const double fx = std::floor(tx), fy = std::floor(ty);
          for (int oy = 0; oy < 2; ++oy)
            for (int ox = 0; ox < 2; ++ox) {
              const long qx = static_cast<long>(fx) + ox, qy = static_cast<long>(fy) + oy;
              if (qx < 0 || qx >= 128 || qy < 0 || qy >= 128) continue;
              weight[qy * 128 + qx] += (ox ? tx - fx : 1.0 - (tx - fx)) * (oy ? ty - fy : 1.0 - (ty - fy));
            }
        }
      Mask warped(128, 128);
      for (std::size_t p = 0; p < weight.size(); ++p) warped.pixels[p] = weight[p] >= 0.5 ? 1 : 0;
      std::size_t inter = 0, uni = 0;
      const auto& v = spec.salient.velocity;
      for (std::size_t p = 0; p < n; ++p) {
        // Content entering through the frame edge has no source pixel.
        const double sx = static_cast<double>(p % 128) - v[0], sy = static_cast<double>(p / 128) - v[1];
        if (sx < 1.0 || sx > 126.0 || sy < 1.0 || sy > 126.0) continue;
        // One pixel of rasterization slack along the true outline.
        if (on_edge(next, p / 128, p % 128)) continue;
        inter += warped.pixels[p] & next.pixels[p];
        uni += warped.pixels[p] | next.pixels[p];
      }
      ASSERT_GT(uni, 0u);
      EXPECT_GT(static_cast<double>(inter) / static_cast<double>(uni), 0.95) << "video " << i << " frame " << t;
    }
  }
}

TEST(Synthetic, OccluderHidesPartOfTheObjectForAQuarterOfFrames) {
  auto o = small(12, 1.0);
  o.length = 16;
  o.height = o.width = 64;
  for (std::size_t i = 0; i < o.n_videos; ++i) {
    const auto spec = random_video_spec(o, i);
    ASSERT_TRUE(spec.occluder.has_value());
    EXPECT_EQ(spec.occluder->frame_count, 4u);
  }
  EXPECT_FALSE(random_video_spec(small(12, 0.0), 0).occluder.has_value());
}

TEST(FlowColor, WheelEncodesDirectionAndMagnitude) {
  const auto zero = flow_to_color(Tensor::zeros({2, 1, 1}));
  for (double c : zero.data()) EXPECT_EQ(c, 1.0);
  // Saturated rightward flow is pure red.
  const auto right = flow_to_color(Tensor({2, 1, 1}, {kFlowMaxMagnitude, 0.0}));
  EXPECT_EQ(right[0], 1.0);
  EXPECT_EQ(right[1], 0.0);
  EXPECT_EQ(right[2], 0.0);
  const auto a = flow_to_color(Tensor({2, 1, 1}, {1.0, 0.0})), b = flow_to_color(Tensor({2, 1, 1}, {0.0, 1.0}));
  EXPECT_FALSE(std::ranges::equal(a.data(), b.data()));
}

TEST(DatasetIo, SaveLoadSaveIsByteIdentical) {
  const auto ds = gen_synthetic(small(7));
  const auto a = scratch("a"), b = scratch("b");
  save_dataset(ds, a);
  const auto back = load_dataset(a);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back[1].length(), 8u);
  EXPECT_EQ(back[1].height(), 32u);
  EXPECT_EQ(back[1].width(), 32u);
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_TRUE(std::ranges::equal(back[1].frames[t].data(), ds[1].frames[t].data()));
    EXPECT_EQ(back[1].masks[t], ds[1].masks[t]);
  }
  save_dataset(back, b);
  EXPECT_EQ(snapshot(a), snapshot(b));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DatasetIo, MissingAndCorruptFiles) {
  const auto root = scratch("missing");
  save_dataset(gen_synthetic(small(8)), root);
  fs::remove(root / "vid0002" / "flow_0005.ppm");
  try {
    load_dataset(root);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("flow_0005.ppm"), std::string::npos);
  }
  write_file_bytes(root / "vid0002" / "flow_0005.ppm", {'P', '6', '\n', '9'});
  EXPECT_THROW(load_dataset(root), IoError);
  EXPECT_THROW(load_dataset(root / "nowhere"), IoError);
  fs::remove_all(root);
}

TEST(DatasetIo, ManifestExtentMismatchIsValidationError) {
  const auto root = scratch("extent");
  save_dataset(gen_synthetic(small(8)), root);
  write_file_bytes(root / "manifest.txt", {'v', 'i', 'd', '0', '0', '0', '0', ' ', '8', ' ', '1', '6', ' ', '3', '2', '\n'});
  EXPECT_THROW(load_dataset(root), ValidationError);
  fs::remove_all(root);
}

TEST(Netpbm, RoundTripAndRejections) {
  Mask m(2, 3);
  m.at(1, 2) = 1;
  EXPECT_EQ(netpbm::decode_pgm(netpbm::encode_pgm(m), "mem"), m);
  auto bytes = netpbm::encode_pgm(m);
  bytes.back() = 7;
  EXPECT_THROW(netpbm::decode_pgm(bytes, "mem"), IoError);
  const auto img = Tensor({3, 1, 2}, {0, 1, 2 / 255.0, 1, 0, 128 / 255.0});
  EXPECT_TRUE(std::ranges::equal(netpbm::decode_ppm(netpbm::encode_ppm(img), "mem").data(), img.data()));
}

TEST(Snippets, ShortVideoAlwaysStartsAtZero) {
  auto o = small(2);
  o.length = 4;
  const auto ds = gen_synthetic(o);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_snippet(ds, rng);
    EXPECT_EQ(s.start, 0u);
    EXPECT_EQ(s.frames.size(), 4u);
  }
}

TEST(Snippets, FramesAreConsecutive) {
  const auto ds = gen_synthetic(small(2));
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto s = sample_snippet(ds, rng);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_TRUE(s.frames[k].same_storage(ds[s.video].frames[s.start + k]));
      EXPECT_EQ(s.masks[k], ds[s.video].masks[s.start + k]);
    }
  }
}

TEST(Snippets, StartsAndVideosAreUniform) {
  auto o = small(2);
  o.n_videos = 3;
  o.length = 16;
  const auto ds = gen_synthetic(o);
  Rng rng(3);
  constexpr int kDraws = 10000;
  std::vector<int> starts(13, 0), videos(3, 0);
  for (int i = 0; i < kDraws; ++i) {
    const auto s = sample_snippet(ds, rng);
    ++starts.at(s.start);
    ++videos.at(s.video);
  }
  auto chi2 = [](const std::vector<int>& counts) {
    const double expected = static_cast<double>(kDraws) / static_cast<double>(counts.size());
    double x = 0.0;
    for (int c : counts) x += (c - expected) * (c - expected) / expected;
    return x;
  };
  EXPECT_LT(chi2(starts), 26.217);  // 12 dof, p = 0.01
  EXPECT_LT(chi2(videos), 9.210);   // 2 dof, p = 0.01
}

}  // namespace
}  // namespace dpa
