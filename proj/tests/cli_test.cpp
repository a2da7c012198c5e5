// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dpa/checkpoint.hpp"
#include "dpa/cli.hpp"

namespace dpa {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dpa_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  return files;
}

Run gen(const fs::path& out, const std::string& seed = "5") {
  return run({"gen-data", "--out", out.string(), "--seed", seed, "--videos", "2", "--len", "4", "--height", "32",
              "--width", "32", "--difficulty", "0.5"});
}

TEST(Cli, SampleFrames) {
  const auto r = run({"sample-frames", "--len", "10", "--n", "4"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "0 3 6 9\n");
  EXPECT_EQ(run({"sample-frames", "--len", "5", "--n", "1"}).out, "0\n");
  EXPECT_EQ(run({"sample-frames", "--len", "3", "--n", "4"}).code, kExitValidation);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"sample-frames", "--len", "10", "--n", "4", "--bogus"}).code, kExitValidation);
  EXPECT_EQ(run({}).code, kExitValidation);
  EXPECT_EQ(run({"no-such-command"}).code, kExitValidation);
  EXPECT_EQ(run({"train", "--data", "x"}).code, kExitValidation);
  EXPECT_EQ(run({"train", "--data", "x", "--ckpt", "y", "--embed", "diagonal"}).code, kExitValidation);
  EXPECT_EQ(run({"gen-data", "--out", scratch("bad").string(), "--height", "30"}).code, kExitValidation);
  const auto r = run({"sample-frames", "--len", "ten", "--n", "4"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("gen-data"), std::string::npos);
  EXPECT_NE(r.out.find("sample-frames"), std::string::npos);
}

TEST(Cli, IoErrorsExitTwo) {
  const auto missing = scratch("missing");
  EXPECT_EQ(run({"eval", "--pred", missing.string(), "--gt", missing.string()}).code, kExitIo);
  EXPECT_EQ(run({"train", "--data", missing.string(), "--ckpt", (missing / "c.bin").string()}).code, kExitIo);
  EXPECT_EQ(run({"sample-frames", "--config", (missing / "cfg.txt").string()}).code, kExitIo);
}

TEST(Cli, GenDataIsByteIdenticalAcrossRuns) {
  const auto a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
  ASSERT_EQ(gen(a).code, kExitOk);
  ASSERT_EQ(gen(b).code, kExitOk);
  ASSERT_EQ(gen(c, "6").code, kExitOk);
  EXPECT_EQ(snapshot(a), snapshot(b));
  EXPECT_NE(snapshot(a), snapshot(c));
}

TEST(Cli, EvalOfGroundTruthAgainstItselfIsPerfect) {
  const auto d = scratch("eval");
  ASSERT_EQ(gen(d).code, kExitOk);
  const auto csv = d / "report.csv";
  const auto r = run({"eval", "--pred", d.string(), "--gt", d.string(), "--out", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("J_M=1.000 F_M=1.000 G_M=1.000"), std::string::npos) << r.out;
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "sequence,J,F,G");
}

TEST(Cli, ConfigFileFeedsFlagsAndExplicitFlagsWin) {
  const auto d = scratch("cfg");
  fs::create_directories(d);
  const auto cfg = d / "sf.cfg";
  std::ofstream(cfg) << "# reference sampling\nlen = 10\nn = 4\n";
  EXPECT_EQ(run({"sample-frames", "--config", cfg.string()}).out, "0 3 6 9\n");
  EXPECT_EQ(run({"sample-frames", "--config", cfg.string(), "--n", "2"}).out, "0 9\n");
  std::ofstream(d / "broken.cfg") << "len 10\n";
  EXPECT_EQ(run({"sample-frames", "--config", (d / "broken.cfg").string()}).code, kExitValidation);
}

TEST(Cli, TrainIsDeterministicAndInferIsStableAcrossModes) {
  const auto d = scratch("train");
  ASSERT_EQ(gen(d / "data").code, kExitOk);
  auto train = [&](const std::string& name) {
    return run({"train", "--data", (d / "data").string(), "--ckpt", (d / name).string(), "--steps", "2", "--batch",
                "1", "--seed", "4", "--loss-csv", (d / (name + ".csv")).string()});
  };
  const auto r1 = train("a.ckpt");
  ASSERT_EQ(r1.code, kExitOk) << r1.err;
  ASSERT_EQ(train("b.ckpt").code, kExitOk);
  EXPECT_EQ(read_file_bytes(d / "a.ckpt"), read_file_bytes(d / "b.ckpt"));
  EXPECT_EQ(read_file_bytes(d / "a.ckpt.csv"), read_file_bytes(d / "b.ckpt.csv"));
  EXPECT_NE(r1.err.find("resolved configuration"), std::string::npos);

  auto infer = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args{"infer", "--data", (d / "data").string(), "--ckpt", (d / "a.ckpt").string(),
                                  "--out", (d / out).string(), "--n-refs", "2"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  ASSERT_EQ(infer("plain", {}).code, kExitOk);
  ASSERT_EQ(infer("threads", {"--jobs", "2"}).code, kExitOk);
  ASSERT_EQ(infer("cold", {"--bank-cache", (d / "banks").string()}).code, kExitOk);
  EXPECT_FALSE(fs::is_empty(d / "banks"));
  ASSERT_EQ(infer("warm", {"--bank-cache", (d / "banks").string()}).code, kExitOk);
  const auto plain = snapshot(d / "plain");
  EXPECT_EQ(plain, snapshot(d / "threads"));
  EXPECT_EQ(plain, snapshot(d / "cold"));
  EXPECT_EQ(plain, snapshot(d / "warm"));

  const auto e = run({"eval", "--pred", (d / "plain").string(), "--gt", (d / "data").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("G_M="), std::string::npos);
  EXPECT_EQ(infer("bad", {"--n-refs", "9"}).code, kExitValidation);
}

TEST(Cli, BenchReportsParameterCount) {
  const auto r = run({"bench", "--height", "32", "--width", "32", "--repeats", "2", "--n-refs", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("params,frame_seconds,frame_cv,with_bank_seconds,with_bank_cv\n", 0), 0u);
  const auto off = run({"bench", "--height", "32", "--width", "32", "--repeats", "2", "--ima", "false", "--ifa",
                        "false"});
  ASSERT_EQ(off.code, kExitOk) << off.err;
  auto params = [](const std::string& s) { return std::stoull(s.substr(s.find('\n') + 1)); };
  EXPECT_GT(params(r.out), params(off.out));
}

}  // namespace
}  // namespace dpa
