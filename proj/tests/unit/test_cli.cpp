#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "r2i/cli/config.hpp"
#include "r2i/cli/pipeline.hpp"
#include "r2i/util/log.hpp"

using namespace r2i;
using namespace r2i::cli;
namespace fs = std::filesystem;

namespace {

RunConfig parse(std::vector<std::string> args) {
  args.insert(args.begin(), "r2i");
  return parse_config_or_throw(args);
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("every subcommand parses with defaults") {
  CHECK(subcommands().size() == 12);
  auto c = parse({"train-gan", "--data", "d.pack", "--embeddings", "e.bin", "--out-dir", "o"});
  CHECK(c.command == "train-gan");
  CHECK(c.train_gan.base_scale == 64);
  CHECK(c.train_gan.lambda_kl == 2.0);
  CHECK(c.train_gan.batch == 24);
  CHECK(c.train_gan.lr == 2e-4);
}

TEST_CASE("snapshot round trips through --config") {
  auto dir = test::scratch_dir("cli_snapshot");
  auto c = parse({"--log-level", "warn", "train-gan", "--data", "d.pack", "--embeddings", "e.bin", "--base-scale",
                  "16", "--batch", "8", "--lambda-kl", "0.5", "--minimax", "--seed", "42", "--out-dir", "o"});
  const auto path = dir / "snap.toml";
  write(path, config_snapshot(c));
  auto back = parse({"--config", path.string(), "train-gan"});
  CHECK(back == c);

  SUBCASE("command line beats the file") {
    auto o = parse({"--config", path.string(), "train-gan", "--batch", "4"});
    CHECK(o.train_gan.batch == 4);
    CHECK(o.train_gan.lambda_kl == 0.5);
  }
}

TEST_CASE("file values beat defaults") {
  auto dir = test::scratch_dir("cli_file");
  const auto path = dir / "c.toml";
  write(path, "[evaluate-msssim]\nn-sample = 50\nseed = 3\n");
  auto c = parse({"--config", path.string(), "evaluate-msssim", "--images", "x"});
  CHECK(c.evaluate_msssim.n_sample == 50);
  CHECK(c.evaluate_msssim.seed == 3);
}

TEST_CASE("invalid and contradictory flags are rejected") {
  CHECK_THROWS_WITH(parse({"train-gan", "--base-scale", "12", "--data", "d", "--embeddings", "e", "--out-dir", "o"}),
                    doctest::Contains("base-scale"));
  CHECK_THROWS_WITH(parse({"prep", "--recipes", "r", "--images", "i", "--out", "o", "--base-scale", "0"}),
                    doctest::Contains("base-scale"));
  CHECK_THROWS_WITH(parse({"train-embedding", "--data", "d", "--variant", "reg", "--classes", "1", "--out-dir", "o"}),
                    doctest::Contains("classes"));
  CHECK_THROWS_WITH(parse({"generate", "--ckpt", "c", "--embeddings", "e", "--out-dir", "o", "--bogus", "1"}), doctest::Contains("valid flags"));
  CHECK_THROWS(parse({}));
  CHECK_THROWS(parse({"no-such-command"}));
}

TEST_CASE("help exits early") {
  const char* argv[] = {"r2i", "train-gan", "--help"};
  auto out = parse_config(3, argv);
  CHECK(out.exit_now);
  CHECK(out.message.find("--lambda-kl") != std::string::npos);
}

TEST_CASE("unavailable device is an error") {
  setenv("R2I_DEVICE", "cuda", 1);
  CHECK_THROWS_WITH(parse({"make-toy", "--out", "x"}), doctest::Contains("R2I_DEVICE"));
  setenv("R2I_DEVICE", "cpu", 1);
  CHECK_NOTHROW(parse({"make-toy", "--out", "x"}));
  unsetenv("R2I_DEVICE");
}

TEST_CASE("missing inputs fail with the path") {
  std::ostringstream captured;
  log::set_stream(&captured);
  auto c = parse({"prep", "--recipes", "/nonexistent/r.jsonl", "--images", "/nonexistent", "--out", "/tmp/x.pack"});
  CHECK(run_pipeline(c) != 0);
  log::set_stream(&std::cerr);
  CHECK(captured.str().find("/nonexistent/r.jsonl") != std::string::npos);
  CHECK(captured.str().find("stage=prep") != std::string::npos);
}

TEST_CASE("stages write a snapshot next to their outputs") {
  auto dir = test::scratch_dir("cli_stage");
  log::set_stream(nullptr);
  const auto toy = (dir / "toy").string();
  CHECK(run_pipeline(parse({"make-toy", "--out", toy, "--n", "4"})) == 0);
  const auto pack = (dir / "data" / "toy.pack").string();
  CHECK(run_pipeline(parse({"prep", "--recipes", toy + "/recipes.jsonl", "--images", toy + "/images", "--out", pack,
                            "--base-scale", "8"})) == 0);
  log::set_stream(&std::cerr);
  CHECK(fs::exists(fs::path(toy) / "config_snapshot.toml"));
  CHECK(fs::exists(pack + ".config.toml"));
  auto snap = parse({"--config", pack + ".config.toml", "prep"});
  CHECK(snap.prep.base_scale == 8);
  CHECK(snap.prep.out == pack);
}
