#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace r2i::cli {

struct PrepOptions {
  std::string recipes;
  std::string images;
  std::string out;
  int base_scale = 64;
  int min_count = 1;
  int max_ingredients = 20;
  int max_sentences = 20;
  int max_words = 16;
  bool no_augment = false;
  std::uint64_t seed = 0;

  bool operator==(const PrepOptions&) const = default;
};

struct TrainEmbeddingOptions {
  std::string data;
  std::string variant = "noreg";
  int epochs = 10;
  int batch = 8;
  double lr = 1e-3;
  double lambda = 0.02;
  double margin = 0.1;
  int dim = 0;      // 0 = 1024 (NOREG) / 1048 (REG)
  int classes = 0;  // 0 = from the packed header
  int word_dim = 64;
  int hidden = 128;
  int image_width = 16;
  std::uint64_t seed = 0;
  std::string out_dir;

  bool operator==(const TrainEmbeddingOptions&) const = default;
};

struct ExportEmbeddingsOptions {
  std::string ckpt;
  std::string data;
  std::string out;

  bool operator==(const ExportEmbeddingsOptions&) const = default;
};

struct TrainGanOptions {
  std::string data;
  std::string embeddings;
  int base_scale = 64;
  int batch = 24;
  int epochs = 1;
  long long max_steps = 0;
  double lambda_kl = 2.0;
  int z_dim = 100;
  int ca_dim = 128;
  int gen_width = 32;
  int disc_width = 16;
  double lr = 2e-4;
  bool minimax = false;
  int checkpoint_every = 0;
  int log_every = 10;
  std::string resume;
  std::uint64_t seed = 0;
  std::string out_dir;

  bool operator==(const TrainGanOptions&) const = default;
};

struct GenerateOptions {
  std::string ckpt;
  std::string embeddings;
  std::string ids = "all";  // "all" or comma-separated recipe ids
  int n_per_recipe = 1;
  std::uint64_t seed = 0;
  std::string out_dir;

  bool operator==(const GenerateOptions&) const = default;
};

struct EvaluateIsOptions {
  std::string images;
  std::string classifier;
  int splits = 10;
  std::uint64_t seed = 0;
  std::string variant;
  std::string out;

  bool operator==(const EvaluateIsOptions&) const = default;
};

struct EvaluateMsSsimOptions {
  std::string images;
  int n_sample = 200;
  std::uint64_t seed = 0;
  std::string variant;
  std::string out;

  bool operator==(const EvaluateMsSsimOptions&) const = default;
};

struct RankingSheetOptions {
  std::string recipes;
  std::string real;
  std::string reg;
  std::string noreg;
  int n = 10;
  std::uint64_t seed = 0;
  std::string sheet_id = "sheet";
  std::string out;

  bool operator==(const RankingSheetOptions&) const = default;
};

struct RankingAggregateOptions {
  std::vector<std::string> responses;
  std::string key;
  std::string out;

  bool operator==(const RankingAggregateOptions&) const = default;
};

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string out;

  bool operator==(const ReportOptions&) const = default;
};

struct MakeToyOptions {
  std::string out;
  int n = 8;
  int width = 80;
  int height = 72;
  std::uint64_t seed = 0;

  bool operator==(const MakeToyOptions&) const = default;
};

struct TrainClassifierOptions {
  std::string data;
  std::string out;
  int epochs = 30;
  int batch = 8;
  int width = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  bool operator==(const TrainClassifierOptions&) const = default;
};

struct RunConfig {
  std::string command;
  std::string log_level = "info";
  PrepOptions prep;
  TrainEmbeddingOptions train_embedding;
  ExportEmbeddingsOptions export_embeddings;
  TrainGanOptions train_gan;
  GenerateOptions generate;
  EvaluateIsOptions evaluate_is;
  EvaluateMsSsimOptions evaluate_msssim;
  RankingSheetOptions ranking_sheet;
  RankingAggregateOptions ranking_aggregate;
  ReportOptions report;
  MakeToyOptions make_toy;
  TrainClassifierOptions train_classifier;

  bool operator==(const RunConfig&) const = default;
};

const std::vector<std::string>& subcommands();

struct ParseOutcome {
  RunConfig config;
  bool exit_now = false;  // --help or similar; `message` holds the text
  int exit_code = 0;
  std::string message;
};

/// Parses `r2i [--config FILE] [--log-level L] <subcommand> [flags]`.
/// Values from the TOML config file ([subcommand] sections) override
/// defaults and command-line flags override the file. Invalid or
/// contradictory flags throw std::invalid_argument; an unknown flag's message
/// lists the valid ones.
ParseOutcome parse_config(int argc, const char* const* argv);
RunConfig parse_config_or_throw(const std::vector<std::string>& args);

/// Checks cross-flag constraints for the selected subcommand and the
/// R2I_DEVICE environment variable.
void validate(const RunConfig& config);

/// TOML that reproduces `config` when passed back through --config.
std::string config_snapshot(const RunConfig& config);

}  // namespace r2i::cli
