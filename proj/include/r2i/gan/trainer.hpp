#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/data/packed.hpp"
#include "r2i/embedding/trainer.hpp"
#include "r2i/gan/losses.hpp"
#include "r2i/gan/networks.hpp"
#include "r2i/nn/optim.hpp"

namespace r2i::gan {

struct GanLossReport {
  std::int64_t step = 0;
  std::array<double, 3> d_per_scale{};
  std::array<double, 3> g_per_scale{};
  double kl = 0.0;       // batch mean of the per-sample closed-form KL
  double kl_term = 0.0;  // lambda_kl * element-mean KL, the part added to the G loss
  double g_total = 0.0;  // sum(g_per_scale) + kl_term
  double d_total = 0.0;  // sum(d_per_scale)

  bool all_finite() const;
  nlohmann::json to_json() const;
  bool operator==(const GanLossReport&) const = default;
};

/// Networks, both optimizers and the sampling RNG. Optimizers keep pointers
/// into the model, so a state is pinned in memory once built.
class GanState {
 public:
  explicit GanState(const GanConfig& config);
  GanState(const GanState&) = delete;
  GanState& operator=(const GanState&) = delete;

  GanModel model;
  nn::Adam g_opt;
  nn::Adam d_opt;
  std::mt19937_64 rng;
  std::int64_t step = 0;
};

struct RealBatch {
  std::array<nn::Tensor, 3> images;  // [B,3,S,S] per scale, values in [-1,1]
  nn::Tensor conditions;             // [B, embedding_dim], see condition_batch
};

/// One discriminator update on all scales, then one generator update.
/// Throws std::runtime_error on a non-finite loss, before the update that
/// would consume it.
GanLossReport gan_train_step(GanState& state, const RealBatch& batch);

// Checkpoint metadata records kind "gan", the model config, step, seed and
// the RNG state; blocks hold both networks and both optimizers' moments.
void save_gan_checkpoint(const GanState& state, const std::string& path, const nlohmann::json& extra_meta = {});
std::unique_ptr<GanState> load_gan_checkpoint(const std::string& path);

struct GanTrainConfig {
  GanConfig model;
  int batch_size = 8;
  int epochs = 1;
  std::int64_t max_steps = 0;  // 0 = no cap
  int checkpoint_every = 0;    // steps; 0 = once per epoch
  int log_every = 10;
  std::string checkpoint_path; // empty = no checkpoints
  std::string resume_from;
};

struct GanTrainResult {
  std::unique_ptr<GanState> state;
  std::vector<GanLossReport> history;
  std::string last_checkpoint;
};

/// Pairs each packed record with its recipe embedding by id; records without
/// an embedding are skipped with a warning.
GanTrainResult train_gan(const data::PackedDataset& dataset, const embedding::EmbeddingTable& embeddings,
                         const GanTrainConfig& config);

struct GenerateOptions {
  std::vector<std::string> ids;  // empty = every id in the table
  int n_per_recipe = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct GeneratedImage {
  std::string id;
  int index = 0;
  std::array<nn::Tensor, 3> scales;  // [3,S,S] each
};

/// Noise is drawn per (recipe, k) in the listed order from one RNG seeded by
/// `seed`, so results do not depend on batching.
std::vector<GeneratedImage> generate_for_recipes(const GanModel& model, const embedding::EmbeddingTable& table,
                                                 const GenerateOptions& options);
/// Writes <id>_<k>_<size>.png for every scale; returns the written paths.
std::vector<std::string> write_generated(const std::vector<GeneratedImage>& images, const std::string& out_dir);

}  // namespace r2i::gan
