#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace r2i::gan {

enum class GeneratorLossForm { kNonSaturating, kMinimax };

struct GanConfig {
  int base_scale = 16;      // s; branches emit s, 2s, 4s
  int z_dim = 100;
  int embedding_dim = 1024; // recipe embedding size fed to conditioning augmentation
  int ca_dim = 128;         // size of the sampled condition
  int gen_width = 32;       // channels at the base-scale trunk output (x4 at 4x4)
  int disc_width = 16;      // channels of each discriminator's first conv
  int cond_channels = 16;   // condition maps concatenated in stages 1 and 2
  double lambda_kl = 2.0;
  double score_eps = 1e-7;
  GeneratorLossForm g_loss = GeneratorLossForm::kNonSaturating;
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  std::uint64_t seed = 0;

  bool operator==(const GanConfig&) const = default;
};

/// Throws std::invalid_argument with the offending field named.
void validate(const GanConfig& c);

nlohmann::json to_json(const GanConfig& c);
GanConfig gan_config_from_json(const nlohmann::json& j);

}  // namespace r2i::gan
