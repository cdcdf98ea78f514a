#include "r2i/gan/config.hpp"

#include <stdexcept>
#include <string>

namespace r2i::gan {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void validate(const GanConfig& c) {
  require(c.base_scale >= 4 && c.base_scale % 4 == 0 && power_of_two(c.base_scale / 4),
          "base_scale must be 4 * 2^k, got " + std::to_string(c.base_scale));
  require(c.z_dim >= 1, "z_dim must be >= 1");
  require(c.embedding_dim >= 1, "embedding_dim must be >= 1");
  require(c.ca_dim >= 1, "ca_dim must be >= 1");
  require(c.gen_width >= 4, "gen_width must be >= 4");
  require(c.disc_width >= 1, "disc_width must be >= 1");
  require(c.cond_channels >= 1, "cond_channels must be >= 1");
  require(c.lambda_kl >= 0.0, "lambda_kl must be non-negative");
  require(c.score_eps > 0.0 && c.score_eps < 0.5, "score_eps must be in (0, 0.5)");
  require(c.lr > 0.0f, "lr must be positive");
  require(c.beta1 >= 0.0f && c.beta1 < 1.0f && c.beta2 >= 0.0f && c.beta2 < 1.0f, "betas must be in [0,1)");
}

nlohmann::json to_json(const GanConfig& c) {
  return {{"base_scale", c.base_scale},
          {"z_dim", c.z_dim},
          {"embedding_dim", c.embedding_dim},
          {"ca_dim", c.ca_dim},
          {"gen_width", c.gen_width},
          {"disc_width", c.disc_width},
          {"cond_channels", c.cond_channels},
          {"lambda_kl", c.lambda_kl},
          {"score_eps", c.score_eps},
          {"g_loss", c.g_loss == GeneratorLossForm::kMinimax ? "minimax" : "non-saturating"},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"seed", c.seed}};
}

GanConfig gan_config_from_json(const nlohmann::json& j) {
  GanConfig c;
  c.base_scale = j.at("base_scale").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.ca_dim = j.at("ca_dim").get<int>();
  c.gen_width = j.at("gen_width").get<int>();
  c.disc_width = j.at("disc_width").get<int>();
  c.cond_channels = j.at("cond_channels").get<int>();
  c.lambda_kl = j.at("lambda_kl").get<double>();
  c.score_eps = j.at("score_eps").get<double>();
  const auto form = j.at("g_loss").get<std::string>();
  if (form == "minimax")
    c.g_loss = GeneratorLossForm::kMinimax;
  else if (form == "non-saturating")
    c.g_loss = GeneratorLossForm::kNonSaturating;
  else
    throw std::invalid_argument("unknown generator loss form: " + form);
  c.lr = j.at("lr").get<float>();
  c.beta1 = j.at("beta1").get<float>();
  c.beta2 = j.at("beta2").get<float>();
  c.seed = j.at("seed").get<std::uint64_t>();
  validate(c);
  return c;
}

}  // namespace r2i::gan
