#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/data/image.hpp"
#include "r2i/data/vocabulary.hpp"
#include "r2i/nn/checkpoint.hpp"
#include "r2i/nn/layers.hpp"

namespace r2i::embedding {

enum class Variant : std::uint8_t { kNoReg = 0, kReg = 1 };

std::string variant_name(Variant v);   // "NOREG" / "REG"
Variant parse_variant(const std::string& s);  // accepts noreg/reg in any case

/// Embedding sizes follow the two variants: 1024 without and 1048 with the
/// classification objective.
inline constexpr int kNoRegDim = 1024;
inline constexpr int kRegDim = 1048;
inline constexpr int kPaperClasses = 1048;

int default_dim(Variant v);

struct ModelConfig {
  Variant variant = Variant::kNoReg;
  int vocab_size = 2;
  data::TokenLimits limits;
  int word_dim = 64;
  int ingredient_dim = 128;
  int instruction_dim = 128;
  int embedding_dim = kNoRegDim;
  int image_size = 256;   // encoder input side (4 * base scale)
  int image_width = 16;   // channels of the first conv, doubled per layer up to 8x
  int num_classes = kPaperClasses;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct RecipeEmbedding {
  std::vector<float> vector;
  Variant variant = Variant::kNoReg;
};

struct ImageEmbedding {
  std::vector<float> vector;
};

/// Joint recipe/image embedding network. The ingredient encoder pools token
/// embeddings, the instruction encoder runs a GRU over pooled sentence
/// vectors, and a linear fusion maps their concatenation to the joint space.
/// A classifier head exists only for the REG variant.
class EmbeddingModel {
 public:
  explicit EmbeddingModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  bool has_classifier() const { return config_.variant == Variant::kReg; }

  // Batched graph builders. Throw on all-PAD inputs.
  nn::Var ingredient_features(const std::vector<const data::TokenizedRecipe*>& batch) const;
  nn::Var instruction_features(const std::vector<const data::TokenizedRecipe*>& batch) const;
  nn::Var recipe_embedding(const std::vector<const data::TokenizedRecipe*>& batch) const;
  /// images: [B, 3, S, S] with S == config.image_size.
  nn::Var image_embedding(const nn::Var& images) const;
  nn::Var classify(const nn::Var& embeddings) const;

  // Single-sample conveniences.
  std::vector<float> embed_ingredients(const data::TokenizedRecipe& r) const;
  std::vector<float> embed_instructions(const data::TokenizedRecipe& r) const;
  RecipeEmbedding embed_recipe(const data::TokenizedRecipe& r) const;
  /// Uses the highest scale; rejects images whose size differs from image_size.
  ImageEmbedding embed_image(const data::MultiScaleImage& image) const;
  ImageEmbedding embed_image(const nn::Tensor& chw) const;

  nn::Linear& fusion() { return fusion_; }
  const nn::Linear& classifier() const { return classifier_; }

  void save(const std::string& path, const nlohmann::json& extra_meta = {}) const;
  static EmbeddingModel load(const std::string& path);

 private:
  ModelConfig config_;
  nn::ParameterSet params_;
  nn::Embedding words_;
  nn::Linear ingredient_proj_;
  nn::GruCell instruction_rnn_;
  nn::Linear fusion_;
  std::vector<nn::Conv2d> image_convs_;
  nn::Linear image_proj_;
  nn::Linear classifier_;
};

/// Stacks [3,S,S] tensors into a [B,3,S,S] constant.
nn::Var stack_images(const std::vector<const nn::Tensor*>& images);

}  // namespace r2i::embedding
