#include "r2i/embedding/model.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <stdexcept>

namespace r2i::embedding {

using nn::Var;

std::string variant_name(Variant v) { return v == Variant::kReg ? "REG" : "NOREG"; }

Variant parse_variant(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "noreg") return Variant::kNoReg;
  if (l == "reg") return Variant::kReg;
  throw std::invalid_argument("unknown embedding variant '" + s + "' (expected noreg or reg)");
}

int default_dim(Variant v) { return v == Variant::kReg ? kRegDim : kNoRegDim; }

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"vocab_size", c.vocab_size},
          {"max_ingredients", c.limits.max_ingredients},
          {"max_instructions", c.limits.max_instructions},
          {"max_words", c.limits.max_words},
          {"word_dim", c.word_dim},
          {"ingredient_dim", c.ingredient_dim},
          {"instruction_dim", c.instruction_dim},
          {"embedding_dim", c.embedding_dim},
          {"image_size", c.image_size},
          {"image_width", c.image_width},
          {"num_classes", c.num_classes},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<int>();
  c.limits.max_ingredients = j.at("max_ingredients").get<int>();
  c.limits.max_instructions = j.at("max_instructions").get<int>();
  c.limits.max_words = j.at("max_words").get<int>();
  c.word_dim = j.at("word_dim").get<int>();
  c.ingredient_dim = j.at("ingredient_dim").get<int>();
  c.instruction_dim = j.at("instruction_dim").get<int>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.image_width = j.at("image_width").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

EmbeddingModel::EmbeddingModel(const ModelConfig& config) : config_(config) {
  if (config.vocab_size < 2) throw std::invalid_argument("vocab_size must include PAD and UNK");
  if (config.embedding_dim < 1 || config.word_dim < 1 || config.ingredient_dim < 1 || config.instruction_dim < 1)
    throw std::invalid_argument("embedding model dimensions must be positive");
  if (config.variant == Variant::kReg && config.num_classes < 2)
    throw std::invalid_argument("REG variant needs at least 2 classes, got " + std::to_string(config.num_classes));
  int steps = 0;
  for (int s = config.image_size; s > 4; s /= 2) {
    if (s % 2) throw std::invalid_argument("image_size must be 4 * 2^k");
    ++steps;
  }
  if (steps == 0 || (4 << steps) != config.image_size)
    throw std::invalid_argument("image_size must be 4 * 2^k with k >= 1, got " + std::to_string(config.image_size));

  std::mt19937_64 rng(config.seed);
  words_ = nn::Embedding(params_, "words", config.vocab_size, config.word_dim, rng);
  ingredient_proj_ = nn::Linear(params_, "ingredients", config.word_dim, config.ingredient_dim, rng);
  instruction_rnn_ = nn::GruCell(params_, "instructions", config.word_dim, config.instruction_dim, rng);
  fusion_ = nn::Linear(params_, "fusion", config.ingredient_dim + config.instruction_dim, config.embedding_dim, rng);
  int in = 3;
  for (int i = 0; i < steps; ++i) {
    int out = config.image_width << std::min(i, 3);
    image_convs_.emplace_back(params_, "image.conv" + std::to_string(i), in, out, 4, 2, 1, rng);
    in = out;
  }
  image_proj_ = nn::Linear(params_, "image.proj", in * 16, config.embedding_dim, rng);
  if (has_classifier()) classifier_ = nn::Linear(params_, "classifier", config.embedding_dim, config.num_classes, rng);
}

Var EmbeddingModel::ingredient_features(const std::vector<const data::TokenizedRecipe*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int len = config_.limits.max_ingredients;
  std::vector<int> ids;
  std::vector<float> weights;
  for (const auto* r : batch) {
    if (static_cast<int>(r->ingredients.size()) != len)
      throw std::invalid_argument("ingredient sequence length does not match the model configuration");
    int n = 0;
    for (int id : r->ingredients) {
      if (id < 0 || id >= config_.vocab_size) throw std::invalid_argument("token id outside vocabulary");
      n += id != data::Vocabulary::kPad;
    }
    if (n == 0) throw std::invalid_argument("ingredient sequence is all PAD");
    for (int id : r->ingredients) {
      ids.push_back(id);
      weights.push_back(id != data::Vocabulary::kPad ? 1.0f / static_cast<float>(n) : 0.0f);
    }
  }
  Var pooled = nn::segment_weighted_sum(words_(ids), static_cast<int>(batch.size()), weights);
  return nn::tanh(ingredient_proj_(pooled));
}

Var EmbeddingModel::instruction_features(const std::vector<const data::TokenizedRecipe*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int sentences = config_.limits.max_instructions;
  const int words = config_.limits.max_words;
  const int b = static_cast<int>(batch.size());
  std::vector<int> ids;
  std::vector<float> weights;
  std::vector<std::vector<float>> step_mask(sentences, std::vector<float>(b, 0.0f));
  int last_step = -1;
  for (int i = 0; i < b; ++i) {
    const auto* r = batch[i];
    if (static_cast<int>(r->instructions.size()) != sentences * words)
      throw std::invalid_argument("instruction grid does not match the model configuration");
    bool any = false;
    for (int s = 0; s < sentences; ++s) {
      const int* row = r->instructions.data() + static_cast<std::size_t>(s) * words;
      int n = 0;
      for (int w = 0; w < words; ++w) {
        if (row[w] < 0 || row[w] >= config_.vocab_size) throw std::invalid_argument("token id outside vocabulary");
        n += row[w] != data::Vocabulary::kPad;
      }
      for (int w = 0; w < words; ++w) {
        ids.push_back(row[w]);
        weights.push_back(n && row[w] != data::Vocabulary::kPad ? 1.0f / static_cast<float>(n) : 0.0f);
      }
      if (n) {
        step_mask[s][i] = 1.0f;
        any = true;
        last_step = std::max(last_step, s);
      }
    }
    if (!any) throw std::invalid_argument("instruction sequence is all PAD");
  }
  Var sentence_vecs = nn::segment_weighted_sum(words_(ids), b * sentences, weights);
  Var h = Var::constant(nn::Tensor({b, config_.instruction_dim}));
  std::vector<int> rows(b);
  for (int s = 0; s <= last_step; ++s) {
    for (int i = 0; i < b; ++i) rows[i] = i * sentences + s;
    Var x = nn::gather_rows(sentence_vecs, rows);
    Var h_new = instruction_rnn_(x, h);
    std::vector<float> keep(b);
    for (int i = 0; i < b; ++i) keep[i] = 1.0f - step_mask[s][i];
    // Empty sentences leave the state untouched.
    h = nn::add(nn::row_scale(h_new, step_mask[s]), nn::row_scale(h, keep));
  }
  return h;
}

Var EmbeddingModel::recipe_embedding(const std::vector<const data::TokenizedRecipe*>& batch) const {
  return fusion_(nn::concat({ingredient_features(batch), instruction_features(batch)}));
}

Var EmbeddingModel::image_embedding(const Var& images) const {
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != config_.image_size || s[3] != config_.image_size)
    throw std::invalid_argument("image encoder expects [B,3," + std::to_string(config_.image_size) + "," +
                                std::to_string(config_.image_size) + "], got " + nn::shape_str(s));
  Var h = images;
  for (const auto& conv : image_convs_) h = nn::leaky_relu(conv(h), 0.2f);
  h = nn::reshape(h, {s[0], static_cast<int>(h.value().size()) / s[0]});
  return image_proj_(h);
}

Var EmbeddingModel::classify(const Var& embeddings) const {
  if (!has_classifier()) throw std::logic_error("NOREG model has no classifier head");
  return classifier_(embeddings);
}

std::vector<float> EmbeddingModel::embed_ingredients(const data::TokenizedRecipe& r) const {
  return nn::to_vector(ingredient_features({&r}).value().data);
}

std::vector<float> EmbeddingModel::embed_instructions(const data::TokenizedRecipe& r) const {
  return nn::to_vector(instruction_features({&r}).value().data);
}

RecipeEmbedding EmbeddingModel::embed_recipe(const data::TokenizedRecipe& r) const {
  return {nn::to_vector(recipe_embedding({&r}).value().data), config_.variant};
}

ImageEmbedding EmbeddingModel::embed_image(const data::MultiScaleImage& image) const {
  return embed_image(image.scales[2]);
}

ImageEmbedding EmbeddingModel::embed_image(const nn::Tensor& chw) const {
  return {nn::to_vector(image_embedding(stack_images({&chw})).value().data)};
}

void EmbeddingModel::save(const std::string& path, const nlohmann::json& extra_meta) const {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", "embedding"}, {"config", to_json(config_)}};
  if (extra_meta.is_object())
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) ckpt.meta[it.key()] = it.value();
  nn::store_parameters(ckpt, "", params_);
  nn::write_checkpoint(path, ckpt);
}

EmbeddingModel EmbeddingModel::load(const std::string& path) {
  nn::Checkpoint ckpt = nn::read_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "embedding") throw std::runtime_error(path + " is not an embedding checkpoint");
  EmbeddingModel m(model_config_from_json(ckpt.meta.at("config")));
  nn::load_parameters(ckpt, "", m.params_);
  return m;
}

Var stack_images(const std::vector<const nn::Tensor*>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const nn::Shape& s = images[0]->shape;
  if (s.size() != 3) throw std::invalid_argument("stack_images expects [C,H,W] tensors");
  nn::Tensor out({static_cast<int>(images.size()), s[0], s[1], s[2]});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape != s) throw std::invalid_argument("stack_images: mixed image shapes");
    std::copy(images[i]->data.begin(), images[i]->data.end(), out.data.begin() + i * images[i]->data.size());
  }
  return Var::constant(std::move(out));
}

}  // namespace r2i::embedding
