#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "r2i/data/recipe.hpp"

namespace r2i::data {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  /// Returns the existing id if the token is already present.
  int add(const std::string& token);
  /// UNK for unknown tokens.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Ingredient line -> single token: lowercase alphanumeric words joined by '_'.
std::string ingredient_token(std::string_view ingredient);
/// Instruction sentence -> lowercase alphanumeric words.
std::vector<std::string> instruction_words(std::string_view sentence);

/// Counts ingredient tokens and instruction words (never titles). Tokens
/// with count >= min_count get ids in (count desc, token asc) order.
Vocabulary build_vocabulary(const std::vector<Recipe>& recipes, int min_count);

struct TokenLimits {
  int max_ingredients = 20;
  int max_instructions = 20;
  int max_words = 16;  // per instruction sentence

  bool operator==(const TokenLimits&) const = default;
};

/// Fixed-size, PAD-filled token ids. Instructions are a row-major
/// [max_instructions, max_words] grid, one row per sentence.
struct TokenizedRecipe {
  std::vector<int> ingredients;
  std::vector<int> instructions;
  TokenLimits limits;

  bool operator==(const TokenizedRecipe&) const = default;
};

TokenizedRecipe tokenize_recipe(const Recipe& recipe, const Vocabulary& vocab, const TokenLimits& limits);

}  // namespace r2i::data
