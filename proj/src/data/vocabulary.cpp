#include "r2i/data/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace r2i::data {

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  ids_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  return tokens_[id];
}

std::vector<std::string> instruction_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : sentence) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string ingredient_token(std::string_view ingredient) {
  std::string out;
  for (const auto& w : instruction_words(ingredient)) {
    if (!out.empty()) out.push_back('_');
    out += w;
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<Recipe>& recipes, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1, got " + std::to_string(min_count));
  if (recipes.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, int> counts;
  for (const auto& r : recipes) {
    for (const auto& ing : r.ingredients) {
      auto t = ingredient_token(ing);
      if (!t.empty()) ++counts[t];
    }
    for (const auto& s : r.instructions)
      for (auto& w : instruction_words(s)) ++counts[w];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

TokenizedRecipe tokenize_recipe(const Recipe& recipe, const Vocabulary& vocab, const TokenLimits& limits) {
  if (limits.max_ingredients < 1 || limits.max_instructions < 1 || limits.max_words < 1)
    throw std::invalid_argument("token limits must be >= 1");
  TokenizedRecipe out;
  out.limits = limits;
  out.ingredients.assign(limits.max_ingredients, Vocabulary::kPad);
  out.instructions.assign(static_cast<std::size_t>(limits.max_instructions) * limits.max_words, Vocabulary::kPad);

  int n_ingr = 0;
  for (const auto& ing : recipe.ingredients) {
    if (n_ingr == limits.max_ingredients) break;
    auto t = ingredient_token(ing);
    if (t.empty()) continue;
    out.ingredients[n_ingr++] = vocab.id(t);
  }
  int n_instr = 0;
  for (const auto& s : recipe.instructions) {
    if (n_instr == limits.max_instructions) break;
    auto words = instruction_words(s);
    if (words.empty()) continue;
    int* row = out.instructions.data() + static_cast<std::size_t>(n_instr) * limits.max_words;
    for (std::size_t w = 0; w < words.size() && w < static_cast<std::size_t>(limits.max_words); ++w)
      row[w] = vocab.id(words[w]);
    ++n_instr;
  }
  if (n_ingr == 0) throw std::invalid_argument("recipe " + recipe.id + " has no usable ingredients");
  if (n_instr == 0) throw std::invalid_argument("recipe " + recipe.id + " has no usable instructions");
  return out;
}

}  // namespace r2i::data
