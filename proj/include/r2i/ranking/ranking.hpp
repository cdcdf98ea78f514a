#pragma once

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/data/recipe.hpp"

namespace r2i::ranking {

inline constexpr int kSlots = 3;
inline constexpr int kQuestions = 3;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

/// Image sources shown for every item, in key order.
inline const std::array<std::string, kSlots> kRankingVariants = {"REAL", "REG", "NOREG"};

inline const std::array<std::string, kQuestions> kRankingQuestions = {
    "How closely is this image related to the recipe?",
    "How closely is this image related to the real photo of the dish?",
    "How much does this image look like a real food photo?"};

char slot_letter(int slot);  // 0 -> 'A'
int parse_slot(const std::string& s);  // "A"/"a"/"0" -> 0; throws otherwise

struct SheetItem {
  int item = 0;  // 1-based
  std::string recipe_id;
  std::string title;
  std::vector<std::string> ingredients;
  std::vector<std::string> instructions;
  std::array<std::string, kSlots> images;  // blinded file names, by slot

  bool operator==(const SheetItem&) const = default;
};

struct RankingSheet {
  std::string sheet_id;
  std::array<std::string, kQuestions> questions = kRankingQuestions;
  std::vector<SheetItem> items;

  bool operator==(const RankingSheet&) const = default;
};

/// Unblinding key: which variant (and source file) sits in each slot.
struct RankingKey {
  std::string sheet_id;
  struct Entry {
    std::string recipe_id;
    std::array<std::string, kSlots> slot_variant;
    std::array<std::string, kSlots> slot_source;

    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> items;  // index = item - 1

  /// Throws on an unknown item or slot.
  const std::string& variant_at(int item, int slot) const;
  bool operator==(const RankingKey&) const = default;
};

/// Variant -> source image path for one item.
using VariantImages = std::map<std::string, std::string>;

struct SheetInputs {
  std::vector<data::Recipe> recipes;
  std::array<std::string, kSlots> dirs;  // REAL, REG, NOREG
};

struct BlindedSheet {
  RankingSheet sheet;
  RankingKey key;
  std::vector<VariantImages> sources;  // unblinded view, index = item - 1
};

/// Picks n_items recipes (seeded shuffle) that have an image in all three
/// directories and shuffles the slot order of each item independently.
/// Recipes missing a variant are excluded with a warning; too few eligible
/// recipes is an error.
BlindedSheet make_ranking_sheet(const SheetInputs& inputs, int n_items, std::mt19937_64& rng,
                                const std::string& sheet_id);

/// Recovers variant -> source for every item from a sheet and its key.
std::vector<VariantImages> unblind(const RankingSheet& sheet, const RankingKey& key);

nlohmann::json to_json(const RankingSheet& s);
RankingSheet sheet_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RankingKey& k);
RankingKey key_from_json(const nlohmann::json& j);

/// Writes sheet.json, sheet.md, key.json, responses_template.csv and copies
/// the images to <out>/images under their blinded names.
void write_sheet_files(const BlindedSheet& sheet, const std::string& out_dir);

struct ResponseRow {
  std::string sheet_id;
  std::string rater_id;
  int item = 0;
  int slot = 0;
  int question = 0;          // 1-based
  std::optional<int> score;  // empty = skipped

  bool operator==(const ResponseRow&) const = default;
};

struct ParsedResponses {
  std::vector<ResponseRow> rows;
  std::vector<std::string> diagnostics;  // one per rejected row
};

inline const std::array<std::string, 6> kResponseColumns = {"sheet_id", "rater_id", "item",
                                                            "image_slot", "question", "score"};

/// CSV with the header above. An empty score or "skip" marks a skipped cell;
/// malformed rows and scores outside [1,5] are rejected with a diagnostic.
ParsedResponses parse_responses(const std::string& csv_text, const std::string& source = "<csv>");
ParsedResponses read_responses(const std::string& path);
std::string responses_to_csv(const std::vector<ResponseRow>& rows);

struct VariantRanking {
  std::array<std::optional<double>, kQuestions> question_mean;
  std::optional<double> overall;  // mean of the three question means
  int raters = 0;
  int scores = 0;

  bool operator==(const VariantRanking&) const = default;
};

struct RankingSummary {
  std::string sheet_id;
  std::map<std::string, VariantRanking> variants;
  std::vector<std::string> diagnostics;
};

/// Unblinds every row through the key and averages per (variant, question)
/// over raters and items, skipping skipped cells. Rows for another sheet, an
/// unknown item/slot/question, or a repeated cell are rejected with a
/// diagnostic. Throws if no valid score remains.
RankingSummary aggregate_rankings(const std::vector<ResponseRow>& rows, const RankingKey& key);

nlohmann::json to_json(const RankingSummary& s);
RankingSummary summary_from_json(const nlohmann::json& j);

}  // namespace r2i::ranking
