#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace r2i::data {

/// One recipe record. The title is display-only and never reaches any
/// embedding input.
struct Recipe {
  std::string id;
  std::string title;
  std::vector<std::string> ingredients;
  std::vector<std::string> instructions;
  std::vector<std::string> image_refs;
  std::optional<int> class_label;

  bool operator==(const Recipe&) const = default;
};

struct ParseResult {
  std::vector<Recipe> recipes;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // one per skipped line, with line number
};

/// Trims and collapses internal whitespace runs to a single space.
std::string normalize_whitespace(std::string_view s);

/// Validates one JSON object against the record schema. Returns nullopt and
/// fills `why` when the record is unusable.
std::optional<Recipe> recipe_from_json(const nlohmann::json& j, std::string* why = nullptr);
nlohmann::json recipe_to_json(const Recipe& r);

/// Reads a JSON-lines recipe file. An unreadable file throws; malformed or
/// invalid lines are skipped and counted.
ParseResult parse_recipe_records(const std::string& path);
ParseResult parse_recipe_lines(std::string_view text);

void write_recipe_records(const std::string& path, const std::vector<Recipe>& recipes);

}  // namespace r2i::data
