#include "r2i/data/recipe.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "r2i/util/log.hpp"

namespace r2i::data {

namespace {

std::optional<std::vector<std::string>> string_list(const nlohmann::json& j, const char* key, std::string* why) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (why) *why = std::string("missing \"") + key + "\"";
    return std::nullopt;
  }
  if (!it->is_array()) {
    if (why) *why = std::string("\"") + key + "\" is not an array";
    return std::nullopt;
  }
  std::vector<std::string> out;
  for (const auto& e : *it) {
    if (!e.is_string()) {
      if (why) *why = std::string("\"") + key + "\" has a non-string entry";
      return std::nullopt;
    }
    std::string s = normalize_whitespace(e.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  if (out.empty()) {
    if (why) *why = std::string("\"") + key + "\" is empty";
    return std::nullopt;
  }
  return out;
}

}  // namespace

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::optional<Recipe> recipe_from_json(const nlohmann::json& j, std::string* why) {
  if (!j.is_object()) {
    if (why) *why = "record is not a JSON object";
    return std::nullopt;
  }
  Recipe r;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string() || normalize_whitespace(id->get<std::string>()).empty()) {
    if (why) *why = "missing or empty \"id\"";
    return std::nullopt;
  }
  r.id = normalize_whitespace(id->get<std::string>());
  if (auto t = j.find("title"); t != j.end()) {
    if (!t->is_string()) {
      if (why) *why = "\"title\" is not a string";
      return std::nullopt;
    }
    r.title = normalize_whitespace(t->get<std::string>());
  }
  auto ingredients = string_list(j, "ingredients", why);
  if (!ingredients) return std::nullopt;
  auto instructions = string_list(j, "instructions", why);
  if (!instructions) return std::nullopt;
  auto images = string_list(j, "images", why);
  if (!images) return std::nullopt;
  r.ingredients = std::move(*ingredients);
  r.instructions = std::move(*instructions);
  r.image_refs = std::move(*images);
  if (auto c = j.find("class"); c != j.end() && !c->is_null()) {
    if (!c->is_number_integer() || c->get<long long>() < 0 || c->get<long long>() > (1 << 30)) {
      if (why) *why = "\"class\" must be a non-negative integer";
      return std::nullopt;
    }
    r.class_label = c->get<int>();
  }
  return r;
}

nlohmann::json recipe_to_json(const Recipe& r) {
  nlohmann::json j = {{"id", r.id},
                      {"title", r.title},
                      {"ingredients", r.ingredients},
                      {"instructions", r.instructions},
                      {"images", r.image_refs}};
  if (r.class_label) j["class"] = *r.class_label;
  return j;
}

ParseResult parse_recipe_lines(std::string_view text) {
  ParseResult result;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (normalize_whitespace(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    std::string why;
    auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    std::optional<Recipe> r;
    if (j.is_discarded()) {
      why = "invalid JSON";
    } else {
      r = recipe_from_json(j, &why);
    }
    if (r && !seen.insert(r->id).second) {
      why = "duplicate id \"" + r->id + "\"";
      r.reset();
    }
    if (!r) {
      ++result.skipped;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + why);
    } else {
      result.recipes.push_back(std::move(*r));
    }
    if (end == text.size()) break;
  }
  return result;
}

ParseResult parse_recipe_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read recipe file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto result = parse_recipe_lines(buf.str());
  for (const auto& w : result.warnings) log::warn({{"stage", "parse"}, {"file", path}, {"skip", w}});
  return result;
}

void write_recipe_records(const std::string& path, const std::vector<Recipe>& recipes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write recipe file " + path);
  for (const auto& r : recipes) out << recipe_to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace r2i::data
