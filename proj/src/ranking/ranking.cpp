#include "r2i/ranking/ranking.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "r2i/eval/image_dir.hpp"
#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

namespace r2i::ranking {

namespace fs = std::filesystem;

char slot_letter(int slot) {
  if (slot < 0 || slot >= kSlots) throw std::invalid_argument("slot out of range: " + std::to_string(slot));
  return static_cast<char>('A' + slot);
}

int parse_slot(const std::string& s) {
  if (s.size() == 1) {
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c >= 'A' && c < 'A' + kSlots) return c - 'A';
    if (c >= '0' && c < '0' + kSlots) return c - '0';
  }
  throw std::invalid_argument("unknown image slot '" + s + "'");
}

const std::string& RankingKey::variant_at(int item, int slot) const {
  if (item < 1 || item > static_cast<int>(items.size()))
    throw std::out_of_range("item " + std::to_string(item) + " not on sheet " + sheet_id);
  if (slot < 0 || slot >= kSlots) throw std::out_of_range("slot " + std::to_string(slot) + " out of range");
  return items[item - 1].slot_variant[slot];
}

BlindedSheet make_ranking_sheet(const SheetInputs& inputs, int n_items, std::mt19937_64& rng,
                                const std::string& sheet_id) {
  if (n_items < 1) throw std::invalid_argument("a ranking sheet needs at least one item");
  struct Candidate {
    const data::Recipe* recipe;
    std::array<std::string, kSlots> paths;
  };
  std::vector<Candidate> eligible;
  for (const auto& r : inputs.recipes) {
    Candidate c{&r, {}};
    bool ok = true;
    for (int v = 0; v < kSlots; ++v) {
      auto p = eval::find_image_for_id(inputs.dirs[v], r.id);
      if (!p) {
        log::warn({{"stage", "ranking-sheet"},
                   {"msg", "recipe excluded, image missing"},
                   {"id", r.id},
                   {"variant", kRankingVariants[v]}});
        ok = false;
        break;
      }
      c.paths[v] = *p;
    }
    if (ok) eligible.push_back(std::move(c));
  }
  if (eligible.size() < static_cast<std::size_t>(n_items))
    throw std::invalid_argument("only " + std::to_string(eligible.size()) + " recipes have all three images, " +
                                std::to_string(n_items) + " requested");
  std::shuffle(eligible.begin(), eligible.end(), rng);

  BlindedSheet out;
  out.sheet.sheet_id = sheet_id;
  out.key.sheet_id = sheet_id;
  for (int i = 0; i < n_items; ++i) {
    const auto& c = eligible[i];
    std::array<int, kSlots> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    SheetItem item;
    item.item = i + 1;
    item.recipe_id = c.recipe->id;
    item.title = c.recipe->title;
    item.ingredients = c.recipe->ingredients;
    item.instructions = c.recipe->instructions;
    RankingKey::Entry entry;
    entry.recipe_id = c.recipe->id;
    VariantImages src;
    for (int s = 0; s < kSlots; ++s) {
      const int v = perm[s];
      char name[32];
      std::snprintf(name, sizeof name, "item%02d_%c", i + 1, slot_letter(s));
      item.images[s] = std::string(name) + fs::path(c.paths[v]).extension().string();
      entry.slot_variant[s] = kRankingVariants[v];
      entry.slot_source[s] = c.paths[v];
      src[kRankingVariants[v]] = c.paths[v];
    }
    out.sheet.items.push_back(std::move(item));
    out.key.items.push_back(std::move(entry));
    out.sources.push_back(std::move(src));
  }
  return out;
}

std::vector<VariantImages> unblind(const RankingSheet& sheet, const RankingKey& key) {
  if (sheet.sheet_id != key.sheet_id)
    throw std::invalid_argument("key is for sheet " + key.sheet_id + ", not " + sheet.sheet_id);
  if (sheet.items.size() != key.items.size()) throw std::invalid_argument("key and sheet differ in item count");
  std::vector<VariantImages> out;
  for (std::size_t i = 0; i < sheet.items.size(); ++i) {
    if (sheet.items[i].recipe_id != key.items[i].recipe_id)
      throw std::invalid_argument("key and sheet disagree on item " + std::to_string(i + 1));
    VariantImages m;
    for (int s = 0; s < kSlots; ++s)
      if (!m.emplace(key.items[i].slot_variant[s], key.items[i].slot_source[s]).second)
        throw std::invalid_argument("key repeats a variant on item " + std::to_string(i + 1));
    out.push_back(std::move(m));
  }
  return out;
}

nlohmann::json to_json(const RankingSheet& s) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : s.items)
    items.push_back({{"item", it.item},
                     {"recipe_id", it.recipe_id},
                     {"title", it.title},
                     {"ingredients", it.ingredients},
                     {"instructions", it.instructions},
                     {"images", it.images}});
  return {{"sheet_id", s.sheet_id}, {"questions", s.questions}, {"items", items}};
}

RankingSheet sheet_from_json(const nlohmann::json& j) {
  RankingSheet s;
  s.sheet_id = j.at("sheet_id").get<std::string>();
  s.questions = j.at("questions").get<std::array<std::string, kQuestions>>();
  for (const auto& it : j.at("items")) {
    SheetItem item;
    item.item = it.at("item").get<int>();
    item.recipe_id = it.at("recipe_id").get<std::string>();
    item.title = it.value("title", "");
    item.ingredients = it.value("ingredients", std::vector<std::string>{});
    item.instructions = it.value("instructions", std::vector<std::string>{});
    item.images = it.at("images").get<std::array<std::string, kSlots>>();
    s.items.push_back(std::move(item));
  }
  return s;
}

nlohmann::json to_json(const RankingKey& k) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : k.items)
    items.push_back({{"recipe_id", e.recipe_id}, {"slot_variant", e.slot_variant}, {"slot_source", e.slot_source}});
  return {{"sheet_id", k.sheet_id}, {"items", items}};
}

RankingKey key_from_json(const nlohmann::json& j) {
  RankingKey k;
  k.sheet_id = j.at("sheet_id").get<std::string>();
  for (const auto& e : j.at("items")) {
    RankingKey::Entry entry;
    entry.recipe_id = e.at("recipe_id").get<std::string>();
    entry.slot_variant = e.at("slot_variant").get<std::array<std::string, kSlots>>();
    entry.slot_source = e.at("slot_source").get<std::array<std::string, kSlots>>();
    for (const auto& v : entry.slot_variant)
      if (std::find(kRankingVariants.begin(), kRankingVariants.end(), v) == kRankingVariants.end())
        throw std::invalid_argument("key names unknown variant " + v);
    k.items.push_back(std::move(entry));
  }
  return k;
}

namespace {

void write_text(const fs::path& p, const std::string& text) {
  io::write_file_atomic(p.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string render_markdown(const RankingSheet& s) {
  std::ostringstream md;
  md << "# Ranking sheet " << s.sheet_id << "\n\n";
  md << "Each item shows one recipe and three images (A, B, C). Score every image on every question from "
     << kMinScore << " (not at all) to " << kMaxScore << " (very much). Leave a cell empty or write `skip` to skip it.\n\n";
  md << "Questions:\n\n";
  for (int q = 0; q < kQuestions; ++q) md << q + 1 << ". " << s.questions[q] << "\n";
  for (const auto& it : s.items) {
    md << "\n## Item " << it.item << ": " << it.title << "\n\n";
    md << "Ingredients:\n\n";
    for (const auto& ing : it.ingredients) md << "- " << ing << "\n";
    md << "\nInstructions:\n\n";
    for (std::size_t i = 0; i < it.instructions.size(); ++i) md << i + 1 << ". " << it.instructions[i] << "\n";
    md << "\n| A | B | C |\n|---|---|---|\n|";
    for (const auto& img : it.images) md << " ![](images/" << img << ") |";
    md << "\n";
  }
  return md.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

int parse_int(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument(std::string(what) + " '" + s + "' is not an integer");
  return v;
}

}  // namespace

void write_sheet_files(const BlindedSheet& b, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out / "images");
  for (std::size_t i = 0; i < b.sheet.items.size(); ++i)
    for (int s = 0; s < kSlots; ++s)
      fs::copy_file(b.key.items[i].slot_source[s], out / "images" / b.sheet.items[i].images[s],
                    fs::copy_options::overwrite_existing);
  write_text(out / "sheet.json", to_json(b.sheet).dump(2) + "\n");
  write_text(out / "key.json", to_json(b.key).dump(2) + "\n");
  write_text(out / "sheet.md", render_markdown(b.sheet));
  std::vector<ResponseRow> tmpl;
  for (const auto& it : b.sheet.items)
    for (int s = 0; s < kSlots; ++s)
      for (int q = 1; q <= kQuestions; ++q) tmpl.push_back({b.sheet.sheet_id, "RATER", it.item, s, q, std::nullopt});
  write_text(out / "responses_template.csv", responses_to_csv(tmpl));
}

std::string responses_to_csv(const std::vector<ResponseRow>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kResponseColumns.size(); ++i) os << (i ? "," : "") << kResponseColumns[i];
  os << "\n";
  for (const auto& r : rows)
    os << csv_field(r.sheet_id) << ',' << csv_field(r.rater_id) << ',' << r.item << ',' << slot_letter(r.slot) << ','
       << r.question << ',' << (r.score ? std::to_string(*r.score) : "") << "\n";
  return os.str();
}

ParsedResponses parse_responses(const std::string& csv_text, const std::string& source) {
  ParsedResponses out;
  std::istringstream in(csv_text);
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (!header) {
      if (fields.size() != kResponseColumns.size() ||
          !std::equal(fields.begin(), fields.end(), kResponseColumns.begin()))
        throw std::invalid_argument(source + ": header must be sheet_id,rater_id,item,image_slot,question,score");
      header = true;
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != kResponseColumns.size()) {
      out.diagnostics.push_back(where + "expected 6 fields, found " + std::to_string(fields.size()));
      continue;
    }
    try {
      ResponseRow r;
      r.sheet_id = fields[0];
      r.rater_id = fields[1];
      if (r.rater_id.empty()) throw std::invalid_argument("empty rater id");
      r.item = parse_int(fields[2], "item");
      r.slot = parse_slot(fields[3]);
      r.question = parse_int(fields[4], "question");
      if (r.question < 1 || r.question > kQuestions)
        throw std::invalid_argument("question " + std::to_string(r.question) + " outside [1,3]");
      std::string score = fields[5];
      std::string lower = score;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      if (!score.empty() && lower != "skip") {
        int v = parse_int(score, "score");
        if (v < kMinScore || v > kMaxScore) throw std::invalid_argument("score " + score + " outside [1,5]");
        r.score = v;
      }
      out.rows.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      out.diagnostics.push_back(where + e.what());
    }
  }
  if (!header) throw std::invalid_argument(source + ": empty response file");
  return out;
}

ParsedResponses read_responses(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open responses file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_responses(ss.str(), path);
}

RankingSummary aggregate_rankings(const std::vector<ResponseRow>& rows, const RankingKey& key) {
  RankingSummary out;
  out.sheet_id = key.sheet_id;
  using Cell = std::tuple<std::string, int, int, int>;  // rater, item, slot, question
  std::map<Cell, int> occurrences;
  for (const auto& r : rows) occurrences[{r.rater_id, r.item, r.slot, r.question}]++;

  struct Acc {
    std::array<long long, kQuestions> sum{};
    std::array<long long, kQuestions> count{};
    std::set<std::string> raters;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : rows) {
    const std::string where = "rater " + r.rater_id + " item " + std::to_string(r.item) + " slot " +
                              std::string(1, slot_letter(std::clamp(r.slot, 0, kSlots - 1))) + " question " +
                              std::to_string(r.question) + ": ";
    if (r.sheet_id != key.sheet_id) {
      out.diagnostics.push_back(where + "row is for sheet '" + r.sheet_id + "'");
      continue;
    }
    if (r.item < 1 || r.item > static_cast<int>(key.items.size()) || r.slot < 0 || r.slot >= kSlots) {
      out.diagnostics.push_back(where + "no such item/slot on the sheet");
      continue;
    }
    if (r.question < 1 || r.question > kQuestions) {
      out.diagnostics.push_back(where + "no such question");
      continue;
    }
    if (occurrences[{r.rater_id, r.item, r.slot, r.question}] > 1) {
      out.diagnostics.push_back(where + "cell answered more than once, all copies ignored");
      continue;
    }
    if (!r.score) continue;
    if (*r.score < kMinScore || *r.score > kMaxScore) {
      out.diagnostics.push_back(where + "score " + std::to_string(*r.score) + " outside [1,5]");
      continue;
    }
    Acc& a = acc[key.variant_at(r.item, r.slot)];
    a.sum[r.question - 1] += *r.score;
    a.count[r.question - 1] += 1;
    a.raters.insert(r.rater_id);
  }
  if (acc.empty()) throw std::invalid_argument("no valid scores to aggregate for sheet " + key.sheet_id);
  for (const auto& v : kRankingVariants) {
    auto it = acc.find(v);
    if (it == acc.end()) continue;
    VariantRanking vr;
    bool all = true;
    double total = 0.0;
    for (int q = 0; q < kQuestions; ++q) {
      if (it->second.count[q] == 0) {
        all = false;
        continue;
      }
      vr.question_mean[q] = static_cast<double>(it->second.sum[q]) / static_cast<double>(it->second.count[q]);
      total += *vr.question_mean[q];
      vr.scores += static_cast<int>(it->second.count[q]);
    }
    if (all) vr.overall = total / kQuestions;
    vr.raters = static_cast<int>(it->second.raters.size());
    out.variants[v] = vr;
  }
  std::sort(out.diagnostics.begin(), out.diagnostics.end());
  return out;
}

nlohmann::json to_json(const RankingSummary& s) {
  nlohmann::json variants = nlohmann::json::object();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto& [name, v] : s.variants)
    variants[name] = {{"q1", opt(v.question_mean[0])},
                      {"q2", opt(v.question_mean[1])},
                      {"q3", opt(v.question_mean[2])},
                      {"overall", opt(v.overall)},
                      {"raters", v.raters},
                      {"scores", v.scores}};
  return {{"kind", "human_ranking"},
          {"version", 1},
          {"sheet_id", s.sheet_id},
          {"variants", variants},
          {"diagnostics", s.diagnostics}};
}

RankingSummary summary_from_json(const nlohmann::json& j) {
  RankingSummary s;
  s.sheet_id = j.value("sheet_id", "");
  auto opt = [](const nlohmann::json& v) {
    return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
  };
  for (auto it = j.at("variants").begin(); it != j.at("variants").end(); ++it) {
    VariantRanking v;
    v.question_mean = {opt(it->at("q1")), opt(it->at("q2")), opt(it->at("q3"))};
    v.overall = opt(it->at("overall"));
    v.raters = it->value("raters", 0);
    v.scores = it->value("scores", 0);
    s.variants[it.key()] = v;
  }
  s.diagnostics = j.value("diagnostics", std::vector<std::string>{});
  return s;
}

}  // namespace r2i::ranking
