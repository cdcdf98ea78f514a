#include "r2i/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace r2i::eval {

const std::vector<ReferenceValues>& reference_values() {
  static const std::vector<ReferenceValues> refs = {
      {"REG", 4.42, 0.17, 0.17, {2.62, 2.24, 3.05}},
      {"NOREG", 4.55, 0.20, 0.07, {2.88, 2.70, 3.72}},
  };
  return refs;
}

namespace {

int variant_rank(const std::string& v) {
  if (v == "REG") return 0;
  if (v == "NOREG") return 1;
  throw std::invalid_argument("report variant must be REG or NOREG, got '" + v + "'");
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_double(const nlohmann::json& v) {
  return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

nlohmann::json human_json(const ranking::VariantRanking& h) {
  return {{"q1", opt_json(h.question_mean[0])},
          {"q2", opt_json(h.question_mean[1])},
          {"q3", opt_json(h.question_mean[2])},
          {"overall", opt_json(h.overall)},
          {"raters", h.raters},
          {"scores", h.scores}};
}

ranking::VariantRanking human_from_json(const nlohmann::json& j) {
  ranking::VariantRanking h;
  h.question_mean = {opt_double(j.at("q1")), opt_double(j.at("q2")), opt_double(j.at("q3"))};
  h.overall = opt_double(j.at("overall"));
  h.raters = j.value("raters", 0);
  h.scores = j.value("scores", 0);
  return h;
}

}  // namespace

EvalReport build_report(std::vector<VariantMetrics> variants, nlohmann::json metadata) {
  if (variants.empty()) throw std::invalid_argument("a report needs at least one variant");
  for (const auto& v : variants)
    if (v.variant != "REG" && v.variant != "NOREG")
      throw std::invalid_argument("unknown report variant '" + v.variant + "' (expected REG or NOREG)");
  std::sort(variants.begin(), variants.end(),
            [](const auto& a, const auto& b) { return variant_rank(a.variant) < variant_rank(b.variant); });
  for (std::size_t i = 1; i < variants.size(); ++i)
    if (variants[i].variant == variants[i - 1].variant)
      throw std::invalid_argument("variant " + variants[i].variant + " appears twice in the report");
  EvalReport r;
  r.variants = std::move(variants);
  r.metadata = metadata.is_object() ? std::move(metadata) : nlohmann::json::object();
  return r;
}

EvalReport report_from_inputs(const std::vector<nlohmann::json>& inputs) {
  std::map<std::string, VariantMetrics> by;
  auto slot = [&](const std::string& v) -> VariantMetrics& {
    variant_rank(v);
    auto& m = by[v];
    m.variant = v;
    return m;
  };
  for (const auto& doc : inputs) {
    const std::string kind = doc.value("kind", "");
    if (kind == "inception_score") {
      auto& m = slot(doc.at("variant").get<std::string>());
      m.inception = inception_result_from_json(doc.at("result"));
      if (doc.contains("metadata")) m.metadata["inception"] = doc["metadata"];
    } else if (kind == "ms_ssim") {
      auto& m = slot(doc.at("variant").get<std::string>());
      m.ms_ssim = ms_ssim_result_from_json(doc.at("result"));
      if (doc.contains("metadata")) m.metadata["ms_ssim"] = doc["metadata"];
    } else if (kind == "human_ranking") {
      auto summary = ranking::summary_from_json(doc);
      for (const auto& [name, v] : summary.variants) {
        if (name == "REAL") continue;
        auto& m = slot(name);
        m.human = v;
        m.metadata["human_ranking"] = {{"sheet_id", summary.sheet_id}};
      }
    } else if (kind == "report") {
      for (auto& v : report_from_json(doc).variants) {
        auto& m = slot(v.variant);
        if (v.inception) m.inception = v.inception;
        if (v.ms_ssim) m.ms_ssim = v.ms_ssim;
        if (v.human) m.human = v.human;
        m.metadata.update(v.metadata);
      }
    } else {
      throw std::invalid_argument("unrecognized report input kind '" + kind + "'");
    }
  }
  std::vector<VariantMetrics> vs;
  for (auto& [_, m] : by) vs.push_back(std::move(m));
  return build_report(std::move(vs));
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json variants = nlohmann::json::object();
  for (const auto& v : r.variants)
    variants[v.variant] = {{"inception_score", v.inception ? to_json(*v.inception) : nlohmann::json(nullptr)},
                           {"ms_ssim", v.ms_ssim ? to_json(*v.ms_ssim) : nlohmann::json(nullptr)},
                           {"human_ranking", v.human ? human_json(*v.human) : nlohmann::json(nullptr)},
                           {"metadata", v.metadata}};
  nlohmann::json refs = nlohmann::json::object();
  for (const auto& ref : reference_values())
    refs[ref.variant] = {{"inception_score", {{"mean", ref.is_mean}, {"std", ref.is_std}}},
                         {"ms_ssim", ref.ms_ssim},
                         {"human_ranking", {{"q1", ref.human[0]}, {"q2", ref.human[1]}, {"q3", ref.human[2]}}}};
  return {{"kind", "report"}, {"version", r.version}, {"variants", variants}, {"reference", refs},
          {"metadata", r.metadata}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  if (!j.contains("version")) throw std::invalid_argument("report has no version field");
  const int version = j.at("version").get<int>();
  if (version != kReportVersion)
    throw std::invalid_argument("report version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kReportVersion) + ")");
  std::vector<VariantMetrics> vs;
  for (auto it = j.at("variants").begin(); it != j.at("variants").end(); ++it) {
    VariantMetrics m;
    m.variant = it.key();
    const auto& v = it.value();
    if (!v.at("inception_score").is_null()) m.inception = inception_result_from_json(v["inception_score"]);
    if (!v.at("ms_ssim").is_null()) m.ms_ssim = ms_ssim_result_from_json(v["ms_ssim"]);
    if (!v.at("human_ranking").is_null()) m.human = human_from_json(v["human_ranking"]);
    m.metadata = v.value("metadata", nlohmann::json::object());
    vs.push_back(std::move(m));
  }
  return build_report(std::move(vs), j.value("metadata", nlohmann::json::object()));
}

Better compare(const std::optional<double>& a, const std::optional<double>& b, bool higher_is_better) {
  if (!a || !b || *a == *b) return Better::kNone;
  return (*a > *b) == higher_is_better ? Better::kFirst : Better::kSecond;
}

namespace {

struct Row {
  std::string metric;
  std::string sub;
  std::vector<std::optional<double>> values;
  std::vector<std::string> text;
  bool higher_is_better;
};

std::vector<std::string> mark(const Row& row) {
  std::vector<std::string> cells;
  for (std::size_t i = 0; i < row.values.size(); ++i) cells.push_back(row.values[i] ? row.text[i] : "absent");
  if (row.values.size() == 2) {
    switch (compare(row.values[0], row.values[1], row.higher_is_better)) {
      case Better::kFirst: cells[0] = "**" + cells[0] + "**"; break;
      case Better::kSecond: cells[1] = "**" + cells[1] + "**"; break;
      case Better::kNone: break;
    }
  }
  return cells;
}

std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    os << "|";
    for (std::size_t c = 0; c < cells.size(); ++c) os << " " << cells[c] << std::string(width[c] - cells[c].size(), ' ') << " |";
    os << "\n";
  };
  line(header);
  os << "|";
  for (auto w : width) os << std::string(w + 2, '-') << "|";
  os << "\n";
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string tables(const std::vector<std::string>& names, const std::vector<Row>& t1, const std::vector<Row>& t2) {
  std::ostringstream os;
  std::vector<std::string> h1 = {"Metric", ""};
  h1.insert(h1.end(), names.begin(), names.end());
  std::vector<std::vector<std::string>> r1;
  for (const auto& row : t1) {
    std::vector<std::string> cells = {row.metric, row.sub};
    auto m = mark(row);
    cells.insert(cells.end(), m.begin(), m.end());
    r1.push_back(cells);
  }
  os << "Inception score and human ranking\n" << render_grid(h1, r1) << "\n";
  std::vector<std::vector<std::string>> r2;
  for (const auto& row : t2) {
    auto m = mark(row);
    for (std::size_t i = 0; i < names.size(); ++i) r2.push_back({names[i], m[i]});
  }
  os << "MS-SSIM (lower is more diverse)\n" << render_grid({"Embedding", "MS-SSIM"}, r2);
  return os.str();
}

}  // namespace

std::string render_tables(const EvalReport& r, bool with_reference) {
  std::vector<std::string> names;
  for (const auto& v : r.variants) names.push_back(v.variant);

  Row is{"Inception Score", "", {}, {}, true};
  std::array<Row, 4> hr = {Row{"Human Ranking", "Q1", {}, {}, true}, Row{"", "Q2", {}, {}, true},
                           Row{"", "Q3", {}, {}, true}, Row{"", "Overall", {}, {}, true}};
  Row ms{"MS-SSIM", "", {}, {}, false};
  for (const auto& v : r.variants) {
    is.values.push_back(v.inception ? std::optional<double>(v.inception->mean) : std::nullopt);
    is.text.push_back(v.inception ? fmt(v.inception->mean) + " +- " + fmt(v.inception->std) : "");
    for (int q = 0; q < 4; ++q) {
      std::optional<double> val;
      if (v.human) val = q < 3 ? v.human->question_mean[q] : v.human->overall;
      hr[q].values.push_back(val);
      hr[q].text.push_back(val ? fmt(*val) : "");
    }
    ms.values.push_back(v.ms_ssim ? std::optional<double>(v.ms_ssim->mean) : std::nullopt);
    ms.text.push_back(v.ms_ssim ? fmt(v.ms_ssim->mean) : "");
  }
  std::ostringstream os;
  os << "Evaluation report (version " << r.version << ")\n\n";
  os << tables(names, {is, hr[0], hr[1], hr[2], hr[3]}, {ms});

  if (with_reference) {
    std::vector<std::string> rn;
    Row ris{"Inception Score", "", {}, {}, true};
    std::array<Row, 3> rhr = {Row{"Human Ranking", "Q1", {}, {}, true}, Row{"", "Q2", {}, {}, true},
                              Row{"", "Q3", {}, {}, true}};
    Row rms{"MS-SSIM", "", {}, {}, false};
    for (const auto& ref : reference_values()) {
      rn.push_back(ref.variant);
      ris.values.push_back(ref.is_mean);
      ris.text.push_back(fmt(ref.is_mean) + " +- " + fmt(ref.is_std));
      for (int q = 0; q < 3; ++q) {
        rhr[q].values.push_back(ref.human[q]);
        rhr[q].text.push_back(fmt(ref.human[q]));
      }
      rms.values.push_back(ref.ms_ssim);
      rms.text.push_back(fmt(ref.ms_ssim));
    }
    os << "\nReference values (full-scale published run, not reproduced here)\n\n";
    os << tables(rn, {ris, rhr[0], rhr[1], rhr[2]}, {rms});
  }
  return os.str();
}

}  // namespace r2i::eval
