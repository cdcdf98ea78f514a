#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/eval/inception.hpp"
#include "r2i/eval/msssim.hpp"
#include "r2i/ranking/ranking.hpp"

namespace r2i::eval {

inline constexpr int kReportVersion = 1;

struct VariantMetrics {
  std::string variant;  // "REG" or "NOREG"
  std::optional<InceptionScoreResult> inception;
  std::optional<MsSsimResult> ms_ssim;
  std::optional<ranking::VariantRanking> human;
  nlohmann::json metadata = nlohmann::json::object();  // checkpoints, seeds, image dirs
};

/// Full-scale published values kept next to desk results for comparison.
struct ReferenceValues {
  std::string variant;
  double is_mean;
  double is_std;
  double ms_ssim;
  std::array<double, 3> human;
};

const std::vector<ReferenceValues>& reference_values();

struct EvalReport {
  int version = kReportVersion;
  std::vector<VariantMetrics> variants;  // REG before NOREG
  nlohmann::json metadata = nlohmann::json::object();
};

/// Needs at least one variant; names must be exactly REG or NOREG and unique.
EvalReport build_report(std::vector<VariantMetrics> variants, nlohmann::json metadata = nlohmann::json::object());

/// Merges outputs of evaluate-is ("inception_score"), evaluate-msssim
/// ("ms_ssim") and ranking-aggregate ("human_ranking") documents by variant.
EvalReport report_from_inputs(const std::vector<nlohmann::json>& inputs);

nlohmann::json to_json(const EvalReport& r);
/// Rejects documents without a version field or with another version.
EvalReport report_from_json(const nlohmann::json& j);

enum class Better { kNone, kFirst, kSecond };
/// Higher IS / HR is better, lower MS-SSIM is better; ties and missing values mark nothing.
Better compare(const std::optional<double>& a, const std::optional<double>& b, bool higher_is_better);

/// Two plain-text tables: IS and human ranking by variant, then MS-SSIM by
/// variant. The better value in each row is wrapped in ** **; missing cells
/// read "absent". Reference values follow when `with_reference` is set.
std::string render_tables(const EvalReport& r, bool with_reference = true);

}  // namespace r2i::eval
