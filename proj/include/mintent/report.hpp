#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mintent/eval.hpp"
#include "mintent/model.hpp"

namespace mintent {

// One row of metrics.csv.
struct MetricsRow {
  int span = 0;
  std::string strategy;
  std::optional<double> hr;
  std::optional<double> ndcg;
  std::size_t users = 0;
  double mean_k = 0.0;
  std::size_t max_k = 0;
  std::optional<double> seconds;  // blank unless timing was recorded
};

MetricsRow to_row(const SpanReport& r, bool with_seconds);

// Columns: span,strategy,hr20,ndcg20,users,mean_k,max_k,seconds. Absent metrics are
// written as empty fields.
std::string metrics_csv(const std::vector<SpanReport>& reports, bool with_seconds);
nlohmann::ordered_json metrics_json(const std::vector<SpanReport>& reports, const RunConfig& cfg);

nlohmann::ordered_json to_json(const SpanReport& r);
SpanReport span_report_from_json(const nlohmann::json& j);

std::vector<MetricsRow> parse_metrics_csv(const std::string& text);  // throws ParseError
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// Relative improvement of mean(hr, ndcg) over the baseline's, as a fraction.
double relative_improvement(double hr, double ndcg, double base_hr, double base_ndcg);

// Joins runs (each one strategy) by span: one row per span per run, ordered by span
// and then input order, with an RI column (percent) against `baseline` when given.
std::string comparison_csv(const std::vector<std::vector<MetricsRow>>& runs, const std::optional<std::string>& baseline);

void write_text_file(const std::filesystem::path& path, const std::string& text);  // throws IoError

}  // namespace mintent
