#include "mintent/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mintent/config.hpp"
#include "mintent/errors.hpp"

namespace mintent {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string optional_fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

const char* kHeader = "span,strategy,hr20,ndcg20,users,mean_k,max_k,seconds";

}  // namespace

MetricsRow to_row(const SpanReport& r, bool with_seconds) {
  MetricsRow row;
  row.span = r.span;
  row.strategy = r.strategy;
  row.hr = r.hr;
  row.ndcg = r.ndcg;
  row.users = r.users;
  row.mean_k = r.mean_k;
  row.max_k = r.max_k;
  if (with_seconds) row.seconds = r.seconds;
  return row;
}

std::string metrics_csv(const std::vector<SpanReport>& reports, bool with_seconds) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : reports) {
    const auto row = to_row(r, with_seconds);
    out += std::to_string(row.span) + "," + row.strategy + "," + optional_fixed(row.hr, 6) + "," +
           optional_fixed(row.ndcg, 6) + "," + std::to_string(row.users) + "," + fixed(row.mean_k, 4) + "," +
           std::to_string(row.max_k) + "," + optional_fixed(row.seconds, 3) + "\n";
  }
  return out;
}

ordered_json to_json(const SpanReport& r) {
  ordered_json j;
  j["span"] = r.span;
  j["strategy"] = r.strategy;
  j["hr20"] = optional_json(r.hr);
  j["ndcg20"] = optional_json(r.ndcg);
  j["users"] = r.users;
  j["excluded"] = r.excluded;
  j["mean_k"] = r.mean_k;
  j["max_k"] = r.max_k;
  j["max_k_before_cap"] = r.max_k_before_cap;
  j["seconds"] = r.seconds;
  j["gated_users"] = r.gated_users;
  j["expanded_users"] = r.expanded_users;
  j["trimmed_intents"] = r.trimmed_intents;
  j["removed_intents"] = r.removed_intents;
  j["skipped_batches"] = r.skipped_batches;
  j["fired"] = r.fired;
  j["train_loss"] = r.train_loss;
  j["epochs_run"] = r.epochs_run;
  return j;
}

SpanReport span_report_from_json(const json& j) {
  SpanReport r;
  r.span = j.at("span").get<int>();
  r.strategy = j.at("strategy").get<std::string>();
  if (!j.at("hr20").is_null()) r.hr = j.at("hr20").get<double>();
  if (!j.at("ndcg20").is_null()) r.ndcg = j.at("ndcg20").get<double>();
  r.users = j.at("users").get<std::size_t>();
  r.excluded = j.at("excluded").get<std::size_t>();
  r.mean_k = j.at("mean_k").get<double>();
  r.max_k = j.at("max_k").get<std::size_t>();
  r.max_k_before_cap = j.at("max_k_before_cap").get<std::size_t>();
  r.seconds = j.at("seconds").get<double>();
  r.gated_users = j.at("gated_users").get<std::size_t>();
  r.expanded_users = j.at("expanded_users").get<std::size_t>();
  r.trimmed_intents = j.at("trimmed_intents").get<std::size_t>();
  r.removed_intents = j.at("removed_intents").get<std::size_t>();
  r.skipped_batches = j.at("skipped_batches").get<std::size_t>();
  r.fired = j.at("fired").get<std::vector<UserId>>();
  r.train_loss = j.at("train_loss").get<double>();
  r.epochs_run = j.at("epochs_run").get<int>();
  return r;
}

ordered_json metrics_json(const std::vector<SpanReport>& reports, const RunConfig& cfg) {
  ordered_json j;
  j["config"] = to_json(cfg);
  ordered_json spans = ordered_json::array();
  double hr = 0.0, ndcg = 0.0;
  std::size_t counted = 0;
  for (const auto& r : reports) {
    ordered_json row = to_json(r);
    if (!cfg.record_timing) row["seconds"] = nullptr;
    spans.push_back(std::move(row));
    if (r.hr && r.ndcg) {
      hr += *r.hr;
      ndcg += *r.ndcg;
      ++counted;
    }
  }
  j["spans"] = std::move(spans);
  j["mean_hr20"] = counted ? ordered_json(hr / static_cast<double>(counted)) : ordered_json(nullptr);
  j["mean_ndcg20"] = counted ? ordered_json(ndcg / static_cast<double>(counted)) : ordered_json(nullptr);
  return j;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw ParseError("metrics file does not start with '" + std::string(kHeader) + "'");
  std::vector<MetricsRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw ParseError("metrics line " + std::to_string(number) + ": expected 8 fields");
    MetricsRow r;
    try {
      r.span = std::stoi(f[0]);
      r.users = std::stoul(f[4]);
      r.max_k = std::stoul(f[6]);
    } catch (const std::exception&) {
      throw ParseError("metrics line " + std::to_string(number) + ": bad integer field");
    }
    r.strategy = f[1];
    r.hr = parse_optional(f[2], number);
    r.ndcg = parse_optional(f[3], number);
    r.mean_k = parse_optional(f[5], number).value_or(0.0);
    r.seconds = parse_optional(f[7], number);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open metrics file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics_csv(buf.str());
}

double relative_improvement(double hr, double ndcg, double base_hr, double base_ndcg) {
  const double base = 0.5 * (base_hr + base_ndcg);
  if (base == 0.0) throw DataError("baseline HR and NDCG are both zero; relative improvement is undefined");
  return (0.5 * (hr + ndcg) - base) / base;
}

std::string comparison_csv(const std::vector<std::vector<MetricsRow>>& runs, const std::optional<std::string>& baseline) {
  if (runs.empty()) throw ConfigError("report needs at least one metrics file");
  std::vector<std::string> labels;
  for (const auto& run : runs) {
    if (run.empty()) throw DataError("metrics file has no rows");
    const std::string& label = run.front().strategy;
    for (const auto& l : labels) {
      if (l == label) throw ConfigError("two inputs share the strategy label '" + label + "'");
    }
    labels.push_back(label);
  }
  const std::vector<MetricsRow>* base = nullptr;
  if (baseline) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (labels[i] == *baseline) base = &runs[i];
    }
    if (!base) throw ConfigError("baseline '" + *baseline + "' is not among the inputs");
  }
  std::map<int, std::vector<std::pair<std::size_t, const MetricsRow*>>> by_span;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& row : runs[i]) by_span[row.span].emplace_back(i, &row);
  }

  std::string out = "span,strategy,hr20,ndcg20";
  if (base) out += ",ri_vs_" + *baseline + "_pct";
  out += "\n";
  for (const auto& [span, rows] : by_span) {
    const MetricsRow* ref = nullptr;
    if (base) {
      for (const auto& r : *base) {
        if (r.span == span) ref = &r;
      }
    }
    for (const auto& [run, row] : rows) {
      out += std::to_string(span) + "," + row->strategy + "," + optional_fixed(row->hr, 6) + "," +
             optional_fixed(row->ndcg, 6);
      if (base) {
        out += ",";
        if (ref && ref->hr && ref->ndcg && row->hr && row->ndcg && (*ref->hr + *ref->ndcg) > 0.0) {
          out += fixed(100.0 * relative_improvement(*row->hr, *row->ndcg, *ref->hr, *ref->ndcg), 4);
        }
      }
      out += "\n";
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mintent
