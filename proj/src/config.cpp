#include "mintent/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mintent/errors.hpp"

namespace mintent {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// JSON has no infinities; thresholds accept "inf"/"-inf" strings and are written the same way.
ordered_json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_double(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError("config key '" + key + "' must be a number");
}

int read_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t read_seed(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

bool read_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
}

}  // namespace

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["extractor"] = to_string(c.extractor);
  j["strategy"] = to_string(c.strategy);
  j["dim"] = c.dim;
  j["attention_dim"] = c.attention_dim;
  j["routing_iterations"] = c.routing_iterations;
  j["embedding_init"] = c.embedding_init;
  j["extractor_init"] = c.extractor_init;
  j["k0"] = c.lifecycle.k0;
  j["delta_k"] = c.lifecycle.delta_k;
  j["theta_nid"] = number_or_inf(c.lifecycle.theta_nid);
  j["c2"] = c.lifecycle.c2;
  j["tau"] = c.lifecycle.tau;
  j["lambda_kd"] = c.lifecycle.lambda_kd;
  j["k_max"] = c.lifecycle.k_max;
  j["lr"] = c.lr;
  j["negatives"] = c.negatives;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["batch_size"] = c.batch_size;
  j["max_prefix"] = c.max_prefix;
  j["eval_k"] = c.eval_k;
  j["eval_mode"] = to_string(c.eval_mode);
  j["seed"] = c.seed;
  j["spans"] = c.spans;
  j["alpha"] = c.alpha;
  j["min_interactions"] = c.min_interactions;
  j["record_timing"] = c.record_timing;
  return j;
}

ordered_json to_json(const SyntheticSpec& s) {
  ordered_json j;
  j["num_users"] = s.num_users;
  j["num_items"] = s.num_items;
  j["num_categories"] = s.num_categories;
  j["spans"] = s.spans;
  j["interactions_per_user_per_span"] = s.interactions_per_user_per_span;
  j["p_new_category"] = s.p_new_category;
  j["p_drop_category"] = s.p_drop_category;
  j["seed"] = s.seed;
  j["dim"] = s.dim;
  j["noise"] = s.noise;
  j["span_seconds"] = s.span_seconds;
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  require_object(j, "run configuration");
  for (const auto& [key, v] : j.items()) {
    if (key == "extractor") c.extractor = parse_extractor(read_string(v, key));
    else if (key == "strategy") c.strategy = parse_strategy(read_string(v, key));
    else if (key == "dim") c.dim = read_int(v, key);
    else if (key == "attention_dim") c.attention_dim = read_int(v, key);
    else if (key == "routing_iterations") c.routing_iterations = read_int(v, key);
    else if (key == "embedding_init") c.embedding_init = read_double(v, key);
    else if (key == "extractor_init") c.extractor_init = read_double(v, key);
    else if (key == "k0") c.lifecycle.k0 = read_int(v, key);
    else if (key == "delta_k") c.lifecycle.delta_k = read_int(v, key);
    else if (key == "theta_nid") c.lifecycle.theta_nid = read_double(v, key);
    else if (key == "c2") c.lifecycle.c2 = read_double(v, key);
    else if (key == "tau") c.lifecycle.tau = read_double(v, key);
    else if (key == "lambda_kd") c.lifecycle.lambda_kd = read_double(v, key);
    else if (key == "k_max") c.lifecycle.k_max = read_int(v, key);
    else if (key == "lr") c.lr = read_double(v, key);
    else if (key == "negatives") c.negatives = read_int(v, key);
    else if (key == "epochs") c.epochs = read_int(v, key);
    else if (key == "patience") c.patience = read_int(v, key);
    else if (key == "batch_size") c.batch_size = read_int(v, key);
    else if (key == "max_prefix") c.max_prefix = read_int(v, key);
    else if (key == "eval_k") c.eval_k = read_int(v, key);
    else if (key == "eval_mode") c.eval_mode = parse_score_mode(read_string(v, key));
    else if (key == "seed") c.seed = read_seed(v, key);
    else if (key == "spans") c.spans = read_int(v, key);
    else if (key == "alpha") c.alpha = read_double(v, key);
    else if (key == "min_interactions") c.min_interactions = read_int(v, key);
    else if (key == "record_timing") c.record_timing = read_bool(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

SyntheticSpec synthetic_from_json(const json& j, SyntheticSpec s) {
  require_object(j, "\"synthetic\"");
  for (const auto& [key, v] : j.items()) {
    if (key == "num_users") s.num_users = read_int(v, key);
    else if (key == "num_items") s.num_items = read_int(v, key);
    else if (key == "num_categories") s.num_categories = read_int(v, key);
    else if (key == "spans") s.spans = read_int(v, key);
    else if (key == "interactions_per_user_per_span") s.interactions_per_user_per_span = read_int(v, key);
    else if (key == "p_new_category") s.p_new_category = read_double(v, key);
    else if (key == "p_drop_category") s.p_drop_category = read_double(v, key);
    else if (key == "seed") s.seed = read_seed(v, key);
    else if (key == "dim") s.dim = read_int(v, key);
    else if (key == "noise") s.noise = read_double(v, key);
    else if (key == "span_seconds") s.span_seconds = read_int(v, key);
    else throw ConfigError("unknown synthetic config key '" + key + "'");
  }
  return s;
}

ExperimentConfig parse_experiment_config(const json& j) {
  require_object(j, "config file");
  ExperimentConfig out;
  json run = json::object();
  for (const auto& [key, v] : j.items()) {
    if (key == "synthetic") out.synthetic = synthetic_from_json(v);
    else if (key == "data") out.data = read_string(v, key);
    else if (key == "out") out.out = read_string(v, key);
    else run[key] = v;
  }
  out.run = run_config_from_json(run);
  return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

std::vector<std::string> config_differences(const RunConfig& a, const RunConfig& b) {
  const auto ja = to_json(a);
  const auto jb = to_json(b);
  std::vector<std::string> out;
  for (const auto& [key, v] : ja.items()) {
    if (jb.at(key) != v) out.push_back(key);
  }
  return out;
}

}  // namespace mintent
