#include "mintent/model.hpp"

#include <cmath>

#include "mintent/errors.hpp"

namespace mintent {

std::string to_string(ExtractorKind kind) { return kind == ExtractorKind::dr ? "dr" : "sa"; }

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::ima: return "ima";
    case Strategy::ema_iir: return "ema_iir";
    case Strategy::ema_sic: return "ema_sic";
    case Strategy::ft: return "ft";
    case Strategy::fr: return "fr";
  }
  return "?";
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::attentive ? "attentive" : "max"; }

ExtractorKind parse_extractor(std::string_view name) {
  if (name == "dr") return ExtractorKind::dr;
  if (name == "sa") return ExtractorKind::sa;
  throw ConfigError("unknown extractor '" + std::string(name) + "' (expected dr or sa)");
}

Strategy parse_strategy(std::string_view name) {
  if (name == "ima") return Strategy::ima;
  if (name == "ema_iir") return Strategy::ema_iir;
  if (name == "ema_sic") return Strategy::ema_sic;
  if (name == "ft") return Strategy::ft;
  if (name == "fr") return Strategy::fr;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (expected ima, ema_iir, ema_sic, ft or fr)");
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "attentive") return ScoreMode::attentive;
  if (name == "max") return ScoreMode::max;
  throw ConfigError("unknown score mode '" + std::string(name) + "' (expected attentive or max)");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  lifecycle.validate();
  require(dim >= 2, "dim must be >= 2");
  require(attention_dim >= 1, "attention_dim must be >= 1");
  require(routing_iterations >= 1, "routing_iterations must be >= 1");
  require(embedding_init > 0.0 && extractor_init > 0.0, "init scales must be > 0");
  require(lr > 0.0, "lr must be > 0");
  require(negatives >= 1, "negatives must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(max_prefix >= 1, "max_prefix must be >= 1");
  require(eval_k >= 1, "eval_k must be >= 1");
  require(spans >= 2, "spans must be >= 2 (one incremental span plus one evaluation span)");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(min_interactions >= 1, "min_interactions must be >= 1");
  require(lifecycle.k_max >= lifecycle.k0 || strategy == Strategy::ima || strategy == Strategy::ft ||
              strategy == Strategy::fr,
          "k_max must be >= k0 for elastic strategies");
}

namespace {

void fill_gaussian(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, stddev);
  for (double& v : m.data()) v = to_float_precision(g(rng));
}

}  // namespace

ModelParams init_model(const RunConfig& cfg, std::size_t num_items, std::mt19937_64& rng) {
  ModelParams p;
  p.kind = cfg.extractor;
  const auto d = static_cast<std::size_t>(cfg.dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  p.embeddings = Matrix(num_items, d);
  fill_gaussian(p.embeddings, cfg.embedding_init * scale, rng);
  if (cfg.extractor == ExtractorKind::dr) {
    p.extractor = Matrix(d, d);
  } else {
    p.extractor = Matrix(static_cast<std::size_t>(cfg.attention_dim), d);
  }
  fill_gaussian(p.extractor, cfg.extractor_init * scale, rng);
  return p;
}

IntentBank init_bank(const RunConfig& cfg, int span, std::mt19937_64& rng) {
  IntentBank bank;
  const std::size_t attention_dim = cfg.extractor == ExtractorKind::sa ? static_cast<std::size_t>(cfg.attention_dim) : 0;
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  std::vector<double> h(static_cast<std::size_t>(cfg.dim));
  std::vector<double> q(attention_dim);
  for (int k = 0; k < cfg.lifecycle.k0; ++k) {
    for (double& v : h) v = to_float_precision(g(rng));
    if (attention_dim > 0) {
      std::normal_distribution<double> qg(0.0, 1.0 / std::sqrt(static_cast<double>(attention_dim)));
      for (double& v : q) v = to_float_precision(qg(rng));
    }
    bank.append_intent(h, span, q);
  }
  return bank;
}

std::mt19937_64 derive_rng(std::uint64_t seed, int span, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(span), static_cast<std::uint32_t>(purpose),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace mintent
