#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mintent/bank.hpp"
#include "mintent/extractor.hpp"
#include "mintent/lifecycle.hpp"
#include "mintent/linalg.hpp"
#include "mintent/scoring.hpp"

namespace mintent {

enum class ExtractorKind { dr, sa };
enum class Strategy { ima, ema_iir, ema_sic, ft, fr };

std::string to_string(ExtractorKind kind);
std::string to_string(Strategy strategy);
std::string to_string(ScoreMode mode);
ExtractorKind parse_extractor(std::string_view name);  // throws ConfigError
Strategy parse_strategy(std::string_view name);
ScoreMode parse_score_mode(std::string_view name);

struct RunConfig {
  ExtractorKind extractor = ExtractorKind::dr;
  Strategy strategy = Strategy::ima;
  int dim = 64;
  int attention_dim = 16;
  int routing_iterations = 3;
  // Initial entries are N(0, (scale)^2 / d) for item embeddings and the shared extractor.
  double embedding_init = 1.0;
  double extractor_init = 1.0;
  LifecycleConfig lifecycle;
  double lr = 1e-3;
  int negatives = 10;
  int epochs = 10;
  int patience = 3;
  int batch_size = 128;
  int max_prefix = 50;
  int eval_k = 20;
  ScoreMode eval_mode = ScoreMode::attentive;
  std::uint64_t seed = 1;

  // Timeline construction.
  int spans = 6;
  double alpha = 0.5;
  int min_interactions = 30;

  // Wall-clock columns make output files differ between runs, so they are opt-in.
  bool record_timing = false;

  void validate() const;  // throws ConfigError

  bool expands() const { return strategy != Strategy::ft; }
  bool distills() const { return strategy != Strategy::ft && strategy != Strategy::fr; }
};

// Shared trainable parameters. Values are held at float32 precision by the
// optimizer so that checkpoints reproduce them exactly.
struct ModelParams {
  ExtractorKind kind = ExtractorKind::dr;
  Matrix embeddings;  // num_items x d
  Matrix extractor;   // DR: W (d x d); SA: W1 (d_a x d)

  std::size_t num_items() const { return embeddings.rows(); }
  std::size_t dim() const { return embeddings.cols(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams init_model(const RunConfig& cfg, std::size_t num_items, std::mt19937_64& rng);

// Fresh bank with cfg.lifecycle.k0 intents drawn from N(0, I/d) created at `span`.
IntentBank init_bank(const RunConfig& cfg, int span, std::mt19937_64& rng);

// Banks indexed by user id; an empty bank means the user has not been seen yet.
using Banks = std::vector<IntentBank>;

// Deterministic RNG for one (seed, span, purpose, index) tuple, so that resumed runs
// draw the same numbers as uninterrupted ones.
std::mt19937_64 derive_rng(std::uint64_t seed, int span, std::uint64_t purpose, std::uint64_t index = 0);

}  // namespace mintent
