#pragma once

#include <span>
#include <vector>

#include "mintent/linalg.hpp"

namespace mintent {

enum class ScoreMode { attentive, max };

// v_u = sum_k beta_k h_k with beta = softmax_k(<e_a, h_k>). `weights` receives beta.
std::vector<double> aggregate(const Matrix& intents, std::span<const double> query,
                              std::vector<double>* weights = nullptr);

inline double score(std::span<const double> user, std::span<const double> item) { return dot(user, item); }

// -log( exp(z_target) / (exp(z_target) + sum_j exp(z_j)) ), max-subtracted.
double sampled_softmax_from_logits(double target_logit, std::span<const double> negative_logits);

// Sampled softmax with the target in the denominator. `negatives` holds one
// embedding per row and must be non-empty.
double sampled_softmax_loss(const Matrix& intents, std::span<const double> target, const Matrix& negatives);

// Preference score of one candidate under the given mode.
double candidate_score(const Matrix& intents, std::span<const double> item, ScoreMode mode);

struct ScoredItem {
  ItemId item = 0;
  double score = 0.0;
  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

// Top-N of (ids[i], scores[i]) by descending score, ties by ascending id.
std::vector<ScoredItem> top_n(std::span<const ItemId> ids, std::span<const double> scores, std::size_t n);

// Scores every candidate row of `table` named in `candidates` and returns the top N.
std::vector<ScoredItem> rank_items(const Matrix& intents, std::span<const ItemId> candidates, const Matrix& table,
                                   ScoreMode mode, std::size_t n);

}  // namespace mintent
