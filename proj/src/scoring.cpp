#include "mintent/scoring.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace mintent {

std::vector<double> aggregate(const Matrix& intents, std::span<const double> query, std::vector<double>* weights) {
  assert(intents.rows() >= 1);
  std::vector<double> beta(intents.rows());
  for (std::size_t k = 0; k < intents.rows(); ++k) beta[k] = dot(query, intents.row(k));
  softmax_inplace(beta);
  std::vector<double> v(intents.cols(), 0.0);
  for (std::size_t k = 0; k < intents.rows(); ++k) axpy(beta[k], intents.row(k), v);
  if (weights) *weights = std::move(beta);
  return v;
}

double sampled_softmax_from_logits(double target_logit, std::span<const double> negative_logits) {
  double mx = target_logit;
  for (double z : negative_logits) mx = std::max(mx, z);
  double sum = std::exp(target_logit - mx);
  for (double z : negative_logits) sum += std::exp(z - mx);
  return -(target_logit - mx) + std::log(sum);
}

double sampled_softmax_loss(const Matrix& intents, std::span<const double> target, const Matrix& negatives) {
  assert(negatives.rows() >= 1);
  const auto v = aggregate(intents, target);
  std::vector<double> neg(negatives.rows());
  for (std::size_t j = 0; j < negatives.rows(); ++j) neg[j] = dot(v, negatives.row(j));
  return sampled_softmax_from_logits(dot(v, target), neg);
}

double candidate_score(const Matrix& intents, std::span<const double> item, ScoreMode mode) {
  if (mode == ScoreMode::max) {
    double best = dot(intents.row(0), item);
    for (std::size_t k = 1; k < intents.rows(); ++k) best = std::max(best, dot(intents.row(k), item));
    return best;
  }
  return dot(aggregate(intents, item), item);
}

std::vector<ScoredItem> top_n(std::span<const ItemId> ids, std::span<const double> scores, std::size_t n) {
  assert(ids.size() == scores.size());
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
  std::vector<ScoredItem> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {ids[order[i]], scores[order[i]]};
  return out;
}

std::vector<ScoredItem> rank_items(const Matrix& intents, std::span<const ItemId> candidates, const Matrix& table,
                                   ScoreMode mode, std::size_t n) {
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = candidate_score(intents, table.row(static_cast<std::size_t>(candidates[i])), mode);
  }
  return top_n(candidates, scores, n);
}

}  // namespace mintent
