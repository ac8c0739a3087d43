#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mintent/data.hpp"
#include "mintent/execution.hpp"
#include "mintent/model.hpp"
#include "mintent/scoring.hpp"

namespace mintent {

struct HitNdcg {
  double hr = 0.0;
  double ndcg = 0.0;
};

// 1-based rank -> (hit, 1/log2(rank+1)) inside the cutoff, (0, 0) outside.
HitNdcg metrics_from_rank(std::size_t rank, int k);

// `ranked` is the full ordering of the candidate universe. Throws DataError when the
// target is not part of it.
HitNdcg hr_ndcg_at_k(std::span<const ItemId> ranked, ItemId target, int k);

// 1-based position the target would take in rank_items' ordering, without sorting.
std::size_t target_rank(std::span<const ItemId> ids, std::span<const double> scores, ItemId target);

struct SpanReport {
  int span = 0;
  std::string strategy;
  std::optional<double> hr;    // absent when no user could be evaluated
  std::optional<double> ndcg;
  std::size_t users = 0;       // users evaluated
  std::size_t excluded = 0;    // users with a test target but no bank or an unseen target item
  double mean_k = 0.0;
  std::size_t max_k = 0;
  std::size_t max_k_before_cap = 0;
  double seconds = 0.0;

  // Lifecycle activity during the training span.
  std::size_t gated_users = 0;
  std::size_t expanded_users = 0;
  std::size_t trimmed_intents = 0;
  std::size_t removed_intents = 0;
  std::size_t skipped_batches = 0;
  std::vector<UserId> fired;  // users whose new-intent gate fired this span
  double train_loss = 0.0;
  int epochs_run = 0;
};

struct EvalResult {
  std::optional<double> hr;
  std::optional<double> ndcg;
  std::size_t users = 0;
  std::size_t excluded = 0;
  std::vector<UserId> evaluated_users;
  std::vector<HitNdcg> per_user;
};

// Ranks `universe` for every user in `test_span` that has a test target and a bank,
// using the bank as the user's intents. Users whose target lies outside the universe
// or who have no bank are excluded and counted.
EvalResult evaluate_span(const ModelParams& model, const Banks& banks, const SpanDataset& test_span,
                         std::span<const ItemId> universe, int k, ScoreMode mode,
                         Execution exec = Execution::parallel);

}  // namespace mintent
