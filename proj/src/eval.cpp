#include "mintent/eval.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "mintent/errors.hpp"

namespace mintent {

int max_threads() { return omp_get_max_threads(); }

HitNdcg metrics_from_rank(std::size_t rank, int k) {
  if (rank >= 1 && rank <= static_cast<std::size_t>(k)) {
    return {1.0, 1.0 / std::log2(static_cast<double>(rank) + 1.0)};
  }
  return {0.0, 0.0};
}

HitNdcg hr_ndcg_at_k(std::span<const ItemId> ranked, ItemId target, int k) {
  const auto it = std::find(ranked.begin(), ranked.end(), target);
  if (it == ranked.end()) throw DataError("target item " + std::to_string(target) + " is not in the candidate universe");
  return metrics_from_rank(static_cast<std::size_t>(it - ranked.begin()) + 1, k);
}

std::size_t target_rank(std::span<const ItemId> ids, std::span<const double> scores, ItemId target) {
  std::size_t pos = ids.size();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == target) {
      pos = i;
      break;
    }
  }
  if (pos == ids.size()) throw DataError("target item " + std::to_string(target) + " is not in the candidate universe");
  const double s = scores[pos];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && ids[i] < target)) ++ahead;
  }
  return ahead + 1;
}

EvalResult evaluate_span(const ModelParams& model, const Banks& banks, const SpanDataset& test_span,
                         std::span<const ItemId> universe, int k, ScoreMode mode, Execution exec) {
  std::vector<bool> in_universe(model.num_items(), false);
  for (ItemId id : universe) in_universe[static_cast<std::size_t>(id)] = true;

  struct Case {
    UserId user;
    ItemId target;
  };
  EvalResult result;
  std::vector<Case> cases;
  for (const auto& seq : test_span.users) {
    const ItemId target = seq.target(Holdout::test);
    if (target < 0) continue;
    const bool has_bank = seq.user < static_cast<UserId>(banks.size()) && !banks[static_cast<std::size_t>(seq.user)].empty();
    const bool known = target < static_cast<ItemId>(model.num_items()) && in_universe[static_cast<std::size_t>(target)];
    if (!has_bank || !known) {
      ++result.excluded;
      continue;
    }
    cases.push_back({seq.user, target});
  }

  std::vector<HitNdcg> per_user(cases.size());
  auto run_case = [&](std::size_t c) {
    const auto& bank = banks[static_cast<std::size_t>(cases[c].user)];
    std::vector<double> scores(universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i) {
      scores[i] = candidate_score(bank.vectors, model.embeddings.row(static_cast<std::size_t>(universe[i])), mode);
    }
    per_user[c] = metrics_from_rank(target_rank(universe, scores, cases[c].target), k);
  };

  const auto n = static_cast<std::ptrdiff_t>(cases.size());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t c = 0; c < n; ++c) run_case(static_cast<std::size_t>(c));
  } else {
    for (std::ptrdiff_t c = 0; c < n; ++c) run_case(static_cast<std::size_t>(c));
  }

  result.users = cases.size();
  if (!cases.empty()) {
    double hr = 0.0, ndcg = 0.0;
    for (const auto& m : per_user) {
      hr += m.hr;
      ndcg += m.ndcg;
    }
    result.hr = hr / static_cast<double>(cases.size());
    result.ndcg = ndcg / static_cast<double>(cases.size());
  }
  for (const auto& c : cases) result.evaluated_users.push_back(c.user);
  result.per_user = std::move(per_user);
  return result;
}

}  // namespace mintent
