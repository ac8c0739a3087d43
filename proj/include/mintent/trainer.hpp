#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mintent/data.hpp"
#include "mintent/eval.hpp"
#include "mintent/execution.hpp"
#include "mintent/model.hpp"
#include "mintent/optimizer.hpp"

namespace mintent {

// One (user, chronological prefix, target) training example.
struct TrainingInstance {
  UserId user = 0;
  std::vector<ItemId> prefix;
  ItemId target = 0;
};

// Every train-marked interaction after the first becomes a target whose input is the
// preceding train items, capped at the most recent `max_prefix`.
std::vector<TrainingInstance> build_instances(const SpanDataset& span, int max_prefix);

struct BatchGradients {
  Matrix embeddings;  // num_items x d, zero outside the batch's items
  Matrix extractor;
  std::vector<std::pair<UserId, Matrix>> queries;  // self-attention only, ascending user
  double loss = 0.0;     // mean over the batch
  double ss_loss = 0.0;
  double kd_loss = 0.0;
};

// Mean gradient of L_SS + lambda * L_KD over the batch. Distillation is applied to
// users whose bank carries a teacher snapshot when `distill` is set.
BatchGradients compute_gradients(std::span<const TrainingInstance> batch,
                                 std::span<const std::vector<ItemId>> negatives, const ModelParams& model,
                                 const Banks& banks, const RunConfig& cfg, bool distill,
                                 Execution exec = Execution::parallel);

// Mean objective only; used by finite-difference checks and loss-decrease tests.
double batch_loss(std::span<const TrainingInstance> batch, std::span<const std::vector<ItemId>> negatives,
                  const ModelParams& model, const Banks& banks, const RunConfig& cfg, bool distill);

// Intents of one user extracted from `items` with the current parameters.
Matrix extract_user(const ModelParams& model, const IntentBank& bank, std::span<const ItemId> items,
                    const RunConfig& cfg);

Matrix gather_rows(const Matrix& table, std::span<const ItemId> ids);

// Spans with holdout marks, ready for run_timeline.
struct Timeline {
  std::vector<SpanDataset> spans;  // span 0 plus cfg.spans incremental spans
  std::size_t num_users = 0;       // largest user id + 1
  std::size_t num_items = 0;       // largest item id + 1
};

// Drops users below cfg.min_interactions, splits into spans and marks holdouts.
Timeline prepare_timeline(const std::vector<Interaction>& interactions, const RunConfig& cfg);

struct TimelineState {
  RunConfig config;
  ModelParams model;
  OptimizerState optimizer;
  Banks banks;
  int completed_span = -1;  // last span whose training finished
  std::vector<SpanReport> reports;
};

TimelineState start_timeline(const RunConfig& cfg, std::size_t num_users, std::size_t num_items);

// Applies one Adam step to shared parameters and every per-user query matrix.
// Returns false (and changes nothing) when a gradient is non-finite.
bool apply_gradients(TimelineState& state, const BatchGradients& grads);

// Items seen in spans [0, last].
std::vector<ItemId> item_universe(std::span<const SpanDataset> spans, int last);

// Trains span 0 from fresh banks with the sampled-softmax loss only.
SpanReport pretrain(TimelineState& state, std::span<const SpanDataset> spans, Execution exec = Execution::parallel);

// One incremental span t >= 1: gate/expand, train, trim, score, cap, snapshot.
SpanReport incremental_step(TimelineState& state, std::span<const SpanDataset> spans, int t,
                            Execution exec = Execution::parallel);

struct TimelineHooks {
  // Called after each span's training and evaluation (span 0 included).
  std::function<void(const TimelineState&)> on_span_end;
};

// Pretrains on span 0 (unless `state` already covers it) and then, for t = 1..T-1,
// trains on span t and evaluates on span t+1. Returns one report per evaluated span.
std::vector<SpanReport> run_timeline(std::span<const SpanDataset> spans, TimelineState& state,
                                     const TimelineHooks& hooks = {}, Execution exec = Execution::parallel);

}  // namespace mintent
