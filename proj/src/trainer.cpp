#include "mintent/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "mintent/errors.hpp"
#include "mintent/objective.hpp"

namespace mintent {

namespace {

// Purposes for derive_rng; part of the reproducibility contract, do not renumber.
enum Purpose : std::uint64_t {
  kInitModel = 1,
  kInitBank = 2,
  kExpand = 3,
  kShuffle = 4,
  kNegatives = 5,
};

bool is_sa(const ModelParams& model) { return model.kind == ExtractorKind::sa; }

// DR: W e. SA: tanh(W1 e).
void item_features(const ModelParams& model, std::span<const double> e, std::span<double> out) {
  matvec(model.extractor, e, out);
  if (is_sa(model)) {
    for (double& v : out) v = std::tanh(v);
  }
}

Matrix features_of(const ModelParams& model, const Matrix& items) {
  Matrix out(items.rows(), model.extractor.rows());
  for (std::size_t i = 0; i < items.rows(); ++i) item_features(model, items.row(i), out.row(i));
  return out;
}

std::span<const ItemId> recent(std::span<const ItemId> items, int max_prefix) {
  const auto cap = static_cast<std::size_t>(max_prefix);
  return items.size() > cap ? items.subspan(items.size() - cap) : items;
}

std::vector<double> teacher_logits(const IntentBank& bank, std::span<const double> target, bool distill) {
  std::vector<double> out;
  if (!distill) return out;
  out.reserve(bank.prev_vectors.rows());
  for (std::size_t k = 0; k < bank.prev_vectors.rows(); ++k) out.push_back(dot(bank.prev_vectors.row(k), target));
  return out;
}

ObjectiveWeights weights_for(const RunConfig& cfg, bool distill) {
  return {distill ? cfg.lifecycle.lambda_kd : 0.0, cfg.lifecycle.tau};
}

const IntentBank& bank_of(const Banks& banks, UserId user) {
  if (user < 0 || static_cast<std::size_t>(user) >= banks.size() || banks[static_cast<std::size_t>(user)].empty()) {
    throw DataError("user " + std::to_string(user) + " has no intent bank");
  }
  return banks[static_cast<std::size_t>(user)];
}

struct InstanceGrad {
  double loss = 0.0, ss = 0.0, kd = 0.0;
  Matrix d_features;  // n x feature dim
  Matrix d_items;     // SA only: n x d through H = E A
  std::vector<double> d_target;
  Matrix d_negatives;
  Matrix d_queries;   // SA only
};

}  // namespace

std::vector<TrainingInstance> build_instances(const SpanDataset& span, int max_prefix) {
  std::vector<TrainingInstance> out;
  for (const auto& seq : span.users) {
    const auto train = seq.train_items();
    for (std::size_t j = 1; j < train.size(); ++j) {
      const std::size_t begin = j > static_cast<std::size_t>(max_prefix) ? j - static_cast<std::size_t>(max_prefix) : 0;
      TrainingInstance inst;
      inst.user = seq.user;
      inst.prefix.assign(train.begin() + static_cast<std::ptrdiff_t>(begin), train.begin() + static_cast<std::ptrdiff_t>(j));
      inst.target = train[j];
      out.push_back(std::move(inst));
    }
  }
  return out;
}

Matrix gather_rows(const Matrix& table, std::span<const ItemId> ids) {
  Matrix out(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = table.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix extract_user(const ModelParams& model, const IntentBank& bank, std::span<const ItemId> items,
                    const RunConfig& cfg) {
  const Matrix e = gather_rows(model.embeddings, recent(items, cfg.max_prefix));
  const Matrix f = features_of(model, e);
  if (is_sa(model)) return attend(e, f, bank.attention);
  return route(f, bank.vectors, cfg.routing_iterations);
}

BatchGradients compute_gradients(std::span<const TrainingInstance> batch,
                                 std::span<const std::vector<ItemId>> negatives, const ModelParams& model,
                                 const Banks& banks, const RunConfig& cfg, bool distill, Execution exec) {
  const bool sa = is_sa(model);
  const std::size_t d = model.dim();
  const std::size_t fdim = model.extractor.rows();
  const ObjectiveWeights w = weights_for(cfg, distill);

  // Features are shared by every occurrence of an item in the batch.
  std::vector<ItemId> unique;
  for (const auto& inst : batch) unique.insert(unique.end(), inst.prefix.begin(), inst.prefix.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<std::int32_t> slot(model.num_items(), -1);
  for (std::size_t u = 0; u < unique.size(); ++u) slot[static_cast<std::size_t>(unique[u])] = static_cast<std::int32_t>(u);
  Matrix features(unique.size(), fdim);
  for_each_index(unique.size(), exec, [&](std::size_t u) {
    item_features(model, model.embeddings.row(static_cast<std::size_t>(unique[u])), features.row(u));
  });

  std::vector<InstanceGrad> per(batch.size());
  for_each_index(batch.size(), exec, [&](std::size_t b) {
    const auto& inst = batch[b];
    const IntentBank& bank = bank_of(banks, inst.user);
    Matrix f(inst.prefix.size(), fdim);
    for (std::size_t i = 0; i < inst.prefix.size(); ++i) {
      const auto src = features.row(static_cast<std::size_t>(slot[static_cast<std::size_t>(inst.prefix[i])]));
      std::copy(src.begin(), src.end(), f.row(i).begin());
    }
    const auto target = model.embeddings.row(static_cast<std::size_t>(inst.target));
    const Matrix negs = gather_rows(model.embeddings, negatives[b]);
    const auto teacher = teacher_logits(bank, target, distill);
    InstanceGrad& out = per[b];
    HeadGrad* head = nullptr;
    DrGrad dr;
    SaGrad sg;
    if (sa) {
      const Matrix e = gather_rows(model.embeddings, inst.prefix);
      sg = sa_backward(e, f, bank.attention, target, negs, teacher, w);
      out.d_features = std::move(sg.d_hidden);
      out.d_items = std::move(sg.d_items);
      out.d_queries = std::move(sg.d_queries);
      head = &sg.head;
    } else {
      Matrix coupling;
      route(f, bank.vectors, cfg.routing_iterations, &coupling);
      dr = dr_backward(f, coupling, target, negs, teacher, w);
      out.d_features = std::move(dr.d_transformed);
      head = &dr.head;
    }
    out.loss = head->loss;
    out.ss = head->ss_loss;
    out.kd = head->kd_loss;
    out.d_target = std::move(head->d_target);
    out.d_negatives = std::move(head->d_negatives);
  });

  // Fixed-order reduction.
  BatchGradients g;
  g.embeddings = Matrix(model.num_items(), d);
  g.extractor = Matrix(model.extractor.rows(), model.extractor.cols());
  Matrix d_features(unique.size(), fdim);
  std::map<UserId, Matrix> queries;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& inst = batch[b];
    const auto& r = per[b];
    g.loss += r.loss;
    g.ss_loss += r.ss;
    g.kd_loss += r.kd;
    for (std::size_t i = 0; i < inst.prefix.size(); ++i) {
      const auto u = static_cast<std::size_t>(slot[static_cast<std::size_t>(inst.prefix[i])]);
      axpy(1.0, r.d_features.row(i), d_features.row(u));
      if (sa) axpy(1.0, r.d_items.row(i), g.embeddings.row(static_cast<std::size_t>(inst.prefix[i])));
    }
    axpy(1.0, r.d_target, g.embeddings.row(static_cast<std::size_t>(inst.target)));
    for (std::size_t j = 0; j < negatives[b].size(); ++j) {
      axpy(1.0, r.d_negatives.row(j), g.embeddings.row(static_cast<std::size_t>(negatives[b][j])));
    }
    if (sa) {
      auto [it, fresh] = queries.try_emplace(inst.user, r.d_queries.rows(), r.d_queries.cols());
      axpy(1.0, r.d_queries.data(), it->second.data());
    }
  }

  // Chain each item's feature gradient back through the shared transform.
  std::vector<double> pre(fdim);
  for (std::size_t u = 0; u < unique.size(); ++u) {
    const auto e = model.embeddings.row(static_cast<std::size_t>(unique[u]));
    std::copy(d_features.row(u).begin(), d_features.row(u).end(), pre.begin());
    if (sa) {
      const auto z = features.row(u);
      for (std::size_t a = 0; a < fdim; ++a) pre[a] *= 1.0 - z[a] * z[a];
    }
    matvec_t_add(model.extractor, pre, g.embeddings.row(static_cast<std::size_t>(unique[u])));
    outer_add(1.0, pre, e, g.extractor);
  }

  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  for (double& v : g.embeddings.data()) v *= scale;
  for (double& v : g.extractor.data()) v *= scale;
  for (auto& [user, m] : queries) {
    for (double& v : m.data()) v *= scale;
    g.queries.emplace_back(user, std::move(m));
  }
  g.loss *= scale;
  g.ss_loss *= scale;
  g.kd_loss *= scale;
  return g;
}

double batch_loss(std::span<const TrainingInstance> batch, std::span<const std::vector<ItemId>> negatives,
                  const ModelParams& model, const Banks& banks, const RunConfig& cfg, bool distill) {
  const ObjectiveWeights w = weights_for(cfg, distill);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& inst = batch[b];
    const IntentBank& bank = bank_of(banks, inst.user);
    const Matrix e = gather_rows(model.embeddings, inst.prefix);
    const Matrix f = features_of(model, e);
    const auto target = model.embeddings.row(static_cast<std::size_t>(inst.target));
    const Matrix negs = gather_rows(model.embeddings, negatives[b]);
    const auto teacher = teacher_logits(bank, target, distill);
    if (is_sa(model)) {
      total += sa_loss(e, f, bank.attention, target, negs, teacher, w);
    } else {
      Matrix coupling;
      route(f, bank.vectors, cfg.routing_iterations, &coupling);
      total += dr_loss(f, coupling, target, negs, teacher, w);
    }
  }
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

Timeline prepare_timeline(const std::vector<Interaction>& interactions, const RunConfig& cfg) {
  const auto kept = filter_min_interactions(interactions, static_cast<std::size_t>(cfg.min_interactions));
  if (kept.empty()) {
    throw DataError("no user has at least " + std::to_string(cfg.min_interactions) + " interactions");
  }
  Timeline out;
  for (auto& span : split_spans(kept, cfg.spans, cfg.alpha)) out.spans.push_back(split_holdout(std::move(span)));
  for (const auto& r : kept) {
    if (r.user < 0 || r.item < 0) throw DataError("negative user or item id");
    out.num_users = std::max(out.num_users, static_cast<std::size_t>(r.user) + 1);
    out.num_items = std::max(out.num_items, static_cast<std::size_t>(r.item) + 1);
  }
  return out;
}

TimelineState start_timeline(const RunConfig& cfg, std::size_t num_users, std::size_t num_items) {
  cfg.validate();
  TimelineState s;
  s.config = cfg;
  auto rng = derive_rng(cfg.seed, 0, kInitModel);
  s.model = init_model(cfg, num_items, rng);
  s.optimizer.embeddings.resize(s.model.embeddings.data().size());
  s.optimizer.extractor.resize(s.model.extractor.data().size());
  s.banks.assign(num_users, IntentBank{});
  return s;
}

bool apply_gradients(TimelineState& state, const BatchGradients& grads) {
  if (!all_finite(grads.embeddings.data()) || !all_finite(grads.extractor.data())) return false;
  for (const auto& [user, m] : grads.queries) {
    if (!all_finite(m.data())) return false;
  }
  const AdamConfig adam{state.config.lr};
  const std::int64_t step = ++state.optimizer.step;
  adam_update(state.model.embeddings.data(), grads.embeddings.data(), state.optimizer.embeddings.m,
              state.optimizer.embeddings.v, step, adam);
  adam_update(state.model.extractor.data(), grads.extractor.data(), state.optimizer.extractor.m,
              state.optimizer.extractor.v, step, adam);
  if (state.model.kind == ExtractorKind::sa) {
    // Every user's queries are part of the dense parameter set; users outside the
    // batch get a zero gradient.
    auto next = grads.queries.begin();
    std::vector<double> zeros;
    for (std::size_t u = 0; u < state.banks.size(); ++u) {
      IntentBank& bank = state.banks[u];
      if (!bank.has_attention()) continue;
      std::span<const double> g;
      if (next != grads.queries.end() && next->first == static_cast<UserId>(u)) {
        g = next->second.data();
        ++next;
      } else {
        zeros.assign(bank.attention.data().size(), 0.0);
        g = zeros;
      }
      adam_update(bank.attention.data(), g, bank.attention_m.data(), bank.attention_v.data(), step, adam);
    }
  }
  return true;
}

std::vector<ItemId> item_universe(std::span<const SpanDataset> spans, int last) {
  std::vector<ItemId> out;
  for (int s = 0; s <= last && s < static_cast<int>(spans.size()); ++s) {
    for (const auto& seq : spans[static_cast<std::size_t>(s)].users) out.insert(out.end(), seq.items.begin(), seq.items.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

struct SpanPlan {
  int span = 0;
  const SpanDataset* train = nullptr;  // instances, validation targets and final extraction
  const SpanDataset* gate = nullptr;   // the span's own sequences: gating and active scores
  std::vector<ItemId> universe;
  bool distill = false;
  bool expand = false;
};

// Users of `span` that have a bank and at least one train item, with those items.
struct UserItems {
  UserId user;
  std::vector<ItemId> items;
};

std::vector<UserItems> train_sequences(const SpanDataset& span, const Banks& banks) {
  std::vector<UserItems> out;
  for (const auto& seq : span.users) {
    if (seq.user >= static_cast<UserId>(banks.size()) || banks[static_cast<std::size_t>(seq.user)].empty()) continue;
    auto items = seq.train_items();
    if (!items.empty()) out.push_back({seq.user, std::move(items)});
  }
  return out;
}

std::optional<double> validation_hr(const TimelineState& state, const SpanDataset& span,
                                    std::span<const ItemId> universe, Execution exec) {
  std::vector<std::size_t> pos(state.model.num_items(), universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) pos[static_cast<std::size_t>(universe[i])] = i;
  struct Case {
    const UserSequence* seq;
    ItemId target;
  };
  std::vector<Case> cases;
  for (const auto& seq : span.users) {
    const ItemId target = seq.target(Holdout::valid);
    if (target < 0 || pos[static_cast<std::size_t>(target)] == universe.size()) continue;
    if (state.banks[static_cast<std::size_t>(seq.user)].empty()) continue;
    cases.push_back({&seq, target});
  }
  if (cases.empty()) return std::nullopt;
  std::vector<double> hit(cases.size());
  for_each_index(cases.size(), exec, [&](std::size_t c) {
    const auto& bank = state.banks[static_cast<std::size_t>(cases[c].seq->user)];
    const auto train = cases[c].seq->train_items();
    if (train.empty()) return;
    const Matrix h = extract_user(state.model, bank, train, state.config);
    std::vector<double> scores(universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i) {
      scores[i] = candidate_score(h, state.model.embeddings.row(static_cast<std::size_t>(universe[i])),
                                  state.config.eval_mode);
    }
    hit[c] = metrics_from_rank(target_rank(universe, scores, cases[c].target), state.config.eval_k).hr;
  });
  double sum = 0.0;
  for (double v : hit) sum += v;
  return sum / static_cast<double>(cases.size());
}

// Banks for users appearing in `span` for the first time.
void ensure_banks(TimelineState& state, const SpanDataset& span, int span_index) {
  for (const auto& seq : span.users) {
    auto& bank = state.banks.at(static_cast<std::size_t>(seq.user));
    if (!bank.empty()) continue;
    auto rng = derive_rng(state.config.seed, span_index, kInitBank, static_cast<std::uint64_t>(seq.user));
    bank = init_bank(state.config, span_index, rng);
  }
}

struct Snapshot {
  ModelParams model;
  OptimizerState optimizer;
  Banks banks;
  std::vector<std::vector<std::size_t>> new_intents;
  std::vector<char> gate_done;
};

void gate_and_expand(TimelineState& state, const SpanPlan& plan, const std::vector<UserItems>& users,
                     std::vector<std::vector<std::size_t>>& new_intents, std::vector<char>& gate_done,
                     SpanReport& report, Execution exec) {
  const auto& lc = state.config.lifecycle;
  const std::size_t attention_dim = is_sa(state.model) ? static_cast<std::size_t>(state.config.attention_dim) : 0;
  std::vector<char> gated(users.size(), 0);
  std::vector<char> fired(users.size(), 0);
  for_each_index(users.size(), exec, [&](std::size_t i) {
    const auto user = static_cast<std::size_t>(users[i].user);
    if (gate_done[user]) return;
    IntentBank& bank = state.banks[user];
    gated[i] = 1;
    const Matrix e = gather_rows(state.model.embeddings, users[i].items);
    if (!nid_gate(e, bank.vectors, lc.theta_nid)) return;
    auto rng = derive_rng(state.config.seed, plan.span, kExpand, user);
    new_intents[user] = expand_intents(bank, lc.delta_k, plan.span, rng, attention_dim);
    gate_done[user] = 1;
    fired[i] = 1;
  });
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (fired[i]) report.fired.push_back(users[i].user);
  }
}

// Re-extracts every listed user's intents; the result seeds the next routing pass.
void refresh_banks(TimelineState& state, const std::vector<UserItems>& users, Execution exec) {
  for_each_index(users.size(), exec, [&](std::size_t i) {
    IntentBank& bank = state.banks[static_cast<std::size_t>(users[i].user)];
    Matrix h = extract_user(state.model, bank, users[i].items, state.config);
    round_to_float(h.data());
    bank.vectors = std::move(h);
  });
}

// Epoch loop with early stopping on validation HR; the best epoch's state is kept.
void train_epochs(TimelineState& state, const SpanPlan& plan, SpanReport& report,
                  std::vector<std::vector<std::size_t>>& new_intents, Execution exec) {
  const RunConfig& cfg = state.config;
  const auto instances = build_instances(*plan.train, cfg.max_prefix);
  const auto gate_users = train_sequences(*plan.gate, state.banks);
  const auto train_users = train_sequences(*plan.train, state.banks);
  std::vector<char> gate_done(state.banks.size(), 0);

  std::vector<std::size_t> pos(state.model.num_items(), 0);
  for (std::size_t i = 0; i < plan.universe.size(); ++i) pos[static_cast<std::size_t>(plan.universe[i])] = i;
  const std::size_t n_neg =
      plan.universe.empty() ? 0 : std::min(static_cast<std::size_t>(cfg.negatives), plan.universe.size() - 1);

  std::optional<Snapshot> best;
  double best_hr = -1.0;
  int stale = 0;
  std::vector<std::size_t> order(instances.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (plan.expand) gate_and_expand(state, plan, gate_users, new_intents, gate_done, report, exec);
    refresh_banks(state, train_users, exec);

    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = derive_rng(cfg.seed, plan.span, kShuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto neg_rng = derive_rng(cfg.seed, plan.span, kNegatives, static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<TrainingInstance> batch;
    std::vector<std::vector<ItemId>> negatives;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      negatives.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto& inst = instances[order[i]];
        batch.push_back(inst);
        auto picked = sample_negatives(static_cast<ItemId>(pos[static_cast<std::size_t>(inst.target)]),
                                       static_cast<std::int64_t>(plan.universe.size()), n_neg, neg_rng);
        for (auto& p : picked) p = plan.universe[static_cast<std::size_t>(p)];
        negatives.push_back(std::move(picked));
      }
      const auto grads = compute_gradients(batch, negatives, state.model, state.banks, cfg, plan.distill, exec);
      if (!std::isfinite(grads.loss) || !apply_gradients(state, grads)) {
        ++report.skipped_batches;
        continue;
      }
      loss_sum += grads.loss;
      ++batches;
    }
    report.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    report.epochs_run = epoch + 1;

    const double hr = validation_hr(state, *plan.train, plan.universe, exec).value_or(0.0);
    if (hr > best_hr) {
      best_hr = hr;
      best = Snapshot{state.model, state.optimizer, state.banks, new_intents, gate_done};
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (best) {
    state.model = std::move(best->model);
    state.optimizer = std::move(best->optimizer);
    state.banks = std::move(best->banks);
    new_intents = std::move(best->new_intents);
    report.fired.erase(std::remove_if(report.fired.begin(), report.fired.end(),
                                      [&](UserId u) { return !best->gate_done[static_cast<std::size_t>(u)]; }),
                       report.fired.end());
  }
  report.expanded_users = report.fired.size();
}

// Final extraction, trimming, active scores, the cap and the teacher snapshot.
void finish_span(TimelineState& state, const SpanPlan& plan, SpanReport& report,
                 const std::vector<std::vector<std::size_t>>& new_intents, Execution exec) {
  const RunConfig& cfg = state.config;
  const auto extract_users = train_sequences(*plan.train, state.banks);
  std::vector<std::vector<ItemId>> gate_items(state.banks.size());
  for (auto& u : train_sequences(*plan.gate, state.banks)) gate_items[static_cast<std::size_t>(u.user)] = std::move(u.items);

  struct Outcome {
    std::size_t trimmed = 0, removed = 0, before_cap = 0;
  };
  refresh_banks(state, extract_users, exec);
  std::vector<Outcome> outcomes(extract_users.size());
  for_each_index(extract_users.size(), exec, [&](std::size_t i) {
    const auto user = static_cast<std::size_t>(extract_users[i].user);
    IntentBank& bank = state.banks[user];
    if (!new_intents[user].empty()) outcomes[i].trimmed = trim_new_intents(bank, new_intents[user], cfg.lifecycle.c2).removed;
    if (!gate_items[user].empty()) update_active_scores(bank, gather_rows(state.model.embeddings, gate_items[user]));
    outcomes[i].before_cap = bank.size();
    const std::size_t k = bank.size();
    if (cfg.strategy == Strategy::ema_iir) {
      remove_inactive(bank, cfg.lifecycle.k_max);
    } else if (cfg.strategy == Strategy::ema_sic) {
      compress_similar(bank, cfg.lifecycle.k_max);
    }
    outcomes[i].removed = k - bank.size();
  });
  for (const auto& o : outcomes) {
    report.trimmed_intents += o.trimmed;
    report.removed_intents += o.removed;
    report.max_k_before_cap = std::max(report.max_k_before_cap, o.before_cap);
  }
  for (auto& bank : state.banks) {
    if (!bank.empty()) bank.snapshot_teacher();
  }
  if (plan.expand) report.gated_users = train_sequences(*plan.gate, state.banks).size();
}

void bank_sizes(const Banks& banks, SpanReport& report) {
  std::size_t users = 0, total = 0;
  for (const auto& bank : banks) {
    if (bank.empty()) continue;
    ++users;
    total += bank.size();
    report.max_k = std::max(report.max_k, bank.size());
  }
  report.mean_k = users > 0 ? static_cast<double>(total) / static_cast<double>(users) : 0.0;
}

// Concatenation of spans 0..t per user; earlier spans count as training history and
// span t keeps its own holdout marks.
SpanDataset merge_history(std::span<const SpanDataset> spans, int t) {
  std::map<UserId, UserSequence> merged;
  for (int s = 0; s <= t; ++s) {
    for (const auto& seq : spans[static_cast<std::size_t>(s)].users) {
      auto& m = merged[seq.user];
      m.user = seq.user;
      m.items.insert(m.items.end(), seq.items.begin(), seq.items.end());
      m.timestamps.insert(m.timestamps.end(), seq.timestamps.begin(), seq.timestamps.end());
      if (s == t && !seq.marks.empty()) {
        m.marks.insert(m.marks.end(), seq.marks.begin(), seq.marks.end());
      } else {
        m.marks.insert(m.marks.end(), seq.items.size(), Holdout::train);
      }
    }
  }
  SpanDataset out;
  out.span_index = t;
  for (auto& [user, seq] : merged) out.users.push_back(std::move(seq));
  return out;
}

// Full retraining: fresh parameters and fresh bank contents, keeping each user's
// intent count and bookkeeping.
void reinitialize(TimelineState& state, int t) {
  const RunConfig& cfg = state.config;
  auto rng = derive_rng(cfg.seed, t, kInitModel);
  state.model = init_model(cfg, state.model.num_items(), rng);
  state.optimizer = OptimizerState{};
  state.optimizer.embeddings.resize(state.model.embeddings.data().size());
  state.optimizer.extractor.resize(state.model.extractor.data().size());
  RunConfig sized = cfg;
  for (std::size_t u = 0; u < state.banks.size(); ++u) {
    IntentBank& bank = state.banks[u];
    if (bank.empty()) continue;
    sized.lifecycle.k0 = static_cast<int>(bank.size());
    auto brng = derive_rng(cfg.seed, t, kInitBank, u);
    IntentBank fresh = init_bank(sized, t, brng);
    fresh.creation_span = bank.creation_span;
    fresh.as_accum = bank.as_accum;
    fresh.as_count = bank.as_count;
    bank = std::move(fresh);
  }
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

SpanReport pretrain(TimelineState& state, std::span<const SpanDataset> spans, Execution exec) {
  if (spans.empty() || spans[0].users.empty()) throw DataError("span 0 has no interactions to pretrain on");
  const auto started = std::chrono::steady_clock::now();
  SpanReport report;
  report.span = 0;
  report.strategy = to_string(state.config.strategy);
  ensure_banks(state, spans[0], 0);
  SpanPlan plan;
  plan.span = 0;
  plan.train = &spans[0];
  plan.gate = &spans[0];
  plan.universe = item_universe(spans, 0);
  std::vector<std::vector<std::size_t>> new_intents(state.banks.size());
  train_epochs(state, plan, report, new_intents, exec);
  finish_span(state, plan, report, new_intents, exec);
  bank_sizes(state.banks, report);
  state.completed_span = 0;
  if (state.config.record_timing) report.seconds = elapsed(started);
  return report;
}

SpanReport incremental_step(TimelineState& state, std::span<const SpanDataset> spans, int t, Execution exec) {
  if (t < 1 || t >= static_cast<int>(spans.size())) throw ConfigError("incremental span index out of range");
  const auto started = std::chrono::steady_clock::now();
  const RunConfig& cfg = state.config;
  SpanReport report;
  report.span = t;
  report.strategy = to_string(cfg.strategy);

  const SpanDataset& current = spans[static_cast<std::size_t>(t)];
  SpanDataset history;
  SpanPlan plan;
  plan.span = t;
  plan.gate = &current;
  plan.train = &current;
  plan.universe = item_universe(spans, t);
  plan.expand = cfg.expands();
  plan.distill = cfg.distills() && cfg.lifecycle.lambda_kd > 0.0;
  if (cfg.strategy == Strategy::fr) {
    reinitialize(state, t);
    history = merge_history(spans, t);
    plan.train = &history;
  }
  ensure_banks(state, current, t);

  std::vector<std::vector<std::size_t>> new_intents(state.banks.size());
  train_epochs(state, plan, report, new_intents, exec);
  finish_span(state, plan, report, new_intents, exec);
  bank_sizes(state.banks, report);

  if (t + 1 < static_cast<int>(spans.size())) {
    const auto result = evaluate_span(state.model, state.banks, spans[static_cast<std::size_t>(t + 1)], plan.universe,
                                      cfg.eval_k, cfg.eval_mode, exec);
    report.hr = result.hr;
    report.ndcg = result.ndcg;
    report.users = result.users;
    report.excluded = result.excluded;
  }
  state.completed_span = t;
  if (cfg.record_timing) report.seconds = elapsed(started);
  return report;
}

std::vector<SpanReport> run_timeline(std::span<const SpanDataset> spans, TimelineState& state,
                                     const TimelineHooks& hooks, Execution exec) {
  if (spans.size() < 3) throw DataError("a timeline needs span 0, one incremental span and one evaluation span");
  if (state.completed_span < 0) {
    pretrain(state, spans, exec);
    if (hooks.on_span_end) hooks.on_span_end(state);
  }
  const int last = static_cast<int>(spans.size()) - 2;
  for (int t = state.completed_span + 1; t <= last; ++t) {
    state.reports.push_back(incremental_step(state, spans, t, exec));
    if (hooks.on_span_end) hooks.on_span_end(state);
  }
  return state.reports;
}

}  // namespace mintent
