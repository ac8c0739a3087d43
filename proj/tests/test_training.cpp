#include <doctest.h>

#include <omp.h>

#include <random>

#include "gradcheck.hpp"
#include "mintent/errors.hpp"
#include "mintent/objective.hpp"
#include "mintent/optimizer.hpp"
#include "mintent/scoring.hpp"
#include "mintent/synthetic.hpp"
#include "mintent/trainer.hpp"
#include "oracles.hpp"

using namespace mintent;
using doctest::Approx;

namespace {

// Small drifting fixture that trains in well under a second.
struct Fixture {
  RunConfig cfg;
  Timeline timeline;
  SyntheticData data;
};

Fixture small_fixture(Strategy strategy = Strategy::ima, ExtractorKind kind = ExtractorKind::dr) {
  Fixture f;
  SyntheticSpec spec;
  spec.num_users = 30;
  spec.num_items = 80;
  spec.num_categories = 4;
  spec.spans = 4;
  spec.interactions_per_user_per_span = 12;
  spec.dim = 16;
  f.data = generate_synthetic(spec);
  f.cfg.extractor = kind;
  f.cfg.strategy = strategy;
  f.cfg.dim = 16;
  f.cfg.attention_dim = 8;
  f.cfg.spans = 4;
  f.cfg.epochs = 2;
  f.cfg.batch_size = 32;
  f.cfg.min_interactions = 10;
  f.timeline = prepare_timeline(f.data.interactions, f.cfg);
  return f;
}

bool same_reports(const std::vector<SpanReport>& a, const std::vector<SpanReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].hr != b[i].hr || a[i].ndcg != b[i].ndcg || a[i].users != b[i].users || a[i].mean_k != b[i].mean_k ||
        a[i].max_k != b[i].max_k || a[i].fired != b[i].fired || a[i].train_loss != b[i].train_loss) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("objective") {
  TEST_CASE("head gradient at the uniform-logit point") {
    // One intent so v_u = h; every logit equals zero.
    Matrix h(1, 3);
    h(0, 0) = 1.0;
    const std::vector<double> target{0, 1, 0};
    Matrix negs(2, 3);
    negs(0, 2) = 1.0;
    negs(1, 1) = -1.0;
    negs(1, 2) = 1.0;
    // Target orthogonal to h: logits (0; 0, 0) -> softmax weights 1/3 each.
    const auto g = head_backward(h, target, negs, {}, {});
    CHECK(g.loss == Approx(std::log(3.0)));
    // dL/dv = sum_j p_j e_j - (1 - p_a) e_a + ... written out: p e_a + sum p_j e_j - e_a.
    std::vector<double> dv(3, 0.0);
    for (std::size_t c = 0; c < 3; ++c) dv[c] = (target[c] + negs(0, c) + negs(1, c)) / 3.0 - target[c];
    // With one intent dL/dh = dv plus the softmax-weight path, which vanishes for K=1.
    for (std::size_t c = 0; c < 3; ++c) CHECK(g.d_intents(0, c) == Approx(dv[c]).epsilon(1e-12));
  }

  TEST_CASE("squash backward matches finite differences") {
    std::mt19937_64 rng(2);
    const auto s = oracle::random_vec(5, 1.0, rng);
    const auto up = oracle::random_vec(5, 1.0, rng);
    const auto g = squash_backward(s, up);
    for (std::size_t i = 0; i < 5; ++i) {
      auto a = s, b = s;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      const auto fa = squash(a), fb = squash(b);
      double d = 0;
      for (std::size_t j = 0; j < 5; ++j) d += up[j] * (fa[j] - fb[j]) / 2e-6;
      CHECK(g[i] == Approx(d).epsilon(1e-7));
    }
  }

  TEST_CASE("batch gradients match finite differences") {
    for (auto kind : {ExtractorKind::dr, ExtractorKind::sa}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        CHECK(gradcheck::max_relative_error(seed, kind, 1e-4) < 1e-4);
      }
    }
  }

  TEST_CASE("items outside the batch get no gradient") {
    auto toy = gradcheck::make_toy(ExtractorKind::dr, 3);
    std::vector<bool> used(toy.model.num_items(), false);
    for (std::size_t b = 0; b < toy.batch.size(); ++b) {
      for (auto i : toy.batch[b].prefix) used[static_cast<std::size_t>(i)] = true;
      used[static_cast<std::size_t>(toy.batch[b].target)] = true;
      for (auto i : toy.negatives[b]) used[static_cast<std::size_t>(i)] = true;
    }
    const auto g = compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, true);
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i]) continue;
      for (double v : g.embeddings.row(i)) CHECK(v == 0.0);
    }
  }

  TEST_CASE("gradients and loss ignore distillation when it is off") {
    auto toy = gradcheck::make_toy(ExtractorKind::sa, 4);
    const auto on = compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, true);
    const auto off = compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, false);
    CHECK(on.kd_loss > 0.0);
    CHECK(off.kd_loss == 0.0);
    CHECK(off.loss == Approx(off.ss_loss));
    CHECK(on.loss == Approx(on.ss_loss + toy.cfg.lifecycle.lambda_kd * on.kd_loss));
    CHECK(batch_loss(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, false) == Approx(off.loss).epsilon(1e-12));
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("zero gradients leave parameters alone") {
    std::vector<double> p{0.5, -0.25}, g{0, 0}, m{0, 0}, v{0, 0};
    adam_update(p, g, m, v, 1, {});
    CHECK(p == std::vector<double>{0.5, -0.25});
  }

  TEST_CASE("first step moves by the learning rate") {
    std::vector<double> p(4, 0.0), g(4, 1.0), m(4, 0.0), v(4, 0.0);
    adam_update(p, g, m, v, 1, {0.001});
    for (double x : p) CHECK(std::fabs(x + 0.001) < 1e-6);
  }

  TEST_CASE("updates are reproducible and float-exact") {
    std::mt19937_64 r(3);
    auto run = [&] {
      std::mt19937_64 rng(3);
      std::normal_distribution<double> g(0.0, 1.0);
      std::vector<double> p(16), m(16, 0.0), v(16, 0.0), grad(16);
      for (double& x : p) x = to_float_precision(g(rng));
      for (int step = 1; step <= 20; ++step) {
        for (double& x : grad) x = g(rng);
        adam_update(p, grad, m, v, step, {0.01});
      }
      return p;
    };
    const auto a = run(), b = run();
    CHECK(a == b);
    for (double x : a) CHECK(x == to_float_precision(x));
    (void)r;
  }

  TEST_CASE("non-finite gradients are refused") {
    std::vector<double> p{1.0}, g{std::nan("")}, m{0}, v{0};
    CHECK_THROWS_AS(adam_update(p, g, m, v, 1, {}), TrainingError);
    CHECK(p[0] == 1.0);
    CHECK_FALSE(all_finite(g));
  }
}

TEST_SUITE("trainer") {
  TEST_CASE("instances follow train prefixes") {
    SpanDataset span;
    span.users.push_back({4, {1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6}, {}});
    span = split_holdout(span);
    const auto inst = build_instances(span, 2);
    // Train items 1..4: targets 2, 3, 4.
    REQUIRE(inst.size() == 3);
    CHECK(inst[0].prefix == std::vector<ItemId>{1});
    CHECK(inst[2].prefix == std::vector<ItemId>{2, 3});
    CHECK(inst[2].target == 4);
  }

  TEST_CASE("loss decreases on a 100-interaction fixture") {
    std::vector<Interaction> log;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<ItemId> item(0, 19);
    for (UserId u = 0; u < 5; ++u) {
      for (int i = 0; i < 20; ++i) log.push_back({u, (u % 2 == 0 ? 0 : 10) + item(rng) % 10, i});
    }
    REQUIRE(log.size() == 100);
    SpanDataset span = split_holdout(split_spans(log, 1, 0.99)[0]);
    RunConfig cfg;
    cfg.dim = 8;
    cfg.lr = 0.01;
    cfg.negatives = 5;
    auto state = start_timeline(cfg, 5, 20);
    for (const auto& seq : span.users) {
      auto r = derive_rng(1, 0, 2, static_cast<std::uint64_t>(seq.user));
      state.banks[static_cast<std::size_t>(seq.user)] = init_bank(cfg, 0, r);
    }
    const auto batch = build_instances(span, cfg.max_prefix);
    std::vector<std::vector<ItemId>> negs;
    for (const auto& inst : batch) negs.push_back(sample_negatives(inst.target, 20, 5, rng));
    const double before = batch_loss(batch, negs, state.model, state.banks, cfg, false);
    for (int step = 0; step < 50; ++step) {
      REQUIRE(apply_gradients(state, compute_gradients(batch, negs, state.model, state.banks, cfg, false)));
    }
    const double after = batch_loss(batch, negs, state.model, state.banks, cfg, false);
    CHECK(after < before);
    CHECK(state.optimizer.step == 50);
  }

  TEST_CASE("pretraining leaves k0 intents and a lower loss") {
    auto f = small_fixture();
    f.cfg.epochs = 4;
    f.cfg.lr = 0.01;
    auto state = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    auto first = f.cfg;
    first.epochs = 1;
    auto probe = start_timeline(first, f.timeline.num_users, f.timeline.num_items);
    const auto r1 = pretrain(probe, f.timeline.spans);
    const auto r = pretrain(state, f.timeline.spans);
    for (const auto& bank : state.banks) {
      if (!bank.empty()) CHECK(bank.size() == 4);
    }
    CHECK(std::isfinite(r.train_loss));
    CHECK(r.train_loss < r1.train_loss);
    CHECK(state.completed_span == 0);
  }

  TEST_CASE("single user with a single item pretrains without error") {
    std::vector<SpanDataset> spans(3);
    spans[0].users.push_back(split_holdout(SpanDataset{0, {{0, {0}, {1}, {}}}}).users[0]);
    RunConfig cfg;
    cfg.dim = 4;
    auto state = start_timeline(cfg, 1, 1);
    const auto r = pretrain(state, spans);
    CHECK(std::isfinite(r.train_loss));
    CHECK(state.banks[0].size() == 4);
  }

  TEST_CASE("fine-tuning never changes bank sizes") {
    auto f = small_fixture(Strategy::ft);
    f.cfg.lifecycle.theta_nid = -std::numeric_limits<double>::infinity();
    auto state = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    const auto reports = run_timeline(f.timeline.spans, state);
    for (const auto& r : reports) {
      CHECK(r.max_k == 4);
      CHECK(r.mean_k == 4.0);
      CHECK(r.fired.empty());
    }
  }

  TEST_CASE("an always-firing gate grows banks; caps hold them") {
    for (auto strategy : {Strategy::ima, Strategy::ema_iir, Strategy::ema_sic}) {
      auto f = small_fixture(strategy);
      f.cfg.lifecycle.theta_nid = -std::numeric_limits<double>::infinity();
      f.cfg.lifecycle.c2 = 1e-3;
      f.cfg.lifecycle.k_max = 6;
      auto state = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
      const auto reports = run_timeline(f.timeline.spans, state);
      REQUIRE(reports.size() == 3);
      CHECK(reports[0].expanded_users == reports[0].gated_users);
      if (strategy == Strategy::ima) {
        CHECK(reports.back().max_k > 6);
      } else {
        for (const auto& r : reports) CHECK(r.max_k <= 6);
        CHECK(reports.back().max_k_before_cap > 6);
      }
      for (const auto& bank : state.banks) CHECK(bank.consistent());
    }
  }

  TEST_CASE("full retraining expands without distillation") {
    auto f = small_fixture(Strategy::fr);
    f.cfg.lifecycle.theta_nid = -std::numeric_limits<double>::infinity();
    auto state = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    const auto reports = run_timeline(f.timeline.spans, state);
    CHECK(reports.size() == 3);
    CHECK(reports[0].max_k > 4);
  }

  TEST_CASE("timeline evaluates T-1 spans and is reproducible") {
    auto f = small_fixture();
    auto a = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    auto b = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    const auto ra = run_timeline(f.timeline.spans, a);
    const auto rb = run_timeline(f.timeline.spans, b);
    CHECK(ra.size() == static_cast<std::size_t>(f.cfg.spans - 1));
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].span == static_cast<int>(i) + 1);
    CHECK(same_reports(ra, rb));
    CHECK(a.model == b.model);
  }

  TEST_CASE("self-attention timeline runs and keeps queries aligned") {
    auto f = small_fixture(Strategy::ema_sic, ExtractorKind::sa);
    f.cfg.lifecycle.theta_nid = -std::numeric_limits<double>::infinity();
    f.cfg.lifecycle.k_max = 6;
    auto state = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
    const auto reports = run_timeline(f.timeline.spans, state);
    for (const auto& bank : state.banks) {
      if (bank.empty()) continue;
      CHECK(bank.consistent());
      CHECK(bank.attention.rows() == bank.size());
    }
    for (const auto& r : reports) CHECK(r.hr.has_value());
  }
}

TEST_SUITE("parallel") {
  TEST_CASE("kernels agree bitwise across execution modes") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    for (auto kind : {ExtractorKind::dr, ExtractorKind::sa}) {
      auto toy = gradcheck::make_toy(kind, 9);
      const auto s = compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, true, Execution::serial);
      const auto p = compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, true, Execution::parallel);
      CHECK(s.embeddings == p.embeddings);
      CHECK(s.extractor == p.extractor);
      CHECK(s.loss == p.loss);
      REQUIRE(s.queries.size() == p.queries.size());
      for (std::size_t i = 0; i < s.queries.size(); ++i) CHECK(s.queries[i].second == p.queries[i].second);
    }
    for (auto strategy : {Strategy::ima, Strategy::ema_sic}) {
      auto f = small_fixture(strategy, strategy == Strategy::ima ? ExtractorKind::dr : ExtractorKind::sa);
      f.cfg.lifecycle.theta_nid = -0.5;
      auto a = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
      auto b = start_timeline(f.cfg, f.timeline.num_users, f.timeline.num_items);
      const auto ra = run_timeline(f.timeline.spans, a, {}, Execution::serial);
      const auto rb = run_timeline(f.timeline.spans, b, {}, Execution::parallel);
      CHECK(same_reports(ra, rb));
      CHECK(a.model == b.model);
      CHECK(a.optimizer == b.optimizer);
    }
    omp_set_num_threads(saved);
  }

  TEST_CASE("worker exceptions surface on the calling thread") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    auto toy = gradcheck::make_toy(ExtractorKind::dr, 2);
    toy.batch[2].user = 7;  // no bank
    CHECK_THROWS_AS(compute_gradients(toy.batch, toy.negatives, toy.model, toy.banks, toy.cfg, false, Execution::parallel),
                    DataError);
    omp_set_num_threads(saved);
  }
}

TEST_SUITE("eval") {
  TEST_CASE("rank to metrics") {
    CHECK(metrics_from_rank(1, 20).hr == 1.0);
    CHECK(metrics_from_rank(1, 20).ndcg == 1.0);
    CHECK(metrics_from_rank(3, 20).ndcg == 0.5);
    CHECK(metrics_from_rank(21, 20).hr == 0.0);
    CHECK(metrics_from_rank(21, 20).ndcg == 0.0);
    const std::vector<ItemId> ranked{4, 2, 9};
    CHECK(hr_ndcg_at_k(ranked, 9, 20).ndcg == 0.5);
    CHECK_THROWS_AS(hr_ndcg_at_k(ranked, 5, 20), DataError);
  }

  TEST_CASE("single user with the best-scoring target") {
    ModelParams model;
    model.embeddings = Matrix(3, 2);
    model.embeddings(0, 0) = 1.0;
    model.embeddings(1, 1) = 1.0;
    model.embeddings(2, 0) = -1.0;
    Banks banks(1);
    banks[0].append_intent(std::vector<double>{1.0, 0.0}, 0);
    SpanDataset test;
    test.users.push_back(split_holdout(SpanDataset{1, {{0, {1, 0}, {1, 2}, {}}}}).users[0]);
    const std::vector<ItemId> universe{0, 1, 2};
    const auto r = evaluate_span(model, banks, test, universe, 20, ScoreMode::attentive);
    CHECK(r.users == 1);
    CHECK(*r.hr == 1.0);
    CHECK(*r.ndcg == 1.0);
  }

  TEST_CASE("no evaluable users leaves metrics absent") {
    ModelParams model;
    model.embeddings = Matrix(3, 2, 0.5);
    Banks banks(2);
    SpanDataset test;
    test.users.push_back(split_holdout(SpanDataset{1, {{0, {1, 0}, {1, 2}, {}}}}).users[0]);
    const std::vector<ItemId> universe{0, 1, 2};
    const auto r = evaluate_span(model, banks, test, universe, 20, ScoreMode::max);
    CHECK(r.users == 0);
    CHECK(r.excluded == 1);
    CHECK_FALSE(r.hr.has_value());
    CHECK_FALSE(r.ndcg.has_value());
  }

  TEST_CASE("fifty users against a brute-force ranking") {
    std::mt19937_64 rng(31);
    ModelParams model;
    model.embeddings = oracle::random_matrix(60, 6, 1.0, rng);
    Banks banks(50);
    SpanDataset test;
    std::uniform_int_distribution<ItemId> pick(0, 59);
    for (UserId u = 0; u < 50; ++u) {
      const auto h = oracle::random_matrix(1 + static_cast<std::size_t>(u % 4), 6, 1.0, rng);
      for (std::size_t k = 0; k < h.rows(); ++k) banks[static_cast<std::size_t>(u)].append_intent(h.row(k), 0);
      test.users.push_back({u, {pick(rng), pick(rng), pick(rng)}, {1, 2, 3}, {}});
    }
    test = split_holdout(test);
    std::vector<ItemId> universe;
    for (ItemId i = 0; i < 55; ++i) universe.push_back(i);  // items 55..59 unseen
    for (auto mode : {ScoreMode::attentive, ScoreMode::max}) {
      const auto r = evaluate_span(model, banks, test, universe, 10, mode, Execution::serial);
      double hr = 0, ndcg = 0;
      std::size_t users = 0, excluded = 0;
      for (const auto& seq : test.users) {
        const ItemId target = seq.items.back();
        if (target >= 55) {
          ++excluded;
          continue;
        }
        const auto& h = banks[static_cast<std::size_t>(seq.user)].vectors;
        std::vector<std::pair<double, ItemId>> all;
        for (ItemId i : universe) {
          const auto e = oracle::row(model.embeddings, static_cast<std::size_t>(i));
          double s = -1e300;
          if (mode == ScoreMode::max) {
            for (std::size_t k = 0; k < h.rows(); ++k) s = std::max(s, static_cast<double>(oracle::ldot(h.row(k).data(), e.data(), 6)));
          } else {
            s = static_cast<double>(oracle::ldot(oracle::aggregate(h, e), e));
          }
          all.push_back({-s, i});
        }
        std::sort(all.begin(), all.end());
        std::size_t rank = 0;
        while (all[rank].second != target) ++rank;
        ++users;
        if (rank < 10) {
          hr += 1;
          ndcg += 1.0 / std::log2(rank + 2.0);
        }
      }
      CHECK(r.users == users);
      CHECK(r.excluded == excluded);
      CHECK(*r.hr == Approx(hr / users).epsilon(1e-12));
      CHECK(*r.ndcg == Approx(ndcg / users).epsilon(1e-12));
      const auto p = evaluate_span(model, banks, test, universe, 10, mode, Execution::parallel);
      CHECK(p.hr == r.hr);
      CHECK(p.ndcg == r.ndcg);
    }
  }
}
