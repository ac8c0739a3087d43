// Times the serial reference kernels against their OpenMP versions on a synthetic
// fixture and checks that both produce identical bits.
//
//   mintent_bench [--users N] [--repeats R]

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "mintent/synthetic.hpp"
#include "mintent/trainer.hpp"

using namespace mintent;

namespace {

template <class F>
double seconds(int repeats, F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

bool same(const BatchGradients& a, const BatchGradients& b) {
  if (a.embeddings != b.embeddings || a.extractor != b.extractor || a.loss != b.loss) return false;
  if (a.queries.size() != b.queries.size()) return false;
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    if (a.queries[i].first != b.queries[i].first || a.queries[i].second != b.queries[i].second) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel benchmark"};
  int users = 200;
  int repeats = 3;
  app.add_option("--users", users, "synthetic users");
  app.add_option("--repeats", repeats, "timing repeats");
  CLI11_PARSE(app, argc, argv);

  SyntheticSpec spec;
  spec.num_users = users;
  const auto data = generate_synthetic(spec);

  bool all_equal = true;
  std::printf("threads=%d\n", max_threads());
  std::printf("%-26s %12s %12s %8s %s\n", "kernel", "serial_ms", "parallel_ms", "speedup", "identical");
  for (auto kind : {ExtractorKind::dr, ExtractorKind::sa}) {
    RunConfig cfg;
    cfg.extractor = kind;
    const auto timeline = prepare_timeline(data.interactions, cfg);
    auto state = start_timeline(cfg, timeline.num_users, timeline.num_items);
    for (const auto& seq : timeline.spans[0].users) {
      auto rng = derive_rng(cfg.seed, 0, 2, static_cast<std::uint64_t>(seq.user));
      state.banks[static_cast<std::size_t>(seq.user)] = init_bank(cfg, 0, rng);
    }
    auto instances = build_instances(timeline.spans[0], cfg.max_prefix);
    instances.resize(std::min<std::size_t>(instances.size(), static_cast<std::size_t>(cfg.batch_size)));
    std::mt19937_64 rng(1);
    std::vector<std::vector<ItemId>> negatives;
    for (const auto& inst : instances) {
      negatives.push_back(sample_negatives(inst.target, static_cast<std::int64_t>(timeline.num_items),
                                           static_cast<std::size_t>(cfg.negatives), rng));
    }

    BatchGradients gs, gp;
    const double ts = seconds(repeats, [&] {
      gs = compute_gradients(instances, negatives, state.model, state.banks, cfg, false, Execution::serial);
    });
    const double tp = seconds(repeats, [&] {
      gp = compute_gradients(instances, negatives, state.model, state.banks, cfg, false, Execution::parallel);
    });
    const bool eq = same(gs, gp);
    all_equal = all_equal && eq;
    std::printf("%-26s %12.2f %12.2f %8.2f %s\n", ("gradients/" + to_string(kind)).c_str(), 1e3 * ts, 1e3 * tp, ts / tp,
                eq ? "yes" : "NO");

    const auto universe = item_universe(timeline.spans, 0);
    EvalResult es, ep;
    const double es_t = seconds(repeats, [&] {
      es = evaluate_span(state.model, state.banks, timeline.spans[1], universe, 20, ScoreMode::attentive, Execution::serial);
    });
    const double ep_t = seconds(repeats, [&] {
      ep = evaluate_span(state.model, state.banks, timeline.spans[1], universe, 20, ScoreMode::attentive,
                         Execution::parallel);
    });
    const bool eval_eq = es.hr == ep.hr && es.ndcg == ep.ndcg;
    all_equal = all_equal && eval_eq;
    std::printf("%-26s %12.2f %12.2f %8.2f %s\n", ("evaluate/" + to_string(kind)).c_str(), 1e3 * es_t, 1e3 * ep_t,
                es_t / ep_t, eval_eq ? "yes" : "NO");
  }
  return all_equal ? 0 : 1;
}
