// Acceptance harness: prints one PASS/FAIL line per criterion.
//
//   mintent_acceptance [--only 1,2,...] [--expect-fail 6,7] [--work DIR] [--summary FILE]
//
// Exit status is 0 when every failing criterion is listed in --expect-fail, 1 otherwise.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradcheck.hpp"
#include "mintent/lifecycle.hpp"
#include "mintent/persistence.hpp"
#include "mintent/synthetic.hpp"
#include "mintent/trainer.hpp"
#include "oracles.hpp"

using namespace mintent;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

nlohmann::ordered_json summary;

// ---------------------------------------------------------------------------
// Default synthetic fixture and runs on it.

struct Fixture {
  SyntheticData data;
  Timeline timeline;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.data = generate_synthetic(SyntheticSpec{});
    out.timeline = prepare_timeline(out.data.interactions, RunConfig{});
    return out;
  }();
  return f;
}

struct Run {
  std::vector<SpanReport> reports;
  double seconds = 0.0;
  // Mean puzzlement of each span's sequences against the banks as they stood when that
  // span began (the gate's first-epoch input); [span][user], NaN where not gated.
  std::vector<std::vector<double>> gate_puzzlement;
  std::map<int, TimelineState> saved;  // states captured at selected span ends
};

Run run_default(RunConfig cfg, std::set<int> capture = {}, bool probe_gate = false,
                const std::function<void(const TimelineState&)>& extra = {}) {
  const auto& f = fixture();
  Run r;
  auto state = start_timeline(cfg, f.timeline.num_users, f.timeline.num_items);
  TimelineHooks hooks;
  hooks.on_span_end = [&](const TimelineState& s) {
    if (capture.count(s.completed_span)) r.saved[s.completed_span] = s;
    if (extra) extra(s);
    const int next = s.completed_span + 1;
    if (!probe_gate || next >= static_cast<int>(f.timeline.spans.size()) - 1) return;
    std::vector<double> p(s.banks.size(), std::nan(""));
    for (const auto& seq : f.timeline.spans[static_cast<std::size_t>(next)].users) {
      const auto& bank = s.banks[static_cast<std::size_t>(seq.user)];
      const auto items = seq.train_items();
      if (bank.empty() || items.empty()) continue;
      p[static_cast<std::size_t>(seq.user)] = mean_puzzlement(gather_rows(s.model.embeddings, items), bank.vectors);
    }
    r.gate_puzzlement.resize(static_cast<std::size_t>(next) + 1);
    r.gate_puzzlement[static_cast<std::size_t>(next)] = std::move(p);
  };
  const auto t0 = std::chrono::steady_clock::now();
  r.reports = run_timeline(f.timeline.spans, state, hooks);
  r.seconds = since(t0);
  return r;
}

RunConfig with(Strategy s, std::uint64_t seed) {
  RunConfig c;
  c.strategy = s;
  c.seed = seed;
  return c;
}

// Cached paired runs shared by several criteria.
std::map<std::pair<int, std::uint64_t>, Run> runs;

const Run& paired(Strategy s, std::uint64_t seed) {
  const auto key = std::make_pair(static_cast<int>(s), seed);
  auto it = runs.find(key);
  if (it != runs.end()) return it->second;
  const bool main_run = s == Strategy::ima && seed == 1;
  Run r = run_default(with(s, seed), main_run ? std::set<int>{3} : std::set<int>{}, main_run);
  std::fprintf(stderr, "  [run %s seed %llu: %.1f s]\n", to_string(s).c_str(), static_cast<unsigned long long>(seed),
               r.seconds);
  return runs.emplace(key, std::move(r)).first->second;
}

bool same_state(const TimelineState& a, const TimelineState& b) {
  if (!(a.model == b.model) || !(a.optimizer == b.optimizer) || a.completed_span != b.completed_span) return false;
  if (a.banks.size() != b.banks.size()) return false;
  for (std::size_t u = 0; u < a.banks.size(); ++u) {
    const auto& x = a.banks[u];
    const auto& y = b.banks[u];
    if (!(x.vectors == y.vectors) || !(x.prev_vectors == y.prev_vectors) || x.creation_span != y.creation_span ||
        x.as_accum != y.as_accum || x.as_count != y.as_count || !(x.attention == y.attention) ||
        !(x.attention_m == y.attention_m) || !(x.attention_v == y.attention_v)) {
      return false;
    }
  }
  return true;
}

bool same_metrics(const SpanReport& a, const SpanReport& b) {
  return a.span == b.span && a.hr == b.hr && a.ndcg == b.ndcg && a.users == b.users && a.mean_k == b.mean_k &&
         a.max_k == b.max_k;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (auto kind : {ExtractorKind::dr, ExtractorKind::sa}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) worst = std::max(worst, gradcheck::max_relative_error(seed, kind));
  }
  const double secs = since(t0);
  summary["1"] = {{"worst_relative_error", worst}, {"seconds", secs}};
  return {worst < 1e-4 && secs < 30.0,
          fmt("worst relative error %.2e over 20 seeds x {dr, sa}, d=8 K=3 n=5 (%.1f s)", worst, secs)};
}

Outcome puzzlement_suite() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kdist(1, 12);
  std::uniform_real_distribution<double> scale(0.01, 10.0);
  double max_p = -kInf, worst_dual = 0.0, worst_equal = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto k = static_cast<std::size_t>(kdist(rng));
    const std::size_t d = 6;
    const Matrix h = oracle::random_matrix(k, d, scale(rng), rng);
    const auto e = oracle::random_vec(d, 1.0, rng);
    const double p = puzzlement(e, h);
    max_p = std::max(max_p, p);
    std::vector<long double> logits(k);
    for (std::size_t j = 0; j < k; ++j) logits[j] = oracle::ldot(h.row(j).data(), e.data(), d);
    worst_dual = std::max(worst_dual, std::fabs(p - oracle::neg_kl_uniform(logits)));
    // Equal logits: identical intents, or any constant.
    std::uniform_real_distribution<double> c(-50.0, 50.0);
    worst_equal = std::max(worst_equal, std::fabs(puzzlement_from_logits(std::vector<double>(k, c(rng)))));
    Matrix same(k, d);
    for (std::size_t j = 0; j < k; ++j) std::copy(h.row(0).begin(), h.row(0).end(), same.row(j).begin());
    worst_equal = std::max(worst_equal, std::fabs(puzzlement(e, same)));
  }
  summary["2"] = {{"max_p", max_p}, {"worst_dual_path", worst_dual}, {"worst_equal_logits", worst_equal}};
  return {max_p <= 0.0 && worst_equal <= 1e-9 && worst_dual <= 1e-9,
          fmt("10^4 inputs: max P = %.3g, equal-logit |P| <= %.2e, |P + KL(u||p)| <= %.2e", max_p, worst_equal,
              worst_dual)};
}

Outcome projection_suite() {
  bool exact = true;
  const Matrix e1 = [] {
    Matrix m(1, 3);
    m(0, 0) = 1.0;
    return m;
  }();
  exact &= project_residual(std::vector<double>{0, 2, 0}, e1) == std::vector<double>{0, 2, 0};
  exact &= project_residual(std::vector<double>{3, 0, 0}, e1) == std::vector<double>{0, 0, 0};
  exact &= project_residual(std::vector<double>{1, 1, 0}, e1) == std::vector<double>{0, 1, 0};

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kdist(1, 8);
  double worst_orth = 0.0, worst_idem = 0.0, worst_growth = -kInf;
  for (int i = 0; i < 1000; ++i) {
    const Matrix m = oracle::random_matrix(static_cast<std::size_t>(kdist(rng)), 16, 1.0, rng);
    const auto h = oracle::random_vec(16, 1.0, rng);
    const auto r = project_residual(h, m);
    const double hn = norm2(h);
    for (std::size_t k = 0; k < m.rows(); ++k) {
      worst_orth = std::max(worst_orth, std::fabs(dot(r, m.row(k))) / (hn * norm2(m.row(k))));
    }
    const auto rr = project_residual(r, m);
    double diff = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) diff = std::max(diff, std::fabs(rr[c] - r[c]));
    worst_idem = std::max(worst_idem, diff);
    worst_growth = std::max(worst_growth, norm2(r) - hn);
  }
  summary["3"] = {{"worst_orthogonality", worst_orth}, {"worst_idempotence", worst_idem}, {"max_norm_growth", worst_growth}};
  return {exact && worst_orth < 1e-6 && worst_idem < 1e-9 && worst_growth <= 0.0,
          fmt("exact cases %s; 10^3 random d=16: orthogonality %.2e, idempotence %.2e, max norm growth %.2e",
              exact ? "ok" : "WRONG", worst_orth, worst_idem, worst_growth)};
}

Outcome active_scores() {
  std::mt19937_64 rng(5150);
  double worst = 0.0;
  bool edge_seen = false;
  for (int trajectory = 0; trajectory < 200; ++trajectory) {
    IntentBank bank;
    const std::size_t d = 8;
    for (int k = 0; k < 3; ++k) bank.append_intent(oracle::random_vec(d, 0.5, rng), 0);
    std::vector<std::vector<long double>> history(bank.size());
    std::bernoulli_distribution grow(0.4);
    for (int span = 0; span < 10; ++span) {
      // Expansions land before the span is scored, so a new intent's first score has count 1.
      if (span > 0 && grow(rng)) {
        expand_intents(bank, 2, span, rng);
        history.resize(bank.size());
      }
      std::uniform_int_distribution<std::size_t> len(0, 12);
      const std::size_t n = span == 9 ? 5 : len(rng);  // empty spans included
      const Matrix items = oracle::random_matrix(n, d, 1.0, rng);
      update_active_scores(bank, items);
      if (n == 0) continue;
      for (std::size_t k = 0; k < bank.size(); ++k) {
        long double mean = 0;
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<long double> logits(bank.size());
          for (std::size_t j = 0; j < bank.size(); ++j) logits[j] = oracle::ldot(items.row(i).data(), bank.vectors.row(j).data(), d);
          mean += oracle::softmax(logits)[k];
        }
        history[k].push_back(mean / static_cast<long double>(n));
      }
    }
    for (std::size_t k = 0; k < bank.size(); ++k) {
      if (history[k].empty()) continue;
      long double batch = 0;
      for (auto v : history[k]) batch += v;
      batch /= static_cast<long double>(history[k].size());
      worst = std::max(worst, std::fabs(bank.active_score(k) - static_cast<double>(batch)));
      edge_seen |= bank.as_count[k] == 1;
      if (static_cast<std::size_t>(bank.as_count[k]) != history[k].size()) worst = kInf;
    }
  }
  summary["4"] = {{"worst_abs_difference", worst}, {"count_one_case_seen", edge_seen}};
  return {worst <= 1e-12 && edge_seen,
          fmt("200 random 10-span trajectories: max |incremental - batch| = %.2e; count-1 intents %s", worst,
              edge_seen ? "covered" : "MISSING")};
}

Outcome caps() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t worst_k = 0, peak_before = std::numeric_limits<std::size_t>::max();
  for (auto s : {Strategy::ema_iir, Strategy::ema_sic}) {
    RunConfig cfg = with(s, 1);
    cfg.lifecycle.k0 = 4;
    cfg.lifecycle.delta_k = 12;
    cfg.lifecycle.theta_nid = -kInf;  // fire for everyone
    cfg.lifecycle.c2 = 1e-3;
    cfg.lifecycle.k_max = 20;
    std::size_t run_worst = 0;
    const auto r = run_default(cfg, {}, false, [&](const TimelineState& st) {
      for (const auto& b : st.banks) run_worst = std::max(run_worst, b.size());
    });
    worst_k = std::max(worst_k, run_worst);
    std::size_t before = 0;
    for (const auto& rep : r.reports) before = std::max(before, rep.max_k_before_cap);
    // Each run on its own must push past the cap.
    peak_before = std::min(peak_before, before);
    summary["5"][to_string(s)] = {{"max_k_at_span_end", run_worst}, {"max_k_before_cap", before}, {"seconds", r.seconds}};
    std::fprintf(stderr, "  [run %s forced growth: %.1f s]\n", to_string(s).c_str(), r.seconds);
  }

  std::mt19937_64 rng(909);
  int mismatches = 0, over = 0, not_minimal = 0, compressed = 0;
  std::uniform_int_distribution<int> count(21, 40), centres(3, 30);
  std::uniform_real_distribution<double> spread(0.001, 0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = count(rng);
    const Matrix c = oracle::random_matrix(static_cast<std::size_t>(centres(rng)), 8, 0.5, rng);
    std::normal_distribution<double> noise(0.0, spread(rng));
    IntentBank bank;
    std::uniform_int_distribution<std::size_t> pick(0, c.rows() - 1);
    for (int i = 0; i < n; ++i) {
      auto v = oracle::row(c, pick(rng));
      for (double& x : v) x = to_float_precision(x + noise(rng));
      bank.append_intent(v, 0);
    }
    const Matrix before = bank.vectors;
    const auto res = compress_similar(bank, 20);
    over += bank.size() > 20;
    if (res.fell_back) continue;
    ++compressed;
    const auto oracle_labels = oracle::union_find_clusters(before, res.epsilon);
    mismatches += res.labels != oracle_labels;
    // The ladder picks the smallest epsilon that still fits.
    if (res.epsilon > std::ldexp(1.0, -kMaxEpsilonHalvings)) {
      const auto finer = oracle::union_find_clusters(before, res.epsilon / 2);
      not_minimal += *std::max_element(finer.begin(), finer.end()) + 1 <= 20;
    }
  }
  const double secs = since(t0);
  summary["5"]["sic_random_banks"] = {{"compressed", compressed}, {"label_mismatches", mismatches}, {"over_cap", over}};
  const bool pass = worst_k <= 20 && peak_before >= 25 && mismatches == 0 && over == 0 && not_minimal == 0;
  return {pass, fmt("iir+sic timelines: max K at span end %zu (<= 20), smallest per-run peak before cap %zu (>= 25); "
                    "SIC vs union-find on 10^3 banks: %d label mismatches (%d clustered), %d over cap (%.1f s)",
                    worst_k, peak_before, mismatches, compressed, over, secs)};
}

Outcome nid_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Run& r = paired(Strategy::ima, 1);
  const double secs = r.seconds;
  const auto& truth = fixture().data.truth;
  double min_gap = kInf, mean_gap = 0.0, best_possible = kInf;
  nlohmann::ordered_json per_span = nlohmann::ordered_json::array();
  for (const auto& rep : r.reports) {
    const auto t = static_cast<std::size_t>(rep.span);
    const std::set<UserId> fired(rep.fired.begin(), rep.fired.end());
    std::size_t n_new = 0, n_old = 0, f_new = 0, f_old = 0;
    std::vector<std::pair<double, bool>> scores;  // (first-epoch puzzlement, planted)
    for (const auto& seq : fixture().timeline.spans[t].users) {
      const bool planted = !truth.events[static_cast<std::size_t>(seq.user)][t].activated.empty();
      (planted ? n_new : n_old) += 1;
      if (fired.count(seq.user)) (planted ? f_new : f_old) += 1;
      if (t < r.gate_puzzlement.size()) {
        const double p = r.gate_puzzlement[t][static_cast<std::size_t>(seq.user)];
        if (!std::isnan(p)) scores.push_back({p, planted});
      }
    }
    const double rate_new = n_new ? static_cast<double>(f_new) / n_new : 0.0;
    const double rate_old = n_old ? static_cast<double>(f_old) / n_old : 0.0;
    const double gap = rate_new - rate_old;
    // Largest gap any single threshold could give on the first-epoch puzzlement.
    std::sort(scores.begin(), scores.end(), [](auto a, auto b) { return a.first > b.first; });
    double best = 0.0, best_theta = 0.0;
    std::size_t above_new = 0, above_old = 0;
    for (const auto& [p, planted] : scores) {
      (planted ? above_new : above_old) += 1;
      const double g = static_cast<double>(above_new) / std::max<std::size_t>(n_new, 1) -
                       static_cast<double>(above_old) / std::max<std::size_t>(n_old, 1);
      if (g > best) {
        best = g;
        best_theta = p;
      }
    }
    best_possible = std::min(best_possible, best);
    min_gap = std::min(min_gap, gap);
    mean_gap += gap / static_cast<double>(r.reports.size());
    per_span.push_back({{"span", rep.span}, {"planted", n_new}, {"stable", n_old}, {"rate_planted", rate_new},
                        {"rate_stable", rate_old}, {"gap", gap}, {"best_threshold_gap", best},
                        {"best_threshold", best_theta}});
  }
  summary["6"] = {{"theta_nid", RunConfig{}.lifecycle.theta_nid}, {"per_span", per_span}, {"min_gap", min_gap},
                  {"mean_gap", mean_gap}, {"seconds", secs}};
  (void)t0;
  return {min_gap >= 0.3 && secs < 120.0,
          fmt("theta=-0.04: firing-rate gap planted - stable per span min %.3f, mean %.3f (need >= 0.3); "
              "best single-threshold gap on first-epoch puzzlement, worst span %.3f (%.1f s)",
              min_gap, mean_gap, best_possible, secs)};
}

double slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double mx = (n - 1) / 2, my = 0;
  for (double v : y) my += v / n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (static_cast<double>(i) - mx) * (y[i] - my);
    den += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
  }
  return num / den;
}

Outcome forgetting() {
  bool every_seed = true;
  double slope_ima = 0, slope_ft = 0, longest = 0;
  std::string per_seed;
  nlohmann::ordered_json js = nlohmann::ordered_json::array();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double mean[2] = {0, 0}, sl[2] = {0, 0};
    int idx = 0;
    for (auto s : {Strategy::ima, Strategy::ft}) {
      const Run& r = paired(s, seed);
      longest = std::max(longest, r.seconds);
      std::vector<double> hr;
      for (const auto& rep : r.reports) hr.push_back(rep.hr.value_or(0.0));
      for (double v : hr) mean[idx] += v / static_cast<double>(hr.size());
      sl[idx] = slope(hr);
      ++idx;
    }
    every_seed &= mean[0] > mean[1];
    slope_ima += sl[0] / 3;
    slope_ft += sl[1] / 3;
    per_seed += fmt(" s%llu ima %.4f/ft %.4f;", static_cast<unsigned long long>(seed), mean[0], mean[1]);
    js.push_back({{"seed", seed}, {"ima_mean_hr", mean[0]}, {"ft_mean_hr", mean[1]}, {"ima_slope", sl[0]},
                  {"ft_slope", sl[1]}});
  }
  summary["7"] = {{"per_seed", js}, {"mean_slope_ima", slope_ima}, {"mean_slope_ft", slope_ft},
                  {"longest_run_seconds", longest}};
  return {every_seed && slope_ima > slope_ft && longest < 300.0,
          fmt("mean HR@20:%s slope ima %+.4f vs ft %+.4f per span (longest run %.1f s)", per_seed.c_str(), slope_ima,
              slope_ft, longest)};
}

Outcome degenerate() {
  RunConfig cfg = with(Strategy::ima, 1);
  // The gate fires when mean puzzlement exceeds theta, so +inf is the setting that
  // never fires.
  cfg.lifecycle.theta_nid = kInf;
  cfg.lifecycle.lambda_kd = 0.0;
  const Run ima = run_default(cfg);
  const Run& ft = paired(Strategy::ft, 1);
  bool same = ima.reports.size() == ft.reports.size();
  for (std::size_t i = 0; same && i < ima.reports.size(); ++i) same = same_metrics(ima.reports[i], ft.reports[i]);
  summary["8"] = {{"identical", same}, {"theta_nid", "inf"}};
  return {same, fmt("ima (theta=+inf, lambda=0) vs ft, seed 1: %zu metric rows %s", ima.reports.size(),
                    same ? "bitwise identical" : "DIFFER")};
}

Outcome persistence(const fs::path& work) {
  const Run& full = paired(Strategy::ima, 1);
  const auto& at3 = full.saved.at(3);
  const auto base = work / "span_3";
  save_checkpoint(at3, base);
  auto loaded = load_checkpoint(base, at3.config);
  const bool round_trip = same_state(at3, loaded.state) && loaded.config_mismatches.empty();
  const auto rest = run_timeline(fixture().timeline.spans, loaded.state);
  bool rows = rest.size() == full.reports.size() && rest.size() == 5;
  for (std::size_t i = 3; rows && i < 5; ++i) rows = same_metrics(rest[i], full.reports[i]) && rest[i].span == static_cast<int>(i) + 1;
  summary["9"] = {{"round_trip", round_trip}, {"rows_4_5_identical", rows}};
  return {round_trip && rows, fmt("span-3 checkpoint round trip %s; resumed rows 4..5 %s", round_trip ? "bit-exact" : "DIFFERS",
                                  rows ? "identical" : "DIFFER")};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const fs::path& work) {
  const std::string cli = MINTENT_CLI_PATH;
  const auto data = work / "synth";
  bool ok = shell(cli + " gen-synth --out " + data.string() + " >/dev/null 2>&1") == 0;
  const auto cfg = work / "default.json";
  std::ofstream(cfg) << "{}\n";
  std::string text[2];
  for (int i = 0; i < 2 && ok; ++i) {
    const auto out = work / ("cli_run_" + std::to_string(i));
    fs::remove_all(out);
    ok = shell(cli + " run --config " + cfg.string() + " --data " + (data / "interactions.csv").string() +
               " --strategy ima --out " + out.string() + " >/dev/null 2>&1") == 0;
    std::ifstream in(out / "metrics.csv", std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    text[i] = s.str();
  }
  const bool same = ok && !text[0].empty() && text[0] == text[1];
  summary["10"] = {{"byte_identical", same}, {"bytes", text[0].size()}};
  return {same, fmt("two CLI runs: metrics.csv %s (%zu bytes)", same ? "byte-identical" : "DIFFERS", text[0].size())};
}

Outcome drift_free_expansion() {
  SyntheticSpec spec;
  spec.p_new_category = 0.0;
  spec.p_drop_category = 0.0;
  const auto data = generate_synthetic(spec);
  RunConfig cfg;
  const auto tl = prepare_timeline(data.interactions, cfg);
  auto state = start_timeline(cfg, tl.num_users, tl.num_items);
  const auto reports = run_timeline(tl.spans, state);
  double worst = 0.0;
  for (const auto& r : reports) worst = std::max(worst, static_cast<double>(r.fired.size()) / static_cast<double>(r.gated_users));
  summary["supplementary"]["drift_free_max_expansion_rate"] = worst;
  return {worst <= 0.10, fmt("drift-free fixture, theta=-0.04: max per-span expansion rate %.3f (example bound 0.10)", worst)};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (!tok.empty()) out.insert(std::stoi(tok));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only = "1,2,3,4,5,6,7,8,9,10", expect_fail, work_dir, summary_file;
  bool supplementary = false;
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail; they do not affect the exit status");
  app.add_option("--work", work_dir, "scratch directory");
  app.add_option("--summary", summary_file, "write measured values as JSON");
  app.add_flag("--supplementary", supplementary, "also measure the drift-free expansion rate");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = work_dir.empty() ? fs::temp_directory_path() / "mintent_acceptance" : fs::path(work_dir);
  fs::create_directories(work);
  const auto selected = parse_list(only);
  const auto expected = parse_list(expect_fail);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"puzzlement suite", puzzlement_suite},
      {"projection suite", projection_suite},
      {"active-score equivalence", active_scores},
      {"SIC/IIR caps", caps},
      {"NID separation", nid_separation},
      {"forgetting mitigation", forgetting},
      {"degenerate-to-FT equivalence", degenerate},
      {"persistence", [&] { return persistence(work); }},
      {"determinism", [&] { return determinism(work); }},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool known = expected.count(id) > 0;
    std::printf("criterion %2d %s  %s: %s%s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                !o.pass && known ? " [known failure]" : "");
    std::fflush(stdout);
    if (!o.pass && !known) ++unexpected;
  }
  if (supplementary) {
    const auto o = drift_free_expansion();
    std::printf("supplementary %s  %s\n", o.pass ? "PASS" : "FAIL", o.detail.c_str());
  }
  if (!summary_file.empty()) std::ofstream(summary_file) << summary.dump(1) << "\n";
  return unexpected == 0 ? 0 : 1;
}
