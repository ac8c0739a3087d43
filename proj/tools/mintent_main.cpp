// Command-line driver: synthetic data generation, timeline runs and run comparison.
//
//   mintent gen-synth --config cfg.json --out DIR
//   mintent run --config cfg.json --data log.csv --strategy ima --out DIR [--resume T]
//   mintent report --inputs a/metrics.csv b/metrics.csv --baseline ft --out cmp.csv
//
// Exit codes: 0 success, 1 data/training/checkpoint fault, 2 configuration fault.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mintent/config.hpp"
#include "mintent/data.hpp"
#include "mintent/errors.hpp"
#include "mintent/persistence.hpp"
#include "mintent/report.hpp"
#include "mintent/synthetic.hpp"
#include "mintent/trainer.hpp"

namespace fs = std::filesystem;
using namespace mintent;

namespace {

constexpr int kExitFault = 1;
constexpr int kExitConfig = 2;

fs::path checkpoint_base(const fs::path& out, int span) {
  return out / "checkpoints" / ("span_" + std::to_string(span));
}

int gen_synth(const std::optional<std::string>& config, const std::optional<std::string>& out_flag) {
  ExperimentConfig cfg;
  if (config) cfg = load_experiment_config(*config);
  const auto out = out_flag ? *out_flag : cfg.out.value_or("");
  if (out.empty()) throw ConfigError("gen-synth needs --out (or \"out\" in the config)");
  cfg.synthetic.validate();
  const auto data = generate_synthetic(cfg.synthetic);
  fs::create_directories(out);
  write_log(fs::path(out) / "interactions.csv", data.interactions);
  write_ground_truth(fs::path(out) / "ground_truth.json", data.truth);
  std::cout << "wrote " << data.interactions.size() << " interactions to " << (fs::path(out) / "interactions.csv").string()
            << "\n";
  return 0;
}

int run(const std::string& config_path, const std::optional<std::string>& data_flag,
        const std::optional<std::string>& strategy, const std::optional<std::string>& out_flag,
        const std::optional<int>& resume) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (strategy) cfg.run.strategy = parse_strategy(*strategy);
  cfg.run.validate();
  const auto data = data_flag ? *data_flag : cfg.data.value_or("");
  const auto out = out_flag ? *out_flag : cfg.out.value_or("");
  if (data.empty()) throw ConfigError("run needs --data (or \"data\" in the config)");
  if (out.empty()) throw ConfigError("run needs --out (or \"out\" in the config)");

  const auto ingest = ingest_log(data);
  if (ingest.malformed_lines > 0) std::cerr << "skipped " << ingest.malformed_lines << " malformed rows\n";
  const auto timeline = prepare_timeline(ingest.interactions, cfg.run);

  TimelineState state;
  if (resume) {
    auto loaded = load_checkpoint(checkpoint_base(out, *resume), cfg.run);
    for (const auto& key : loaded.config_mismatches) {
      std::cerr << "warning: checkpoint config differs from the run config in '" << key << "'\n";
    }
    if (loaded.state.completed_span != *resume) throw CheckpointError("checkpoint does not end at span " + std::to_string(*resume));
    if (loaded.state.model.num_items() != timeline.num_items || loaded.state.banks.size() != timeline.num_users) {
      throw CheckpointError("checkpoint was written for a different dataset (user or item count differs)");
    }
    state = std::move(loaded.state);
  } else {
    state = start_timeline(cfg.run, timeline.num_users, timeline.num_items);
  }

  fs::create_directories(out);
  TimelineHooks hooks;
  hooks.on_span_end = [&](const TimelineState& s) {
    save_checkpoint(s, checkpoint_base(out, s.completed_span));
    if (!s.reports.empty() && s.reports.back().span == s.completed_span) {
      const auto& r = s.reports.back();
      std::cerr << "span " << r.span << " " << r.strategy << " hr20="
                << (r.hr ? std::to_string(*r.hr) : std::string("-")) << " mean_k=" << r.mean_k << "\n";
    }
  };
  const auto reports = run_timeline(timeline.spans, state, hooks);

  write_text_file(fs::path(out) / "metrics.csv", metrics_csv(reports, cfg.run.record_timing));
  write_text_file(fs::path(out) / "metrics.json", metrics_json(reports, cfg.run).dump(1) + "\n");
  return 0;
}

int report(const std::vector<std::string>& inputs, const std::optional<std::string>& baseline, const std::string& out) {
  std::vector<std::vector<MetricsRow>> runs;
  for (const auto& path : inputs) runs.push_back(read_metrics_csv(path));
  write_text_file(out, comparison_csv(runs, baseline));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental multi-intent sequential recommendation experiments"};
  app.require_subcommand(1);

  std::optional<std::string> config, out, data, strategy, baseline;
  std::optional<int> resume;
  std::vector<std::string> inputs;
  std::string run_config, report_out;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic drifting-interest log and its ground truth");
  gen->add_option("--config", config, "JSON config; its \"synthetic\" object is used");
  gen->add_option("--out", out, "Output directory");

  auto* run_cmd = app.add_subcommand("run", "Pretrain on span 0 and run the incremental timeline");
  run_cmd->add_option("--config", run_config, "JSON config")->required();
  run_cmd->add_option("--data", data, "Interaction CSV (user_id,item_id,timestamp)");
  run_cmd->add_option("--strategy", strategy, "ima, ema_iir, ema_sic, ft or fr (overrides the config)");
  run_cmd->add_option("--out", out, "Output directory");
  run_cmd->add_option("--resume", resume, "Resume from the checkpoint written after this span");

  auto* rep = app.add_subcommand("report", "Join metrics files by span with relative improvement");
  rep->add_option("--inputs", inputs, "metrics.csv files")->required();
  rep->add_option("--baseline", baseline, "Strategy label of the baseline run");
  rep->add_option("--out", report_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return gen_synth(config, out);
    if (*run_cmd) return run(run_config, data, strategy, out, resume);
    if (*rep) return report(inputs, baseline, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFault;
  }
  return 0;
}
