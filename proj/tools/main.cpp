#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "prizegrowth/pipeline.hpp"
#include "prizegrowth/util.hpp"

namespace {

using prizegrowth::RunConfig;

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--config", cfg.config_path, "config JSON file");
  sub->add_option("--out", cfg.out_dir, "output directory")->required();
  sub->add_option_function<std::uint64_t>(
      "--seed", [&cfg](const std::uint64_t& v) { cfg.seed = v; }, "random seed");
  sub->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_panel_inputs(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--trajectories", cfg.trajectories, "trajectories CSV")->required();
  sub->add_option("--events", cfg.events, "events CSV")->required();
}

void add_match_input(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--match", cfg.match_file, "match result JSON (default: <out>/match.json)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matched growth-gap analysis for longitudinal topic panels"};
  app.require_subcommand(1);

  RunConfig cfg;

  auto* synth = app.add_subcommand("synth", "generate a synthetic panel with ground truth");
  add_common(synth, cfg);
  synth->callback([&] { prizegrowth::run_synth(cfg); });

  auto* match = app.add_subcommand("match", "balanced optimal matching of treated topics");
  add_common(match, cfg);
  add_panel_inputs(match, cfg);
  match->add_flag("--no-replacement", cfg.no_replacement,
                  "forbid a control from serving several treated topics");
  match->callback([&] { prizegrowth::run_match(cfg); });

  auto* effects = app.add_subcommand("effects", "counterfactual growth-gap series");
  add_common(effects, cfg);
  add_panel_inputs(effects, cfg);
  add_match_input(effects, cfg);
  effects->add_option("--measure", cfg.measures, "measure (repeatable; default: all)");
  effects->callback([&] { prizegrowth::run_effects(cfg); });

  auto* did = app.add_subcommand("did", "difference-in-differences regression");
  add_common(did, cfg);
  add_panel_inputs(did, cfg);
  add_match_input(did, cfg);
  did->add_option("--measure", cfg.measures, "measure (repeatable; default: all)");
  did->add_flag("--cluster-robust", cfg.cluster_robust, "cluster SEs by topic");
  did->callback([&] { prizegrowth::run_did(cfg); });

  auto* placebo = app.add_subcommand("placebo", "pretend-winner rematch and null-effect check");
  add_common(placebo, cfg);
  add_panel_inputs(placebo, cfg);
  add_match_input(placebo, cfg);
  placebo->callback([&] { prizegrowth::run_placebo(cfg); });

  auto* signal = app.add_subcommand("signal", "prize-covariate regressions on the t=+10 gap");
  add_common(signal, cfg);
  add_panel_inputs(signal, cfg);
  add_match_input(signal, cfg);
  signal->add_option("--measure", cfg.measures, "measure (repeatable; default: all)");
  signal->add_flag("--cluster-robust", cfg.cluster_robust, "cluster SEs by topic");
  signal->callback([&] { prizegrowth::run_signal(cfg); });

  auto* diagnostics =
      app.add_subcommand("diagnostics", "sign tests, diversity, overlap, funding checks");
  add_common(diagnostics, cfg);
  add_panel_inputs(diagnostics, cfg);
  add_match_input(diagnostics, cfg);
  diagnostics->add_option("--entrant-history", cfg.entrant_history,
                          "entrant discipline-count CSV");
  diagnostics->add_option("--funding", cfg.funding, "funding mentions CSV");
  diagnostics->add_option("--overlap", cfg.overlap, "scientist-topic edge CSV");
  diagnostics->add_option("--jaccard-draws", cfg.jaccard_draws, "null-model shuffles");
  diagnostics->callback([&] { prizegrowth::run_diagnostics(cfg); });

  auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  add_common(pipeline, cfg);
  pipeline->add_option("--trajectories", cfg.trajectories,
                       "trajectories CSV (omit when the config has a gen spec)");
  pipeline->add_option("--events", cfg.events, "events CSV");
  pipeline->add_option("--entrant-history", cfg.entrant_history, "entrant discipline-count CSV");
  pipeline->add_option("--funding", cfg.funding, "funding mentions CSV");
  pipeline->add_option("--overlap", cfg.overlap, "scientist-topic edge CSV");
  pipeline->callback([&] { prizegrowth::run_pipeline(cfg); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is an input error
  } catch (const prizegrowth::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const prizegrowth::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
  return 0;
}
