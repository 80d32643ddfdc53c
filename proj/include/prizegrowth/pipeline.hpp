#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prizegrowth/matching.hpp"

namespace prizegrowth {

inline constexpr const char* kVersion = "0.1.0";

// Everything a subcommand needs, resolved from flags + optional config JSON.
// Config file schema (all keys optional unless a command requires them):
//   { "gen": {...GenSpec...}, "match": {...MatchConfig...},
//     "measures": [...], "jaccard_draws": N }
struct RunConfig {
  std::filesystem::path out_dir;
  std::filesystem::path config_path;

  std::filesystem::path trajectories;
  std::filesystem::path events;
  std::filesystem::path match_file;       // consumed by effects/did/placebo/signal/diagnostics
  std::filesystem::path entrant_history;  // optional diagnostics inputs
  std::filesystem::path funding;
  std::filesystem::path overlap;

  std::optional<std::uint64_t> seed;  // overrides config/spec seeds when set
  int threads = 1;
  bool no_replacement = false;
  bool cluster_robust = false;

  std::vector<std::string> measures;  // empty = all canonical
  int jaccard_draws = 0;              // 0 = config value or 100

  MatchConfig resolve_match_config() const;
  std::vector<std::string> resolve_measures() const;
};

// Each writes its artifacts plus a manifest-<command>.json into out_dir.
// Artifact names are fixed: trajectories.csv, events.csv, ground_truth.json,
// gen_spec.json, match.json, balance.csv, pretrends.csv,
// effects_<measure>.csv, effects_ratio_<measure>.csv, effects.json, did.json,
// placebo.json, placebo_<measure>.csv, signal.json, diagnostics.json.
void run_synth(const RunConfig& cfg);
void run_match(const RunConfig& cfg);
void run_effects(const RunConfig& cfg);
void run_did(const RunConfig& cfg);
void run_placebo(const RunConfig& cfg);
void run_signal(const RunConfig& cfg);
void run_diagnostics(const RunConfig& cfg);
void run_pipeline(const RunConfig& cfg);

}  // namespace prizegrowth
