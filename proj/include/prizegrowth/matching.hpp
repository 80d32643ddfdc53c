#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prizegrowth/panel.hpp"

namespace prizegrowth {

struct MatchConfig {
  int pool_size = 40;
  int peers_per_treated = 5;
  double alpha = 0.05;       // sign-balance binomial test level
  bool replacement = true;   // may one control serve several treated topics
  int exactness_budget = 24; // exact search when n_treated * max_pool_size <= budget
  std::uint64_t seed = 0;    // perturbation restarts when local search stalls
  int threads = 1;
  int max_passes = 200;      // local-search pass cap
  int max_restarts = 8;
};

struct DistanceRecord {
  std::string treated_id;
  std::string candidate_id;
  double theta = 0.0;
};

struct CandidatePool {
  std::string treated_id;
  Year prize_year = 0;
  std::vector<DistanceRecord> candidates;  // ascending theta, ties by id
};

struct PoolSet {
  std::vector<CandidatePool> pools;        // ordered by treated_id
  std::vector<std::string> unmatchable;    // treated topics with < peers_per_treated candidates
};

// One of the 55 pre-period covariate cells (measure n, event time t <= 0).
struct BalanceCell {
  std::string measure;
  int t = 0;               // -10..0
  double mean = 0.0;       // mean_i Delta_{i,n}(t)
  double se = 0.0;
  bool pass = false;       // |mean| < 1.96 * se (degenerate rules below)
  int n_pos = 0;
  int n_neg = 0;
  double sign_p = 1.0;     // exact two-sided binomial vs 0.5
  bool sign_pass = true;   // sign_p >= alpha
};

struct BalanceReport {
  std::vector<BalanceCell> cells;  // measure-major, t ascending; 55 when 5 measures
  int n_treated = 0;
  bool all_pass() const;
  // index of the cell with the largest |mean| / (1.96 se) ratio among failures,
  // or the failing sign cell with smallest p; -1 when all pass
  int worst_cell() const;
  std::string describe_cell(int idx) const;
};

struct MatchResult {
  std::map<std::string, std::vector<std::string>> assignments;  // treated -> 5 controls
  double objective = 0.0;                                       // total theta of chosen pairs
  BalanceReport balance;
  std::vector<std::string> unmatchable;
  MatchConfig config;
  bool exact = false;  // solved by the exhaustive branch-and-bound path
};

struct PretrendCell {
  std::string measure;
  int t = 0;
  double mean = 0.0, se = 0.0, t_stat = 0.0, p = 1.0;
};

struct PretrendReport {
  std::vector<PretrendCell> cells;
  int n_treated = 0;
  double min_p() const;
};

// Mean squared gap of the transformed trajectories over the 11-year x 5-measure
// pre-window ending at prize_year.
double theta(const TopicTrajectory& treated, const TopicTrajectory& candidate, Year prize_year);

// Same-discipline untreated topics with the pool_size smallest theta, ascending.
// Topics in `exclude` or without the full pre-window are skipped. Throws
// InfeasibleError when fewer than peers_per_treated candidates exist.
CandidatePool build_pool(const Panel& panel, const PrizeEvent& event, const MatchConfig& config,
                         const std::set<std::string>* exclude = nullptr);

// Pools for every event; unmatchable treated topics are reported and excluded
// rather than failing the run.
PoolSet build_all_pools(const Panel& panel, const MatchConfig& config,
                        const std::set<std::string>* exclude = nullptr);

// Selects peers_per_treated controls per treated topic minimizing total theta
// subject to all balance cells passing. Exact branch and bound on small
// instances, greedy + local-search repair otherwise. Throws InfeasibleError
// naming the worst-violated cell when no feasible assignment is found.
MatchResult solve_dom(const Panel& panel, const PoolSet& pools, const MatchConfig& config);

// Recomputes every Delta cell from the assignment (independently of solver
// internals) and runs a two-sided one-sample t test per cell.
PretrendReport verify_pretrends(const Panel& panel, const MatchResult& result);

void to_json(nlohmann::json& j, const MatchConfig& c);
void from_json(const nlohmann::json& j, MatchConfig& c);
void to_json(nlohmann::json& j, const MatchResult& r);
void from_json(const nlohmann::json& j, MatchResult& r);
std::string balance_csv(const BalanceReport& report);
std::string pretrends_csv(const PretrendReport& report);

}  // namespace prizegrowth
