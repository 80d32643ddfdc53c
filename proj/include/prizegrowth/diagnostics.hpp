#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prizegrowth/effects.hpp"
#include "prizegrowth/inference.hpp"
#include "prizegrowth/matching.hpp"
#include "prizegrowth/panel.hpp"
#include "prizegrowth/stats.hpp"

namespace prizegrowth {

// -- placebo --------------------------------------------------------------

struct PlaceboRun {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> pretend;  // original treated -> relabeled peer
  std::vector<std::string> dropped;            // originals with no usable peer left
  MatchResult result;                          // match of the pretend set
  std::vector<EffectSeries> series;            // delta series per canonical measure
};

// Relabels one matched peer per treated topic as "treated" at the same prize
// year, excludes the real treated topics from all pools, and reruns the
// match + gap pipeline on the pretend set.
PlaceboRun placebo(const Panel& panel, const MatchResult& result, std::uint64_t seed);

void to_json(nlohmann::json& j, const PlaceboRun& r);

// -- per-topic sign diagnostics -------------------------------------------

struct FractionTest {
  double fraction = 0.0;  // positive share among non-tied gaps
  double p = 1.0;         // exact two-sided binomial vs 0.5
  int n_pos = 0;
  int n_trials = 0;       // ties at exactly 0 are dropped
  int n_ties = 0;
};

FractionTest binomial_fraction_test(const std::vector<double>& gaps);

void to_json(nlohmann::json& j, const FractionTest& f);

// -- paradigmatic diversity -----------------------------------------------

struct EntrantRecord {
  std::string topic_id;
  std::string group;  // "win" or "peer"
  std::string discipline;
  double count = 0.0;
};

std::vector<EntrantRecord> load_entrant_history(const std::string& csv_text);

struct DiversityRow {
  std::string topic_id;
  double s_win = 0.0;   // entropy (bits) of the winning topic's entrant history
  double s_peer = 0.0;  // same for its matched peers
  double abs_gap = 0.0;          // s_win - s_peer
  std::optional<double> rel_gap; // abs_gap / s_peer, absent when s_peer = 0
  std::optional<double> delta10;
};

struct DiversityReport {
  std::vector<DiversityRow> rows;
  int n_unregressed = 0;  // rows lacking rel_gap or delta10
  RegressionFit fit;      // rel_gap on delta_10
  std::optional<KsResult> ks_pos;  // win vs peer entropies, delta10 >= 0 topics
  std::optional<KsResult> ks_neg;  // same for delta10 < 0
};

RegressionFit diversity_gap_regression(const std::vector<double>& entropy_gaps,
                                       const std::vector<double>& delta10);

DiversityReport diversity_analysis(const std::vector<EntrantRecord>& history,
                                   const TopicGapTable& gaps);

void to_json(nlohmann::json& j, const DiversityRow& r);
void to_json(nlohmann::json& j, const DiversityReport& r);

// -- match-quality validation via scientist overlap -----------------------

using Edge = std::pair<std::string, std::string>;  // scientist id, topic id

std::vector<Edge> load_edges(const std::string& csv_text);  // scientist_id,topic_id

// Jaccard similarity per topic pair; default all unordered pairs of topics
// present in the edge list, or an explicit pair list.
std::vector<double> pair_jaccards(const std::vector<Edge>& edges,
                                  const std::vector<Edge>* pairs = nullptr);

// Null distribution: shuffle scientist endpoints across edges (topic column
// fixed, so per-topic degree is preserved) and recompute the pair Jaccards.
std::vector<double> jaccard_null(const std::vector<Edge>& edges, std::uint64_t seed, int draws,
                                 const std::vector<Edge>* pairs = nullptr);

// -- funding normalization ------------------------------------------------

struct FundingSeries {
  std::string topic_id;
  std::vector<Year> years;      // ascending
  std::vector<double> mentions;
  std::vector<double> totals;   // system-wide G(t)
  std::vector<double> adjusted; // filled by adjust_funding
};

std::vector<FundingSeries> load_funding(const std::string& csv_text);

// adjusted(t) = mention(t) / G(t) * mean(G)
FundingSeries adjust_funding(const FundingSeries& f);

void to_json(nlohmann::json& j, const FundingSeries& f);

}  // namespace prizegrowth
