#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "prizegrowth/effects.hpp"
#include "prizegrowth/inference.hpp"
#include "prizegrowth/panel.hpp"

namespace prizegrowth {

// Fully serializable recipe: a spec plus nothing else determines the panel.
struct GenSpec {
  int n_disciplines = 2;
  int topics_per_discipline = 100;
  Year first_year = 1980;
  int n_years = 31;
  Year prize_year_min = 1995;
  Year prize_year_max = 1995;
  double treated_fraction = 0.1;

  // log-normal-around-trend count process, one latent (level, trend) pair
  // per topic-measure plus i.i.d. yearly noise
  double level_mu = 5.0;
  double level_sd = 0.6;
  double trend_mu = 0.02;
  double trend_sd = 0.012;
  double noise_sd = 0.12;
  std::map<std::string, double> measure_offset;  // added to level_mu per measure

  // injected post-event log lift per measure; "linear" ramps t/10 * delta over
  // t = 1..10, "constant" applies the full delta from t = 1
  std::map<std::string, double> delta;
  std::string ramp = "linear";
  std::map<std::string, double> signal_coefs;  // covariate -> per-unit delta shift
  bool with_covariates = true;

  bool with_entrant_history = false;
  double diversity_slope = 0.0;  // relative entropy gap per unit of true delta_10
  double entropy_base = 2.0;     // peer-group entropy target, bits
  int entrant_labels = 16;

  bool with_funding = false;
  double funding_base = 50.0;
  double funding_total_base = 1e5;
  double funding_total_growth = 0.05;
  double funding_noise = 0.05;

  std::uint64_t seed = 1;

  void validate() const;
  std::uint64_t hash() const;  // over the canonical JSON form
};

void to_json(nlohmann::json& j, const GenSpec& s);
void from_json(const nlohmann::json& j, GenSpec& s);

struct GroundTruth {
  std::uint64_t spec_hash = 0;
  std::uint64_t panel_hash = 0;
  std::string ramp = "linear";
  std::map<std::string, double> base_delta;
  std::map<std::string, double> signal_coefs;
  // treated topic -> measure -> its per-topic delta (base + covariate shifts)
  std::map<std::string, std::map<std::string, double>> topic_delta;

  // injected log lift at event-time t (0 for t <= 0)
  double true_delta(const std::string& topic, const std::string& measure, int t) const;
  double mean_true_delta10(const std::string& measure) const;
  // average over t = 1..10 of the mean injected lift (what a DiD estimates)
  double mean_true_post(const std::string& measure) const;
};

void to_json(nlohmann::json& j, const GroundTruth& g);
void from_json(const nlohmann::json& j, GroundTruth& g);

struct SynthOutput {
  Panel panel;
  GroundTruth truth;
  std::string entrant_history_csv;  // empty unless enabled
  std::string funding_csv;          // empty unless enabled
};

SynthOutput generate(const GenSpec& spec);

std::uint64_t panel_hash(const Panel& panel);

struct GtCheckRow {
  std::string estimator;  // "delta_10" or "did_beta3"
  std::string measure;
  double estimate = 0.0;
  double truth = 0.0;
  double bias = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool covered = false;
};

struct GtCheckReport {
  std::vector<GtCheckRow> rows;
  bool all_covered() const;
};

// Bias/coverage table for pipeline estimates against the generator's truth;
// refuses to score outputs whose panel hash does not match.
GtCheckReport ground_truth_check(const Panel& panel, const GroundTruth& truth,
                                 const std::vector<EffectSeries>& series,
                                 const std::map<std::string, RegressionFit>& did_fits = {});

void to_json(nlohmann::json& j, const GtCheckRow& r);
void to_json(nlohmann::json& j, const GtCheckReport& r);

}  // namespace prizegrowth
