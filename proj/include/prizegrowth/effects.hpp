#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prizegrowth/matching.hpp"
#include "prizegrowth/panel.hpp"

namespace prizegrowth {

// One aggregated gap estimate at a single event-time.
struct EffectPoint {
  int t = 0;
  double delta = 0.0;    // mean gap across treated topics
  double se = 0.0;
  double ci_low = 0.0;   // delta +/- 1.96*SE
  double ci_high = 0.0;
  int n = 0;             // treated topics observed at t
  int n_floored = 0;     // ratio series only: denominators floored at 1
};

struct EffectSeries {
  std::string measure;
  std::string kind;  // "delta" (log gap) or "ratio"
  std::vector<EffectPoint> points;  // ascending t over [-10, +10]

  const EffectPoint* at(int t) const;
};

// Per-topic, per-t gap between a treated trajectory and its peer counterfactual.
struct TopicGap {
  std::string topic_id;
  int t = 0;
  double actual = 0.0;    // raw treated count
  double expected = 0.0;  // mean of raw peer counts at t
  double delta = 0.0;     // growth_transform(actual) - growth_transform(expected)
  double ratio = 0.0;     // (actual - expected) / max(expected, 1)
  bool floored = false;   // ratio denominator was floored
  int n_peers = 0;        // peers observed at t
};

struct TopicGapTable {
  std::string measure;
  std::vector<TopicGap> rows;  // grouped by topic, t ascending

  // rows for one topic, t ascending
  std::vector<const TopicGap*> for_topic(const std::string& topic_id) const;
  std::optional<double> delta_at(const std::string& topic_id, int t) const;
};

// e^delta - 1: log gap expressed as a growth percentage
double pct_growth(double delta);

// Mean of raw peer counts at event-time t; absent peers are dropped.
double expected_growth(const Panel& panel, const std::vector<std::string>& peers,
                       const std::string& measure, Year prize_year, int t);

TopicGapTable topic_gaps(const Panel& panel, const MatchResult& result,
                         const std::string& measure);

EffectSeries delta_series(const Panel& panel, const MatchResult& result,
                          const std::string& measure);
EffectSeries ratio_series(const Panel& panel, const MatchResult& result,
                          const std::string& measure);

// plot-ready CSV: measure,t,delta,ci_low,ci_high,n
std::string effects_csv(const EffectSeries& series);

void to_json(nlohmann::json& j, const EffectPoint& p);
void to_json(nlohmann::json& j, const EffectSeries& s);

}  // namespace prizegrowth
