#include "prizegrowth/effects.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prizegrowth/stats.hpp"
#include "prizegrowth/util.hpp"

namespace prizegrowth {

const EffectPoint* EffectSeries::at(int t) const {
  for (const auto& p : points)
    if (p.t == t) return &p;
  return nullptr;
}

std::vector<const TopicGap*> TopicGapTable::for_topic(const std::string& topic_id) const {
  std::vector<const TopicGap*> out;
  for (const auto& r : rows)
    if (r.topic_id == topic_id) out.push_back(&r);
  return out;
}

std::optional<double> TopicGapTable::delta_at(const std::string& topic_id, int t) const {
  for (const auto& r : rows)
    if (r.t == t && r.topic_id == topic_id) return r.delta;
  return std::nullopt;
}

double pct_growth(double delta) { return std::expm1(delta); }

double expected_growth(const Panel& panel, const std::vector<std::string>& peers,
                       const std::string& measure, Year prize_year, int t) {
  double sum = 0.0;
  int n = 0;
  for (const auto& pid : peers) {
    const auto& tr = panel.require(pid);
    Year year = prize_year + t;
    if (!tr.covers(year)) continue;
    sum += tr.at(measure, year);
    ++n;
  }
  if (n == 0)
    throw InputError("expected_growth: no peer observed at t=" + std::to_string(t));
  return sum / n;
}

TopicGapTable topic_gaps(const Panel& panel, const MatchResult& result,
                         const std::string& measure) {
  const auto& known = panel.measures();
  if (std::find(known.begin(), known.end(), measure) == known.end())
    throw InputError("unknown measure '" + measure + "'");

  TopicGapTable table;
  table.measure = measure;
  for (const auto& [treated_id, peers] : result.assignments) {
    const auto* ev = panel.event_for(treated_id);
    if (!ev) throw InputError("topic_gaps: '" + treated_id + "' has no event in the panel");
    const auto& tr = panel.require(treated_id);
    for (int t = -kPreWindow; t <= kPostWindow; ++t) {
      Year year = ev->prize_year + t;
      if (!tr.covers(year)) continue;
      TopicGap g;
      g.topic_id = treated_id;
      g.t = t;
      g.actual = tr.at(measure, year);
      g.expected = expected_growth(panel, peers, measure, ev->prize_year, t);
      int present = 0;
      for (const auto& pid : peers)
        if (panel.require(pid).covers(year)) ++present;
      g.n_peers = present;
      g.delta = growth_transform(g.actual) - growth_transform(g.expected);
      g.floored = g.expected < 1.0;
      g.ratio = (g.actual - g.expected) / std::max(g.expected, 1.0);
      table.rows.push_back(std::move(g));
    }
  }
  return table;
}

namespace {

EffectSeries aggregate(const TopicGapTable& table, const std::string& kind) {
  EffectSeries series;
  series.measure = table.measure;
  series.kind = kind;
  for (int t = -kPreWindow; t <= kPostWindow; ++t) {
    std::vector<double> values;
    int floored = 0;
    for (const auto& r : table.rows) {
      if (r.t != t) continue;
      values.push_back(kind == "ratio" ? r.ratio : r.delta);
      if (r.floored) ++floored;
    }
    if (values.empty()) continue;
    EffectPoint p;
    p.t = t;
    p.n = static_cast<int>(values.size());
    p.n_floored = kind == "ratio" ? floored : 0;
    if (values.size() >= 2) {
      MeanSe ms = mean_se(values);
      p.delta = ms.mean;
      p.se = ms.se;
    } else {
      p.delta = values.front();
      p.se = 0.0;
    }
    p.ci_low = p.delta - 1.96 * p.se;
    p.ci_high = p.delta + 1.96 * p.se;
    series.points.push_back(p);
  }
  return series;
}

}  // namespace

EffectSeries delta_series(const Panel& panel, const MatchResult& result,
                          const std::string& measure) {
  return aggregate(topic_gaps(panel, result, measure), "delta");
}

EffectSeries ratio_series(const Panel& panel, const MatchResult& result,
                          const std::string& measure) {
  return aggregate(topic_gaps(panel, result, measure), "ratio");
}

std::string effects_csv(const EffectSeries& series) {
  std::ostringstream out;
  out << "measure,t,delta,ci_low,ci_high,n\n";
  for (const auto& p : series.points)
    out << series.measure << ',' << p.t << ',' << format_double(p.delta) << ','
        << format_double(p.ci_low) << ',' << format_double(p.ci_high) << ',' << p.n << '\n';
  return out.str();
}

void to_json(nlohmann::json& j, const EffectPoint& p) {
  j = {{"t", p.t},          {"delta", p.delta},     {"se", p.se}, {"ci_low", p.ci_low},
       {"ci_high", p.ci_high}, {"n", p.n}, {"n_floored", p.n_floored}};
}

void to_json(nlohmann::json& j, const EffectSeries& s) {
  j = {{"measure", s.measure}, {"kind", s.kind}, {"points", s.points}};
}

}  // namespace prizegrowth
