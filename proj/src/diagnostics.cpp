#include "prizegrowth/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "prizegrowth/rng.hpp"
#include "prizegrowth/util.hpp"

namespace prizegrowth {

PlaceboRun placebo(const Panel& panel, const MatchResult& result, std::uint64_t seed) {
  if (result.assignments.empty()) throw InputError("placebo: empty match result");

  PlaceboRun run;
  run.seed = seed;
  Rng rng(substream_seed(seed, 0x706c));  // pretend-topic picks

  std::set<std::string> used;
  std::vector<PrizeEvent> pretend_events;
  for (const auto& [treated_id, peers] : result.assignments) {
    const auto* ev = panel.event_for(treated_id);
    if (!ev) throw InputError("placebo: '" + treated_id + "' has no event in the panel");
    std::vector<std::string> usable;
    for (const auto& pid : peers) {
      if (used.count(pid)) continue;
      // the pretend panel revalidates prize_year + 1 coverage
      if (!panel.require(pid).covers(ev->prize_year + 1)) continue;
      usable.push_back(pid);
    }
    if (usable.empty()) {
      run.dropped.push_back(treated_id);
      continue;
    }
    const std::string& pick = usable[rng.below(usable.size())];
    used.insert(pick);
    run.pretend[treated_id] = pick;
    PrizeEvent pe;
    pe.topic_id = pick;
    pe.prize_year = ev->prize_year;
    pretend_events.push_back(std::move(pe));
  }
  if (pretend_events.empty()) throw InfeasibleError("placebo: every pretend pick failed");

  std::vector<TopicTrajectory> trajectories(panel.trajectories());
  Panel pretend_panel(std::move(trajectories), std::move(pretend_events));

  // real treated topics must not reappear as controls of the pretend set
  std::set<std::string> exclude;
  for (const auto& [treated_id, _] : result.assignments) exclude.insert(treated_id);

  MatchConfig config = result.config;
  config.seed = substream_seed(seed, 1);
  PoolSet pools = build_all_pools(pretend_panel, config, &exclude);
  run.result = solve_dom(pretend_panel, pools, config);
  for (const auto& m : kCanonicalMeasures)
    run.series.push_back(delta_series(pretend_panel, run.result, m));
  return run;
}

void to_json(nlohmann::json& j, const PlaceboRun& r) {
  j = {{"seed", r.seed},
       {"pretend", r.pretend},
       {"dropped", r.dropped},
       {"result", r.result},
       {"series", r.series}};
}

FractionTest binomial_fraction_test(const std::vector<double>& gaps) {
  if (gaps.empty()) throw InputError("binomial_fraction_test: empty input");
  FractionTest out;
  int n_neg = 0;
  for (double g : gaps) {
    if (g > 0.0)
      ++out.n_pos;
    else if (g < 0.0)
      ++n_neg;
    else
      ++out.n_ties;
  }
  out.n_trials = out.n_pos + n_neg;
  if (out.n_trials == 0)
    throw InputError("binomial_fraction_test: all gaps tie at exactly 0");
  out.fraction = static_cast<double>(out.n_pos) / out.n_trials;
  out.p = binomial_two_sided_p(out.n_trials, out.n_pos);
  return out;
}

void to_json(nlohmann::json& j, const FractionTest& f) {
  j = {{"fraction", f.fraction},
       {"p", f.p},
       {"n_pos", f.n_pos},
       {"n_trials", f.n_trials},
       {"n_ties", f.n_ties}};
}

std::vector<EntrantRecord> load_entrant_history(const std::string& csv_text) {
  CsvTable t = parse_csv(csv_text, "entrant_history");
  const std::vector<std::string> expect = {"topic_id", "group", "discipline", "count"};
  if (t.header != expect)
    throw InputError("entrant_history: header must be topic_id,group,discipline,count");
  std::vector<EntrantRecord> out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    EntrantRecord rec{row[0], row[1], row[2],
                      parse_number(row[3], "entrant_history row " + std::to_string(r + 2))};
    if (rec.group != "win" && rec.group != "peer")
      throw InputError("entrant_history row " + std::to_string(r + 2) + ": group '" + rec.group +
                       "' must be win or peer");
    if (rec.count <= 0.0)
      throw InputError("entrant_history row " + std::to_string(r + 2) + ": nonpositive count");
    if (!seen.insert({rec.topic_id, rec.group, rec.discipline}).second)
      throw InputError("entrant_history: duplicate row for (" + rec.topic_id + ", " + rec.group +
                       ", " + rec.discipline + ")");
    out.push_back(std::move(rec));
  }
  return out;
}

RegressionFit diversity_gap_regression(const std::vector<double>& entropy_gaps,
                                       const std::vector<double>& delta10) {
  if (entropy_gaps.size() != delta10.size())
    throw InputError("diversity_gap_regression: unpaired inputs");
  DesignBuilder builder(entropy_gaps.size());
  builder.intercept().numeric("delta_10", delta10).response(entropy_gaps);
  return ols(builder.build());
}

DiversityReport diversity_analysis(const std::vector<EntrantRecord>& history,
                                   const TopicGapTable& gaps) {
  // per (topic, group) discipline-count vectors -> entropies
  std::map<std::string, std::map<std::string, std::vector<double>>> counts;
  for (const auto& rec : history) counts[rec.topic_id][rec.group].push_back(rec.count);

  DiversityReport report;
  std::vector<double> xs, ys;
  std::vector<double> win_pos, peer_pos, win_neg, peer_neg;
  for (const auto& [topic, groups] : counts) {
    auto wi = groups.find("win");
    auto pi = groups.find("peer");
    if (wi == groups.end() || pi == groups.end())
      throw InputError("entrant_history: topic '" + topic + "' lacks a win or peer group");
    auto entropy_of = [](const std::vector<double>& c) {
      double total = 0.0;
      for (double v : c) total += v;
      std::vector<double> p;
      p.reserve(c.size());
      for (double v : c) p.push_back(v / total);
      return shannon_entropy(p);
    };
    DiversityRow row;
    row.topic_id = topic;
    row.s_win = entropy_of(wi->second);
    row.s_peer = entropy_of(pi->second);
    row.abs_gap = row.s_win - row.s_peer;
    if (row.s_peer > 0.0) row.rel_gap = row.abs_gap / row.s_peer;
    row.delta10 = gaps.delta_at(topic, kPostWindow);
    if (row.rel_gap && row.delta10) {
      xs.push_back(*row.delta10);
      ys.push_back(*row.rel_gap);
      if (*row.delta10 >= 0.0) {
        win_pos.push_back(row.s_win);
        peer_pos.push_back(row.s_peer);
      } else {
        win_neg.push_back(row.s_win);
        peer_neg.push_back(row.s_peer);
      }
    } else {
      ++report.n_unregressed;
    }
    report.rows.push_back(std::move(row));
  }
  if (xs.size() < 3)
    throw InputError("diversity_analysis: need at least 3 topics with entropy gap and delta_10");
  report.fit = diversity_gap_regression(ys, xs);
  if (!win_pos.empty() && !peer_pos.empty()) report.ks_pos = ks_test(win_pos, peer_pos);
  if (!win_neg.empty() && !peer_neg.empty()) report.ks_neg = ks_test(win_neg, peer_neg);
  return report;
}

void to_json(nlohmann::json& j, const DiversityRow& r) {
  j = {{"topic_id", r.topic_id}, {"s_win", r.s_win}, {"s_peer", r.s_peer},
       {"abs_gap", r.abs_gap}};
  if (r.rel_gap) j["rel_gap"] = *r.rel_gap;
  if (r.delta10) j["delta_10"] = *r.delta10;
}

void to_json(nlohmann::json& j, const DiversityReport& r) {
  j = {{"rows", r.rows}, {"n_unregressed", r.n_unregressed}, {"fit", r.fit}};
  auto ks = [](const KsResult& k) { return nlohmann::json{{"d", k.d}, {"p", k.p}}; };
  if (r.ks_pos) j["ks_delta10_nonneg"] = ks(*r.ks_pos);
  if (r.ks_neg) j["ks_delta10_neg"] = ks(*r.ks_neg);
}

std::vector<Edge> load_edges(const std::string& csv_text) {
  CsvTable t = parse_csv(csv_text, "overlap");
  const std::vector<std::string> expect = {"scientist_id", "topic_id"};
  if (t.header != expect) throw InputError("overlap: header must be scientist_id,topic_id");
  std::vector<Edge> out;
  for (const auto& row : t.rows) {
    if (row[0].empty() || row[1].empty()) throw InputError("overlap: empty id");
    out.emplace_back(row[0], row[1]);
  }
  return out;
}

namespace {

std::vector<double> jaccards_from_sets(
    const std::map<std::string, std::set<std::string>>& by_topic,
    const std::vector<Edge>* pairs) {
  std::vector<double> out;
  if (pairs) {
    for (const auto& [a, b] : *pairs) {
      auto ia = by_topic.find(a);
      auto ib = by_topic.find(b);
      if (ia == by_topic.end() || ib == by_topic.end())
        throw InputError("pair topic missing from the edge list: " +
                         (ia == by_topic.end() ? a : b));
      out.push_back(jaccard(ia->second, ib->second));
    }
    return out;
  }
  for (auto ia = by_topic.begin(); ia != by_topic.end(); ++ia)
    for (auto ib = std::next(ia); ib != by_topic.end(); ++ib)
      out.push_back(jaccard(ia->second, ib->second));
  return out;
}

}  // namespace

std::vector<double> pair_jaccards(const std::vector<Edge>& edges,
                                  const std::vector<Edge>* pairs) {
  if (edges.empty()) throw InputError("pair_jaccards: empty edge list");
  std::map<std::string, std::set<std::string>> by_topic;
  for (const auto& [scientist, topic] : edges) by_topic[topic].insert(scientist);
  return jaccards_from_sets(by_topic, pairs);
}

std::vector<double> jaccard_null(const std::vector<Edge>& edges, std::uint64_t seed, int draws,
                                 const std::vector<Edge>* pairs) {
  if (edges.empty()) throw InputError("jaccard_null: empty edge list");
  if (draws < 0) throw InputError("jaccard_null: negative draw count");
  std::vector<std::string> scientists;
  scientists.reserve(edges.size());
  for (const auto& [scientist, _] : edges) scientists.push_back(scientist);

  Rng rng(substream_seed(seed, 0x6a63));
  std::vector<double> null;
  for (int d = 0; d < draws; ++d) {
    rng.shuffle(scientists);
    std::map<std::string, std::set<std::string>> by_topic;
    for (std::size_t e = 0; e < edges.size(); ++e) by_topic[edges[e].second].insert(scientists[e]);
    auto js = jaccards_from_sets(by_topic, pairs);
    null.insert(null.end(), js.begin(), js.end());
  }
  return null;
}

std::vector<FundingSeries> load_funding(const std::string& csv_text) {
  CsvTable t = parse_csv(csv_text, "funding");
  const std::vector<std::string> expect = {"topic_id", "year", "mentions", "system_total"};
  if (t.header != expect)
    throw InputError("funding: header must be topic_id,year,mentions,system_total");
  std::map<std::string, std::map<Year, std::pair<double, double>>> grouped;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    std::string where = "funding row " + std::to_string(r + 2);
    Year year = static_cast<Year>(parse_number(row[1], where + " year"));
    double mention = parse_number(row[2], where + " mentions");
    double total = parse_number(row[3], where + " system_total");
    if (mention < 0.0) throw InputError(where + ": negative mentions");
    if (!grouped[row[0]].emplace(year, std::make_pair(mention, total)).second)
      throw InputError(where + ": duplicate year " + std::to_string(year) + " for topic " +
                       row[0]);
  }
  std::vector<FundingSeries> out;
  for (const auto& [topic, by_year] : grouped) {
    FundingSeries f;
    f.topic_id = topic;
    for (const auto& [year, mg] : by_year) {
      f.years.push_back(year);
      f.mentions.push_back(mg.first);
      f.totals.push_back(mg.second);
    }
    out.push_back(std::move(f));
  }
  return out;
}

FundingSeries adjust_funding(const FundingSeries& f) {
  if (f.years.empty()) throw InputError("adjust_funding: empty series");
  double mean_g = 0.0;
  for (std::size_t i = 0; i < f.years.size(); ++i) {
    if (f.totals[i] <= 0.0)
      throw InputError("adjust_funding: nonpositive system total at year " +
                       std::to_string(f.years[i]));
    mean_g += f.totals[i];
  }
  mean_g /= static_cast<double>(f.years.size());
  FundingSeries out = f;
  out.adjusted.clear();
  for (std::size_t i = 0; i < f.years.size(); ++i)
    out.adjusted.push_back(f.mentions[i] / f.totals[i] * mean_g);
  return out;
}

void to_json(nlohmann::json& j, const FundingSeries& f) {
  j = {{"topic_id", f.topic_id},
       {"years", f.years},
       {"mentions", f.mentions},
       {"system_total", f.totals},
       {"adjusted", f.adjusted}};
}

}  // namespace prizegrowth
