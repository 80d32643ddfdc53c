#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "prizegrowth/diagnostics.hpp"
#include "prizegrowth/effects.hpp"
#include "prizegrowth/inference.hpp"
#include "prizegrowth/matching.hpp"
#include "prizegrowth/stats.hpp"
#include "prizegrowth/synth.hpp"
#include "prizegrowth/util.hpp"

using namespace prizegrowth;

namespace {

GenSpec small_spec() {
  GenSpec s;
  s.n_disciplines = 2;
  s.topics_per_discipline = 50;
  s.first_year = 1980;
  s.n_years = 31;
  s.prize_year_min = 1993;
  s.prize_year_max = 1997;
  s.treated_fraction = 0.1;
  s.seed = 42;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic and seed sensitive") {
  GenSpec s = small_spec();
  SynthOutput a = generate(s);
  SynthOutput b = generate(s);
  CHECK(serialize_trajectories(a.panel) == serialize_trajectories(b.panel));
  CHECK(serialize_events(a.panel) == serialize_events(b.panel));
  nlohmann::json ja = a.truth, jb = b.truth;
  CHECK(ja.dump(2) == jb.dump(2));
  CHECK(panel_hash(a.panel) == panel_hash(b.panel));

  GenSpec other = s;
  other.seed = 43;
  SynthOutput c = generate(other);
  CHECK(panel_hash(c.panel) != panel_hash(a.panel));
  CHECK(other.hash() != s.hash());

  // hash agrees with the documented definition
  CHECK(a.truth.panel_hash ==
        fnv1a(serialize_trajectories(a.panel) + '\x1f' + serialize_events(a.panel)));
  CHECK(a.truth.spec_hash == s.hash());
}

TEST_CASE("generated panels have the requested shape") {
  GenSpec s = small_spec();
  SynthOutput out = generate(s);
  const Panel& p = out.panel;
  CHECK(p.n_topics() == 100);
  CHECK(p.disciplines() == std::set<std::string>{"disc00", "disc01"});
  CHECK(p.events().size() == 10);  // lround(0.1 * 50) per discipline
  CHECK(out.truth.topic_delta.size() == 10);
  for (const auto& ev : p.events()) {
    CHECK(ev.prize_year >= 1993);
    CHECK(ev.prize_year <= 1997);
    REQUIRE(ev.recency.has_value());
    CHECK(*ev.recency >= 0.0);
    CHECK(*ev.recency < 30.0);
    CHECK((*ev.money == 0.0 || *ev.money == 1.0));
    CHECK((*ev.specialty == 0.0 || *ev.specialty == 1.0));
    CHECK((*ev.winner_top == 0.0 || *ev.winner_top == 1.0));
    CHECK(*ev.prize_age >= 30.0);
    CHECK(*ev.prize_age < 80.0);
    CHECK(*ev.conferrals >= 1.0);
    CHECK(*ev.conferrals <= 5.0);
  }
  for (const auto& tr : p.trajectories()) {
    CHECK(tr.n_years() == 31);
    CHECK(tr.first_year == 1980);
    for (const auto& m : kCanonicalMeasures)
      for (double v : tr.values.at(m)) {
        CHECK(v >= 0.0);
        CHECK(v == std::round(v));  // rounded counts
      }
  }

  GenSpec bare = s;
  bare.with_covariates = false;
  SynthOutput plain = generate(bare);
  for (const auto& ev : plain.panel.events()) CHECK(!ev.recency.has_value());

  GenSpec none = s;
  none.treated_fraction = 0.0;
  CHECK(generate(none).panel.events().empty());
}

TEST_CASE("injected lift shifts exactly the treated post-event cells") {
  GenSpec base = small_spec();
  base.delta["publications"] = 0.0;
  GenSpec lifted = base;
  lifted.delta["publications"] = 0.6;
  lifted.ramp = "constant";
  base.ramp = "constant";

  SynthOutput a = generate(base), b = generate(lifted);
  for (const auto& tr : a.panel.trajectories()) {
    const auto& lr = b.panel.require(tr.topic_id);
    const auto* ev = b.panel.event_for(tr.topic_id);
    for (std::size_t k = 0; k < tr.values.at("publications").size(); ++k) {
      double va = tr.values.at("publications")[k];
      double vb = lr.values.at("publications")[k];
      int t = ev ? static_cast<int>(tr.first_year + static_cast<int>(k) - ev->prize_year) : 0;
      if (ev && t >= 1) {
        CHECK(vb > va);  // the lift raises every post-event count
      } else {
        CHECK(va == vb);  // same seed, untouched cells identical
      }
    }
    // other measures share the draws and carry no lift
    CHECK(tr.values.at("citations") == lr.values.at("citations"));
  }
}

TEST_CASE("ground truth ramps and per-topic deltas") {
  GenSpec s = small_spec();
  s.delta["publications"] = 0.4;
  s.signal_coefs["recency"] = 0.01;
  SynthOutput out = generate(s);
  const GroundTruth& g = out.truth;
  CHECK(g.ramp == "linear");
  CHECK(g.base_delta.at("publications") == 0.4);
  CHECK(g.base_delta.at("citations") == 0.0);

  for (const auto& [topic, per_measure] : g.topic_delta) {
    const auto* ev = out.panel.event_for(topic);
    REQUIRE(ev != nullptr);
    double want = 0.4 + 0.01 * *ev->recency;
    CHECK(per_measure.at("publications") == doctest::Approx(want).epsilon(1e-12));
    // the covariate shift applies to every measure on top of its base
    CHECK(per_measure.at("citations") == doctest::Approx(0.01 * *ev->recency).epsilon(1e-12));

    // linear ramp: half the lift at t=5, full at t=10, none before the event
    CHECK(g.true_delta(topic, "publications", 0) == 0.0);
    CHECK(g.true_delta(topic, "publications", 5) == doctest::Approx(0.5 * want).epsilon(1e-12));
    CHECK(g.true_delta(topic, "publications", 10) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(g.true_delta("nope", "publications", 10) == 0.0);

  // linear ramp averages to 0.55 delta over t = 1..10
  CHECK(g.mean_true_post("publications") ==
        doctest::Approx(0.55 * g.mean_true_delta10("publications")).epsilon(1e-12));

  GenSpec c = s;
  c.ramp = "constant";
  GroundTruth gc = generate(c).truth;
  CHECK(gc.true_delta(gc.topic_delta.begin()->first, "publications", 1) ==
        doctest::Approx(gc.topic_delta.begin()->second.at("publications")).epsilon(1e-12));
  CHECK(gc.mean_true_post("publications") ==
        doctest::Approx(gc.mean_true_delta10("publications")).epsilon(1e-12));
}

TEST_CASE("gen spec json round trip and validation") {
  GenSpec s = small_spec();
  s.delta["citations"] = 0.25;
  s.measure_offset["citations"] = 1.0;
  s.signal_coefs["money"] = 0.05;
  s.with_entrant_history = true;
  s.diversity_slope = 0.3;
  s.with_funding = true;
  nlohmann::json j;
  to_json(j, s);
  GenSpec t;
  from_json(j, t);
  nlohmann::json j2;
  to_json(j2, t);
  CHECK(j.dump(2) == j2.dump(2));
  CHECK(t.hash() == s.hash());

  GenSpec d;
  from_json(nlohmann::json::object(), d);  // all defaults
  CHECK(d.topics_per_discipline == 100);
  CHECK(d.ramp == "linear");

  auto bad = [](auto&& mutate) {
    GenSpec g;
    g.n_disciplines = 1;
    g.topics_per_discipline = 20;
    mutate(g);
    CHECK_THROWS_AS(g.validate(), InputError);
  };
  bad([](GenSpec& g) { g.n_disciplines = 0; });
  bad([](GenSpec& g) { g.treated_fraction = 1.5; });
  bad([](GenSpec& g) { g.ramp = "quadratic"; });
  bad([](GenSpec& g) { g.prize_year_min = 1985; });           // no room for pre-window
  bad([](GenSpec& g) { g.prize_year_max = 2010; });           // no post-event year
  bad([](GenSpec& g) { g.prize_year_min = 1997; g.prize_year_max = 1995; });
  bad([](GenSpec& g) { g.delta["patents"] = 0.1; });          // unknown measure
  bad([](GenSpec& g) { g.signal_coefs["recency"] = 0.1; g.with_covariates = false; });
  bad([](GenSpec& g) { g.signal_coefs["flavor"] = 0.1; });    // unknown covariate
  bad([](GenSpec& g) { g.level_sd = -0.1; });
  bad([](GenSpec& g) { g.level_mu = 25.0; });
  bad([](GenSpec& g) { g.with_entrant_history = true; g.entropy_base = 4.0; });  // log2(16)
  bad([](GenSpec& g) { g.with_funding = true; g.funding_base = 0.0; });
}

TEST_CASE("measure offsets shift one measure's scale") {
  GenSpec s = small_spec();
  s.measure_offset["citations"] = 1.0;
  SynthOutput out = generate(s);
  double lp = 0.0, lc = 0.0;
  int n = 0;
  for (const auto& tr : out.panel.trajectories())
    for (std::size_t k = 0; k < tr.values.at("publications").size(); ++k) {
      lp += growth_transform(tr.values.at("publications")[k]);
      lc += growth_transform(tr.values.at("citations")[k]);
      ++n;
    }
  CHECK(lc / n > lp / n + 0.5);  // offset of 1 in log space
}

TEST_CASE("null panels keep treated and control draws exchangeable") {
  GenSpec s;
  s.n_disciplines = 1;
  s.topics_per_discipline = 200;
  s.prize_year_min = s.prize_year_max = 1995;
  s.treated_fraction = 0.25;
  s.seed = 7;
  SynthOutput out = generate(s);
  std::vector<double> treated, control;
  for (const auto& tr : out.panel.trajectories()) {
    double v = growth_transform(tr.at("publications", 2005));
    (out.panel.is_treated(tr.topic_id) ? treated : control).push_back(v);
  }
  CHECK(treated.size() == 50);
  CHECK(control.size() == 150);
  KsResult ks = ks_test(treated, control);
  CHECK(ks.p > 0.01);
}

TEST_CASE("entrant histories plant a diversity premium for growing topics") {
  GenSpec s = small_spec();
  s.delta["publications"] = 0.5;
  s.ramp = "constant";
  s.with_entrant_history = true;
  s.diversity_slope = 0.3;
  SynthOutput out = generate(s);
  REQUIRE(!out.entrant_history_csv.empty());
  auto records = load_entrant_history(out.entrant_history_csv);
  CHECK(!records.empty());

  std::map<std::string, std::map<std::string, std::vector<double>>> counts;
  for (const auto& r : records) {
    CHECK((r.group == "win" || r.group == "peer"));
    CHECK(r.count >= 1.0);
    CHECK(r.discipline.rfind("hist", 0) == 0);
    counts[r.topic_id][r.group].push_back(r.count);
  }
  CHECK(counts.size() == out.truth.topic_delta.size());
  double mean_rel = 0.0;
  for (const auto& [topic, by_group] : counts) {
    REQUIRE(by_group.count("win"));
    REQUIRE(by_group.count("peer"));
    auto entropy_of = [](const std::vector<double>& c) {
      double total = 0.0;
      for (double v : c) total += v;
      std::vector<double> p;
      for (double v : c) p.push_back(v / total);
      return shannon_entropy(p);
    };
    double sw = entropy_of(by_group.at("win")), sp = entropy_of(by_group.at("peer"));
    CHECK(sp > 0.5);
    CHECK(sp < 4.0);
    mean_rel += (sw - sp) / sp;
  }
  mean_rel /= static_cast<double>(counts.size());
  // slope 0.3 times delta 0.5 = 15% premium, up to noise and discretization
  CHECK(mean_rel > 0.08);
  CHECK(mean_rel < 0.25);
}

TEST_CASE("funding series are emitted per treated topic") {
  GenSpec s = small_spec();
  s.with_funding = true;
  SynthOutput out = generate(s);
  REQUIRE(!out.funding_csv.empty());
  auto series = load_funding(out.funding_csv);
  CHECK(series.size() == out.truth.topic_delta.size());
  for (const auto& f : series) {
    CHECK(f.years.size() == 31);
    CHECK(f.years.front() == 1980);
    CHECK(f.years.back() == 2010);
    for (double g : f.totals) CHECK(g > 0.0);
    for (double m : f.mentions) CHECK(m >= 0.0);
    // totals grow by construction
    CHECK(f.totals.back() > f.totals.front());
  }
}

TEST_CASE("ground truth check scores estimates and rejects foreign panels") {
  GenSpec s;
  s.n_disciplines = 1;
  s.topics_per_discipline = 60;
  s.prize_year_min = s.prize_year_max = 1995;
  s.treated_fraction = 0.1;
  s.delta["publications"] = 0.5;
  s.ramp = "constant";
  s.noise_sd = 0.08;
  s.seed = 11;
  SynthOutput out = generate(s);

  MatchConfig cfg;
  cfg.seed = 1;
  auto pools = build_all_pools(out.panel, cfg);
  REQUIRE(pools.unmatchable.empty());
  MatchResult match = solve_dom(out.panel, pools, cfg);

  std::vector<EffectSeries> series{delta_series(out.panel, match, "publications")};
  std::map<std::string, RegressionFit> fits;
  fits["publications"] = did(out.panel, match, DidSpec{"publications", false});

  GtCheckReport rep = ground_truth_check(out.panel, out.truth, series, fits);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(row.measure == "publications");
    CHECK(row.bias == doctest::Approx(row.estimate - row.truth).epsilon(1e-12));
    CHECK(row.covered == (row.ci_low <= row.truth && row.truth <= row.ci_high));
    // constant ramp, so both estimators target 0.5
    CHECK(row.truth == doctest::Approx(out.truth.mean_true_delta10("publications")).epsilon(1e-12));
    CHECK(std::abs(row.estimate - 0.5) < 0.15);
  }

  // a perturbed panel no longer matches the recorded hash
  auto ts = out.panel.trajectories();
  ts[0].values["publications"][0] += 1.0;
  Panel altered(ts, out.panel.events());
  CHECK_THROWS_AS(ground_truth_check(altered, out.truth, series, fits), InputError);

  nlohmann::json j = rep;
  CHECK(j.contains("all_covered"));
  CHECK(j["rows"].size() == 2);
}
