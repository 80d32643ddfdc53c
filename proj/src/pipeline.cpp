#include "prizegrowth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <map>
#include <set>

#include <json.hpp>

#include "prizegrowth/diagnostics.hpp"
#include "prizegrowth/effects.hpp"
#include "prizegrowth/inference.hpp"
#include "prizegrowth/rng.hpp"
#include "prizegrowth/synth.hpp"
#include "prizegrowth/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace prizegrowth {

namespace {

json load_config_json(const fs::path& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("config file " + path.string() + ": " + e.what());
  }
}

struct Resolved {
  json config = json::object();
  MatchConfig match;
  std::vector<std::string> measures;
  std::uint64_t seed = 0;
  int jaccard_draws = 100;
};

Resolved resolve(const RunConfig& cfg) {
  Resolved r;
  r.config = load_config_json(cfg.config_path);
  if (!r.config.is_object()) return r;  // bare gen specs handled by run_synth
  if (r.config.contains("match")) r.config.at("match").get_to(r.match);
  if (cfg.no_replacement) r.match.replacement = false;
  r.match.threads = cfg.threads;
  if (r.config.contains("seed")) r.config.at("seed").get_to(r.seed);
  if (cfg.seed) r.seed = *cfg.seed;
  r.match.seed = r.seed;
  if (r.config.contains("measures")) r.config.at("measures").get_to(r.measures);
  if (!cfg.measures.empty()) r.measures = cfg.measures;
  if (r.measures.empty()) r.measures = kCanonicalMeasures;
  if (r.config.contains("jaccard_draws")) r.config.at("jaccard_draws").get_to(r.jaccard_draws);
  if (cfg.jaccard_draws > 0) r.jaccard_draws = cfg.jaccard_draws;
  return r;
}

json resolved_config_json(const Resolved& r) {
  return json{{"match", r.match},
              {"measures", r.measures},
              {"seed", r.seed},
              {"jaccard_draws", r.jaccard_draws}};
}

std::string now_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Collects input/output hashes and writes the per-command manifest; the
// manifest timestamp is the only non-reproducible byte any command emits.
class Emitter {
 public:
  Emitter(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    if (dir_.empty()) throw InputError("missing --out directory");
    fs::create_directories(dir_);
  }

  void input(const std::string& name, const std::string& content) {
    inputs_[name] = hash_hex(fnv1a(content));
  }

  void write(const std::string& name, const std::string& content) {
    atomic_write(dir_ / name, content);
    outputs_[name] = hash_hex(fnv1a(content));
  }

  void manifest(const json& resolved_config, std::uint64_t seed, int threads,
                const json& extra = json::object()) {
    json m{{"command", command_},
           {"version", kVersion},
           {"seed", seed},
           {"threads", threads},
           {"config_hash", hash_hex(fnv1a(resolved_config.dump()))},
           {"config", resolved_config},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"generated_at", now_iso()}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    atomic_write(dir_ / ("manifest-" + command_ + ".json"), dump(m));
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string command_;
  json inputs_ = json::object();
  json outputs_ = json::object();
};

std::string require_file(const fs::path& p, const std::string& what, const std::string& hint) {
  if (p.empty())
    throw InputError("missing prerequisite artifact: " + what + " (" + hint + ")");
  if (!fs::exists(p))
    throw InputError("missing prerequisite artifact: " + p.string() + " (" + hint + ")");
  return read_file(p);
}

Panel load_inputs(const RunConfig& cfg, Emitter& em) {
  std::string tr = require_file(cfg.trajectories, "--trajectories", "panel CSV required");
  std::string ev = require_file(cfg.events, "--events", "events CSV required");
  em.input(cfg.trajectories.filename().string(), tr);
  em.input(cfg.events.filename().string(), ev);
  return load_panel(cfg.trajectories, cfg.events);
}

fs::path match_path(const RunConfig& cfg) {
  return cfg.match_file.empty() ? cfg.out_dir / "match.json" : cfg.match_file;
}

MatchResult load_match(const RunConfig& cfg, Emitter& em) {
  fs::path p = match_path(cfg);
  std::string text = require_file(p, p.string(), "run the match command first");
  em.input(p.filename().string(), text);
  try {
    return json::parse(text).get<MatchResult>();
  } catch (const json::exception& e) {
    throw InputError("cannot parse match result " + p.string() + ": " + e.what());
  }
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw InputError("percentile of empty sample");
  std::sort(v.begin(), v.end());
  double idx = q * (static_cast<double>(v.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
  double w = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace

MatchConfig RunConfig::resolve_match_config() const { return resolve(*this).match; }

std::vector<std::string> RunConfig::resolve_measures() const { return resolve(*this).measures; }

void run_synth(const RunConfig& cfg) {
  if (cfg.config_path.empty())
    throw InputError("synth requires --config with a generator spec");
  json raw = load_config_json(cfg.config_path);
  GenSpec spec = (raw.is_object() && raw.contains("gen") ? raw.at("gen") : raw).get<GenSpec>();
  if (cfg.seed) spec.seed = *cfg.seed;
  spec.validate();

  SynthOutput out = generate(spec);
  Emitter em(cfg.out_dir, "synth");
  em.write("trajectories.csv", serialize_trajectories(out.panel));
  em.write("events.csv", serialize_events(out.panel));
  em.write("gen_spec.json", dump(json(spec)));
  em.write("ground_truth.json", dump(json(out.truth)));
  if (!out.entrant_history_csv.empty()) em.write("entrant_history.csv", out.entrant_history_csv);
  if (!out.funding_csv.empty()) em.write("funding.csv", out.funding_csv);
  em.manifest(json{{"gen", spec}}, spec.seed, cfg.threads);
}

void run_match(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "match");
  Panel panel = load_inputs(cfg, em);

  PoolSet pools = build_all_pools(panel, r.match);
  MatchResult result = solve_dom(panel, pools, r.match);
  em.write("match.json", dump(json(result)));
  em.write("balance.csv", balance_csv(result.balance));
  if (result.assignments.size() >= 2) {
    em.write("pretrends.csv", pretrends_csv(verify_pretrends(panel, result)));
  } else {
    // single treated topic: per-cell t-tests are undefined
    em.write("pretrends.csv", "measure,t,mean,se,t_stat,p\n");
  }
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_effects(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "effects");
  Panel panel = load_inputs(cfg, em);
  MatchResult match = load_match(cfg, em);

  json all{{"delta", json::array()}, {"ratio", json::array()}};
  for (const auto& m : r.measures) {
    EffectSeries ds = delta_series(panel, match, m);
    EffectSeries rs = ratio_series(panel, match, m);
    em.write("effects_" + m + ".csv", effects_csv(ds));
    em.write("effects_ratio_" + m + ".csv", effects_csv(rs));
    all["delta"].push_back(ds);
    all["ratio"].push_back(rs);
  }
  em.write("effects.json", dump(all));
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_did(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "did");
  Panel panel = load_inputs(cfg, em);
  MatchResult match = load_match(cfg, em);

  json out = json::object();
  for (const auto& m : r.measures) {
    RegressionFit fit = did(panel, match, DidSpec{m, cfg.cluster_robust});
    json entry = fit.table();
    entry["beta3"] = fit.require("treat_x_period").estimate;
    out[m] = std::move(entry);
  }
  em.write("did.json", dump(out));
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_placebo(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "placebo");
  Panel panel = load_inputs(cfg, em);
  MatchResult match = load_match(cfg, em);

  PlaceboRun run = placebo(panel, match, r.seed);
  em.write("placebo.json", dump(json(run)));
  for (const auto& s : run.series) em.write("placebo_" + s.measure + ".csv", effects_csv(s));
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_signal(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "signal");
  Panel panel = load_inputs(cfg, em);
  MatchResult match = load_match(cfg, em);

  json out = json::object();
  for (const auto& m : r.measures)
    out[m] = signal_regression(panel, match, SignalSpec{m, cfg.cluster_robust}).table();
  em.write("signal.json", dump(out));
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_diagnostics(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  Emitter em(cfg.out_dir, "diagnostics");
  Panel panel = load_inputs(cfg, em);
  MatchResult match = load_match(cfg, em);

  json out = json::object();

  json fractions = json::object();
  for (const auto& m : r.measures) {
    TopicGapTable gaps = topic_gaps(panel, match, m);
    std::vector<double> d10;
    for (const auto& row : gaps.rows)
      if (row.t == kPostWindow) d10.push_back(row.delta);
    if (d10.empty()) continue;
    fractions[m] = binomial_fraction_test(d10);
  }
  out["fraction_test"] = std::move(fractions);

  if (!cfg.entrant_history.empty()) {
    std::string text = require_file(cfg.entrant_history, cfg.entrant_history.string(),
                                    "entrant history CSV");
    em.input(cfg.entrant_history.filename().string(), text);
    TopicGapTable gaps = topic_gaps(panel, match, "publications");
    out["diversity"] = diversity_analysis(load_entrant_history(text), gaps);
  }

  if (!cfg.overlap.empty()) {
    std::string text = require_file(cfg.overlap, cfg.overlap.string(), "scientist-topic CSV");
    em.input(cfg.overlap.filename().string(), text);
    std::vector<Edge> edges = load_edges(text);
    std::set<std::string> covered;
    for (const auto& [_, topic] : edges) covered.insert(topic);
    std::vector<Edge> pairs;
    int skipped = 0;
    for (const auto& [treated_id, peers] : match.assignments) {
      for (const auto& pid : peers) {
        if (covered.count(treated_id) && covered.count(pid))
          pairs.emplace_back(treated_id, pid);
        else
          ++skipped;
      }
    }
    if (pairs.empty()) throw InputError("overlap: no matched pair is covered by the edge list");
    std::vector<double> observed = pair_jaccards(edges, &pairs);
    std::vector<double> null =
        jaccard_null(edges, substream_seed(r.seed, 2), r.jaccard_draws, &pairs);
    double obs_mean = 0.0;
    for (double v : observed) obs_mean += v;
    obs_mean /= static_cast<double>(observed.size());
    double null_p95 = percentile(null, 0.95);
    out["jaccard"] = json{{"n_pairs", pairs.size()},
                          {"n_skipped", skipped},
                          {"draws", r.jaccard_draws},
                          {"observed_mean", obs_mean},
                          {"observed_p50", percentile(observed, 0.5)},
                          {"null_mean", [&] {
                             double s = 0.0;
                             for (double v : null) s += v;
                             return s / static_cast<double>(null.size());
                           }()},
                          {"null_p95", null_p95},
                          {"observed_mean_exceeds_null_p95", obs_mean > null_p95}};
  }

  if (!cfg.funding.empty()) {
    std::string text = require_file(cfg.funding, cfg.funding.string(), "funding CSV");
    em.input(cfg.funding.filename().string(), text);
    json adjusted = json::array();
    for (const auto& f : load_funding(text)) adjusted.push_back(adjust_funding(f));
    out["funding"] = std::move(adjusted);
  }

  em.write("diagnostics.json", dump(out));
  em.manifest(resolved_config_json(r), r.seed, cfg.threads);
}

void run_pipeline(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  RunConfig stage = cfg;
  std::vector<std::string> stages;
  json skipped = json::object();

  bool has_gen = r.config.is_object() && r.config.contains("gen");
  if (has_gen) {
    run_synth(cfg);
    stages.push_back("synth");
    stage.trajectories = cfg.out_dir / "trajectories.csv";
    stage.events = cfg.out_dir / "events.csv";
    if (fs::exists(cfg.out_dir / "entrant_history.csv") && stage.entrant_history.empty())
      stage.entrant_history = cfg.out_dir / "entrant_history.csv";
    if (fs::exists(cfg.out_dir / "funding.csv") && stage.funding.empty())
      stage.funding = cfg.out_dir / "funding.csv";
  }
  stage.match_file = cfg.out_dir / "match.json";

  run_match(stage);
  stages.push_back("match");
  run_effects(stage);
  stages.push_back("effects");
  run_did(stage);
  stages.push_back("did");
  run_placebo(stage);
  stages.push_back("placebo");

  // signal needs every event to carry the full covariate set
  Panel panel = load_panel(stage.trajectories, stage.events);
  bool covariates_complete = !panel.events().empty();
  for (const auto& ev : panel.events())
    for (const auto& name : PrizeEvent::covariate_names())
      if (!ev.covariate(name)) covariates_complete = false;
  if (covariates_complete) {
    run_signal(stage);
    stages.push_back("signal");
  } else {
    skipped["signal"] = "events are missing covariates";
  }

  run_diagnostics(stage);
  stages.push_back("diagnostics");

  Emitter em(cfg.out_dir, "pipeline");
  em.manifest(resolved_config_json(r), r.seed, cfg.threads,
              json{{"stages", stages}, {"skipped", skipped}});
}

}  // namespace prizegrowth
