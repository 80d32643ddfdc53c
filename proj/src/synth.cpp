#include "prizegrowth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "prizegrowth/rng.hpp"
#include "prizegrowth/util.hpp"

namespace prizegrowth {

namespace {

// substream tags keep the independent draw streams from colliding
constexpr std::uint64_t kStreamTopic = 0x100000000ull;
constexpr std::uint64_t kStreamSelect = 0x200000000ull;
constexpr std::uint64_t kStreamEvent = 0x300000000ull;
constexpr std::uint64_t kStreamEntrant = 0x400000000ull;
constexpr std::uint64_t kStreamFunding = 0x500000000ull;

std::string discipline_name(int d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "disc%02d", d);
  return buf;
}

std::string topic_name(int d, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "disc%02d_t%04d", d, i);
  return buf;
}

double ramp_lift(const std::string& ramp, double delta, int t) {
  if (t <= 0) return 0.0;
  if (ramp == "constant") return delta;
  return std::min(t, 10) / 10.0 * delta;
}

// two-point distribution over k labels hitting a target entropy (bits):
// probability q on the first label, (1-q)/(k-1) on each other
double entropy_two_point(double q, int k) {
  double rest = (1.0 - q) / (k - 1);
  double s = 0.0;
  if (q > 0.0) s -= q * std::log2(q);
  if (rest > 0.0) s -= (1.0 - q) * std::log2(rest);
  return s;
}

double solve_two_point_q(double target_bits, int k) {
  double lo = 1.0 / k, hi = 1.0 - 1e-12;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    // entropy decreases as q moves from 1/k toward 1
    if (entropy_two_point(mid, k) > target_bits)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::uint64_t parse_hash(const std::string& hex) { return std::stoull(hex, nullptr, 16); }

}  // namespace

void GenSpec::validate() const {
  if (n_disciplines < 1) throw InputError("gen spec: n_disciplines must be >= 1");
  if (topics_per_discipline < 1) throw InputError("gen spec: topics_per_discipline must be >= 1");
  if (n_years < 2) throw InputError("gen spec: n_years must be >= 2");
  Year last = first_year + n_years - 1;
  if (prize_year_min > prize_year_max)
    throw InputError("gen spec: prize_year_min exceeds prize_year_max");
  if (prize_year_min - kPreWindow < first_year)
    throw InputError("gen spec: prize_year_min leaves no room for the pre-window");
  if (prize_year_max + 1 > last)
    throw InputError("gen spec: prize_year_max leaves no post-event year");
  if (treated_fraction < 0.0 || treated_fraction > 1.0)
    throw InputError("gen spec: treated_fraction outside [0, 1]");
  if (level_sd < 0.0 || trend_sd < 0.0 || noise_sd < 0.0)
    throw InputError("gen spec: negative dispersion parameter");
  if (level_mu > 20.0) throw InputError("gen spec: level_mu too large (count overflow)");
  if (ramp != "linear" && ramp != "constant")
    throw InputError("gen spec: ramp must be 'linear' or 'constant'");
  for (const auto& [m, _] : measure_offset)
    if (std::find(kCanonicalMeasures.begin(), kCanonicalMeasures.end(), m) ==
        kCanonicalMeasures.end())
      throw InputError("gen spec: unknown measure '" + m + "' in measure_offset");
  for (const auto& [m, _] : delta)
    if (std::find(kCanonicalMeasures.begin(), kCanonicalMeasures.end(), m) ==
        kCanonicalMeasures.end())
      throw InputError("gen spec: unknown measure '" + m + "' in delta");
  const auto& cov = PrizeEvent::covariate_names();
  for (const auto& [c, _] : signal_coefs)
    if (std::find(cov.begin(), cov.end(), c) == cov.end())
      throw InputError("gen spec: unknown covariate '" + c + "' in signal_coefs");
  if (!signal_coefs.empty() && !with_covariates)
    throw InputError("gen spec: signal_coefs require with_covariates");
  if (entrant_labels < 2) throw InputError("gen spec: entrant_labels must be >= 2");
  if (with_entrant_history &&
      (entropy_base <= 0.0 || entropy_base >= std::log2(static_cast<double>(entrant_labels))))
    throw InputError("gen spec: entropy_base outside (0, log2(entrant_labels))");
  if (with_funding && (funding_base <= 0.0 || funding_total_base <= 0.0))
    throw InputError("gen spec: funding levels must be positive");
}

void to_json(nlohmann::json& j, const GenSpec& s) {
  j = {{"n_disciplines", s.n_disciplines},
       {"topics_per_discipline", s.topics_per_discipline},
       {"first_year", s.first_year},
       {"n_years", s.n_years},
       {"prize_year_min", s.prize_year_min},
       {"prize_year_max", s.prize_year_max},
       {"treated_fraction", s.treated_fraction},
       {"level_mu", s.level_mu},
       {"level_sd", s.level_sd},
       {"trend_mu", s.trend_mu},
       {"trend_sd", s.trend_sd},
       {"noise_sd", s.noise_sd},
       {"measure_offset", s.measure_offset},
       {"delta", s.delta},
       {"ramp", s.ramp},
       {"signal_coefs", s.signal_coefs},
       {"with_covariates", s.with_covariates},
       {"with_entrant_history", s.with_entrant_history},
       {"diversity_slope", s.diversity_slope},
       {"entropy_base", s.entropy_base},
       {"entrant_labels", s.entrant_labels},
       {"with_funding", s.with_funding},
       {"funding_base", s.funding_base},
       {"funding_total_base", s.funding_total_base},
       {"funding_total_growth", s.funding_total_growth},
       {"funding_noise", s.funding_noise},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, GenSpec& s) {
  s = GenSpec{};
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_disciplines", s.n_disciplines);
  get("topics_per_discipline", s.topics_per_discipline);
  get("first_year", s.first_year);
  get("n_years", s.n_years);
  get("prize_year_min", s.prize_year_min);
  get("prize_year_max", s.prize_year_max);
  get("treated_fraction", s.treated_fraction);
  get("level_mu", s.level_mu);
  get("level_sd", s.level_sd);
  get("trend_mu", s.trend_mu);
  get("trend_sd", s.trend_sd);
  get("noise_sd", s.noise_sd);
  get("measure_offset", s.measure_offset);
  get("delta", s.delta);
  get("ramp", s.ramp);
  get("signal_coefs", s.signal_coefs);
  get("with_covariates", s.with_covariates);
  get("with_entrant_history", s.with_entrant_history);
  get("diversity_slope", s.diversity_slope);
  get("entropy_base", s.entropy_base);
  get("entrant_labels", s.entrant_labels);
  get("with_funding", s.with_funding);
  get("funding_base", s.funding_base);
  get("funding_total_base", s.funding_total_base);
  get("funding_total_growth", s.funding_total_growth);
  get("funding_noise", s.funding_noise);
  get("seed", s.seed);
}

std::uint64_t GenSpec::hash() const {
  nlohmann::json j;
  to_json(j, *this);
  return fnv1a(j.dump());
}

double GroundTruth::true_delta(const std::string& topic, const std::string& measure,
                               int t) const {
  auto it = topic_delta.find(topic);
  if (it == topic_delta.end()) return 0.0;
  auto jt = it->second.find(measure);
  if (jt == it->second.end()) return 0.0;
  return ramp_lift(ramp, jt->second, t);
}

double GroundTruth::mean_true_delta10(const std::string& measure) const {
  if (topic_delta.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [topic, _] : topic_delta) s += true_delta(topic, measure, 10);
  return s / static_cast<double>(topic_delta.size());
}

double GroundTruth::mean_true_post(const std::string& measure) const {
  if (topic_delta.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [topic, _] : topic_delta)
    for (int t = 1; t <= 10; ++t) s += true_delta(topic, measure, t);
  return s / (10.0 * static_cast<double>(topic_delta.size()));
}

void to_json(nlohmann::json& j, const GroundTruth& g) {
  j = {{"spec_hash", hash_hex(g.spec_hash)},
       {"panel_hash", hash_hex(g.panel_hash)},
       {"ramp", g.ramp},
       {"base_delta", g.base_delta},
       {"signal_coefs", g.signal_coefs},
       {"topic_delta", g.topic_delta}};
}

void from_json(const nlohmann::json& j, GroundTruth& g) {
  g = GroundTruth{};
  g.spec_hash = parse_hash(j.at("spec_hash").get<std::string>());
  g.panel_hash = parse_hash(j.at("panel_hash").get<std::string>());
  j.at("ramp").get_to(g.ramp);
  j.at("base_delta").get_to(g.base_delta);
  j.at("signal_coefs").get_to(g.signal_coefs);
  j.at("topic_delta").get_to(g.topic_delta);
}

std::uint64_t panel_hash(const Panel& panel) {
  return fnv1a(serialize_trajectories(panel) + '\x1f' + serialize_events(panel));
}

SynthOutput generate(const GenSpec& spec) {
  spec.validate();

  // 1. treated selection, independent of any realized values
  struct TreatedInfo {
    Year prize_year;
    std::map<std::string, double> covariates;  // empty when disabled
    std::map<std::string, double> delta;       // per measure
  };
  std::vector<std::vector<int>> treated_idx(static_cast<std::size_t>(spec.n_disciplines));
  int per_disc = static_cast<int>(
      std::lround(spec.treated_fraction * spec.topics_per_discipline));
  per_disc = std::clamp(per_disc, 0, spec.topics_per_discipline);
  for (int d = 0; d < spec.n_disciplines; ++d) {
    std::vector<int> idx(static_cast<std::size_t>(spec.topics_per_discipline));
    for (int i = 0; i < spec.topics_per_discipline; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(substream_seed(spec.seed, kStreamSelect + static_cast<std::uint64_t>(d)));
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(per_disc));
    std::sort(idx.begin(), idx.end());
    treated_idx[static_cast<std::size_t>(d)] = std::move(idx);
  }

  // 2. events and per-topic deltas
  std::map<std::pair<int, int>, TreatedInfo> treated;
  for (int d = 0; d < spec.n_disciplines; ++d) {
    for (int i : treated_idx[static_cast<std::size_t>(d)]) {
      Rng rng(substream_seed(spec.seed, kStreamEvent + (static_cast<std::uint64_t>(d) << 20) +
                                            static_cast<std::uint64_t>(i)));
      TreatedInfo info;
      Year span = spec.prize_year_max - spec.prize_year_min;
      info.prize_year = spec.prize_year_min +
                        static_cast<Year>(rng.below(static_cast<std::uint64_t>(span) + 1));
      if (spec.with_covariates) {
        info.covariates["recency"] = rng.uniform(0.0, 30.0);
        info.covariates["money"] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        info.covariates["specialty"] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        info.covariates["winner_top"] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        info.covariates["prize_age"] = rng.uniform(30.0, 80.0);
        info.covariates["conferrals"] = 1.0 + static_cast<double>(rng.below(5));
      }
      double shift = 0.0;
      for (const auto& [c, coef] : spec.signal_coefs) shift += coef * info.covariates.at(c);
      for (const auto& m : kCanonicalMeasures) {
        auto it = spec.delta.find(m);
        info.delta[m] = (it == spec.delta.end() ? 0.0 : it->second) + shift;
      }
      treated[{d, i}] = std::move(info);
    }
  }

  // 3. trajectories from per-topic substreams (draw order fixed per topic)
  int total = spec.n_disciplines * spec.topics_per_discipline;
  std::vector<TopicTrajectory> trajectories(static_cast<std::size_t>(total));
  parallel_for(static_cast<std::size_t>(total), 1, [&](std::size_t g) {
    int d = static_cast<int>(g) / spec.topics_per_discipline;
    int i = static_cast<int>(g) % spec.topics_per_discipline;
    Rng rng(substream_seed(spec.seed, kStreamTopic + (static_cast<std::uint64_t>(d) << 20) +
                                          static_cast<std::uint64_t>(i)));
    auto it = treated.find({d, i});
    const TreatedInfo* info = it == treated.end() ? nullptr : &it->second;

    TopicTrajectory tr;
    tr.topic_id = topic_name(d, i);
    tr.discipline = discipline_name(d);
    tr.first_year = spec.first_year;
    for (const auto& m : kCanonicalMeasures) {
      auto off = spec.measure_offset.find(m);
      double level = spec.level_mu + (off == spec.measure_offset.end() ? 0.0 : off->second) +
                     rng.normal() * spec.level_sd;
      double trend = spec.trend_mu + rng.normal() * spec.trend_sd;
      std::vector<double> values(static_cast<std::size_t>(spec.n_years));
      for (int k = 0; k < spec.n_years; ++k) {
        double x = level + trend * k + rng.normal() * spec.noise_sd;
        if (info) {
          int t = spec.first_year + k - info->prize_year;
          x += ramp_lift(spec.ramp, info->delta.at(m), t);
        }
        values[static_cast<std::size_t>(k)] = std::round(std::exp(std::min(x, 30.0)));
      }
      tr.values[m] = std::move(values);
    }
    trajectories[g] = std::move(tr);
  });

  // 4. events list
  std::vector<PrizeEvent> events;
  for (const auto& [key, info] : treated) {
    PrizeEvent ev;
    ev.topic_id = topic_name(key.first, key.second);
    ev.prize_year = info.prize_year;
    if (spec.with_covariates) {
      ev.recency = info.covariates.at("recency");
      ev.money = info.covariates.at("money");
      ev.specialty = info.covariates.at("specialty");
      ev.winner_top = info.covariates.at("winner_top");
      ev.prize_age = info.covariates.at("prize_age");
      ev.conferrals = info.covariates.at("conferrals");
    }
    events.push_back(std::move(ev));
  }

  SynthOutput out{Panel(std::move(trajectories), std::move(events)), GroundTruth{}, "", ""};
  out.truth.spec_hash = spec.hash();
  out.truth.panel_hash = panel_hash(out.panel);
  out.truth.ramp = spec.ramp;
  for (const auto& m : kCanonicalMeasures) {
    auto it = spec.delta.find(m);
    out.truth.base_delta[m] = it == spec.delta.end() ? 0.0 : it->second;
  }
  out.truth.signal_coefs = spec.signal_coefs;
  for (const auto& [key, info] : treated)
    out.truth.topic_delta[topic_name(key.first, key.second)] = info.delta;

  // 5. optional entrant histories with entropies planted against true delta
  if (spec.with_entrant_history) {
    std::ostringstream csv;
    csv << "topic_id,group,discipline,count\n";
    int k = spec.entrant_labels;
    double max_bits = std::log2(static_cast<double>(k));
    int hist_idx = 0;
    for (const auto& [key, info] : treated) {
      std::string id = topic_name(key.first, key.second);
      Rng rng(substream_seed(spec.seed, kStreamEntrant + static_cast<std::uint64_t>(hist_idx++)));
      double s_peer = std::clamp(spec.entropy_base + rng.normal() * 0.1, 0.5, max_bits - 0.3);
      double rel = spec.diversity_slope * info.delta.at("publications") + rng.normal() * 0.02;
      double s_win = std::clamp(s_peer * (1.0 + rel), 0.1, max_bits - 1e-3);
      for (const auto& [group, target] :
           std::vector<std::pair<std::string, double>>{{"win", s_win}, {"peer", s_peer}}) {
        double q = solve_two_point_q(target, k);
        long head = std::lround(q * 1000.0);
        long rest = std::lround((1.0 - q) * 1000.0 / (k - 1));
        for (int lbl = 0; lbl < k; ++lbl) {
          long count = lbl == 0 ? head : rest;
          if (count < 1) continue;
          char buf[16];
          std::snprintf(buf, sizeof buf, "hist%02d", lbl);
          csv << id << ',' << group << ',' << buf << ',' << count << '\n';
        }
      }
    }
    out.entrant_history_csv = csv.str();
  }

  // 6. optional flat funding proportional to a growing system total
  if (spec.with_funding) {
    std::ostringstream csv;
    csv << "topic_id,year,mentions,system_total\n";
    int fund_idx = 0;
    for (const auto& [key, info] : treated) {
      std::string id = topic_name(key.first, key.second);
      Rng rng(substream_seed(spec.seed, kStreamFunding + static_cast<std::uint64_t>(fund_idx++)));
      for (int kk = 0; kk < spec.n_years; ++kk) {
        Year year = spec.first_year + kk;
        double growth = std::exp(spec.funding_total_growth * kk);
        double total_t = spec.funding_total_base * growth;
        double mention =
            std::round(spec.funding_base * growth * std::exp(rng.normal() * spec.funding_noise));
        csv << id << ',' << year << ',' << format_double(mention) << ','
            << format_double(std::round(total_t)) << '\n';
      }
    }
    out.funding_csv = csv.str();
  }

  return out;
}

bool GtCheckReport::all_covered() const {
  for (const auto& r : rows)
    if (!r.covered) return false;
  return !rows.empty();
}

GtCheckReport ground_truth_check(const Panel& panel, const GroundTruth& truth,
                                 const std::vector<EffectSeries>& series,
                                 const std::map<std::string, RegressionFit>& did_fits) {
  if (panel_hash(panel) != truth.panel_hash)
    throw InputError("ground truth does not describe this panel (hash mismatch)");

  GtCheckReport report;
  for (const auto& s : series) {
    if (s.kind != "delta") continue;
    const auto* p = s.at(kPostWindow);
    if (!p)
      throw InputError("ground_truth_check: series for '" + s.measure + "' lacks t=+10");
    GtCheckRow row;
    row.estimator = "delta_10";
    row.measure = s.measure;
    row.estimate = p->delta;
    row.truth = truth.mean_true_delta10(s.measure);
    row.bias = row.estimate - row.truth;
    row.ci_low = p->ci_low;
    row.ci_high = p->ci_high;
    row.covered = row.ci_low <= row.truth && row.truth <= row.ci_high;
    report.rows.push_back(std::move(row));
  }
  for (const auto& [measure, fit] : did_fits) {
    const auto& c = fit.require("treat_x_period");
    GtCheckRow row;
    row.estimator = "did_beta3";
    row.measure = measure;
    row.estimate = c.estimate;
    row.truth = truth.mean_true_post(measure);
    row.bias = row.estimate - row.truth;
    row.ci_low = c.estimate - 1.96 * c.se;
    row.ci_high = c.estimate + 1.96 * c.se;
    row.covered = row.ci_low <= row.truth && row.truth <= row.ci_high;
    report.rows.push_back(std::move(row));
  }
  return report;
}

void to_json(nlohmann::json& j, const GtCheckRow& r) {
  j = {{"estimator", r.estimator}, {"measure", r.measure}, {"estimate", r.estimate},
       {"truth", r.truth},         {"bias", r.bias},       {"ci_low", r.ci_low},
       {"ci_high", r.ci_high},     {"covered", r.covered}};
}

void to_json(nlohmann::json& j, const GtCheckReport& r) {
  j = {{"rows", r.rows}, {"all_covered", r.all_covered()}};
}

}  // namespace prizegrowth
