#include "prizegrowth/matching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "prizegrowth/rng.hpp"
#include "prizegrowth/stats.hpp"
#include "prizegrowth/util.hpp"

namespace prizegrowth {

namespace {

constexpr int kCells = 55;  // 5 measures x 11 pre-period years
constexpr double kZ = 1.96;
constexpr double kHardPenalty = 1e9;   // se == 0 with nonzero mean
constexpr double kFailFloor = 1e-9;    // every failing cell contributes at least this

inline int cell_index(int measure, int t) { return measure * (kPreWindow + 1) + (t + kPreWindow); }

// Memoized two-sided binomial p at p0 = 0.5; rows built on demand.
class SignTable {
 public:
  double p_two(int n, int k) {
    if (n == 0) return 1.0;
    auto it = rows_.find(n);
    if (it == rows_.end()) it = rows_.emplace(n, build(n)).first;
    return it->second[static_cast<std::size_t>(k)];
  }

 private:
  static std::vector<double> build(int n) {
    std::vector<double> pmf(n + 1), cdf(n + 1), p2(n + 1);
    for (int i = 0; i <= n; ++i) pmf[i] = std::exp(log_binom_pmf_half(n, i));
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) cdf[i] = (acc += pmf[i]);
    for (int k = 0; k <= n; ++k) {
      double lo = cdf[k];
      double hi = 1.0 - (k > 0 ? cdf[k - 1] : 0.0);
      p2[k] = std::min(1.0, 2.0 * std::min(lo, hi));
    }
    return p2;
  }
  std::unordered_map<int, std::vector<double>> rows_;
};

struct CellAggregate {
  double s1 = 0.0;   // sum of deltas over treated
  double s2 = 0.0;   // sum of squared deltas
  int n_pos = 0;
  int n_neg = 0;
};

struct CellStats {
  double mean = 0.0, se = 0.0;
  bool pass = true;
};

CellStats cell_stats(const CellAggregate& a, int m) {
  CellStats s;
  if (m < 2) {
    // single treated topic: SE undefined, constraint vacuous
    s.mean = m == 1 ? a.s1 : 0.0;
    s.pass = true;
    return s;
  }
  s.mean = a.s1 / m;
  double var = (a.s2 - a.s1 * a.s1 / m) / (m - 1);
  if (var < 0.0) var = 0.0;
  s.se = std::sqrt(var / m);
  s.pass = s.se > 0.0 ? std::abs(s.mean) < kZ * s.se : s.mean == 0.0;
  return s;
}

double cell_mean_penalty(const CellAggregate& a, int m) {
  if (m < 2) return 0.0;
  CellStats s = cell_stats(a, m);
  if (s.se == 0.0) return s.mean == 0.0 ? 0.0 : kHardPenalty + std::abs(s.mean);
  double ratio = std::abs(s.mean) / (kZ * s.se);
  return ratio < 1.0 ? 0.0 : (ratio - 1.0) + kFailFloor;
}

double cell_sign_penalty(const CellAggregate& a, double alpha, SignTable& signs) {
  int n = a.n_pos + a.n_neg;
  if (n == 0) return 0.0;
  double p = signs.p_two(n, a.n_pos);
  return p >= alpha ? 0.0 : (alpha - p) / alpha + kFailFloor;
}

// Everything theta/balance needs, resolved to dense arrays once per solve.
struct Workspace {
  struct Treated {
    std::string id;
    Year prize_year = 0;
    std::array<double, kCells> tlog{};               // transformed pre-window
    std::vector<std::string> cand_ids;
    std::vector<double> cand_theta;
    std::vector<std::array<double, kCells>> cand_raw;  // raw pre-window counts
  };
  std::vector<Treated> treated;
  int peers = 5;

  static Workspace build(const Panel& panel, const PoolSet& pools, const MatchConfig& config) {
    Workspace w;
    w.peers = config.peers_per_treated;
    w.treated.reserve(pools.pools.size());
    for (const auto& pool : pools.pools) {
      Treated t;
      t.id = pool.treated_id;
      t.prize_year = pool.prize_year;
      const auto& tr = panel.require(pool.treated_id);
      for (int m = 0; m < 5; ++m)
        for (int tt = -kPreWindow; tt <= 0; ++tt)
          t.tlog[cell_index(m, tt)] =
              growth_transform(tr.at(kCanonicalMeasures[m], pool.prize_year + tt));
      t.cand_ids.reserve(pool.candidates.size());
      t.cand_theta.reserve(pool.candidates.size());
      t.cand_raw.reserve(pool.candidates.size());
      for (const auto& rec : pool.candidates) {
        const auto& cr = panel.require(rec.candidate_id);
        std::array<double, kCells> raw{};
        for (int m = 0; m < 5; ++m)
          for (int tt = -kPreWindow; tt <= 0; ++tt)
            raw[cell_index(m, tt)] = cr.at(kCanonicalMeasures[m], pool.prize_year + tt);
        t.cand_ids.push_back(rec.candidate_id);
        t.cand_theta.push_back(rec.theta);
        t.cand_raw.push_back(raw);
      }
      w.treated.push_back(std::move(t));
    }
    return w;
  }
};

// Mutable assignment state with incremental cell aggregates.
class SolverState {
 public:
  SolverState(const Workspace& w, const MatchConfig& config)
      : w_(&w),
        config_(&config),
        chosen_(w.treated.size()),
        delta_(w.treated.size()),
        peer_sum_(w.treated.size()),
        objective_delta_(w.treated.size(), 0.0) {}

  int n_treated() const { return static_cast<int>(w_->treated.size()); }

  void assign(int i, std::vector<int> cand) {
    auto& t = w_->treated[static_cast<std::size_t>(i)];
    if (!chosen_[i].empty()) {
      for (int c : chosen_[i]) release_usage(t.cand_ids[static_cast<std::size_t>(c)]);
      remove_deltas(i);
    }
    chosen_[i] = std::move(cand);
    for (int c : chosen_[i]) add_usage(t.cand_ids[static_cast<std::size_t>(c)]);
    recompute_deltas(i);
    add_deltas(i);
  }

  // penalty/objective change if chosen_[i][slot] were replaced by cand
  std::pair<double, double> evaluate_swap(int i, int slot, int cand) const {
    const auto& t = w_->treated[static_cast<std::size_t>(i)];
    int out = chosen_[i][static_cast<std::size_t>(slot)];
    double pen = 0.0;
    for (int c = 0; c < kCells; ++c) {
      double sum = peer_sum_[i][c] - t.cand_raw[static_cast<std::size_t>(out)][c] +
                   t.cand_raw[static_cast<std::size_t>(cand)][c];
      double nd = t.tlog[c] - growth_transform(sum / config_->peers_per_treated);
      double od = delta_[i][c];
      CellAggregate a = agg_[c];
      a.s1 += nd - od;
      a.s2 += nd * nd - od * od;
      if (od > 0.0) --a.n_pos;
      if (od < 0.0) --a.n_neg;
      if (nd > 0.0) ++a.n_pos;
      if (nd < 0.0) ++a.n_neg;
      pen += cell_mean_penalty(a, n_treated());
      pen += cell_sign_penalty(a, config_->alpha, signs_);
    }
    double dobj = t.cand_theta[static_cast<std::size_t>(cand)] -
                  t.cand_theta[static_cast<std::size_t>(out)];
    return {pen, objective_ + dobj};
  }

  void apply_swap(int i, int slot, int cand) {
    auto& t = w_->treated[static_cast<std::size_t>(i)];
    int out = chosen_[i][static_cast<std::size_t>(slot)];
    remove_deltas(i);
    release_usage(t.cand_ids[static_cast<std::size_t>(out)]);
    chosen_[i][static_cast<std::size_t>(slot)] = cand;
    add_usage(t.cand_ids[static_cast<std::size_t>(cand)]);
    recompute_deltas(i);
    add_deltas(i);
  }

  double penalty() const {
    double pen = 0.0;
    for (int c = 0; c < kCells; ++c) {
      pen += cell_mean_penalty(agg_[c], n_treated());
      pen += cell_sign_penalty(agg_[c], config_->alpha, signs_);
    }
    return pen;
  }

  double objective() const { return objective_; }
  const std::vector<int>& chosen(int i) const { return chosen_[i]; }
  const std::vector<std::vector<int>>& chosen_all() const { return chosen_; }
  int usage(const std::string& id) const {
    auto it = usage_.find(id);
    return it == usage_.end() ? 0 : it->second;
  }

  BalanceReport report(double alpha) {
    BalanceReport r;
    r.n_treated = n_treated();
    r.cells.reserve(kCells);
    for (int m = 0; m < 5; ++m) {
      for (int tt = -kPreWindow; tt <= 0; ++tt) {
        const auto& a = agg_[cell_index(m, tt)];
        CellStats s = cell_stats(a, r.n_treated);
        BalanceCell cell;
        cell.measure = kCanonicalMeasures[m];
        cell.t = tt;
        cell.mean = s.mean;
        cell.se = s.se;
        cell.pass = s.pass;
        cell.n_pos = a.n_pos;
        cell.n_neg = a.n_neg;
        int n = a.n_pos + a.n_neg;
        cell.sign_p = n == 0 ? 1.0 : signs_.p_two(n, a.n_pos);
        cell.sign_pass = cell.sign_p >= alpha;
        r.cells.push_back(std::move(cell));
      }
    }
    return r;
  }

  SignTable& signs() { return signs_; }

 private:
  void recompute_deltas(int i) {
    const auto& t = w_->treated[static_cast<std::size_t>(i)];
    auto& sum = peer_sum_[i];
    sum.fill(0.0);
    for (int c : chosen_[i])
      for (int k = 0; k < kCells; ++k) sum[k] += t.cand_raw[static_cast<std::size_t>(c)][k];
    for (int k = 0; k < kCells; ++k)
      delta_[i][k] = t.tlog[k] - growth_transform(sum[k] / config_->peers_per_treated);
    double obj = 0.0;
    for (int c : chosen_[i]) obj += t.cand_theta[static_cast<std::size_t>(c)];
    objective_ += obj - objective_delta_[i];
    objective_delta_[i] = obj;
  }

  void add_deltas(int i) {
    for (int c = 0; c < kCells; ++c) {
      double d = delta_[i][c];
      agg_[c].s1 += d;
      agg_[c].s2 += d * d;
      if (d > 0.0) ++agg_[c].n_pos;
      if (d < 0.0) ++agg_[c].n_neg;
    }
  }

  void remove_deltas(int i) {
    for (int c = 0; c < kCells; ++c) {
      double d = delta_[i][c];
      agg_[c].s1 -= d;
      agg_[c].s2 -= d * d;
      if (d > 0.0) --agg_[c].n_pos;
      if (d < 0.0) --agg_[c].n_neg;
    }
  }

  void add_usage(const std::string& id) { ++usage_[id]; }
  void release_usage(const std::string& id) {
    auto it = usage_.find(id);
    if (it != usage_.end() && --it->second == 0) usage_.erase(it);
  }

  const Workspace* w_;
  const MatchConfig* config_;
  std::vector<std::vector<int>> chosen_;
  std::vector<std::array<double, kCells>> delta_;
  std::vector<std::array<double, kCells>> peer_sum_;
  std::array<CellAggregate, kCells> agg_{};
  std::unordered_map<std::string, int> usage_;
  std::vector<double> objective_delta_;
  double objective_ = 0.0;
  mutable SignTable signs_;
};

}  // namespace

double theta(const TopicTrajectory& treated, const TopicTrajectory& candidate, Year prize_year) {
  if (!treated.has_pre_window(prize_year))
    throw InputError("theta: topic '" + treated.topic_id + "' lacks the pre-window at " +
                     std::to_string(prize_year));
  if (!candidate.has_pre_window(prize_year))
    throw InputError("theta: topic '" + candidate.topic_id + "' lacks the pre-window at " +
                     std::to_string(prize_year));
  double sum = 0.0;
  for (const auto& m : kCanonicalMeasures) {
    for (int t = -kPreWindow; t <= 0; ++t) {
      double a = growth_transform(treated.at(m, prize_year + t));
      double b = growth_transform(candidate.at(m, prize_year + t));
      sum += (a - b) * (a - b);
    }
  }
  return sum / kCells;
}

CandidatePool build_pool(const Panel& panel, const PrizeEvent& event, const MatchConfig& config,
                         const std::set<std::string>* exclude) {
  const auto& tr = panel.require(event.topic_id);
  CandidatePool pool;
  pool.treated_id = event.topic_id;
  pool.prize_year = event.prize_year;
  std::vector<DistanceRecord> all;
  for (const auto& cand : panel.trajectories()) {
    if (cand.topic_id == event.topic_id) continue;
    if (panel.is_treated(cand.topic_id)) continue;
    if (cand.discipline != tr.discipline) continue;
    if (exclude && exclude->count(cand.topic_id)) continue;
    if (!cand.has_pre_window(event.prize_year)) continue;
    all.push_back({event.topic_id, cand.topic_id, theta(tr, cand, event.prize_year)});
  }
  if (static_cast<int>(all.size()) < config.peers_per_treated)
    throw InfeasibleError("unmatchable treated topic '" + event.topic_id + "': only " +
                          std::to_string(all.size()) + " eligible candidates (need " +
                          std::to_string(config.peers_per_treated) + ")");
  std::sort(all.begin(), all.end(), [](const DistanceRecord& a, const DistanceRecord& b) {
    return a.theta != b.theta ? a.theta < b.theta : a.candidate_id < b.candidate_id;
  });
  if (static_cast<int>(all.size()) > config.pool_size) all.resize(config.pool_size);
  pool.candidates = std::move(all);
  return pool;
}

PoolSet build_all_pools(const Panel& panel, const MatchConfig& config,
                        const std::set<std::string>* exclude) {
  std::vector<const PrizeEvent*> events;
  for (const auto& ev : panel.events()) events.push_back(&ev);
  std::sort(events.begin(), events.end(),
            [](const PrizeEvent* a, const PrizeEvent* b) { return a->topic_id < b->topic_id; });

  PoolSet out;
  std::vector<std::optional<CandidatePool>> slots(events.size());
  std::vector<std::string> errors(events.size());
  parallel_for(events.size(), config.threads, [&](std::size_t i) {
    try {
      slots[i] = build_pool(panel, *events[i], config, exclude);
    } catch (const InfeasibleError& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (slots[i])
      out.pools.push_back(std::move(*slots[i]));
    else
      out.unmatchable.push_back(events[i]->topic_id);
  }
  return out;
}

bool BalanceReport::all_pass() const {
  for (const auto& c : cells)
    if (!c.pass || !c.sign_pass) return false;
  return true;
}

int BalanceReport::worst_cell() const {
  int worst = -1;
  double worst_score = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    double score = 0.0;
    if (!c.pass) score = c.se > 0.0 ? std::abs(c.mean) / (kZ * c.se) : kHardPenalty;
    if (!c.sign_pass) score = std::max(score, 1.0 + (0.05 - c.sign_p));
    if (score > worst_score) {
      worst_score = score;
      worst = static_cast<int>(i);
    }
  }
  return worst;
}

std::string BalanceReport::describe_cell(int idx) const {
  if (idx < 0 || idx >= static_cast<int>(cells.size())) return "none";
  const auto& c = cells[static_cast<std::size_t>(idx)];
  std::ostringstream ss;
  ss << c.measure << " at t=" << c.t << " (mean=" << c.mean << ", se=" << c.se
     << ", sign_p=" << c.sign_p << ")";
  return ss.str();
}

double PretrendReport::min_p() const {
  double m = 1.0;
  for (const auto& c : cells) m = std::min(m, c.p);
  return m;
}

namespace {

std::vector<int> greedy_subset(const Workspace::Treated& t, int k, bool replacement,
                               const SolverState& state) {
  std::vector<int> pick;
  for (int c = 0; c < static_cast<int>(t.cand_ids.size()) && static_cast<int>(pick.size()) < k;
       ++c) {
    if (!replacement && state.usage(t.cand_ids[static_cast<std::size_t>(c)]) > 0) continue;
    pick.push_back(c);
  }
  return pick;
}

// One full sweep of first-improvement swaps; returns true when any move landed.
bool local_search_pass(SolverState& state, const Workspace& w, const MatchConfig& config) {
  bool moved = false;
  double cur_pen = state.penalty();
  double cur_obj = state.objective();
  for (int i = 0; i < state.n_treated(); ++i) {
    const auto& t = w.treated[static_cast<std::size_t>(i)];
    int n_cand = static_cast<int>(t.cand_ids.size());
    for (int slot = 0; slot < config.peers_per_treated; ++slot) {
      for (int c = 0; c < n_cand; ++c) {
        const auto& cur = state.chosen(i);
        if (std::find(cur.begin(), cur.end(), c) != cur.end()) continue;
        if (!config.replacement && state.usage(t.cand_ids[static_cast<std::size_t>(c)]) > 0)
          continue;
        auto [pen, obj] = state.evaluate_swap(i, slot, c);
        bool better = pen < cur_pen - 1e-12 ||
                      (std::abs(pen - cur_pen) <= 1e-12 && obj < cur_obj - 1e-12);
        if (better) {
          state.apply_swap(i, slot, c);
          cur_pen = pen;
          cur_obj = obj;
          moved = true;
        }
      }
    }
  }
  return moved;
}

void run_local_search(SolverState& state, const Workspace& w, const MatchConfig& config) {
  for (int pass = 0; pass < config.max_passes; ++pass)
    if (!local_search_pass(state, w, config)) break;
}

struct Snapshot {
  std::vector<std::vector<int>> chosen;
  double penalty;
  double objective;
};

MatchResult heuristic_solve(const PoolSet& pools, const Workspace& w, const MatchConfig& config) {
  SolverState state(w, config);

  // greedy seed: nearest peers, scarcest pools first when controls are exclusive
  std::vector<int> order(w.treated.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (!config.replacement)
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      std::size_t na = w.treated[static_cast<std::size_t>(a)].cand_ids.size();
      std::size_t nb = w.treated[static_cast<std::size_t>(b)].cand_ids.size();
      return na != nb ? na < nb : a < b;
    });
  for (int i : order) {
    const auto& t = w.treated[static_cast<std::size_t>(i)];
    auto pick = greedy_subset(t, config.peers_per_treated, config.replacement, state);
    if (static_cast<int>(pick.size()) < config.peers_per_treated)
      throw InfeasibleError("treated topic '" + t.id +
                            "': not enough unused controls under --no-replacement");
    state.assign(i, std::move(pick));
  }

  run_local_search(state, w, config);

  Snapshot best{state.chosen_all(), state.penalty(), state.objective()};
  Rng rng(substream_seed(config.seed, 0x646f6d)); // "dom"
  for (int restart = 0; restart < config.max_restarts && best.penalty > 0.0; ++restart) {
    // perturb a slice of topics toward random pool subsets, then repair
    int n_kick = std::max(1, state.n_treated() / 8);
    for (int k = 0; k < n_kick; ++k) {
      int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(state.n_treated())));
      const auto& t = w.treated[static_cast<std::size_t>(i)];
      std::vector<int> all(t.cand_ids.size());
      for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
      rng.shuffle(all);
      std::vector<int> pick;
      for (int c : all) {
        if (static_cast<int>(pick.size()) == config.peers_per_treated) break;
        if (!config.replacement) {
          const auto& id = t.cand_ids[static_cast<std::size_t>(c)];
          const auto& cur = state.chosen(i);
          bool mine = false;
          for (int cc : cur)
            if (t.cand_ids[static_cast<std::size_t>(cc)] == id) mine = true;
          if (state.usage(id) > 0 && !mine) continue;
        }
        pick.push_back(c);
      }
      if (static_cast<int>(pick.size()) == config.peers_per_treated) state.assign(i, std::move(pick));
    }
    run_local_search(state, w, config);
    double pen = state.penalty();
    if (pen < best.penalty || (pen == best.penalty && state.objective() < best.objective))
      best = {state.chosen_all(), pen, state.objective()};
  }

  if (best.penalty > 0.0) {
    for (std::size_t i = 0; i < best.chosen.size(); ++i)
      state.assign(static_cast<int>(i), best.chosen[i]);
    BalanceReport rep = state.report(config.alpha);
    throw InfeasibleError("no balance-feasible assignment found; worst cell: " +
                          rep.describe_cell(rep.worst_cell()));
  }

  // restore the best-found assignment
  for (std::size_t i = 0; i < best.chosen.size(); ++i)
    state.assign(static_cast<int>(i), best.chosen[i]);

  MatchResult result;
  result.config = config;
  result.unmatchable = pools.unmatchable;
  result.objective = state.objective();
  result.balance = state.report(config.alpha);
  for (std::size_t i = 0; i < w.treated.size(); ++i) {
    std::vector<std::string> ids;
    for (int c : state.chosen(static_cast<int>(i)))
      ids.push_back(w.treated[i].cand_ids[static_cast<std::size_t>(c)]);
    std::sort(ids.begin(), ids.end());
    result.assignments[w.treated[i].id] = std::move(ids);
  }
  return result;
}

// Exhaustive branch and bound over per-treated peer subsets, pruned on the
// theta objective; feasibility is global so it is checked at leaves.
class ExactSolver {
 public:
  ExactSolver(const Workspace& w, const MatchConfig& config) : w_(&w), config_(&config) {
    int m = static_cast<int>(w.treated.size());
    subsets_.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) enumerate_subsets(i);
    suffix_min_.assign(static_cast<std::size_t>(m) + 1, 0.0);
    for (int i = m - 1; i >= 0; --i)
      suffix_min_[static_cast<std::size_t>(i)] =
          suffix_min_[static_cast<std::size_t>(i) + 1] + subsets_[static_cast<std::size_t>(i)].front().cost;
  }

  // returns chosen subset per treated, or empty when infeasible
  std::vector<std::vector<int>> solve() {
    current_.assign(w_->treated.size(), nullptr);
    best_.clear();
    dfs(0, 0.0);
    return best_;
  }

  const std::string& least_violation_desc() const { return least_violation_desc_; }

 private:
  struct Subset {
    std::vector<int> members;
    double cost = 0.0;
    std::array<double, kCells> delta{};
  };

  void enumerate_subsets(int i) {
    const auto& t = w_->treated[static_cast<std::size_t>(i)];
    int n = static_cast<int>(t.cand_ids.size());
    int k = config_->peers_per_treated;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
    auto& out = subsets_[static_cast<std::size_t>(i)];
    for (;;) {
      Subset s;
      s.members = idx;
      for (int j : idx) s.cost += t.cand_theta[static_cast<std::size_t>(j)];
      std::array<double, kCells> sum{};
      for (int j : idx)
        for (int c = 0; c < kCells; ++c) sum[c] += t.cand_raw[static_cast<std::size_t>(j)][c];
      for (int c = 0; c < kCells; ++c)
        s.delta[c] = t.tlog[c] - growth_transform(sum[c] / k);
      out.push_back(std::move(s));
      // next combination
      int pos = k - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int j = pos + 1; j < k; ++j)
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    std::sort(out.begin(), out.end(),
              [](const Subset& a, const Subset& b) { return a.cost < b.cost; });
  }

  void dfs(int depth, double cost) {
    int m = static_cast<int>(w_->treated.size());
    if (depth == m) {
      check_leaf(cost);
      return;
    }
    for (const auto& s : subsets_[static_cast<std::size_t>(depth)]) {
      double lb = cost + s.cost + suffix_min_[static_cast<std::size_t>(depth) + 1];
      if (lb >= best_cost_) break;  // subsets sorted by cost
      if (!config_->replacement && conflicts(depth, s)) continue;
      current_[static_cast<std::size_t>(depth)] = &s;
      if (!config_->replacement) mark(depth, s, true);
      dfs(depth + 1, cost + s.cost);
      if (!config_->replacement) mark(depth, s, false);
    }
    current_[static_cast<std::size_t>(depth)] = nullptr;
  }

  bool conflicts(int depth, const Subset& s) const {
    const auto& t = w_->treated[static_cast<std::size_t>(depth)];
    for (int j : s.members)
      if (used_.count(t.cand_ids[static_cast<std::size_t>(j)])) return true;
    return false;
  }

  void mark(int depth, const Subset& s, bool on) {
    const auto& t = w_->treated[static_cast<std::size_t>(depth)];
    for (int j : s.members) {
      if (on)
        used_.insert(t.cand_ids[static_cast<std::size_t>(j)]);
      else
        used_.erase(t.cand_ids[static_cast<std::size_t>(j)]);
    }
  }

  void check_leaf(double cost) {
    int m = static_cast<int>(w_->treated.size());
    double pen = 0.0;
    for (int c = 0; c < kCells; ++c) {
      CellAggregate a;
      for (int i = 0; i < m; ++i) {
        double d = current_[static_cast<std::size_t>(i)]->delta[c];
        a.s1 += d;
        a.s2 += d * d;
        if (d > 0.0) ++a.n_pos;
        if (d < 0.0) ++a.n_neg;
      }
      pen += cell_mean_penalty(a, m);
      pen += cell_sign_penalty(a, config_->alpha, signs_);
    }
    if (pen == 0.0) {
      if (cost < best_cost_) {
        best_cost_ = cost;
        best_.clear();
        for (const auto* s : current_) best_.push_back(s->members);
      }
    } else if (pen < least_violation_) {
      least_violation_ = pen;
      least_violation_desc_ = describe_leaf();
    }
  }

  std::string describe_leaf() {
    int m = static_cast<int>(w_->treated.size());
    double worst = 0.0;
    std::string desc = "none";
    for (int mi = 0; mi < 5; ++mi) {
      for (int tt = -kPreWindow; tt <= 0; ++tt) {
        int c = cell_index(mi, tt);
        CellAggregate a;
        for (int i = 0; i < m; ++i) {
          double d = current_[static_cast<std::size_t>(i)]->delta[c];
          a.s1 += d;
          a.s2 += d * d;
          if (d > 0.0) ++a.n_pos;
          if (d < 0.0) ++a.n_neg;
        }
        double pen = cell_mean_penalty(a, m) + cell_sign_penalty(a, config_->alpha, signs_);
        if (pen > worst) {
          worst = pen;
          CellStats s = cell_stats(a, m);
          std::ostringstream ss;
          ss << kCanonicalMeasures[mi] << " at t=" << tt << " (mean=" << s.mean << ", se=" << s.se
             << ")";
          desc = ss.str();
        }
      }
    }
    return desc;
  }

  const Workspace* w_;
  const MatchConfig* config_;
  std::vector<std::vector<Subset>> subsets_;
  std::vector<double> suffix_min_;
  std::vector<const Subset*> current_;
  std::vector<std::vector<int>> best_;
  double best_cost_ = std::numeric_limits<double>::infinity();
  double least_violation_ = std::numeric_limits<double>::infinity();
  std::string least_violation_desc_ = "none";
  std::multiset<std::string> used_;
  SignTable signs_;
};

MatchResult exact_solve(const PoolSet& pools, const Workspace& w, const MatchConfig& config) {
  ExactSolver solver(w, config);
  auto chosen = solver.solve();
  if (chosen.empty())
    throw InfeasibleError("no balance-feasible assignment exists; worst cell: " +
                          solver.least_violation_desc());

  SolverState state(w, config);
  for (std::size_t i = 0; i < chosen.size(); ++i) state.assign(static_cast<int>(i), chosen[i]);

  MatchResult result;
  result.config = config;
  result.unmatchable = pools.unmatchable;
  result.objective = state.objective();
  result.balance = state.report(config.alpha);
  result.exact = true;
  for (std::size_t i = 0; i < w.treated.size(); ++i) {
    std::vector<std::string> ids;
    for (int c : state.chosen(static_cast<int>(i)))
      ids.push_back(w.treated[i].cand_ids[static_cast<std::size_t>(c)]);
    std::sort(ids.begin(), ids.end());
    result.assignments[w.treated[i].id] = std::move(ids);
  }
  return result;
}

}  // namespace

MatchResult solve_dom(const Panel& panel, const PoolSet& pools, const MatchConfig& config) {
  if (pools.pools.empty()) throw InputError("solve_dom: no matchable treated topics");
  for (const auto& pool : pools.pools)
    if (static_cast<int>(pool.candidates.size()) < config.peers_per_treated)
      throw InputError("pool for '" + pool.treated_id + "' has fewer than " +
                       std::to_string(config.peers_per_treated) + " candidates");

  Workspace w = Workspace::build(panel, pools, config);

  std::size_t max_pool = 0;
  for (const auto& t : w.treated) max_pool = std::max(max_pool, t.cand_ids.size());
  bool exact = static_cast<int>(w.treated.size() * max_pool) <= config.exactness_budget;

  if (exact) return exact_solve(pools, w, config);
  return heuristic_solve(pools, w, config);
}

PretrendReport verify_pretrends(const Panel& panel, const MatchResult& result) {
  int m = static_cast<int>(result.assignments.size());
  if (m < 2) throw InputError("verify_pretrends: fewer than 2 treated topics (SE undefined)");

  PretrendReport report;
  report.n_treated = m;
  for (const auto& measure : kCanonicalMeasures) {
    for (int t = -kPreWindow; t <= 0; ++t) {
      std::vector<double> deltas;
      deltas.reserve(static_cast<std::size_t>(m));
      for (const auto& [treated_id, peers] : result.assignments) {
        const auto* ev = panel.event_for(treated_id);
        if (!ev) throw InputError("verify_pretrends: '" + treated_id + "' has no event");
        double y = panel.require(treated_id).at(measure, ev->prize_year + t);
        double peer_sum = 0.0;
        for (const auto& pid : peers) peer_sum += panel.require(pid).at(measure, ev->prize_year + t);
        double expected = peer_sum / static_cast<double>(peers.size());
        deltas.push_back(growth_transform(y) - growth_transform(expected));
      }
      TTestResult tt = t_test_zero(deltas);
      report.cells.push_back({measure, t, tt.mean, tt.se, tt.t, tt.p});
    }
  }
  return report;
}

void to_json(nlohmann::json& j, const MatchConfig& c) {
  j = {{"pool_size", c.pool_size},
       {"peers_per_treated", c.peers_per_treated},
       {"alpha", c.alpha},
       {"replacement", c.replacement},
       {"exactness_budget", c.exactness_budget},
       {"seed", c.seed},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, MatchConfig& c) {
  c = MatchConfig{};
  if (j.contains("pool_size")) j.at("pool_size").get_to(c.pool_size);
  if (j.contains("peers_per_treated")) j.at("peers_per_treated").get_to(c.peers_per_treated);
  if (j.contains("alpha")) j.at("alpha").get_to(c.alpha);
  if (j.contains("replacement")) j.at("replacement").get_to(c.replacement);
  if (j.contains("exactness_budget")) j.at("exactness_budget").get_to(c.exactness_budget);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("threads")) j.at("threads").get_to(c.threads);
}

void to_json(nlohmann::json& j, const MatchResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.balance.cells) {
    cells.push_back({{"measure", c.measure},
                     {"t", c.t},
                     {"mean", c.mean},
                     {"se", c.se},
                     {"pass", c.pass},
                     {"n_pos", c.n_pos},
                     {"n_neg", c.n_neg},
                     {"sign_p", c.sign_p},
                     {"sign_pass", c.sign_pass}});
  }
  j = {{"assignments", r.assignments},
       {"objective", r.objective},
       {"exact", r.exact},
       {"unmatchable", r.unmatchable},
       {"config", r.config},
       {"balance", {{"n_treated", r.balance.n_treated}, {"cells", std::move(cells)}}}};
}

void from_json(const nlohmann::json& j, MatchResult& r) {
  r = MatchResult{};
  j.at("assignments").get_to(r.assignments);
  j.at("objective").get_to(r.objective);
  if (j.contains("exact")) j.at("exact").get_to(r.exact);
  if (j.contains("unmatchable")) j.at("unmatchable").get_to(r.unmatchable);
  if (j.contains("config")) j.at("config").get_to(r.config);
  const auto& b = j.at("balance");
  b.at("n_treated").get_to(r.balance.n_treated);
  for (const auto& cj : b.at("cells")) {
    BalanceCell c;
    cj.at("measure").get_to(c.measure);
    cj.at("t").get_to(c.t);
    cj.at("mean").get_to(c.mean);
    cj.at("se").get_to(c.se);
    cj.at("pass").get_to(c.pass);
    cj.at("n_pos").get_to(c.n_pos);
    cj.at("n_neg").get_to(c.n_neg);
    cj.at("sign_p").get_to(c.sign_p);
    cj.at("sign_pass").get_to(c.sign_pass);
    r.balance.cells.push_back(std::move(c));
  }
}

std::string balance_csv(const BalanceReport& report) {
  std::ostringstream out;
  out << "measure,t,mean,se,pass,n_pos,n_neg,sign_p,sign_pass\n";
  for (const auto& c : report.cells)
    out << c.measure << ',' << c.t << ',' << format_double(c.mean) << ',' << format_double(c.se)
        << ',' << (c.pass ? 1 : 0) << ',' << c.n_pos << ',' << c.n_neg << ','
        << format_double(c.sign_p) << ',' << (c.sign_pass ? 1 : 0) << '\n';
  return out.str();
}

std::string pretrends_csv(const PretrendReport& report) {
  std::ostringstream out;
  out << "measure,t,mean,se,t_stat,p\n";
  for (const auto& c : report.cells)
    out << c.measure << ',' << c.t << ',' << format_double(c.mean) << ',' << format_double(c.se)
        << ',' << format_double(c.t_stat) << ',' << format_double(c.p) << '\n';
  return out.str();
}

}  // namespace prizegrowth
