#include "prizegrowth/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "prizegrowth/effects.hpp"
#include "prizegrowth/rng.hpp"
#include "prizegrowth/util.hpp"

namespace prizegrowth {

namespace {

double sd_ddof1(const Eigen::VectorXd& v) {
  int n = static_cast<int>(v.size());
  if (n < 2) return 0.0;
  double mean = v.mean();
  double ss = (v.array() - mean).square().sum();
  return std::sqrt(ss / (n - 1));
}

double t_p_value(double t, double df) {
  if (df <= 0.0) return 1.0;
  boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

DesignBuilder& DesignBuilder::intercept() {
  columns_.emplace_back("(intercept)", std::vector<double>(rows_, 1.0));
  dummy_.push_back(true);
  return *this;
}

DesignBuilder& DesignBuilder::numeric(const std::string& name,
                                      const std::vector<double>& values) {
  if (values.size() != rows_)
    throw InputError("design column '" + name + "': " + std::to_string(values.size()) +
                     " values for " + std::to_string(rows_) + " rows");
  for (const auto& [existing, _] : columns_)
    if (existing == name) throw InputError("duplicate design column '" + name + "'");
  columns_.emplace_back(name, values);
  dummy_.push_back(false);
  return *this;
}

DesignBuilder& DesignBuilder::categorical(const std::string& name,
                                          const std::vector<std::string>& labels) {
  if (labels.size() != rows_)
    throw InputError("design column '" + name + "': " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(rows_) + " rows");
  std::set<std::string> levels(labels.begin(), labels.end());
  if (levels.empty()) throw InputError("categorical '" + name + "' has no levels");
  auto it = levels.begin();
  ++it;  // lexicographically smallest level is the dropped reference
  for (; it != levels.end(); ++it) {
    std::vector<double> col(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      if (labels[r] == *it) col[r] = 1.0;
    columns_.emplace_back(name + ":" + *it, std::move(col));
    dummy_.push_back(true);
  }
  return *this;
}

DesignBuilder& DesignBuilder::response(const std::vector<double>& y) {
  if (y.size() != rows_)
    throw InputError("response: " + std::to_string(y.size()) + " values for " +
                     std::to_string(rows_) + " rows");
  y_ = y;
  return *this;
}

DesignBuilder& DesignBuilder::clusters(const std::vector<std::string>& ids) {
  if (ids.size() != rows_)
    throw InputError("clusters: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(rows_) + " rows");
  cluster_ = ids;
  return *this;
}

DesignMatrix DesignBuilder::build() const {
  if (y_.empty()) throw InputError("design has no response");
  if (columns_.empty()) throw InputError("design has no columns");
  DesignMatrix d;
  d.X.resize(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    d.names.push_back(columns_[c].first);
    for (std::size_t r = 0; r < rows_; ++r)
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns_[c].second[r];
  }
  d.is_dummy = dummy_;
  d.y = Eigen::Map<const Eigen::VectorXd>(y_.data(), static_cast<Eigen::Index>(y_.size()));
  d.cluster = cluster_;
  return d;
}

const Coefficient* RegressionFit::find(const std::string& name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return &c;
  return nullptr;
}

const Coefficient& RegressionFit::require(const std::string& name) const {
  const auto* c = find(name);
  if (!c) throw InputError("no coefficient named '" + name + "'");
  return *c;
}

RegressionFit ols(const DesignMatrix& design, bool cluster_robust) {
  const int n = design.n();
  const int k = design.k();
  if (n <= k)
    throw InputError("design needs more rows (" + std::to_string(n) + ") than columns (" +
                     std::to_string(k) + ")");
  if (cluster_robust && design.cluster.empty())
    throw InputError("cluster-robust SEs requested but the design has no cluster ids");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
  int rank = static_cast<int>(qr.rank());
  if (rank < k) {
    const auto& perm = qr.colsPermutation().indices();
    std::vector<std::string> bad;
    for (int i = rank; i < k; ++i) bad.push_back(design.names[static_cast<std::size_t>(perm[i])]);
    std::sort(bad.begin(), bad.end());
    std::string msg = "rank-deficient design; collinear columns:";
    for (const auto& b : bad) msg += " " + b;
    throw InputError(msg);
  }

  Eigen::VectorXd beta = qr.solve(design.y);
  Eigen::VectorXd resid = design.y - design.X * beta;

  RegressionFit fit;
  fit.n = n;
  fit.k = k;
  fit.df = n - k;
  fit.rss = resid.squaredNorm();
  double ymean = design.y.mean();
  fit.tss = (design.y.array() - ymean).square().sum();
  fit.r2 = fit.tss > 0.0 ? 1.0 - fit.rss / fit.tss : (fit.rss <= 1e-12 ? 1.0 : 0.0);
  fit.sigma2 = fit.rss / fit.df;
  fit.bic = n * std::log(std::max(fit.rss, 1e-300) / n) + k * std::log(static_cast<double>(n));
  fit.y_sum = design.y.sum();
  fit.y_sumsq = design.y.squaredNorm();
  fit.cluster_robust = cluster_robust;

  // (X'X)^-1 from the factorization: P (R'R)^-1 P'
  Eigen::MatrixXd r_upper =
      qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv =
      r_upper.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd xtx_inv_perm = rinv * rinv.transpose();
  Eigen::MatrixXd perm = qr.colsPermutation();
  Eigen::MatrixXd xtx_inv = perm * xtx_inv_perm * perm.transpose();

  Eigen::MatrixXd cov;
  double p_df = fit.df;
  if (cluster_robust) {
    std::map<std::string, std::vector<int>> groups;
    for (int r = 0; r < n; ++r) groups[design.cluster[static_cast<std::size_t>(r)]].push_back(r);
    int g = static_cast<int>(groups.size());
    if (g < 2) throw InputError("cluster-robust SEs need at least 2 clusters");
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [_, rows] : groups) {
      Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
      for (int r : rows) score += design.X.row(r).transpose() * resid(r);
      meat += score * score.transpose();
    }
    double c = (static_cast<double>(g) / (g - 1)) * (static_cast<double>(n - 1) / (n - k));
    cov = c * xtx_inv * meat * xtx_inv;
    fit.n_clusters = g;
    p_df = g - 1;
  } else {
    cov = fit.sigma2 * xtx_inv;
  }

  double y_sd = sd_ddof1(design.y);
  for (int c = 0; c < k; ++c) {
    Coefficient coef;
    coef.name = design.names[static_cast<std::size_t>(c)];
    coef.estimate = beta(c);
    coef.se = std::sqrt(std::max(cov(c, c), 0.0));
    coef.t = coef.se > 0.0 ? coef.estimate / coef.se : 0.0;
    coef.p = coef.se > 0.0 ? t_p_value(coef.t, p_df) : (coef.estimate == 0.0 ? 1.0 : 0.0);
    if (!design.is_dummy[static_cast<std::size_t>(c)] && y_sd > 0.0) {
      double x_sd = sd_ddof1(design.X.col(c));
      if (x_sd > 0.0) coef.standardized = coef.estimate * x_sd / y_sd;
    }
    fit.coefficients.push_back(std::move(coef));
  }
  return fit;
}

namespace {

// shared row assembly for did(): one row per observed topic-year
struct DidRows {
  std::vector<double> z, treat, period, interaction;
  std::vector<std::string> discipline, prize_year, cluster;

  void add(double value, bool is_treated, int t, const std::string& disc, Year py,
           const std::string& topic_id) {
    z.push_back(growth_transform(value));
    treat.push_back(is_treated ? 1.0 : 0.0);
    double per = t >= 1 ? 1.0 : 0.0;
    period.push_back(per);
    interaction.push_back(is_treated ? per : 0.0);
    discipline.push_back(disc);
    prize_year.push_back(std::to_string(py));
    cluster.push_back(topic_id);
  }
};

}  // namespace

RegressionFit did(const Panel& panel, const MatchResult& result, const DidSpec& spec) {
  const auto& known = panel.measures();
  if (std::find(known.begin(), known.end(), spec.measure) == known.end())
    throw InputError("unknown measure '" + spec.measure + "'");
  if (result.assignments.empty()) throw InputError("did: empty match result");

  DidRows rows;
  for (const auto& [treated_id, peers] : result.assignments) {
    const auto* ev = panel.event_for(treated_id);
    if (!ev) throw InputError("did: '" + treated_id + "' has no event in the panel");
    const auto& tr = panel.require(treated_id);
    for (int t = -kPreWindow; t <= kPostWindow; ++t) {
      Year year = ev->prize_year + t;
      if (tr.covers(year))
        rows.add(tr.at(spec.measure, year), true, t, tr.discipline, ev->prize_year, treated_id);
      for (const auto& pid : peers) {
        const auto& peer = panel.require(pid);
        if (peer.covers(year))
          rows.add(peer.at(spec.measure, year), false, t, peer.discipline, ev->prize_year, pid);
      }
    }
  }

  bool seen_treat[2] = {false, false}, seen_period[2] = {false, false};
  for (double v : rows.treat) seen_treat[v > 0.5] = true;
  for (double v : rows.period) seen_period[v > 0.5] = true;
  if (!seen_treat[0] || !seen_treat[1])
    throw InputError("did: degenerate design (single treatment group)");
  if (!seen_period[0] || !seen_period[1])
    throw InputError("did: degenerate design (single period)");

  DesignBuilder builder(rows.z.size());
  builder.intercept()
      .numeric("treat", rows.treat)
      .numeric("period", rows.period)
      .numeric("treat_x_period", rows.interaction)
      .categorical("discipline", rows.discipline)
      .categorical("prize_year", rows.prize_year)
      .response(rows.z)
      .clusters(rows.cluster);
  DesignMatrix design = builder.build();
  // treatment dummies carry no standardized coefficient
  for (std::size_t c = 0; c < design.names.size(); ++c)
    if (design.names[c] == "treat" || design.names[c] == "period" ||
        design.names[c] == "treat_x_period")
      design.is_dummy[c] = true;
  return ols(design, spec.cluster_robust);
}

RegressionFit signal_regression(const Panel& panel, const MatchResult& result,
                                const SignalSpec& spec) {
  TopicGapTable gaps = topic_gaps(panel, result, spec.measure);

  std::vector<std::string> topics;
  for (const auto& [treated_id, _] : result.assignments) topics.push_back(treated_id);

  static const std::vector<int> kLags = {-1, -2, -3, -10};
  std::vector<double> outcome;
  std::map<std::string, std::vector<double>> covariates;
  std::map<int, std::vector<double>> lags;
  std::vector<std::string> disciplines, prize_years, cluster;

  const auto cov_names = PrizeEvent::covariate_names();
  for (const auto& id : topics) {
    auto y10 = gaps.delta_at(id, kPostWindow);
    if (!y10) continue;  // horizon ends before t=+10
    const auto* ev = panel.event_for(id);
    for (const auto& name : cov_names) {
      auto v = ev->covariate(name);
      if (!v)
        throw InputError("signal_regression: event for '" + id + "' is missing covariate '" +
                         name + "'");
      covariates[name].push_back(*v);
    }
    for (int lag : kLags) {
      auto v = gaps.delta_at(id, lag);
      if (!v) throw InputError("signal_regression: '" + id + "' lacks the gap at t=" +
                               std::to_string(lag));
      lags[lag].push_back(*v);
    }
    outcome.push_back(*y10);
    disciplines.push_back(panel.require(id).discipline);
    prize_years.push_back(std::to_string(ev->prize_year));
    cluster.push_back(id);
  }
  if (outcome.size() < 2)
    throw InputError("signal_regression: fewer than 2 treated topics observed at t=+10");

  DesignBuilder builder(outcome.size());
  builder.intercept();
  for (const auto& name : cov_names) builder.numeric(name, covariates[name]);
  for (int lag : kLags) builder.numeric("lag_t" + std::to_string(lag), lags[lag]);
  builder.categorical("discipline", disciplines)
      .categorical("prize_year", prize_years)
      .response(outcome)
      .clusters(cluster);
  return ols(builder.build(), spec.cluster_robust);
}

double delta_bic(const RegressionFit& baseline, const RegressionFit& augmented) {
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  if (baseline.n != augmented.n || !close(baseline.y_sum, augmented.y_sum) ||
      !close(baseline.y_sumsq, augmented.y_sumsq))
    throw InputError("delta_bic: fits were computed on different responses");
  return augmented.bic - baseline.bic;
}

double CvResult::mean_fold_r2() const {
  double s = 0.0;
  for (double v : fold_r2) s += v;
  return fold_r2.empty() ? 0.0 : s / static_cast<double>(fold_r2.size());
}

CvResult kfold_cv(const DesignMatrix& design, int k, std::uint64_t seed) {
  const int n = design.n();
  if (k < 2) throw InputError("kfold_cv: k must be at least 2");
  if (k > n) throw InputError("kfold_cv: k exceeds the row count");

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(substream_seed(seed, 0x6376));  // "cv"
  rng.shuffle(order);

  CvResult out;
  out.k = k;
  out.seed = seed;
  for (int f = 0; f < k; ++f) {
    std::vector<int> test, train;
    for (int i = 0; i < n; ++i)
      (i % k == f ? test : train).push_back(order[static_cast<std::size_t>(i)]);

    DesignMatrix sub;
    sub.names = design.names;
    sub.is_dummy = design.is_dummy;
    sub.X.resize(static_cast<Eigen::Index>(train.size()), design.X.cols());
    sub.y.resize(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      sub.X.row(static_cast<Eigen::Index>(r)) = design.X.row(train[r]);
      sub.y(static_cast<Eigen::Index>(r)) = design.y(train[r]);
    }
    RegressionFit fit = ols(sub);
    Eigen::VectorXd beta(design.k());
    for (int c = 0; c < design.k(); ++c) beta(c) = fit.coefficients[static_cast<std::size_t>(c)].estimate;

    double ss_res = 0.0, test_mean = 0.0;
    for (int r : test) test_mean += design.y(r);
    test_mean /= static_cast<double>(test.size());
    double ss_tot = 0.0;
    for (int r : test) {
      double pred = design.X.row(r).dot(beta);
      ss_res += (design.y(r) - pred) * (design.y(r) - pred);
      ss_tot += (design.y(r) - test_mean) * (design.y(r) - test_mean);
    }
    out.fold_r2.push_back(ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                                       : (ss_res <= 1e-12 ? 1.0 : 0.0));
  }
  out.full_r2 = ols(design).r2;
  return out;
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

void to_json(nlohmann::json& j, const Coefficient& c) {
  j = {{"name", c.name}, {"estimate", c.estimate}, {"se", c.se},
       {"t", c.t},       {"p", c.p},               {"stars", significance_stars(c.p)}};
  if (c.standardized) j["standardized"] = *c.standardized;
}

void to_json(nlohmann::json& j, const RegressionFit& f) {
  j = {{"coefficients", f.coefficients},
       {"r2", f.r2},
       {"rss", f.rss},
       {"bic", f.bic},
       {"n", f.n},
       {"k", f.k},
       {"df", f.df},
       {"cluster_robust", f.cluster_robust}};
  if (f.cluster_robust) j["n_clusters"] = f.n_clusters;
}

nlohmann::json RegressionFit::table() const {
  nlohmann::json j;
  to_json(j, *this);
  return j;
}

void to_json(nlohmann::json& j, const CvResult& r) {
  j = {{"k", r.k},
       {"seed", r.seed},
       {"fold_r2", r.fold_r2},
       {"mean_fold_r2", r.mean_fold_r2()},
       {"full_r2", r.full_r2}};
}

}  // namespace prizegrowth
