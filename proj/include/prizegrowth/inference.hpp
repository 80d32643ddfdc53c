#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "prizegrowth/matching.hpp"
#include "prizegrowth/panel.hpp"

namespace prizegrowth {

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;     // one per column
  std::vector<bool> is_dummy;        // intercept and expanded categoricals
  std::vector<std::string> cluster;  // optional per-row cluster ids (empty = none)

  int n() const { return static_cast<int>(X.rows()); }
  int k() const { return static_cast<int>(X.cols()); }
};

// Assembles a named design column by column; categoricals expand to dummies
// with the lexicographically smallest label dropped as reference.
class DesignBuilder {
 public:
  explicit DesignBuilder(std::size_t rows) : rows_(rows) {}

  DesignBuilder& intercept();
  DesignBuilder& numeric(const std::string& name, const std::vector<double>& values);
  DesignBuilder& categorical(const std::string& name, const std::vector<std::string>& labels);
  DesignBuilder& response(const std::vector<double>& y);
  DesignBuilder& clusters(const std::vector<std::string>& ids);
  DesignMatrix build() const;

 private:
  std::size_t rows_;
  std::vector<std::pair<std::string, std::vector<double>>> columns_;
  std::vector<bool> dummy_;
  std::vector<double> y_;
  std::vector<std::string> cluster_;
};

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::optional<double> standardized;  // raw * sd(x)/sd(y); dummies excluded
};

struct RegressionFit {
  std::vector<Coefficient> coefficients;
  double rss = 0.0, tss = 0.0, r2 = 0.0, sigma2 = 0.0, bic = 0.0;
  int n = 0, k = 0, df = 0;
  bool cluster_robust = false;
  int n_clusters = 0;
  // response fingerprint so delta_bic can insist on identical row sets
  double y_sum = 0.0, y_sumsq = 0.0;

  const Coefficient* find(const std::string& name) const;
  const Coefficient& require(const std::string& name) const;
  nlohmann::json table() const;
};

RegressionFit ols(const DesignMatrix& design, bool cluster_robust = false);

struct DidSpec {
  std::string measure = "publications";
  bool cluster_robust = false;
};

// Z_it on treat, period (t >= 1), their interaction, discipline and
// prize-year fixed effects; rows are all treated and matched-control
// topic-years in the event window. The interaction column is "treat_x_period".
RegressionFit did(const Panel& panel, const MatchResult& result, const DidSpec& spec);

struct SignalSpec {
  std::string measure = "publications";
  bool cluster_robust = false;
};

// Per-treated-topic gap at t=+10 regressed on event covariates, lagged gaps
// at t = -1, -2, -3, -10, and discipline + prize-year fixed effects.
RegressionFit signal_regression(const Panel& panel, const MatchResult& result,
                                const SignalSpec& spec);

// BIC(augmented) - BIC(baseline); throws unless both fits share a response.
double delta_bic(const RegressionFit& baseline, const RegressionFit& augmented);

struct CvResult {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> fold_r2;  // out-of-fold R^2 per fold
  double full_r2 = 0.0;

  double mean_fold_r2() const;
};

CvResult kfold_cv(const DesignMatrix& design, int k, std::uint64_t seed);

std::string significance_stars(double p);

void to_json(nlohmann::json& j, const Coefficient& c);
void to_json(nlohmann::json& j, const RegressionFit& f);
void to_json(nlohmann::json& j, const CvResult& r);

}  // namespace prizegrowth
