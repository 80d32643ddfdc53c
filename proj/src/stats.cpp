#include "prizegrowth/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "prizegrowth/util.hpp"

namespace prizegrowth {

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  r.n = static_cast<int>(v.size());
  if (r.n == 0) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / r.n;
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / (r.n - 1) / r.n);
  return r;
}

TTestResult t_test_zero(const std::vector<double>& v) {
  if (v.size() < 2) throw InputError("t test needs at least 2 observations");
  MeanSe ms = mean_se(v);
  TTestResult r{ms.mean, ms.se, 0.0, 1.0, ms.n};
  if (ms.se == 0.0) {
    r.t = 0.0;
    r.p = (ms.mean == 0.0) ? 1.0 : 0.0;
    return r;
  }
  r.t = ms.mean / ms.se;
  boost::math::students_t_distribution<double> dist(ms.n - 1);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

double log_binom_pmf_half(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
         n * std::log(2.0);
}

double binomial_two_sided_p(int n, int k) {
  if (n <= 0) throw InputError("binomial test needs at least 1 trial");
  if (k < 0 || k > n) throw InputError("binomial test: k out of range");
  // lower tail P(X <= k) and upper tail P(X >= k)
  double lo = 0.0, hi = 0.0;
  for (int i = 0; i <= k; ++i) lo += std::exp(log_binom_pmf_half(n, i));
  for (int i = k; i <= n; ++i) hi += std::exp(log_binom_pmf_half(n, i));
  double p = 2.0 * std::min(lo, hi);
  return std::min(p, 1.0);
}

double shannon_entropy(const std::vector<double>& probs) {
  if (probs.empty()) throw InputError("entropy of empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw InputError("entropy: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError("entropy: probabilities sum to " + format_double(sum) + ", expected 1");
  // Equal probabilities mean p = 1/n, so S = log2(n) algebraically; evaluating
  // that directly keeps the uniform distribution the exact maximizer instead of
  // losing it to term-by-term rounding.
  bool uniform = true;
  for (double p : probs)
    if (p != probs.front()) {
      uniform = false;
      break;
    }
  if (uniform) return std::log2(static_cast<double>(probs.size()));
  double s = 0.0;
  for (double p : probs)
    if (p > 0.0) s -= p * std::log2(p);
  return s;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-300) break;
    sign = -sign;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

KsResult ks_test(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InputError("ks test: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // advance both ECDFs past each distinct value before comparing
  while (i < na && j < nb) {
    double v = std::min(a[i], b[j]);
    while (i < na && a[i] == v) ++i;
    while (j < nb && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  d = std::max(d, std::abs(1.0 - static_cast<double>(j) / nb));
  d = std::max(d, std::abs(static_cast<double>(i) / na - 1.0));
  double ne = static_cast<double>(na) * nb / (na + nb);
  double sq = std::sqrt(ne);
  double lambda = (sq + 0.12 + 0.11 / sq) * d;
  return {d, d == 0.0 ? 1.0 : kolmogorov_q(lambda)};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace prizegrowth
