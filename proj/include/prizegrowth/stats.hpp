#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace prizegrowth {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sd / sqrt(n), sample sd with n-1 denominator
  int n = 0;
};

MeanSe mean_se(const std::vector<double>& v);

// Two-sided one-sample t test against mean 0. sd == 0 degenerates to
// p = 1 when the mean is 0 and p = 0 otherwise.
struct TTestResult {
  double mean, se, t, p;
  int n;
};
TTestResult t_test_zero(const std::vector<double>& v);

// log of Binomial(n, k) pmf at p = 0.5
double log_binom_pmf_half(int n, int k);

// Exact two-sided binomial test against p = 0.5: double the smaller tail,
// capped at 1.
double binomial_two_sided_p(int n, int k);

// Shannon entropy in bits; 0 log 0 := 0. Throws InputError unless probs sum
// to 1 within 1e-9 and are nonnegative.
double shannon_entropy(const std::vector<double>& probs);

// Survival function of the asymptotic Kolmogorov distribution,
// Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

struct KsResult {
  double d;  // sup |ECDF_a - ECDF_b|
  double p;  // asymptotic
};
KsResult ks_test(std::vector<double> a, std::vector<double> b);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

}  // namespace prizegrowth
