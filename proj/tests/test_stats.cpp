#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "prizegrowth/rng.hpp"
#include "prizegrowth/stats.hpp"
#include "prizegrowth/util.hpp"

using namespace prizegrowth;

namespace {

// exact Binomial(n, 1/2) pmf for small n via integer binomial coefficients
long double exact_pmf_half(int n, int k) {
  long double c = 1.0L;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c * std::pow(0.5L, n);
}

long double exact_two_sided(int n, int k) {
  long double lo = 0.0L, hi = 0.0L;
  for (int i = 0; i <= k; ++i) lo += exact_pmf_half(n, i);
  for (int i = k; i <= n; ++i) hi += exact_pmf_half(n, i);
  long double p = 2.0L * std::min(lo, hi);
  return std::min(p, 1.0L);
}

}  // namespace

TEST_CASE("mean_se basics") {
  auto r = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(r.n == 4);
  CHECK(r.mean == doctest::Approx(2.5).epsilon(1e-15));
  // sample sd = sqrt(5/3), se = sd/2
  CHECK(r.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));

  CHECK(mean_se({}).n == 0);
  auto one = mean_se({7.0});
  CHECK(one.n == 1);
  CHECK(one.mean == 7.0);
  CHECK(one.se == 0.0);
}

TEST_CASE("t test against zero matches the frozen reference") {
  // mean 0.5, se 0.5 -> t = 1 with 3 df
  auto r = t_test_zero({1.0, 1.0, 1.0, -1.0});
  CHECK(r.t == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.p == doctest::Approx(0.39100221895577064).epsilon(1e-12));

  // exactly symmetric sample: mean is 0 in floating point too
  auto z = t_test_zero({0.5, -0.5, 0.25, -0.25});
  CHECK(z.t == 0.0);
  CHECK(z.p == 1.0);

  // degenerate spread
  CHECK(t_test_zero({2.0, 2.0}).p == 0.0);
  CHECK(t_test_zero({0.0, 0.0}).p == 1.0);
  CHECK_THROWS_AS(t_test_zero({1.0}), InputError);
}

TEST_CASE("binomial two-sided p against frozen references") {
  CHECK(binomial_two_sided_p(10, 5) == 1.0);
  CHECK(binomial_two_sided_p(100, 61) ==
        doctest::Approx(0.03520020021770481).epsilon(1e-12));
  CHECK(binomial_two_sided_p(20, 14) ==
        doctest::Approx(0.11531829833984375).epsilon(1e-12));
  CHECK(binomial_two_sided_p(15, 0) == doctest::Approx(6.103515625e-05).epsilon(1e-12));
  // published large-sample case: 11539 trials, 7060 positive
  double big = binomial_two_sided_p(11539, 7060);
  CHECK(big < 1e-3);
  CHECK(big == doctest::Approx(1.554965394255231e-128).epsilon(1e-6));
}

TEST_CASE("binomial two-sided p equals exact pmf summation for every n <= 20") {
  for (int n = 1; n <= 20; ++n)
    for (int k = 0; k <= n; ++k) {
      double want = static_cast<double>(exact_two_sided(n, k));
      CHECK_MESSAGE(binomial_two_sided_p(n, k) == doctest::Approx(want).epsilon(1e-12),
                    "n=", n, " k=", k);
    }
  CHECK_THROWS_AS(binomial_two_sided_p(0, 0), InputError);
  CHECK_THROWS_AS(binomial_two_sided_p(10, 11), InputError);
  CHECK_THROWS_AS(binomial_two_sided_p(10, -1), InputError);
}

TEST_CASE("shannon entropy is exactly log2(k) on uniform distributions up to 64") {
  for (int k = 1; k <= 64; ++k) {
    std::vector<double> p(static_cast<std::size_t>(k), 1.0 / k);
    CHECK_MESSAGE(shannon_entropy(p) == std::log2(static_cast<double>(k)), "k=", k);
  }
}

TEST_CASE("shannon entropy small cases and validation") {
  CHECK(shannon_entropy({1.0}) == 0.0);
  CHECK(shannon_entropy({0.5, 0.25, 0.25}) == 1.5);
  // 0 log 0 contributes nothing
  CHECK(shannon_entropy({0.5, 0.5, 0.0}) == 1.0);
  CHECK_THROWS_AS(shannon_entropy({}), InputError);
  CHECK_THROWS_AS(shannon_entropy({0.5, 0.6}), InputError);
  CHECK_THROWS_AS(shannon_entropy({1.5, -0.5}), InputError);
}

TEST_CASE("shannon entropy is maximized at the uniform distribution") {
  for (int k : {2, 3, 5, 8}) {
    std::vector<double> uniform(static_cast<std::size_t>(k), 1.0 / k);
    double s_max = shannon_entropy(uniform);
    for (double eps : {1e-4, 1e-6}) {
      auto p = uniform;
      p[0] += eps;
      p[1] -= eps;
      CHECK(shannon_entropy(p) < s_max);
    }
  }
}

TEST_CASE("kolmogorov survival function against frozen references") {
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(-1.0) == 1.0);
  CHECK(kolmogorov_q(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-12));
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.2699996716773545).epsilon(1e-12));
  CHECK(kolmogorov_q(1.36) == doctest::Approx(0.04948587675537788).epsilon(1e-12));
  CHECK(kolmogorov_q(2.0) == doctest::Approx(0.0006709252557796953).epsilon(1e-12));
  // monotone decreasing
  double prev = 1.0;
  for (double lam = 0.1; lam < 3.0; lam += 0.1) {
    double q = kolmogorov_q(lam);
    CHECK(q <= prev);
    prev = q;
  }
  CHECK(kolmogorov_q(10.0) < 1e-80);
}

TEST_CASE("ks test on identical and disjoint samples") {
  std::vector<double> a, b;
  for (int i = 0; i < 100; ++i) a.push_back(static_cast<double>(i));
  auto same = ks_test(a, a);
  CHECK(same.d == 0.0);
  CHECK(same.p == 1.0);

  for (int i = 100; i < 200; ++i) b.push_back(static_cast<double>(i));
  auto disjoint = ks_test(a, b);
  CHECK(disjoint.d == 1.0);
  CHECK(disjoint.p == doctest::Approx(1.5505547466854555e-45).epsilon(1e-9));
}

TEST_CASE("ks statistic on small hand-computed samples") {
  auto r = ks_test({1.0, 2.0, 3.0}, {1.5, 2.5, 3.5});
  CHECK(r.d == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // ties across the two samples
  auto t = ks_test({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0});
  CHECK(t.d == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_test({}, {1.0}), InputError);
  CHECK_THROWS_AS(ks_test({1.0}, {}), InputError);
}

TEST_CASE("ks test accepts two draws from the same distribution") {
  Rng ra(substream_seed(2024, 11));
  Rng rb(substream_seed(2024, 12));
  std::vector<double> a, b;
  for (int i = 0; i < 500; ++i) {
    a.push_back(ra.normal(0.0, 1.0));
    b.push_back(rb.normal(0.0, 1.0));
  }
  auto r = ks_test(a, b);
  CHECK(r.d < 0.15);
  CHECK(r.p > 0.01);
}

TEST_CASE("jaccard similarity") {
  std::set<std::string> a{"a", "b", "c"}, b{"b", "c", "d"}, e;
  CHECK(jaccard(a, b) == 0.5);
  CHECK(jaccard(b, a) == 0.5);
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(a, e) == 0.0);
  CHECK(jaccard(e, e) == 0.0);
  std::set<std::string> d{"x", "y"};
  CHECK(jaccard(a, d) == 0.0);
  // range on a few random set pairs
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    std::set<std::string> s1, s2;
    for (int i = 0; i < 8; ++i) {
      if (rng.bernoulli(0.5)) s1.insert("m" + std::to_string(rng.below(12)));
      if (rng.bernoulli(0.5)) s2.insert("m" + std::to_string(rng.below(12)));
    }
    if (s1.empty() && s2.empty()) continue;
    double j = jaccard(s1, s2);
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    CHECK(j == jaccard(s2, s1));
    if (j == 1.0) CHECK(s1 == s2);
  }
}

TEST_CASE("fnv1a and format_double utility behavior") {
  CHECK(fnv1a(std::string("")) == 14695981039346656037ull);
  CHECK(fnv1a(std::string("a")) != fnv1a(std::string("b")));
  CHECK(hash_hex(0x1234abcdull) == "000000001234abcd");

  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0, 2.5e17}) {
    std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_double(1.0) == "1");
}
