#include "doctest.h"

#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "rankcf/format.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/random.hpp"

using namespace rankcf;

TEST_CASE("shortest round-trip formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  Rng rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    double back = 0.0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  double out = 0.0;
  CHECK(parse_double(" +3.5 ", out));
  CHECK(out == 3.5);
  CHECK_FALSE(parse_double("3.5x", out));
  CHECK_FALSE(parse_double("", out));
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42, 1), b(42, 1), c(42, 2), d(43, 1);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next();
    CHECK(va == b.next());
    differs_stream |= va != c.next();
    differs_seed |= va != d.next();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("rng moments") {
  Rng rng(7, 3);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0 && u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 4 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.below(5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 20);
}

TEST_CASE("normal distribution helpers") {
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-13));
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-9}) {
    const double x = normal_quantile(p);
    const double back = x > 0 ? 1.0 - normal_cdf(-x) : normal_cdf(x);
    CHECK(back == doctest::Approx(p).epsilon(1e-12));
  }
  // E|N(mu, s) - t| against trapezoid quadrature.
  for (double t : {-1.0, 0.0, 0.7, 3.0}) {
    const double mu = 0.4, s = 1.3;
    double q = 0.0;
    const int n = 200000;
    const double lo = mu - 12 * s, step = 24 * s / n;
    for (int i = 0; i <= n; ++i) {
      const double v = lo + i * step;
      q += (i == 0 || i == n ? 0.5 : 1.0) * std::abs(v - t) * normal_pdf((v - mu) / s) / s;
    }
    CHECK(normal_mean_abs_deviation(t, mu, s) == doctest::Approx(q * step).epsilon(1e-8));
  }
  CHECK(normal_mean_abs_deviation(0.0, 0.0, 1.0) == doctest::Approx(std::sqrt(2 / M_PI)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(5.0) == doctest::Approx(0.9933071490757153));
  CHECK(sigmoid(-800.0) >= 0.0);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, threads,
                                 [](std::size_t i) {
                                   if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }
}
