#include "doctest.h"

#include <cmath>
#include <vector>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/random.hpp"
#include "rankcf/rank.hpp"
#include "rankcf/simulator.hpp"

using namespace rankcf;

TEST_CASE("shapes and homogeneous case") {
  SimConfig c;
  c.m = 5;
  c.n = 10000;
  c.alpha = 1.0;
  const SimResult s = simulate(c);
  CHECK(s.dataset.size() == 10000);
  CHECK(s.dataset.dim() == 5);
  CHECK(s.truth.size() == 10000);
  CHECK(s.w_x.size() == 5);
  CHECK(s.w_y.size() == 5);
  CHECK(consistency_check(s.dataset, s.truth));
  // With alpha = 1 the two arms share the structural equation.
  for (std::size_t k = 0; k < s.truth.size(); ++k)
    CHECK(s.truth.y1[k] == doctest::Approx(s.truth.y0[k]).epsilon(1e-12));
  for (double w : s.w_x) CHECK(std::abs(w) <= 1.0);

  std::size_t counts[3] = {0, 0, 0};
  for (Split sp : s.dataset.splits()) ++counts[static_cast<int>(sp)];
  CHECK(counts[0] == 6300);
  CHECK(counts[1] == 2700);
  CHECK(counts[2] == 1000);
}

TEST_CASE("invalid configurations") {
  SimConfig c;
  c.n = 5;
  CHECK_THROWS_AS(simulate(c), ValidationError);
  c = SimConfig{};
  c.alpha = 0;
  CHECK_THROWS_AS(simulate(c), ValidationError);
  c = SimConfig{};
  c.split_ratios = {0.5, 0.5, 0.0};
  CHECK_THROWS_AS(simulate(c), ValidationError);
  c = SimConfig{};
  c.beta = 0.5;
  CHECK_THROWS_AS(analytic_laws(simulate(c)), ValidationError);
}

TEST_CASE("seed determinism") {
  SimConfig c;
  c.n = 2000;
  c.alpha = 2;
  c.seed = 11;
  const SimResult a = simulate(c), b = simulate(c);
  CHECK(std::vector<double>(a.dataset.outcomes().begin(), a.dataset.outcomes().end()) ==
        std::vector<double>(b.dataset.outcomes().begin(), b.dataset.outcomes().end()));
  CHECK(std::vector<double>(a.dataset.covariate_matrix().begin(),
                            a.dataset.covariate_matrix().end()) ==
        std::vector<double>(b.dataset.covariate_matrix().begin(),
                            b.dataset.covariate_matrix().end()));
  CHECK(a.truth.y0 == b.truth.y0);
  c.seed = 12;
  const SimResult d = simulate(c);
  CHECK(a.truth.y0 != d.truth.y0);
}

TEST_CASE("rank preservation per bin when beta is zero") {
  for (double alpha : {0.5, 2.0, 3.0}) {
    SimConfig c;
    c.n = 3000;
    c.alpha = alpha;
    c.seed = 21;
    const SimResult s = simulate(c);
    std::vector<double> key(s.dataset.size());
    for (std::size_t k = 0; k < key.size(); ++k) key[k] = s.dataset.covariates(k)[0];
    const BinnedRankReport r = binned_kendall(key, s.truth.y0, s.truth.y1);
    for (double t : r.bin_rho_tilde) CHECK(t == 1.0);
  }
}

TEST_CASE("treated fraction matches a Monte Carlo oracle") {
  SimConfig c;
  c.n = 20000;
  c.seed = 31;
  const SimResult s = simulate(c);
  Rng rng(999, 0);
  const std::size_t draws = 1000000;
  double mc = 0;
  std::vector<double> z(c.m);
  for (std::size_t i = 0; i < draws; ++i) {
    double lin = 0;
    for (std::size_t j = 0; j < c.m; ++j) lin += s.w_x[j] * rng.normal();
    mc += 1 / (1 + std::exp(-lin));
  }
  mc /= static_cast<double>(draws);
  double frac = 0;
  for (double x : s.dataset.treatments()) frac += x;
  frac /= static_cast<double>(c.n);
  const double se = std::sqrt(mc * (1 - mc) / static_cast<double>(c.n));
  CHECK(std::abs(frac - mc) < 3 * se);
}

TEST_CASE("analytic counterfactual map") {
  SimConfig c;
  c.n = 2000;
  c.alpha = 2;
  c.seed = 41;
  const SimResult s = simulate(c);
  const AnalyticLaws laws = analytic_laws(s);
  for (std::size_t k = 0; k < s.dataset.size(); ++k) {
    const int x = static_cast<int>(s.dataset.treatment(k));
    const Evidence ev{x, std::vector<double>(s.dataset.covariates(k).begin(),
                                             s.dataset.covariates(k).end()),
                      s.dataset.outcome(k), 1 - x};
    const double truth = x == 0 ? s.truth.y1[k] : s.truth.y0[k];
    CHECK(laws.counterfactual(ev) == doctest::Approx(truth).epsilon(1e-10));
    CHECK(laws.counterfactual(ev) ==
          doctest::Approx(x == 0 ? 2 * ev.y : ev.y / 2).epsilon(1e-12));
  }
  // Conditional laws: quantile matching through the Gaussian CDFs gives the same map.
  const std::vector<double> z{0.3, -0.2, 1.0, 0.0, 0.5};
  const ConditionalLaw l0 = laws.law(z, 0), l1 = laws.law(z, 1);
  CHECK(l1.sd == doctest::Approx(2.0));
  CHECK(l0.sd == doctest::Approx(1.0));
  CHECK(l1.quantile(l0.cdf(0.7)) == doctest::Approx(1.4).epsilon(1e-9));
}

TEST_CASE("beta calibration reaches the target tau") {
  SimConfig c;
  c.m = 10;
  c.n = 20000;
  c.alpha = 2;
  c.seed = 51;
  const BetaCalibration cal = calibrate_beta(c, 0.5, 20000);
  CHECK(cal.bracketed);
  CHECK(cal.beta > 0);
  c.beta = cal.beta;
  const SimResult s = simulate(c);
  const RankReport r = kendall_fast(s.truth.y0, s.truth.y1);
  CHECK(std::abs(r.rho_tilde - 0.5) < 0.05);
  CHECK(consistency_check(s.dataset, s.truth));
}

TEST_CASE("correlated covariates") {
  SimConfig c;
  c.m = 4;
  c.n = 40000;
  c.rho = 0.6;
  c.seed = 61;
  const SimResult s = simulate(c);
  for (std::size_t i = 0; i < c.m; ++i) {
    for (std::size_t j = 0; j < c.m; ++j) {
      double sxy = 0, sx = 0, sy = 0;
      for (std::size_t k = 0; k < c.n; ++k) {
        const auto z = s.dataset.covariates(k);
        sxy += z[i] * z[j];
        sx += z[i];
        sy += z[j];
      }
      const double nn = static_cast<double>(c.n);
      const double cov = sxy / nn - (sx / nn) * (sy / nn);
      const double target = std::max(0.01, std::pow(0.6, std::abs(double(i) - double(j))));
      CHECK(std::abs(cov - target) < 0.05);
    }
  }
  CHECK_FALSE(s.covariance_regularized);
}

TEST_CASE("calibration moves to another direction when the target is out of reach") {
  SimConfig c;
  c.m = 10;
  c.n = 20000;
  c.alpha = 2;
  c.seed = 8;
  // With this seed's first W_y1 direction, tau stays above 0.3 for any beta.
  const BetaCalibration first_only = calibrate_beta(c, 0.3, 20000, 1);
  CHECK_FALSE(first_only.bracketed);
  CHECK(first_only.achieved_tau > 0.3);

  const BetaCalibration cal = calibrate_beta(c, 0.3, 20000);
  REQUIRE(cal.bracketed);
  CHECK(cal.violation_draw > 0);
  c.beta = cal.beta;
  c.violation_draw = cal.violation_draw;
  const SimResult s = simulate(c);
  CHECK(std::abs(kendall_fast(s.truth.y0, s.truth.y1).rho_tilde - 0.3) < 0.05);
}
