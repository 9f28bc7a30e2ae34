#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/estimator.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/random.hpp"

using namespace rankcf;

namespace {

const PropensityFn kHalf = [](std::span<const double>, int) { return 0.5; };

ObservationalDataset make(TreatmentMode mode, const std::vector<double>& x,
                          const std::vector<double>& z, std::size_t m, const std::vector<double>& y) {
  return ObservationalDataset(mode, x, z, m, y, std::vector<Split>(x.size(), Split::train));
}

LossProfile random_profile(Rng& rng) {
  LossProfile p;
  const std::size_t n = 1 + rng.below(12);
  std::vector<double> k;
  for (std::size_t i = 0; i < n; ++i) k.push_back(static_cast<double>(rng.below(8)));
  std::sort(k.begin(), k.end());
  for (double v : k) {
    p.knots.push_back(v);
    p.a.push_back(static_cast<double>(1 + rng.below(4)));
    p.total_a += p.a.back();
  }
  const int mode = static_cast<int>(rng.below(4));
  if (mode == 0) p.b = 0.0;
  if (mode == 1) p.b = rng.uniform(-1, 1) * p.total_a;
  if (mode == 2) p.b = (rng.below(2) ? 1 : -1) * p.total_a * (1 - 1e-9);
  if (mode == 3) p.b = static_cast<double>(static_cast<int>(rng.below(2 * n + 1)) - static_cast<int>(n));
  p.normalizer = 1.0;
  return p;
}

// Direct evaluation of f(t) from the definition.
double f_direct(const LossProfile& p, double t) {
  double s = p.b * t;
  for (std::size_t i = 0; i < p.knots.size(); ++i) s += p.a[i] * std::abs(p.knots[i] - t);
  return s;
}

}  // namespace

TEST_CASE("minimizer examples") {
  LossProfile p{{1, 2, 3}, {1, 1, 1}, 0.0, 3.0, 1.0};
  CHECK(minimize_profile(p).y_hat == 2.0);
  CHECK(minimize_profile(p).bounded);
  p.b = 1.0;
  CHECK(minimize_profile(p).y_hat == 1.0);
  p.b = 4.0;
  CHECK(minimize_profile(p).y_hat == 1.0);
  CHECK_FALSE(minimize_profile(p).bounded);
  p.b = -4.0;
  CHECK(minimize_profile(p).y_hat == 3.0);
  CHECK_FALSE(minimize_profile(p).bounded);
  p.b = 0.0;
  CHECK(minimize_profile(p).n_effective == 3.0);
  CHECK(minimize_profile(p).loss_at_min == 2.0);
}

TEST_CASE("minimizer is a grid argmin and the profile is convex") {
  Rng rng(21, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const LossProfile p = random_profile(rng);
    const CounterfactualEstimate est = minimize_profile(p);
    const double lo = p.knots.front() - 1, hi = p.knots.back() + 1;
    const int n = 20000;
    const double step = (hi - lo) / n;
    double best = INFINITY;
    for (int i = 0; i <= n; ++i) best = std::min(best, f_direct(p, lo + i * step));
    if (std::abs(p.b) < p.total_a) {
      CHECK(est.bounded);
      // y_hat attains the minimum and nothing to its left does.
      CHECK(f_direct(p, est.y_hat) <= best + 1e-9);
      double left = p.b, right = p.b;
      for (std::size_t i = 0; i < p.knots.size(); ++i) {
        left += p.knots[i] < est.y_hat ? p.a[i] : -p.a[i];
        right += p.knots[i] <= est.y_hat ? p.a[i] : -p.a[i];
      }
      CHECK(left < 0.0);
      CHECK(right >= 0.0);
      CHECK(p.evaluate(est.y_hat) == doctest::Approx(f_direct(p, est.y_hat)).epsilon(1e-12));
    } else {
      CHECK_FALSE(est.bounded);
      CHECK(est.y_hat == (p.b > 0 ? p.knots.front() : p.knots.back()));
    }
    for (int t = 0; t < 20; ++t) {
      double t1 = rng.uniform(lo, hi), t2 = rng.uniform(lo, hi), t3 = rng.uniform(lo, hi);
      if (t1 > t2) std::swap(t1, t2);
      if (t2 > t3) std::swap(t2, t3);
      if (t1 > t2) std::swap(t1, t2);
      if (t3 - t1 < 1e-9) continue;
      const double chord = p.evaluate(t1) + (p.evaluate(t3) - p.evaluate(t1)) * (t2 - t1) / (t3 - t1);
      CHECK(p.evaluate(t2) <= chord + 1e-9);
    }
  }
}

TEST_CASE("profile coefficients match a direct computation") {
  Rng rng(4, 0);
  const std::size_t n = 60, m = 2;
  std::vector<double> x(n), z(n * m), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i % 2);
    z[2 * i] = rng.normal();
    z[2 * i + 1] = rng.normal();
    y[i] = std::round(rng.normal() * 4) / 4;  // ties on purpose
  }
  const auto pool = make(TreatmentMode::binary, x, z, m, y);
  const PropensityFn prop = [](std::span<const double> zz, int arm) {
    const double p1 = sigmoid(0.7 * zz[0] - 0.2 * zz[1]);
    return arm == 1 ? p1 : 1 - p1;
  };
  const KernelSpec kern(KernelFamily::gaussian, 0.9);
  const double h = 0.9;
  for (int q = 0; q < 10; ++q) {
    const Evidence ev{static_cast<double>(q % 2), {rng.normal(), rng.normal()}, y[q], 1.0 - (q % 2)};
    const LossProfile p = build_profile(pool, ev, kern, prop);
    double s = 0, b = 0, ta = 0;
    std::vector<std::pair<double, double>> knots;
    for (std::size_t k = 0; k < n; ++k) {
      const double d0 = z[2 * k] - ev.z[0], d1 = z[2 * k + 1] - ev.z[1];
      const double K = std::exp(-(d0 * d0 + d1 * d1) / (2 * h * h)) / (2 * std::numbers::pi * h * h);
      s += K;
      const std::span<const double> zk(&z[2 * k], 2);
      if (x[k] == ev.x_prime) knots.emplace_back(y[k], K / prop(zk, static_cast<int>(x[k])));
      if (x[k] == ev.x) b += K / prop(zk, static_cast<int>(x[k])) * ((y[k] > ev.y) - (y[k] < ev.y));
    }
    for (auto& kv : knots) ta += kv.second / s;
    CHECK(p.normalizer == doctest::Approx(s).epsilon(1e-12));
    CHECK(p.b == doctest::Approx(b / s).epsilon(1e-10));
    CHECK(p.total_a == doctest::Approx(ta).epsilon(1e-10));
    CHECK(std::is_sorted(p.knots.begin(), p.knots.end()));
    for (double t : {-1.0, 0.0, 0.3, 2.0}) {
      double f = b / s * t;
      for (auto& kv : knots) f += kv.second / s * std::abs(kv.first - t);
      CHECK(p.evaluate(t) == doctest::Approx(f).epsilon(1e-10));
    }
  }
}

TEST_CASE("flat kernel, balanced arms, y below every factual outcome") {
  const std::size_t n = 400;
  std::vector<double> x(n), z(n), y(n);
  Rng rng(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i % 2);
    z[i] = rng.normal();
    y[i] = 10 + rng.uniform();
  }
  const auto pool = make(TreatmentMode::binary, x, z, 1, y);
  const LossProfile p =
      build_profile(pool, {0, {0.0}, -100.0, 1}, KernelSpec(KernelFamily::gaussian, 1e6), kHalf);
  CHECK(std::abs(p.b - 1.0) < 1e-3);
}

TEST_CASE("sign term vanishes at equal outcomes") {
  const auto pool = make(TreatmentMode::binary, {0, 1, 0, 1}, {0, 0, 0, 0}, 1, {1, 2, 3, 4});
  const KernelSpec k(KernelFamily::epanechnikov, 1);
  // Arm-0 outcomes 1 and 3, y = 3: signs -1 and 0.
  const LossProfile p = build_profile(pool, {0, {0.0}, 3.0, 1}, k, kHalf);
  CHECK(p.b == doctest::Approx(-2.0 / 4.0));
}

TEST_CASE("coverage and precondition errors") {
  const auto pool = make(TreatmentMode::binary, {0, 0, 1, 1}, {0, 0.2, 5, 5.2}, 1, {1, 2, 3, 4});
  const KernelSpec k(KernelFamily::epanechnikov, 1);
  CHECK_THROWS_AS(build_profile(pool, {0, {0.0}, 1.0, 1}, k, kHalf), CoverageError);
  CHECK_THROWS_AS(build_profile(pool, {0, {50.0}, 1.0, 1}, k, kHalf), CoverageError);
  CHECK_THROWS_AS(build_profile(pool, {0, {0.0}, 1.0, 0}, k, kHalf), ValidationError);
}

TEST_CASE("additive noise recovers the shift") {
  // Y = X + Z + U with Z in {-1, 1}, oracle propensity; y_1 = y + 1.
  const std::size_t n = 100000;
  Rng rng(8, 0);
  std::vector<double> x(n), z(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = rng.below(2) ? 1.0 : -1.0;
    const double p1 = sigmoid(0.5 * z[i]);
    x[i] = rng.uniform() < p1 ? 1.0 : 0.0;
    y[i] = x[i] + z[i] + rng.normal();
  }
  const auto pool = make(TreatmentMode::binary, x, z, 1, y);
  const PropensityFn prop = [](std::span<const double> zz, int arm) {
    const double p1 = sigmoid(0.5 * zz[0]);
    return arm == 1 ? p1 : 1 - p1;
  };
  const CounterfactualEstimator est(pool, KernelSpec(KernelFamily::epanechnikov, 1), prop);
  for (double q : {0.0, 1.0, 1.8}) {
    const double yhat = est.estimate({0, {1.0}, q, 1}).y_hat;
    INFO("q = " << q << " yhat = " << yhat);
    CHECK(std::abs(yhat - (q + 1)) < 0.05);
  }
}

TEST_CASE("weighted profiles") {
  Rng rng(2, 0);
  const std::size_t n = 300;
  std::vector<double> x(n), z(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(rng.below(2));
    z[i] = rng.normal();
    y[i] = z[i] + rng.normal();
  }
  const auto pool = make(TreatmentMode::binary, x, z, 1, y);
  const KernelSpec k(KernelFamily::gaussian, 0.7);
  const Evidence ev{1, {0.2}, 0.4, 0};
  const LossProfile base = build_profile(pool, ev, k, kHalf);
  const LossProfile one =
      build_profile_weighted(pool, ev, k, kHalf, [](double, std::span<const double>) { return 1.0; });
  CHECK(one.knots == base.knots);
  CHECK(one.b == base.b);
  CHECK(one.total_a == base.total_a);
  const LossProfile five =
      build_profile_weighted(pool, ev, k, kHalf, [](double, std::span<const double>) { return 5.0; });
  CHECK(minimize_profile(five).y_hat == minimize_profile(base).y_hat);
  CHECK(five.b == doctest::Approx(5 * base.b));
  CHECK_THROWS_AS(build_profile_weighted(pool, ev, k, kHalf,
                                         [](double, std::span<const double>) { return 0.0; }),
                  ValidationError);
  // Kernel-ratio weight: K / (sum K / N).
  const RowWeightFn ratio = kernel_ratio_weight(pool, k, ev.z);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += scaled_weight(k, std::vector<double>{z[i] - 0.2});
  const std::vector<double> z0{z[0]};
  CHECK(ratio(x[0], z0) ==
        doctest::Approx(scaled_weight(k, std::vector<double>{z[0] - 0.2}) / (sum / n)).epsilon(1e-12));
}

TEST_CASE("continuous treatment") {
  Rng rng(5, 0);
  const std::size_t n = 500;
  std::vector<double> x(n), z(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(rng.below(2));
    z[i] = rng.normal();
    y[i] = x[i] + z[i] + rng.normal();
  }
  const auto bin = make(TreatmentMode::binary, x, z, 1, y);
  const auto cont = make(TreatmentMode::continuous, x, z, 1, y);
  const KernelSpec kz(KernelFamily::gaussian, 0.5), kx(KernelFamily::epanechnikov, 1e-3);
  for (int q = 0; q < 20; ++q) {
    const Evidence ev{static_cast<double>(q % 2), {rng.normal()}, rng.normal(), 1.0 - (q % 2)};
    const auto a = minimize_profile(build_profile(bin, ev, kz, kHalf));
    const auto b = minimize_profile(build_profile_continuous(cont, ev, kz, kx));
    CHECK(a.y_hat == b.y_hat);
    CHECK(a.bounded == b.bounded);
  }
  CHECK_THROWS_AS(build_profile_continuous(cont, {0.5, {0.0}, 0.0, 0.7}, kz, kx), CoverageError);
  const auto flat = make(TreatmentMode::continuous, x, z, 1, std::vector<double>(n, 2.5));
  const auto c = minimize_profile(build_profile_continuous(flat, {0, {0.0}, 1.0, 1}, kz, kx));
  CHECK(c.y_hat == 2.5);
}

TEST_CASE("population ideal loss") {
  const AnalyticScm std_normal = [](std::span<const double>, int) {
    return ConditionalLaw{ConditionalLaw::Family::gaussian, 0.0, 1.0};
  };
  const Evidence at_median{0, {0.0}, 0.0, 1};
  CHECK(ideal_loss_population(0.0, at_median, std_normal) ==
        doctest::Approx(std::sqrt(2 / std::numbers::pi)).epsilon(1e-12));

  Rng rng(3, 0);
  for (int t = 0; t < 30; ++t) {
    const double m0 = rng.normal(), s0 = rng.uniform(0.5, 2), m1 = rng.normal(), s1 = rng.uniform(0.5, 2);
    const AnalyticScm scm = [=](std::span<const double>, int arm) {
      return arm == 0 ? ConditionalLaw{ConditionalLaw::Family::gaussian, m0, s0}
                      : ConditionalLaw{ConditionalLaw::Family::gaussian, m1, s1};
    };
    const Evidence ev{0, {0.0}, m0 + s0 * rng.normal(), 1};
    for (double tt : {-2.0, 0.0, 1.5}) {
      const double h = 1e-5;
      const double fd = (ideal_loss_population(tt + h, ev, scm) - ideal_loss_population(tt - h, ev, scm)) / (2 * h);
      CHECK(std::abs(fd - ideal_loss_derivative(tt, ev, scm)) < 1e-6);
    }
    const double star = m1 + s1 * (ev.y - m0) / s0;
    CHECK(std::abs(ideal_loss_derivative(star, ev, scm)) < 1e-9);
    const double found = minimize_ideal_loss_population(ev, scm);
    CHECK(std::abs(normal_cdf((found - m1) / s1) - normal_cdf((ev.y - m0) / s0)) < 1e-8);
  }
  const AnalyticScm other = [](std::span<const double>, int) {
    return ConditionalLaw{ConditionalLaw::Family::unsupported, 0.0, 1.0};
  };
  CHECK_THROWS_AS(ideal_loss_population(0.0, at_median, other), ValidationError);
}

TEST_CASE("results do not depend on evaluation order") {
  Rng rng(6, 0);
  const std::size_t n = 400;
  std::vector<double> x(n), z(2 * n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(rng.below(2));
    z[2 * i] = rng.normal();
    z[2 * i + 1] = rng.normal();
    y[i] = rng.normal();
  }
  const auto pool = make(TreatmentMode::binary, x, z, 2, y);
  const CounterfactualEstimator est(pool, KernelSpec(KernelFamily::gaussian, 1), kHalf);
  std::vector<Evidence> qs;
  for (std::size_t i = 0; i < 64; ++i) qs.push_back({x[i], {z[2 * i], z[2 * i + 1]}, y[i], 1 - x[i]});
  std::vector<double> seq(qs.size()), par(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) seq[i] = est.estimate(qs[i]).y_hat;
  parallel_for(qs.size(), 4, [&](std::size_t i) { par[qs.size() - 1 - i] = est.estimate(qs[qs.size() - 1 - i]).y_hat; });
  CHECK(seq == par);
}
