#include "rankcf/simulator.hpp"

#include <cmath>
#include <numeric>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/random.hpp"
#include "rankcf/rank.hpp"

namespace rankcf {

void SimConfig::validate() const {
  if (m < 1) throw ValidationError("covariate dimension m must be at least 1");
  if (n < 10) throw ValidationError("sample count n must be at least 10");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("rho must lie in [0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be non-negative");
  double sum = 0.0;
  for (double r : split_ratios) {
    if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
}

namespace {

Rng stream(const SimConfig& c, SimStream s) {
  return Rng(c.seed, static_cast<std::uint64_t>(s));
}

// Lower Cholesky factor of the design covariance, or empty for identity.
std::vector<double> covariance_factor(std::size_t m, double rho, bool& regularized) {
  regularized = false;
  if (rho == 0.0) return {};
  std::vector<double> cov(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double lag = static_cast<double>(i > j ? i - j : j - i);
      cov[i * m + j] = std::max(0.01, std::pow(rho, lag));
    }
  }
  auto cholesky = [m](const std::vector<double>& a, std::vector<double>& l) {
    l.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = a[i * m + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
        if (i == j) {
          if (!(s > 0.0)) return false;
          l[i * m + i] = std::sqrt(s);
        } else {
          l[i * m + j] = s / l[j * m + j];
        }
      }
    }
    return true;
  };
  std::vector<double> l;
  if (cholesky(cov, l)) return l;
  for (std::size_t i = 0; i < m; ++i) cov[i * m + i] += 1e-6;
  regularized = true;
  if (!cholesky(cov, l)) throw ValidationError("covariate covariance is not positive definite");
  return l;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

}  // namespace

double SimResult::treated_probability(std::span<const double> z) const {
  return sigmoid(dot(w_x, z));
}

TreatedProbabilityFn SimResult::propensity() const {
  return [w = w_x](std::span<const double> z) { return sigmoid(dot(w, z)); };
}

SimResult simulate(const SimConfig& config) {
  config.validate();
  const std::size_t m = config.m;
  const std::size_t n = config.n;

  std::vector<double> w_x(m), w_y(m), w_y1(m, 0.0);
  {
    Rng r = stream(config, SimStream::treatment_weights);
    for (double& w : w_x) w = r.uniform(-1.0, 1.0);
  }
  {
    Rng r = stream(config, SimStream::outcome_weights);
    for (double& w : w_y) w = r.normal();
  }
  if (config.beta > 0.0) {
    // Draw k uses stream 3 + 8k, clear of the other block ids.
    Rng r(config.seed, static_cast<std::uint64_t>(SimStream::violation_weights) +
                           8 * config.violation_draw);
    const double sd = std::sqrt(config.beta);
    for (double& w : w_y1) w = sd * r.normal();
  }

  bool regularized = false;
  const std::vector<double> chol = covariance_factor(m, config.rho, regularized);
  std::vector<double> z(n * m);
  {
    Rng r = stream(config, SimStream::covariates);
    std::vector<double> e(m);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : e) v = r.normal();
      for (std::size_t j = 0; j < m; ++j) {
        if (chol.empty()) {
          z[i * m + j] = e[j];
        } else {
          double s = 0.0;
          for (std::size_t k = 0; k <= j; ++k) s += chol[j * m + k] * e[k];
          z[i * m + j] = s;
        }
      }
    }
  }

  std::vector<double> x(n), y(n);
  PotentialOutcomeTable truth{std::vector<double>(n), std::vector<double>(n)};
  {
    Rng rx = stream(config, SimStream::treatments);
    Rng ru = stream(config, SimStream::noise);
    std::vector<double> w_treated(m);
    for (std::size_t j = 0; j < m; ++j) w_treated[j] = w_y[j] + w_y1[j];
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> zi(z.data() + i * m, m);
      const double p = sigmoid(dot(w_x, zi));
      x[i] = rx.uniform() < p ? 1.0 : 0.0;
      const double u0 = ru.normal();
      truth.y0[i] = dot(w_y, zi) / config.alpha + u0;
      truth.y1[i] = dot(w_treated, zi) + config.alpha * u0;
      y[i] = x[i] == 1.0 ? truth.y1[i] : truth.y0[i];
    }
  }

  std::vector<Split> splits(n, Split::test);
  {
    Rng r = stream(config, SimStream::split);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    r.shuffle(order);
    const auto n_train =
        static_cast<std::size_t>(std::llround(config.split_ratios[0] * static_cast<double>(n)));
    const auto n_val =
        static_cast<std::size_t>(std::llround(config.split_ratios[1] * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      splits[order[i]] = i < n_train ? Split::train
                         : i < n_train + n_val ? Split::val
                                               : Split::test;
    }
  }

  ObservationalDataset dataset(TreatmentMode::binary, std::move(x), std::move(z), m,
                               std::move(y), std::move(splits));
  return SimResult{config,         std::move(dataset), std::move(truth), std::move(w_x),
                   std::move(w_y), std::move(w_y1),    regularized};
}

AnalyticLaws::AnalyticLaws(std::vector<double> w_y, double alpha)
    : w_y_(std::move(w_y)), alpha_(alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
}

ConditionalLaw AnalyticLaws::law(std::span<const double> z, int arm) const {
  if (z.size() != w_y_.size()) throw ValidationError("covariate dimension mismatch");
  const double signal = dot(w_y_, z);
  if (arm == 1) return {ConditionalLaw::Family::gaussian, signal, alpha_};
  return {ConditionalLaw::Family::gaussian, signal / alpha_, 1.0};
}

AnalyticScm AnalyticLaws::scm() const {
  return [self = *this](std::span<const double> z, int arm) { return self.law(z, arm); };
}

double AnalyticLaws::counterfactual(const Evidence& evidence) const {
  validate_evidence(evidence, w_y_.size(), TreatmentMode::binary);
  return evidence.x == 0.0 ? alpha_ * evidence.y : evidence.y / alpha_;
}

AnalyticLaws analytic_laws(const SimResult& sim) {
  if (sim.config.beta != 0.0) {
    throw ValidationError("no closed-form counterfactual map when beta != 0");
  }
  return AnalyticLaws(sim.w_y, sim.config.alpha);
}

BetaCalibration calibrate_beta(const SimConfig& base, double target_tau,
                               std::size_t calibration_n, std::uint64_t max_draws) {
  if (!(target_tau > -1.0 && target_tau < 1.0)) {
    throw ValidationError("target tau must lie in (-1, 1)");
  }
  if (max_draws == 0) throw ValidationError("max_draws must be positive");
  std::uint64_t draw = base.violation_draw;
  auto pooled_tau = [&](double beta) {
    SimConfig c = base;
    c.beta = beta;
    c.n = calibration_n;
    c.violation_draw = draw;
    const SimResult sim = simulate(c);
    return kendall_fast(sim.truth.y0, sim.truth.y1).rho_tilde;
  };
  // tau is 1 at beta = 0 and falls as beta grows; widen until bracketed.
  double lo = 0.0, hi = 1.0, tau_hi = 1.0;
  BetaCalibration out;
  out.achieved_tau = 2.0;
  for (std::uint64_t k = 0; k < max_draws; ++k, ++draw) {
    lo = 0.0;
    hi = 1.0;
    tau_hi = pooled_tau(hi);
    while (tau_hi > target_tau && hi < 1e6) {
      lo = hi;
      hi *= 4.0;
      tau_hi = pooled_tau(hi);
    }
    if (tau_hi <= target_tau) break;
    if (tau_hi < out.achieved_tau) {
      out.beta = hi;
      out.achieved_tau = tau_hi;
      out.violation_draw = draw;
    }
  }
  if (tau_hi > target_tau) {
    out.bracketed = false;
    return out;
  }
  out.violation_draw = draw;
  double best_beta = hi, best_tau = tau_hi;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double tau = pooled_tau(mid);
    if (std::abs(tau - target_tau) < std::abs(best_tau - target_tau)) {
      best_beta = mid;
      best_tau = tau;
    }
    if (tau > target_tau) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(tau - target_tau) < 1e-4) break;
  }
  out.beta = best_beta;
  out.achieved_tau = best_tau;
  return out;
}

}  // namespace rankcf
