#include "rankcf/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"

namespace rankcf {

namespace {

double clamp_probability(double p, double clip) { return std::clamp(p, clip, 1.0 - clip); }

// log(sigmoid(s)) without overflow.
double log_sigmoid(double s) {
  return s >= 0.0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
}

double max_abs(std::span<const double> v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double PropensityModel::linear(std::span<const double> z) const {
  double s = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * z[j];
  return s;
}

double PropensityModel::predict_unclipped(std::span<const double> z, int arm) const {
  const double p1 = sigmoid(linear(z));
  return arm == 1 ? p1 : 1.0 - p1;
}

double PropensityModel::predict(std::span<const double> z, int arm) const {
  return clamp_probability(predict_unclipped(z, arm), clip);
}

double logistic_objective(const ObservationalDataset& data, std::span<const double> weights,
                          double intercept, double l2, std::vector<double>* gradient) {
  const std::size_t n = data.size();
  const std::size_t m = data.dim();
  double ll = 0.0;
  if (gradient) gradient->assign(m + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    auto z = data.covariates(k);
    double s = intercept;
    for (std::size_t j = 0; j < m; ++j) s += weights[j] * z[j];
    const double x = data.treatment(k);
    ll += x == 1.0 ? log_sigmoid(s) : log_sigmoid(-s);
    if (gradient) {
      const double r = x - sigmoid(s);
      for (std::size_t j = 0; j < m; ++j) (*gradient)[j] += r * z[j];
      (*gradient)[m] += r;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  if (gradient) {
    for (std::size_t j = 0; j < m; ++j) (*gradient)[j] = (*gradient)[j] * inv_n - l2 * weights[j];
    (*gradient)[m] *= inv_n;
  }
  return ll * inv_n - 0.5 * l2 * penalty;
}

LogisticFit fit_logistic(const ObservationalDataset& data, const LogisticOptions& options) {
  if (data.mode() != TreatmentMode::binary) {
    throw ValidationError("logistic propensity requires binary treatment mode");
  }
  if (!(options.l2 >= 0.0) || options.max_iter < 1 || !(options.tol > 0.0) ||
      !(options.clip > 0.0 && options.clip < 0.5)) {
    throw ValidationError("invalid logistic options");
  }
  bool has0 = false, has1 = false;
  for (double x : data.treatments()) (x == 1.0 ? has1 : has0) = true;
  if (!has0 || !has1) throw ValidationError("logistic propensity needs both treatment arms");

  const std::size_t m = data.dim();
  std::vector<double> theta(m + 1, 0.0);  // weights, then intercept
  std::vector<double> grad, trial(m + 1), trial_grad;
  auto objective = [&](const std::vector<double>& p, std::vector<double>* g) {
    return logistic_objective(data, std::span<const double>(p.data(), m), p[m], options.l2, g);
  };

  LogisticFit fit;
  double value = objective(theta, &grad);
  double step = 1.0;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (max_abs(grad) < options.tol) {
      fit.converged = true;
      break;
    }
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    // Armijo backtracking on the ascent direction.
    bool accepted = false;
    double trial_value = value;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j <= m; ++j) trial[j] = theta[j] + step * grad[j];
      trial_value = objective(trial, &trial_grad);
      if (trial_value >= value + 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further ascent possible at machine precision
    // Barzilai-Borwein guess for the next trial step; the Armijo test above
    // still guards every accepted move.
    double ss = 0.0, sy = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      const double sj = trial[j] - theta[j];
      ss += sj * sj;
      sy += sj * (trial_grad[j] - grad[j]);
    }
    theta.swap(trial);
    grad.swap(trial_grad);
    value = trial_value;
    fit.objective_trace.push_back(value);
    step = sy < 0.0 ? std::min(ss / -sy, 1e6) : std::min(step * 2.0, 1e6);
    if (norm2(std::span<const double>(theta.data(), m)) > options.norm_cap) {
      fit.separation_warning = true;
      ++iter;
      break;
    }
  }
  fit.iterations = iter;
  if (!fit.separation_warning) {
    // The gradient can vanish on separable data before the norm reaches the
    // cap, so also check whether the fitted hyperplane splits the arms.
    bool separated = true;
    for (std::size_t k = 0; k < data.size() && separated; ++k) {
      double s = theta[m];
      const auto z = data.covariates(k);
      for (std::size_t j = 0; j < m; ++j) s += theta[j] * z[j];
      separated = data.treatment(k) == 1.0 ? s > 0.0 : s < 0.0;
    }
    fit.separation_warning = separated;
  }
  fit.gradient_max_norm = max_abs(grad);
  if (fit.gradient_max_norm < options.tol) fit.converged = true;
  fit.model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(m));
  fit.model.intercept = theta[m];
  fit.model.l2 = options.l2;
  fit.model.clip = options.clip;
  return fit;
}

PropensityFn as_propensity_fn(const PropensityModel& model) {
  return [model](std::span<const double> z, int arm) { return model.predict(z, arm); };
}

PropensityFn as_propensity_fn(TreatedProbabilityFn treated, double clip) {
  return [treated = std::move(treated), clip](std::span<const double> z, int arm) {
    const double p1 = treated(z);
    return clamp_probability(arm == 1 ? p1 : 1.0 - p1, clip);
  };
}

PropensityFn override_propensity(TreatedProbabilityFn true_pi,
                                 const PropensityOverride& override) {
  if (!(override.c0 > 0.0) || !(override.c1 > 0.0)) {
    throw ValidationError("propensity scale factors must be positive");
  }
  if (!(override.clip > 0.0 && override.clip < 0.5)) {
    throw ValidationError("propensity clip must lie in (0, 0.5)");
  }
  if (override.mode == PropensityOverride::Mode::oracle) {
    return as_propensity_fn(std::move(true_pi), override.clip);
  }
  return [true_pi = std::move(true_pi), override](std::span<const double> z, int arm) {
    const double p1 = true_pi(z);
    const double scaled = arm == 1 ? override.c1 * p1 : override.c0 * (1.0 - p1);
    return clamp_probability(scaled, override.clip);
  };
}

OverrideCheck check_override(const TreatedProbabilityFn& true_pi,
                             const PropensityOverride& override,
                             const ObservationalDataset& probes) {
  OverrideCheck check;
  if (override.mode == PropensityOverride::Mode::oracle) return check;
  std::size_t bad = 0;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const double p1 = true_pi(probes.covariates(k));
    const double s1 = override.c1 * p1;
    const double s0 = override.c0 * (1.0 - p1);
    bad += !(s1 > 0.0 && s1 < 1.0);
    bad += !(s0 > 0.0 && s0 < 1.0);
  }
  check.fraction_out_of_range =
      static_cast<double>(bad) / static_cast<double>(2 * probes.size());
  check.warning = check.fraction_out_of_range > 0.05;
  return check;
}

}  // namespace rankcf
