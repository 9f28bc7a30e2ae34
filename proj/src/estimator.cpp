#include "rankcf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/rank.hpp"

namespace rankcf {

double LossProfile::evaluate(double t) const {
  double f = b * t;
  for (std::size_t i = 0; i < knots.size(); ++i) f += a[i] * std::abs(knots[i] - t);
  return f;
}

double LossProfile::slope_right(double t) const {
  double s = b;
  for (std::size_t i = 0; i < knots.size(); ++i) s += knots[i] <= t ? a[i] : -a[i];
  return s;
}

namespace {

// Sorts (knot, weight) pairs by knot, drops zero weights and recomputes the
// total in sorted order so cumulative sums reach it exactly.
LossProfile finalize_profile(std::vector<double> knots, std::vector<double> a, double b,
                             double normalizer) {
  std::vector<std::size_t> order;
  order.reserve(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (a[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return knots[l] < knots[r] || (knots[l] == knots[r] && l < r);
  });
  LossProfile p;
  p.knots.reserve(order.size());
  p.a.reserve(order.size());
  for (std::size_t i : order) {
    p.knots.push_back(knots[i]);
    p.a.push_back(a[i]);
    p.total_a += a[i];
  }
  p.b = b;
  p.normalizer = normalizer;
  if (!(p.total_a > 0.0)) {
    throw CoverageError("no target-arm weight inside the kernel window");
  }
  return p;
}

}  // namespace

CounterfactualEstimate minimize_profile(const LossProfile& profile) {
  if (profile.knots.empty() || profile.knots.size() != profile.a.size() ||
      !(profile.total_a > 0.0)) {
    throw CoverageError("loss profile has no positive weight");
  }
  CounterfactualEstimate est;
  const double total = profile.total_a;
  if (profile.b >= total) {
    est.bounded = false;
    est.y_hat = profile.knots.front();
  } else if (profile.b <= -total) {
    est.bounded = false;
    est.y_hat = profile.knots.back();
  } else {
    const double threshold = 0.5 * (total - profile.b);
    double cumulative = 0.0;
    est.y_hat = profile.knots.back();
    for (std::size_t i = 0; i < profile.knots.size(); ++i) {
      cumulative += profile.a[i];
      if (cumulative >= threshold) {
        est.y_hat = profile.knots[i];
        break;
      }
    }
  }
  est.loss_at_min = profile.evaluate(est.y_hat);
  est.n_effective = total / *std::max_element(profile.a.begin(), profile.a.end());
  return est;
}

CounterfactualEstimator::CounterfactualEstimator(const ObservationalDataset& pool,
                                                 KernelSpec kernel,
                                                 const PropensityFn& propensity)
    : kernel_(kernel), dim_(pool.dim()) {
  if (pool.mode() != TreatmentMode::binary) {
    throw ValidationError("the indicator estimator requires binary treatment mode");
  }
  if (!propensity) throw ValidationError("a propensity function is required");
  const std::size_t n = pool.size();
  covariates_.assign(pool.covariate_matrix().begin(), pool.covariate_matrix().end());
  treatments_.assign(pool.treatments().begin(), pool.treatments().end());
  outcomes_.assign(pool.outcomes().begin(), pool.outcomes().end());
  inverse_p0_.resize(n);
  inverse_p1_.resize(n);
  bool has0 = false, has1 = false;
  for (std::size_t k = 0; k < n; ++k) {
    const int arm = treatments_[k] == 1.0 ? 1 : 0;
    (arm == 1 ? has1 : has0) = true;
    // Only the observed arm's propensity enters the loss.
    const double p = propensity(pool.covariates(k), arm);
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ValidationError("propensity must be positive at every pool row");
    }
    (arm == 1 ? inverse_p1_ : inverse_p0_)[k] = 1.0 / p;
  }
  if (!has0 || !has1) throw ValidationError("reference pool must contain both arms");
}

std::vector<double> CounterfactualEstimator::kernel_weights(std::span<const double> query) const {
  if (query.size() != dim_) throw ValidationError("query dimension mismatch");
  std::vector<double> w(outcomes_.size());
  std::vector<double> delta(dim_);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double* z = covariates_.data() + k * dim_;
    for (std::size_t j = 0; j < dim_; ++j) delta[j] = z[j] - query[j];
    w[k] = scaled_weight(kernel_, delta);
  }
  return w;
}

LossProfile CounterfactualEstimator::profile(const Evidence& evidence,
                                             const RowWeightFn& weight) const {
  validate_evidence(evidence, dim_, TreatmentMode::binary);
  const double target = evidence.x_prime;
  const std::vector<double> kw = kernel_weights(evidence.z);
  double normalizer = 0.0;
  for (double k : kw) normalizer += k;
  if (!(normalizer > 0.0)) throw CoverageError("kernel window around the query is empty");

  std::vector<double> knots, a;
  double b = 0.0;
  for (std::size_t k = 0; k < kw.size(); ++k) {
    if (kw[k] == 0.0) continue;
    double c = kw[k];
    if (weight) {
      const double w = weight(treatments_[k],
                              std::span<const double>(covariates_.data() + k * dim_, dim_));
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ValidationError("row weights must be positive and finite");
      }
      c *= w;
    }
    if (treatments_[k] == target) {
      knots.push_back(outcomes_[k]);
      a.push_back(c * (target == 1.0 ? inverse_p1_[k] : inverse_p0_[k]) / normalizer);
    } else {
      const double inv = treatments_[k] == 1.0 ? inverse_p1_[k] : inverse_p0_[k];
      b += c * inv * sign3(outcomes_[k] - evidence.y);
    }
  }
  return finalize_profile(std::move(knots), std::move(a), b / normalizer, normalizer);
}

CounterfactualEstimate CounterfactualEstimator::estimate(const Evidence& evidence,
                                                         const RowWeightFn& weight) const {
  return minimize_profile(profile(evidence, weight));
}

LossProfile build_profile(const ObservationalDataset& pool, const Evidence& evidence,
                          const KernelSpec& kernel, const PropensityFn& propensity) {
  return CounterfactualEstimator(pool, kernel, propensity).profile(evidence);
}

CounterfactualEstimate estimate_counterfactual(const ObservationalDataset& pool,
                                               const Evidence& evidence, const KernelSpec& kernel,
                                               const PropensityFn& propensity) {
  return minimize_profile(build_profile(pool, evidence, kernel, propensity));
}

LossProfile build_profile_weighted(const ObservationalDataset& pool, const Evidence& evidence,
                                   const KernelSpec& kernel, const PropensityFn& propensity,
                                   const RowWeightFn& weight) {
  if (!weight) throw ValidationError("a weight function is required");
  return CounterfactualEstimator(pool, kernel, propensity).profile(evidence, weight);
}

RowWeightFn kernel_ratio_weight(const ObservationalDataset& pool, const KernelSpec& kernel,
                                std::span<const double> query_z) {
  const std::vector<double> kw = weight_row(kernel, query_z, pool);
  const double mean = std::accumulate(kw.begin(), kw.end(), 0.0) / static_cast<double>(kw.size());
  if (!(mean > 0.0)) throw CoverageError("kernel window around the query is empty");
  std::vector<double> query(query_z.begin(), query_z.end());
  return [kernel, query = std::move(query), mean](double, std::span<const double> z) {
    std::vector<double> delta(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) delta[j] = z[j] - query[j];
    return scaled_weight(kernel, delta) / mean;
  };
}

LossProfile build_profile_continuous(const ObservationalDataset& pool, const Evidence& evidence,
                                     const KernelSpec& kernel_z, const KernelSpec& kernel_x,
                                     const DenominatorFn& denominator) {
  if (pool.mode() != TreatmentMode::continuous) {
    throw ValidationError("the smoothed estimator requires continuous treatment mode");
  }
  validate_evidence(evidence, pool.dim(), TreatmentMode::continuous);
  const std::vector<double> kz = weight_row(kernel_z, evidence.z, pool);
  double normalizer = 0.0;
  for (double k : kz) normalizer += k;
  if (!(normalizer > 0.0)) throw CoverageError("kernel window around the query is empty");

  std::vector<double> knots, a;
  double b = 0.0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (kz[k] == 0.0) continue;
    const double xk = pool.treatment(k);
    const double to_target = evidence.x_prime - xk;
    const double to_factual = evidence.x - xk;
    const double kt = scaled_weight(kernel_x, std::span<const double>(&to_target, 1));
    const double kf = scaled_weight(kernel_x, std::span<const double>(&to_factual, 1));
    if (kt == 0.0 && kf == 0.0) continue;
    double denom = 1.0;
    if (denominator) {
      denom = denominator(pool.covariates(k));
      if (!(denom > 0.0) || !std::isfinite(denom)) {
        throw ValidationError("continuous-treatment denominator must be positive");
      }
    }
    if (kt > 0.0) {
      knots.push_back(pool.outcome(k));
      a.push_back(kz[k] * kt / denom / normalizer);
    }
    if (kf > 0.0) b += kz[k] * kf / denom * sign3(pool.outcome(k) - evidence.y);
  }
  return finalize_profile(std::move(knots), std::move(a), b / normalizer, normalizer);
}

double ConditionalLaw::cdf(double v) const { return normal_cdf((v - mean) / sd); }

double ConditionalLaw::quantile(double p) const { return mean + sd * normal_quantile(p); }

namespace {

std::pair<ConditionalLaw, ConditionalLaw> query_laws(const Evidence& evidence,
                                                     const AnalyticScm& scm) {
  if (!scm) throw ValidationError("an analytic SCM is required");
  auto arm = [](double x) {
    if (x != 0.0 && x != 1.0) throw ValidationError("analytic SCMs use binary treatments");
    return static_cast<int>(x);
  };
  const ConditionalLaw factual = scm(evidence.z, arm(evidence.x));
  const ConditionalLaw target = scm(evidence.z, arm(evidence.x_prime));
  for (const auto* law : {&factual, &target}) {
    if (law->family != ConditionalLaw::Family::gaussian) {
      throw ValidationError("only Gaussian conditional laws have a closed-form ideal loss");
    }
    if (!(law->sd > 0.0)) throw ValidationError("conditional law needs a positive sd");
  }
  return {factual, target};
}

}  // namespace

double ideal_loss_population(double t, const Evidence& evidence, const AnalyticScm& scm) {
  const auto [factual, target] = query_laws(evidence, scm);
  // E[sign(Y_x - y)] = P(Y_x > y) - P(Y_x < y).
  const double sign_mean = 1.0 - 2.0 * factual.cdf(evidence.y);
  return normal_mean_abs_deviation(t, target.mean, target.sd) + sign_mean * t;
}

double ideal_loss_derivative(double t, const Evidence& evidence, const AnalyticScm& scm) {
  const auto [factual, target] = query_laws(evidence, scm);
  return 2.0 * (target.cdf(t) - factual.cdf(evidence.y));
}

double minimize_ideal_loss_population(const Evidence& evidence, const AnalyticScm& scm) {
  const auto [factual, target] = query_laws(evidence, scm);
  const double level = factual.cdf(evidence.y);
  if (!(level > 0.0 && level < 1.0)) {
    throw DegenerateInputError("evidence lies beyond the numerical support of Y_x | z");
  }
  double lo = target.mean - 40.0 * target.sd;
  double hi = target.mean + 40.0 * target.sd;
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (target.cdf(mid) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace rankcf
