#ifndef RANKCF_ESTIMATOR_HPP
#define RANKCF_ESTIMATOR_HPP

#include <functional>
#include <span>
#include <vector>

#include "rankcf/dataset.hpp"
#include "rankcf/kernels.hpp"
#include "rankcf/propensity.hpp"

namespace rankcf {

// The estimated ideal loss for one query, as the convex piecewise-linear
// function
//
//   f(t) = sum_k a_k |knots_k - t| + b * t
//
// where a_k = K_h(z_k - z) * 1[x_k = x'] / p_x'(z_k) / S over target-arm rows,
// b = sum_k K_h(z_k - z) * 1[x_k = x] / p_x(z_k) * sign(y_k - y) / S, and
// S = sum_k K_h(z_k - z) over every pool row.
struct LossProfile {
  std::vector<double> knots;  // ascending
  std::vector<double> a;      // a[i] > 0 pairs with knots[i]
  double b = 0.0;
  double total_a = 0.0;
  double normalizer = 0.0;

  double evaluate(double t) const;
  // Right derivative of f at t.
  double slope_right(double t) const;
};

struct CounterfactualEstimate {
  double y_hat = 0.0;
  double loss_at_min = 0.0;
  double n_effective = 0.0;  // total_a / max_k a_k
  // False when |b| >= total_a: f decreases without bound on one side and
  // y_hat is clamped to the extreme knot on that side.
  bool bounded = true;
  bool coverage_ok = true;
};

// Exact minimizer via the weighted-quantile rule: the smallest knot whose
// cumulative weight reaches (total_a - b) / 2. That is the left endpoint of
// the minimizing interval.
CounterfactualEstimate minimize_profile(const LossProfile& profile);

// Optional multiplicative row weight w(x_k, z_k) > 0.
using RowWeightFn = std::function<double(double x, std::span<const double> z)>;
// Denominator p(z_k) for the continuous-treatment estimator.
using DenominatorFn = std::function<double(std::span<const double> z)>;

// Binary-treatment estimator over a fixed reference pool. Inverse
// propensities of the pool rows are computed once at construction, so many
// queries can be answered cheaply and concurrently (all methods are const and
// touch no shared mutable state).
class CounterfactualEstimator {
 public:
  CounterfactualEstimator(const ObservationalDataset& pool, KernelSpec kernel,
                          const PropensityFn& propensity);

  // Throws ValidationError for malformed evidence or x' == x, CoverageError
  // when the kernel window holds no weight (overall or in the target arm).
  LossProfile profile(const Evidence& evidence, const RowWeightFn& weight = {}) const;
  CounterfactualEstimate estimate(const Evidence& evidence,
                                  const RowWeightFn& weight = {}) const;

  // K_h(z_k - query) for every pool row.
  std::vector<double> kernel_weights(std::span<const double> query) const;

  const KernelSpec& kernel() const { return kernel_; }
  std::size_t pool_size() const { return outcomes_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  KernelSpec kernel_;
  std::size_t dim_;
  std::vector<double> covariates_;
  std::vector<double> treatments_;
  std::vector<double> outcomes_;
  std::vector<double> inverse_p0_;
  std::vector<double> inverse_p1_;
};

LossProfile build_profile(const ObservationalDataset& pool, const Evidence& evidence,
                          const KernelSpec& kernel, const PropensityFn& propensity);

CounterfactualEstimate estimate_counterfactual(const ObservationalDataset& pool,
                                               const Evidence& evidence, const KernelSpec& kernel,
                                               const PropensityFn& propensity);

// Every row's contribution to both a and b is multiplied by w(x_k, z_k).
// Throws ValidationError if w is not strictly positive on a row in the window.
LossProfile build_profile_weighted(const ObservationalDataset& pool, const Evidence& evidence,
                                   const KernelSpec& kernel, const PropensityFn& propensity,
                                   const RowWeightFn& weight);

// w_k = K_h(z_k - z) / (sum_j K_h(z_j - z) / N) for a query at z.
RowWeightFn kernel_ratio_weight(const ObservationalDataset& pool, const KernelSpec& kernel,
                                std::span<const double> query_z);

// Continuous treatments: indicators become K_hx(x_k - x') and K_hx(x_k - x).
// The denominator defaults to 1 (pure kernel weighting in x).
LossProfile build_profile_continuous(const ObservationalDataset& pool, const Evidence& evidence,
                                     const KernelSpec& kernel_z, const KernelSpec& kernel_x,
                                     const DenominatorFn& denominator = {});

// Closed-form conditional law of a potential outcome given Z = z.
struct ConditionalLaw {
  enum class Family { gaussian, unsupported };
  Family family = Family::gaussian;
  double mean = 0.0;
  double sd = 1.0;

  double cdf(double v) const;
  double quantile(double p) const;
};

// Conditional laws of Y_arm | Z = z.
using AnalyticScm = std::function<ConditionalLaw(std::span<const double> z, int arm)>;

// E[|Y_x' - t| | z] + E[sign(Y_x - y) | z] * t, in closed form.
double ideal_loss_population(double t, const Evidence& evidence, const AnalyticScm& scm);
// d/dt of the above: 2 (P(Y_x' <= t | z) - P(Y_x <= y | z)).
double ideal_loss_derivative(double t, const Evidence& evidence, const AnalyticScm& scm);
// Minimizer found by bisection on the sign of the derivative (it never
// evaluates a quantile function).
double minimize_ideal_loss_population(const Evidence& evidence, const AnalyticScm& scm);

}  // namespace rankcf

#endif  // RANKCF_ESTIMATOR_HPP
