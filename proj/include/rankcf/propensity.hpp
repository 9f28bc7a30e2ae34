#ifndef RANKCF_PROPENSITY_HPP
#define RANKCF_PROPENSITY_HPP

#include <functional>
#include <span>
#include <vector>

#include "rankcf/dataset.hpp"

namespace rankcf {

// p_arm(z) = P(X = arm | Z = z) for a binary treatment.
using PropensityFn = std::function<double(std::span<const double> z, int arm)>;
// P(X = 1 | Z = z), the form simulators expose.
using TreatedProbabilityFn = std::function<double(std::span<const double> z)>;

inline constexpr double kDefaultClip = 0.01;

// Logistic model for arm 1; arm 0 is the complement. Predictions are clipped
// to [clip, 1 - clip].
struct PropensityModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double l2 = 1e-4;
  double clip = kDefaultClip;

  double linear(std::span<const double> z) const;
  double predict(std::span<const double> z, int arm) const;
  double predict_unclipped(std::span<const double> z, int arm) const;
};

struct LogisticOptions {
  double l2 = 1e-4;
  int max_iter = 5000;
  double tol = 1e-8;
  double clip = kDefaultClip;
  double norm_cap = 1e3;
};

struct LogisticFit {
  PropensityModel model;
  int iterations = 0;
  bool converged = false;
  // Set when the weight norm passed the cap, the signature of separation.
  bool separation_warning = false;
  double gradient_max_norm = 0.0;
  // Penalized mean log-likelihood after each accepted step.
  std::vector<double> objective_trace;
};

// Maximizes mean Bernoulli log-likelihood minus (l2/2)|w|^2 (intercept not
// penalized) by full-batch gradient ascent with backtracking line search.
// Every row of `data` is used; pass the train subset. Binary mode only.
LogisticFit fit_logistic(const ObservationalDataset& data, const LogisticOptions& options = {});

// Penalized mean log-likelihood and its gradient (weights then intercept).
double logistic_objective(const ObservationalDataset& data, std::span<const double> weights,
                          double intercept, double l2, std::vector<double>* gradient = nullptr);

PropensityFn as_propensity_fn(const PropensityModel& model);
PropensityFn as_propensity_fn(TreatedProbabilityFn treated, double clip = 0.0);

// Replaces the true arm probabilities by c_arm * p_arm(z) (no
// renormalization), clipped into [clip, 1 - clip]. With no clipping the
// resulting error (p - p_hat) / p_hat equals (1 - c) / c at every z.
struct PropensityOverride {
  enum class Mode { oracle, scaled };
  Mode mode = Mode::oracle;
  double c0 = 1.0;
  double c1 = 1.0;
  double clip = 1e-6;
};

PropensityFn override_propensity(TreatedProbabilityFn true_pi, const PropensityOverride& override);

// Fraction of probe points where c_arm * p_arm(z) falls outside (0, 1) before
// clipping, over both arms. `warning` is set above 5%.
struct OverrideCheck {
  double fraction_out_of_range = 0.0;
  bool warning = false;
};

OverrideCheck check_override(const TreatedProbabilityFn& true_pi,
                             const PropensityOverride& override,
                             const ObservationalDataset& probes);

}  // namespace rankcf

#endif  // RANKCF_PROPENSITY_HPP
