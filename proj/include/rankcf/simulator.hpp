#ifndef RANKCF_SIMULATOR_HPP
#define RANKCF_SIMULATOR_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rankcf/dataset.hpp"
#include "rankcf/estimator.hpp"
#include "rankcf/propensity.hpp"

namespace rankcf {

// Synthetic design:
//   Z ~ N(0, Sigma_m), Sigma_ij = max(0.01, rho^|i-j|) (identity when rho = 0)
//   X ~ Bern(sigmoid(W_x . Z)),  W_x ~ Unif(-1, 1)^m
//   U_0 ~ N(0, 1),  U_1 = alpha * U_0
//   Y_1 = (W_y + W_y1) . Z + U_1,  Y_0 = W_y . Z / alpha + U_0
//   W_y ~ N(0, I_m),  W_y1 ~ N(0, beta * I_m)  (W_y1 = 0 when beta = 0)
struct SimConfig {
  std::size_t m = 5;
  std::size_t n = 10000;
  double alpha = 1.0;
  double rho = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 1;
  // Selects the draw of the W_y1 direction; calibration moves to the next
  // draw when the current one cannot reach the target tau.
  std::uint64_t violation_draw = 0;
  std::array<double, 3> split_ratios{0.63, 0.27, 0.10};

  void validate() const;
};

// RNG stream per variable block; see Rng.
enum class SimStream : std::uint64_t {
  treatment_weights = 1,
  outcome_weights = 2,
  violation_weights = 3,
  covariates = 4,
  treatments = 5,
  noise = 6,
  split = 7,
};

struct SimResult {
  SimConfig config;
  ObservationalDataset dataset;
  PotentialOutcomeTable truth;
  std::vector<double> w_x;
  std::vector<double> w_y;
  std::vector<double> w_y1;
  // Set when Sigma_m needed +1e-6 I to factorize.
  bool covariance_regularized = false;

  double treated_probability(std::span<const double> z) const;
  TreatedProbabilityFn propensity() const;
};

SimResult simulate(const SimConfig& config);

// Closed-form laws of the design when beta = 0:
//   Y_0 | z ~ N(W_y . z / alpha, 1),  Y_1 | z ~ N(W_y . z, alpha^2)
// and the rank-matched counterfactual map y_1 = alpha * y (from x = 0),
// y_0 = y / alpha (from x = 1).
class AnalyticLaws {
 public:
  AnalyticLaws(std::vector<double> w_y, double alpha);

  ConditionalLaw law(std::span<const double> z, int arm) const;
  AnalyticScm scm() const;
  double counterfactual(const Evidence& evidence) const;
  double alpha() const { return alpha_; }

 private:
  std::vector<double> w_y_;
  double alpha_;
};

// Throws ValidationError when beta != 0 (no closed form under rank violation).
AnalyticLaws analytic_laws(const SimResult& sim);

struct BetaCalibration {
  double beta = 0.0;
  double achieved_tau = 1.0;
  std::uint64_t violation_draw = 0;
  // False when no direction draw and no beta in the search range push the
  // pooled tau down to the target; beta is then the best value found.
  bool bracketed = true;
};

// Bisection over beta so that the pooled Kendall tau of (Y_0, Y_1) on a
// calibration sample of `calibration_n` units (same seed, hence the same
// weight draws) matches `target_tau`. Because W_y1 = sqrt(beta) * g for a
// fixed direction g, some draws leave tau above the target however large
// beta gets; the search then tries up to `max_draws` directions in turn.
// Only the base config's violation_draw and later draws are tried.
BetaCalibration calibrate_beta(const SimConfig& base, double target_tau,
                               std::size_t calibration_n = 100000,
                               std::uint64_t max_draws = 20);

}  // namespace rankcf

#endif  // RANKCF_SIMULATOR_HPP
