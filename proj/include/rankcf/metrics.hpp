#ifndef RANKCF_METRICS_HPP
#define RANKCF_METRICS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "rankcf/dataset.hpp"

namespace rankcf {

// Predicted potential outcomes for a set of evaluated units, aligned with the
// corresponding ground-truth rows.
struct ItePredictions {
  std::vector<double> y1_hat;
  std::vector<double> y0_hat;

  std::size_t size() const { return y1_hat.size(); }
  double ite(std::size_t i) const { return y1_hat[i] - y0_hat[i]; }
};

// Mean over units of ((y1_hat - y0_hat) - (y1 - y0))^2. Report its square root.
double pehe(const ItePredictions& pred, const PotentialOutcomeTable& truth);

// |mean predicted ITE - mean true ITE|.
double ate_error(const ItePredictions& pred, const PotentialOutcomeTable& truth);

// |ATT - mean_{i in T} (y1_hat_i - y0_hat_i)| with
// ATT = |mean(treated_outcomes) - mean(control_randomized_outcomes)|.
// `treated_index` addresses rows of `pred`.
double att_error(const ItePredictions& pred, std::span<const double> treated_outcomes,
                 std::span<const double> control_randomized_outcomes,
                 std::span<const std::size_t> treated_index);

struct PolicyRisk {
  double risk = 0.0;
  // A conditioning cell (recommend 1 & X = 1, or recommend 0 & X = 0) was
  // empty and contributed 0.
  bool empty_cell = false;
};

// 1 - (E[Y | rec 1, X = 1] P(rec 1) + E[Y | rec 0, X = 0] P(rec 0)), where the
// policy recommends treatment iff y1_hat - y0_hat > 0. `treatments` and
// `outcomes` are the factual values of the evaluated units (typically the
// randomized subset).
PolicyRisk policy_risk(const ItePredictions& pred, std::span<const double> treatments,
                       std::span<const double> outcomes);

}  // namespace rankcf

#endif  // RANKCF_METRICS_HPP
