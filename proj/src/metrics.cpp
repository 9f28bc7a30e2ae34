#include "rankcf/metrics.hpp"

#include <cmath>

#include "rankcf/errors.hpp"

namespace rankcf {

namespace {

void check(const ItePredictions& pred, const PotentialOutcomeTable& truth) {
  if (pred.y1_hat.size() != pred.y0_hat.size()) {
    throw AlignmentError("predicted outcome vectors differ in length");
  }
  if (pred.size() != truth.y0.size() || pred.size() != truth.y1.size()) {
    throw AlignmentError("predictions are not aligned with the ground truth");
  }
  if (pred.size() == 0) throw ValidationError("metric over an empty unit set");
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double pehe(const ItePredictions& pred, const PotentialOutcomeTable& truth) {
  check(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.ite(i) - (truth.y1[i] - truth.y0[i]);
    s += e * e;
  }
  return s / static_cast<double>(pred.size());
}

double ate_error(const ItePredictions& pred, const PotentialOutcomeTable& truth) {
  check(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += pred.ite(i) - (truth.y1[i] - truth.y0[i]);
  return std::abs(s / static_cast<double>(pred.size()));
}

double att_error(const ItePredictions& pred, std::span<const double> treated_outcomes,
                 std::span<const double> control_randomized_outcomes,
                 std::span<const std::size_t> treated_index) {
  if (treated_outcomes.empty() || control_randomized_outcomes.empty() ||
      treated_index.empty()) {
    throw ValidationError("ATT needs non-empty treated and randomized-control sets");
  }
  const double att = std::abs(mean(treated_outcomes) - mean(control_randomized_outcomes));
  double s = 0.0;
  for (std::size_t i : treated_index) {
    if (i >= pred.size()) throw AlignmentError("treated index out of range");
    s += pred.ite(i);
  }
  return std::abs(att - s / static_cast<double>(treated_index.size()));
}

PolicyRisk policy_risk(const ItePredictions& pred, std::span<const double> treatments,
                       std::span<const double> outcomes) {
  const std::size_t n = pred.size();
  if (n == 0) throw ValidationError("policy risk over an empty unit set");
  if (treatments.size() != n || outcomes.size() != n || pred.y0_hat.size() != n) {
    throw AlignmentError("policy risk inputs are not aligned");
  }
  std::size_t rec1 = 0, cell1 = 0, cell0 = 0;
  double sum1 = 0.0, sum0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool treat = pred.ite(i) > 0.0;
    rec1 += treat;
    if (treat && treatments[i] == 1.0) {
      ++cell1;
      sum1 += outcomes[i];
    } else if (!treat && treatments[i] == 0.0) {
      ++cell0;
      sum0 += outcomes[i];
    }
  }
  const double p1 = static_cast<double>(rec1) / static_cast<double>(n);
  PolicyRisk out;
  double value = 0.0;
  if (rec1 > 0) {
    if (cell1 > 0) {
      value += sum1 / static_cast<double>(cell1) * p1;
    } else {
      out.empty_cell = true;
    }
  }
  if (rec1 < n) {
    if (cell0 > 0) {
      value += sum0 / static_cast<double>(cell0) * (1.0 - p1);
    } else {
      out.empty_cell = true;
    }
  }
  out.risk = 1.0 - value;
  return out;
}

}  // namespace rankcf
