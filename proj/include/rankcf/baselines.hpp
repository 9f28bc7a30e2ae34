#ifndef RANKCF_BASELINES_HPP
#define RANKCF_BASELINES_HPP

#include <array>
#include <span>
#include <vector>

#include "rankcf/dataset.hpp"
#include "rankcf/propensity.hpp"

namespace rankcf {

// Pinball loss: tau * xi for xi >= 0, (tau - 1) * xi otherwise.
double check_loss(double xi, double tau);

struct QuantileModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double tau = 0.5;

  double predict(std::span<const double> features) const;
};

class TauGrid {
 public:
  // Strictly increasing levels inside (0, 1).
  explicit TauGrid(std::vector<double> levels);
  // step, 2*step, ... while < 1; the default gives 0.05, 0.10, ..., 0.95.
  static TauGrid uniform(double step = 0.05);

  std::span<const double> levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }

 private:
  std::vector<double> levels_;
};

struct QuantileFitOptions {
  int iterations = 20000;
  // Step size at iteration k is step_scale / sqrt(k), in standardized units.
  double step_scale = 0.05;
};

// Linear quantile regression minimizing the weighted mean check loss by
// subgradient descent. Features and targets are standardized internally, the
// start is the weighted least-squares fit with its intercept moved to the
// residual tau-quantile, and the returned model is the average of the last
// half of the iterates, mapped back to the original scale. Deterministic.
// `features` is row-major with `n_features` columns.
QuantileModel fit_quantile(std::span<const double> features, std::size_t n_features,
                           std::span<const double> targets,
                           std::span<const double> sample_weights, double tau,
                           const QuantileFitOptions& options = {});

// Single quantile model q(x, z; tau) with the treatment as the first feature.
class BilevelQuantileModel {
 public:
  BilevelQuantileModel(const ObservationalDataset& train, TauGrid grid,
                       const QuantileFitOptions& options = {}, unsigned threads = 1);

  // tau* = argmin_tau |f_tau(x, z) - y| (ties to the smaller level), then
  // f_tau*(x', z).
  double estimate(const Evidence& evidence) const;
  std::size_t selected_level(const Evidence& evidence) const;
  // Features are (x, z).
  const QuantileModel& model(std::size_t level) const { return models_[level]; }
  const TauGrid& grid() const { return grid_; }

 private:
  TauGrid grid_;
  std::size_t dim_;
  std::vector<QuantileModel> models_;
};

// Separate inverse-propensity-weighted quantile models per arm.
class FourStepQuantileModel {
 public:
  FourStepQuantileModel(const ObservationalDataset& train, TauGrid grid,
                        const PropensityFn& propensity, const QuantileFitOptions& options = {},
                        unsigned threads = 1);

  // tau* = argmin_tau |q_x(z; tau) - y| (ties to the smaller level), then
  // q_x'(z; tau*).
  double estimate(const Evidence& evidence) const;
  std::size_t selected_level(const Evidence& evidence) const;
  const QuantileModel& model(int arm, std::size_t level) const { return models_[arm][level]; }
  const TauGrid& grid() const { return grid_; }

 private:
  TauGrid grid_;
  std::size_t dim_;
  std::array<std::vector<QuantileModel>, 2> models_;
};

double bilevel_estimate(const ObservationalDataset& train, const Evidence& evidence,
                        const TauGrid& grid, const QuantileFitOptions& options = {});
double fourstep_estimate(const ObservationalDataset& train, const Evidence& evidence,
                         const TauGrid& grid, const PropensityFn& propensity,
                         const QuantileFitOptions& options = {});

}  // namespace rankcf

#endif  // RANKCF_BASELINES_HPP
