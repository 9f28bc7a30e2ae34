#include "rankcf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rankcf/errors.hpp"
#include "rankcf/parallel.hpp"

namespace rankcf {

double check_loss(double xi, double tau) { return xi >= 0.0 ? tau * xi : (tau - 1.0) * xi; }

double QuantileModel::predict(std::span<const double> features) const {
  double s = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * features[j];
  return s;
}

TauGrid::TauGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ValidationError("tau grid must not be empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0 && levels_[i] < 1.0)) {
      throw ValidationError("tau levels must lie in (0, 1)");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw ValidationError("tau levels must be strictly increasing");
    }
  }
}

TauGrid TauGrid::uniform(double step) {
  if (!(step > 0.0 && step < 0.5)) throw ValidationError("tau step must lie in (0, 0.5)");
  std::vector<double> levels;
  for (int i = 1;; ++i) {
    // Round to suppress drift such as 0.15000000000000002.
    const double level = std::round(i * step * 1e12) / 1e12;
    if (level >= 1.0 - 1e-12) break;
    levels.push_back(level);
  }
  return TauGrid(std::move(levels));
}

namespace {

// Solves the symmetric positive (semi)definite system a * x = rhs in place by
// Gaussian elimination with partial pivoting; near-singular pivots give 0.
std::vector<double> solve_small(std::vector<double> a, std::vector<double> rhs, std::size_t p) {
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(a[r * p + col]) > std::abs(a[pivot * p + col])) pivot = r;
    }
    if (std::abs(a[pivot * p + col]) < 1e-12) continue;
    if (pivot != col) {
      for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[pivot * p + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r * p + col] / a[col * p + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    if (std::abs(a[i * p + i]) >= 1e-12) x[i] = rhs[i] / a[i * p + i];
  }
  return x;
}

// Smallest r with cumulative weight >= tau * total (inf convention).
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double tau) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double cumulative = 0.0;
  for (std::size_t i : order) {
    cumulative += weights[i];
    if (cumulative >= tau * total) return values[i];
  }
  return values[order.back()];
}

// Sums with four fixed-order partial accumulators, so the loops vectorize
// without reassociation and results stay reproducible.
double sum4(const double* a, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
  }
  for (; i < n; ++i) s0 += a[i];
  return (s0 + s1) + (s2 + s3);
}

double dot4(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

QuantileModel fit_quantile(std::span<const double> features, std::size_t n_features,
                           std::span<const double> targets,
                           std::span<const double> sample_weights, double tau,
                           const QuantileFitOptions& options) {
  const std::size_t n = targets.size();
  const std::size_t p = n_features;
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (n == 0 || features.size() != n * p || sample_weights.size() != n) {
    throw ValidationError("fit_quantile: inconsistent input sizes");
  }
  if (options.iterations < 2 || !(options.step_scale > 0.0)) {
    throw ValidationError("fit_quantile: invalid optimizer options");
  }
  double total = 0.0;
  for (double w : sample_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("sample weights must be non-negative and finite");
    }
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("sample weights are all zero");

  // Standardize with weighted moments. Constant columns keep a zero slope.
  std::vector<double> mean(p, 0.0), scale(p, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) mean[j] += sample_weights[i] * features[i * p + j];
  }
  for (double& m : mean) m /= total;
  std::vector<double> var(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double d = features[i * p + j] - mean[j];
      var[j] += sample_weights[i] * d * d;
    }
  }
  std::vector<bool> constant(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    const double sd = std::sqrt(var[j] / total);
    if (sd > 1e-12 * (1.0 + std::abs(mean[j]))) {
      scale[j] = sd;
    } else {
      constant[j] = true;
    }
  }
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) y_mean += sample_weights[i] * targets[i];
  y_mean /= total;
  double y_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = targets[i] - y_mean;
    y_var += sample_weights[i] * d * d;
  }
  double y_scale = std::sqrt(y_var / total);
  if (!(y_scale > 1e-12 * (1.0 + std::abs(y_mean)))) y_scale = 1.0;

  std::vector<double> xs(n * p), ys(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      xs[i * p + j] = constant[j] ? 0.0 : (features[i * p + j] - mean[j]) / scale[j];
    }
    ys[i] = (targets[i] - y_mean) / y_scale;
    w[i] = sample_weights[i] / total;
  }

  // Weighted least-squares start; columns are centered so no intercept.
  std::vector<double> theta(p, 0.0);
  if (p > 0) {
    std::vector<double> gram(p * p, 0.0), rhs(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = xs.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) {
        rhs[j] += w[i] * row[j] * ys[i];
        for (std::size_t l = 0; l < p; ++l) gram[j * p + l] += w[i] * row[j] * row[l];
      }
    }
    theta = solve_small(std::move(gram), std::move(rhs), p);
  }
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) s += theta[j] * xs[i * p + j];
    residual[i] = ys[i] - s;
  }
  double theta0 = weighted_quantile(residual, w, tau);

  // Column-major copy so the per-iteration passes vectorize over rows.
  std::vector<double> cols(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) cols[j * n + i] = xs[i * p + j];
  }
  std::vector<double> grad(p), avg(p, 0.0), fit(n), c(n);
  double avg0 = 0.0;
  const int iterations = options.iterations;
  const int average_from = iterations / 2 + 1;
  const double* wp = w.data();
  const double* yp = ys.data();
  for (int k = 1; k <= iterations; ++k) {
    double* fp = fit.data();
    for (std::size_t i = 0; i < n; ++i) fp[i] = theta0;
    for (std::size_t j = 0; j < p; ++j) {
      const double t = theta[j];
      const double* col = cols.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) fp[i] += t * col[i];
    }
    double* cp = c.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = yp[i] - fp[i];
      const double psi = (r > 0.0 ? tau : 0.0) + (r < 0.0 ? tau - 1.0 : 0.0);
      cp[i] = wp[i] * psi;
    }
    const double g0 = -sum4(cp, n);
    for (std::size_t j = 0; j < p; ++j) grad[j] = -dot4(cp, cols.data() + j * n, n);
    const double step = options.step_scale / std::sqrt(static_cast<double>(k));
    theta0 -= step * g0;
    for (std::size_t j = 0; j < p; ++j) theta[j] -= step * grad[j];
    if (k >= average_from) {
      avg0 += theta0;
      for (std::size_t j = 0; j < p; ++j) avg[j] += theta[j];
    }
  }
  const double count = static_cast<double>(iterations - average_from + 1);
  avg0 /= count;
  for (double& v : avg) v /= count;

  QuantileModel model;
  model.tau = tau;
  model.weights.assign(p, 0.0);
  double intercept = avg0;
  for (std::size_t j = 0; j < p; ++j) {
    if (constant[j]) continue;
    model.weights[j] = y_scale * avg[j] / scale[j];
    intercept -= avg[j] * mean[j] / scale[j];
  }
  model.intercept = y_mean + y_scale * intercept;
  return model;
}

namespace {

std::size_t closest_level(std::span<const QuantileModel> models,
                          std::span<const double> features, double y) {
  std::size_t best = 0;
  double best_gap = std::abs(models[0].predict(features) - y);
  for (std::size_t i = 1; i < models.size(); ++i) {
    const double gap = std::abs(models[i].predict(features) - y);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

void require_binary(const ObservationalDataset& train) {
  if (train.mode() != TreatmentMode::binary) {
    throw ValidationError("quantile baselines require binary treatment mode");
  }
}

}  // namespace

BilevelQuantileModel::BilevelQuantileModel(const ObservationalDataset& train, TauGrid grid,
                                           const QuantileFitOptions& options, unsigned threads)
    : grid_(std::move(grid)), dim_(train.dim()) {
  require_binary(train);
  const std::size_t n = train.size();
  const std::size_t p = dim_ + 1;
  std::vector<double> features(n * p);
  for (std::size_t k = 0; k < n; ++k) {
    features[k * p] = train.treatment(k);
    auto z = train.covariates(k);
    std::copy(z.begin(), z.end(), features.begin() + static_cast<std::ptrdiff_t>(k * p + 1));
  }
  const std::vector<double> ones(n, 1.0);
  models_.resize(grid_.size());
  parallel_for(grid_.size(), threads, [&](std::size_t i) {
    models_[i] = fit_quantile(features, p, train.outcomes(), ones, grid_.levels()[i], options);
  });
}

std::size_t BilevelQuantileModel::selected_level(const Evidence& evidence) const {
  validate_evidence(evidence, dim_, TreatmentMode::binary);
  std::vector<double> f(dim_ + 1);
  f[0] = evidence.x;
  std::copy(evidence.z.begin(), evidence.z.end(), f.begin() + 1);
  return closest_level(models_, f, evidence.y);
}

double BilevelQuantileModel::estimate(const Evidence& evidence) const {
  const std::size_t level = selected_level(evidence);
  std::vector<double> f(dim_ + 1);
  f[0] = evidence.x_prime;
  std::copy(evidence.z.begin(), evidence.z.end(), f.begin() + 1);
  return models_[level].predict(f);
}

FourStepQuantileModel::FourStepQuantileModel(const ObservationalDataset& train, TauGrid grid,
                                             const PropensityFn& propensity,
                                             const QuantileFitOptions& options, unsigned threads)
    : grid_(std::move(grid)), dim_(train.dim()) {
  require_binary(train);
  if (!propensity) throw ValidationError("a propensity function is required");
  const std::size_t m = dim_;
  std::array<std::vector<double>, 2> features, targets, weights;
  for (std::size_t k = 0; k < train.size(); ++k) {
    const int arm = train.treatment(k) == 1.0 ? 1 : 0;
    auto z = train.covariates(k);
    features[arm].insert(features[arm].end(), z.begin(), z.end());
    targets[arm].push_back(train.outcome(k));
    const double p = propensity(z, arm);
    if (!(p > 0.0)) throw ValidationError("propensity must be positive at every train row");
    weights[arm].push_back(1.0 / p);
  }
  for (int arm = 0; arm < 2; ++arm) {
    if (targets[arm].empty()) throw ValidationError("train split must contain both arms");
    models_[arm].resize(grid_.size());
  }
  const std::size_t levels = grid_.size();
  parallel_for(2 * levels, threads, [&](std::size_t task) {
    const int arm = static_cast<int>(task / levels);
    const std::size_t i = task % levels;
    models_[arm][i] = fit_quantile(features[arm], m, targets[arm], weights[arm],
                                   grid_.levels()[i], options);
  });
}

std::size_t FourStepQuantileModel::selected_level(const Evidence& evidence) const {
  validate_evidence(evidence, dim_, TreatmentMode::binary);
  return closest_level(models_[static_cast<int>(evidence.x)], evidence.z, evidence.y);
}

double FourStepQuantileModel::estimate(const Evidence& evidence) const {
  const std::size_t level = selected_level(evidence);
  return models_[static_cast<int>(evidence.x_prime)][level].predict(evidence.z);
}

double bilevel_estimate(const ObservationalDataset& train, const Evidence& evidence,
                        const TauGrid& grid, const QuantileFitOptions& options) {
  return BilevelQuantileModel(train, grid, options).estimate(evidence);
}

double fourstep_estimate(const ObservationalDataset& train, const Evidence& evidence,
                         const TauGrid& grid, const PropensityFn& propensity,
                         const QuantileFitOptions& options) {
  return FourStepQuantileModel(train, grid, propensity, options).estimate(evidence);
}

}  // namespace rankcf
