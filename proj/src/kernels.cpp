#include "rankcf/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rankcf/errors.hpp"

namespace rankcf {

std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::epanechnikov ? "epanechnikov" : "gaussian";
}

KernelFamily parse_kernel_family(std::string_view text) {
  if (text == "epanechnikov") return KernelFamily::epanechnikov;
  if (text == "gaussian") return KernelFamily::gaussian;
  throw ValidationError("unknown kernel '" + std::string(text) + "'");
}

KernelSpec::KernelSpec(KernelFamily family, double bandwidth)
    : family_(family), bandwidth_(bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ValidationError("kernel bandwidth must be positive and finite");
  }
}

double kernel_value(KernelFamily family, double u) {
  switch (family) {
    case KernelFamily::epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
  return 0.0;
}

double scaled_weight(const KernelSpec& spec, std::span<const double> delta) {
  const double h = spec.bandwidth();
  if (spec.family() == KernelFamily::gaussian) {
    // One exp for the whole product.
    double sq = 0.0;
    for (double d : delta) sq += (d / h) * (d / h);
    const double norm = std::sqrt(2.0 * std::numbers::pi) * h;
    return std::exp(-0.5 * sq) / std::pow(norm, static_cast<double>(delta.size()));
  }
  double w = 1.0;
  for (double d : delta) {
    const double k = kernel_value(spec.family(), d / h);
    if (k == 0.0) return 0.0;
    w *= k / h;
  }
  return w;
}

std::vector<double> weight_row(const KernelSpec& spec, std::span<const double> query_z,
                               const ObservationalDataset& dataset) {
  const std::size_t m = dataset.dim();
  if (query_z.size() != m) {
    throw ValidationError("query dimension " + std::to_string(query_z.size()) +
                          " does not match dataset dimension " + std::to_string(m));
  }
  std::vector<double> weights(dataset.size());
  std::vector<double> delta(m);
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    auto z = dataset.covariates(k);
    for (std::size_t j = 0; j < m; ++j) delta[j] = z[j] - query_z[j];
    weights[k] = scaled_weight(spec, delta);
  }
  return weights;
}

}  // namespace rankcf
