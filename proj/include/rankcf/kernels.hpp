#ifndef RANKCF_KERNELS_HPP
#define RANKCF_KERNELS_HPP

#include <span>
#include <string_view>
#include <vector>

#include "rankcf/dataset.hpp"

namespace rankcf {

enum class KernelFamily { epanechnikov, gaussian };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view text);

// Kernel family plus a shared bandwidth h > 0. Vector arguments use the
// product of univariate kernels, each scaled by the same h.
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, double bandwidth);

  KernelFamily family() const { return family_; }
  double bandwidth() const { return bandwidth_; }

 private:
  KernelFamily family_;
  double bandwidth_;
};

// K(u): 3(1 - u^2)/4 on |u| <= 1 for Epanechnikov, the standard normal density
// for Gaussian. Symmetric, integrates to one, first moment zero.
double kernel_value(KernelFamily family, double u);

// prod_j K(delta_j / h) / h.
double scaled_weight(const KernelSpec& spec, std::span<const double> delta);

// scaled_weight(spec, z_k - query_z) for every row k of the dataset.
std::vector<double> weight_row(const KernelSpec& spec, std::span<const double> query_z,
                               const ObservationalDataset& dataset);

}  // namespace rankcf

#endif  // RANKCF_KERNELS_HPP
