#ifndef RANKCF_RANK_HPP
#define RANKCF_RANK_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace rankcf {

// Pair statistics behind the sample Kendall coefficients. rho is the plain
// statistic 2(Nc - Nd) / (n(n-1)); rho_tilde divides by
// sqrt(n0 - ties_x) * sqrt(n0 - ties_y), n0 = n(n-1)/2.
struct RankReport {
  double rho = 0.0;
  double rho_tilde = 0.0;
  std::int64_t n_concordant = 0;
  std::int64_t n_discordant = 0;
  std::int64_t ties_x = 0;  // sum over tie groups of g(g-1)/2
  std::int64_t ties_y = 0;
  std::int64_t n = 0;
};

int sign3(double t);

// O(n^2) enumeration of all unordered pairs. Throws ValidationError for
// n < 2 or unequal lengths, DegenerateInputError when either variable is
// entirely tied.
RankReport kendall(std::span<const double> xs, std::span<const double> ys);

// O(n log n) merge-sort counting (Knight's method). Produces the same integer
// counts as kendall(), hence identical doubles.
RankReport kendall_fast(std::span<const double> xs, std::span<const double> ys);

struct BinnedRankReport {
  std::vector<double> bin_rho_tilde;
  double min_rho_tilde = 0.0;
};

// Diagnostic for rank preservation given Z: sorts units by `key` (typically the
// first covariate), cuts them into `bins` equal-count bins and reports the
// tie-corrected coefficient inside each bin.
BinnedRankReport binned_kendall(std::span<const double> key, std::span<const double> xs,
                                std::span<const double> ys, std::size_t bins = 10);

}  // namespace rankcf

#endif  // RANKCF_RANK_HPP
