#include "rankcf/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rankcf/errors.hpp"

namespace rankcf {

int sign3(double t) { return (t > 0.0) - (t < 0.0); }

namespace {

void check_inputs(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("kendall: inputs differ in length");
  if (xs.size() < 2) throw ValidationError("kendall: need at least two observations");
}

RankReport finish(std::int64_t n, std::int64_t nc, std::int64_t nd, std::int64_t tx,
                  std::int64_t ty) {
  RankReport r;
  r.n = n;
  r.n_concordant = nc;
  r.n_discordant = nd;
  r.ties_x = tx;
  r.ties_y = ty;
  const std::int64_t n0 = n * (n - 1) / 2;
  r.rho = 2.0 * static_cast<double>(nc - nd) / static_cast<double>(n * (n - 1));
  if (n0 - tx == 0 || n0 - ty == 0) {
    throw DegenerateInputError("kendall: a variable is entirely tied; rho_tilde undefined");
  }
  // One rounded sqrt of the product keeps equal denominators exact.
  const double denom =
      std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
  r.rho_tilde = std::clamp(static_cast<double>(nc - nd) / denom, -1.0, 1.0);
  return r;
}

std::int64_t tie_pairs(std::span<const double> sorted) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto g = static_cast<std::int64_t>(j - i);
    total += g * (g - 1) / 2;
    i = j;
  }
  return total;
}

// Sorts v[lo, hi) ascending, returning the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      buf[k++] = v[i++];
    } else {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

RankReport kendall(std::span<const double> xs, std::span<const double> ys) {
  check_inputs(xs, ys);
  const std::size_t n = xs.size();
  std::int64_t nc = 0, nd = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sx = sign3(xs[i] - xs[j]);
      const int sy = sign3(ys[i] - ys[j]);
      if (sx == 0) ++tx;
      if (sy == 0) ++ty;
      const int s = sx * sy;
      if (s > 0) ++nc;
      if (s < 0) ++nd;
    }
  }
  return finish(static_cast<std::int64_t>(n), nc, nd, tx, ty);
}

RankReport kendall_fast(std::span<const double> xs, std::span<const double> ys) {
  check_inputs(xs, ys);
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });
  std::vector<double> sx(n), sy(n);
  for (std::size_t i = 0; i < n; ++i) {
    sx[i] = xs[order[i]];
    sy[i] = ys[order[i]];
  }
  const std::int64_t tx = tie_pairs(sx);
  std::int64_t txy = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i + 1;
      while (j < n && sx[j] == sx[i] && sy[j] == sy[i]) ++j;
      const auto g = static_cast<std::int64_t>(j - i);
      txy += g * (g - 1) / 2;
      i = j;
    }
  }
  std::vector<double> buf(n);
  const std::int64_t nd = merge_count(sy, buf, 0, n);
  const std::int64_t ty = tie_pairs(sy);
  const auto nn = static_cast<std::int64_t>(n);
  const std::int64_t n0 = nn * (nn - 1) / 2;
  const std::int64_t nc = n0 - tx - ty + txy - nd;
  return finish(nn, nc, nd, tx, ty);
}

BinnedRankReport binned_kendall(std::span<const double> key, std::span<const double> xs,
                                std::span<const double> ys, std::size_t bins) {
  if (key.size() != xs.size() || xs.size() != ys.size()) {
    throw ValidationError("binned_kendall: inputs differ in length");
  }
  if (bins == 0 || xs.size() < 2 * bins) {
    throw ValidationError("binned_kendall: need at least two observations per bin");
  }
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  BinnedRankReport report;
  const std::size_t n = order.size();
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins;
    const std::size_t hi = (b + 1) * n / bins;
    std::vector<double> bx, by;
    for (std::size_t i = lo; i < hi; ++i) {
      bx.push_back(xs[order[i]]);
      by.push_back(ys[order[i]]);
    }
    report.bin_rho_tilde.push_back(kendall_fast(bx, by).rho_tilde);
  }
  report.min_rho_tilde =
      *std::min_element(report.bin_rho_tilde.begin(), report.bin_rho_tilde.end());
  return report;
}

}  // namespace rankcf
