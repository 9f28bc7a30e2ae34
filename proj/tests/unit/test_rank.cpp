#include "doctest.h"

#include <cmath>
#include <vector>

#include "rankcf/errors.hpp"
#include "rankcf/random.hpp"
#include "rankcf/rank.hpp"

using namespace rankcf;

namespace {

// Independent pair enumeration straight from the definitions.
struct Brute {
  double rho, rho_tilde;
  long nc, nd, tx, ty;
};

Brute brute(const std::vector<double>& x, const std::vector<double>& y) {
  Brute b{0, 0, 0, 0, 0, 0};
  const long n = static_cast<long>(x.size());
  long sum = 0;
  for (long i = 0; i < n; ++i) {
    for (long j = i + 1; j < n; ++j) {
      const int sx = (x[i] < x[j]) - (x[i] > x[j]);
      const int sy = (y[i] < y[j]) - (y[i] > y[j]);
      sum += sx * sy;
      if (sx * sy > 0) ++b.nc;
      if (sx * sy < 0) ++b.nd;
      if (sx == 0) ++b.tx;
      if (sy == 0) ++b.ty;
    }
  }
  const double n0 = n * (n - 1) / 2.0;
  b.rho = sum / n0;
  b.rho_tilde = (b.nc - b.nd) / std::sqrt((n0 - b.tx) * (n0 - b.ty));
  return b;
}

std::vector<double> draw(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = levels > 0 ? static_cast<double>(rng.below(levels)) : rng.normal();
  return v;
}

}  // namespace

TEST_CASE("sign3") {
  CHECK(sign3(0.0) == 0);
  CHECK(sign3(-3.2) == -1);
  CHECK(sign3(1e-300) == 1);
}

TEST_CASE("worked example with ties") {
  const std::vector<double> x{1, 2, 2, 3}, y{1, 1.5, 1.5, 2.5};
  for (const RankReport& r : {kendall(x, y), kendall_fast(x, y)}) {
    CHECK(r.rho == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(r.rho_tilde == 1.0);
    CHECK(r.ties_x == 1);
    CHECK(r.ties_y == 1);
    CHECK(r.n_concordant == 5);
    CHECK(r.n_discordant == 0);
  }
}

TEST_CASE("small cases") {
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
  CHECK(kendall(a, b).rho == -1.0);
  CHECK(kendall(a, b).rho_tilde == -1.0);
  const std::vector<double> c{1, 2}, d{5, 9};
  CHECK(kendall(c, d).rho == 1.0);
}

TEST_CASE("errors") {
  const std::vector<double> one{1}, two{1, 2}, flat{4, 4, 4};
  CHECK_THROWS_AS(kendall(one, one), ValidationError);
  CHECK_THROWS_AS(kendall(two, flat), ValidationError);
  CHECK_THROWS_AS(kendall(flat, flat), DegenerateInputError);
  CHECK_THROWS_AS(kendall_fast(flat, flat), DegenerateInputError);
}

TEST_CASE("matches pair enumeration on small random inputs") {
  Rng rng(11, 0);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const auto x = draw(rng, n, trial % 3 == 0 ? 0 : 3);
    const auto y = draw(rng, n, trial % 2 == 0 ? 0 : 3);
    const Brute want = brute(x, y);
    if (want.tx == static_cast<long>(n * (n - 1) / 2) ||
        want.ty == static_cast<long>(n * (n - 1) / 2)) {
      CHECK_THROWS_AS(kendall(x, y), DegenerateInputError);
      continue;
    }
    const RankReport r = kendall(x, y);
    const RankReport f = kendall_fast(x, y);
    CHECK(r.n_concordant == want.nc);
    CHECK(r.n_discordant == want.nd);
    CHECK(r.ties_x == want.tx);
    CHECK(r.ties_y == want.ty);
    CHECK(r.rho == doctest::Approx(want.rho).epsilon(1e-14));
    CHECK(r.rho_tilde == doctest::Approx(want.rho_tilde).epsilon(1e-14));
    CHECK(f.rho == r.rho);
    CHECK(f.rho_tilde == r.rho_tilde);
  }
}

TEST_CASE("fast variant matches reference on larger vectors") {
  Rng rng(5, 0);
  for (int levels : {0, 4, 50}) {
    const auto x = draw(rng, 1500, levels);
    const auto y = draw(rng, 1500, levels == 0 ? 0 : 7);
    const RankReport r = kendall(x, y), f = kendall_fast(x, y);
    CHECK(r.n_concordant == f.n_concordant);
    CHECK(r.n_discordant == f.n_discordant);
    CHECK(r.ties_x == f.ties_x);
    CHECK(r.ties_y == f.ties_y);
    CHECK(r.rho == f.rho);
    CHECK(r.rho_tilde == f.rho_tilde);
  }
}

TEST_CASE("antisymmetry and monotone invariance") {
  Rng rng(3, 0);
  const auto x = draw(rng, 200, 0);
  auto y = draw(rng, 200, 0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  std::vector<double> neg(y), ex(y), cube(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    neg[i] = -y[i];
    ex[i] = std::exp(y[i]);
    cube[i] = y[i] * y[i] * y[i] + y[i];
  }
  const RankReport base = kendall(x, y);
  CHECK(kendall(x, neg).rho == doctest::Approx(-base.rho).epsilon(1e-15));
  CHECK(kendall(x, ex).rho == base.rho);
  CHECK(kendall(x, cube).rho_tilde == base.rho_tilde);
}

TEST_CASE("binned diagnostic") {
  Rng rng(9, 0);
  std::vector<double> key(1000), a(1000), b(1000);
  for (std::size_t i = 0; i < key.size(); ++i) {
    key[i] = rng.normal();
    a[i] = key[i] + rng.normal();
    b[i] = 2.0 * a[i];
  }
  const BinnedRankReport rep = binned_kendall(key, a, b, 10);
  CHECK(rep.bin_rho_tilde.size() == 10);
  CHECK(rep.min_rho_tilde == 1.0);
}
