#ifndef RANKCF_RANDOM_HPP
#define RANKCF_RANDOM_HPP

#include <cstdint>
#include <vector>

namespace rankcf {

// xoshiro256** seeded through splitmix64. Every (seed, stream) pair yields an
// independent sequence, so each variable block of a simulation draws from its
// own stream and the draws do not depend on the order blocks are generated in.
// All derived distributions are implemented here rather than through
// <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via the Marsaglia polar method.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace rankcf

#endif  // RANKCF_RANDOM_HPP
