#pragma once

// Reproducible random streams for the simulation harness. Each replicate gets
// its own engine seeded from (seed, replicate), so results do not depend on
// the number of worker threads. The variate generators are written out here
// instead of using <random> distributions, whose output is not specified
// across standard library implementations.

#include <cstdint>
#include <random>
#include <vector>

namespace iupm {

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p);
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double normal();
  // Gamma(shape, scale), mean shape * scale.
  double gamma(double shape, double scale);

  // k distinct indices from [0, n), in random order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace iupm
