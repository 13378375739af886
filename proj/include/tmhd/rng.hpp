#pragma once

#include <cstdint>

namespace tmhd {

/// Counter-based gaussian draws: a stateless hash of (seed, stream, step,
/// lane) through splitmix64, mapped by the inverse normal CDF. Streams can
/// be sampled in any order with identical results.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double uniform(std::uint64_t stream, std::uint64_t step, std::uint32_t lane = 0) const;
    double gaussian(std::uint64_t stream, std::uint64_t step, std::uint32_t lane = 0) const;

  private:
    std::uint64_t seed_;
};

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
double inverse_normal_cdf(double p);

}  // namespace tmhd
