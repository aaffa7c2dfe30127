#pragma once

#include <cstdint>
#include <limits>

namespace niv {

std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** with seeding by splitmix64. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
};

// Independent stream keyed by (seed, domain, replicate, index).
Rng make_stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t replicate,
                std::uint64_t index);

inline constexpr const char* kRngName = "xoshiro256** / splitmix64 streams keyed by (seed, domain, replicate, stratum)";

}  // namespace niv
