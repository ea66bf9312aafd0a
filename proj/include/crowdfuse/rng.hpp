#pragma once

#include <cstdint>
#include <string_view>

namespace crowdfuse {

// Deterministic generator with named substreams. std::uniform_* and the
// standard distributions are implementation-defined, so the handful of
// distributions needed here are spelled out; output is identical across
// platforms and standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream from (seed, name, index). Streams with
  // different names or indices never correlate in practice.
  static Rng stream(std::uint64_t seed, std::string_view name,
                    std::uint64_t index = 0);

  std::uint64_t next_u64();

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t uniform_int(std::uint64_t n); // [0, n), n > 0

  double normal();                        // standard normal
  double normal(double mean, double stddev);
  double lognormal(double mu, double sigma);

private:
  std::uint64_t s_[4];
};

} // namespace crowdfuse
