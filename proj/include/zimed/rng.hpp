#ifndef ZIMED_RNG_HPP
#define ZIMED_RNG_HPP

#include <cstdint>
#include <random>

namespace zimed {

using Rng = std::mt19937_64;

// Independent stream keyed by (seed, index[, tag]). Streams never depend on
// scheduling, so parallel loops stay reproducible.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index,
                       std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(tag >> 32), 0x5eedu};
  return Rng(seq);
}

// Derives a child seed; used to hand sub-components their own seed space.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                 std::uint64_t tag = 0) {
  auto rng = make_stream(seed, index, tag ^ 0x9e3779b97f4a7c15ull);
  return rng();
}

// Named tags for the stochastic stages.
namespace stream_tag {
inline constexpr std::uint64_t fiducial = 1;
inline constexpr std::uint64_t bootstrap_cov = 2;
inline constexpr std::uint64_t npb = 3;
inline constexpr std::uint64_t simulate = 4;
inline constexpr std::uint64_t multistart = 5;
inline constexpr std::uint64_t calibration = 6;
} // namespace stream_tag

} // namespace zimed

#endif
