#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace geosde {

/// Philox4x32-10 counter-based block function (Salmon et al., SC'11).
/// Pure: the same (counter, key) always yields the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Derive an independent 64-bit stream seed from a master seed and a stream
/// label. Changing one label's consumer never perturbs another stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

/// Stream labels used by the experiment pipeline.
namespace streams {
inline constexpr std::string_view kWeights = "weights";
inline constexpr std::string_view kBatching = "batching";
inline constexpr std::string_view kLandmarkPool = "landmark_pool";
inline constexpr std::string_view kSimulationNoise = "simulation_noise";
inline constexpr std::string_view kInitialConditions = "initial_conditions";
inline constexpr std::string_view kEvaluation = "evaluation";
}  // namespace streams

/// Map 64 random bits to [0, 1) with 53-bit resolution.
inline double to_unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential generator on top of Philox: the counter is simply incremented.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Random-access Gaussian increments keyed on (seed, trajectory, step, dim):
/// any two consumers asking for the same triple get bit-identical values,
/// independent of evaluation order or thread count.
class NoiseBank {
 public:
  explicit NoiseBank(std::uint64_t seed);

  /// Fill `out` with i.i.d. N(0,1) values for (trajectory, step).
  void gaussians(std::uint64_t trajectory, std::uint64_t step, std::span<double> out) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint32_t, 2> key_;
};

/// In-place Fisher-Yates shuffle driven by a CounterRng (platform independent,
/// unlike std::shuffle).
template <typename T>
void shuffle(std::span<T> items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace geosde
