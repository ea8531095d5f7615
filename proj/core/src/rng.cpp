#include "geosde/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace geosde {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint32_t, 2> key_from_seed(std::uint64_t seed) {
  const std::uint64_t mixed = splitmix64(seed);
  return {static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)};
}

std::uint64_t combine(std::uint32_t hi, std::uint32_t lo) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  // FNV-1a over the label, then mixed with the master seed.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return splitmix64(splitmix64(master) ^ h);
}

CounterRng::CounterRng(std::uint64_t seed) : key_(key_from_seed(seed)) {}

std::uint64_t CounterRng::next_u64() {
  if (used_ >= 4) {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
                        key_);
    ++counter_;
    used_ = 0;
  }
  const std::uint64_t out = combine(block_[used_], block_[used_ + 1]);
  used_ += 2;
  return out;
}

double CounterRng::uniform() { return to_unit_interval(next_u64()); }

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("CounterRng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

NoiseBank::NoiseBank(std::uint64_t seed) : seed_(seed), key_(key_from_seed(seed)) {}

void NoiseBank::gaussians(std::uint64_t trajectory, std::uint64_t step,
                          std::span<double> out) const {
  if (step > UINT32_MAX) throw std::out_of_range("NoiseBank: step index exceeds 2^32");
  for (std::size_t block = 0; 2 * block < out.size(); ++block) {
    const auto words = philox4x32({static_cast<std::uint32_t>(trajectory),
                                   static_cast<std::uint32_t>(trajectory >> 32),
                                   static_cast<std::uint32_t>(step),
                                   static_cast<std::uint32_t>(block)},
                                  key_);
    const double u1 = (static_cast<double>(combine(words[0], words[1]) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = to_unit_interval(combine(words[2], words[3]));
    const double r = std::sqrt(-2.0 * std::log(u1));
    out[2 * block] = r * std::cos(2.0 * M_PI * u2);
    if (2 * block + 1 < out.size()) out[2 * block + 1] = r * std::sin(2.0 * M_PI * u2);
  }
}

}  // namespace geosde
