#pragma once

#include <array>
#include <cstdint>

namespace cylstable {

// Philox4x32-10 (Salmon et al., SC'11). Counter-based: the output is a pure
// function of (counter, key), so any draw can be regenerated from its indices.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

// Seed of the k-th independent sub-experiment under `seed` (SplitMix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Tags separating independent families of streams under one seed.
enum class StreamPurpose : std::uint32_t {
  PathIncrement = 0,
  DomainSampling = 1,
  Bootstrap = 2,
  Generic = 3,
};

// A random stream is identified by (seed, purpose, index, lane). Draw k of the
// stream is Philox(counter = {k, purpose<<16 | lane, index lo, index hi},
// key = seed). Paths use index = path_index and lane = coordinate, so each
// coordinate of each path has its own stream, independent of scheduling.
class RandomStream {
 public:
  constexpr RandomStream(std::uint64_t seed, std::uint64_t index, std::uint32_t lane = 0,
                         StreamPurpose purpose = StreamPurpose::Generic) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_{(static_cast<std::uint32_t>(purpose) << 16) | (lane & 0xFFFFu)},
        index_lo_{static_cast<std::uint32_t>(index)},
        index_hi_{static_cast<std::uint32_t>(index >> 32)} {}

  // Four raw 32-bit words for draw number `k` (random access).
  constexpr Philox4x32::Counter block(std::uint64_t k) const noexcept {
    return Philox4x32::apply(
        {static_cast<std::uint32_t>(k), tag_ ^ (static_cast<std::uint32_t>(k >> 32) << 24),
         index_lo_, index_hi_},
        key_);
  }

  // Two independent uniforms on the open interval (0,1) from draw k.
  void uniform_pair(std::uint64_t k, double& u0, double& u1) const noexcept {
    const auto w = block(k);
    u0 = to_open_unit((std::uint64_t{w[0]} << 32) | w[1]);
    u1 = to_open_unit((std::uint64_t{w[2]} << 32) | w[3]);
  }

  // Sequential interface for non-hot code.
  double next_uniform() noexcept {
    if (!have_spare_) {
      uniform_pair(position_++, value_, spare_);
      have_spare_ = true;
      return value_;
    }
    have_spare_ = false;
    return spare_;
  }

  std::uint64_t next_below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n)) % n;
  }

  static constexpr double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t tag_;
  std::uint32_t index_lo_;
  std::uint32_t index_hi_;
  std::uint64_t position_ = 0;
  double value_ = 0.0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cylstable
