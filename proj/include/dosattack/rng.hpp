#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dosattack {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by a 64-bit key plus the two upper counter words;
/// the lower two counter words advance as values are drawn. Two streams with
/// the same identity produce identical sequences regardless of which thread
/// draws them, which is what makes Monte-Carlo runs reproducible and lets
/// attacked and nominal runs share common random numbers.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint32_t stream_hi, std::uint32_t stream_lo)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, stream_lo, stream_hi} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 4) {
      block_ = generate(counter_, key_);
      increment();
      used_ = 0;
    }
    return block_[used_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;
    const std::uint64_t lo = (*this)() >> 6;
    return (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) * (1.0 / 9007199254740992.0);
  }

  /// Raw block for a given counter/key; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
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

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  void increment() {
    if (++counter_[0] == 0) ++counter_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// Purpose tags for the streams drawn inside one realization.
enum class StreamTag : std::uint32_t {
  ProcessNoise = 1,
  InitialState = 2,
  Losses = 3,
  Solver = 4,
};

inline Philox4x32 make_stream(std::uint64_t seed, std::uint64_t realization, StreamTag tag, std::uint32_t channel = 0) {
  const auto hi = static_cast<std::uint32_t>(realization);
  const std::uint32_t lo = (static_cast<std::uint32_t>(tag) << 24) ^ (channel & 0x00FFFFFFu) ^
                           (static_cast<std::uint32_t>(realization >> 32) * 0x9E3779B1u);
  return Philox4x32(seed, hi, lo);
}

}  // namespace dosattack
