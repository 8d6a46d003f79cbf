#pragma once

#include <cstdint>

namespace mars {

/// Counter-based generator: the n-th draw of a stream is SplitMix64's finalizer
/// applied to key + n * golden_gamma. Draws are a pure function of (key, n), so
/// streams can be split and replayed without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// Independent stream for (seed, component, index). Components are the
  /// constants below; index is the layer number where relevant.
  static CounterRng substream(std::uint64_t seed, std::uint64_t component, std::uint64_t index = 0);

  static constexpr std::uint64_t kEncoder = 1;
  static constexpr std::uint64_t kBlockWeights = 2;
  static constexpr std::uint64_t kBlockBias = 3;
  static constexpr std::uint64_t kTemporalConv = 4;
  static constexpr std::uint64_t kEsnInput = 5;
  static constexpr std::uint64_t kEsnRecurrent = 6;
  static constexpr std::uint64_t kEsnBias = 7;
  static constexpr std::uint64_t kSynthetic = 8;
  static constexpr std::uint64_t kEvolution = 9;
  static constexpr std::uint64_t kSplit = 10;
  static constexpr std::uint64_t kPowerIteration = 11;

  static std::uint64_t mix(std::uint64_t x);

  std::uint64_t next_u64() { return mix(key_ + (counter_++) * kGolden); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one draw per call, two uniforms consumed).
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mars
