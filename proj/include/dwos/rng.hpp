#pragma once

#include <cstdint>

namespace dwos {

/// Identifies one random walk. The pair fully determines the walk's sample
/// stream, so a walk can be regenerated anywhere from these two integers.
struct PathSeed {
  std::uint64_t experiment_seed = 0;
  std::uint64_t walk_index = 0;

  friend constexpr bool operator==(const PathSeed&, const PathSeed&) = default;
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based uniform generator.
///
/// Draw k of a stream is `mix64(mix64(key + k * golden) ^ key')`, a pure
/// function of (PathSeed, k). Each call to next_uniform() advances the
/// counter by exactly one. There is no hidden state beyond the counter, so a
/// Sampler rebuilt from the same PathSeed replays the identical sequence.
class Sampler {
 public:
  constexpr explicit Sampler(PathSeed seed)
      : key_(detail::mix64(detail::mix64(seed.experiment_seed ^ 0x5851F42D4C957F2Dull) +
                           detail::kGolden * (seed.walk_index + 1))),
        key2_(detail::mix64(key_ ^ 0xD1B54A32D192ED03ull)) {}

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double next_uniform() {
    const std::uint64_t bits =
        detail::mix64(detail::mix64(key_ + detail::kGolden * counter_++) ^ key2_);
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t key2_;
  std::uint64_t counter_ = 0;
};

/// Derives a per-iteration or per-stream experiment seed from a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return detail::mix64(base ^ detail::mix64(stream + detail::kGolden));
}

}  // namespace dwos
