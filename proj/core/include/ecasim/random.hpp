#pragma once

#include <cstdint>
#include <random>

namespace ecasim {

/// Source of every random choice a protocol engine or the channel makes.
///
/// The simulator feeds engines a seeded `RandomStream`; the exact oracle feeds
/// them a scripted source that enumerates each choice instead of sampling it,
/// so both run the very same transition code.
class ChoiceSource {
 public:
  virtual ~ChoiceSource() = default;

  /// Uniform integer in [0, n). n must be >= 1.
  virtual std::uint64_t uniform_below(std::uint64_t n) = 0;

  /// True with probability p. p <= 0 and p >= 1 are decided without a draw.
  virtual bool bernoulli(double p) = 0;
};

// Stream tags for seed derivation. Changing these changes every trace.
enum class StreamTag : std::uint64_t {
  kStation = 0x5354'4154'494f'4e00ULL,
  kTraffic = 0x5452'4146'4649'4300ULL,
  kChannel = 0x4348'414e'4e45'4c00ULL,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the named stream `tag` of entity `index` under run seed `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ static_cast<std::uint64_t>(tag)) + index);
}

/// Portable seeded stream: mt19937_64 plus explicit bounded/Bernoulli draws.
///
/// std::uniform_int_distribution is implementation-defined, so draws are done
/// here to keep traces identical across standard libraries.
class RandomStream final : public ChoiceSource {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t uniform_below(std::uint64_t n) override;
  bool bernoulli(double p) override;

  /// Uniform double in [0, 1) with 53 random bits.
  double unit();

  friend bool operator==(const RandomStream& a, const RandomStream& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ecasim
