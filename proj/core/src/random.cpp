#include "ecasim/random.hpp"

namespace ecasim {
namespace {
__extension__ using uint128 = unsigned __int128;
}  // namespace

std::uint64_t RandomStream::uniform_below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire's multiply-shift with rejection; unbiased.
  std::uint64_t x = engine_();
  uint128 m = static_cast<uint128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<uint128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

bool RandomStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return unit() < p;
}

double RandomStream::unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace ecasim
