#include <doctest.h>

#include <array>
#include <set>

#include "ecasim/random.hpp"

using namespace ecasim;

TEST_CASE("same seed gives the same sequence") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform_below(1000) == b.uniform_below(1000));
}

TEST_CASE("uniform_below stays in range") {
  RandomStream s(7);
  for (std::uint64_t n : {1ull, 2ull, 3ull, 16ull, 1000ull, (1ull << 40) + 3}) {
    for (int i = 0; i < 200; ++i) CHECK(s.uniform_below(n) < n);
  }
  CHECK(s.uniform_below(0) == 0);
}

TEST_CASE("bernoulli edges do not consume the stream") {
  RandomStream a(3), b(3);
  CHECK_FALSE(a.bernoulli(0.0));
  CHECK(a.bernoulli(1.0));
  CHECK_FALSE(a.bernoulli(-0.5));
  CHECK(a == b);
}

TEST_CASE("unit draws lie in [0, 1)") {
  RandomStream s(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("derived seeds separate tags and indices") {
  std::set<std::uint64_t> seen;
  for (auto tag : {StreamTag::kStation, StreamTag::kTraffic, StreamTag::kChannel}) {
    for (std::uint64_t i = 0; i < 64; ++i) seen.insert(derive_seed(1, tag, i));
  }
  CHECK(seen.size() == 3 * 64);
  CHECK(derive_seed(1, StreamTag::kStation, 0) != derive_seed(2, StreamTag::kStation, 0));
}

TEST_CASE("sequence is pinned across platforms") {
  // mt19937_64 with the default seed 5489 has a standard 10000th output.
  std::mt19937_64 ref;
  ref.discard(9999);
  CHECK(ref() == 9981545732273789042ull);

  RandomStream s(derive_seed(1, StreamTag::kStation, 0));
  std::array<std::uint64_t, 4> first{};
  for (auto& x : first) x = s.uniform_below(16);
  RandomStream again(derive_seed(1, StreamTag::kStation, 0));
  for (auto x : first) CHECK(again.uniform_below(16) == x);
}
