#include <array>
#include <cmath>

#include "doctest.h"
#include "fusewake/rng.hpp"

using namespace fusewake;

namespace {

// Straight transcription of the published xoshiro256** reference.
struct RefXoshiro {
  std::array<std::uint64_t, 4> s;

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

}  // namespace

TEST_SUITE("rng") {
  TEST_CASE("splitmix64 reference outputs") {
    SplitMix64 sm(0);
    CHECK(sm.next() == 0xE220A8397B1DCDAFULL);
    CHECK(sm.next() == 0x6E789E6AA1B965F4ULL);
    CHECK(sm.next() == 0x06C45D188009454FULL);
    CHECK(sm.next() == 0xF88BB8A8724C81ECULL);
  }

  TEST_CASE("xoshiro256** reference outputs") {
    RefXoshiro ref{{1, 2, 3, 4}};
    CHECK(ref.next() == 11520ULL);
    CHECK(ref.next() == 0ULL);
    CHECK(ref.next() == 1509978240ULL);
    CHECK(ref.next() == 1215971899390074240ULL);
  }

  TEST_CASE("seeding expands the seed with splitmix64") {
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
      SplitMix64 sm(seed);
      RefXoshiro ref{{sm.next(), sm.next(), sm.next(), sm.next()}};
      Rng rng(seed);
      for (int i = 0; i < 100; ++i) CHECK(rng.next_u64() == ref.next());
    }
  }

  TEST_CASE("uniform uses the top 53 bits") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
      const double u = a.uniform();
      CHECK(u == static_cast<double>(b.next_u64() >> 11) / 9007199254740992.0);
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("below stays in range and hits every value") {
    Rng rng(3);
    std::array<int, 7> seen{};
    for (int i = 0; i < 7000; ++i) {
      const auto v = rng.below(7);
      REQUIRE(v < 7);
      ++seen[v];
    }
    for (int c : seen) CHECK(c > 800);
  }

  TEST_CASE("normal moments") {
    Rng rng(5);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = rng.normal();
      sum += z;
      sq += z * z;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
  }

  TEST_CASE("exponential mean") {
    Rng rng(6);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += rng.exponential(4.0);
    CHECK(std::abs(sum / 100000 - 0.25) < 0.005);
  }

  TEST_CASE("split streams differ from the parent and each other") {
    Rng parent(9);
    Rng a = parent.split(1);
    Rng b = parent.split(1);
    Rng c = Rng(9).split(2);
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 64; ++i) {
      const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
      same_ab += x == y;
      same_ac += x == z;
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
    Rng d = Rng(9).split(1), e = Rng(9).split(1);
    CHECK(d.next_u64() == e.next_u64());
  }
}
