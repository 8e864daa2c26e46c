#include <doctest.h>

#include <cmath>

#include "gwae/rng.hpp"

using gwae::RngStream;

TEST_CASE("rng: frozen test vectors") {
  CHECK(RngStream(42).next_u64() == 0xbdd732262feb6e95ULL);
  CHECK(RngStream(42).derive("x").next_u64() == 0x90750f1bc79fa07fULL);
  CHECK(RngStream(42).derive(std::uint64_t{7}).next_u64() == 0x76263192db52894aULL);
}

TEST_CASE("rng: identical (seed, path) gives identical streams") {
  RngStream a = RngStream(123).derive("dataset").derive(std::uint64_t{5});
  RngStream b = RngStream(123).derive("dataset").derive(std::uint64_t{5});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: derived streams differ from parent and siblings") {
  RngStream parent(7);
  RngStream c1 = parent.derive("a");
  RngStream c2 = parent.derive("b");
  CHECK(c1.next_u64() != c2.next_u64());
  CHECK(parent.derive(std::uint64_t{0}).next_u64() != parent.derive(std::uint64_t{1}).next_u64());
}

TEST_CASE("rng: doubles in [0,1), uniform respects bounds") {
  RngStream r(99);
  for (int i = 0; i < 1000; ++i) {
    const double d = r.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    const double u = r.uniform(3.0, 5.0);
    CHECK(u >= 3.0);
    CHECK(u <= 5.0);
  }
}

TEST_CASE("rng: normal moments roughly standard") {
  RngStream r(2024);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng: replay from key()") {
  RngStream a = RngStream(5).derive("x");
  RngStream b(a.key());
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
}
