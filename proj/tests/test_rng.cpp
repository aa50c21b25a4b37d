#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "dapdsco/rng.hpp"

using namespace dapdsco;

TEST_CASE("identical keys replay identical sequences") {
  RngStream a(42, StreamPurpose::Activation, 3, 1);
  RngStream b(42, StreamPurpose::Activation, 3, 1);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different purposes or agents are distinct") {
  RngStream a(42, StreamPurpose::Activation, 3);
  RngStream b(42, StreamPurpose::Loss, 3);
  RngStream c(42, StreamPurpose::Activation, 4);
  int equal_ab = 0, equal_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    if (va == b.next_u64()) ++equal_ab;
    if (va == c.next_u64()) ++equal_ac;
  }
  REQUIRE(equal_ab == 0);
  REQUIRE(equal_ac == 0);
}

TEST_CASE("unit draws stay in [0,1) with a sane mean") {
  RngStream s(7, StreamPurpose::NoiseCost, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  REQUIRE(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("next_below stays within range and hits every value") {
  RngStream s(1, StreamPurpose::PrimalDelay, 5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = s.next_below(6);
    REQUIRE(v < 6);
    seen.insert(v);
  }
  REQUIRE(seen.size() == 6);
}

TEST_CASE("degenerate bernoulli draws do not consume the stream") {
  RngStream a(9, StreamPurpose::Loss, 0);
  RngStream b(9, StreamPurpose::Loss, 0);
  REQUIRE_FALSE(a.next_bernoulli(0.0));
  REQUIRE(a.next_bernoulli(1.0));
  // a took no draws, so both streams are still aligned
  REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform range draws respect their bounds") {
  RngStream s(11, StreamPurpose::NoiseDemand, 2);
  for (int i = 0; i < 10000; ++i) {
    const double v = s.next_uniform(-0.1, 0.1);
    REQUIRE(v >= -0.1);
    REQUIRE(v <= 0.1);
  }
}
