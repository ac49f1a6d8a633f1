#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "vct/rng.hpp"

using vct::RngStream;
using vct::StreamRole;

TEST_CASE("philox4x32-10 matches the Random123 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(vct::detail::philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(vct::detail::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(vct::detail::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and independent per (seed, entity, role)") {
  RngStream a(42, 7, StreamRole::diffusion);
  RngStream b(42, 7, StreamRole::diffusion);
  for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());

  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
    for (std::uint64_t entity : {0ULL, 1ULL, 2ULL, 1ULL << 33}) {
      for (auto role : {StreamRole::demographics, StreamRole::parameters, StreamRole::diffusion}) {
        firsts.insert(RngStream(seed, entity, role)());
      }
    }
  }
  CHECK(firsts.size() == 3 * 4 * 3);
}

TEST_CASE("an entity's stream does not depend on other entities being drawn") {
  RngStream lone(5, 3, StreamRole::protocol);
  const auto expected = lone();
  RngStream other(5, 2, StreamRole::protocol);
  for (int i = 0; i < 100; ++i) other();
  CHECK(RngStream(5, 3, StreamRole::protocol)() == expected);
}

TEST_CASE("gaussian draws have unit moments") {
  RngStream rng(9, 0, StreamRole::measurement);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.gaussian();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform draws stay in range") {
  RngStream rng(1, 1, StreamRole::announcement);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(0.5, 1.5);
    REQUIRE(u >= 0.5);
    REQUIRE(u < 1.5);
  }
}
