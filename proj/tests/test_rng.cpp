#include <doctest.h>

#include <set>

#include "degenlab/rng.hpp"

using namespace degenlab;

TEST_CASE("named sub-streams are distinct and stable") {
  CHECK(substream_seed(1, "tangsep") == substream_seed(1, "tangsep"));
  CHECK(substream_seed(1, "tangsep") != substream_seed(1, "convexity"));
  CHECK(substream_seed(1, "tangsep") != substream_seed(2, "tangsep"));
  std::set<std::uint64_t> seen;
  for (int b = 0; b < 1000; ++b) seen.insert(block_rng(5, b)());
  CHECK(seen.size() == 1000);
}

TEST_CASE("uniform01 lies in [0, 1) with the right mean") {
  auto rng = block_rng(3, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}
