#include "catch_amalgamated.hpp"

#include <array>
#include <set>
#include <vector>

#include "loopsoup/rng.hpp"
#include "loopsoup/stats.hpp"

using loopsoup::Philox4x32;
using loopsoup::Rng;

TEST_CASE("philox block matches Random123 known answers", "[rng]") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("engine output is the block function over the counter", "[rng]") {
  Rng rng(0, 0);
  const auto b0 = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  const auto b1 = Philox4x32::block({1, 0, 0, 0}, {0, 0});
  for (auto w : b0) CHECK(rng() == w);
  for (auto w : b1) CHECK(rng() == w);
}

TEST_CASE("seed and stream select distinct sequences", "[rng]") {
  std::set<std::uint32_t> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::uint64_t stream = 0; stream < 4; ++stream) {
      Rng rng(seed, stream);
      CHECK(rng.seed() == seed);
      CHECK(rng.stream() == stream);
      firsts.insert(rng());
    }
  }
  CHECK(firsts.size() == 16);
  CHECK(loopsoup::replica_stream(1, 0) != loopsoup::replica_stream(0, 1));
}

TEST_CASE("uniform01 stays in [0,1) and bounded is unbiased", "[rng]") {
  Rng rng(42, 7);
  loopsoup::stats::Welford w;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    w.add(u);
  }
  CHECK(std::abs(w.mean() - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / 100000));

  std::vector<std::int64_t> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.bounded(7)];
  std::vector<double> probs(7, 1.0 / 7.0);
  CHECK(loopsoup::stats::chi_square_gof(counts, probs).p_value > 0.001);
}
