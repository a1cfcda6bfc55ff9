#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "loopsoup/loop_measure.hpp"
#include "loopsoup/stats.hpp"

using namespace loopsoup;
namespace st = loopsoup::stats;

namespace {

bool within(double est, double target, double se, double sigmas = 4.0) {
  return std::abs(est - target) <= sigmas * se;
}

}  // namespace

TEST_CASE("soup sampling is deterministic in (seed, stream)", "[sampler]") {
  const ModelParams p(30, 0.5);
  const SoupSampler sampler(p);
  CHECK(sampler.sample(40.0, 5, 1) == sampler.sample(40.0, 5, 1));
  CHECK_FALSE(sampler.sample(40.0, 5, 1) == sampler.sample(40.0, 5, 2));
  CHECK(sample_soup(p, 40.0, 5, 1) == sampler.sample(40.0, 5, 1));
  CHECK(sampler.sample(0.0, 1).empty());
  CHECK_THROWS_AS(sampler.sample(-1.0, 1), DomainError);
}

TEST_CASE("loop count is Poisson with the total mass as rate", "[sampler][mc]") {
  const ModelParams p(10, 1.0);
  const SoupSampler sampler(p);
  const double horizon = 5.0;
  const double mean = horizon * mu_restricted_total(p, 0);
  st::Welford w;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) w.add(static_cast<double>(sampler.sample(horizon, 11, r).size()));
  CHECK(within(w.mean(), mean, std::sqrt(mean / reps)));
  // Var of the sample variance of a Poisson is about (mean + 2 mean^2)/reps.
  CHECK(within(w.variance(), mean, std::sqrt((mean + 2 * mean * mean) / reps)));
}

TEST_CASE("loop lengths, vertices and times have the prescribed laws", "[sampler][mc]") {
  const ModelParams p(6, 0.4);
  const SoupSampler sampler(p);
  std::vector<std::int64_t> length_counts(20, 0);  // lengths 2..20, last cell is 21+
  std::vector<std::int64_t> vertex_counts(6, 0);
  std::vector<std::int64_t> time_bins(10, 0);
  const double horizon = 3.0;
  for (int r = 0; r < 4000; ++r) {
    const auto soup = sampler.sample(horizon, 3, r);
    for (std::size_t i = 0; i < soup.size(); ++i) {
      const auto loop = soup.loop(i);
      ++length_counts[std::min<std::size_t>(loop.size(), 21) - 2];
      for (Vertex v : loop) ++vertex_counts[v - 1];
      ++time_bins[std::min<std::size_t>(9, static_cast<std::size_t>(soup.time(i) / horizon * 10))];
    }
  }
  std::vector<double> lp;
  for (std::int64_t m = 2; m <= 20; ++m) lp.push_back(sampler.lengths().pmf(m));
  lp.push_back(0.0);  // remainder is filled in by chi_square_gof
  CHECK(st::chi_square_gof(length_counts, lp).p_value > 1e-3);
  CHECK(st::chi_square_gof(vertex_counts, std::vector<double>(6, 1.0 / 6)).p_value > 1e-3);
  CHECK(st::chi_square_gof(time_bins, std::vector<double>(10, 0.1)).p_value > 1e-3);
}

TEST_CASE("loops on disjoint vertex sets are uncorrelated", "[sampler][mc]") {
  const ModelParams p(8, 0.5);
  const SoupSampler sampler(p);
  const int reps = 20000;
  std::vector<double> a(reps), b(reps);
  for (int r = 0; r < reps; ++r) {
    const auto soup = sampler.sample(4.0, 17, r);
    for (std::size_t i = 0; i < soup.size(); ++i) {
      const auto loop = soup.loop(i);
      const bool low = std::all_of(loop.begin(), loop.end(), [](Vertex v) { return v <= 3; });
      const bool high = std::all_of(loop.begin(), loop.end(), [](Vertex v) { return v >= 5; });
      a[r] += low;
      b[r] += high;
    }
  }
  double ma = 0, mb = 0;
  for (int r = 0; r < reps; ++r) {
    ma += a[r];
    mb += b[r];
  }
  ma /= reps;
  mb /= reps;
  double cov = 0;
  for (int r = 0; r < reps; ++r) cov += (a[r] - ma) * (b[r] - mb);
  cov /= reps - 1;
  // Loops inside a set of 3 (resp. 4) vertices: restricted totals with v = 5 (resp. 4).
  const double ea = 4.0 * mu_restricted_total(p, 5);
  const double eb = 4.0 * mu_restricted_total(p, 4);
  CHECK(within(ma, ea, std::sqrt(ea / reps)));
  CHECK(within(mb, eb, std::sqrt(eb / reps)));
  CHECK(std::abs(cov) < 4.0 * std::sqrt(ea * eb / reps));
}

TEST_CASE("moments of S match the closed forms", "[sampler][mc][dual]") {
  const ModelParams p(20, 1.0);
  const SoupSampler sampler(p);
  const double t = 4.0;
  st::Welford s1, s2;
  for (int r = 0; r < 40000; ++r) {
    const auto soup = sampler.sample(t, 23, r);
    double s = 0;
    for (std::size_t i = 0; i < soup.size(); ++i) {
      const auto loop = soup.loop(i);
      const auto hits = std::count(loop.begin(), loop.end(), Vertex{1});
      if (hits > 0) s += static_cast<double>(loop.size()) - static_cast<double>(hits);
    }
    s1.add(s);
    s2.add(s * (s - 1));
  }
  CHECK(within(s1.mean(), s_mean(p, t), s1.std_error()));
  CHECK(within(s2.mean(), s_second_factorial_moment(p, t), s2.std_error()));
}

TEST_CASE("fixed-length soups", "[sampler][mc]") {
  const ModelParams p(50, 1.0);
  const SoupSampler sampler(p);
  std::int64_t loops = 0;
  std::int64_t coincide = 0;
  for (int r = 0; r < 200; ++r) {
    const auto soup = sampler.sample_fixed_length(2, 2000.0, 29, r);
    for (std::size_t i = 0; i < soup.size(); ++i) {
      const auto loop = soup.loop(i);
      REQUIRE(loop.size() == 2);
      ++loops;
      coincide += loop[0] == loop[1];
    }
  }
  const double mean = 200 * 2000.0 * 0.25 / 2.0;
  CHECK(within(static_cast<double>(loops), mean, std::sqrt(mean)));
  const double f = static_cast<double>(coincide) / static_cast<double>(loops);
  CHECK(within(f, 1.0 / 50, std::sqrt(f * (1 - f) / static_cast<double>(loops))));
  CHECK_THROWS_AS(sampler.sample_fixed_length(1, 1.0, 1), DomainError);
  CHECK_THAT(beta_vertex_fixed_length(p, 2), Catch::Matchers::WithinRel(0.125 * thin_through(50, 2), 1e-14));
}

TEST_CASE("poisson helper", "[sampler]") {
  Rng rng(1, 1);
  CHECK(sample_poisson(rng, 0.0) == 0);
  CHECK_THROWS_AS(sample_poisson(rng, -0.5), DomainError);
}
