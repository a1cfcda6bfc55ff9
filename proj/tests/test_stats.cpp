#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "loopsoup/stats.hpp"

using namespace loopsoup::stats;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Welford mean and variance", "[stats]") {
  Welford a, b, all;
  const std::vector<double> xs{1, 4, 2, 8, 5, 7};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    (i < 3 ? a : b).add(xs[i]);
    all.add(xs[i]);
  }
  CHECK_THAT(all.mean(), WithinRel(4.5, 1e-15));
  CHECK_THAT(all.variance(), WithinRel(7.5, 1e-14));
  CHECK_THAT(all.std_error(), WithinRel(std::sqrt(7.5 / 6), 1e-14));
  a.merge(b);
  CHECK_THAT(a.mean(), WithinRel(all.mean(), 1e-15));
  CHECK_THAT(a.variance(), WithinRel(all.variance(), 1e-14));
  CHECK(a.count() == 6);
}

TEST_CASE("chi-square distribution helpers", "[stats]") {
  CHECK_THAT(chi_square_sf(3.841458820694124, 1), WithinAbs(0.05, 1e-12));
  CHECK_THAT(chi_square_quantile(0.99, 2), WithinAbs(-2 * std::log(0.01), 1e-10));
  CHECK_THAT(chi_square_sf(2.0, 2), WithinAbs(std::exp(-1.0), 1e-14));
}

TEST_CASE("goodness of fit", "[stats]") {
  const std::vector<std::int64_t> counts{25, 25, 25, 25};
  const std::vector<double> probs{0.25, 0.25, 0.25, 0.25};
  const auto ok = chi_square_gof(counts, probs);
  CHECK(ok.statistic == 0.0);
  CHECK(ok.df == 3);
  CHECK(ok.p_value == 1.0);
  CHECK(ok.passes(0.01));

  const std::vector<std::int64_t> skew{70, 10, 10, 10};
  CHECK_FALSE(chi_square_gof(skew, probs).passes(0.01));

  // Sparse cells on the right are pooled.
  const std::vector<std::int64_t> sparse{500, 480, 16, 2, 2};
  const std::vector<double> sp{0.5, 0.48, 0.016, 0.002, 0.002};
  CHECK(chi_square_gof(sparse, sp).df == 2);
  // Missing probability goes to the last cell.
  const std::vector<std::int64_t> c2{50, 50};
  const std::vector<double> p2{0.5, 0.0};
  CHECK(chi_square_gof(c2, p2).statistic == 0.0);

  const std::vector<double> wrong{0.5};
  CHECK_THROWS(chi_square_gof(counts, wrong));
}

TEST_CASE("independence test", "[stats]") {
  const std::vector<std::int64_t> indep{100, 200, 50, 100};
  const auto r = chi_square_independence(indep, 2, 2);
  CHECK_THAT(r.statistic, WithinAbs(0.0, 1e-12));
  CHECK(r.df == 1);
  const std::vector<std::int64_t> dep{200, 10, 10, 200};
  CHECK(chi_square_independence(dep, 2, 2).p_value < 1e-10);
}

TEST_CASE("linear fit", "[stats]") {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const auto f = linear_fit(x, y);
  CHECK_THAT(f.slope, WithinAbs(2.0, 1e-14));
  CHECK_THAT(f.intercept, WithinAbs(1.0, 1e-14));
  CHECK_THAT(f.slope_std_error, WithinAbs(0.0, 1e-12));
  const std::vector<double> y2{1, 3.5, 4.5, 7};
  CHECK(linear_fit(x, y2).slope_std_error > 0.0);
  CHECK(within_sigma(1.0, 1.2, 0.1));
  CHECK_FALSE(within_sigma(1.0, 1.4, 0.1));
}
