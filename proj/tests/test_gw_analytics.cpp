#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "loopsoup/gw_analytics.hpp"
#include "loopsoup/loop_measure.hpp"
#include "loopsoup/stats.hpp"
#include "oracles.hpp"

using namespace loopsoup;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace st = loopsoup::stats;

namespace {

// Smallest fixed point of the pgf by monotone iteration from 0.
double fixed_point_iteration(const CPGeo& law) {
  double s = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double next = std::exp(-law.lambda * (1.0 - s) / (1.0 - s + s * law.p));
    if (std::abs(next - s) < 1e-16) return next;
    s = next;
  }
  return s;
}

double grid_max(const std::function<double(double)>& f, double lo, double hi, int points) {
  double best = -1e300;
  for (int i = 0; i <= points; ++i) best = std::max(best, f(lo + (hi - lo) * i / points));
  return best;
}

}  // namespace

TEST_CASE("CPGeo parameters", "[gw]") {
  const auto law = CPGeo::from_model(1.0, 2.0);
  CHECK(law.lambda == 1.0);
  CHECK(law.p == 0.5);
  CHECK(law.supercritical());
  CHECK_THAT(CPGeo::from_model(0.5, 0.2).mean(), WithinRel(0.2 / 0.25, 1e-14));
  CHECK_THROWS_AS(CPGeo(-1.0, 0.5), DomainError);
  CHECK_THROWS_AS(CPGeo(1.0, 1.0), DomainError);
  CHECK_THROWS_AS(CPGeo::from_model(0.0, 1.0), DomainError);
  CHECK_NOTHROW(CPGeo(0.0, 0.5));
}

TEST_CASE("offspring pmf examples and Panjer oracle", "[gw][oracle]") {
  CHECK_THAT(cp_pmf(CPGeo(1.0, 0.5), 1), WithinRel(std::exp(-1.0) / 2, 1e-14));
  CHECK_THAT(cp_pmf(CPGeo(1.0, 0.5), 1), WithinAbs(0.18394, 1e-5));
  CHECK(cp_pmf(CPGeo(0.0, 0.5), 0) == 1.0);
  CHECK(cp_pmf(CPGeo(0.0, 0.5), 3) == 0.0);
  for (double lambda : {0.2, 1.0, 7.5}) {
    for (double p : {0.1, 0.5, 0.9}) {
      const CPGeo law(lambda, p);
      std::vector<double> jumps(200, 0.0);
      for (int j = 1; j < 200; ++j) jumps[j] = p * std::pow(1 - p, j - 1);
      const auto ref = oracle::panjer(lambda, jumps, 150);
      double mean = 0.0;
      for (int m = 0; m <= 150; ++m) {
        CHECK_THAT(cp_pmf(law, m), WithinAbs(ref[m], 1e-13));
      }
      for (int m = 0; m < 4000; ++m) mean += m * cp_pmf(law, m);
      CHECK_THAT(mean, WithinRel(law.mean(), 1e-10));
      const auto panjer = compound_poisson_pmf(lambda, geometric_jumps(law, 150), 150);
      for (int m = 0; m <= 150; ++m) CHECK_THAT(panjer[m], WithinAbs(ref[m], 1e-13));
    }
  }
  // Large arguments stay finite.
  const double far = cp_pmf(CPGeo(50.0, 0.3), 5000);
  CHECK(std::isfinite(far));
  CHECK(far >= 0.0);
}

TEST_CASE("pgf and mgf", "[gw]") {
  const CPGeo law(1.0, 0.5);
  CHECK_THAT(pgf(law, 1.0), WithinRel(1.0, 1e-15));
  CHECK_THAT(pgf(law, 0.0), WithinRel(std::exp(-1.0), 1e-15));
  CHECK_THAT(pgf(law, 0.5), WithinRel(std::exp(-2.0 / 3.0), 1e-14));
  double series = 0.0;
  for (int m = 0; m < 400; ++m) series += std::pow(0.5, m) * cp_pmf(law, m);
  CHECK_THAT(pgf(law, 0.5), WithinAbs(series, 1e-14));
  CHECK_THROWS_AS(pgf(law, 2.0), DomainError);

  CHECK_THAT(mgf_L(1.0, 0.5, 0.0), WithinRel(1.0, 1e-15));
  const auto model = CPGeo::from_model(1.0, 0.5);
  double mgf_series = 0.0;
  for (int m = 0; m < 2000; ++m) mgf_series += std::exp(0.3 * m) * cp_pmf(model, m);
  CHECK_THAT(mgf_L(1.0, 0.5, 0.3), WithinRel(mgf_series, 1e-10));
  CHECK_THAT(mgf_L(1.0, 0.5, 0.3), WithinRel(pgf(model, std::exp(0.3)), 1e-13));
  CHECK_THROWS_AS(mgf_L(1.0, 0.5, std::log(2.0)), DomainError);
}

TEST_CASE("extinction probability", "[gw]") {
  CHECK(extinction_prob(CPGeo(0.3, 0.5)) == 1.0);
  CHECK(extinction_prob(CPGeo(0.0, 0.5)) == 1.0);
  const auto law = CPGeo::from_model(1.0, 2.0);
  const double q = extinction_prob(law);
  CHECK_THAT(q, WithinAbs(0.525293692667, 1e-11));
  CHECK_THAT(std::exp(-(1 - q) / (1 - q / 2)), WithinAbs(q, 1e-13));
  for (double eps : {0.3, 1.0, 2.0}) {
    for (double ratio : {1.3, 2.0, 5.0}) {
      const auto l = CPGeo::from_model(eps, ratio * eps * eps);
      CHECK_THAT(extinction_prob(l), WithinAbs(fixed_point_iteration(l), 1e-12));
    }
  }
  CHECK(extinction_prob(FixedLengthOffspring(3, 0.4)) == 1.0);
  const FixedLengthOffspring fl(3, 1.0);
  const double qf = extinction_prob(fl);
  CHECK(qf < 1.0);
  CHECK_THAT(std::exp(fl.t * (qf * qf - 1)), WithinAbs(qf, 1e-12));
}

TEST_CASE("criticality boundary and monotonicity", "[gw][property]") {
  for (double eps : {0.5, 1.0, 2.0}) {
    const double crit = eps * eps;
    CHECK(extinction_prob(CPGeo::from_model(eps, crit * (1 - 1e-3))) == 1.0);
    CHECK(extinction_prob(CPGeo::from_model(eps, crit)) == 1.0);
    CHECK(extinction_prob(CPGeo::from_model(eps, crit * (1 + 1e-3))) < 1.0);
    double prev = 1.0;
    for (double r = 1.1; r < 6.0; r += 0.4) {
      const double q = extinction_prob(CPGeo::from_model(eps, r * crit));
      CHECK(q < prev);
      prev = q;
    }
  }
  for (double t : {1.5, 3.0}) {
    double prev = 0.0;
    for (double eps = 0.2; eps * eps < t; eps += 0.1) {
      const double q = extinction_prob(CPGeo::from_model(eps, t));
      CHECK(q > prev);
      prev = q;
    }
  }
}

TEST_CASE("dual law is subcritical", "[gw]") {
  const auto law = CPGeo::from_model(1.0, 2.0);
  const auto dual = dual_params(law);
  CHECK(dual.mean() < 1.0);
  CHECK(extinction_prob(dual) == 1.0);
  // Near criticality the dual approaches the original law.
  const auto near = CPGeo::from_model(1.0, 1.0 + 1e-6);
  const auto nd = dual_params(near);
  CHECK_THAT(nd.lambda, WithinRel(near.lambda, 1e-4));
  CHECK_THAT(nd.p, WithinRel(near.p, 1e-4));
  // Conditioned pgf identity: φ(qs)/q is the dual pgf.
  const double q = extinction_prob(law);
  for (double s : {0.0, 0.3, 0.9}) CHECK_THAT(pgf(law, q * s) / q, WithinRel(pgf(dual, s), 1e-12));
  CHECK_THROWS_AS(dual_params(CPGeo::from_model(1.0, 0.5)), DomainError);
}

TEST_CASE("progeny conditioned on extinction follows the dual law", "[gw][mc]") {
  const auto law = CPGeo::from_model(1.0, 2.0);
  const auto dual = dual_params(law);
  Rng rng(61, 0);
  const int K = 12;
  std::vector<std::int64_t> counts(K + 1, 0);
  for (int r = 0; r < 60000; ++r) {
    const auto out = simulate_gw(law, 1, 400, rng);
    if (out.censored) continue;
    ++counts[std::min<std::int64_t>(out.progeny, K + 1) - 1];
  }
  std::vector<double> probs;
  for (int k = 1; k <= K; ++k) probs.push_back(progeny_pmf(1, dual, k));
  probs.push_back(0.0);
  CHECK(st::chi_square_gof(counts, probs).p_value > 0.01);
}

TEST_CASE("large deviation rates against grid oracles", "[gw][oracle]") {
  CHECK(cramer_h(1.0, 1.0) == 0.0);
  CHECK(cramer_h(1.0, 1.5) == 0.0);
  CHECK_THAT(cramer_h(1.0, 0.5), WithinAbs(0.0578260543, 1e-9));
  CHECK_THAT(tail_rate_I(1.0, 2.0), WithinAbs(0.1126895417, 1e-9));
  for (double eps : {0.5, 1.0, 2.0}) {
    for (double r : {0.2, 0.5, 0.9}) {
      const double t = r * eps * eps;
      const double hi = std::log1p(eps);
      const double grid = grid_max([&](double th) { return th - log_mgf_L(eps, t, th); }, 1e-9,
                                   hi - 1e-9, 200000);
      CHECK_THAT(cramer_h(eps, t), WithinAbs(grid, 1e-6));
    }
    for (double r : {1.1, 2.0, 4.0}) {
      const double t = r * eps * eps;
      const auto law = CPGeo::from_model(eps, t);
      const double grid = grid_max(
          [&](double th) { return -std::log(pgf(law, std::exp(-th))) - th; }, 0.0, 3.0 * law.lambda, 200000);
      CHECK_THAT(tail_rate_I(eps, t), WithinAbs(grid, 1e-6));
    }
  }
  CHECK(tail_rate_I(1.0, 1.001) > 0.0);
  CHECK(tail_rate_I(1.0, 1.001) < 1e-5);
  // Near t = 0 the rate approaches the edge of the mgf domain, log(ε+1).
  CHECK(cramer_h(1.0, 1e-6) < std::log(2.0));
  CHECK(cramer_h(1.0, 1e-6) > std::log(2.0) - 5e-3);
  CHECK_THROWS_AS(tail_rate_I(1.0, 1.0), DomainError);
}

TEST_CASE("progeny pmf examples", "[gw]") {
  CHECK_THAT(progeny_pmf(3, 1.0, 0.7, 3), WithinRel(std::exp(-3 * 0.35), 1e-14));
  CHECK(progeny_pmf(2, 1.0, 0.0, 2) == 1.0);
  CHECK(progeny_pmf(2, 1.0, 0.0, 5) == 0.0);
  CHECK_THAT(progeny_pmf(1, 1.0, 1.0, 2), WithinRel(std::exp(-1.0) / 4, 1e-14));
  CHECK_THAT(progeny_pmf(1, 1.0, 1.0, 2), WithinAbs(0.091970, 1e-6));
  CHECK_THROWS_AS(progeny_pmf(0, 1.0, 1.0, 2), DomainError);
  CHECK_THROWS_AS(progeny_pmf(3, 1.0, 1.0, 2), DomainError);
  const double far = progeny_pmf(1, 1.0, 0.99, 10000);
  CHECK(std::isfinite(far));
  CHECK(far > 0.0);
}

TEST_CASE("Dwass identity on a grid", "[gw][oracle]") {
  const std::vector<CPGeo> laws{CPGeo(1.0, 0.5), CPGeo(0.4, 0.7), CPGeo::from_model(0.5, 0.3),
                                CPGeo::from_model(1.0, 2.0)};
  for (const auto& law : laws) {
    for (std::int64_t u = 1; u <= 4; ++u) {
      for (std::int64_t k = u; k <= 40; ++k) {
        const auto d = dwass_identity_check(u, law, k);
        REQUIRE_THAT(d.lhs, WithinAbs(d.rhs, 1e-10));
      }
    }
  }
  const auto d = dwass_identity_check(2, CPGeo(0.4, 0.7), 5);
  CHECK_THAT(d.lhs, WithinAbs(d.rhs, 1e-12));
}

TEST_CASE("progeny tables normalise with the defect", "[gw][property]") {
  for (double eps : {0.5, 1.0}) {
    for (double r : {0.3, 0.8, 1.5, 3.0}) {
      for (std::int64_t u : {1, 3}) {
        const double t = r * eps * eps;
        const auto table = progeny_table(u, eps, t);
        INFO("eps=" << eps << " t=" << t << " u=" << u << " K=" << table.K());
        CHECK(table.tail_bound < 1e-10);
        CHECK_THAT(table.mass() + table.defect, WithinAbs(1.0, 1e-8));
        CHECK_THAT(table.defect, WithinAbs(1.0 - std::pow(table.q, static_cast<double>(u)), 1e-12));
      }
    }
  }
  const auto t0 = progeny_table(2, 1.0, 0.0);
  CHECK(t0.K() == 2);
  CHECK(t0.pmf[2] == 1.0);
}

TEST_CASE("tail bounds hold for partial sums", "[gw][property]") {
  for (double t : {0.5, 2.0}) {
    const auto table = progeny_table(1, 1.0, t, 1e-14);
    for (std::int64_t k = 1; k <= 200; ++k) {
      double tail = 0.0;
      for (std::int64_t j = k + 1; j <= table.K(); ++j) tail += table.pmf[j];
      double bound;
      if (t < 1.0) {
        const double h = table.rate;
        bound = 2.0 * std::exp(-(k + 1) * h) / ((k + 1) * (1 - std::exp(-h)));
      } else {
        bound = std::exp(-(k + 1) * table.rate) / (1 - std::exp(-table.rate));
      }
      REQUIRE(tail <= bound);
    }
  }
}

TEST_CASE("mean progeny identity below criticality", "[gw][property]") {
  for (double eps : {0.5, 1.0, 2.0}) {
    for (double r : {0.2, 0.6, 0.9}) {
      const double t = r * eps * eps;
      const auto table = progeny_table(1, eps, t, 1e-13);
      double mean = 0.0;
      for (std::int64_t k = 1; k <= table.K(); ++k) mean += k * table.pmf[k];
      CHECK_THAT(mean, WithinRel(1.0 / (1.0 - r), 1e-8));
    }
  }
}

TEST_CASE("fixed-length progeny", "[gw]") {
  CHECK_THAT(fixed_length_progeny_pmf(2, 3, 0.3, 2), WithinRel(std::exp(-0.6), 1e-14));
  CHECK_THAT(fixed_length_progeny_pmf(1, 2, 0.5, 3), WithinRel(0.375 * std::exp(-1.5), 1e-14));
  CHECK_THAT(fixed_length_progeny_pmf(1, 2, 0.5, 3), WithinAbs(0.0836738, 1e-7));
  CHECK(fixed_length_progeny_pmf(1, 3, 0.3, 2) == 0.0);
  CHECK(fixed_length_progeny_pmf(1, 3, 0.3, 4) == 0.0);
  // Direct convolution of (j-1)·Poisson(t) offspring.
  for (std::int64_t j : {2, 4}) {
    const double t = 0.2;
    for (std::int64_t u : {1, 2}) {
      for (std::int64_t k = u; k <= 25; ++k) {
        if ((k - u) % (j - 1) != 0) continue;
        const std::int64_t m = (k - u) / (j - 1);
        const double pois_sum = std::exp(-k * t) * std::pow(k * t, m) / std::tgamma(m + 1.0);
        CHECK_THAT(fixed_length_progeny_pmf(u, j, t, k), WithinRel(double(u) / k * pois_sum, 1e-12));
      }
    }
    double total = 0.0;
    for (std::int64_t k = 1; k <= 3000; ++k) total += fixed_length_progeny_pmf(1, j, 0.2, k);
    CHECK_THAT(total, WithinAbs(1.0, 1e-10));
  }
}

TEST_CASE("simulated progeny matches the pmf", "[gw][mc]") {
  const auto law = CPGeo::from_model(1.0, 0.5);
  Rng rng(67, 0);
  const int K = 15;
  std::vector<std::int64_t> counts(K + 1, 0);
  for (int r = 0; r < 100000; ++r) {
    const auto out = simulate_gw(law, 1, 100000, rng);
    REQUIRE_FALSE(out.censored);
    ++counts[std::min<std::int64_t>(out.progeny, K + 1) - 1];
  }
  std::vector<double> probs;
  for (int k = 1; k <= K; ++k) probs.push_back(progeny_pmf(1, law, k));
  probs.push_back(0.0);
  CHECK(st::chi_square_gof(counts, probs).p_value > 0.01);

  CHECK(simulate_gw(CPGeo(0.0, 0.5), 3, 10, std::uint64_t{1}).progeny == 3);
  CHECK_THROWS_AS(simulate_gw(law, 0, 10, std::uint64_t{1}), DomainError);
}

TEST_CASE("supercritical censoring frequency is the survival probability", "[gw][mc]") {
  const auto law = CPGeo::from_model(1.0, 2.0);
  const double q = extinction_prob(law);
  Rng rng(71, 0);
  const int reps = 4000;
  int censored = 0;
  for (int r = 0; r < reps; ++r) censored += simulate_gw(law, 2, 100000, rng).censored;
  const double surv = 1.0 - q * q;
  CHECK(std::abs(static_cast<double>(censored) / reps - surv) <= 3.0 * std::sqrt(surv * (1 - surv) / reps));
}

TEST_CASE("fixed-length simulation stays on the lattice", "[gw][mc]") {
  const FixedLengthOffspring law(3, 0.3);
  Rng rng(73, 0);
  for (int r = 0; r < 2000; ++r) {
    const auto out = simulate_gw(law, 1, 100000, rng);
    REQUIRE((out.progeny - 1) % 2 == 0);
  }
}

TEST_CASE("total variation distance", "[gw]") {
  const std::vector<double> a{0.2, 0.5, 0.3};
  CHECK(tv_distance(a, a).distance == 0.0);
  const std::vector<double> d0{1.0};
  const std::vector<double> d1{0.0, 1.0};
  CHECK(tv_distance(d0, d1).distance == 1.0);
  CHECK(tv_distance(d0, d1).tail_bound == 0.0);
  const std::vector<double> neg{-0.1, 1.1};
  CHECK_THROWS_AS(tv_distance(neg, a), DomainError);
}

TEST_CASE("finite-n offspring law is close to the limit law", "[gw]") {
  const double eps = 1.0;
  const double t = 1.0;
  const auto limit = CPGeo::from_model(eps, t);
  double prev = 1.0;
  for (std::int64_t n : {100, 1000, 10000}) {
    const ModelParams p(n, eps);
    const auto exact = offspring_law_exact(p, 0);
    const auto finite = compound_poisson_pmf(static_cast<double>(n) * t * exact.rate, exact.pmf, 300);
    std::vector<double> lim(301);
    for (int m = 0; m <= 300; ++m) lim[m] = cp_pmf(limit, m);
    const auto tv = tv_distance(finite, lim);
    INFO("n=" << n << " tv=" << tv.distance);
    CHECK(tv.tail_bound < 1e-12);
    CHECK(tv.distance < prev);
    prev = tv.distance;
    if (n == 100) CHECK(tv.distance <= 1.5 * (1.0 / 200));
  }
}
