#pragma once

// Branching-process laws attached to the loop model: compound Poisson
// geometric offspring, total progeny, extinction, duality, large-deviation
// rates, and the fixed-length (j-1)·Poisson variant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "loopsoup/numeric.hpp"
#include "loopsoup/rng.hpp"

namespace loopsoup {

/// CPois(λ, Geo(p)) on ℕ: a Poisson(λ) number of geometric summands on {1,2,...}
/// with success probability p.
struct CPGeo {
  double lambda = 0.0;
  double p = 0.5;

  CPGeo() = default;
  CPGeo(double rate, double success) : lambda(rate), p(success) { validate(); }

  /// Offspring law of the loop model at (ε, t).
  static CPGeo from_model(double eps, double t) {
    if (!(eps > 0.0)) throw DomainError("CPGeo: epsilon must be positive");
    if (!(t >= 0.0)) throw DomainError("CPGeo: t must be nonnegative");
    return CPGeo(t / (eps * (eps + 1.0)), eps / (eps + 1.0));
  }

  // λ = 0 is allowed: the degenerate law at 0 (time zero).
  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("CPGeo: lambda must be >= 0");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("CPGeo: p must lie in (0, 1)");
  }
  double mean() const { return lambda / p; }
  double variance() const { return lambda * (2.0 - p) / (p * p); }
  bool supercritical() const { return lambda > p; }
};

/// (j-1)·Poisson(t) offspring.
struct FixedLengthOffspring {
  std::int64_t j = 2;
  double t = 0.0;

  FixedLengthOffspring() = default;
  FixedLengthOffspring(std::int64_t length, double time) : j(length), t(time) { validate(); }

  void validate() const {
    if (j < 2) throw DomainError("FixedLengthOffspring: j must be at least 2");
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("FixedLengthOffspring: t must be >= 0");
  }
  double mean() const { return static_cast<double>(j - 1) * t; }
};

// ---------------------------------------------------------------------------
// Offspring law
// ---------------------------------------------------------------------------

inline double cp_pmf(const CPGeo& law, std::int64_t m) {
  law.validate();
  if (m < 0) return 0.0;
  if (m == 0) return std::exp(-law.lambda);
  if (law.lambda == 0.0) return 0.0;
  // term_j = λ^j/j! C(m-1, j-1) p^j (1-p)^{m-j}
  const double log_ratio0 = std::log(law.lambda) + std::log(law.p) - std::log1p(-law.p);
  numeric::ScaledSum sum;
  double log_term = log_ratio0 + static_cast<double>(m) * std::log1p(-law.p);
  for (std::int64_t j = 1; j <= m; ++j) {
    sum.add_log(log_term);
    // term_{j+1}/term_j = λp/(1-p) · (m-j)/(j(j+1))
    if (j < m) {
      log_term += log_ratio0 + std::log(static_cast<double>(m - j)) -
                  std::log(static_cast<double>(j)) - std::log(static_cast<double>(j + 1));
    }
  }
  return std::exp(sum.log_value() - law.lambda);
}

/// pmf of a compound Poisson sum with the given jump law (jumps[0] ignored),
/// on 0..M, by Panjer's recursion.
inline std::vector<double> compound_poisson_pmf(double rate, std::span<const double> jumps,
                                                std::int64_t M) {
  if (!(rate >= 0.0)) throw DomainError("compound_poisson_pmf: rate must be nonnegative");
  if (M < 0) throw DomainError("compound_poisson_pmf: M must be nonnegative");
  std::vector<double> f(static_cast<std::size_t>(M) + 1, 0.0);
  f[0] = std::exp(-rate * (1.0 - (jumps.empty() ? 0.0 : jumps[0])));
  for (std::int64_t m = 1; m <= M; ++m) {
    double s = 0.0;
    const auto top = std::min<std::int64_t>(m, static_cast<std::int64_t>(jumps.size()) - 1);
    for (std::int64_t i = 1; i <= top; ++i) {
      s += static_cast<double>(i) * jumps[static_cast<std::size_t>(i)] *
           f[static_cast<std::size_t>(m - i)];
    }
    f[static_cast<std::size_t>(m)] = rate * s / static_cast<double>(m);
  }
  return f;
}

/// Geometric jump law of a CPGeo on 0..M.
inline std::vector<double> geometric_jumps(const CPGeo& law, std::int64_t M) {
  std::vector<double> g(static_cast<std::size_t>(M) + 1, 0.0);
  double w = law.p;
  for (std::int64_t i = 1; i <= M; ++i) {
    g[static_cast<std::size_t>(i)] = w;
    w *= 1.0 - law.p;
  }
  return g;
}

inline double pgf(const CPGeo& law, double s) {
  law.validate();
  if (!(s < 1.0 / (1.0 - law.p))) throw DomainError("pgf: s must be below 1/(1-p)");
  return std::exp(-law.lambda * (1.0 - s) / (1.0 - s + s * law.p));
}

/// log E e^{θX} for the model offspring law at (ε, t).
inline double log_mgf_L(double eps, double t, double theta) {
  if (!(theta < std::log1p(eps))) throw DomainError("mgf_L: theta must be below log(eps+1)");
  return -t / eps + t / (eps + 1.0 - std::exp(theta));
}

inline double mgf_L(double eps, double t, double theta) {
  return std::exp(log_mgf_L(eps, t, theta));
}

// ---------------------------------------------------------------------------
// Extinction and duality
// ---------------------------------------------------------------------------

/// Smallest fixed point of the pgf on [0, 1].
inline double extinction_prob(const CPGeo& law) {
  law.validate();
  if (law.lambda <= law.p) return 1.0;
  // With w = 1 - s, φ(s) = s becomes h(w) = 0 after dividing out the trivial
  // root w = 0; h(0+) = 1 - λ/p < 0 and h(1-) = +∞.
  const double lambda = law.lambda;
  const double p = law.p;
  auto h = [&](double w) { return -lambda / (w + (1.0 - w) * p) - std::log1p(-w) / w; };
  double lo = 1e-300;
  double hi = 1.0 - 1e-16;
  if (h(hi) <= 0.0) return 1.0 - hi;
  const double w = numeric::bisect(h, lo, hi, 400);
  double q = 1.0 - w;
  // Newton polish on φ(s) - s; keep the bisection root if a step wanders.
  for (int i = 0; i < 4; ++i) {
    const double d = 1.0 - q + q * p;
    const double phi = std::exp(-lambda * (1.0 - q) / d);
    const double dphi = phi * lambda * p / (d * d);
    if (!(std::abs(dphi - 1.0) > 1e-8)) break;
    const double next = q - (phi - q) / (dphi - 1.0);
    if (!(next > 0.0 && next < 1.0) || std::abs(next - q) > 1e-8) break;
    q = next;
  }
  return q;
}

/// Smallest fixed point of s ↦ exp(t(s^{j-1} - 1)).
inline double extinction_prob(const FixedLengthOffspring& law) {
  law.validate();
  if (law.mean() <= 1.0) return 1.0;
  const double jm1 = static_cast<double>(law.j - 1);
  // g(s) = φ(s) - s is positive at 0 and negative just below 1.
  auto g = [&](double s) { return std::exp(law.t * (std::pow(s, jm1) - 1.0)) - s; };
  double hi = 1.0 - 1e-12;
  while (g(hi) >= 0.0 && hi > 0.5) hi = 1.0 - (1.0 - hi) * 10.0;
  return numeric::bisect(g, 0.0, hi, 400);
}

/// Law of the supercritical process conditioned to die out.
inline CPGeo dual_params(const CPGeo& law) {
  law.validate();
  if (!law.supercritical()) throw DomainError("dual_params: law must be supercritical");
  const double q = extinction_prob(law);
  const double pt = 1.0 - q * (1.0 - law.p);
  return CPGeo(law.lambda * q * law.p / pt, pt);
}

// ---------------------------------------------------------------------------
// Large-deviation rates
// ---------------------------------------------------------------------------

/// sup_{0<θ<log(ε+1)} θ - log L(θ); zero for t >= ε².
inline double cramer_h(double eps, double t) {
  if (!(eps > 0.0)) throw DomainError("cramer_h: epsilon must be positive");
  if (!(t > 0.0)) throw DomainError("cramer_h: t must be positive");
  if (t >= eps * eps) return 0.0;
  const double lo = 1e-9;
  const double hi = std::log1p(eps) - 1e-9;
  const auto best = numeric::golden_section_max(
      [&](double th) { return th - log_mgf_L(eps, t, th); }, lo, hi);
  return std::max(0.0, best.value);
}

/// sup_{θ>=0} -log E e^{-θX} - θ for the supercritical offspring law.
inline double tail_rate_I(double eps, double t) {
  if (!(eps > 0.0)) throw DomainError("tail_rate_I: epsilon must be positive");
  if (!(t > eps * eps)) throw DomainError("tail_rate_I: requires t > eps^2");
  const CPGeo law = CPGeo::from_model(eps, t);
  // -log E e^{-θX} <= λ, so the supremum is attained on [0, λ].
  auto f = [&](double th) {
    const double s = std::exp(-th);
    return law.lambda * (1.0 - s) / (1.0 - s + s * law.p) - th;
  };
  return numeric::golden_section_max(f, 0.0, law.lambda).value;
}

// ---------------------------------------------------------------------------
// Total progeny
// ---------------------------------------------------------------------------

/// P(T^{(u)} = k) for the CPGeo offspring law, started from u ancestors.
inline double progeny_pmf(std::int64_t u, const CPGeo& law, std::int64_t k) {
  law.validate();
  if (u < 1) throw DomainError("progeny_pmf: u must be at least 1");
  if (k < u) throw DomainError("progeny_pmf: k must be at least u");
  const double kd = static_cast<double>(k);
  if (k == u) return std::exp(-kd * law.lambda);
  if (law.lambda == 0.0) return 0.0;
  // Σ_{j=1}^{k-u} C(k-u-1, j-1) x^j / j!, x = kλp/(1-p), summed with rescaling.
  const double x = kd * law.lambda * law.p / (1.0 - law.p);
  const std::int64_t top = k - u;
  double term = x;
  double sum = 0.0;
  double log_scale = 0.0;
  constexpr double kBig = 1e280;
  for (std::int64_t j = 1;; ++j) {
    sum += term;
    if (j == top) break;
    term *= static_cast<double>(top - j) / static_cast<double>(j) * x / static_cast<double>(j + 1);
    if (term > kBig || sum > kBig) {
      term /= kBig;
      sum /= kBig;
      log_scale += std::log(kBig);
    }
  }
  const double log_p = std::log(static_cast<double>(u) / kd) - kd * law.lambda +
                       static_cast<double>(top) * std::log1p(-law.p) + std::log(sum) + log_scale;
  return std::exp(log_p);
}

inline double progeny_pmf(std::int64_t u, double eps, double t, std::int64_t k) {
  return progeny_pmf(u, CPGeo::from_model(eps, t), k);
}

/// P(T^{(u,j)} = k) for (j-1)·Poisson(t) offspring; zero off the lattice u + (j-1)ℕ.
inline double fixed_length_progeny_pmf(std::int64_t u, std::int64_t j, double t, std::int64_t k) {
  const FixedLengthOffspring law(j, t);
  if (u < 1) throw DomainError("fixed_length_progeny_pmf: u must be at least 1");
  if (k < u || (k - u) % (j - 1) != 0) return 0.0;
  const std::int64_t m = (k - u) / (j - 1);
  const double kd = static_cast<double>(k);
  if (m == 0) return std::exp(-kd * t);
  if (t == 0.0) return 0.0;
  const double md = static_cast<double>(m);
  return std::exp(std::log(static_cast<double>(u)) - std::lgamma(md + 1.0) +
                  (md - 1.0) * std::log(kd) + md * std::log(t) - kd * t);
}

struct DwassCheck {
  double lhs;
  double rhs;
};

/// Closed-form progeny pmf against (u/k)·P(X_1+...+X_k = k-u), the k-fold
/// convolution being built literally from the offspring pmf.
inline DwassCheck dwass_identity_check(std::int64_t u, const CPGeo& law, std::int64_t k) {
  const double lhs = progeny_pmf(u, law, k);
  const std::int64_t M = k - u;
  std::vector<double> one(static_cast<std::size_t>(M) + 1);
  for (std::int64_t m = 0; m <= M; ++m) one[static_cast<std::size_t>(m)] = cp_pmf(law, m);
  std::vector<double> acc(static_cast<std::size_t>(M) + 1, 0.0);
  acc[0] = 1.0;
  for (std::int64_t i = 0; i < k; ++i) {
    std::vector<double> next(static_cast<std::size_t>(M) + 1, 0.0);
    for (std::int64_t a = 0; a <= M; ++a) {
      for (std::int64_t b = 0; a + b <= M; ++b) {
        next[static_cast<std::size_t>(a + b)] +=
            acc[static_cast<std::size_t>(a)] * one[static_cast<std::size_t>(b)];
      }
    }
    acc.swap(next);
  }
  const double rhs = static_cast<double>(u) / static_cast<double>(k) * acc[static_cast<std::size_t>(M)];
  return {lhs, rhs};
}

/// Progeny pmf tabulated on u..K, K chosen so that the mass beyond K (finite
/// progenies only) is bounded by `tol`, or K = max_k if the bound never gets there.
struct ProgenyTable {
  std::int64_t u = 1;
  std::vector<double> pmf;  // pmf[k], zero below u
  double q = 1.0;           // extinction probability of one ancestor
  double defect = 0.0;      // 1 - q^u, mass at infinity
  double tail_bound = 0.0;  // bound on Σ_{k>K} pmf(k)
  double rate = 0.0;        // h(t) when subcritical, I_t when supercritical

  std::int64_t K() const { return static_cast<std::int64_t>(pmf.size()) - 1; }
  double mass() const {
    double s = 0.0;
    for (double v : pmf) s += v;
    return s;
  }
};

inline ProgenyTable progeny_table(std::int64_t u, double eps, double t, double tol = 1e-10,
                                  std::int64_t max_k = 400000) {
  const CPGeo law = CPGeo::from_model(eps, t);
  ProgenyTable table;
  table.u = u;
  table.q = extinction_prob(law);
  table.defect = -std::expm1(static_cast<double>(u) * std::log(table.q));
  const double ud = static_cast<double>(u);
  // Bound on Σ_{k'>k} pmf(k'), from Chernoff on P(X_1+...+X_k = k-u).
  std::function<double(std::int64_t)> tail;
  if (t == 0.0) {
    tail = [](std::int64_t) { return 0.0; };
  } else if (t < eps * eps) {
    const double h = cramer_h(eps, t);
    table.rate = h;
    const double pre = ud * std::pow(eps + 1.0, ud) / (1.0 - std::exp(-h));
    tail = [=](std::int64_t k) {
      const double k1 = static_cast<double>(k + 1);
      return pre * std::exp(-k1 * h) / k1;
    };
  } else if (t > eps * eps) {
    const double I = tail_rate_I(eps, t);
    table.rate = I;
    tail = [=](std::int64_t k) {
      const double k1 = static_cast<double>(k + 1);
      return ud * std::exp(-k1 * I) / (k1 * (1.0 - std::exp(-I)));
    };
  } else {
    tail = [](std::int64_t) { return std::numeric_limits<double>::infinity(); };
  }
  table.pmf.assign(static_cast<std::size_t>(u), 0.0);
  for (std::int64_t k = u;; ++k) {
    table.pmf.push_back(progeny_pmf(u, law, k));
    const double b = tail(k);
    if (b < tol || k >= max_k) {
      table.tail_bound = b;
      break;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Simulation and distances
// ---------------------------------------------------------------------------

inline std::int64_t sample_offspring(Rng& rng, const CPGeo& law) {
  if (law.lambda == 0.0) return 0;
  std::poisson_distribution<std::int64_t> count(law.lambda);
  std::geometric_distribution<std::int64_t> extra(law.p);
  const std::int64_t c = count(rng);
  std::int64_t total = c;
  for (std::int64_t i = 0; i < c; ++i) total += extra(rng);
  return total;
}

inline std::int64_t sample_offspring(Rng& rng, const FixedLengthOffspring& law) {
  if (law.t == 0.0) return 0;
  std::poisson_distribution<std::int64_t> count(law.t);
  return (law.j - 1) * count(rng);
}

struct GWOutcome {
  std::int64_t progeny;  // total progeny, or steps taken when censored
  bool censored;
};

/// Total progeny min{k : X_1+...+X_k = k-u} of a Galton-Watson walk, censored at `cap`.
template <class Offspring>
GWOutcome simulate_gw(const Offspring& law, std::int64_t u, std::int64_t cap, Rng& rng) {
  if (u < 1 || cap < u) throw DomainError("simulate_gw: need 1 <= u <= cap");
  std::int64_t position = u;
  for (std::int64_t k = 1;; ++k) {
    position += sample_offspring(rng, law) - 1;
    if (position == 0) return {k, false};
    if (k >= cap || position > cap - k) return {k, true};
  }
}

template <class Offspring>
GWOutcome simulate_gw(const Offspring& law, std::int64_t u, std::int64_t cap, std::uint64_t seed,
                      std::uint64_t stream = 0) {
  Rng rng(seed, stream);
  return simulate_gw(law, u, cap, rng);
}

struct TVDistance {
  double distance;    // (1/2) Σ |p1 - p2| over the common support
  double tail_bound;  // missing mass of either pmf, an upper bound on the remainder
};

inline TVDistance tv_distance(std::span<const double> p1, std::span<const double> p2) {
  const std::size_t K = std::max(p1.size(), p2.size());
  double d = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = k < p1.size() ? p1[k] : 0.0;
    const double b = k < p2.size() ? p2[k] : 0.0;
    if (a < 0.0 || b < 0.0) throw DomainError("tv_distance: pmfs must be nonnegative");
    d += std::abs(a - b);
    s1 += a;
    s2 += b;
  }
  return {0.5 * d, 0.5 * (std::max(0.0, 1.0 - s1) + std::max(0.0, 1.0 - s2))};
}

}  // namespace loopsoup
