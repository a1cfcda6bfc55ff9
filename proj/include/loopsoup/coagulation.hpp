#pragma once

// Multi-collision coagulation equations with a gel term, truncated at cluster
// size K and collision arity Jmax, integrated by fixed-step RK4.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "loopsoup/gw_analytics.hpp"
#include "loopsoup/numeric.hpp"

namespace loopsoup {

/// Cluster densities ρ(1..K); rho[0] is unused and kept at zero.
struct DensityVector {
  std::vector<double> rho;
  double m0 = 1.0;  // initial first moment; sets the gel mass m0 - m1
  double t = 0.0;

  DensityVector() = default;
  DensityVector(std::int64_t K, double initial_mass)
      : rho(static_cast<std::size_t>(K) + 1, 0.0), m0(initial_mass) {
    if (K < 1) throw DomainError("DensityVector: K must be at least 1");
  }

  static DensityVector monodisperse(std::int64_t K) {
    DensityVector d(K, 1.0);
    d.rho[1] = 1.0;
    return d;
  }

  std::int64_t K() const { return static_cast<std::int64_t>(rho.size()) - 1; }
  double operator[](std::int64_t k) const { return rho[static_cast<std::size_t>(k)]; }
};

struct SolverConfig {
  std::int64_t K = 60;
  std::int64_t Jmax = 40;
  double dt = 1e-3;
  double eps = 1.0;
  std::int64_t fixed_j = 0;  // > 0: integrate d/dt ρ = G_j(ρ) for this j only

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("SolverConfig: dt must be positive");
    if (!(eps > 0.0)) throw DomainError("SolverConfig: eps must be positive");
    if (fixed_j != 0) {
      if (fixed_j < 2 || K < fixed_j) throw DomainError("SolverConfig: need K >= fixed_j >= 2");
    } else if (Jmax < 2 || K < Jmax) {
      throw DomainError("SolverConfig: need K >= Jmax >= 2");
    }
  }
};

/// Σ_k k^r ρ(k) over the truncation.
inline double moments(const DensityVector& d, int r) {
  if (r < 0) throw DomainError("moments: r must be nonnegative");
  double s = 0.0;
  for (std::int64_t k = 1; k <= d.K(); ++k) s += std::pow(static_cast<double>(k), r) * d[k];
  return s;
}

inline double gel_mass(const DensityVector& d) { return d.m0 - moments(d, 1); }

namespace detail {

/// a(i) = i ρ(i) on 0..K.
inline std::vector<double> size_biased(const DensityVector& d) {
  std::vector<double> a(d.rho.size(), 0.0);
  for (std::int64_t i = 1; i <= d.K(); ++i) {
    a[static_cast<std::size_t>(i)] = static_cast<double>(i) * d[i];
  }
  return a;
}

inline std::vector<double> convolve_truncated(std::span<const double> x, std::span<const double> y) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    for (std::size_t j = 0; i + j < x.size(); ++j) out[i + j] += x[i] * y[j];
  }
  return out;
}

/// G_j for every k, given the (j)-fold self-convolution of a.
inline std::vector<double> g_from_power(const DensityVector& d, std::int64_t j,
                                        std::span<const double> power) {
  const double m1 = moments(d, 1);
  const double g = d.m0 - m1;
  // Σ_{h=1}^{j-1} C(j-1,h) g^h m1^{j-1-h}
  double gel_factor = 0.0;
  for (std::int64_t h = 1; h <= j - 1; ++h) {
    gel_factor += std::exp(numeric::log_choose(static_cast<double>(j - 1), static_cast<double>(h))) *
                  std::pow(g, static_cast<double>(h)) * std::pow(m1, static_cast<double>(j - 1 - h));
  }
  const double loss_factor = std::pow(m1, static_cast<double>(j - 1));
  std::vector<double> out(d.rho.size(), 0.0);
  for (std::int64_t k = 1; k <= d.K(); ++k) {
    const double gain = k >= j ? power[static_cast<std::size_t>(k)] / static_cast<double>(j) : 0.0;
    const double kr = static_cast<double>(k) * d[k];
    out[static_cast<std::size_t>(k)] = gain - kr * loss_factor - kr * gel_factor;
  }
  return out;
}

}  // namespace detail

/// G_j(ρ, k) for all k in 1..K (index 0 unused).
inline std::vector<double> G_j_all(const DensityVector& d, std::int64_t j) {
  if (j < 2 || j > d.K()) throw DomainError("G_j: arity out of range");
  const auto a = detail::size_biased(d);
  std::vector<double> power = a;
  for (std::int64_t i = 1; i < j; ++i) power = detail::convolve_truncated(power, a);
  return detail::g_from_power(d, j, power);
}

inline double G_j(const DensityVector& d, std::int64_t j, std::int64_t k) {
  if (k < 1 || k > d.K()) throw DomainError("G_j: size index out of range");
  return G_j_all(d, j)[static_cast<std::size_t>(k)];
}

/// Σ_{j=2}^{Jmax} (ε+1)^{-j} G_j(ρ, k) for all k.
inline std::vector<double> rhs_full(const DensityVector& d, double eps, std::int64_t Jmax) {
  if (Jmax < 2 || Jmax > d.K()) throw DomainError("rhs_full: need 2 <= Jmax <= K");
  const auto a = detail::size_biased(d);
  std::vector<double> power = detail::convolve_truncated(a, a);
  std::vector<double> out(d.rho.size(), 0.0);
  const double r = 1.0 / (eps + 1.0);
  double weight = r;
  for (std::int64_t j = 2; j <= Jmax; ++j) {
    if (j > 2) power = detail::convolve_truncated(power, a);
    weight *= r;
    const auto g = detail::g_from_power(d, j, power);
    for (std::size_t k = 1; k < out.size(); ++k) out[k] += weight * g[k];
  }
  return out;
}

/// Bound on the arities dropped by rhs_full: |G_j(ρ,k)| <= 2 m0^j for each k.
inline double rhs_tail_bound(const DensityVector& d, double eps, std::int64_t Jmax) {
  const double r = std::max(d.m0, 0.0) / (eps + 1.0);
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::pow(r, static_cast<double>(Jmax + 1)) / (1.0 - r);
}

inline std::vector<double> rhs(const DensityVector& d, const SolverConfig& config) {
  return config.fixed_j > 0 ? G_j_all(d, config.fixed_j) : rhs_full(d, config.eps, config.Jmax);
}

struct Trajectory {
  std::vector<DensityVector> states;  // one per requested output time
  std::vector<double> leak_rate;      // -d/dt m1 at each output: flux past K plus gel formation
  std::int64_t clamp_events = 0;      // entries in (-1e-8, 0) reset to zero
  std::int64_t steps = 0;
  bool unvalidated_regime = false;    // some output time exceeds ε² (or 1/(j-1) for fixed j)
};

/// Fixed-step RK4 from d0 through the sorted output times. Each segment uses
/// ceil(length/dt) equal steps so every output time is hit exactly.
inline Trajectory integrate(const DensityVector& d0, const SolverConfig& config,
                            std::span<const double> output_times) {
  config.validate();
  if (d0.K() != config.K) throw DomainError("integrate: density length does not match K");
  Trajectory out;
  DensityVector cur = d0;
  const double critical = config.fixed_j > 0 ? 1.0 / static_cast<double>(config.fixed_j - 1)
                                             : config.eps * config.eps;
  auto leak = [&](const DensityVector& d) {
    const auto f = rhs(d, config);
    double s = 0.0;
    for (std::size_t k = 1; k < f.size(); ++k) s += static_cast<double>(k) * f[k];
    return -s;
  };
  const std::size_t len = cur.rho.size();
  DensityVector stage = cur;
  for (double target : output_times) {
    if (!(target >= cur.t)) throw DomainError("integrate: output times must be sorted and >= t0");
    if (target > critical) out.unvalidated_regime = true;
    const double span = target - cur.t;
    const auto steps = static_cast<std::int64_t>(std::ceil(span / config.dt - 1e-9));
    const double h = steps > 0 ? span / static_cast<double>(steps) : 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
      const auto k1 = rhs(cur, config);
      for (std::size_t k = 1; k < len; ++k) stage.rho[k] = cur.rho[k] + 0.5 * h * k1[k];
      const auto k2 = rhs(stage, config);
      for (std::size_t k = 1; k < len; ++k) stage.rho[k] = cur.rho[k] + 0.5 * h * k2[k];
      const auto k3 = rhs(stage, config);
      for (std::size_t k = 1; k < len; ++k) stage.rho[k] = cur.rho[k] + h * k3[k];
      const auto k4 = rhs(stage, config);
      for (std::size_t k = 1; k < len; ++k) {
        double v = cur.rho[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        if (v < 0.0) {
          if (v < -1e-8) {
            throw DomainError("integrate: density fell below -1e-8 at k=" + std::to_string(k) +
                              "; reduce dt");
          }
          v = 0.0;
          ++out.clamp_events;
        }
        cur.rho[k] = v;
      }
      ++out.steps;
    }
    cur.t = target;
    out.states.push_back(cur);
    out.leak_rate.push_back(leak(cur));
  }
  return out;
}

/// ρ_{ε,t}(k) = P(T^{(1)} = k) / k.
inline double analytic_rho(double eps, double t, std::int64_t k) {
  if (k < 1) throw DomainError("analytic_rho: k must be at least 1");
  return progeny_pmf(1, eps, t, k) / static_cast<double>(k);
}

inline double analytic_rho_fixed_j(std::int64_t j, double t, std::int64_t k) {
  if (k < 1) throw DomainError("analytic_rho_fixed_j: k must be at least 1");
  return fixed_length_progeny_pmf(1, j, t, k) / static_cast<double>(k);
}

/// Analytic profile on 1..K with m0 = 1.
inline DensityVector analytic_profile(const SolverConfig& config, double t) {
  DensityVector d(config.K, 1.0);
  for (std::int64_t k = 1; k <= config.K; ++k) {
    d.rho[static_cast<std::size_t>(k)] = config.fixed_j > 0
                                             ? analytic_rho_fixed_j(config.fixed_j, t, k)
                                             : analytic_rho(config.eps, t, k);
  }
  d.t = t;
  return d;
}

struct Residual {
  double sup;         // sup_k |∂_t ρ - rhs(ρ)| on the analytic profile
  double tail_bound;  // contribution bound of arities above Jmax (0 for fixed j)
};

/// Plugs the analytic profile into the truncated equations, with a central
/// finite difference in t of step fd_step.
inline Residual residual(const SolverConfig& config, double t, double fd_step = 1e-5) {
  config.validate();
  if (!(t - fd_step > 0.0)) throw DomainError("residual: need t > fd_step");
  const auto plus = analytic_profile(config, t + fd_step);
  const auto minus = analytic_profile(config, t - fd_step);
  const auto mid = analytic_profile(config, t);
  const auto f = rhs(mid, config);
  double sup = 0.0;
  for (std::int64_t k = 1; k <= config.K; ++k) {
    const double dt = (plus[k] - minus[k]) / (2.0 * fd_step);
    sup = std::max(sup, std::abs(dt - f[static_cast<std::size_t>(k)]));
  }
  const double tail = config.fixed_j > 0 ? 0.0 : rhs_tail_bound(mid, config.eps, config.Jmax);
  return {sup, tail};
}

}  // namespace loopsoup
