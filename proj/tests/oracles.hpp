#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// Loop-measure mass of {loops whose visited vertex set satisfies pred}, on
/// the complete graph with n <= 12 vertices (bit i = vertex i+1). Tracks the
/// law of the visited set of k uniform draws by dynamic programming and
/// weights length k by (ε+1)^{-k}/k. The sum stops once the geometric
/// remainder falls below tail_tol.
inline double visited_set_mass(int n, double eps, const std::function<bool(std::uint32_t)>& pred,
                               double tail_tol = 1e-18) {
  const std::uint32_t full = (1u << n);
  std::vector<double> prob(full, 0.0);
  prob[0] = 1.0;
  const double r = 1.0 / (eps + 1.0);
  double rk = 1.0;
  double total = 0.0;
  for (int k = 1;; ++k) {
    std::vector<double> next(full, 0.0);
    for (std::uint32_t m = 0; m < full; ++m) {
      if (prob[m] == 0.0) continue;
      for (int v = 0; v < n; ++v) next[m | (1u << v)] += prob[m] / n;
    }
    prob.swap(next);
    rk *= r;
    if (k >= 2) {
      double hit = 0.0;
      for (std::uint32_t m = 0; m < full; ++m) {
        if (prob[m] > 0.0 && pred(m)) hit += prob[m];
      }
      total += rk * hit / k;
    }
    if (k > 2 && rk * r / ((k + 1) * (1.0 - r)) < tail_tol) break;
  }
  return total;
}

inline std::uint32_t bit(int vertex) { return 1u << (vertex - 1); }

/// Bitmask of vertices first..last.
inline std::uint32_t range_mask(int first, int last) {
  std::uint32_t m = 0;
  for (int v = first; v <= last; ++v) m |= bit(v);
  return m;
}

}  // namespace oracle

namespace oracle {

/// Compound Poisson pmf on 0..M by direct Panjer recursion; jumps[j] is the
/// probability of a jump of size j (jumps[0] must be 0).
inline std::vector<double> panjer(double rate, const std::vector<double>& jumps, int M) {
  std::vector<double> f(static_cast<std::size_t>(M) + 1, 0.0);
  f[0] = std::exp(-rate);
  for (int m = 1; m <= M; ++m) {
    double s = 0.0;
    for (int j = 1; j <= m && j < static_cast<int>(jumps.size()); ++j) s += j * jumps[j] * f[m - j];
    f[m] = rate * s / m;
  }
  return f;
}

/// Jump law of (|ℓ|-1) for loops through a fixed vertex, on 0..J.
inline std::vector<double> through_vertex_jumps(int n, double eps, int J) {
  std::vector<double> w(static_cast<std::size_t>(J) + 1, 0.0);
  double total = 0.0;
  for (int j = 1; j <= 4000; ++j) {
    const int m = j + 1;
    const double x = (1.0 - std::pow(1.0 - 1.0 / n, m)) * std::pow(1.0 / (eps + 1.0), m) / m;
    total += x;
    if (j <= J) w[j] = x;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace oracle
