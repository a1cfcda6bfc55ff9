#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace loopsoup {

/// Raised when an argument lies outside the domain of a closed-form law or
/// sampler.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace numeric {

inline constexpr double kSeriesRelTol = 1e-15;

/// log C(n, k) for 0 <= k <= n.
inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// Sum of positive terms kept as mantissa * exp(offset) so that partial sums
/// far outside the double range stay representable.
class ScaledSum {
 public:
  void add_log(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) {
      return;
    }
    if (log_term > offset_) {
      sum_ = sum_ * std::exp(offset_ - log_term) + 1.0;
      offset_ = log_term;
    } else {
      sum_ += std::exp(log_term - offset_);
    }
  }
  double log_value() const {
    return sum_ > 0.0 ? offset_ + std::log(sum_) : -std::numeric_limits<double>::infinity();
  }

 private:
  double sum_ = 0.0;
  double offset_ = -std::numeric_limits<double>::infinity();
};

/// Σ_{k>=2} x^k / k = -log(1-x) - x, accurate for small x.
inline double log_series_tail2(double x) {
  if (!(x >= 0.0 && x < 1.0)) {
    throw DomainError("log_series_tail2: argument must lie in [0, 1)");
  }
  if (x < 0.05) {
    double term = x * x;
    double sum = 0.0;
    for (int k = 2; k < 200; ++k) {
      const double add = term / k;
      sum += add;
      if (add < kSeriesRelTol * sum) {
        break;
      }
      term *= x;
    }
    return sum;
  }
  return -std::log1p(-x) - x;
}

struct Maximum {
  double argmax;
  double value;
};

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
inline Maximum golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                  double tol = 1e-13, int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  Maximum best{c, fc};
  if (fd > best.value) best = {d, fd};
  const double fa = f(lo);
  const double fb = f(hi);
  if (fa > best.value) best = {lo, fa};
  if (fb > best.value) best = {hi, fb};
  return best;
}

/// Bisection for a sign change of f on [lo, hi]; f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iterations = 200) {
  double flo = f(lo);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace numeric
}  // namespace loopsoup
