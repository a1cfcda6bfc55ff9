#pragma once

// Small statistics toolkit for the Monte Carlo checks.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "loopsoup/numeric.hpp"

namespace loopsoup::stats {

/// Running mean and variance.
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const Welford& o) {
    if (o.n_ == 0) return;
    const auto n = n_ + o.n_;
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / static_cast<double>(n);
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / static_cast<double>(n);
    n_ = n;
  }
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline double chi_square_sf(double statistic, double df) {
  if (!(df > 0.0)) throw DomainError("chi_square_sf: df must be positive");
  if (statistic <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), statistic));
}

inline double chi_square_quantile(double prob, double df) {
  return boost::math::quantile(boost::math::chi_squared(df), prob);
}

struct ChiSquare {
  double statistic = 0.0;
  std::int64_t df = 0;
  double p_value = 1.0;
  bool passes(double level) const { return p_value >= level; }
};

/// Goodness of fit of counts to cell probabilities. Cells are merged from the
/// right until each has expected count >= min_expected; the last cell also
/// absorbs the probability missing from `probs`.
inline ChiSquare chi_square_gof(std::span<const std::int64_t> counts, std::span<const double> probs,
                                double min_expected = 5.0) {
  if (counts.size() != probs.size() || counts.empty()) {
    throw DomainError("chi_square_gof: counts and probs must have equal nonzero length");
  }
  std::int64_t total = 0;
  double prob_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    prob_sum += probs[i];
  }
  std::vector<double> exp_cells;
  std::vector<double> obs_cells;
  double e_acc = 0.0;
  double o_acc = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    e_acc += probs[i] * static_cast<double>(total);
    o_acc += static_cast<double>(counts[i]);
    if (e_acc >= min_expected) {
      exp_cells.push_back(e_acc);
      obs_cells.push_back(o_acc);
      e_acc = 0.0;
      o_acc = 0.0;
    }
  }
  e_acc += std::max(0.0, 1.0 - prob_sum) * static_cast<double>(total);
  if (!exp_cells.empty()) {
    exp_cells.back() += e_acc;
    obs_cells.back() += o_acc;
  } else {
    exp_cells.push_back(e_acc);
    obs_cells.push_back(o_acc);
  }
  ChiSquare out;
  for (std::size_t i = 0; i < exp_cells.size(); ++i) {
    if (exp_cells[i] > 0.0) {
      const double d = obs_cells[i] - exp_cells[i];
      out.statistic += d * d / exp_cells[i];
    }
  }
  out.df = static_cast<std::int64_t>(exp_cells.size()) - 1;
  out.p_value = out.df > 0 ? chi_square_sf(out.statistic, static_cast<double>(out.df)) : 1.0;
  return out;
}

/// Pearson test of independence on an r×c contingency table (row-major).
/// Rows and columns with zero margin are dropped.
inline ChiSquare chi_square_independence(std::span<const std::int64_t> table, std::size_t rows,
                                         std::size_t cols) {
  if (table.size() != rows * cols) throw DomainError("chi_square_independence: bad table shape");
  std::vector<double> rs(rows, 0.0);
  std::vector<double> cs(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const auto v = static_cast<double>(table[i * cols + j]);
      rs[i] += v;
      cs[j] += v;
      total += v;
    }
  }
  ChiSquare out;
  std::int64_t live_r = 0;
  std::int64_t live_c = 0;
  for (double r : rs) live_r += r > 0.0;
  for (double c : cs) live_c += c > 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = rs[i] * cs[j] / total;
      if (e > 0.0) {
        const double d = static_cast<double>(table[i * cols + j]) - e;
        out.statistic += d * d / e;
      }
    }
  }
  out.df = (live_r - 1) * (live_c - 1);
  out.p_value = out.df > 0 ? chi_square_sf(out.statistic, static_cast<double>(out.df)) : 1.0;
  return out;
}

struct LinearFit {
  double intercept;
  double slope;
  double slope_std_error;
};

/// Ordinary least squares y = a + b x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit: need >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double b = sxy / sxx;
  const double a = my - b * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - a - b * x[i];
    sse += r * r;
  }
  const double se = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  return {a, b, se};
}

/// |estimate - target| within `sigmas` standard errors (or exactly equal when se = 0).
inline bool within_sigma(double estimate, double target, double std_error, double sigmas = 3.0) {
  return std::abs(estimate - target) <= sigmas * std_error + 1e-15;
}

}  // namespace loopsoup::stats
