#pragma once

// Loop measure on the complete graph with one self-loop per vertex, its
// closed-form masses, and exact samplers for the Poissonian loop ensemble.
//
// A based loop (x_1, ..., x_k) has weight 1 / (k (n(ε+1))^k); summed over the
// n^k vertex tuples of length k this gives the length law (1/k)(ε+1)^{-k}.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loopsoup/numeric.hpp"
#include "loopsoup/rng.hpp"

namespace loopsoup {

using Vertex = std::uint32_t;  // 1-based vertex id

struct ModelParams {
  std::int64_t n = 2;
  double epsilon = 1.0;

  ModelParams() = default;
  ModelParams(std::int64_t vertices, double eps) : n(vertices), epsilon(eps) { validate(); }

  void validate() const {
    if (n < 2) throw DomainError("ModelParams: n must be at least 2");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw DomainError("ModelParams: epsilon must be a positive finite real");
    }
  }
  /// Ratio 1/(ε+1) of the length law.
  double length_ratio() const { return 1.0 / (epsilon + 1.0); }
  /// Uniform transition probability P_{x,y} = 1/(n(ε+1)).
  double transition() const { return 1.0 / (static_cast<double>(n) * (epsilon + 1.0)); }
  double killing_intensity() const { return static_cast<double>(n) * epsilon; }

  bool operator==(const ModelParams&) const = default;
};

/// Rotate `vertices` in place to its lexicographically minimal rotation.
inline void canonicalize(std::span<Vertex> vertices) {
  const std::size_t k = vertices.size();
  if (k < 2) return;
  std::size_t best = 0;
  for (std::size_t start = 1; start < k; ++start) {
    for (std::size_t i = 0; i < k; ++i) {
      const Vertex a = vertices[(start + i) % k];
      const Vertex b = vertices[(best + i) % k];
      if (a != b) {
        if (a < b) best = start;
        break;
      }
    }
  }
  std::rotate(vertices.begin(), vertices.begin() + static_cast<std::ptrdiff_t>(best),
              vertices.end());
}

/// An unrooted discrete loop, stored as its minimal rotation.
class Loop {
 public:
  explicit Loop(std::vector<Vertex> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 2) throw DomainError("Loop: length must be at least 2");
    for (Vertex v : vertices_) {
      if (v == 0) throw DomainError("Loop: vertex ids are 1-based");
    }
    canonicalize(vertices_);
  }

  std::span<const Vertex> vertices() const { return vertices_; }
  std::size_t length() const { return vertices_.size(); }

  /// μ* weight of one based representative.
  double based_weight(const ModelParams& params) const {
    return std::exp(-std::log(static_cast<double>(length())) -
                    static_cast<double>(length()) *
                        std::log(static_cast<double>(params.n) * (params.epsilon + 1.0)));
  }

  auto operator<=>(const Loop&) const = default;

 private:
  std::vector<Vertex> vertices_;
};

struct TimedLoop {
  double time;
  Loop loop;
};

/// Time-stamped loop ensemble on [n] up to a horizon. Loops are stored flat:
/// loop i occupies vertices_[offsets_[i], offsets_[i+1]).
class LoopSoup {
 public:
  LoopSoup(ModelParams params, double horizon, std::uint64_t seed, std::uint64_t stream,
           std::string generator_id, std::vector<double> times,
           std::vector<std::uint32_t> offsets, std::vector<Vertex> vertices)
      : params_(params),
        horizon_(horizon),
        seed_(seed),
        stream_(stream),
        generator_id_(std::move(generator_id)),
        times_(std::move(times)),
        offsets_(std::move(offsets)),
        vertices_(std::move(vertices)) {
    validate();
  }

  /// Builds a soup from explicit loops; entries are ordered by time with ties
  /// kept in insertion order.
  static LoopSoup from_loops(ModelParams params, double horizon, std::vector<TimedLoop> loops,
                             std::uint64_t seed = 0, std::string generator_id = "explicit") {
    std::stable_sort(loops.begin(), loops.end(),
                     [](const TimedLoop& a, const TimedLoop& b) { return a.time < b.time; });
    std::vector<double> times;
    std::vector<std::uint32_t> offsets{0};
    std::vector<Vertex> vertices;
    for (const auto& entry : loops) {
      times.push_back(entry.time);
      auto vs = entry.loop.vertices();
      vertices.insert(vertices.end(), vs.begin(), vs.end());
      offsets.push_back(static_cast<std::uint32_t>(vertices.size()));
    }
    return LoopSoup(params, horizon, seed, 0, std::move(generator_id), std::move(times),
                    std::move(offsets), std::move(vertices));
  }

  const ModelParams& params() const { return params_; }
  double horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  const std::string& generator_id() const { return generator_id_; }

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double time(std::size_t i) const { return times_[i]; }
  std::span<const Vertex> loop(std::size_t i) const {
    return std::span<const Vertex>(vertices_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  /// Number of loops with time <= t.
  std::size_t count_up_to(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) -
                                    times_.begin());
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::uint32_t>& offsets() const { return offsets_; }
  const std::vector<Vertex>& flat_vertices() const { return vertices_; }

  bool operator==(const LoopSoup&) const = default;

 private:
  void validate() const {
    params_.validate();
    if (!(horizon_ >= 0.0)) throw DomainError("LoopSoup: horizon must be nonnegative");
    if (offsets_.size() != times_.size() + 1 || offsets_.front() != 0 ||
        offsets_.back() != vertices_.size()) {
      throw DomainError("LoopSoup: inconsistent loop offsets");
    }
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (i > 0 && times_[i] < times_[i - 1]) throw DomainError("LoopSoup: times must be sorted");
      if (!(times_[i] >= 0.0 && times_[i] <= horizon_)) {
        throw DomainError("LoopSoup: loop time outside [0, horizon]");
      }
      if (offsets_[i + 1] < offsets_[i] + 2) throw DomainError("LoopSoup: loop shorter than 2");
    }
    const auto n = static_cast<std::uint64_t>(params_.n);
    for (Vertex v : vertices_) {
      if (v == 0 || v > n) throw DomainError("LoopSoup: vertex id outside [1, n]");
    }
  }

  ModelParams params_;
  double horizon_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::string generator_id_;
  std::vector<double> times_;
  std::vector<std::uint32_t> offsets_;
  std::vector<Vertex> vertices_;
};

// ---------------------------------------------------------------------------
// Closed-form masses
// ---------------------------------------------------------------------------

/// μ of loops contained in a vertex set of size n - v.
inline double mu_restricted_total(const ModelParams& params, std::int64_t v) {
  params.validate();
  if (v < 0 || v >= params.n) throw DomainError("mu_restricted_total: need 0 <= v <= n-1");
  const double a = static_cast<double>(params.n - v) * params.transition();
  return numeric::log_series_tail2(a);
}

/// β_{n,ε}: μ of loops through a fixed vertex.
inline double beta_vertex(const ModelParams& params) {
  params.validate();
  const double n = static_cast<double>(params.n);
  return std::log1p(1.0 / (n * params.epsilon)) - 1.0 / (n * (params.epsilon + 1.0));
}

/// μ of loops through x that avoid a set V of v other vertices.
inline double beta_vertex_avoiding(const ModelParams& params, std::int64_t v) {
  params.validate();
  if (v < 0 || v > params.n - 2) throw DomainError("beta_vertex_avoiding: need 0 <= v <= n-2");
  const double n = static_cast<double>(params.n);
  return std::log1p(1.0 / (n * params.epsilon + static_cast<double>(v))) -
         1.0 / (n * (params.epsilon + 1.0));
}

/// μ(F_{A,x}): loops through x that also meet a set A of a vertices (x ∉ A).
inline double mu_hit_set_and_vertex(const ModelParams& params, std::int64_t a) {
  params.validate();
  if (a < 0 || a > params.n - 1) throw DomainError("mu_hit_set_and_vertex: need 0 <= a <= n-1");
  const double ne = params.killing_intensity();
  const double ad = static_cast<double>(a);
  return std::log1p(ad / (ne * (ne + ad + 1.0)));
}

/// μ of loops meeting both of two disjoint sets of sizes f1 and f2.
inline double mu_linking(const ModelParams& params, std::int64_t f1, std::int64_t f2) {
  params.validate();
  if (f1 < 1 || f2 < 1 || f1 + f2 > params.n) {
    throw DomainError("mu_linking: need f1, f2 >= 1 and f1 + f2 <= n");
  }
  const double ne = params.killing_intensity();
  const double x1 = static_cast<double>(f1) / ne;
  const double x2 = static_cast<double>(f2) / ne;
  return -std::log1p(-(x1 * x2) / ((1.0 + x1) * (1.0 + x2)));
}

/// Probability that no loop of the soup at time n·t meets both sets.
inline double prob_no_loop_linking(const ModelParams& params, std::int64_t f1, std::int64_t f2,
                                   double t) {
  if (!(t >= 0.0)) throw DomainError("prob_no_loop_linking: t must be nonnegative");
  return std::exp(-static_cast<double>(params.n) * t * mu_linking(params, f1, f2));
}

/// Upper bound on the probability that loops through x at time t repeat a
/// vertex or intersect away from x.
inline double anomaly_bound(const ModelParams& params, double t) {
  params.validate();
  if (!(t >= 0.0)) throw DomainError("anomaly_bound: t must be nonnegative");
  const double n = static_cast<double>(params.n);
  const double e = params.epsilon;
  return t * (e + 1.0) / (n * n * e * e * e) + t * t / (n * n * n * e * e * e * e);
}

/// E(u^{S_{t,x}}) where S_{t,x} counts the non-x positions of loops through x.
inline double s_pgf(const ModelParams& params, double t, double u) {
  params.validate();
  const double n = static_cast<double>(params.n);
  const double ne = params.killing_intensity();
  const double denom = n * (params.epsilon + 1.0) - u * (n - 1.0);
  if (!(denom > 1.0)) throw DomainError("s_pgf: u outside the convergence domain");
  return std::pow(1.0 + 1.0 / ne, -t) * std::pow(1.0 - 1.0 / denom, -t);
}

/// E(S_{t,x}(S_{t,x} - 1)).
inline double s_second_factorial_moment(const ModelParams& params, double t) {
  params.validate();
  const double n = static_cast<double>(params.n);
  const double ne = params.killing_intensity();
  return t * (n - 1.0) * (n - 1.0) * (2.0 * ne + t + 1.0) / (ne * ne * (ne + 1.0) * (ne + 1.0));
}

/// E(S_{t,x}).
inline double s_mean(const ModelParams& params, double t) {
  params.validate();
  const double n = static_cast<double>(params.n);
  const double ne = params.killing_intensity();
  return t * (n - 1.0) / (ne * (ne + 1.0));
}

// Length thinning factors: the fraction of the n^m vertex tuples of length m
// that satisfy a vertex constraint.

/// Tuples of length m that contain x.
inline double thin_through(std::int64_t n, std::int64_t m) {
  return -std::expm1(static_cast<double>(m) * std::log1p(-1.0 / static_cast<double>(n)));
}

/// Tuples of length m that contain x and avoid a set of v other vertices.
inline double thin_through_avoiding(std::int64_t n, std::int64_t v, std::int64_t m) {
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  return std::exp(md * std::log1p(-static_cast<double>(v) / nd)) *
         -std::expm1(md * std::log1p(-1.0 / (nd - static_cast<double>(v))));
}

/// Tuples of length m that contain x and meet a set of h other vertices.
inline double thin_through_hitting(std::int64_t n, std::int64_t h, std::int64_t m) {
  if (h == 0) return 0.0;
  return std::max(0.0, thin_through(n, m) - thin_through_avoiding(n, h, m));
}

struct OffspringLawExact {
  double rate;              // μ of loops through x avoiding V
  std::vector<double> pmf;  // pmf[j] = ν(j) for j >= 1; pmf[0] = 0
  double truncated_mass;    // mass beyond the table, bounded geometrically
};

/// Law of Σ(|ℓ|-1) over loops through x avoiding v other vertices: compound
/// Poisson with per-unit-time rate `rate` and jump law `pmf`.
inline OffspringLawExact offspring_law_exact(const ModelParams& params, std::int64_t v,
                                             double tail_tol = 1e-16) {
  const double rate = beta_vertex_avoiding(params, v);
  const double r = params.length_ratio();
  OffspringLawExact law{rate, {0.0}, 0.0};
  double rj = r;  // r^{j+1}
  double sum = 0.0;
  for (std::int64_t j = 1;; ++j) {
    rj *= r;
    const double p = thin_through_avoiding(params.n, v, j + 1) * rj /
                     (static_cast<double>(j + 1) * rate);
    law.pmf.push_back(p);
    sum += p;
    // Remaining mass is at most Σ_{m>j+1} r^m/(m·rate) <= r^{j+2}/((j+2)(1-r)rate).
    const double tail = rj * r / (static_cast<double>(j + 2) * (1.0 - r) * rate);
    if (tail < tail_tol) {
      law.truncated_mass = tail;
      break;
    }
  }
  return law;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Exact sampler for loop lengths m >= 2 with weight g(m) r^m / m, where
/// g(m) ∈ [0, 1] is a thinning factor and `total_mass` the exact sum.
/// Lengths up to a cap use inverse CDF on cached prefix sums; the tail beyond
/// the cap (mass below 1e-16 of the total) is drawn by rejection.
class LengthSampler {
 public:
  using Thinning = std::function<double(std::int64_t)>;

  LengthSampler(double ratio, double total_mass, Thinning thinning = {})
      : ratio_(ratio), total_(total_mass), thinning_(std::move(thinning)) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("LengthSampler: ratio must be in (0,1)");
    if (!(total_mass > 0.0)) throw DomainError("LengthSampler: total mass must be positive");
    double rm = ratio_;
    double cumulative = 0.0;
    for (std::int64_t m = 2;; ++m) {
      rm *= ratio_;
      cumulative += weight_from_power(m, rm);
      cdf_.push_back(cumulative);
      const double tail = rm * ratio_ / (static_cast<double>(m + 1) * (1.0 - ratio_));
      if (tail < 1e-17 * total_ || m > 100000) {
        cap_ = m;
        break;
      }
    }
  }

  double total_mass() const { return total_; }
  std::int64_t cap() const { return cap_; }

  /// Normalized probability of length m.
  double pmf(std::int64_t m) const {
    if (m < 2) return 0.0;
    return weight_from_power(m, std::pow(ratio_, static_cast<double>(m))) / total_;
  }

  std::int64_t operator()(Rng& rng) const {
    const double u = rng.uniform01() * total_;
    if (u < cdf_.back()) {
      const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      return 2 + (it - cdf_.begin());
    }
    return sample_tail(rng);
  }

 private:
  double weight_from_power(std::int64_t m, double rm) const {
    const double g = thinning_ ? thinning_(m) : 1.0;
    return g * rm / static_cast<double>(m);
  }

  std::int64_t sample_tail(Rng& rng) const {
    const double log_r = std::log(ratio_);
    for (;;) {
      const double g = std::floor(std::log(rng.uniform_open0()) / log_r);
      const auto m = cap_ + 1 + static_cast<std::int64_t>(g);
      const double accept = static_cast<double>(cap_ + 1) / static_cast<double>(m) *
                            (thinning_ ? thinning_(m) : 1.0);
      if (rng.uniform01() < accept) return m;
    }
  }

  double ratio_;
  double total_;
  Thinning thinning_;
  std::vector<double> cdf_;
  std::int64_t cap_ = 2;
};

inline std::int64_t sample_poisson(Rng& rng, double mean) {
  if (!(mean >= 0.0)) throw DomainError("sample_poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

/// Reusable sampler of full soups for fixed parameters.
class SoupSampler {
 public:
  explicit SoupSampler(const ModelParams& params)
      : params_(params),
        lengths_(params.length_ratio(), mu_restricted_total(params, 0)) {}

  const ModelParams& params() const { return params_; }
  const LengthSampler& lengths() const { return lengths_; }

  LoopSoup sample(double horizon, std::uint64_t seed, std::uint64_t stream = 0) const {
    if (!(horizon >= 0.0)) throw DomainError("sample_soup: horizon must be nonnegative");
    Rng rng(seed, stream);
    const std::int64_t count = sample_poisson(rng, horizon * lengths_.total_mass());
    return fill(rng, horizon, seed, stream, count, [&](Rng& g) { return lengths_(g); });
  }

  /// Soup of loops of length exactly j: count ~ Poisson(horizon / (j (ε+1)^j)).
  LoopSoup sample_fixed_length(std::int64_t j, double horizon, std::uint64_t seed,
                               std::uint64_t stream = 0) const {
    if (j < 2) throw DomainError("sample_fixed_length_soup: j must be at least 2");
    if (!(horizon >= 0.0)) throw DomainError("sample_fixed_length_soup: horizon must be nonnegative");
    Rng rng(seed, stream);
    const double mass = std::pow(params_.length_ratio(), static_cast<double>(j)) /
                        static_cast<double>(j);
    const std::int64_t count = sample_poisson(rng, horizon * mass);
    return fill(rng, horizon, seed, stream, count, [j](Rng&) { return j; });
  }

 private:
  template <class LengthFn>
  LoopSoup fill(Rng& rng, double horizon, std::uint64_t seed, std::uint64_t stream,
                std::int64_t count, LengthFn&& next_length) const {
    std::vector<double> times(static_cast<std::size_t>(count));
    for (auto& t : times) t = horizon * rng.uniform01();
    std::sort(times.begin(), times.end());
    std::vector<std::uint32_t> offsets;
    offsets.reserve(times.size() + 1);
    offsets.push_back(0);
    std::vector<Vertex> vertices;
    vertices.reserve(times.size() * 3);
    const auto n = static_cast<std::uint64_t>(params_.n);
    for (std::int64_t i = 0; i < count; ++i) {
      const std::int64_t len = next_length(rng);
      const std::size_t begin = vertices.size();
      for (std::int64_t s = 0; s < len; ++s) {
        vertices.push_back(static_cast<Vertex>(1 + rng.bounded(n)));
      }
      canonicalize(std::span<Vertex>(vertices).subspan(begin));
      offsets.push_back(static_cast<std::uint32_t>(vertices.size()));
    }
    return LoopSoup(params_, horizon, seed, stream, std::string(kGeneratorId), std::move(times),
                    std::move(offsets), std::move(vertices));
  }

  ModelParams params_;
  LengthSampler lengths_;
};

inline LoopSoup sample_soup(const ModelParams& params, double horizon, std::uint64_t seed,
                            std::uint64_t stream = 0) {
  return SoupSampler(params).sample(horizon, seed, stream);
}

inline LoopSoup sample_fixed_length_soup(const ModelParams& params, std::int64_t j,
                                         double horizon, std::uint64_t seed,
                                         std::uint64_t stream = 0) {
  return SoupSampler(params).sample_fixed_length(j, horizon, seed, stream);
}

/// Per-vertex rate of length-j loops through x.
inline double beta_vertex_fixed_length(const ModelParams& params, std::int64_t j) {
  params.validate();
  if (j < 2) throw DomainError("beta_vertex_fixed_length: j must be at least 2");
  return std::pow(params.length_ratio(), static_cast<double>(j)) / static_cast<double>(j) *
         thin_through(params.n, j);
}

}  // namespace loopsoup
