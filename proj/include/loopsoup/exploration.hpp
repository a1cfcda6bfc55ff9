#pragma once

// Component exploration on a loop soup and the coupled branching walk that
// dominates it.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "loopsoup/loop_measure.hpp"

namespace loopsoup {

/// Vertex -> loops inverted index over the loops of a soup with time <= t.
/// Each loop is listed once per distinct vertex it visits.
class LoopIndex {
 public:
  LoopIndex(const LoopSoup& soup, double t) : soup_(&soup), t_(t) {
    if (!(t >= 0.0)) throw DomainError("LoopIndex: t must be nonnegative");
    const auto n = static_cast<std::size_t>(soup.params().n);
    count_ = soup.count_up_to(t);
    start_.assign(n + 2, 0);
    std::vector<Vertex> seen;
    auto distinct = [&](std::size_t i) {
      auto vs = soup.loop(i);
      seen.assign(vs.begin(), vs.end());
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    };
    for (std::size_t i = 0; i < count_; ++i) {
      distinct(i);
      for (Vertex v : seen) ++start_[v + 1];
    }
    for (std::size_t v = 1; v < start_.size(); ++v) start_[v] += start_[v - 1];
    entries_.resize(start_.back());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < count_; ++i) {
      distinct(i);
      for (Vertex v : seen) entries_[fill[v]++] = static_cast<std::uint32_t>(i);
    }
  }

  const LoopSoup& soup() const { return *soup_; }
  double t() const { return t_; }
  std::size_t loop_count() const { return count_; }
  std::int64_t n() const { return soup_->params().n; }

  std::span<const std::uint32_t> loops_through(Vertex x) const {
    return std::span<const std::uint32_t>(entries_).subspan(start_[x], start_[x + 1] - start_[x]);
  }

 private:
  const LoopSoup* soup_;
  double t_;
  std::size_t count_ = 0;
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> entries_;
};

/// Vertices y != x sharing a loop of time <= t with x, among loops that avoid
/// `forbidden`.
inline std::set<Vertex> neighbors(const LoopSoup& soup, double t, Vertex x,
                                  const std::set<Vertex>& forbidden) {
  if (x == 0 || x > static_cast<std::uint64_t>(soup.params().n)) {
    throw DomainError("neighbors: vertex outside [1, n]");
  }
  if (forbidden.contains(x)) throw DomainError("neighbors: x is forbidden");
  std::set<Vertex> out;
  const std::size_t count = soup.count_up_to(t);
  for (std::size_t i = 0; i < count; ++i) {
    const auto loop = soup.loop(i);
    if (std::find(loop.begin(), loop.end(), x) == loop.end()) continue;
    if (std::any_of(loop.begin(), loop.end(), [&](Vertex v) { return forbidden.contains(v); })) {
      continue;
    }
    for (Vertex v : loop) {
      if (v != x) out.insert(v);
    }
  }
  return out;
}

struct ExplorationTrace {
  std::vector<Vertex> order;              // x_1, x_2, ...
  std::vector<std::int64_t> xi;           // newly activated vertices at each step
  std::vector<std::int64_t> active_sizes; // |A_k|
  std::int64_t T = 0;                     // steps taken (stopping step if complete)
  bool complete = true;                   // false when cut short by max_steps
  std::vector<Vertex> component;          // sorted explored vertices

  /// Per-step loop mass: Σ(|ℓ|-1) over loops through x_k avoiding H_{k-1}
  /// (zeta1) and over loops through x_k meeting H_{k-1} (zeta2).
  std::vector<std::int64_t> zeta1;
  std::vector<std::int64_t> zeta2;
};

/// First k with ξ_1 + ... + ξ_k <= k - 1, or 0 if the walk never gets there.
inline std::int64_t walk_stopping_step(std::span<const std::int64_t> increments) {
  std::int64_t sum = 0;
  for (std::size_t k = 1; k <= increments.size(); ++k) {
    sum += increments[k - 1];
    if (sum <= static_cast<std::int64_t>(k) - 1) return static_cast<std::int64_t>(k);
  }
  return 0;
}

/// Reusable explorer over one (soup, t). Per-call scratch is reset in time
/// proportional to the previous exploration's size.
class Explorer {
 public:
  Explorer(const LoopSoup& soup, double t)
      : index_(soup, t),
        state_(static_cast<std::size_t>(soup.params().n) + 1, kNeutral),
        consumed_(index_.loop_count(), 0) {}

  const LoopIndex& index() const { return index_; }

  /// Explores the component of x, smallest active vertex first. With
  /// max_steps > 0 the exploration stops after that many steps.
  ExplorationTrace explore(Vertex x, std::int64_t max_steps = 0) {
    const LoopSoup& soup = index_.soup();
    if (x == 0 || x > static_cast<std::uint64_t>(soup.params().n)) {
      throw DomainError("explore: vertex outside [1, n]");
    }
    reset();
    ExplorationTrace trace;
    std::priority_queue<Vertex, std::vector<Vertex>, std::greater<>> active;
    mark(x, kActive);
    active.push(x);
    while (!active.empty()) {
      if (max_steps > 0 && static_cast<std::int64_t>(trace.order.size()) >= max_steps) {
        trace.complete = false;
        break;
      }
      const Vertex xk = active.top();
      active.pop();
      state_[xk] = kExplored;
      std::int64_t fresh = 0;
      std::int64_t z1 = 0;
      std::int64_t z2 = 0;
      for (std::uint32_t li : index_.loops_through(xk)) {
        const auto loop = soup.loop(li);
        const auto extra = static_cast<std::int64_t>(loop.size()) - 1;
        // A loop is consumed when its first vertex is explored, so unconsumed
        // loops through x_k are exactly those avoiding H_{k-1}.
        if (consumed_[li]) {
          z2 += extra;
          continue;
        }
        consumed_[li] = 1;
        touched_loops_.push_back(li);
        z1 += extra;
        for (Vertex v : loop) {
          if (state_[v] == kNeutral) {
            mark(v, kActive);
            active.push(v);
            ++fresh;
          }
        }
      }
      trace.order.push_back(xk);
      trace.xi.push_back(fresh);
      trace.zeta1.push_back(z1);
      trace.zeta2.push_back(z2);
      trace.active_sizes.push_back(static_cast<std::int64_t>(active.size()));
    }
    trace.T = static_cast<std::int64_t>(trace.order.size());
    trace.component = trace.order;
    std::sort(trace.component.begin(), trace.component.end());
    return trace;
  }

 private:
  static constexpr std::uint8_t kNeutral = 0;
  static constexpr std::uint8_t kActive = 1;
  static constexpr std::uint8_t kExplored = 2;

  void mark(Vertex v, std::uint8_t s) {
    state_[v] = s;
    touched_vertices_.push_back(v);
  }

  void reset() {
    for (Vertex v : touched_vertices_) state_[v] = kNeutral;
    for (std::uint32_t li : touched_loops_) consumed_[li] = 0;
    touched_vertices_.clear();
    touched_loops_.clear();
  }

  LoopIndex index_;
  std::vector<std::uint8_t> state_;
  std::vector<std::uint8_t> consumed_;
  std::vector<Vertex> touched_vertices_;
  std::vector<std::uint32_t> touched_loops_;
};

inline ExplorationTrace explore(const LoopSoup& soup, double t, Vertex x,
                                std::int64_t max_steps = 0) {
  return Explorer(soup, t).explore(x, max_steps);
}

struct CoupledGWTrace {
  std::vector<std::int64_t> zeta1;      // real loops through x_k avoiding H_{k-1}; 0 past T
  std::vector<std::int64_t> zeta2;      // real loops through x_k meeting H_{k-1}; 0 past T
  std::vector<std::int64_t> zeta2_bar;  // auxiliary copy of zeta2; fresh full draws past T
  std::vector<std::int64_t> zeta_bar;   // zeta1 + zeta2_bar
  std::int64_t T = 0;                   // size of the real component
  std::int64_t T_bar = 0;               // stopping step of the zeta_bar walk (lower bound if censored)
  bool censored = false;
};

/// Draws of Σ(|ℓ|-1) over Poisson loop families through a fixed vertex.
class ThroughVertexDraws {
 public:
  explicit ThroughVertexDraws(const ModelParams& params)
      : params_(params),
        beta_(beta_vertex(params)),
        lengths_(params.length_ratio(), beta_,
                 [n = params.n](std::int64_t m) { return thin_through(n, m); }) {}

  double beta() const { return beta_; }

  /// Loops through x over time t: CPois(t·β) total of (|ℓ|-1).
  std::int64_t full(Rng& rng, double t) const {
    const std::int64_t count = sample_poisson(rng, t * beta_);
    std::int64_t sum = 0;
    for (std::int64_t i = 0; i < count; ++i) sum += lengths_(rng) - 1;
    return sum;
  }

  /// Loops through x that also meet a set of h other vertices. Lengths come
  /// from the through-x law thinned by the probability that a length-m loop
  /// through x meets the set, applied by rejection.
  std::int64_t hitting(Rng& rng, double t, std::int64_t h) const {
    if (h == 0) return 0;
    const std::int64_t count = sample_poisson(rng, t * mu_hit_set_and_vertex(params_, h));
    std::int64_t sum = 0;
    for (std::int64_t i = 0; i < count; ++i) {
      for (;;) {
        const std::int64_t m = lengths_(rng);
        const double accept =
            thin_through_hitting(params_.n, h, m) / thin_through(params_.n, m);
        if (rng.uniform01() < accept) {
          sum += m - 1;
          break;
        }
      }
    }
    return sum;
  }

 private:
  ModelParams params_;
  double beta_;
  LengthSampler lengths_;
};

/// Couples the exploration of C(x) with a walk whose increments are iid
/// CPois(t·β, ν). The auxiliary stream re-randomizes the hitting part
/// independently at every step.
inline CoupledGWTrace couple_gw(const ExplorationTrace& exploration, const ThroughVertexDraws& draws,
                                double t, std::int64_t cap, Rng& aux) {
  CoupledGWTrace out;
  out.T = exploration.T;
  std::int64_t position = 1;  // 1 + Σ ζ̄_i - k after k steps
  for (std::int64_t k = 1;; ++k) {
    std::int64_t z1 = 0;
    std::int64_t z2 = 0;
    std::int64_t z2_bar = 0;
    if (k <= exploration.T) {
      z1 = exploration.zeta1[static_cast<std::size_t>(k - 1)];
      z2 = exploration.zeta2[static_cast<std::size_t>(k - 1)];
      z2_bar = draws.hitting(aux, t, k - 1);
    } else {
      z2_bar = draws.full(aux, t);
    }
    out.zeta1.push_back(z1);
    out.zeta2.push_back(z2);
    out.zeta2_bar.push_back(z2_bar);
    out.zeta_bar.push_back(z1 + z2_bar);
    position += z1 + z2_bar - 1;
    if (position <= 0) {
      out.T_bar = k;
      return out;
    }
    // Each step lowers the position by at most one.
    if (k >= cap || position > cap - k) {
      out.T_bar = k;
      out.censored = true;
      return out;
    }
  }
}

inline CoupledGWTrace couple_gw(const LoopSoup& soup, double t, Vertex x, std::uint64_t aux_seed,
                                std::uint64_t aux_stream = 0, std::int64_t cap = 0) {
  if (cap <= 0) cap = 10 * soup.params().n;
  const ExplorationTrace trace = explore(soup, t, x);
  const ThroughVertexDraws draws(soup.params());
  Rng aux(aux_seed, aux_stream);
  return couple_gw(trace, draws, t, cap, aux);
}

inline void write_trace_csv(std::ostream& os, const ExplorationTrace& trace) {
  os << "step,x_k,xi_k,active_size\n";
  for (std::size_t k = 0; k < trace.order.size(); ++k) {
    os << (k + 1) << ',' << trace.order[k] << ',' << trace.xi[k] << ','
       << trace.active_sizes[k] << '\n';
  }
}

inline nlohmann::json trace_summary(const ExplorationTrace& trace) {
  return {{"T", trace.T},
          {"component_size", static_cast<std::int64_t>(trace.component.size())},
          {"censored", !trace.complete}};
}

}  // namespace loopsoup
