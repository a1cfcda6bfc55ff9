#pragma once

// The random graph generated by soup loops and its coalescent partition.
// One loop of length k merges up to k components at once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "loopsoup/loop_measure.hpp"

namespace loopsoup {

struct MergeEvent {
  double time;
  std::size_t loop_length;
  std::size_t roots_merged;  // distinct components joined, >= 1
};

struct Top2 {
  std::int64_t first = 0;
  std::int64_t second = 0;
  bool operator==(const Top2&) const = default;
};

/// Multi-merge union-find over vertices 1..n with a component-size histogram
/// and the two largest component sizes.
class ClusterState {
 public:
  explicit ClusterState(std::int64_t n) {
    if (n < 1) throw DomainError("ClusterState: n must be at least 1");
    reset(n);
  }

  /// Back to n singletons, reusing storage.
  void reset(std::int64_t n) {
    n_ = n;
    parent_.resize(static_cast<std::size_t>(n) + 1);
    std::iota(parent_.begin(), parent_.end(), Vertex{0});
    size_.assign(static_cast<std::size_t>(n) + 1, 1);
    hist_.assign(static_cast<std::size_t>(n) + 1, 0);
    hist_[1] = n;
    top2_ = {1, n >= 2 ? 1 : 0};
    components_ = n;
  }

  std::int64_t n() const { return n_; }
  std::int64_t n_components() const { return components_; }
  Top2 top2() const { return top2_; }

  Vertex find(Vertex x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  std::int64_t component_size(Vertex x) { return size_[find(x)]; }

  /// Number of components of size k.
  std::int64_t hist(std::int64_t k) const {
    return (k >= 1 && k <= n_) ? hist_[static_cast<std::size_t>(k)] : 0;
  }
  /// Nonzero (size, count) pairs in increasing size.
  std::vector<std::pair<std::int64_t, std::int64_t>> histogram() const {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (std::int64_t k = 1; k <= n_; ++k) {
      if (hist_[static_cast<std::size_t>(k)] > 0) out.emplace_back(k, hist_[static_cast<std::size_t>(k)]);
    }
    return out;
  }

  MergeEvent apply_loop(std::span<const Vertex> loop, double time = 0.0) {
    roots_.clear();
    for (Vertex v : loop) {
      if (v == 0 || v > static_cast<std::uint64_t>(n_)) {
        throw DomainError("apply_loop: vertex outside [1, n]");
      }
      roots_.push_back(find(v));
    }
    std::sort(roots_.begin(), roots_.end());
    roots_.erase(std::unique(roots_.begin(), roots_.end()), roots_.end());
    const MergeEvent event{time, loop.size(), roots_.size()};
    if (roots_.size() < 2) return event;

    Vertex big = roots_.front();
    for (Vertex r : roots_) {
      if (size_[r] > size_[big]) big = r;
    }
    std::int64_t merged = 0;
    for (Vertex r : roots_) {
      --hist_[static_cast<std::size_t>(size_[r])];
      merged += size_[r];
      if (r != big) parent_[r] = big;
    }
    size_[big] = merged;
    ++hist_[static_cast<std::size_t>(merged)];
    components_ -= static_cast<std::int64_t>(roots_.size()) - 1;
    update_top2(merged);
    return event;
  }

  /// Component sizes of every vertex, indexed 1..n.
  std::vector<std::int64_t> component_sizes() {
    std::vector<std::int64_t> out(static_cast<std::size_t>(n_) + 1, 0);
    for (Vertex v = 1; v <= static_cast<Vertex>(n_); ++v) out[v] = size_[find(v)];
    return out;
  }

  /// Sorted vertex list of the component of x.
  std::vector<Vertex> component_of(Vertex x) {
    const Vertex root = find(x);
    std::vector<Vertex> out;
    for (Vertex v = 1; v <= static_cast<Vertex>(n_); ++v) {
      if (find(v) == root) out.push_back(v);
    }
    return out;
  }

  /// Canonical partition: block label of each vertex is the smallest vertex of its block.
  std::vector<Vertex> partition_labels() {
    std::vector<Vertex> min_of_root(static_cast<std::size_t>(n_) + 1, 0);
    std::vector<Vertex> out(static_cast<std::size_t>(n_) + 1, 0);
    for (Vertex v = 1; v <= static_cast<Vertex>(n_); ++v) {
      const Vertex r = find(v);
      if (min_of_root[r] == 0) min_of_root[r] = v;
      out[v] = min_of_root[r];
    }
    return out;
  }

 private:
  // The two largest sizes are patched incrementally. The second-largest is
  // rescanned from the histogram only when its bucket empties.
  void update_top2(std::int64_t merged) {
    auto h = [this](std::int64_t k) { return hist_[static_cast<std::size_t>(k)]; };
    auto scan_down = [&](std::int64_t from) {
      while (from > 0 && h(from) == 0) --from;
      return from;
    };
    const std::int64_t prev1 = top2_.first;
    const std::int64_t prev2 = top2_.second;
    if (merged > prev1) {
      top2_.first = merged;
      if (h(prev1) > 0) {
        top2_.second = prev1;
      } else {
        top2_.second = scan_down(std::min(prev2, merged - 1));
      }
      return;
    }
    if (h(prev1) >= 2) {
      top2_.second = prev1;
    } else if (merged > prev2) {
      top2_.second = merged;
    } else if (h(prev2) == 0) {
      top2_.second = scan_down(prev2);
    }
  }

  std::int64_t n_ = 0;
  std::vector<Vertex> parent_;
  std::vector<std::int64_t> size_;
  std::vector<std::int64_t> hist_;
  std::vector<Vertex> roots_;
  Top2 top2_;
  std::int64_t components_ = 0;
};

inline ClusterState new_state(std::int64_t n) { return ClusterState(n); }

inline MergeEvent apply_loop(ClusterState& state, const Loop& loop, double time) {
  return state.apply_loop(loop.vertices(), time);
}

/// Number of components of size k divided by n.
inline double rho_hat(const ClusterState& state, std::int64_t k) {
  if (k < 1) throw DomainError("rho_hat: k must be at least 1");
  return static_cast<double>(state.hist(k)) / static_cast<double>(state.n());
}

/// Number of vertices lying in components of size >= k.
inline std::int64_t z_count(const ClusterState& state, std::int64_t k) {
  if (k < 1) throw DomainError("z_count: k must be at least 1");
  std::int64_t total = 0;
  for (std::int64_t j = k; j <= state.n(); ++j) total += j * state.hist(j);
  return total;
}

struct Snapshot {
  double time;
  std::vector<std::pair<std::int64_t, std::int64_t>> hist;
  Top2 top2;
  std::int64_t n_components;
};

/// Replays the soup and snapshots the partition at each checkpoint; snapshot
/// c reflects exactly the loops with time <= c.
inline std::vector<Snapshot> evolve(const LoopSoup& soup, std::span<const double> checkpoints) {
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (i > 0 && checkpoints[i] < checkpoints[i - 1]) {
      throw DomainError("evolve: checkpoints must be sorted");
    }
    if (!(checkpoints[i] >= 0.0 && checkpoints[i] <= soup.horizon())) {
      throw DomainError("evolve: checkpoint outside [0, horizon]");
    }
  }
  ClusterState state(soup.params().n);
  std::vector<Snapshot> out;
  std::size_t next = 0;
  for (double c : checkpoints) {
    const std::size_t stop = soup.count_up_to(c);
    for (; next < stop; ++next) state.apply_loop(soup.loop(next), soup.time(next));
    out.push_back({c, state.histogram(), state.top2(), state.n_components()});
  }
  return out;
}

/// Probability that the loop-cluster partition at time t is finer than a
/// partition with the given block sizes.
inline double semigroup_prob(const ModelParams& params, double t,
                             std::span<const std::int64_t> blocks) {
  params.validate();
  if (!(t >= 0.0)) throw DomainError("semigroup_prob: t must be nonnegative");
  std::int64_t total = 0;
  for (auto b : blocks) {
    if (b < 1) throw DomainError("semigroup_prob: block sizes must be positive");
    total += b;
  }
  if (total != params.n) throw DomainError("semigroup_prob: block sizes must sum to n");
  double log_p = std::log(params.epsilon / (params.epsilon + 1.0));
  for (auto b : blocks) log_p -= std::log1p(-static_cast<double>(b) * params.transition());
  return std::exp(t * log_p);
}

struct MergeRate {
  double rate;
  double tail_bound;   // bound on the omitted series tail
  std::int64_t terms;  // largest loop length summed
};

/// Rate at which the blocks indexed by `merged` coalesce into one block while
/// the others stay untouched: Σ_k a^k Q(k) / k, where a is the total transition
/// mass of the merged blocks and Q(k) the probability that k draws, each block
/// chosen with weight proportional to its size, visit every merged block.
/// Q is built one block at a time by binomial convolution.
inline MergeRate merge_rate(const ModelParams& params, std::span<const std::int64_t> block_sizes,
                            std::span<const std::size_t> merged, double rel_tol = 1e-13) {
  params.validate();
  if (merged.size() < 2) throw DomainError("merge_rate: at least two blocks must merge");
  std::int64_t total = 0;
  for (auto b : block_sizes) {
    if (b < 1) throw DomainError("merge_rate: block sizes must be positive");
    total += b;
  }
  if (total > params.n) throw DomainError("merge_rate: block sizes exceed n");
  std::vector<double> weights;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    if (merged[i] >= block_sizes.size()) throw DomainError("merge_rate: block index out of range");
    for (std::size_t j = 0; j < i; ++j) {
      if (merged[j] == merged[i]) throw DomainError("merge_rate: repeated block index");
    }
    weights.push_back(static_cast<double>(block_sizes[merged[i]]));
  }
  const double a = std::accumulate(weights.begin(), weights.end(), 0.0) * params.transition();
  const auto L = static_cast<std::int64_t>(weights.size());
  auto tail_after = [a](std::int64_t k) {
    return std::exp(static_cast<double>(k + 1) * std::log(a)) /
           (static_cast<double>(k + 1) * (1.0 - a));
  };

  std::int64_t K = 64;
  for (;;) {
    K = std::max(K, L + 8);
    std::vector<double> log_fact(static_cast<std::size_t>(K) + 1, 0.0);
    for (std::int64_t k = 2; k <= K; ++k) {
      log_fact[static_cast<std::size_t>(k)] =
          log_fact[static_cast<std::size_t>(k - 1)] + std::log(static_cast<double>(k));
    }
    std::vector<double> q(static_cast<std::size_t>(K) + 1, 0.0);
    q[0] = 1.0;
    double acc = 0.0;
    for (double w : weights) {
      const double prev = acc;
      acc += w;
      const double log_p = std::log(w / acc);
      const double log_s = prev > 0.0 ? std::log(prev / acc) : 0.0;
      std::vector<double> next(static_cast<std::size_t>(K) + 1, 0.0);
      for (std::int64_t k = 1; k <= K; ++k) {
        double s = 0.0;
        for (std::int64_t m = 1; m <= k; ++m) {
          const double before = q[static_cast<std::size_t>(k - m)];
          if (before == 0.0) continue;
          if (prev == 0.0 && m != k) continue;
          const double log_binom = log_fact[static_cast<std::size_t>(k)] -
                                   log_fact[static_cast<std::size_t>(m)] -
                                   log_fact[static_cast<std::size_t>(k - m)];
          const double rest = prev == 0.0 ? 0.0 : static_cast<double>(k - m) * log_s;
          s += std::exp(log_binom + static_cast<double>(m) * log_p + rest) * before;
        }
        next[static_cast<std::size_t>(k)] = s;
      }
      q.swap(next);
    }
    double rate = 0.0;
    double ak = 1.0;
    for (std::int64_t k = 1; k < L; ++k) ak *= a;
    for (std::int64_t k = L; k <= K; ++k) {
      ak *= a;
      rate += ak * q[static_cast<std::size_t>(k)] / static_cast<double>(k);
      if (tail_after(k) <= rel_tol * rate) return {rate, tail_after(k), k};
    }
    if (K >= 8192) return {rate, tail_after(K), K};
    K *= 2;
  }
}

}  // namespace loopsoup
