#pragma once

// Monte Carlo experiments comparing the loop-soup random graph with its
// branching-process and coagulation limits. Each command returns plot-ready
// tables plus named pass/fail assertions.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "loopsoup/coagulation.hpp"
#include "loopsoup/exploration.hpp"
#include "loopsoup/graph_process.hpp"
#include "loopsoup/gw_analytics.hpp"
#include "loopsoup/loop_measure.hpp"
#include "loopsoup/rng.hpp"
#include "loopsoup/stats.hpp"

namespace loopsoup {

inline constexpr const char* kVersion = "1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command;
  std::vector<std::int64_t> n{1000};
  double eps = 1.0;
  std::vector<double> t{0.5};
  std::int64_t replicas = 1000;
  std::uint64_t seed = 1;
  std::int64_t kmax = 10;
  std::int64_t j = 2;
  double a_factor = 1.5;       // subcritical threshold a = a_factor / h(t)
  double q_tolerance = 0.01;   // supercritical |c1/n - (1-q)| band
  double q_fraction = 0.95;    // required fraction of replicas inside the band
  double c2_log_factor = 20.0; // supercritical bound c2 <= factor · log n
  double c1 = 0.0;             // intermediate-gap window start c1·log n; 0 selects 1/I_t
  double c2 = 0.5;             // intermediate-gap slope
  double beta = 0.6;           // intermediate-gap window end n^beta
  double level = 0.01;         // chi-square significance level
  double slope_lo = -1.3;
  double slope_hi = -0.7;
  unsigned threads = 0;        // 0: hardware concurrency

  static ExperimentConfig from_json(const nlohmann::json& j, std::string command = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    c.command = std::move(command);
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "command") {
          if (c.command.empty()) c.command = value.get<std::string>();
        } else if (key == "n") {
          c.n = value.is_array() ? value.get<std::vector<std::int64_t>>()
                                 : std::vector<std::int64_t>{value.get<std::int64_t>()};
        } else if (key == "t") {
          c.t = value.is_array() ? value.get<std::vector<double>>()
                                 : std::vector<double>{value.get<double>()};
        } else if (key == "eps") {
          c.eps = value.get<double>();
        } else if (key == "replicas") {
          c.replicas = value.get<std::int64_t>();
        } else if (key == "seed") {
          c.seed = value.get<std::uint64_t>();
        } else if (key == "kmax") {
          c.kmax = value.get<std::int64_t>();
        } else if (key == "j") {
          c.j = value.get<std::int64_t>();
        } else if (key == "a_factor") {
          c.a_factor = value.get<double>();
        } else if (key == "q_tolerance") {
          c.q_tolerance = value.get<double>();
        } else if (key == "q_fraction") {
          c.q_fraction = value.get<double>();
        } else if (key == "c2_log_factor") {
          c.c2_log_factor = value.get<double>();
        } else if (key == "c1") {
          c.c1 = value.get<double>();
        } else if (key == "c2") {
          c.c2 = value.get<double>();
        } else if (key == "beta") {
          c.beta = value.get<double>();
        } else if (key == "level") {
          c.level = value.get<double>();
        } else if (key == "slope_lo") {
          c.slope_lo = value.get<double>();
        } else if (key == "slope_hi") {
          c.slope_hi = value.get<double>();
        } else if (key == "threads") {
          c.threads = value.get<unsigned>();
        } else {
          throw ConfigError("unknown config key '" + key + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
    c.validate();
    return c;
  }

  void validate() const {
    if (replicas < 1) throw ConfigError("replicas must be at least 1");
    if (n.empty() || t.empty()) throw ConfigError("n and t must be nonempty");
    for (auto v : n) ModelParams(v, eps);
    for (double v : t) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("t must be finite and >= 0");
    }
    if (kmax < 1) throw ConfigError("kmax must be at least 1");
    if (j < 2) throw ConfigError("j must be at least 2");
  }

  nlohmann::json to_json() const {
    return {{"command", command}, {"n", n},
            {"eps", eps},         {"t", t},
            {"replicas", replicas}, {"seed", seed},
            {"kmax", kmax},       {"j", j},
            {"a_factor", a_factor}, {"q_tolerance", q_tolerance},
            {"q_fraction", q_fraction}, {"c2_log_factor", c2_log_factor},
            {"c1", c1},           {"c2", c2},
            {"beta", beta},       {"level", level},
            {"slope_lo", slope_lo}, {"slope_hi", slope_hi}};
  }
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Assertion {
  std::string name;
  bool passed;
  std::string detail;
};

struct ExperimentResult {
  std::string command;
  std::vector<Table> tables;
  std::vector<Assertion> assertions;
  std::vector<std::string> warnings;
  nlohmann::json summary = nlohmann::json::object();

  bool all_passed() const {
    return std::all_of(assertions.begin(), assertions.end(),
                       [](const Assertion& a) { return a.passed; });
  }
  const Table& table(const std::string& name) const {
    for (const auto& t : tables) {
      if (t.name == name) return t;
    }
    throw std::out_of_range("no table named " + name);
  }
};

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_table_csv(std::ostream& os, const Table& table,
                            const nlohmann::json& config_echo) {
  os << "# config " << config_echo.dump() << '\n';
  os << "# generator_id " << kGeneratorId << " version " << kVersion << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    os << (i ? "," : "") << table.columns[i];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Replica execution
// ---------------------------------------------------------------------------

inline unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(scratch, r) for r in [0, R) over a worker pool; each worker owns
/// one scratch object from make(). Results are stored by replica index.
template <class Result, class MakeScratch, class Fn>
std::vector<Result> run_replicas(std::int64_t R, unsigned threads, MakeScratch make, Fn fn) {
  std::vector<Result> out(static_cast<std::size_t>(R));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      auto scratch = make();
      for (;;) {
        const std::int64_t r = next.fetch_add(1);
        if (r >= R) break;
        out[static_cast<std::size_t>(r)] = fn(scratch, r);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(R);
    }
  };
  const unsigned w = std::min<unsigned>(worker_count(threads), static_cast<unsigned>(std::max<std::int64_t>(R, 1)));
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Replays every loop of the soup into `state`.
inline void build_partition(const LoopSoup& soup, ClusterState& state) {
  state.reset(soup.params().n);
  for (std::size_t i = 0; i < soup.size(); ++i) state.apply_loop(soup.loop(i), soup.time(i));
}

/// Number of vertices in components of size <= k, for k = 1..kmax.
inline std::vector<std::int64_t> small_component_counts(const ClusterState& state,
                                                        std::int64_t kmax) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(kmax));
  std::int64_t acc = 0;
  for (std::int64_t k = 1; k <= kmax; ++k) {
    acc += k * state.hist(k);
    out[static_cast<std::size_t>(k - 1)] = acc;
  }
  return out;
}

struct CdfComparison {
  std::vector<double> f_hat;
  std::vector<double> f;
  std::vector<double> se;
  double sup_dev = 0.0;
  std::int64_t k_at_sup = 1;
};

/// All-vertex CDF estimate (1/(nR)) Σ_r #{x : |C(x)| <= k} against `f`.
inline CdfComparison compare_cdf(const std::vector<std::vector<std::int64_t>>& counts,
                                 std::int64_t n, const std::vector<double>& f) {
  CdfComparison c;
  c.f = f;
  const std::size_t K = f.size();
  for (std::size_t k = 0; k < K; ++k) {
    stats::Welford w;
    for (const auto& row : counts) w.add(static_cast<double>(row[k]) / static_cast<double>(n));
    c.f_hat.push_back(w.mean());
    c.se.push_back(w.std_error());
    const double d = std::abs(w.mean() - f[k]);
    if (d > c.sup_dev) {
      c.sup_dev = d;
      c.k_at_sup = static_cast<std::int64_t>(k) + 1;
    }
  }
  return c;
}

inline std::vector<double> progeny_cdf(double eps, double t, std::int64_t kmax) {
  std::vector<double> f;
  double acc = 0.0;
  for (std::int64_t k = 1; k <= kmax; ++k) {
    acc += progeny_pmf(1, eps, t, k);
    f.push_back(acc);
  }
  return f;
}

inline std::vector<double> fixed_length_cdf(std::int64_t j, double t, std::int64_t kmax) {
  std::vector<double> f;
  double acc = 0.0;
  for (std::int64_t k = 1; k <= kmax; ++k) {
    acc += fixed_length_progeny_pmf(1, j, t, k);
    f.push_back(acc);
  }
  return f;
}

/// Log-log slope of y against n, or NaN when some y is not positive.
inline stats::LinearFit loglog_fit(const std::vector<std::int64_t>& n, const std::vector<double>& y) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(y[i] > 0.0)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan, nan};
    }
    lx.push_back(std::log(static_cast<double>(n[i])));
    ly.push_back(std::log(y[i]));
  }
  return stats::linear_fit(lx, ly);
}

namespace detail {

inline std::string fmt(double v) { return format_number(v); }

inline void slope_assertion(ExperimentResult& res, const std::string& name,
                            const stats::LinearFit& fit, double lo, double hi) {
  const bool ok = std::isfinite(fit.slope) && fit.slope >= lo && fit.slope <= hi;
  res.assertions.push_back({name, ok,
                            "slope " + fmt(fit.slope) + " (se " + fmt(fit.slope_std_error) +
                                "), accepted range [" + fmt(lo) + ", " + fmt(hi) + "]"});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Law of |C(x)| at horizon n·t against the total progeny law, over a grid of n.
inline ExperimentResult cmd_component_law(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "component-law";
  const double t = cfg.t.front();
  const auto f = progeny_cdf(cfg.eps, t, cfg.kmax);
  Table detail{"cdf", {"n", "k", "cdf_hat", "cdf", "diff", "se"}, {}};
  Table summary{"deviation", {"n", "sup_dev", "k_at_sup", "se_at_sup"}, {}};
  std::vector<double> devs;
  for (std::size_t ci = 0; ci < cfg.n.size(); ++ci) {
    const std::int64_t n = cfg.n[ci];
    const SoupSampler sampler(ModelParams(n, cfg.eps));
    const double horizon = static_cast<double>(n) * t;
    auto counts = run_replicas<std::vector<std::int64_t>>(
        cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
        [&](ClusterState& state, std::int64_t r) {
          build_partition(sampler.sample(horizon, cfg.seed, replica_stream(ci, static_cast<std::uint64_t>(r))), state);
          return small_component_counts(state, cfg.kmax);
        });
    const auto cmp = compare_cdf(counts, n, f);
    for (std::int64_t k = 1; k <= cfg.kmax; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      detail.rows.push_back({static_cast<double>(n), static_cast<double>(k), cmp.f_hat[i], f[i],
                             cmp.f_hat[i] - f[i], cmp.se[i]});
    }
    const double se = cmp.se[static_cast<std::size_t>(cmp.k_at_sup - 1)];
    summary.rows.push_back({static_cast<double>(n), cmp.sup_dev,
                            static_cast<double>(cmp.k_at_sup), se});
    devs.push_back(cmp.sup_dev);
    if (t > 0.0 && cmp.sup_dev < 3.0 * se) {
      const double need = static_cast<double>(cfg.replicas) * std::pow(3.0 * se / std::max(cmp.sup_dev, 1e-300), 2.0);
      res.warnings.push_back("n=" + std::to_string(n) + ": deviation " + detail::fmt(cmp.sup_dev) +
                             " is within 3 standard errors; about " +
                             detail::fmt(std::ceil(need)) + " replicas needed to resolve it");
    }
  }
  res.tables = {summary, detail};
  if (t == 0.0) {
    const bool zero = std::all_of(devs.begin(), devs.end(), [](double d) { return d == 0.0; });
    res.assertions.push_back({"t=0 deviation is exactly zero", zero, ""});
  } else if (cfg.n.size() >= 2) {
    const auto fit = loglog_fit(cfg.n, devs);
    res.summary["slope"] = fit.slope;
    res.summary["slope_se"] = fit.slope_std_error;
    detail::slope_assertion(res, "CDF deviation decays like a power of n", fit, cfg.slope_lo,
                            cfg.slope_hi);
  }
  res.summary["deviations"] = devs;
  return res;
}

/// Joint law of (|C(1)|, |C(2)|) against the product of progeny laws.
inline ExperimentResult cmd_two_components(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "two-components";
  const std::int64_t n = cfg.n.front();
  const double t = cfg.t.front();
  const SoupSampler sampler(ModelParams(n, cfg.eps));
  const double horizon = static_cast<double>(n) * t;
  struct Pair {
    std::int64_t s1 = 0;
    std::int64_t s2 = 0;
    bool same = false;
  };
  const auto pairs = run_replicas<Pair>(
      cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
      [&](ClusterState& state, std::int64_t r) {
        build_partition(sampler.sample(horizon, cfg.seed, replica_stream(0, static_cast<std::uint64_t>(r))), state);
        return Pair{state.component_size(1), state.component_size(2), state.find(1) == state.find(2)};
      });
  // Cells 1..kmax and a lumped cell for larger sizes.
  const std::int64_t K = cfg.kmax;
  const auto cells = static_cast<std::size_t>(K + 1);
  auto cell = [&](std::int64_t s) { return static_cast<std::size_t>(std::min(s, K + 1) - 1); };
  std::vector<double> marginal(cells, 0.0);
  double acc = 0.0;
  for (std::int64_t k = 1; k <= K; ++k) {
    marginal[static_cast<std::size_t>(k - 1)] = progeny_pmf(1, cfg.eps, t, k);
    acc += marginal[static_cast<std::size_t>(k - 1)];
  }
  marginal[cells - 1] = std::max(0.0, 1.0 - acc);
  std::vector<std::int64_t> joint(cells * cells, 0);
  stats::Welford same_gap;
  std::int64_t same_count = 0;
  for (const auto& p : pairs) {
    ++joint[cell(p.s1) * cells + cell(p.s2)];
    same_count += p.same;
    same_gap.add((p.same ? 1.0 : 0.0) -
                 static_cast<double>(p.s1 - 1) / static_cast<double>(n - 1));
  }
  std::vector<double> product(cells * cells);
  for (std::size_t a = 0; a < cells; ++a) {
    for (std::size_t b = 0; b < cells; ++b) product[a * cells + b] = marginal[a] * marginal[b];
  }
  Table table{"joint", {"i", "j", "count", "expected"}, {}};
  for (std::size_t a = 0; a < cells; ++a) {
    for (std::size_t b = 0; b < cells; ++b) {
      table.rows.push_back({static_cast<double>(a + 1), static_cast<double>(b + 1),
                            static_cast<double>(joint[a * cells + b]),
                            product[a * cells + b] * static_cast<double>(cfg.replicas)});
    }
  }
  res.tables = {table};
  const auto gof = stats::chi_square_gof(joint, product);
  const auto indep = stats::chi_square_independence(joint, cells, cells);
  res.summary["gof_statistic"] = gof.statistic;
  res.summary["gof_df"] = gof.df;
  res.summary["gof_p"] = gof.p_value;
  res.summary["independence_statistic"] = indep.statistic;
  res.summary["independence_df"] = indep.df;
  res.summary["independence_p"] = indep.p_value;
  res.summary["same_component_frequency"] =
      static_cast<double>(same_count) / static_cast<double>(cfg.replicas);
  res.summary["same_component_gap"] = same_gap.mean();
  res.summary["same_component_gap_se"] = same_gap.std_error();
  if (t == 0.0) {
    res.assertions.push_back({"t=0 both components are singletons",
                              joint[0] == cfg.replicas, ""});
    return res;
  }
  res.assertions.push_back({"joint law matches product of progeny laws (chi-square)",
                            gof.passes(cfg.level),
                            "p=" + detail::fmt(gof.p_value) + ", df=" + std::to_string(gof.df)});
  res.assertions.push_back(
      {"same-component frequency matches (E|C|-1)/(n-1)",
       stats::within_sigma(same_gap.mean(), 0.0, same_gap.std_error()),
       "gap " + detail::fmt(same_gap.mean()) + " (se " + detail::fmt(same_gap.std_error()) + ")"});
  return res;
}

/// Largest and second-largest components across t, around the critical time ε².
inline ExperimentResult cmd_phase_scan(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "phase-scan";
  const std::int64_t n = cfg.n.front();
  const double logn = std::log(static_cast<double>(n));
  const SoupSampler sampler(ModelParams(n, cfg.eps));
  Table raw{"components", {"t", "n", "rep", "c1", "c2"}, {}};
  Table summary{"summary", {"t", "mean_c1_over_n", "mean_c2", "threshold", "frac_exceed", "q"}, {}};
  nlohmann::json per_t = nlohmann::json::array();
  for (std::size_t ci = 0; ci < cfg.t.size(); ++ci) {
    const double t = cfg.t[ci];
    const double horizon = static_cast<double>(n) * t;
    const auto tops = run_replicas<Top2>(
        cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
        [&](ClusterState& state, std::int64_t r) {
          build_partition(sampler.sample(horizon, cfg.seed, replica_stream(ci, static_cast<std::uint64_t>(r))), state);
          return state.top2();
        });
    stats::Welford c1w;
    stats::Welford c2w;
    for (std::size_t r = 0; r < tops.size(); ++r) {
      raw.rows.push_back({t, static_cast<double>(n), static_cast<double>(r),
                          static_cast<double>(tops[r].first), static_cast<double>(tops[r].second)});
      c1w.add(static_cast<double>(tops[r].first) / static_cast<double>(n));
      c2w.add(static_cast<double>(tops[r].second));
    }
    const double crit = cfg.eps * cfg.eps;
    const std::string tag = "t=" + detail::fmt(t) + ": ";
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double frac = std::numeric_limits<double>::quiet_NaN();
    double q = std::numeric_limits<double>::quiet_NaN();
    nlohmann::json entry{{"t", t}};
    if (t == 0.0) {
      const bool ok = std::all_of(tops.begin(), tops.end(), [](const Top2& x) { return x.first == 1; });
      res.assertions.push_back({tag + "largest component is a singleton", ok, ""});
    } else if (t < crit) {
      const double h = cramer_h(cfg.eps, t);
      threshold = cfg.a_factor / h * logn;
      std::int64_t exceed = 0;
      for (const auto& x : tops) exceed += static_cast<double>(x.first) > threshold;
      frac = static_cast<double>(exceed) / static_cast<double>(tops.size());
      entry["h"] = h;
      res.assertions.push_back({tag + "P(c1 > (a/h) log n) < 0.05", frac < 0.05,
                                "frequency " + detail::fmt(frac) + ", threshold " +
                                    detail::fmt(threshold)});
    } else if (t > crit) {
      q = extinction_prob(CPGeo::from_model(cfg.eps, t));
      std::int64_t inside = 0;
      std::int64_t c2_ok = 0;
      threshold = cfg.c2_log_factor * logn;
      for (const auto& x : tops) {
        inside += std::abs(static_cast<double>(x.first) / static_cast<double>(n) - (1.0 - q)) <
                  cfg.q_tolerance;
        c2_ok += static_cast<double>(x.second) <= threshold;
      }
      frac = static_cast<double>(inside) / static_cast<double>(tops.size());
      entry["q"] = q;
      entry["I"] = tail_rate_I(cfg.eps, t);
      res.assertions.push_back({tag + "|c1/n - (1-q)| < tol in enough replicas",
                                frac >= cfg.q_fraction,
                                "fraction " + detail::fmt(frac) + ", 1-q=" + detail::fmt(1.0 - q)});
      res.assertions.push_back({tag + "c2 <= factor * log n in all replicas",
                                c2_ok == static_cast<std::int64_t>(tops.size()),
                                std::to_string(c2_ok) + "/" + std::to_string(tops.size())});
    }
    entry["mean_c1_over_n"] = c1w.mean();
    entry["mean_c2"] = c2w.mean();
    per_t.push_back(entry);
    summary.rows.push_back({t, c1w.mean(), c2w.mean(), threshold, frac, q});
  }
  res.summary["per_t"] = per_t;
  res.tables = {summary, raw};
  return res;
}

/// Empirical size densities ρ̂(k) against ρ(k) = P(T=k)/k, mean-square error across n.
inline ExperimentResult cmd_hydro(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "hydro";
  const double t = cfg.t.front();
  if (t > cfg.eps * cfg.eps) res.warnings.push_back("t exceeds eps^2: unvalidated regime");
  std::vector<double> rho;
  for (std::int64_t k = 1; k <= cfg.kmax; ++k) rho.push_back(progeny_pmf(1, cfg.eps, t, k) / static_cast<double>(k));
  Table detail_table{"mse", {"n", "k", "rho", "rho_hat_mean", "mse"}, {}};
  Table summary{"summary", {"n", "mse_sum"}, {}};
  std::vector<double> totals;
  bool mass_ok = true;
  struct Row {
    std::vector<double> rho_hat;
    bool mass_ok;
  };
  for (std::size_t ci = 0; ci < cfg.n.size(); ++ci) {
    const std::int64_t n = cfg.n[ci];
    const SoupSampler sampler(ModelParams(n, cfg.eps));
    const double horizon = static_cast<double>(n) * t;
    const auto rows = run_replicas<Row>(
        cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
        [&](ClusterState& state, std::int64_t r) {
          build_partition(sampler.sample(horizon, cfg.seed, replica_stream(ci, static_cast<std::uint64_t>(r))), state);
          Row row;
          for (std::int64_t k = 1; k <= cfg.kmax; ++k) row.rho_hat.push_back(rho_hat(state, k));
          row.mass_ok = z_count(state, 1) == n;
          return row;
        });
    double total = 0.0;
    for (std::int64_t k = 1; k <= cfg.kmax; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      double se2 = 0.0;
      double mean = 0.0;
      for (const auto& row : rows) {
        const double d = row.rho_hat[i] - rho[i];
        se2 += d * d;
        mean += row.rho_hat[i];
      }
      se2 /= static_cast<double>(rows.size());
      mean /= static_cast<double>(rows.size());
      total += se2;
      detail_table.rows.push_back({static_cast<double>(n), static_cast<double>(k), rho[i], mean, se2});
    }
    for (const auto& row : rows) mass_ok = mass_ok && row.mass_ok;
    totals.push_back(total);
    summary.rows.push_back({static_cast<double>(n), total});
  }
  res.tables = {summary, detail_table};
  res.assertions.push_back({"sum_k k rho_hat(k) = 1 in every replica", mass_ok, ""});
  if (t == 0.0) {
    const bool zero = std::all_of(totals.begin(), totals.end(), [](double v) { return v == 0.0; });
    res.assertions.push_back({"t=0 profile is exactly monodisperse", zero, ""});
    return res;
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < totals.size(); ++i) decreasing = decreasing && totals[i] < totals[i - 1];
  res.assertions.push_back({"mean-square error decreases in n", decreasing, ""});
  if (cfg.n.size() >= 2) {
    const auto fit = loglog_fit(cfg.n, totals);
    res.summary["slope"] = fit.slope;
    res.summary["slope_se"] = fit.slope_std_error;
  }
  res.summary["mse_sum"] = totals;
  return res;
}

/// Soups of loops of a single length j at horizon n·t·(ε+1)^j.
inline ExperimentResult cmd_fixed_length(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "fixed-length";
  const double t = cfg.t.front();
  const std::int64_t j = cfg.j;
  if (t > 1.0 / static_cast<double>(j - 1)) res.warnings.push_back("t exceeds 1/(j-1): supercritical regime");
  const auto f = fixed_length_cdf(j, t, cfg.kmax);
  std::vector<double> rho;
  for (std::int64_t k = 1; k <= cfg.kmax; ++k) rho.push_back(analytic_rho_fixed_j(j, t, k));
  Table summary{"summary", {"n", "sup_dev", "k_at_sup", "se_at_sup", "mse_sum", "off_lattice_freq"}, {}};
  Table cdf_table{"cdf", {"n", "k", "cdf_hat", "cdf", "diff", "se"}, {}};
  struct Row {
    std::vector<std::int64_t> counts;
    std::vector<double> rho_hat;
    std::int64_t off_lattice;
  };
  std::vector<double> devs;
  std::vector<double> mses;
  std::vector<double> anomalies;
  for (std::size_t ci = 0; ci < cfg.n.size(); ++ci) {
    const std::int64_t n = cfg.n[ci];
    const SoupSampler sampler(ModelParams(n, cfg.eps));
    const double horizon = static_cast<double>(n) * t * std::pow(cfg.eps + 1.0, static_cast<double>(j));
    const auto rows = run_replicas<Row>(
        cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
        [&](ClusterState& state, std::int64_t r) {
          build_partition(sampler.sample_fixed_length(j, horizon, cfg.seed, replica_stream(ci, static_cast<std::uint64_t>(r))), state);
          Row row;
          row.counts = small_component_counts(state, cfg.kmax);
          for (std::int64_t k = 1; k <= cfg.kmax; ++k) row.rho_hat.push_back(rho_hat(state, k));
          row.off_lattice = 0;
          for (const auto& [size, count] : state.histogram()) {
            if ((size - 1) % (j - 1) != 0) row.off_lattice += size * count;
          }
          return row;
        });
    std::vector<std::vector<std::int64_t>> counts;
    counts.reserve(rows.size());
    double mse = 0.0;
    double off = 0.0;
    for (const auto& row : rows) {
      counts.push_back(row.counts);
      for (std::size_t i = 0; i < rho.size(); ++i) mse += std::pow(row.rho_hat[i] - rho[i], 2);
      off += static_cast<double>(row.off_lattice) / static_cast<double>(n);
    }
    mse /= static_cast<double>(rows.size());
    off /= static_cast<double>(rows.size());
    const auto cmp = compare_cdf(counts, n, f);
    for (std::int64_t k = 1; k <= cfg.kmax; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      cdf_table.rows.push_back({static_cast<double>(n), static_cast<double>(k), cmp.f_hat[i], f[i],
                                cmp.f_hat[i] - f[i], cmp.se[i]});
    }
    summary.rows.push_back({static_cast<double>(n), cmp.sup_dev, static_cast<double>(cmp.k_at_sup),
                            cmp.se[static_cast<std::size_t>(cmp.k_at_sup - 1)], mse, off});
    devs.push_back(cmp.sup_dev);
    mses.push_back(mse);
    anomalies.push_back(off);
  }
  res.tables = {summary, cdf_table};
  res.summary["deviations"] = devs;
  res.summary["mse_sum"] = mses;
  res.summary["off_lattice_freq"] = anomalies;
  if (t == 0.0) {
    const bool zero = std::all_of(devs.begin(), devs.end(), [](double d) { return d == 0.0; });
    res.assertions.push_back({"t=0 all vertices are singletons", zero, ""});
    return res;
  }
  if (cfg.n.size() >= 2) {
    res.assertions.push_back({"CDF deviation at largest n below smallest n", devs.back() < devs.front(),
                              detail::fmt(devs.front()) + " -> " + detail::fmt(devs.back())});
    res.assertions.push_back({"density error at largest n below smallest n", mses.back() < mses.front(),
                              detail::fmt(mses.front()) + " -> " + detail::fmt(mses.back())});
    res.assertions.push_back({"off-lattice frequency at largest n not above smallest n",
                              anomalies.back() <= anomalies.front(),
                              detail::fmt(anomalies.front()) + " -> " + detail::fmt(anomalies.back())});
  }
  return res;
}

/// Supercritical exploration walks that dip below c2·k inside [c1 log n, n^beta],
/// and the frequency of two components above c1 log n.
inline ExperimentResult cmd_intermediate_gap(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.command = "intermediate-gap";
  const double t = cfg.t.front();
  double c1 = cfg.c1;
  if (t > 0.0 && !(t > cfg.eps * cfg.eps)) {
    throw ConfigError("intermediate-gap requires t > eps^2 (or t = 0)");
  }
  if (c1 <= 0.0) c1 = t > 0.0 ? 1.0 / tail_rate_I(cfg.eps, t) : 1.0;
  res.summary["c1"] = c1;
  Table table{"frequencies", {"n", "window_lo", "window_hi", "dip_freq", "dip_se", "two_big_freq", "two_big_se"}, {}};
  struct Row {
    bool dip;
    bool two_big;
  };
  std::vector<double> dips;
  std::vector<double> twos;
  for (std::size_t ci = 0; ci < cfg.n.size(); ++ci) {
    const std::int64_t n = cfg.n[ci];
    const double lo = c1 * std::log(static_cast<double>(n));
    const auto hi = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), cfg.beta)));
    const SoupSampler sampler(ModelParams(n, cfg.eps));
    const double horizon = static_cast<double>(n) * t;
    const auto rows = run_replicas<Row>(
        cfg.replicas, cfg.threads, [n] { return ClusterState(n); },
        [&](ClusterState& state, std::int64_t r) {
          const auto soup = sampler.sample(horizon, cfg.seed, replica_stream(ci, static_cast<std::uint64_t>(r)));
          build_partition(soup, state);
          const auto trace = explore(soup, horizon, 1, hi);
          bool dip = false;
          const auto first = static_cast<std::int64_t>(std::ceil(lo));
          if (trace.T >= first) {
            for (std::int64_t k = std::max<std::int64_t>(first, 1); k <= std::min(trace.T, hi); ++k) {
              if (static_cast<double>(trace.active_sizes[static_cast<std::size_t>(k - 1)]) <
                  cfg.c2 * static_cast<double>(k)) {
                dip = true;
                break;
              }
            }
          }
          return Row{dip, static_cast<double>(state.top2().second) > lo};
        });
    stats::Welford dw;
    stats::Welford tw;
    for (const auto& row : rows) {
      dw.add(row.dip ? 1.0 : 0.0);
      tw.add(row.two_big ? 1.0 : 0.0);
    }
    dips.push_back(dw.mean());
    twos.push_back(tw.mean());
    table.rows.push_back({static_cast<double>(n), lo, static_cast<double>(hi), dw.mean(),
                          dw.std_error(), tw.mean(), tw.std_error()});
  }
  res.tables = {table};
  res.summary["dip_freq"] = dips;
  res.summary["two_big_freq"] = twos;
  if (t == 0.0) {
    const bool none = std::all_of(dips.begin(), dips.end(), [](double d) { return d == 0.0; });
    res.assertions.push_back({"t=0 no walk reaches the window", none, ""});
    return res;
  }
  if (cfg.n.size() >= 2) {
    res.assertions.push_back({"dip frequency at largest n not above smallest n", dips.back() <= dips.front(),
                              detail::fmt(dips.front()) + " -> " + detail::fmt(dips.back())});
    res.assertions.push_back({"two-large-components frequency at largest n not above smallest n",
                              twos.back() <= twos.front(),
                              detail::fmt(twos.front()) + " -> " + detail::fmt(twos.back())});
  }
  return res;
}

inline const std::map<std::string, std::function<ExperimentResult(const ExperimentConfig&)>>&
experiment_commands() {
  static const std::map<std::string, std::function<ExperimentResult(const ExperimentConfig&)>> table{
      {"component-law", cmd_component_law}, {"two-components", cmd_two_components},
      {"phase-scan", cmd_phase_scan},       {"hydro", cmd_hydro},
      {"fixed-length", cmd_fixed_length},   {"intermediate-gap", cmd_intermediate_gap}};
  return table;
}

/// Writes each table as <dir>/<command>_<table>.csv plus <dir>/<command>_run.json.
inline nlohmann::json write_run(const ExperimentResult& res, const ExperimentConfig& cfg,
                                const std::filesystem::path& dir, double wall_seconds) {
  std::filesystem::create_directories(dir);
  const auto echo = cfg.to_json();
  nlohmann::json record{{"config", echo},
                        {"generator_id", kGeneratorId},
                        {"version", kVersion},
                        {"seed", cfg.seed},
                        {"replica_streams", "stream(cell, r) = (cell << 40) ^ r"},
                        {"wall_seconds", wall_seconds},
                        {"summary", res.summary},
                        {"warnings", res.warnings}};
  nlohmann::json files = nlohmann::json::array();
  for (const auto& table : res.tables) {
    const auto name = res.command + "_" + table.name + ".csv";
    std::ofstream os(dir / name);
    write_table_csv(os, table, echo);
    files.push_back(name);
  }
  record["tables"] = files;
  nlohmann::json asserts = nlohmann::json::array();
  for (const auto& a : res.assertions) {
    asserts.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  record["assertions"] = asserts;
  record["all_passed"] = res.all_passed();
  std::ofstream(dir / (res.command + "_run.json")) << record.dump(2) << '\n';
  return record;
}

}  // namespace loopsoup
