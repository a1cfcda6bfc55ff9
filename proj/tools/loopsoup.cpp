// loopsoup: command-line front end for sampling, exploring and the experiments.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loopsoup/loopsoup.hpp"

namespace fs = std::filesystem;
using namespace loopsoup;

namespace {

struct ExperimentOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::int64_t replicas = 0;
  unsigned threads = 0;
  std::string out = "results";
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

int run_experiment(const std::string& command, const ExperimentOptions& opt, CLI::App& sub) {
  std::ifstream is(opt.config);
  if (!is) throw ConfigError("cannot read config file " + opt.config);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.contains("command") && j["command"] != command) {
    throw ConfigError("config is for command '" + j["command"].get<std::string>() + "'");
  }
  j.erase("command");
  if (sub.count("--seed")) j["seed"] = opt.seed;
  if (sub.count("--replicas")) j["replicas"] = opt.replicas;
  if (sub.count("--threads")) j["threads"] = opt.threads;
  const auto cfg = ExperimentConfig::from_json(j, command);
  const auto start = std::chrono::steady_clock::now();
  const auto result = experiment_commands().at(command)(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_run(result, cfg, opt.out, wall);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& a : result.assertions) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name;
    if (!a.detail.empty()) std::cout << " (" << a.detail << ')';
    std::cout << '\n';
  }
  std::cout << "outputs written to " << opt.out << '\n';
  return result.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov loop soups on the complete graph"};
  app.require_subcommand(1);

  ExperimentOptions exp;
  std::vector<std::pair<std::string, CLI::App*>> experiments;
  for (const auto& [name, fn] : experiment_commands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", exp.config, "flat JSON config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", exp.seed, "override the config seed");
    sub->add_option("--replicas", exp.replicas, "override the replica count")->check(CLI::PositiveNumber);
    sub->add_option("--threads", exp.threads, "worker threads (0: all cores)");
    sub->add_option("--out", exp.out, "output directory")->capture_default_str();
    experiments.emplace_back(name, sub);
  }

  // gw-table
  std::int64_t gw_u = 1;
  double gw_eps = 1.0;
  double gw_t = 0.5;
  std::int64_t gw_j = 0;
  std::int64_t gw_kmax = 0;
  double gw_tol = 1e-10;
  std::string gw_out;
  auto* gw = app.add_subcommand("gw-table", "total progeny pmf and cdf");
  gw->add_option("--u", gw_u, "number of ancestors")->check(CLI::PositiveNumber)->capture_default_str();
  gw->add_option("--eps", gw_eps, "killing parameter")->capture_default_str();
  gw->add_option("--t", gw_t, "time")->required();
  gw->add_option("--j", gw_j, "fixed loop length (uses (j-1)*Poisson(t) offspring)");
  gw->add_option("--kmax", gw_kmax, "table length (default: adaptive)");
  gw->add_option("--tol", gw_tol, "tail bound target for the adaptive table")->capture_default_str();
  gw->add_option("--out", gw_out, "output directory (default: CSV to stdout)");

  // coag-solve
  SolverConfig coag;
  double coag_t_end = 0.5;
  double coag_every = 0.0;
  std::string coag_out;
  auto* cs = app.add_subcommand("coag-solve", "integrate the coagulation equations");
  cs->add_option("--eps", coag.eps, "killing parameter")->capture_default_str();
  cs->add_option("--t-end", coag_t_end, "final time")->capture_default_str();
  cs->add_option("--K", coag.K, "largest cluster size")->capture_default_str();
  cs->add_option("--Jmax", coag.Jmax, "largest collision arity")->capture_default_str();
  cs->add_option("--dt", coag.dt, "RK4 step")->capture_default_str();
  cs->add_option("--fixed-j", coag.fixed_j, "solve the single-arity system for this j");
  cs->add_option("--every", coag_every, "output spacing (default: t-end/10)");
  cs->add_option("--out", coag_out, "output directory")->required();

  // sample
  std::int64_t s_n = 100;
  double s_eps = 1.0;
  double s_horizon = 1.0;
  std::uint64_t s_seed = 1;
  std::uint64_t s_stream = 0;
  std::int64_t s_j = 0;
  std::string s_out;
  auto* sample = app.add_subcommand("sample", "sample a loop soup");
  sample->add_option("--n", s_n, "vertices")->capture_default_str();
  sample->add_option("--eps", s_eps, "killing parameter")->capture_default_str();
  sample->add_option("--horizon", s_horizon, "soup horizon (raw time)")->capture_default_str();
  sample->add_option("--seed", s_seed)->capture_default_str();
  sample->add_option("--stream", s_stream)->capture_default_str();
  sample->add_option("--j", s_j, "only loops of this length");
  sample->add_option("--out", s_out, "soup file (default: stdout)");

  // evolve
  std::string e_soup;
  std::vector<double> e_checkpoints;
  std::string e_out;
  auto* evolve_cmd = app.add_subcommand("evolve", "replay a soup into the cluster partition");
  evolve_cmd->add_option("--soup", e_soup, "soup file")->required()->check(CLI::ExistingFile);
  evolve_cmd->add_option("--checkpoints", e_checkpoints, "sorted times (default: horizon)");
  evolve_cmd->add_option("--out", e_out, "output directory")->required();

  // explore
  std::string x_soup;
  double x_t = -1.0;
  Vertex x_vertex = 1;
  std::int64_t x_aux = -1;
  std::string x_out;
  auto* explore_cmd = app.add_subcommand("explore", "explore the component of a vertex");
  explore_cmd->add_option("--soup", x_soup, "soup file")->required()->check(CLI::ExistingFile);
  explore_cmd->add_option("--t", x_t, "time cutoff (default: horizon)");
  explore_cmd->add_option("--x", x_vertex, "start vertex")->capture_default_str();
  explore_cmd->add_option("--aux-seed", x_aux, "also run the coupled walk with this auxiliary seed");
  explore_cmd->add_option("--out", x_out, "output directory (default: CSV to stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, sub] : experiments) {
      if (sub->parsed()) return run_experiment(name, exp, *sub);
    }

    if (gw->parsed()) {
      std::vector<double> pmf;
      nlohmann::json summary;
      if (gw_j > 0) {
        const FixedLengthOffspring law(gw_j, gw_t);
        const std::int64_t K = gw_kmax > 0 ? gw_kmax : 200;
        pmf.assign(static_cast<std::size_t>(K) + 1, 0.0);
        for (std::int64_t k = gw_u; k <= K; ++k) pmf[static_cast<std::size_t>(k)] = fixed_length_progeny_pmf(gw_u, gw_j, gw_t, k);
        summary = {{"q", extinction_prob(law)}, {"mean_offspring", law.mean()}, {"h_or_I", nullptr}};
      } else {
        const auto table = gw_kmax > 0 ? progeny_table(gw_u, gw_eps, gw_t, 0.0, gw_kmax)
                                       : progeny_table(gw_u, gw_eps, gw_t, gw_tol);
        pmf = table.pmf;
        double mean = std::numeric_limits<double>::infinity();
        if (gw_t < gw_eps * gw_eps) mean = static_cast<double>(gw_u) / (1.0 - gw_t / (gw_eps * gw_eps));
        summary = {{"q", table.q},
                   {"mean", std::isfinite(mean) ? nlohmann::json(mean) : nlohmann::json(nullptr)},
                   {"h_or_I", table.rate},
                   {"tail_bound", table.tail_bound},
                   {"defect", table.defect}};
      }
      auto emit = [&](std::ostream& os) {
        os << "k,pmf,cdf\n";
        double cdf = 0.0;
        for (std::size_t k = static_cast<std::size_t>(gw_u); k < pmf.size(); ++k) {
          cdf += pmf[k];
          os << k << ',' << format_number(pmf[k]) << ',' << format_number(cdf) << '\n';
        }
      };
      summary["u"] = gw_u;
      summary["eps"] = gw_eps;
      summary["t"] = gw_t;
      if (gw_j > 0) summary["j"] = gw_j;
      if (gw_out.empty()) {
        emit(std::cout);
        std::cerr << summary.dump() << '\n';
      } else {
        auto os = open_out(fs::path(gw_out) / "gw_table.csv");
        emit(os);
        open_out(fs::path(gw_out) / "gw_summary.json") << summary.dump(2) << '\n';
      }
      return 0;
    }

    if (cs->parsed()) {
      if (coag.fixed_j == 0 && coag.Jmax > coag.K) coag.Jmax = coag.K;
      const double every = coag_every > 0.0 ? coag_every : coag_t_end / 10.0;
      std::vector<double> times;
      if (coag_t_end > 0.0) {
        const auto count = static_cast<std::int64_t>(std::ceil(coag_t_end / every - 1e-9));
        for (std::int64_t i = 1; i <= count; ++i) times.push_back(std::min(coag_t_end, every * static_cast<double>(i)));
      }
      const auto d0 = DensityVector::monodisperse(coag.K);
      const auto traj = integrate(d0, coag, times);
      auto rho_os = open_out(fs::path(coag_out) / "rho.csv");
      auto mom_os = open_out(fs::path(coag_out) / "moments.csv");
      rho_os << "t,k,rho\n";
      mom_os << "t,m1,m2,gel\n";
      auto write_state = [&](const DensityVector& d) {
        for (std::int64_t k = 1; k <= d.K(); ++k) rho_os << format_number(d.t) << ',' << k << ',' << format_number(d[k]) << '\n';
        mom_os << format_number(d.t) << ',' << format_number(moments(d, 1)) << ','
               << format_number(moments(d, 2)) << ',' << format_number(gel_mass(d)) << '\n';
      };
      write_state(d0);
      for (const auto& d : traj.states) write_state(d);
      nlohmann::json summary{{"eps", coag.eps}, {"K", coag.K}, {"Jmax", coag.Jmax},
                             {"dt", coag.dt}, {"fixed_j", coag.fixed_j}, {"t_end", coag_t_end},
                             {"steps", traj.steps}, {"clamp_events", traj.clamp_events},
                             {"leak_rate", traj.leak_rate},
                             {"unvalidated_regime", traj.unvalidated_regime}};
      open_out(fs::path(coag_out) / "coag_summary.json") << summary.dump(2) << '\n';
      if (traj.unvalidated_regime) std::cerr << "warning: times past the critical point are an unvalidated regime\n";
      return 0;
    }

    if (sample->parsed()) {
      const ModelParams params(s_n, s_eps);
      const auto soup = s_j > 0 ? sample_fixed_length_soup(params, s_j, s_horizon, s_seed, s_stream)
                                : sample_soup(params, s_horizon, s_seed, s_stream);
      if (s_out.empty()) {
        write_soup(std::cout, soup);
      } else {
        auto os = open_out(s_out);
        write_soup(os, soup);
      }
      return 0;
    }

    if (evolve_cmd->parsed()) {
      std::ifstream is(e_soup);
      const auto soup = read_soup(is);
      if (e_checkpoints.empty()) e_checkpoints.push_back(soup.horizon());
      const auto snaps = evolve(soup, e_checkpoints);
      auto hist_os = open_out(fs::path(e_out) / "hist.csv");
      auto top_os = open_out(fs::path(e_out) / "top2.csv");
      hist_os << "t,k,count\n";
      top_os << "t,c1,c2,n_components\n";
      for (const auto& s : snaps) {
        for (const auto& [k, c] : s.hist) hist_os << format_number(s.time) << ',' << k << ',' << c << '\n';
        top_os << format_number(s.time) << ',' << s.top2.first << ',' << s.top2.second << ','
               << s.n_components << '\n';
      }
      return 0;
    }

    if (explore_cmd->parsed()) {
      std::ifstream is(x_soup);
      const auto soup = read_soup(is);
      const double t = x_t >= 0.0 ? x_t : soup.horizon();
      const auto trace = explore(soup, t, x_vertex);
      auto summary = trace_summary(trace);
      if (x_aux >= 0) {
        const auto coupled = couple_gw(soup, t, x_vertex, static_cast<std::uint64_t>(x_aux));
        summary["T_bar"] = coupled.T_bar;
        summary["T_bar_censored"] = coupled.censored;
      }
      if (x_out.empty()) {
        write_trace_csv(std::cout, trace);
        std::cerr << summary.dump() << '\n';
      } else {
        auto os = open_out(fs::path(x_out) / "trace.csv");
        write_trace_csv(os, trace);
        open_out(fs::path(x_out) / "trace_summary.json") << summary.dump(2) << '\n';
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
