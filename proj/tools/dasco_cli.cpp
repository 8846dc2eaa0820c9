// Command-line driver: experiment runs, topology inspection, closed-form
// solves and instance export.

#include <dasco/dasco.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct Overlay {
  CLI::Option* opt;
  std::function<void(dasco::ExperimentConfig&)> apply;
};

template <class T, class Setter>
void overlay_option(CLI::App* app, std::vector<Overlay>& out, const std::string& name,
                    const std::string& desc, Setter set) {
  auto value = std::make_shared<T>();
  auto* opt = app->add_option(name, *value, desc);
  out.push_back({opt, [value, set](dasco::ExperimentConfig& c) { set(c, *value); }});
}

void add_problem_options(CLI::App* app, std::vector<Overlay>& ov) {
  overlay_option<int>(app, ov, "--n", "agent count", [](auto& c, int v) { c.problem.agents = v; });
  overlay_option<int>(app, ov, "--d", "feature dimension", [](auto& c, int v) { c.problem.dim = v; });
  overlay_option<int>(app, ov, "--states", "state count", [](auto& c, int v) { c.problem.states = v; });
  overlay_option<double>(app, ov, "--discount", "discount factor in (0,1)",
                         [](auto& c, double v) { c.problem.discount = v; });
  overlay_option<double>(app, ov, "--lambda", "ridge regularizer",
                         [](auto& c, double v) { c.problem.regularizer = v; });
  overlay_option<std::uint64_t>(app, ov, "--instance-seed", "seed of the generated instance",
                                [](auto& c, std::uint64_t v) { c.instance_seed = v; });
  overlay_option<std::string>(app, ov, "--instance", "load the instance from a JSON file",
                              [](auto& c, const std::string& v) { c.instance_path = v; });
  overlay_option<std::uint64_t>(app, ov, "--seed", "master seed",
                                [](auto& c, std::uint64_t v) { c.seed = v; });
}

void add_run_options(CLI::App* app, std::vector<Overlay>& ov) {
  overlay_option<std::string>(app, ov, "--algo", "dascgd | cdascgd | central",
                              [](auto& c, const std::string& v) { c.algo = v; });
  overlay_option<std::string>(app, ov, "--topology", "ring | exp",
                              [](auto& c, const std::string& v) { c.topology = v; });
  overlay_option<std::int64_t>(app, ov, "--k", "number of rounds",
                               [](auto& c, std::int64_t v) { c.rounds = v; });
  overlay_option<std::string>(app, ov, "--schedule", "constant | inv_sqrt",
                              [](auto& c, const std::string& v) { c.schedule = v; });
  overlay_option<double>(app, ov, "--alpha", "decision stepsize", [](auto& c, double v) { c.alpha = v; });
  overlay_option<double>(app, ov, "--beta", "value-estimator weight", [](auto& c, double v) { c.beta = v; });
  overlay_option<double>(app, ov, "--gamma", "Jacobian-estimator weight",
                         [](auto& c, double v) { c.gamma = v; });
  overlay_option<double>(app, ov, "--alpha-w", "compressed mixing scale",
                         [](auto& c, double v) { c.alpha_w = v; });
  overlay_option<double>(app, ov, "--alpha-x", "x reference scale", [](auto& c, double v) { c.alpha_x = v; });
  overlay_option<double>(app, ov, "--alpha-y", "y reference scale", [](auto& c, double v) { c.alpha_y = v; });
  overlay_option<double>(app, ov, "--alpha-z", "z reference scale", [](auto& c, double v) { c.alpha_z = v; });
  overlay_option<std::string>(app, ov, "--compressor-x", "none | quant:l=L | topt:t=T",
                              [](auto& c, const std::string& v) { c.compressor_x = v; });
  overlay_option<std::string>(app, ov, "--compressor-y", "none | quant:l=L | topt:t=T",
                              [](auto& c, const std::string& v) { c.compressor_y = v; });
  overlay_option<std::string>(app, ov, "--compressor-z", "none | quant:l=L | topt:t=T",
                              [](auto& c, const std::string& v) { c.compressor_z = v; });
  overlay_option<int>(app, ov, "--batch", "inner samples per agent and round",
                      [](auto& c, int v) { c.batch = v; });
  overlay_option<int>(app, ov, "--reps", "number of seeds", [](auto& c, int v) { c.reps = v; });
  overlay_option<std::int64_t>(app, ov, "--metric-every", "metric cadence in rounds",
                               [](auto& c, std::int64_t v) { c.metric_every = v; });
  overlay_option<int>(app, ov, "--jobs", "parallel repetitions", [](auto& c, int v) { c.jobs = v; });
  overlay_option<std::string>(app, ov, "--out", "output directory",
                              [](auto& c, const std::string& v) { c.out = v; });
}

dasco::ExperimentConfig resolve(const std::string& config_path, const std::vector<Overlay>& ov) {
  dasco::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = dasco::load_config(config_path);
  for (const auto& o : ov)
    if (o.opt->count() > 0) o.apply(cfg);
  return cfg;
}

void configure_logging() {
  if (const char* level = std::getenv("DASCO_LOG_LEVEL"))
    spdlog::set_level(spdlog::level::from_str(level));
  else
    spdlog::set_level(spdlog::level::info);
}

std::string join(const dasco::Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += dasco::detail::format_double(v[i]);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Decentralized aggregative stochastic compositional optimization simulator"};
  app.require_subcommand(1);

  std::string run_config;
  std::vector<Overlay> run_ov;
  auto* run_cmd = app.add_subcommand("run", "run an experiment and write CSV metrics");
  run_cmd->add_option("--config", run_config, "JSON experiment config (flags override it)");
  add_problem_options(run_cmd, run_ov);
  add_run_options(run_cmd, run_ov);

  auto* topo_cmd = app.add_subcommand("topology", "mixing matrix tools");
  topo_cmd->require_subcommand(1);
  auto* inspect_cmd = topo_cmd->add_subcommand("inspect", "print W and its spectral gap");
  std::string topo_name = "ring";
  int topo_n = 6;
  std::string topo_csv;
  inspect_cmd->add_option("--topology", topo_name, "ring | exp");
  inspect_cmd->add_option("--n", topo_n, "node count");
  inspect_cmd->add_option("--csv", topo_csv, "also write W to this CSV file");

  std::string solve_config;
  std::vector<Overlay> solve_ov;
  auto* solve_cmd = app.add_subcommand("solve", "print the exact minimiser x* and h(x*)");
  solve_cmd->add_option("--config", solve_config, "JSON experiment config");
  add_problem_options(solve_cmd, solve_ov);

  std::string inst_config;
  std::string inst_out;
  std::vector<Overlay> inst_ov;
  auto* inst_cmd = app.add_subcommand("instance", "generate an instance and save it as JSON");
  inst_cmd->add_option("--config", inst_config, "JSON experiment config");
  inst_cmd->add_option("--out", inst_out, "output JSON file")->required();
  add_problem_options(inst_cmd, inst_ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto cfg = resolve(run_config, run_ov);
      spdlog::info("running {} on {} (n={}, d={}, states={}) for K={} rounds, {} reps", cfg.algo,
                   cfg.topology, cfg.problem.agents, cfg.problem.dim, cfg.problem.states, cfg.rounds,
                   cfg.reps);
      const auto res = dasco::run_experiment(cfg);
      const auto& last = res.mean.back();
      const auto& first = res.mean.front();
      std::cout << "rho " << res.rho << '\n'
                << "h_star " << dasco::detail::format_double(res.optimum.value) << '\n'
                << "initial_avg_residual " << first.avg_residual << '\n'
                << "final_avg_residual " << last.avg_residual << '\n'
                << "initial_avg_grad_sq " << first.avg_grad_sq << '\n'
                << "final_avg_grad_sq " << last.avg_grad_sq << '\n'
                << "total_bits " << dasco::detail::format_count(last.bits_cumulative) << '\n';
      if (!cfg.out.empty()) spdlog::info("wrote {}", cfg.out);
    } else if (*inspect_cmd) {
      const auto w = dasco::make_topology(topo_name, topo_n);
      w.write_csv(std::cout);
      std::cout << "rho " << dasco::detail::format_double(w.rho()) << '\n';
      if (!topo_csv.empty()) {
        std::ofstream out(topo_csv);
        if (!out) throw dasco::IoError("cannot write " + topo_csv);
        w.write_csv(out);
      }
    } else if (*solve_cmd) {
      const auto cfg = resolve(solve_config, solve_ov);
      const auto inst = dasco::make_instance(cfg);
      const auto x = inst.solve_optimal();
      std::cout << "x_star " << join(x) << '\n'
                << "h_star " << dasco::detail::format_double(inst.full_objective(x)) << '\n'
                << "grad_norm " << inst.full_gradient(x).norm() << '\n';
    } else if (*inst_cmd) {
      const auto cfg = resolve(inst_config, inst_ov);
      dasco::save_instance(dasco::make_instance(cfg), inst_out);
      spdlog::info("wrote {}", inst_out);
    }
  } catch (const dasco::DivergenceError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const dasco::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
