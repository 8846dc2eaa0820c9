#pragma once

// Experiment configuration, repeated seeded runs and file output.

#include <dasco/algorithms.hpp>
#include <dasco/metrics.hpp>
#include <dasco/network.hpp>
#include <dasco/rl_instance.hpp>
#include <dasco/run.hpp>

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dasco {

struct ExperimentConfig {
  std::string algo = "dascgd";
  std::string topology = "ring";
  RLSpec problem;
  std::optional<std::uint64_t> instance_seed;  // defaults to `seed`
  std::string instance_path;                   // load instead of generate when set
  std::int64_t rounds = 5000;
  std::string schedule = "constant";  // or "inv_sqrt"
  double alpha = 0.01;
  double beta = 0.01;
  double gamma = 0.01;
  double alpha_w = 0.5;
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  double alpha_z = 1.0;
  std::string compressor_x = "none";
  std::string compressor_y = "none";
  std::string compressor_z = "none";
  int batch = 5;
  int reps = 10;
  std::uint64_t seed = 0;
  std::int64_t metric_every = 1;
  std::string out;  // empty: do not write files
  int jobs = 1;
  bool verify_references = true;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"algo", c.algo},
      {"topology", c.topology},
      {"n", c.problem.agents},
      {"d", c.problem.dim},
      {"states", c.problem.states},
      {"discount", c.problem.discount},
      {"lambda", c.problem.regularizer},
      {"k", c.rounds},
      {"schedule", c.schedule},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"gamma", c.gamma},
      {"alpha_w", c.alpha_w},
      {"alpha_x", c.alpha_x},
      {"alpha_y", c.alpha_y},
      {"alpha_z", c.alpha_z},
      {"compressor_x", c.compressor_x},
      {"compressor_y", c.compressor_y},
      {"compressor_z", c.compressor_z},
      {"batch", c.batch},
      {"reps", c.reps},
      {"seed", c.seed},
      {"metric_every", c.metric_every},
      {"jobs", c.jobs},
  };
  if (c.instance_seed) j["instance_seed"] = *c.instance_seed;
  if (!c.instance_path.empty()) j["instance"] = c.instance_path;
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

/// Reads the keys present in `j` over `base`; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "algo") base.algo = v.get<std::string>();
      else if (key == "topology") base.topology = v.get<std::string>();
      else if (key == "n") base.problem.agents = v.get<int>();
      else if (key == "d") base.problem.dim = v.get<int>();
      else if (key == "states") base.problem.states = v.get<int>();
      else if (key == "discount") base.problem.discount = v.get<double>();
      else if (key == "lambda") base.problem.regularizer = v.get<double>();
      else if (key == "k") base.rounds = v.get<std::int64_t>();
      else if (key == "schedule") base.schedule = v.get<std::string>();
      else if (key == "alpha") base.alpha = v.get<double>();
      else if (key == "beta") base.beta = v.get<double>();
      else if (key == "gamma") base.gamma = v.get<double>();
      else if (key == "alpha_w") base.alpha_w = v.get<double>();
      else if (key == "alpha_x") base.alpha_x = v.get<double>();
      else if (key == "alpha_y") base.alpha_y = v.get<double>();
      else if (key == "alpha_z") base.alpha_z = v.get<double>();
      else if (key == "compressor_x") base.compressor_x = v.get<std::string>();
      else if (key == "compressor_y") base.compressor_y = v.get<std::string>();
      else if (key == "compressor_z") base.compressor_z = v.get<std::string>();
      else if (key == "batch") base.batch = v.get<int>();
      else if (key == "reps") base.reps = v.get<int>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "instance_seed") base.instance_seed = v.get<std::uint64_t>();
      else if (key == "instance") base.instance_path = v.get<std::string>();
      else if (key == "metric_every") base.metric_every = v.get<std::int64_t>();
      else if (key == "out") base.out = v.get<std::string>();
      else if (key == "jobs") base.jobs = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline MixingMatrix make_topology(const std::string& name, int n) {
  if (name == "ring") return ring_weights(n);
  if (name == "exp" || name == "exponential") return exponential_weights(n);
  throw ConfigError("unknown topology '" + name + "'");
}

inline RLInstance make_instance(const ExperimentConfig& c) {
  if (!c.instance_path.empty()) return load_instance(c.instance_path);
  RLSpec spec = c.problem;
  spec.seed = c.instance_seed.value_or(c.seed);
  return generate_instance(spec);
}

/// Algorithm-level options of repetition `rep` (seed = base seed + rep).
inline RunOptions run_options(const ExperimentConfig& c, int rep) {
  RunOptions o;
  o.algo = parse_algorithm(c.algo);
  if (c.schedule == "constant")
    o.schedule = StepSchedule::constant(c.alpha, c.beta, c.gamma);
  else if (c.schedule == "inv_sqrt")
    o.schedule = StepSchedule::inv_sqrt_horizon(c.alpha, c.beta, c.gamma, c.rounds);
  else
    throw ConfigError("unknown schedule '" + c.schedule + "'");
  o.compression.cx = Compressor::parse(c.compressor_x);
  o.compression.cy = Compressor::parse(c.compressor_y);
  o.compression.cz = Compressor::parse(c.compressor_z);
  o.compression.alpha_w = c.alpha_w;
  o.compression.alpha_x = c.alpha_x;
  o.compression.alpha_y = c.alpha_y;
  o.compression.alpha_z = c.alpha_z;
  if (o.algo != Algorithm::kCdascgd && !o.compression.all_identity())
    throw ConfigError("compressors are only meaningful with algo=cdascgd");
  o.rounds = c.rounds;
  o.batch = c.batch;
  o.seed = c.seed + static_cast<std::uint64_t>(rep);
  o.metric_every = c.metric_every;
  o.verify_references = c.verify_references;
  return o;
}

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<MetricRow> mean;
  Optimum optimum;
  double rho = 0.0;
};

inline nlohmann::json metadata_json(const RunMetadata& m) {
  return {
      {"algo", m.algo},       {"topology", m.topology},
      {"n", m.n},             {"d", m.d},
      {"p", m.p},             {"states", m.states},
      {"k", m.K},             {"batch", m.batch},
      {"schedule", m.schedule},
      {"alpha", m.alpha},     {"beta", m.beta},
      {"gamma", m.gamma},     {"alpha_w", m.alpha_w},
      {"alpha_x", m.alpha_x}, {"alpha_y", m.alpha_y},
      {"alpha_z", m.alpha_z}, {"compressor_x", m.compressor_x},
      {"compressor_y", m.compressor_y},
      {"compressor_z", m.compressor_z},
      {"seed", m.seed},       {"rho", m.rho},
      {"notes", m.notes},
  };
}

namespace detail {

inline void write_rows(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(rows, out);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

/// Runs `reps` seeds (optionally on `jobs` threads). With a non-empty
/// `out`, writes run_seed<s>.csv per repetition, mean.csv and metadata.json.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  detail::require(c.reps >= 1, "reps must be at least 1");
  detail::require(c.jobs >= 1, "jobs must be at least 1");
  const RLInstance inst = make_instance(c);
  const Algorithm algo = parse_algorithm(c.algo);
  const MixingMatrix w = algo == Algorithm::kCentral ? MixingMatrix::trivial()
                             : make_topology(c.topology, inst.agents());
  std::vector<RunOptions> options;
  for (int r = 0; r < c.reps; ++r) options.push_back(run_options(c, r));

  std::filesystem::path out_dir;
  if (!c.out.empty()) {
    out_dir = c.out;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
      throw IoError("cannot create output directory " + out_dir.string());
  }

  ExperimentResult res;
  res.optimum = make_optimum(inst, inst.solve_optimal());
  res.rho = w.rho();
  res.runs.resize(c.reps);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int r = next++; r < c.reps; r = next++) {
      try {
        res.runs[r] = run(inst, w, res.optimum, options[r]);
        res.runs[r].meta.topology = algo == Algorithm::kCentral ? "none" : c.topology;
        res.runs[r].meta.states = inst.states();
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int threads = std::min(c.jobs, c.reps);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<const std::vector<MetricRow>*> all;
  for (const auto& r : res.runs) all.push_back(&r.rows);
  res.mean = mean_rows(all);

  if (!out_dir.empty()) {
    for (const auto& r : res.runs)
      detail::write_rows(out_dir / ("run_seed" + std::to_string(r.meta.seed) + ".csv"), r.rows);
    detail::write_rows(out_dir / "mean.csv", res.mean);
    nlohmann::json meta = metadata_json(res.runs.front().meta);
    meta.erase("seed");
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& r : res.runs) seeds.push_back(r.meta.seed);
    meta["seeds"] = std::move(seeds);
    meta["reps"] = c.reps;
    meta["instance_seed"] = inst.seed();
    meta["h_star"] = res.optimum.value;
    meta["config"] = to_json(c);
    std::ofstream mf(out_dir / "metadata.json");
    if (!mf) throw IoError("cannot write metadata.json");
    mf << meta.dump(2) << '\n';
  }
  return res;
}

}  // namespace dasco
