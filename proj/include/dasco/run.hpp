#pragma once

#include <dasco/algorithms.hpp>
#include <dasco/metrics.hpp>
#include <dasco/network.hpp>
#include <dasco/problem.hpp>

#include <cstdint>
#include <functional>

namespace dasco {

struct RunOptions {
  Algorithm algo = Algorithm::kDascgd;
  StepSchedule schedule = StepSchedule::constant(0.01, 0.01, 0.01);
  CompressionConfig compression;
  std::int64_t rounds = 1000;
  int batch = 5;
  std::uint64_t seed = 0;
  std::int64_t metric_every = 1;
  bool verify_references = true;
};

/// Called with the round index k (0 = initial state) and the state after it.
using RoundObserver = std::function<void(std::int64_t, const NetworkState&)>;

/// K synchronous rounds from init_states(); rows are recorded at k = 0, every
/// `metric_every` rounds, and at k = K. Deterministic in `options.seed`.
inline RunRecord run(const CompositionalProblem& problem, const MixingMatrix& w, const Optimum& opt,
                     const RunOptions& options, const RoundObserver& observer = {}) {
  detail::require(options.rounds >= 1, "round count K must be at least 1");
  detail::require(options.metric_every >= 1, "metric cadence must be at least 1");
  detail::require(options.batch >= 1, "batch must be at least 1");

  const bool central = options.algo == Algorithm::kCentral;
  const bool compressed = options.algo == Algorithm::kCdascgd;
  if (compressed) options.compression.validate(problem.dim(), problem.inner_dim());
  const PooledProblem pooled(problem);
  const CompositionalProblem& local = central ? static_cast<const CompositionalProblem&>(pooled) : problem;

  RunRecord rec;
  rec.meta.algo = std::string(to_string(options.algo));
  rec.meta.n = problem.agents();
  rec.meta.d = problem.dim();
  rec.meta.p = problem.inner_dim();
  rec.meta.K = options.rounds;
  rec.meta.batch = options.batch;
  rec.meta.schedule = options.schedule.kind() == StepSchedule::Kind::kConstant ? "constant" : "inv_sqrt_K";
  const auto first = options.schedule.at(1);
  rec.meta.alpha = first.alpha;
  rec.meta.beta = first.beta;
  rec.meta.gamma = first.gamma;
  if (compressed) {
    const auto& c = options.compression;
    rec.meta.alpha_w = c.alpha_w;
    rec.meta.alpha_x = c.alpha_x;
    rec.meta.alpha_y = c.alpha_y;
    rec.meta.alpha_z = c.alpha_z;
    rec.meta.compressor_x = c.cx.spec();
    rec.meta.compressor_y = c.cy.spec();
    rec.meta.compressor_z = c.cz.spec();
  }
  rec.meta.seed = options.seed;
  rec.meta.rho = central ? 0.0 : w.rho();
  rec.meta.notes = {"stepsize feasibility conditions of the convergence theory are not checked",
                    "bits_cumulative counts network-total transmitted bits"};

  NetworkState state = init_states(local, compressed, options.batch, options.seed);
  if (observer) observer(0, state);
  rec.rows.push_back(compute_metrics(state, problem, opt, 0, 0.0));

  for (std::int64_t k = 1; k <= options.rounds; ++k) {
    const auto sizes = options.schedule.at(k);
    StepResult step;
    switch (options.algo) {
      case Algorithm::kDascgd:
        step = dascgd_step(state, w, problem, sizes, options.batch, options.seed, k);
        break;
      case Algorithm::kCdascgd:
        step = cdascgd_step(state, w, problem, sizes, options.compression, options.batch, options.seed, k,
                            options.verify_references);
        break;
      case Algorithm::kCentral:
        step = centralized_step(state, problem, sizes, options.batch, options.seed, k);
        break;
    }
    state = std::move(step.state);
    rec.bits += step.bits;
    if (observer) observer(k, state);
    if (k % options.metric_every == 0 || k == options.rounds)
      rec.rows.push_back(compute_metrics(state, problem, opt, k, static_cast<double>(rec.bits.total())));
  }
  return rec;
}

}  // namespace dasco
