#include "heavyhail/experiment.hpp"

#include "heavyhail/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace heavyhail {

Scenario prepare_scenario(const ModelConfig& config, bool solve, const BellmanOptions& opts) {
  Scenario sc;
  sc.config = config;
  sc.rates = optimal_static_rates(config.econ);
  sc.plan = nominal_plan(config.network, sc.rates);
  const CrpCheck crp = check_crp(sc.plan.pools);
  if (!crp.ok) throw ModelError(crp.diagnostics);
  sc.ewf = ewf_params(config.network, config.econ, sc.plan);
  if (solve) sc.value_function = solve_bellman(BellmanProblem::from(sc.ewf), opts);
  return sc;
}

PolicySet make_policy_set(const Scenario& sc, PricingKind pricing, DispatchKind dispatch) {
  const auto& cfg = sc.config;
  DispatchContext ctx = make_dispatch_context(dispatch, cfg.network, cfg.econ, sc.plan, cfg.sim.safety_stock);
  if (pricing == PricingKind::Static) {
    return make_policies(PricingPolicy::make_static(sc.plan, cfg.econ, cfg.network.n), std::move(ctx));
  }
  if (!sc.value_function) throw ModelError("dynamic pricing requires a solved value function");
  return make_policies(PricingPolicy::make_dynamic(sc.plan, cfg.econ, sc.ewf, cfg.network.n, *sc.value_function),
                       std::move(ctx));
}

ExperimentSpec spec_from(const SimSettings& sim) {
  ExperimentSpec spec;
  spec.reps = sim.replications;
  spec.base_seed = sim.seed;
  spec.horizon = sim.horizon_hours;
  spec.warmup = sim.warmup_hours;
  return spec;
}

ExperimentSummary run_experiment(const Scenario& sc, const ExperimentSpec& spec) {
  if (spec.reps < 2) throw ModelError("experiment: reps >= 2 required (confidence interval undefined)");
  if (!(spec.warmup >= 0.0) || !(spec.horizon > spec.warmup)) {
    throw ModelError("experiment: horizon > warmup >= 0 required");
  }

  ExperimentSummary summary;
  std::vector<PolicySet> policies;
  for (PricingKind p : spec.pricing) {
    for (DispatchKind d : spec.dispatch) {
      CellSummary cell;
      cell.pricing = p;
      cell.dispatch = d;
      cell.reports.resize(static_cast<std::size_t>(spec.reps));
      summary.cells.push_back(std::move(cell));
      policies.push_back(make_policy_set(sc, p, d));
    }
  }

  const std::size_t jobs = summary.cells.size() * static_cast<std::size_t>(spec.reps);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t cell = job / static_cast<std::size_t>(spec.reps);
      const std::size_t rep = job % static_cast<std::size_t>(spec.reps);
      try {
        summary.cells[cell].reports[rep] = run_replication(sc.config.network, sc.config.econ, policies[cell],
                                                           spec.horizon, spec.warmup, spec.base_seed + rep);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(jobs)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (CellSummary& cell : summary.cells) {
    const MeanCi ci = mean_ci95(cell.costs());
    cell.mean = ci.mean;
    cell.ci_half = ci.half_width;
  }
  return summary;
}

}  // namespace heavyhail
