#pragma once

#include "heavyhail/bellman.hpp"
#include "heavyhail/diffusion.hpp"
#include "heavyhail/model.hpp"
#include "heavyhail/sim.hpp"
#include "heavyhail/static_plan.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace heavyhail {

// A loaded model with everything derived from it.
struct Scenario {
  ModelConfig config;
  StaticRates rates;
  StaticPlan plan;
  EwfParams ewf;
  std::optional<ValueFunction> value_function;
};

// Plans, checks pooling, derives the workload parameters and (when asked) solves
// the Bellman equation. Throws ModelError when pooling fails.
Scenario prepare_scenario(const ModelConfig& config, bool solve = true, const BellmanOptions& opts = {});

PolicySet make_policy_set(const Scenario& sc, PricingKind pricing, DispatchKind dispatch);

struct ExperimentSpec {
  std::vector<PricingKind> pricing{PricingKind::Static, PricingKind::Dynamic};
  std::vector<DispatchKind> dispatch{DispatchKind::Dp1, DispatchKind::Dp2, DispatchKind::StaticSplit,
                                     DispatchKind::Closest};
  int reps = 10;
  std::uint64_t base_seed = 1;
  double horizon = 1000.0;
  double warmup = 200.0;
  unsigned threads = 1;
};

ExperimentSpec spec_from(const SimSettings& sim);

// Replication k of every cell uses seed base_seed + k. Results do not depend on `threads`.
ExperimentSummary run_experiment(const Scenario& sc, const ExperimentSpec& spec);

}  // namespace heavyhail
