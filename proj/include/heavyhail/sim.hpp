#pragma once

#include "heavyhail/model.hpp"
#include "heavyhail/policies.hpp"
#include "heavyhail/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace heavyhail {

// Q counts every car in a buffer, including the one a busy server is holding;
// in_service counts those held cars per buffer.
struct SimState {
  double t = 0.0;
  std::vector<std::int64_t> Q;
  std::int64_t Q0 = 0;
  std::int64_t W = 0;
  std::vector<std::int64_t> in_service;
  std::vector<int> assignment;  // activity per server, -1 when idle
  std::vector<std::int64_t> available;
  std::vector<std::uint8_t> busy;

  // Post-warmup accumulators.
  double cum_revenue = 0.0;
  double cum_holding = 0.0;
  std::vector<double> cum_idle_time;
  std::vector<double> cum_activity_time;
  double cum_traveling = 0.0;  // integral of Q0
  double cum_workload = 0.0;   // integral of W
  std::vector<double> cum_queue;  // integral of Q_i
  std::vector<std::int64_t> served;
  std::int64_t travel_completions = 0;
  std::uint64_t event_count = 0;
};

struct SimReport {
  double horizon = 0.0;
  double warmup = 0.0;
  double centering_rate = 0.0;  // n (pi(lambda*) - h0)
  double avg_cost = 0.0;
  double avg_cost_with_idleness = 0.0;  // adds c' I(t)
  double avg_profit_rate = 0.0;
  double revenue = 0.0;
  double holding = 0.0;
  double idleness_cost = 0.0;
  std::vector<std::int64_t> served;
  std::vector<double> idle_fraction;
  std::int64_t travel_completions = 0;
  double mean_traveling_fraction = 0.0;
  double mean_workload = 0.0;
  std::vector<double> mean_queue;
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
};

struct PolicySet {
  PricingPolicy pricing;
  PriceTable table;
  DispatchContext dispatch;
};

class Simulator {
 public:
  enum class Event { Service, Travel, Horizon };

  // Starts with all n cars traveling and every server idle.
  Simulator(const NetworkModel& model, const EconParams& econ, const PolicySet& policies, double warmup,
            std::uint64_t seed);

  // One Gillespie step; stops at `horizon` without applying the pending event.
  Event step(double horizon);
  const SimState& state() const { return s_; }
  SimReport report(double horizon) const;

 private:
  void accumulate(double from, double to);
  void assign(std::size_t server, std::size_t activity);
  DispatchState view() const { return {s_.available, s_.busy}; }

  const NetworkModel& model_;
  const EconParams& econ_;
  const PolicySet& policies_;
  double warmup_;
  std::uint64_t seed_;
  Rng rng_;
  SimState s_;
  std::vector<double> q_cumulative_;
  double holding_rate_ = 0.0;
  double centering_rate_ = 0.0;
};

PolicySet make_policies(const PricingPolicy& pricing, DispatchContext dispatch);

SimReport run_replication(const NetworkModel& model, const EconParams& econ, const PolicySet& policies,
                          double horizon, double warmup, std::uint64_t seed);

struct CellSummary {
  PricingKind pricing = PricingKind::Static;
  DispatchKind dispatch = DispatchKind::Dp2;
  double mean = 0.0;
  double ci_half = 0.0;
  std::vector<SimReport> reports;
  std::vector<double> costs() const;
};

struct ExperimentSummary {
  std::vector<CellSummary> cells;
  const CellSummary* find(PricingKind p, DispatchKind d) const;
};

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};

// Student-t 95% interval; needs at least two values.
MeanCi mean_ci95(const std::vector<double>& values);

}  // namespace heavyhail
