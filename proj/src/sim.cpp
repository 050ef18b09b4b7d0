#include "heavyhail/sim.hpp"

#include "heavyhail/error.hpp"
#include "heavyhail/static_plan.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace heavyhail {

Simulator::Simulator(const NetworkModel& model, const EconParams& econ, const PolicySet& policies, double warmup,
                     std::uint64_t seed)
    : model_(model), econ_(econ), policies_(policies), warmup_(warmup), seed_(seed), rng_(seed) {
  const std::size_t I = model.num_regions;
  if (policies.table.regions != I || policies.dispatch.regions != I) {
    throw ModelError("simulator: policy dimensions do not match the network");
  }
  s_.Q.assign(I, 0);
  s_.Q0 = model.n;
  s_.in_service.assign(I, 0);
  s_.assignment.assign(I, -1);
  s_.available.assign(I, 0);
  s_.busy.assign(I, 0);
  s_.cum_idle_time.assign(I, 0.0);
  s_.cum_activity_time.assign(model.num_activities(), 0.0);
  s_.served.assign(I, 0);
  s_.cum_queue.assign(I, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    acc += model.q(static_cast<Eigen::Index>(i));
    q_cumulative_.push_back(acc);
  }
  q_cumulative_.back() = 1.0;
  holding_rate_ = econ.h0 * static_cast<double>(s_.Q0);
  const double n = static_cast<double>(model.n);
  centering_rate_ = n * (revenue_rate(econ, optimal_static_rates(econ).lambda_star) - econ.h0);
}

void Simulator::accumulate(double from, double to) {
  const double lo = std::max(from, warmup_);
  if (to <= lo) return;
  const double len = to - lo;
  s_.cum_holding += holding_rate_ * len;
  s_.cum_traveling += static_cast<double>(s_.Q0) * len;
  s_.cum_workload += static_cast<double>(s_.W) * len;
  for (std::size_t k = 0; k < s_.assignment.size(); ++k) {
    s_.cum_queue[k] += static_cast<double>(s_.Q[k]) * len;
    if (s_.assignment[k] < 0) {
      s_.cum_idle_time[k] += len;
    } else {
      s_.cum_activity_time[static_cast<std::size_t>(s_.assignment[k])] += len;
    }
  }
}

void Simulator::assign(std::size_t server, std::size_t activity) {
  const std::size_t b = model_.activities[activity].buffer;
  s_.assignment[server] = static_cast<int>(activity);
  s_.busy[server] = 1;
  ++s_.in_service[b];
  --s_.available[b];
}

Simulator::Event Simulator::step(double horizon) {
  const std::size_t I = model_.num_regions;
  const double* rates = policies_.table.rates_at(s_.W);
  const double travel_rate = model_.eta_n * static_cast<double>(s_.Q0);
  double total = travel_rate;
  for (std::size_t k = 0; k < I; ++k) {
    if (s_.busy[k]) total += rates[k];
  }
  const double dt = total > 0.0 ? rng_.exponential(total) : horizon;
  const double t_next = s_.t + dt;
  if (t_next >= horizon) {
    accumulate(s_.t, horizon);
    s_.t = horizon;
    return Event::Horizon;
  }
  accumulate(s_.t, t_next);
  s_.t = t_next;
  ++s_.event_count;
  const bool counted = t_next > warmup_;

  double u = rng_.uniform() * total;
  if (u > travel_rate) {
    u -= travel_rate;
    std::size_t server = I;
    std::size_t last_busy = I;
    for (std::size_t k = 0; k < I; ++k) {
      if (!s_.busy[k]) continue;
      last_busy = k;
      if (u <= rates[k]) {
        server = k;
        break;
      }
      u -= rates[k];
    }
    if (server == I) server = last_busy;  // rounding at the top end
    if (server < I) {
      const auto j = static_cast<std::size_t>(s_.assignment[server]);
      const std::size_t b = model_.activities[j].buffer;
      if (counted) {
        s_.cum_revenue += policies_.table.prices_at(s_.W)[server];
        ++s_.served[server];
      }
      --s_.Q[b];
      --s_.in_service[b];
      --s_.W;
      ++s_.Q0;
      holding_rate_ += econ_.h0 - econ_.h(static_cast<Eigen::Index>(b));
      s_.assignment[server] = -1;
      s_.busy[server] = 0;
      if (auto next = on_server_free(policies_.dispatch, view(), server, rng_)) assign(server, *next);
      return Event::Service;
    }
  }

  // Travel completion: the car joins buffer i with probability q_i.
  const double v = rng_.uniform();
  std::size_t i = 0;
  while (i + 1 < I && v > q_cumulative_[i]) ++i;
  --s_.Q0;
  ++s_.Q[i];
  ++s_.available[i];
  ++s_.W;
  holding_rate_ += econ_.h(static_cast<Eigen::Index>(i)) - econ_.h0;
  if (counted) ++s_.travel_completions;
  if (auto j = on_buffer_arrival(policies_.dispatch, view(), i, rng_)) assign(model_.activities[*j].server, *j);
  return Event::Travel;
}

SimReport Simulator::report(double horizon) const {
  SimReport r;
  r.horizon = horizon;
  r.warmup = warmup_;
  r.seed = seed_;
  r.events = s_.event_count;
  r.centering_rate = centering_rate_;
  r.revenue = s_.cum_revenue;
  r.holding = s_.cum_holding;
  r.served = s_.served;
  r.travel_completions = s_.travel_completions;
  const double T = horizon - warmup_;
  const double n = static_cast<double>(model_.n);
  for (std::size_t k = 0; k < s_.cum_idle_time.size(); ++k) {
    r.idle_fraction.push_back(s_.cum_idle_time[k] / T);
    r.idleness_cost += econ_.c(static_cast<Eigen::Index>(k)) * s_.cum_idle_time[k];
  }
  r.avg_profit_rate = (r.revenue - r.holding) / T;
  r.avg_cost = centering_rate_ - r.avg_profit_rate;
  r.avg_cost_with_idleness = r.avg_cost + r.idleness_cost / T;
  r.mean_traveling_fraction = s_.cum_traveling / (T * n);
  r.mean_workload = s_.cum_workload / T;
  for (double x : s_.cum_queue) r.mean_queue.push_back(x / T);
  return r;
}

PolicySet make_policies(const PricingPolicy& pricing, DispatchContext dispatch) {
  return PolicySet{pricing, tabulate(pricing), std::move(dispatch)};
}

SimReport run_replication(const NetworkModel& model, const EconParams& econ, const PolicySet& policies,
                          double horizon, double warmup, std::uint64_t seed) {
  if (!(warmup >= 0.0) || !(horizon > warmup)) {
    throw ModelError("run_replication: horizon > warmup >= 0 required (empty accounting window)");
  }
  Simulator sim(model, econ, policies, warmup, seed);
  while (sim.step(horizon) != Simulator::Event::Horizon) {
  }
  return sim.report(horizon);
}

std::vector<double> CellSummary::costs() const {
  std::vector<double> out;
  for (const SimReport& r : reports) out.push_back(r.avg_cost);
  return out;
}

const CellSummary* ExperimentSummary::find(PricingKind p, DispatchKind d) const {
  for (const CellSummary& c : cells) {
    if (c.pricing == p && c.dispatch == d) return &c;
  }
  return nullptr;
}

MeanCi mean_ci95(const std::vector<double>& values) {
  if (values.size() < 2) throw ModelError("confidence interval needs at least 2 replications");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  return {mean, boost::math::quantile(dist, 0.975) * sd / std::sqrt(n)};
}

}  // namespace heavyhail
