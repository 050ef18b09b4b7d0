#pragma once

#include "heavyhail/bellman.hpp"
#include "heavyhail/diffusion.hpp"
#include "heavyhail/model.hpp"
#include "heavyhail/rng.hpp"
#include "heavyhail/static_plan.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace heavyhail {

struct Quote {
  Eigen::VectorXd prices;            // exact inverse of the chosen demand rate
  Eigen::VectorXd rates;             // per-system demand rates lambda_i^n
  Eigen::VectorXd expansion_prices;  // first-order expansion, diagnostics only
};

class PricingPolicy {
 public:
  static PricingPolicy make_static(const StaticPlan& plan, const EconParams& econ, std::int64_t n);
  static PricingPolicy make_dynamic(const StaticPlan& plan, const EconParams& econ, const EwfParams& ewf,
                                    std::int64_t n, ValueFunction vf);

  PricingKind kind() const { return kind_; }
  std::int64_t n() const { return n_; }
  const ValueFunction* value_function() const { return kind_ == PricingKind::Dynamic ? &vf_ : nullptr; }

  // W is the total number of cars waiting in buffers.
  Quote current_prices(std::int64_t W) const;
  double rate_floor(std::size_t i) const;
  double rate_ceiling(std::size_t i) const;

 private:
  PricingKind kind_ = PricingKind::Static;
  std::int64_t n_ = 0;
  double sqrt_n_ = 1.0;
  Eigen::VectorXd lambda_star_;
  Eigen::VectorXd p_star_;
  Eigen::VectorXd demand_a_;
  Eigen::VectorXd demand_b_;
  Eigen::VectorXd alpha_;
  ValueFunction vf_;
};

// Rates and prices for every W in [0, n], row-major by W.
struct PriceTable {
  std::size_t regions = 0;
  std::vector<double> rates;
  std::vector<double> prices;

  const double* rates_at(std::int64_t W) const { return rates.data() + static_cast<std::size_t>(W) * regions; }
  const double* prices_at(std::int64_t W) const { return prices.data() + static_cast<std::size_t>(W) * regions; }
};

PriceTable tabulate(const PricingPolicy& pricing);

// Static structure the dispatch rules read.
struct DispatchContext {
  DispatchKind kind = DispatchKind::Dp2;
  std::size_t regions = 0;
  std::vector<Activity> activities;
  std::vector<std::vector<std::size_t>> by_server;  // ascending activity index
  std::vector<std::vector<std::size_t>> by_buffer;
  std::vector<bool> basic;
  std::vector<double> x_star;
  std::vector<double> holding;        // h_i (per-system)
  std::vector<double> idle_priority;  // c_k / lambda*_k
  std::vector<std::int64_t> threshold;  // DP1 eligibility per activity
  Eigen::MatrixXd distances;
};

DispatchContext make_dispatch_context(DispatchKind kind, const NetworkModel& model, const EconParams& econ,
                                      const StaticPlan& plan, int safety_stock);

// available[i] counts cars in buffer i not already held by a busy server;
// server_busy[k] tells whether server k holds a car.
struct DispatchState {
  std::span<const std::int64_t> available;
  std::span<const std::uint8_t> server_busy;
};

// Each selector returns an activity index, or nothing to leave the server idle.
std::optional<std::size_t> dp1_on_server_idle(const DispatchContext& ctx, const DispatchState& st, std::size_t server);
std::optional<std::size_t> dp1_on_buffer_reaches_stock(const DispatchContext& ctx, const DispatchState& st,
                                                       std::size_t buffer);
std::optional<std::size_t> dp2_select(const DispatchContext& ctx, const DispatchState& st, std::size_t server);
std::optional<std::size_t> static_split_select(const DispatchContext& ctx, const DispatchState& st,
                                               std::size_t server, Rng& rng);
std::optional<std::size_t> closest_driver_select(const DispatchContext& ctx, const DispatchState& st,
                                                 std::size_t server);

// Policy-dispatching hooks used by the simulator.
std::optional<std::size_t> on_server_free(const DispatchContext& ctx, const DispatchState& st, std::size_t server,
                                          Rng& rng);
std::optional<std::size_t> on_buffer_arrival(const DispatchContext& ctx, const DispatchState& st, std::size_t buffer,
                                             Rng& rng);

}  // namespace heavyhail
