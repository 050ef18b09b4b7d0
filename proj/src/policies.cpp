#include "heavyhail/policies.hpp"

#include "heavyhail/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace heavyhail {

PricingPolicy PricingPolicy::make_static(const StaticPlan& plan, const EconParams& econ, std::int64_t n) {
  PricingPolicy p;
  p.kind_ = PricingKind::Static;
  p.n_ = n;
  p.sqrt_n_ = std::sqrt(static_cast<double>(n));
  p.lambda_star_ = plan.lambda_star;
  p.p_star_ = plan.p_star;
  p.demand_a_ = econ.demand_a;
  p.demand_b_ = econ.demand_b;
  p.alpha_ = econ.demand_b.cwiseInverse();
  return p;
}

PricingPolicy PricingPolicy::make_dynamic(const StaticPlan& plan, const EconParams& econ, const EwfParams& ewf,
                                          std::int64_t n, ValueFunction vf) {
  PricingPolicy p = make_static(plan, econ, n);
  p.kind_ = PricingKind::Dynamic;
  p.alpha_ = ewf.costs.alpha;
  p.vf_ = std::move(vf);
  if (p.vf_.grid().empty()) throw ModelError("dynamic pricing requires a solved value function");
  return p;
}

double PricingPolicy::rate_floor(std::size_t i) const {
  return 0.01 * static_cast<double>(n_) * lambda_star_(static_cast<Eigen::Index>(i));
}

double PricingPolicy::rate_ceiling(std::size_t i) const {
  return static_cast<double>(n_) * demand_a_(static_cast<Eigen::Index>(i));
}

Quote PricingPolicy::current_prices(std::int64_t W) const {
  if (W < 0) throw DomainError("current_prices: W must be nonnegative");
  const Eigen::Index I = lambda_star_.size();
  const double nd = static_cast<double>(n_);
  Quote q{Eigen::VectorXd(I), Eigen::VectorXd(I), Eigen::VectorXd(I)};
  if (kind_ == PricingKind::Static) {
    q.rates = nd * lambda_star_;
    q.prices = p_star_;
    q.expansion_prices = p_star_;
    return q;
  }
  const double v = vf_(static_cast<double>(W) / sqrt_n_);
  for (Eigen::Index i = 0; i < I; ++i) {
    const double shift = v / (2.0 * alpha_(i));
    const double raw = nd * lambda_star_(i) + sqrt_n_ * shift;
    const double rate = std::clamp(raw, rate_floor(static_cast<std::size_t>(i)), rate_ceiling(static_cast<std::size_t>(i)));
    q.rates(i) = rate;
    q.prices(i) = (demand_a_(i) - rate / nd) / demand_b_(i);
    q.expansion_prices(i) = p_star_(i) - shift / (demand_b_(i) * sqrt_n_);
  }
  return q;
}

PriceTable tabulate(const PricingPolicy& pricing) {
  PriceTable table;
  const Quote base = pricing.current_prices(0);
  table.regions = static_cast<std::size_t>(base.rates.size());
  const auto rows = static_cast<std::size_t>(pricing.n()) + 1;
  table.rates.resize(rows * table.regions);
  table.prices.resize(rows * table.regions);
  for (std::size_t W = 0; W < rows; ++W) {
    const Quote q = pricing.current_prices(static_cast<std::int64_t>(W));
    for (std::size_t i = 0; i < table.regions; ++i) {
      table.rates[W * table.regions + i] = q.rates(static_cast<Eigen::Index>(i));
      table.prices[W * table.regions + i] = q.prices(static_cast<Eigen::Index>(i));
    }
  }
  return table;
}

DispatchContext make_dispatch_context(DispatchKind kind, const NetworkModel& model, const EconParams& econ,
                                      const StaticPlan& plan, int safety_stock) {
  if (safety_stock < 0) throw ModelError("dispatch.safety_stock: s >= 0 violated");
  DispatchContext ctx;
  ctx.kind = kind;
  ctx.regions = model.num_regions;
  ctx.activities = model.activities;
  ctx.by_server.resize(ctx.regions);
  ctx.by_buffer.resize(ctx.regions);
  for (std::size_t j = 0; j < model.num_activities(); ++j) {
    ctx.by_server[model.activities[j].server].push_back(j);
    ctx.by_buffer[model.activities[j].buffer].push_back(j);
    ctx.basic.push_back(plan.is_basic(j));
    ctx.x_star.push_back(plan.x_star(static_cast<Eigen::Index>(j)));
    ctx.threshold.push_back(model.is_local(j) ? 1 : std::max<std::int64_t>(1, safety_stock));
  }
  for (std::size_t i = 0; i < ctx.regions; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    ctx.holding.push_back(econ.h(k));
    ctx.idle_priority.push_back(econ.c(k) / plan.lambda_star(k));
  }
  ctx.distances = model.distances;
  return ctx;
}

namespace {

std::int64_t avail(const DispatchState& st, std::size_t buffer) { return st.available[buffer]; }

// Longest available queue among activities passing `eligible`; ties to the lowest buffer.
template <class Pred>
std::optional<std::size_t> longest_queue(const DispatchContext& ctx, const DispatchState& st, std::size_t server,
                                         Pred eligible) {
  std::optional<std::size_t> best;
  for (std::size_t j : ctx.by_server[server]) {
    const std::size_t b = ctx.activities[j].buffer;
    if (avail(st, b) <= 0 || !eligible(j)) continue;
    if (!best) {
      best = j;
      continue;
    }
    const std::size_t bb = ctx.activities[*best].buffer;
    if (avail(st, b) > avail(st, bb) || (avail(st, b) == avail(st, bb) && b < bb)) best = j;
  }
  return best;
}

// Sample one of `pool` with probability proportional to x*_j among those passing `eligible`.
template <class Pred>
std::optional<std::size_t> split_sample(const DispatchContext& ctx, const std::vector<std::size_t>& pool,
                                        Pred eligible, Rng& rng) {
  double total = 0.0;
  std::size_t count = 0;
  std::size_t last = 0;
  for (std::size_t j : pool) {
    if (!eligible(j)) continue;
    total += ctx.x_star[j];
    ++count;
    last = j;
  }
  if (count == 0) return std::nullopt;
  if (count == 1) return last;
  double u = rng.uniform() * total;
  for (std::size_t j : pool) {
    if (!eligible(j)) continue;
    u -= ctx.x_star[j];
    if (u <= 0.0) return j;
  }
  return last;
}

}  // namespace

std::optional<std::size_t> dp1_on_server_idle(const DispatchContext& ctx, const DispatchState& st,
                                              std::size_t server) {
  std::optional<std::size_t> best;
  for (std::size_t j : ctx.by_server[server]) {
    const std::size_t b = ctx.activities[j].buffer;
    if (!ctx.basic[j] || avail(st, b) < ctx.threshold[j]) continue;
    if (!best) {
      best = j;
      continue;
    }
    const std::size_t bb = ctx.activities[*best].buffer;
    if (ctx.holding[b] != ctx.holding[bb]) {
      if (ctx.holding[b] > ctx.holding[bb]) best = j;
      continue;
    }
    // Equal holding costs: own buffer first, then the longer queue.
    if (bb == server) continue;
    if (b == server || avail(st, b) > avail(st, bb) || (avail(st, b) == avail(st, bb) && b < bb)) best = j;
  }
  return best;
}

std::optional<std::size_t> dp1_on_buffer_reaches_stock(const DispatchContext& ctx, const DispatchState& st,
                                                       std::size_t buffer) {
  std::optional<std::size_t> best;
  for (std::size_t j : ctx.by_buffer[buffer]) {
    const std::size_t k = ctx.activities[j].server;
    if (!ctx.basic[j] || st.server_busy[k] || avail(st, buffer) < ctx.threshold[j]) continue;
    if (!best) {
      best = j;
      continue;
    }
    const std::size_t kb = ctx.activities[*best].server;
    if (ctx.idle_priority[k] > ctx.idle_priority[kb] || (ctx.idle_priority[k] == ctx.idle_priority[kb] && k < kb)) {
      best = j;
    }
  }
  return best;
}

std::optional<std::size_t> dp2_select(const DispatchContext& ctx, const DispatchState& st, std::size_t server) {
  if (avail(st, server) > 0) return server;  // local activity j == server
  if (auto j = longest_queue(ctx, st, server, [&](std::size_t a) { return ctx.basic[a]; })) return j;
  return longest_queue(ctx, st, server, [&](std::size_t a) { return !ctx.basic[a]; });
}

std::optional<std::size_t> static_split_select(const DispatchContext& ctx, const DispatchState& st,
                                               std::size_t server, Rng& rng) {
  return split_sample(
      ctx, ctx.by_server[server],
      [&](std::size_t j) { return ctx.basic[j] && avail(st, ctx.activities[j].buffer) > 0; }, rng);
}

std::optional<std::size_t> closest_driver_select(const DispatchContext& ctx, const DispatchState& st,
                                                 std::size_t server) {
  std::optional<std::size_t> best;
  for (std::size_t j : ctx.by_server[server]) {
    const std::size_t b = ctx.activities[j].buffer;
    if (avail(st, b) <= 0) continue;
    if (!best) {
      best = j;
      continue;
    }
    const std::size_t bb = ctx.activities[*best].buffer;
    const double d = ctx.distances(static_cast<Eigen::Index>(server), static_cast<Eigen::Index>(b));
    const double db = ctx.distances(static_cast<Eigen::Index>(server), static_cast<Eigen::Index>(bb));
    if (d < db || (d == db && b < bb)) best = j;
  }
  return best;
}

std::optional<std::size_t> on_server_free(const DispatchContext& ctx, const DispatchState& st, std::size_t server,
                                          Rng& rng) {
  switch (ctx.kind) {
    case DispatchKind::Dp1: return dp1_on_server_idle(ctx, st, server);
    case DispatchKind::Dp2: return dp2_select(ctx, st, server);
    case DispatchKind::StaticSplit: return static_split_select(ctx, st, server, rng);
    case DispatchKind::Closest: return closest_driver_select(ctx, st, server);
  }
  return std::nullopt;
}

std::optional<std::size_t> on_buffer_arrival(const DispatchContext& ctx, const DispatchState& st, std::size_t buffer,
                                             Rng& rng) {
  if (ctx.kind == DispatchKind::Dp1) return dp1_on_buffer_reaches_stock(ctx, st, buffer);
  if (avail(st, buffer) <= 0) return std::nullopt;

  // Idle servers have nothing else to do, so any idle server able to serve the
  // buffer would pick it; the rules below only decide which one does.
  const auto idle = [&](std::size_t j) { return !st.server_busy[ctx.activities[j].server]; };
  if (ctx.kind == DispatchKind::StaticSplit) {
    return split_sample(ctx, ctx.by_buffer[buffer], [&](std::size_t j) { return ctx.basic[j] && idle(j); }, rng);
  }
  const auto b = static_cast<Eigen::Index>(buffer);
  const auto key = [&](std::size_t j) {
    const std::size_t k = ctx.activities[j].server;
    // DP2: local, then basic, then nonbasic. Closest: distance to the buffer.
    const double primary = ctx.kind == DispatchKind::Dp2 ? (k == buffer ? 0.0 : (ctx.basic[j] ? 1.0 : 2.0))
                                                         : ctx.distances(static_cast<Eigen::Index>(k), b);
    return std::pair{primary, k};
  };
  std::optional<std::size_t> best;
  for (std::size_t j : ctx.by_buffer[buffer]) {
    if (idle(j) && (!best || key(j) < key(*best))) best = j;
  }
  return best;
}

}  // namespace heavyhail
