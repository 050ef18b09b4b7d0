// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include "heavyhail/bellman.hpp"
#include "heavyhail/diffusion.hpp"
#include "heavyhail/experiment.hpp"
#include "heavyhail/sim.hpp"
#include "heavyhail/static_plan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace heavyhail;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void run(int id, const char* title, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  o.require(secs < budget_s, "runtime budget " + std::to_string(budget_s) + "s");
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %.1fs%s\n", o.pass ? "PASS" : "FAIL", id, title, secs, o.detail.str().c_str());
  std::fflush(stdout);
}

ModelConfig manhattan() { return load_model_file(std::string(HEAVYHAIL_CONFIG_DIR) + "/manhattan.json"); }

bool near_rel(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

// Heun integration with step window/2e6; classification only.
bool escapes_above(const BellmanProblem& p, double beta, double y_max, double step) {
  const double L = p.h / p.eta;
  const double tol = 1e-9 * std::max(p.r, L);
  const auto f = [&](double y, double v) {
    return 2.0 * (beta + p.alpha_hat * v * v / 4.0 + p.eta * y * (v - L) - p.a * v) / p.sigma2;
  };
  double v = -p.r;
  for (double y = 0.0; y < y_max; y += step) {
    const double k1 = f(y, v);
    const double k2 = f(y + step, v + step * k1);
    v += 0.5 * step * (k1 + k2);
    if (!std::isfinite(v) || v > L + tol) return true;
    if (v < -p.r - tol) return false;
  }
  return true;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

const char* cell_name(PricingKind p, DispatchKind d) {
  static std::string s;
  s = std::string(to_string(p)) + "+" + std::string(to_string(d));
  return s.c_str();
}

struct TargetCell {
  DispatchKind dispatch;
  double stat;
  double dyn;
};

const TargetCell kTable[] = {{DispatchKind::Dp1, 10075.23, 4302.59},
                            {DispatchKind::Dp2, 10607.19, 4059.35},
                            {DispatchKind::StaticSplit, 13066.83, 9021.89},
                            {DispatchKind::Closest, 12100.53, 4766.96}};

void check_orderings(const ExperimentSummary& s, Outcome& o) {
  const CellSummary* best = &s.cells.front();
  for (const CellSummary& c : s.cells) {
    if (c.mean < best->mean) best = &c;
  }
  for (const TargetCell& row : kTable) {
    const double st = s.find(PricingKind::Static, row.dispatch)->mean;
    const double dy = s.find(PricingKind::Dynamic, row.dispatch)->mean;
    o.require(dy < st, std::string("dynamic < static for ") + std::string(to_string(row.dispatch)));
  }
  o.require(best->pricing == PricingKind::Dynamic && best->dispatch == DispatchKind::Dp2,
            std::string("minimum cell is ") + cell_name(best->pricing, best->dispatch));
}

}  // namespace

int main() {
  const ModelConfig cfg = manhattan();

  run(1, "static plan", 1.0, [&](Outcome& o) {
    const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
    const double expected_x[] = {0.965, 1, 0.865, 1, 0.035, 0, 0, 0.118, 0.017, 0};
    double worst = 0.0;
    for (int j = 0; j < 10; ++j) worst = std::max(worst, std::abs(plan.x_star(j) - expected_x[j]));
    const double ra = (plan.incidence.A * plan.x_star - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff();
    const double rr = (plan.R * plan.x_star - plan.nu).cwiseAbs().maxCoeff();
    o.detail << " max|x*-expected|=" << worst << " |Ax-e|=" << ra << " |Rx-nu|=" << rr;
    o.require(worst <= 0.005, "x* within 0.005");
    o.require(ra <= 1e-8 && rr <= 1e-8, "residuals");
  });

  run(2, "workload structure", 1.0, [&](Outcome& o) {
    const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
    const Eigen::MatrixXd G = pool_rate_matrix(plan.pools, plan.lambda_star);
    const double gap = (plan.M * plan.R - G * plan.incidence.A).cwiseAbs().maxCoeff();
    o.detail << " pools=" << plan.pools.count() << " |MR-GA|=" << gap;
    o.require(plan.pools.count() == 1, "single pool");
    o.require(plan.M.rows() == 1 && (plan.M.array() == 1.0).all(), "M = e'");
    o.require(gap <= 1e-12, "MR = GA");
    o.require(check_crp(plan.pools).ok, "CRP");
  });

  run(3, "EWF constants", 1.0, [&](Outcome& o) {
    const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
    const EwfParams p = ewf_params(cfg.network, cfg.econ, plan);
    o.detail << " a=" << p.a() << " sigma2=" << p.sigma2() << " h=" << p.h() << " r=" << p.r()
             << " alpha_hat=" << p.alpha_hat();
    o.require(near_rel(p.a(), 11.88, 0.005), "a");
    o.require(near_rel(p.sigma2(), 5.6125, 0.005), "sigma2");
    o.require(p.h() == 1900.0, "h");
    o.require(near_rel(p.r(), 0.0933, 0.005), "r");
    o.require(near_rel(p.alpha_hat(), 0.2154, 0.01), "alpha_hat");
  });

  run(4, "Bellman solver", 60.0, [&](Outcome& o) {
    const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
    const BellmanProblem p = BellmanProblem::from(ewf_params(cfg.network, cfg.econ, plan));
    const ValueFunction vf = solve_bellman(p);
    const auto& v = vf.values();
    bool monotone = true;
    for (std::size_t k = 1; k < v.size(); ++k) monotone &= v[k] >= v[k - 1];
    const double tail = std::abs(v.back() - p.limit());
    const double res = bellman_residual(vf, p);
    const LinearOdeCheck lin = verify_via_linear_ode(vf, p);

    const double y_max = forward_window(p);
    double lo = 0.0;
    double hi = beta_bracket(p).hi;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (escapes_above(p, mid, y_max, y_max / 2e6) ? hi : lo) = mid;
    }
    const double rel = std::abs(vf.beta_star() - hi) / hi;
    o.detail << " beta*=" << vf.beta_star() << " oracle=" << hi << " rel=" << rel << " ode_res=" << res
             << " linear_res=" << lin.max_residual << " |v(ymax)-h/eta|=" << tail;
    o.require(vf.beta_star() > 0.0, "beta* > 0");
    o.require(v.front() == -p.r, "v(0) = -r");
    o.require(monotone, "nondecreasing");
    o.require(tail <= 1e-3 * p.limit(), "tail limit");
    o.require(res <= 1e-4, "ODE residual");
    o.require(lin.max_residual <= 1e-3, "linear ODE residual");
    o.require(rel <= 1e-4, "oracle beta*");
  });

  run(5, "cost-function oracle", 10.0, [&](Outcome& o) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(gen() % 4);
      Eigen::VectorXd alpha(n);
      for (Eigen::Index i = 0; i < n; ++i) alpha(i) = 0.5 + 20.0 * u(gen);
      const double x = 10.0 * (u(gen) - 0.5);
      Eigen::VectorXd z = Eigen::VectorXd::Constant(n, x / static_cast<double>(n));
      const double step = 1.0 / (2.0 * alpha.maxCoeff());
      for (int it = 0; it < 50000; ++it) {
        Eigen::VectorXd g = 2.0 * alpha.cwiseProduct(z);
        g.array() -= g.mean();
        if (g.norm() < 1e-14) break;
        z -= step * g;
      }
      const double oracle = alpha.dot(z.cwiseProduct(z));
      worst = std::max(worst, std::abs(ewf_cost_function(x, alpha).cost - oracle));
    }
    o.detail << " max|c-oracle|=" << worst;
    o.require(worst <= 1e-6, "match to 1e-6");
  });

  const Scenario full = prepare_scenario(cfg);

  run(6, "full-scale cost grid", 30.0 * 60.0 * 8.0 / std::min(8u, threads()), [&](Outcome& o) {
    ExperimentSpec spec;
    spec.reps = 10;
    spec.horizon = 1000;
    spec.warmup = 200;
    spec.base_seed = cfg.sim.seed;
    spec.threads = threads();
    const ExperimentSummary s = run_experiment(full, spec);
    for (const TargetCell& row : kTable) {
      for (PricingKind pk : {PricingKind::Static, PricingKind::Dynamic}) {
        const CellSummary* c = s.find(pk, row.dispatch);
        const double target = pk == PricingKind::Static ? row.stat : row.dyn;
        const double dev = (c->mean - target) / target;
        o.detail << " " << cell_name(pk, row.dispatch) << "=" << std::lround(c->mean) << "+/-"
                 << std::lround(c->ci_half) << "(" << (dev >= 0 ? "+" : "") << std::lround(100 * dev) << "%)";
        o.require(std::abs(dev) <= 0.10, std::string(cell_name(pk, row.dispatch)) + " within 10%");
      }
    }
    check_orderings(s, o);
  });

  run(6, "desk-scale smoke orderings", 120.0, [&](Outcome& o) {
    ModelConfig small = cfg;
    small.network.n = 1000;
    const Scenario sc = prepare_scenario(small);
    ExperimentSpec spec;
    spec.reps = 3;
    spec.horizon = 100;
    spec.warmup = 20;
    spec.base_seed = cfg.sim.seed;
    spec.threads = threads();
    const ExperimentSummary s = run_experiment(sc, spec);
    for (const CellSummary& c : s.cells) o.detail << " " << cell_name(c.pricing, c.dispatch) << "=" << std::lround(c.mean);
    check_orderings(s, o);
  });

  run(7, "simulator invariants", 600.0, [&](Outcome& o) {
    const PolicySet ps = make_policy_set(full, PricingKind::Dynamic, DispatchKind::Dp2);
    Simulator sim(cfg.network, cfg.econ, ps, 0.0, cfg.sim.seed);
    bool conserved = true;
    while (sim.state().event_count < 2000000) {
      if (sim.step(1e12) == Simulator::Event::Horizon) break;
      const SimState& s = sim.state();
      conserved &= s.Q0 + std::accumulate(s.Q.begin(), s.Q.end(), std::int64_t{0}) == cfg.network.n;
    }
    const SimState& s = sim.state();
    double worst = 0.0;
    for (std::size_t k = 0; k < cfg.network.num_regions; ++k) {
      double total = s.cum_idle_time[k];
      for (std::size_t j : ps.dispatch.by_server[k]) total += s.cum_activity_time[j];
      worst = std::max(worst, std::abs(total - s.t) / s.t);
    }
    const SimReport a = run_replication(cfg.network, cfg.econ, ps, 50, 10, 9);
    const SimReport b = run_replication(cfg.network, cfg.econ, ps, 50, 10, 9);
    const bool same = std::memcmp(&a.avg_cost, &b.avg_cost, sizeof(double)) == 0 && a.events == b.events;
    o.detail << " events=" << s.event_count << " time_accounting_rel_err=" << worst;
    o.require(s.event_count >= 1000000 && conserved, "job conservation");
    o.require(worst <= 1e-12, "time accounting");
    o.require(same, "same-seed determinism");
  });

  run(8, "holding-cost sensitivity", 3600.0, [&](Outcome& o) {
    const double sweep[] = {5, 10, 15, 20};
    ExperimentSpec spec;
    spec.reps = 5;
    spec.horizon = 400;
    spec.warmup = 100;
    spec.base_seed = cfg.sim.seed;
    spec.threads = threads();
    std::vector<ExperimentSummary> points;
    for (double h : sweep) {
      ModelConfig point = cfg;
      point.econ.h.setConstant(h);
      points.push_back(run_experiment(prepare_scenario(point), spec));
    }
    for (std::size_t k = 0; k < points.size(); ++k) {
      o.detail << " h=" << sweep[k] << ":";
      for (const CellSummary& c : points[k].cells) o.detail << " " << std::lround(c.mean);
      for (const TargetCell& row : kTable) {
        const double st = points[k].find(PricingKind::Static, row.dispatch)->mean;
        const double dy = points[k].find(PricingKind::Dynamic, row.dispatch)->mean;
        o.require(dy < st, "dynamic < static at h=" + std::to_string(sweep[k]));
      }
      if (k == 0) continue;
      for (std::size_t c = 0; c < points[k].cells.size(); ++c) {
        const CellSummary& prev = points[k - 1].cells[c];
        const CellSummary& cur = points[k].cells[c];
        const double slack = std::hypot(prev.ci_half, cur.ci_half);
        o.require(cur.mean >= prev.mean - slack,
                  std::string("nondecreasing for ") + cell_name(cur.pricing, cur.dispatch));
      }
    }
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
