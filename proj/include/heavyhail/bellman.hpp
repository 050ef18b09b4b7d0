#pragma once

#include "heavyhail/diffusion.hpp"

#include <cstddef>
#include <vector>

namespace heavyhail {

// Coefficients of (sigma2/2) v' = beta + (alpha_hat/4) v^2 + eta y (v - h/eta) - a v,  v(0) = -r.
struct BellmanProblem {
  double a = 0.0;
  double sigma2 = 0.0;
  double eta = 0.0;
  double h = 0.0;
  double r = 0.0;
  double alpha_hat = 0.0;

  static BellmanProblem from(const EwfParams& p);
  double limit() const { return h / eta; }
  // beta + (alpha_hat/4) v^2 + (eta y - a) v - h y
  double drift(double y, double v, double beta) const;
  double slope(double y, double v, double beta) const { return 2.0 * drift(y, v, beta) / sigma2; }
  double escape_tol() const;
};

enum class Escape { Below, Above, Converged };

struct IvpTrajectory {
  double beta = 0.0;
  double step = 0.0;
  std::vector<double> grid;
  std::vector<double> v;
  Escape classification = Escape::Converged;
};

struct BetaBracket {
  double lo = 0.0;
  double hi = 0.0;
  double hi_formula = 0.0;
  bool case2 = false;
  int doublings = 0;
};

struct BellmanOptions {
  double y_max = 0.0;      // forward shooting window; 0 selects forward_window()
  double step = 0.0;       // RK4 step; 0 selects y_max / 2e5
  double tol_beta = 0.0;   // 0 bisects to floating-point resolution
  int max_iter = 200;
  double match_tol = 1e-10;  // relative agreement of the bracketing trajectories
  double tail_tol = 1e-4;    // relative distance to h/eta at the far end of the grid
  double tail_ratio = 1e-3;  // tail step growth
};

struct SolveDiagnostics {
  int iterations = 0;
  double beta_lo = 0.0;
  double beta_hi = 0.0;
  double y_forward = 0.0;
  double step = 0.0;
  double y_match = 0.0;
  double splice_gap = 0.0;
  double correction = 0.0;
};

class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(double beta_star, std::vector<double> grid, std::vector<double> values, double limit,
                double alpha_hat);

  double beta_star() const { return beta_star_; }
  double limit() const { return limit_; }
  double alpha_hat() const { return alpha_hat_; }
  double y_max() const { return grid_.back(); }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  // Linear interpolation; h/eta beyond the grid.
  double operator()(double y) const;

  SolveDiagnostics diagnostics;

 private:
  double beta_star_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> values_;
  double limit_ = 0.0;
  double alpha_hat_ = 0.0;
};

double forward_window(const BellmanProblem& p);

BetaBracket beta_bracket(const BellmanProblem& p, const BellmanOptions& opts = {});
IvpTrajectory integrate_ivp(double beta, const BellmanProblem& p, double y_max, double step);
ValueFunction solve_bellman(const BellmanProblem& p, const BellmanOptions& opts = {});

double theta_star(const ValueFunction& vf, double w);

// Largest pointwise ODE residual on the interior grid, each divided by the sum of
// the magnitudes of the terms of the equation at that point.
double bellman_residual(const ValueFunction& vf, const BellmanProblem& p);

struct LinearOdeCheck {
  double max_residual = 0.0;  // |y'' - q1 y' + q2 q0 y| / |y|
  double y0 = 0.0;
  double dy0 = 0.0;
  double dy0_expected = 0.0;
};

// y(x) = exp(-q2 int_0^x v) must solve y'' - q1 y' + q2 q0 y = 0. Checked on [0, y_check]
// (whole grid when y_check <= 0).
LinearOdeCheck verify_via_linear_ode(const ValueFunction& vf, const BellmanProblem& p, double y_check = 0.0);

}  // namespace heavyhail
