#pragma once

#include "heavyhail/model.hpp"
#include "heavyhail/static_plan.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace heavyhail {

struct BrownianParams {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd Sigma;
  double a = 0.0;
  double sigma2 = 0.0;
};

struct EwfCosts {
  double h = 0.0;             // sqrt(n) * (min_i h_i - h0)
  double h_unscaled = 0.0;    // min_i h_i - h0
  double h0_scaled = 0.0;     // sqrt(n) * h0
  Eigen::VectorXd c_scaled;   // c_i / sqrt(n)
  double r = 0.0;
  std::size_t i_star = 0;
  std::size_t k_star = 0;
  Eigen::VectorXd alpha;
  double alpha_hat = 0.0;
};

// Everything the one-dimensional workload problem needs.
struct EwfParams {
  BrownianParams brownian;
  EwfCosts costs;
  double eta = 0.0;
  double eta_hat = 0.0;
  double sqrt_n = 1.0;

  double a() const { return brownian.a; }
  double sigma2() const { return brownian.sigma2; }
  double h() const { return costs.h; }
  double r() const { return costs.r; }
  double alpha_hat() const { return costs.alpha_hat; }
};

struct DriftCost {
  double cost = 0.0;
  Eigen::VectorXd split;  // zeta*(x), sums to x
};

BrownianParams brownian_params(const NetworkModel& model, const StaticPlan& plan);
EwfCosts ewf_costs(const NetworkModel& model, const EconParams& econ, const StaticPlan& plan);
EwfParams ewf_params(const NetworkModel& model, const EconParams& econ, const StaticPlan& plan);

// Cheapest way to shift total drift by x: c(x) = x^2 / alpha_hat, zeta_i = x / (alpha_i alpha_hat).
DriftCost ewf_cost_function(double x, const Eigen::VectorXd& alpha);

}  // namespace heavyhail
