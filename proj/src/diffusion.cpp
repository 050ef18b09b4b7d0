#include "heavyhail/diffusion.hpp"

#include "heavyhail/error.hpp"

#include <cmath>

namespace heavyhail {

BrownianParams brownian_params(const NetworkModel& model, const StaticPlan& plan) {
  const Eigen::Index I = static_cast<Eigen::Index>(model.num_regions);
  BrownianParams out;
  out.gamma = plan.eta_hat * model.q;
  const Eigen::MatrixXd outer = plan.eta * model.q * model.q.transpose();
  out.Sigma = 0.5 * (outer + outer.transpose());
  for (Eigen::Index i = 0; i < I; ++i) {
    double served = 0.0;
    for (std::size_t j = 0; j < model.num_activities(); ++j) {
      if (model.activities[j].buffer == static_cast<std::size_t>(i)) {
        served += plan.mu_star(static_cast<Eigen::Index>(j)) * plan.x_star(static_cast<Eigen::Index>(j));
      }
    }
    out.Sigma(i, i) = model.q(i) * plan.eta + served;
  }
  out.a = out.gamma.sum();
  out.sigma2 = out.Sigma.sum();
  return out;
}

EwfCosts ewf_costs(const NetworkModel& model, const EconParams& econ, const StaticPlan& plan) {
  const Eigen::Index I = static_cast<Eigen::Index>(model.num_regions);
  const double sqrt_n = std::sqrt(static_cast<double>(model.n));
  EwfCosts out;

  Eigen::Index i_star = 0;
  for (Eigen::Index i = 1; i < I; ++i) {
    if (econ.h(i) < econ.h(i_star)) i_star = i;
  }
  out.i_star = static_cast<std::size_t>(i_star);
  out.h_unscaled = econ.h(i_star) - econ.h0;
  if (!(out.h_unscaled > 0.0)) throw ModelError("costs: effective holding cost h > 0 violated");
  out.h = sqrt_n * out.h_unscaled;
  out.h0_scaled = sqrt_n * econ.h0;

  out.c_scaled = econ.c / sqrt_n;
  Eigen::Index k_star = -1;
  for (Eigen::Index k = 0; k < I; ++k) {
    if (!(plan.lambda_star(k) > 0.0)) {
      throw ModelError("lambda_star[" + std::to_string(k + 1) + "] = 0: effective idling cost undefined");
    }
    if (k_star < 0 || out.c_scaled(k) / plan.lambda_star(k) < out.c_scaled(k_star) / plan.lambda_star(k_star)) {
      k_star = k;
    }
  }
  out.k_star = static_cast<std::size_t>(k_star);
  out.r = out.c_scaled(k_star) / plan.lambda_star(k_star);

  // alpha_i = -(Lambda^-1)'(lambda*) - (lambda*/2)(Lambda^-1)''(lambda*) = 1/b_i for linear demand.
  out.alpha = econ.demand_b.cwiseInverse();
  out.alpha_hat = out.alpha.cwiseInverse().sum();
  return out;
}

EwfParams ewf_params(const NetworkModel& model, const EconParams& econ, const StaticPlan& plan) {
  EwfParams p;
  p.brownian = brownian_params(model, plan);
  p.costs = ewf_costs(model, econ, plan);
  p.eta = plan.eta;
  p.eta_hat = plan.eta_hat;
  p.sqrt_n = std::sqrt(static_cast<double>(model.n));
  return p;
}

DriftCost ewf_cost_function(double x, const Eigen::VectorXd& alpha) {
  const double alpha_hat = alpha.cwiseInverse().sum();
  DriftCost out;
  out.cost = x * x / alpha_hat;
  out.split = alpha.cwiseInverse() * (x / alpha_hat);
  return out;
}

}  // namespace heavyhail
