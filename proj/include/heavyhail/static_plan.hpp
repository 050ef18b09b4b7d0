#pragma once

#include "heavyhail/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace heavyhail {

inline constexpr double kTolBasic = 1e-9;
inline constexpr double kPlanResidualTol = 1e-8;

struct StaticRates {
  Eigen::VectorXd lambda_star;
  Eigen::VectorXd p_star;
};

struct BufferPools {
  std::vector<std::vector<std::size_t>> buffers;  // pool l -> sorted buffer indices
  std::vector<std::vector<std::size_t>> servers;  // pool l -> servers with a basic activity into the pool
  std::vector<std::size_t> pool_of_buffer;

  std::size_t count() const { return buffers.size(); }
};

struct StaticPlan {
  Eigen::VectorXd lambda_star;
  Eigen::VectorXd p_star;
  Eigen::VectorXd mu_star;  // mu_j = lambda*_{s(j)}
  IncidenceMatrices incidence;
  Eigen::MatrixXd R;
  Eigen::VectorXd nu;
  double eta = 0.0;
  double eta_hat = 0.0;
  Eigen::VectorXd x_star;
  std::vector<std::size_t> basic;
  BufferPools pools;
  Eigen::MatrixXd M;

  bool is_basic(std::size_t j) const { return x_star(static_cast<Eigen::Index>(j)) > kTolBasic; }
};

struct CrpCheck {
  bool ok = false;
  std::string diagnostics;
};

StaticRates optimal_static_rates(const EconParams& econ);

// Throws ModelError on a violated heavy-traffic assumption or a non-unique plan.
StaticPlan nominal_plan(const NetworkModel& model, const StaticRates& rates);

BufferPools buffer_pools(const NetworkModel& model, const std::vector<std::size_t>& basic);
Eigen::MatrixXd workload_matrix(const BufferPools& pools, std::size_t num_regions);
// G(l, k) = lambda*_k if server k belongs to pool l.
Eigen::MatrixXd pool_rate_matrix(const BufferPools& pools, const Eigen::VectorXd& lambda_star);
CrpCheck check_crp(const BufferPools& pools);

std::string plan_json(const StaticPlan& plan);

}  // namespace heavyhail
