#include "heavyhail/static_plan.hpp"

#include "heavyhail/error.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace heavyhail {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

nlohmann::json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

}  // namespace

StaticRates optimal_static_rates(const EconParams& econ) {
  StaticRates out;
  out.lambda_star = econ.demand_a / 2.0;
  out.p_star = econ.demand_a.cwiseQuotient(2.0 * econ.demand_b);
  return out;
}

StaticPlan nominal_plan(const NetworkModel& model, const StaticRates& rates) {
  const auto I = static_cast<Eigen::Index>(model.num_regions);
  const auto J = static_cast<Eigen::Index>(model.num_activities());

  StaticPlan plan;
  plan.lambda_star = rates.lambda_star;
  plan.p_star = rates.p_star;
  plan.incidence = incidence(model);
  plan.mu_star.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    plan.mu_star(j) = rates.lambda_star(static_cast<Eigen::Index>(model.activities[static_cast<std::size_t>(j)].server));
  }
  plan.R = plan.incidence.C * plan.mu_star.asDiagonal();
  plan.eta = rates.lambda_star.sum();
  plan.eta_hat = std::sqrt(static_cast<double>(model.n)) * (model.eta_n - plan.eta);
  plan.nu = plan.eta * model.q;

  // Local activities run at their maximal levels; the nonlocal levels are then pinned
  // down by capacity (A x = e) and flow balance (R x = nu).
  Eigen::VectorXd x = Eigen::VectorXd::Zero(J);
  for (Eigen::Index i = 0; i < I; ++i) x(i) = std::min(rates.lambda_star(i), plan.nu(i)) / rates.lambda_star(i);

  Eigen::MatrixXd K(2 * I, J);
  K << plan.incidence.A, plan.R;
  Eigen::VectorXd rhs(2 * I);
  rhs << Eigen::VectorXd::Ones(I), plan.nu;

  const Eigen::Index nonlocal = J - I;
  if (nonlocal > 0) {
    const Eigen::MatrixXd KN = K.rightCols(nonlocal);
    const Eigen::VectorXd target = rhs - K.leftCols(I) * x.head(I);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(KN, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() < nonlocal || sv(nonlocal - 1) <= 1e-10) {
      throw ModelError("nominal plan not unique: nonlocal coefficient matrix is rank deficient");
    }
    x.tail(nonlocal) = svd.solve(target);
  }

  const double min_x = x.minCoeff();
  if (min_x < -1e-6) {
    std::ostringstream os;
    os << "heavy traffic assumption violated: no nonnegative plan (min level " << min_x << ")";
    throw ModelError(os.str());
  }
  x = x.cwiseMax(0.0);
  const double residual = (K * x - rhs).cwiseAbs().maxCoeff();
  if (residual > kPlanResidualTol) {
    std::ostringstream os;
    os << "heavy traffic assumption violated: balance residual " << residual;
    throw ModelError(os.str());
  }
  plan.x_star = x;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (x(j) > kTolBasic) plan.basic.push_back(static_cast<std::size_t>(j));
  }
  plan.pools = buffer_pools(model, plan.basic);
  plan.M = workload_matrix(plan.pools, model.num_regions);
  return plan;
}

BufferPools buffer_pools(const NetworkModel& model, const std::vector<std::size_t>& basic) {
  const std::size_t I = model.num_regions;
  UnionFind uf(I);
  std::vector<std::ptrdiff_t> first_buffer_of_server(I, -1);
  for (std::size_t j : basic) {
    const Activity& a = model.activities.at(j);
    if (first_buffer_of_server[a.server] < 0) {
      first_buffer_of_server[a.server] = static_cast<std::ptrdiff_t>(a.buffer);
    } else {
      uf.unite(static_cast<std::size_t>(first_buffer_of_server[a.server]), a.buffer);
    }
  }

  BufferPools pools;
  pools.pool_of_buffer.assign(I, 0);
  std::map<std::size_t, std::size_t> root_to_pool;
  for (std::size_t i = 0; i < I; ++i) {
    const std::size_t root = uf.find(i);
    auto [it, inserted] = root_to_pool.try_emplace(root, pools.buffers.size());
    if (inserted) pools.buffers.emplace_back();
    pools.buffers[it->second].push_back(i);
    pools.pool_of_buffer[i] = it->second;
  }
  pools.servers.resize(pools.buffers.size());
  std::vector<std::vector<bool>> member(pools.buffers.size(), std::vector<bool>(I, false));
  for (std::size_t j : basic) {
    const Activity& a = model.activities[j];
    member[pools.pool_of_buffer[a.buffer]][a.server] = true;
  }
  for (std::size_t l = 0; l < pools.buffers.size(); ++l) {
    for (std::size_t k = 0; k < I; ++k) {
      if (member[l][k]) pools.servers[l].push_back(k);
    }
  }
  return pools;
}

Eigen::MatrixXd workload_matrix(const BufferPools& pools, std::size_t num_regions) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pools.count()),
                                            static_cast<Eigen::Index>(num_regions));
  for (std::size_t l = 0; l < pools.count(); ++l) {
    for (std::size_t i : pools.buffers[l]) M(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return M;
}

Eigen::MatrixXd pool_rate_matrix(const BufferPools& pools, const Eigen::VectorXd& lambda_star) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pools.count()), lambda_star.size());
  for (std::size_t l = 0; l < pools.count(); ++l) {
    for (std::size_t k : pools.servers[l]) {
      G(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = lambda_star(static_cast<Eigen::Index>(k));
    }
  }
  return G;
}

CrpCheck check_crp(const BufferPools& pools) {
  CrpCheck out;
  out.ok = pools.count() == 1;
  if (!out.ok) {
    std::ostringstream os;
    os << "complete resource pooling fails: " << pools.count() << " buffer pools";
    for (const auto& pool : pools.buffers) {
      os << " {";
      for (std::size_t k = 0; k < pool.size(); ++k) os << (k ? "," : "") << pool[k] + 1;
      os << "}";
    }
    out.diagnostics = os.str();
  }
  return out;
}

std::string plan_json(const StaticPlan& plan) {
  nlohmann::json doc;
  doc["lambda_star"] = to_json(plan.lambda_star);
  doc["p_star"] = to_json(plan.p_star);
  doc["mu_star"] = to_json(plan.mu_star);
  doc["nu"] = to_json(plan.nu);
  doc["eta"] = plan.eta;
  doc["eta_hat"] = plan.eta_hat;
  doc["x_star"] = to_json(plan.x_star);
  std::vector<std::size_t> basic1;
  for (std::size_t j : plan.basic) basic1.push_back(j + 1);
  doc["basic"] = basic1;
  nlohmann::json pools = nlohmann::json::array();
  for (std::size_t l = 0; l < plan.pools.count(); ++l) {
    std::vector<std::size_t> b, s;
    for (std::size_t i : plan.pools.buffers[l]) b.push_back(i + 1);
    for (std::size_t k : plan.pools.servers[l]) s.push_back(k + 1);
    pools.push_back({{"buffers", b}, {"servers", s}});
  }
  doc["pools"] = pools;
  doc["M"] = to_json(plan.M);
  doc["R"] = to_json(plan.R);
  return doc.dump(2);
}

}  // namespace heavyhail
