#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "heavyhail/error.hpp"
#include "heavyhail/static_plan.hpp"
#include "test_helpers.hpp"

#include <random>

using namespace heavyhail;

namespace {

EconParams linear(std::initializer_list<double> a, std::initializer_list<double> b) {
  EconParams e;
  e.demand_a = Eigen::Map<const Eigen::VectorXd>(a.begin(), static_cast<Eigen::Index>(a.size()));
  e.demand_b = Eigen::Map<const Eigen::VectorXd>(b.begin(), static_cast<Eigen::Index>(b.size()));
  e.h0 = 1;
  e.h = Eigen::VectorXd::Constant(e.demand_a.size(), 2);
  e.c = Eigen::VectorXd::Zero(e.demand_a.size());
  return e;
}

NetworkModel local_only(const Eigen::VectorXd& q, double eta_n = 2.0) {
  NetworkModel m;
  m.num_regions = static_cast<std::size_t>(q.size());
  for (std::size_t i = 0; i < m.num_regions; ++i) m.activities.push_back({i, i});
  m.q = q;
  m.eta_n = eta_n;
  m.n = 100;
  m.distances = Eigen::MatrixXd::Zero(q.size(), q.size());
  return m;
}

// Gaussian elimination on the normal equations, solved for the nonlocal block.
Eigen::VectorXd brute_force_levels(const NetworkModel& model, const StaticRates& rates) {
  const auto I = static_cast<Eigen::Index>(model.num_regions);
  const auto J = static_cast<Eigen::Index>(model.num_activities());
  const double eta = rates.lambda_star.sum();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(J);
  std::vector<std::vector<double>> K(static_cast<std::size_t>(2 * I), std::vector<double>(static_cast<std::size_t>(J)));
  std::vector<double> rhs(static_cast<std::size_t>(2 * I));
  for (Eigen::Index i = 0; i < I; ++i) {
    const double nu = eta * model.q(i);
    x(i) = std::min(rates.lambda_star(i), nu) / rates.lambda_star(i);
    rhs[static_cast<std::size_t>(i)] = 1.0;
    rhs[static_cast<std::size_t>(I + i)] = nu;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    const Activity& a = model.activities[static_cast<std::size_t>(j)];
    K[a.server][static_cast<std::size_t>(j)] = 1.0;
    K[static_cast<std::size_t>(I) + a.buffer][static_cast<std::size_t>(j)] = rates.lambda_star(static_cast<Eigen::Index>(a.server));
  }
  for (std::size_t r = 0; r < rhs.size(); ++r) {
    for (Eigen::Index j = 0; j < I; ++j) rhs[r] -= K[r][static_cast<std::size_t>(j)] * x(j);
  }
  const std::size_t m = static_cast<std::size_t>(J - I);
  std::vector<std::vector<double>> N(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      for (std::size_t r = 0; r < rhs.size(); ++r) N[p][q] += K[r][static_cast<std::size_t>(I) + p] * K[r][static_cast<std::size_t>(I) + q];
    }
    for (std::size_t r = 0; r < rhs.size(); ++r) N[p][m] += K[r][static_cast<std::size_t>(I) + p] * rhs[r];
  }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r) {
      if (std::abs(N[r][c]) > std::abs(N[piv][c])) piv = r;
    }
    std::swap(N[c], N[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      const double f = N[r][c] / N[c][c];
      for (std::size_t k = c; k <= m; ++k) N[r][k] -= f * N[c][k];
    }
  }
  for (std::size_t c = 0; c < m; ++c) x(I + static_cast<Eigen::Index>(c)) = N[c][m] / N[c][c];
  return x;
}

}  // namespace

TEST_CASE("optimal static rates") {
  const StaticRates m = optimal_static_rates(testing::manhattan().econ);
  const double expected[] = {0.3678, 1.0723, 0.6792, 0.0345};
  for (int i = 0; i < 4; ++i) {
    CHECK(m.lambda_star(i) == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(m.p_star(i) == doctest::Approx(10.0).epsilon(1e-12));
  }

  const StaticRates sym = optimal_static_rates(linear({2, 2}, {1, 1}));
  CHECK(sym.lambda_star == Eigen::Vector2d(1, 1));
  CHECK(sym.p_star == Eigen::Vector2d(1, 1));

  // grid search of lambda (a - lambda) / b at step 1e-3
  const EconParams e = linear({4, 2}, {2, 1});
  const StaticRates r = optimal_static_rates(e);
  for (int i = 0; i < 2; ++i) {
    double best = 0.0, best_val = -1.0;
    for (double lam = 0.0; lam <= e.demand_a(i) + 1e-12; lam += 1e-3) {
      const double val = lam * (e.demand_a(i) - lam) / e.demand_b(i);
      if (val > best_val) {
        best_val = val;
        best = lam;
      }
    }
    CHECK(r.lambda_star(i) == doctest::Approx(best).epsilon(1e-3));
    CHECK(r.p_star(i) == doctest::Approx((e.demand_a(i) - best) / e.demand_b(i)).epsilon(1e-3));
  }
  CHECK(r.lambda_star == Eigen::Vector2d(2, 1));
  CHECK(r.p_star == Eigen::Vector2d(1, 1));

  // doubling a doubles lambda*
  const StaticRates d = optimal_static_rates(linear({8, 4}, {2, 1}));
  CHECK(d.lambda_star == 2.0 * r.lambda_star);
}

TEST_CASE("manhattan nominal plan") {
  const ModelConfig cfg = testing::manhattan();
  const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
  const double expected_x[] = {0.965, 1, 0.865, 1, 0.035, 0, 0, 0.118, 0.017, 0};
  for (int j = 0; j < 10; ++j) CHECK(std::abs(plan.x_star(j) - expected_x[j]) <= 0.005);
  const IncidenceMatrices& inc = plan.incidence;
  CHECK((inc.A * plan.x_star - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((plan.R * plan.x_star - plan.nu).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(plan.mu_star.dot(plan.x_star) - plan.eta) <= 1e-9);
  CHECK(plan.x_star.minCoeff() >= -1e-12);
  CHECK(plan.basic == std::vector<std::size_t>{0, 1, 2, 3, 4, 7, 8});
  CHECK(plan.eta == doctest::Approx(2.1538));
  CHECK(plan.nu(1) == doctest::Approx(2.1538 * 0.5408));
}

TEST_CASE("small nominal plans") {
  NetworkModel one = local_only(Eigen::VectorXd::Ones(1));
  const StaticPlan p1 = nominal_plan(one, optimal_static_rates(linear({2}, {1})));
  CHECK(p1.x_star(0) == doctest::Approx(1.0));

  NetworkModel two = local_only(Eigen::Vector2d(0.5, 0.5));
  const StaticPlan p2 = nominal_plan(two, optimal_static_rates(linear({2, 2}, {1, 1})));
  CHECK(p2.x_star(0) == doctest::Approx(1.0));
  CHECK(p2.x_star(1) == doctest::Approx(1.0));

  // local-only network with unbalanced routing cannot satisfy A x = e
  NetworkModel bad = local_only(Eigen::Vector2d(0.3, 0.7));
  CHECK_THROWS_WITH_AS(nominal_plan(bad, optimal_static_rates(linear({2, 2}, {1, 1}))),
                       doctest::Contains("heavy traffic assumption violated"), ModelError);
}

TEST_CASE("non-unique plan is rejected") {
  // Two deficit servers fed by two surplus buffers through a full bipartite set:
  // the flows around the cycle are not pinned down.
  NetworkModel m = local_only(Eigen::Vector4d(0.3, 0.3, 0.2, 0.2));
  m.activities.push_back({2, 0});
  m.activities.push_back({2, 1});
  m.activities.push_back({3, 0});
  m.activities.push_back({3, 1});
  CHECK_THROWS_WITH_AS(nominal_plan(m, optimal_static_rates(linear({2, 2, 2, 2}, {1, 1, 1, 1}))),
                       doctest::Contains("not unique"), ModelError);
}

TEST_CASE("buffer pools and workload matrix") {
  const ModelConfig cfg = testing::manhattan();
  const StaticPlan plan = nominal_plan(cfg.network, optimal_static_rates(cfg.econ));
  CHECK(plan.pools.count() == 1);
  CHECK(plan.pools.buffers[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(plan.M == Eigen::RowVector4d::Ones());
  CHECK(check_crp(plan.pools).ok);
  const Eigen::MatrixXd G = pool_rate_matrix(plan.pools, plan.lambda_star);
  CHECK((plan.M * plan.R - G * plan.incidence.A).cwiseAbs().maxCoeff() <= 1e-12);

  const BufferPools locals = buffer_pools(cfg.network, {0, 1, 2, 3});
  CHECK(locals.count() == 4);
  CHECK(workload_matrix(locals, 4).isIdentity());
  const CrpCheck crp = check_crp(locals);
  CHECK_FALSE(crp.ok);
  CHECK(crp.diagnostics.find("{1} {2} {3} {4}") != std::string::npos);

  NetworkModel three = local_only(Eigen::Vector3d(0.3, 0.3, 0.4));
  three.activities.push_back({0, 1});
  const BufferPools two = buffer_pools(three, {0, 1, 2, 3});
  CHECK(two.count() == 2);
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 1, 0, 0, 0, 1;
  CHECK(workload_matrix(two, 3) == expected);

  NetworkModel single = local_only(Eigen::VectorXd::Ones(1));
  CHECK(check_crp(buffer_pools(single, {0})).ok);
}

TEST_CASE("property: random networks match the generating plan and a brute-force solve") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 60; ++trial) {
    const std::size_t I = 2 + gen() % 3;
    // split regions into surplus (fully local servers) and deficit ones
    std::vector<bool> surplus(I);
    bool any_s = false, any_d = false;
    for (std::size_t i = 0; i < I; ++i) {
      surplus[i] = gen() % 2 == 0;
      any_s |= surplus[i];
      any_d |= !surplus[i];
    }
    if (!any_s || !any_d) continue;
    NetworkModel m;
    m.num_regions = I;
    for (std::size_t i = 0; i < I; ++i) m.activities.push_back({i, i});
    Eigen::VectorXd lam(static_cast<Eigen::Index>(I));
    for (std::size_t i = 0; i < I; ++i) lam(static_cast<Eigen::Index>(i)) = 0.2 + u(gen);
    std::vector<double> x(I, 1.0);
    for (std::size_t k = 0; k < I && m.activities.size() < 8; ++k) {
      if (surplus[k]) continue;
      double used = 0.0;
      for (std::size_t b = 0; b < I && m.activities.size() < 8; ++b) {
        if (!surplus[b] || gen() % 3 == 0) continue;
        const double level = 0.05 + 0.3 * u(gen);
        m.activities.push_back({k, b});
        x.push_back(level);
        used += level;
      }
      x[k] = 1.0 - used;
    }
    if (x.size() == I) continue;
    bool ok = true;
    for (double v : x) ok &= v > 0.0;
    if (!ok) continue;
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(I));
    for (std::size_t j = 0; j < x.size(); ++j) {
      nu(static_cast<Eigen::Index>(m.activities[j].buffer)) += lam(static_cast<Eigen::Index>(m.activities[j].server)) * x[j];
    }
    m.q = nu / nu.sum();
    m.eta_n = lam.sum();
    m.n = 100;
    m.distances = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(I));
    StaticRates rates{lam, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(I))};
    StaticPlan plan;
    try {
      plan = nominal_plan(m, rates);
    } catch (const ModelError& e) {
      CHECK(std::string(e.what()).find("not unique") != std::string::npos);
      continue;
    }
    const Eigen::VectorXd brute = brute_force_levels(m, rates);
    for (std::size_t j = 0; j < x.size(); ++j) {
      CHECK(plan.x_star(static_cast<Eigen::Index>(j)) == doctest::Approx(x[j]).scale(1).epsilon(1e-6));
      CHECK(plan.x_star(static_cast<Eigen::Index>(j)) == doctest::Approx(brute(static_cast<Eigen::Index>(j))).scale(1).epsilon(1e-6));
    }
    // basic set is stable under perturbations below tol_basic / 2
    for (Eigen::Index j = 0; j < plan.x_star.size(); ++j) {
      const bool basic = plan.x_star(j) > kTolBasic;
      CHECK(basic == (plan.x_star(j) + (u(gen) - 0.5) * kTolBasic * 1e-3 > kTolBasic));
    }
    CHECK(check_crp(plan.pools).ok == (plan.pools.count() == 1));
    if (plan.pools.count() == 1) {
      const Eigen::MatrixXd G = pool_rate_matrix(plan.pools, plan.lambda_star);
      CHECK((plan.M * plan.R - G * plan.incidence.A).cwiseAbs().maxCoeff() <= 1e-12);
    }
    ++checked;
  }
  CHECK(checked >= 20);
}
