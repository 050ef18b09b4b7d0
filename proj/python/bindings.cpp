#include "heavyhail/error.hpp"
#include "heavyhail/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace heavyhail;

namespace {

py::dict plan_dict(const StaticPlan& plan) {
  py::dict d;
  d["lambda_star"] = plan.lambda_star;
  d["p_star"] = plan.p_star;
  d["x_star"] = plan.x_star;
  d["nu"] = plan.nu;
  d["eta"] = plan.eta;
  d["eta_hat"] = plan.eta_hat;
  d["basic"] = plan.basic;
  d["pools"] = plan.pools.buffers;
  d["M"] = plan.M;
  d["R"] = plan.R;
  d["A"] = plan.incidence.A;
  return d;
}

py::dict ewf_dict(const EwfParams& p) {
  py::dict d;
  d["a"] = p.a();
  d["sigma2"] = p.sigma2();
  d["eta"] = p.eta;
  d["h"] = p.h();
  d["r"] = p.r();
  d["alpha"] = p.costs.alpha;
  d["alpha_hat"] = p.alpha_hat();
  d["gamma"] = p.brownian.gamma;
  d["Sigma"] = p.brownian.Sigma;
  d["i_star"] = p.costs.i_star;
  d["k_star"] = p.costs.k_star;
  return d;
}

py::dict report_dict(const SimReport& r) {
  py::dict d;
  d["avg_cost"] = r.avg_cost;
  d["avg_cost_with_idleness"] = r.avg_cost_with_idleness;
  d["avg_profit_rate"] = r.avg_profit_rate;
  d["revenue"] = r.revenue;
  d["holding"] = r.holding;
  d["served"] = r.served;
  d["idle_fraction"] = r.idle_fraction;
  d["mean_workload"] = r.mean_workload;
  d["mean_traveling_fraction"] = r.mean_traveling_fraction;
  d["events"] = r.events;
  d["seed"] = r.seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Static planning, Bellman solve and simulation for ride-hailing networks";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def_property_readonly("regions", [](const ModelConfig& c) { return c.network.num_regions; })
      .def_property_readonly("n", [](const ModelConfig& c) { return c.network.n; })
      .def("to_json", &dump_config);

  py::class_<ValueFunction>(m, "ValueFunction")
      .def_property_readonly("beta_star", &ValueFunction::beta_star)
      .def_property_readonly("limit", &ValueFunction::limit)
      .def_property_readonly("y_max", &ValueFunction::y_max)
      .def_property_readonly("grid", &ValueFunction::grid)
      .def_property_readonly("values", &ValueFunction::values)
      .def("__call__", &ValueFunction::operator(), py::arg("y"))
      .def("theta", [](const ValueFunction& vf, double w) { return theta_star(vf, w); }, py::arg("w"));

  m.def("load_model", &load_model, py::arg("config_text"), "Parse and validate a JSON model config.");
  m.def(
      "nominal_plan",
      [](const ModelConfig& c) { return plan_dict(nominal_plan(c.network, optimal_static_rates(c.econ))); },
      py::arg("config"));
  m.def(
      "ewf_params",
      [](const ModelConfig& c) {
        const StaticPlan plan = nominal_plan(c.network, optimal_static_rates(c.econ));
        return ewf_dict(ewf_params(c.network, c.econ, plan));
      },
      py::arg("config"));
  m.def(
      "solve_bellman",
      [](const ModelConfig& c) { return *prepare_scenario(c).value_function; }, py::arg("config"));
  m.def(
      "run_replication",
      [](const ModelConfig& c, const std::string& pricing, const std::string& dispatch, double horizon, double warmup,
         std::uint64_t seed) {
        const PricingKind p = parse_pricing(pricing);
        const Scenario sc = prepare_scenario(c, p == PricingKind::Dynamic);
        const PolicySet policies = make_policy_set(sc, p, parse_dispatch(dispatch));
        SimReport r;
        {
          py::gil_scoped_release release;
          r = run_replication(c.network, c.econ, policies, horizon, warmup, seed);
        }
        return report_dict(r);
      },
      py::arg("config"), py::arg("pricing"), py::arg("dispatch"), py::arg("horizon"), py::arg("warmup"),
      py::arg("seed"));
  m.def(
      "run_experiment",
      [](const ModelConfig& c, int reps, double horizon, double warmup, std::uint64_t seed, unsigned threads) {
        const Scenario sc = prepare_scenario(c);
        ExperimentSpec spec;
        spec.reps = reps;
        spec.horizon = horizon;
        spec.warmup = warmup;
        spec.base_seed = seed;
        spec.threads = threads;
        ExperimentSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(sc, spec);
        }
        py::list rows;
        for (const CellSummary& cell : s.cells) {
          py::dict d;
          d["pricing"] = std::string(to_string(cell.pricing));
          d["dispatch"] = std::string(to_string(cell.dispatch));
          d["mean"] = cell.mean;
          d["ci_half"] = cell.ci_half;
          d["costs"] = cell.costs();
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"), py::arg("reps"), py::arg("horizon"), py::arg("warmup"), py::arg("seed"),
      py::arg("threads") = 1);
}
