#include "heavyhail/model.hpp"

#include "heavyhail/error.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace heavyhail {

using nlohmann::json;

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

[[noreturn]] void model_error(const std::string& path, const std::string& what) {
  throw ModelError(path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) config_error(path + key, "missing required field");
  return obj.at(key);
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_error(path, "expected a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_error(path, "expected an integer");
  return v.get<std::int64_t>();
}

Eigen::VectorXd get_vector(const json& v, const std::string& path, std::size_t expected) {
  if (!v.is_array()) config_error(path, "expected an array");
  if (v.size() != expected) {
    config_error(path, "length " + std::to_string(v.size()) + " does not match regions=" +
                           std::to_string(expected));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    out(static_cast<Eigen::Index>(i)) = get_number(v[i], path + "[" + std::to_string(i + 1) + "]");
  }
  return out;
}

// Scalar or per-region array.
Eigen::VectorXd get_broadcast(const json& v, const std::string& path, std::size_t expected) {
  if (v.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(expected), v.get<double>());
  return get_vector(v, path, expected);
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

std::string_view to_string(PricingKind kind) {
  return kind == PricingKind::Static ? "static" : "dynamic";
}

std::string_view to_string(DispatchKind kind) {
  switch (kind) {
    case DispatchKind::Dp1: return "dp1";
    case DispatchKind::Dp2: return "dp2";
    case DispatchKind::StaticSplit: return "static";
    case DispatchKind::Closest: return "closest";
  }
  return "?";
}

PricingKind parse_pricing(std::string_view name) {
  if (name == "static") return PricingKind::Static;
  if (name == "dynamic") return PricingKind::Dynamic;
  throw ConfigError("pricing: unknown policy '" + std::string(name) + "' (expected static|dynamic)");
}

DispatchKind parse_dispatch(std::string_view name) {
  if (name == "dp1") return DispatchKind::Dp1;
  if (name == "dp2") return DispatchKind::Dp2;
  if (name == "static" || name == "static_split") return DispatchKind::StaticSplit;
  if (name == "closest") return DispatchKind::Closest;
  throw ConfigError("dispatch.policy: unknown policy '" + std::string(name) +
                    "' (expected dp1|dp2|static|closest)");
}

IncidenceMatrices incidence(const NetworkModel& model) {
  const auto I = static_cast<Eigen::Index>(model.num_regions);
  const auto J = static_cast<Eigen::Index>(model.num_activities());
  IncidenceMatrices m{Eigen::MatrixXd::Zero(I, J), Eigen::MatrixXd::Zero(I, J)};
  for (Eigen::Index j = 0; j < J; ++j) {
    const Activity& act = model.activities[static_cast<std::size_t>(j)];
    m.A(static_cast<Eigen::Index>(act.server), j) = 1.0;
    m.C(static_cast<Eigen::Index>(act.buffer), j) = 1.0;
  }
  return m;
}

void validate(const NetworkModel& model) {
  const std::size_t I = model.num_regions;
  if (I == 0) model_error("regions", "at least one region required");
  if (static_cast<std::size_t>(model.q.size()) != I) {
    model_error("q", "length " + std::to_string(model.q.size()) + " does not match regions=" +
                         std::to_string(I));
  }
  for (std::size_t i = 0; i < I; ++i) {
    if (!(model.q(static_cast<Eigen::Index>(i)) > 0.0)) {
      model_error("q[" + std::to_string(i + 1) + "]", "q_i > 0 violated");
    }
  }
  const double qsum = model.q.sum();
  if (std::abs(qsum - 1.0) > 1e-12) model_error("q", "q sums to " + num(qsum) + ", expected 1");

  if (model.activities.size() < I) model_error("activities", "the first I activities must be local");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t j = 0; j < model.activities.size(); ++j) {
    const Activity& a = model.activities[j];
    const std::string path = "activities[" + std::to_string(j + 1) + "]";
    if (a.server >= I || a.buffer >= I) model_error(path, "server/buffer index out of range");
    if (j < I && (a.server != j || a.buffer != j)) {
      model_error(path, "the first I activities must be local (server = buffer = " +
                            std::to_string(j + 1) + ")");
    }
    if (!seen.insert({a.server, a.buffer}).second) model_error(path, "duplicate (server, buffer) pair");
  }

  if (!(model.eta_n > 0.0) || !std::isfinite(model.eta_n)) model_error("eta_n", "eta_n > 0 violated");
  if (model.n < 1) model_error("n", "n >= 1 violated");

  const auto& D = model.distances;
  if (static_cast<std::size_t>(D.rows()) != I || static_cast<std::size_t>(D.cols()) != I) {
    model_error("distances", "must be a " + std::to_string(I) + "x" + std::to_string(I) + " matrix");
  }
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    if (D(i, i) != 0.0) model_error("distances", "zero diagonal violated");
    for (Eigen::Index k = 0; k < D.cols(); ++k) {
      if (D(i, k) < 0.0) model_error("distances", "nonnegative entries violated");
      if (std::abs(D(i, k) - D(k, i)) > 1e-12) model_error("distances", "symmetry violated");
    }
  }
}

void validate(const EconParams& econ, std::size_t num_regions) {
  const auto I = static_cast<Eigen::Index>(num_regions);
  if (econ.demand_a.size() != I || econ.demand_b.size() != I || econ.h.size() != I || econ.c.size() != I) {
    model_error("demand/costs", "vector lengths must equal regions=" + std::to_string(num_regions));
  }
  for (Eigen::Index i = 0; i < I; ++i) {
    const std::string idx = "[" + std::to_string(i + 1) + "]";
    if (!(econ.demand_a(i) > 0.0)) model_error("demand.a" + idx, "a_i > 0 violated");
    if (!(econ.demand_b(i) > 0.0)) model_error("demand.b" + idx, "b_i > 0 violated");
    if (!(econ.h(i) > econ.h0)) {
      model_error("costs.h" + idx, "h_i > h0 violated (h_i = " + num(econ.h(i)) + ", h0 = " + num(econ.h0) + ")");
    }
    if (!(econ.c(i) >= 0.0)) model_error("costs.c" + idx, "c_i >= 0 violated");
  }
  if (!(econ.h0 >= 0.0)) model_error("costs.h0", "h0 >= 0 violated");
}

void validate(const SimSettings& sim) {
  if (!(sim.horizon_hours > sim.warmup_hours)) model_error("sim", "horizon_hours > warmup_hours violated");
  if (!(sim.warmup_hours >= 0.0)) model_error("sim.warmup_hours", "warmup_hours >= 0 violated");
  if (sim.replications < 1) model_error("sim.replications", "replications >= 1 violated");
  if (sim.safety_stock < 0) model_error("dispatch.safety_stock", "safety_stock >= 0 violated");
}

ModelConfig load_model(std::string_view config_text) {
  json doc;
  try {
    doc = json::parse(config_text.begin(), config_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!doc.is_object()) config_error("config", "top level must be an object");

  ModelConfig cfg;
  NetworkModel& net = cfg.network;
  const std::int64_t regions = get_integer(require(doc, "regions", ""), "regions");
  if (regions < 1) model_error("regions", "at least one region required");
  net.num_regions = static_cast<std::size_t>(regions);
  const std::size_t I = net.num_regions;

  const json& acts = require(doc, "activities", "");
  if (!acts.is_array()) config_error("activities", "expected an array");
  for (std::size_t j = 0; j < acts.size(); ++j) {
    const std::string path = "activities[" + std::to_string(j + 1) + "].";
    const std::int64_t s = get_integer(require(acts[j], "server", path), path + "server");
    const std::int64_t b = get_integer(require(acts[j], "buffer", path), path + "buffer");
    if (s < 1 || b < 1 || s > regions || b > regions) {
      model_error("activities[" + std::to_string(j + 1) + "]", "server/buffer index out of range 1.." +
                                                                 std::to_string(regions));
    }
    net.activities.push_back({static_cast<std::size_t>(s - 1), static_cast<std::size_t>(b - 1)});
  }
  net.q = get_vector(require(doc, "q", ""), "q", I);
  net.eta_n = get_number(require(doc, "eta_n", ""), "eta_n");
  net.n = get_integer(require(doc, "n", ""), "n");

  const json& dist = require(doc, "distances", "");
  if (!dist.is_array() || dist.size() != I) config_error("distances", "expected " + std::to_string(I) + " rows");
  net.distances.resize(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(I));
  for (std::size_t i = 0; i < I; ++i) {
    const std::string path = "distances[" + std::to_string(i + 1) + "]";
    if (!dist[i].is_array() || dist[i].size() != I) config_error(path, "expected " + std::to_string(I) + " entries");
    for (std::size_t k = 0; k < I; ++k) {
      net.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          get_number(dist[i][k], path + "[" + std::to_string(k + 1) + "]");
    }
  }

  EconParams& econ = cfg.econ;
  const json& dem = require(doc, "demand", "");
  const json& mode = require(dem, "mode", "demand.");
  if (mode == "ab") {
    econ.demand_a = get_vector(require(dem, "a", "demand."), "demand.a", I);
    econ.demand_b = get_vector(require(dem, "b", "demand."), "demand.b", I);
  } else if (mode == "pstar") {
    const Eigen::VectorXd lam = get_vector(require(dem, "lambda_star", "demand."), "demand.lambda_star", I);
    const Eigen::VectorXd p = get_broadcast(require(dem, "p_star", "demand."), "demand.p_star", I);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (!(p(i) > 0.0)) model_error("demand.p_star[" + std::to_string(i + 1) + "]", "p_star > 0 violated");
    }
    econ.demand_a = 2.0 * lam;
    econ.demand_b = lam.cwiseQuotient(p);
  } else {
    config_error("demand.mode", "expected \"ab\" or \"pstar\"");
  }

  const json& costs = require(doc, "costs", "");
  econ.h0 = get_number(require(costs, "h0", "costs."), "costs.h0");
  econ.h = get_broadcast(require(costs, "h", "costs."), "costs.h", I);
  econ.c = get_broadcast(require(costs, "c", "costs."), "costs.c", I);

  SimSettings& sim = cfg.sim;
  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    if (s.contains("horizon_hours")) sim.horizon_hours = get_number(s["horizon_hours"], "sim.horizon_hours");
    if (s.contains("warmup_hours")) sim.warmup_hours = get_number(s["warmup_hours"], "sim.warmup_hours");
    if (s.contains("replications")) {
      sim.replications = static_cast<int>(get_integer(s["replications"], "sim.replications"));
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) config_error("sim.seed", "expected a nonnegative integer");
      sim.seed = s["seed"].get<std::uint64_t>();
    }
  }
  if (doc.contains("dispatch")) {
    const json& d = doc["dispatch"];
    if (d.contains("policy")) {
      if (!d["policy"].is_string()) config_error("dispatch.policy", "expected a string");
      sim.dispatch = parse_dispatch(d["policy"].get<std::string>());
    }
    if (d.contains("safety_stock")) {
      sim.safety_stock = static_cast<int>(get_integer(d["safety_stock"], "dispatch.safety_stock"));
    }
  }
  if (doc.contains("pricing")) {
    if (!doc["pricing"].is_string()) config_error("pricing", "expected a string");
    sim.pricing = parse_pricing(doc["pricing"].get<std::string>());
  }

  validate(net);
  validate(econ, I);
  validate(sim);
  return cfg;
}

ModelConfig load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

std::string dump_config(const ModelConfig& cfg) {
  const NetworkModel& net = cfg.network;
  json doc;
  doc["regions"] = net.num_regions;
  doc["activities"] = json::array();
  for (const Activity& a : net.activities) {
    doc["activities"].push_back({{"server", a.server + 1}, {"buffer", a.buffer + 1}});
  }
  doc["q"] = vector_json(net.q);
  doc["eta_n"] = net.eta_n;
  doc["n"] = net.n;
  doc["distances"] = json::array();
  for (Eigen::Index i = 0; i < net.distances.rows(); ++i) {
    doc["distances"].push_back(vector_json(net.distances.row(i).transpose()));
  }
  doc["demand"] = {{"mode", "ab"}, {"a", vector_json(cfg.econ.demand_a)}, {"b", vector_json(cfg.econ.demand_b)}};
  doc["costs"] = {{"h0", cfg.econ.h0}, {"h", vector_json(cfg.econ.h)}, {"c", vector_json(cfg.econ.c)}};
  doc["sim"] = {{"horizon_hours", cfg.sim.horizon_hours},
                {"warmup_hours", cfg.sim.warmup_hours},
                {"replications", cfg.sim.replications},
                {"seed", cfg.sim.seed}};
  doc["dispatch"] = {{"policy", std::string(to_string(cfg.sim.dispatch))}, {"safety_stock", cfg.sim.safety_stock}};
  doc["pricing"] = std::string(to_string(cfg.sim.pricing));
  return doc.dump(2);
}

double demand(const EconParams& econ, std::size_t i, double price) {
  const auto k = static_cast<Eigen::Index>(i);
  const double a = econ.demand_a(k);
  const double b = econ.demand_b(k);
  if (!(price >= 0.0 && price <= a / b)) {
    throw DomainError("demand: price " + num(price) + " outside [0, " + num(a / b) + "]");
  }
  return a - b * price;
}

double demand_inverse(const EconParams& econ, std::size_t i, double rate) {
  const auto k = static_cast<Eigen::Index>(i);
  const double a = econ.demand_a(k);
  if (!(rate >= 0.0 && rate <= a)) {
    throw DomainError("demand_inverse: rate " + num(rate) + " outside [0, " + num(a) + "]");
  }
  return (a - rate) / econ.demand_b(k);
}

double revenue_rate(const EconParams& econ, const Eigen::VectorXd& rates) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    total += rates(i) * demand_inverse(econ, static_cast<std::size_t>(i), rates(i));
  }
  return total;
}

}  // namespace heavyhail
