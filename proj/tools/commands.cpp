#include "commands.hpp"

#include "heavyhail/error.hpp"
#include "heavyhail/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace heavyhail::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string command;
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<int> reps;
  std::optional<double> horizon;
  std::optional<double> warmup;
  std::string pricing;
  std::string dispatch;
  std::string sweep;
  std::string manifest;
};

std::string g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

unsigned resolve_threads(const Options& o) {
  if (o.threads) return std::max(1u, *o.threads);
  if (const char* env = std::getenv("HEAVYHAIL_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("HEAVYHAIL_THREADS: expected a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Config with command-line overrides applied.
ModelConfig resolve_config(const ModelConfig& base, const Options& o) {
  ModelConfig cfg = base;
  if (o.seed) cfg.sim.seed = *o.seed;
  if (o.reps) cfg.sim.replications = *o.reps;
  if (o.horizon) cfg.sim.horizon_hours = *o.horizon;
  if (o.warmup) cfg.sim.warmup_hours = *o.warmup;
  const auto pricing = split(o.pricing, ',');
  const auto dispatch = split(o.dispatch, ',');
  if (pricing.size() == 1) cfg.sim.pricing = parse_pricing(pricing[0]);
  if (dispatch.size() == 1) cfg.sim.dispatch = parse_dispatch(dispatch[0]);
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

void write_manifest(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  json m;
  m["tool"] = "heavyhail";
  m["version"] = kVersion;
  m["command"] = o.command;
  m["config_path"] = o.config_path;
  m["config"] = json::parse(dump_config(cfg));
  m["options"] = {{"pricing", o.pricing}, {"dispatch", o.dispatch}, {"sweep", o.sweep}};
  m["output_dir"] = out.string();
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["wall_clock"] = stamp;
  open_out(out / "manifest.json") << m.dump(2) << "\n";
}

json ewf_json(const EwfParams& p) {
  return {{"a", p.a()},
          {"sigma2", p.sigma2()},
          {"eta", p.eta},
          {"eta_hat", p.eta_hat},
          {"gamma", std::vector<double>(p.brownian.gamma.data(), p.brownian.gamma.data() + p.brownian.gamma.size())},
          {"h", p.h()},
          {"r", p.r()},
          {"alpha", std::vector<double>(p.costs.alpha.data(), p.costs.alpha.data() + p.costs.alpha.size())},
          {"alpha_hat", p.alpha_hat()},
          {"i_star", p.costs.i_star + 1},
          {"k_star", p.costs.k_star + 1}};
}

void print_vector(const char* name, const Eigen::VectorXd& v) {
  std::cout << std::left << std::setw(12) << name << std::right;
  for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << std::setw(10) << std::fixed << std::setprecision(4) << v(i);
  std::cout << "\n";
}

int cmd_plan(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  const StaticRates rates = optimal_static_rates(cfg.econ);
  const StaticPlan plan = nominal_plan(cfg.network, rates);
  print_vector("lambda*", plan.lambda_star);
  print_vector("p*", plan.p_star);
  print_vector("x*", plan.x_star);
  std::cout << "basic      ";
  for (std::size_t j : plan.basic) std::cout << " " << j + 1;
  std::cout << "\npools      ";
  for (const auto& pool : plan.pools.buffers) {
    std::cout << " {";
    for (std::size_t k = 0; k < pool.size(); ++k) std::cout << (k ? "," : "") << pool[k] + 1;
    std::cout << "}";
  }
  std::cout << "\nM\n";
  for (Eigen::Index l = 0; l < plan.M.rows(); ++l) print_vector("", plan.M.row(l).transpose());

  json doc = json::parse(plan_json(plan));
  const CrpCheck crp = check_crp(plan.pools);
  doc["crp"] = crp.ok;
  if (crp.ok) doc["ewf"] = ewf_json(ewf_params(cfg.network, cfg.econ, plan));
  open_out(out / "plan.json") << doc.dump(2) << "\n";
  write_manifest(o, cfg, out);
  if (!crp.ok) {
    std::cerr << "error: " << crp.diagnostics << "\n";
    return 2;
  }
  return 0;
}

int cmd_solve(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  const Scenario sc = prepare_scenario(cfg);
  const ValueFunction& vf = *sc.value_function;
  std::ofstream f = open_out(out / "value_function.csv");
  f << "y,v\n";
  f << std::setprecision(17);
  for (std::size_t k = 0; k < vf.grid().size(); ++k) f << vf.grid()[k] << "," << vf.values()[k] << "\n";
  std::cout << "beta*       " << g(vf.beta_star()) << "\n"
            << "h/eta       " << g(vf.limit()) << "\n"
            << "iterations  " << vf.diagnostics.iterations << "\n"
            << "grid points " << vf.grid().size() << " (y_max " << g(vf.y_max()) << ")\n";
  write_manifest(o, cfg, out);
  return 0;
}

void write_replications(std::ostream& f, const CellSummary& cell, std::size_t regions, bool header) {
  if (header) {
    f << "pricing,dispatch,rep,seed,avg_cost,avg_cost_with_idleness,revenue,holding";
    for (std::size_t i = 1; i <= regions; ++i) f << ",served_" << i;
    for (std::size_t i = 1; i <= regions; ++i) f << ",idle_" << i;
    f << "\n";
  }
  for (std::size_t k = 0; k < cell.reports.size(); ++k) {
    const SimReport& r = cell.reports[k];
    f << to_string(cell.pricing) << "," << to_string(cell.dispatch) << "," << k << "," << r.seed << ","
      << g(r.avg_cost) << "," << g(r.avg_cost_with_idleness) << "," << g(r.revenue) << "," << g(r.holding);
    for (auto s : r.served) f << "," << s;
    for (double x : r.idle_fraction) f << "," << g(x);
    f << "\n";
  }
}

ExperimentSpec grid_spec(const Options& o, const ModelConfig& cfg) {
  ExperimentSpec spec = spec_from(cfg.sim);
  spec.threads = resolve_threads(o);
  if (!o.pricing.empty()) {
    spec.pricing.clear();
    for (const auto& p : split(o.pricing, ',')) spec.pricing.push_back(parse_pricing(p));
  }
  if (!o.dispatch.empty()) {
    spec.dispatch.clear();
    for (const auto& d : split(o.dispatch, ',')) spec.dispatch.push_back(parse_dispatch(d));
  }
  return spec;
}

int cmd_simulate(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  const Scenario sc = prepare_scenario(cfg, cfg.sim.pricing == PricingKind::Dynamic);
  const PolicySet policies = make_policy_set(sc, cfg.sim.pricing, cfg.sim.dispatch);
  CellSummary cell;
  cell.pricing = cfg.sim.pricing;
  cell.dispatch = cfg.sim.dispatch;
  for (int k = 0; k < cfg.sim.replications; ++k) {
    cell.reports.push_back(run_replication(cfg.network, cfg.econ, policies, cfg.sim.horizon_hours,
                                           cfg.sim.warmup_hours, cfg.sim.seed + static_cast<std::uint64_t>(k)));
  }
  std::ofstream f = open_out(out / "replications.csv");
  write_replications(f, cell, cfg.network.num_regions, true);
  for (const SimReport& r : cell.reports) {
    std::cout << "seed " << r.seed << "  avg_cost " << g(r.avg_cost) << "\n";
  }
  if (cell.reports.size() >= 2) {
    const MeanCi ci = mean_ci95(cell.costs());
    std::cout << "mean " << g(ci.mean) << " +/- " << g(ci.half_width) << "\n";
  }
  write_manifest(o, cfg, out);
  return 0;
}

void print_table(const ExperimentSummary& s) {
  std::cout << std::left << std::setw(10) << "pricing" << std::setw(10) << "dispatch" << std::right << std::setw(12)
            << "mean" << std::setw(12) << "ci_half" << "\n";
  for (const CellSummary& c : s.cells) {
    std::cout << std::left << std::setw(10) << to_string(c.pricing) << std::setw(10) << to_string(c.dispatch)
              << std::right << std::fixed << std::setprecision(2) << std::setw(12) << c.mean << std::setw(12)
              << c.ci_half << "\n";
  }
}

int cmd_experiment(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  const ExperimentSpec spec = grid_spec(o, cfg);
  if (spec.reps < 2) throw ModelError("experiment: reps >= 2 required (confidence interval undefined)");
  bool dynamic = false;
  for (PricingKind p : spec.pricing) dynamic |= p == PricingKind::Dynamic;
  const Scenario sc = prepare_scenario(cfg, dynamic);
  const ExperimentSummary summary = run_experiment(sc, spec);
  std::ofstream f = open_out(out / "table1.csv");
  f << "pricing,dispatch,mean,ci_half\n";
  for (const CellSummary& c : summary.cells) {
    f << to_string(c.pricing) << "," << to_string(c.dispatch) << "," << g(c.mean) << "," << g(c.ci_half) << "\n";
  }
  std::ofstream reps = open_out(out / "replications.csv");
  for (std::size_t k = 0; k < summary.cells.size(); ++k) {
    write_replications(reps, summary.cells[k], cfg.network.num_regions, k == 0);
  }
  print_table(summary);
  write_manifest(o, cfg, out);
  return 0;
}

int cmd_sensitivity(const Options& o, const ModelConfig& cfg, const fs::path& out) {
  const auto eq = o.sweep.find('=');
  if (eq == std::string::npos) throw ConfigError("--sweep: expected name=v1,v2,...");
  const std::string name = o.sweep.substr(0, eq);
  if (name != "h" && name != "c") throw ConfigError("--sweep: parameter must be h or c");
  std::vector<double> values;
  for (const auto& v : split(o.sweep.substr(eq + 1), ',')) {
    try {
      values.push_back(std::stod(v));
    } catch (const std::exception&) {
      throw ConfigError("--sweep: bad value '" + v + "'");
    }
  }
  if (values.empty()) throw ConfigError("--sweep: empty sweep");

  const ExperimentSpec spec = grid_spec(o, cfg);
  std::ofstream f = open_out(out / "sensitivity.csv");
  f << "parameter,value,pricing,dispatch,mean,ci_half\n";
  for (double value : values) {
    ModelConfig point = cfg;
    Eigen::VectorXd& target = name == "h" ? point.econ.h : point.econ.c;
    target.setConstant(value);
    validate(point.econ, point.network.num_regions);
    const Scenario sc = prepare_scenario(point);
    const ExperimentSummary s = run_experiment(sc, spec);
    std::cout << name << " = " << g(value) << "\n";
    print_table(s);
    for (const CellSummary& c : s.cells) {
      f << name << "," << g(value) << "," << to_string(c.pricing) << "," << to_string(c.dispatch) << "," << g(c.mean)
        << "," << g(c.ci_half) << "\n";
    }
  }
  write_manifest(o, cfg, out);
  return 0;
}

int dispatch_command(const Options& o, const ModelConfig& cfg) {
  const fs::path out(o.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + o.out + "'");
  if (o.command == "plan") return cmd_plan(o, cfg, out);
  if (o.command == "solve") return cmd_solve(o, cfg, out);
  if (o.command == "simulate") return cmd_simulate(o, cfg, out);
  if (o.command == "experiment") return cmd_experiment(o, cfg, out);
  if (o.command == "sensitivity") return cmd_sensitivity(o, cfg, out);
  throw ConfigError("unknown command '" + o.command + "'");
}

// Re-runs the command recorded in a manifest with its resolved configuration.
int replay(Options o) {
  std::ifstream in(o.manifest);
  if (!in) throw ConfigError("cannot open manifest '" + o.manifest + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  const std::string out = o.out;
  o.command = m.at("command").get<std::string>();
  o.config_path = m.value("config_path", "");
  o.pricing = m.at("options").value("pricing", "");
  o.dispatch = m.at("options").value("dispatch", "");
  o.sweep = m.at("options").value("sweep", "");
  o.out = out;
  return dispatch_command(o, load_model(m.at("config").dump()));
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Heavy-traffic pricing and dispatch for ride-hailing networks"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool sim_flags) {
    sub->add_option("--config", o.config_path, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Base seed");
    if (!sim_flags) return;
    sub->add_option("--threads", o.threads, "Worker threads (default: HEAVYHAIL_THREADS or all cores)");
    sub->add_option("--reps", o.reps, "Replications per cell");
    sub->add_option("--horizon", o.horizon, "Run length in hours");
    sub->add_option("--warmup", o.warmup, "Warm-up hours excluded from statistics");
    sub->add_option("--pricing", o.pricing, "static, dynamic, or a comma list");
    sub->add_option("--dispatch", o.dispatch, "dp1, dp2, static, closest, or a comma list");
  };
  add_common(app.add_subcommand("plan", "Static plan, pools and workload parameters"), false);
  add_common(app.add_subcommand("solve", "Solve the Bellman equation"), false);
  add_common(app.add_subcommand("simulate", "Replications of one pricing/dispatch pair"), true);
  add_common(app.add_subcommand("experiment", "Full pricing x dispatch grid"), true);
  CLI::App* sens = app.add_subcommand("sensitivity", "Sweep holding or idleness cost");
  add_common(sens, true);
  sens->add_option("--sweep", o.sweep, "name=v1,v2,... with name h or c")->required();
  CLI::App* rep = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rep->add_option("--manifest", o.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "replay") return replay(o);
    return dispatch_command(o, resolve_config(load_model_file(o.config_path), o));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace heavyhail::cli
