#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace heavyhail {

enum class PricingKind { Static, Dynamic };
enum class DispatchKind { Dp1, Dp2, StaticSplit, Closest };

std::string_view to_string(PricingKind kind);
std::string_view to_string(DispatchKind kind);
PricingKind parse_pricing(std::string_view name);
DispatchKind parse_dispatch(std::string_view name);

// 0-based indices; the JSON config is 1-based.
struct Activity {
  std::size_t server = 0;
  std::size_t buffer = 0;
};

struct NetworkModel {
  std::size_t num_regions = 0;
  std::vector<Activity> activities;  // first num_regions entries are local
  Eigen::VectorXd q;
  double eta_n = 0.0;  // travel completion rate per traveling car, per hour
  std::int64_t n = 0;
  Eigen::MatrixXd distances;

  std::size_t num_activities() const { return activities.size(); }
  bool is_local(std::size_t j) const { return j < num_regions; }
};

// Linear demand lambda_i(p) = a_i - b_i p. Costs are per-system (unscaled).
struct EconParams {
  Eigen::VectorXd demand_a;
  Eigen::VectorXd demand_b;
  double h0 = 0.0;
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

struct SimSettings {
  double horizon_hours = 1000.0;
  double warmup_hours = 200.0;
  int replications = 10;
  std::uint64_t seed = 1;
  DispatchKind dispatch = DispatchKind::Dp2;
  int safety_stock = 1;
  PricingKind pricing = PricingKind::Dynamic;
};

struct ModelConfig {
  NetworkModel network;
  EconParams econ;
  SimSettings sim;
};

struct IncidenceMatrices {
  Eigen::MatrixXd A;  // A(i, j) = 1 iff server(j) == i
  Eigen::MatrixXd C;  // C(i, j) = 1 iff buffer(j) == i
};

IncidenceMatrices incidence(const NetworkModel& model);

// Throw ModelError naming the violated rule.
void validate(const NetworkModel& model);
void validate(const EconParams& econ, std::size_t num_regions);
void validate(const SimSettings& sim);

// Parse errors and shape problems throw ConfigError, invariant violations ModelError.
ModelConfig load_model(std::string_view config_text);
ModelConfig load_model_file(const std::filesystem::path& path);

// Normalized JSON (demand in "ab" form); load_model(dump_config(c)) reproduces c exactly.
std::string dump_config(const ModelConfig& config);

double demand(const EconParams& econ, std::size_t i, double price);
double demand_inverse(const EconParams& econ, std::size_t i, double rate);
double revenue_rate(const EconParams& econ, const Eigen::VectorXd& rates);

}  // namespace heavyhail
