#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcop/errors.hpp"
#include "fcop/models.hpp"
#include "fcop/quadrature.hpp"

namespace fcop::app {

/// Schema or model-invariant violation in a run config. The message starts
/// with the JSON path of the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Command { copula, density, cdf, quantile, validate };

struct ModelConfig {
  std::string family;
  // gaussian
  Vec mean;
  Mat cov;
  // nig
  double alpha = 0.0;
  Vec beta;
  double delta = 0.0;
  Vec mu;
  Mat shape;
  double t = 1.0;
};

struct RunConfig {
  Command command = Command::copula;
  ModelConfig model;
  ModelPtr built;

  /// Exactly one of grid_m and grid_points is set for copula/density.
  std::optional<int> grid_m;
  std::vector<std::vector<double>> grid_points;

  Vec damping;
  double tau_q = 1e-7;
  double tau_t = 1e-9;
  int nodes = 64;
  int max_depth = 5;
  double u_min = 1e-4;
  double tol_u = 1e-6;
  Rule rule = Rule::gauss_legendre;
  bool conjugate_halving = false;

  std::string format = "csv";
  std::string path;

  /// cdf: evaluation points; quantile: 1-based axis and probabilities.
  std::vector<std::vector<double>> query_x;
  int query_axis = 1;
  std::vector<double> query_u;

  std::uint64_t seed = 42;
  std::int64_t samples = 1000000;
};

std::string to_string(Command c);
Command parse_command(const std::string& s);

/// Parses and validates a JSON config, fills defaults and builds the model.
/// Accepts the flat shorthand with the model fields and `M` at top level.
/// `command` overrides (or supplies) the config's command field.
RunConfig parse_config(const std::string& text, std::optional<Command> command = std::nullopt);

/// Nested form with every default written out; parse_config of its dump
/// reproduces the same run.
nlohmann::ordered_json effective_config(const RunConfig& config);

ModelPtr build_model(const ModelConfig& model);

}  // namespace fcop::app
