#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fcop/config.hpp"
#include "fcop/copula.hpp"

namespace fcop::app {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalFailure = 2, kValidationFailure = 3 };

struct RunOptions {
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Executes one command and writes its artifact plus `<path>.meta.json`.
/// Errors are reported on `err` and mapped to the exit codes above.
int run(RunConfig config, const RunOptions& options, std::ostream& out, std::ostream& err);

/// Reads the config file, parses it and runs it.
int run_file(const std::string& config_path, std::optional<Command> command, const RunOptions& options,
             std::ostream& out, std::ostream& err);

/// Oracle comparisons for the configured model (the `validate` command).
std::vector<ValidationCheck> validation_checks(const RunConfig& config);

CopulaOptions copula_options(const RunConfig& config);

/// `u1,...,un,value` rows in lexicographic order, 17 significant digits.
std::string surface_csv(const CopulaSurface& surface);

/// Writes via a temporary file in the same directory and a rename.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace fcop::app
