#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "dwos/optimize.hpp"
#include "dwos/problem.hpp"

namespace dwos {

enum class Command { Solve, ValidateGrad, Optimize };

const char* to_string(Command c);

struct MeasurementConfig {
  std::size_t nx = 64;
  std::size_t ny = 64;
  /// Points closer than this to the boundary are dropped; negative means 2 eps.
  double margin = -1.0;
};

/// A fully parsed and validated experiment description.
struct ExperimentConfig {
  Command command = Command::Solve;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::filesystem::path output = "out";
  PDEProblem problem;
  bool auto_sigma_bar = true;
  MeasurementConfig measurement;
  /// Walks per point for solve and for reference values.
  std::size_t walks = 1024;
  GradCheckOptions validate;
  OptimizerConfig optimizer;
  /// Problem that generates the synthetic reference for optimize.
  std::optional<PDEProblem> reference;
  std::size_t reference_walks = 0;
  /// Echo of the input with every default filled in.
  nlohmann::json resolved;
};

/// Parses and validates. Relative texture paths resolve against base_dir.
/// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dwos
