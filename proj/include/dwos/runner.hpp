#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace dwos {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitRuntime = 2,
  kExitValidation = 3,
};

/// Command-line overrides of the config.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::filesystem::path> output;
};

/// Loads, validates and executes a config; progress and diagnostics go to
/// `log`. Returns one of the ExitCode values and never throws.
int run(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& log);

}  // namespace dwos
