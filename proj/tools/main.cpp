#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dwos/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Differentiable walk-on-spheres experiment runner"};
  app.require_subcommand(1);

  std::string config;
  dwos::RunOverrides overrides;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config, "Path to the config file")->required()->check(CLI::ExistingFile);
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the experiment seed");
  CLI::Option* threads_opt = run->add_option("--threads", threads, "Worker threads; results do not depend on the count")
                                 ->check(CLI::PositiveNumber);
  CLI::Option* out_opt = run->add_option("--out", out, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dwos::kExitConfig;
  }
  if (*seed_opt) overrides.seed = seed;
  if (*threads_opt) overrides.threads = threads;
  if (*out_opt) overrides.output = out;
  return dwos::run(config, overrides, std::cerr);
}
