#include "mbpre/config.hpp"
#include "mbpre/runner.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification lab for critical multitype branching processes in "
               "random environment"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::int64_t> replicas;
  std::optional<int> threads;
  app.add_option("command", command, "survival | tau | harmonic | lyapunov | conditions | verify | laws")
      ->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--out", out_dir, "Override the output directory");
  app.add_option("--replicas", replicas, "Override the replica count")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Number of OpenMP threads")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  using namespace mbpre::runner;
  const auto cmd = parse_command(command);
  if (!cmd) {
    std::cerr << "unknown command '" << command << "'\n";
    return 1;
  }
  ExperimentConfig config;
  try {
    config = load_config(config_path, *cmd);
    if (seed) config.seed = *seed;
    if (out_dir) config.output = *out_dir;
    if (replicas) config.replicas = *replicas;
    if (threads) config.threads = *threads;
    config.validate();
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  try {
    const RunManifest manifest = run(config);
    for (const auto& f : manifest.outputs)
      std::cout << (manifest.directory / f.name).string() << "  " << f.sha256 << "\n";
    std::cout << (manifest.directory / "manifest.json").string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
