#pragma once

#include "mbpre/environment.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mbpre::runner {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { survival, tau, harmonic, lyapunov, conditions, verify, laws };

std::string_view to_string(Command command);
std::optional<Command> parse_command(std::string_view name);

// Parse or validation failure; `errors` lists every problem found, each
// prefixed by the offending field (or line and column for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct StartSpec {
  std::optional<Vector> x;  // nullopt: uniform point
  double a = 1.0;
  std::vector<double> a_values;  // tau / harmonic sweep; defaults to {a}
};

struct ExperimentConfig {
  Command command = Command::survival;
  nlohmann::json scenario;
  std::shared_ptr<const env::EnvironmentModel> model;
  std::vector<int> n_grid{64, 128, 256, 512, 1024, 2048, 4096};
  std::int64_t replicas = 10000;
  std::uint64_t seed = 1;
  int type_index = 1;  // 1-based
  StartSpec start;
  std::string output = "out";
  int threads = 0;  // 0: OpenMP default

  // survival
  std::string estimator = "gf";  // gf | particle
  std::int64_t cap = 10'000'000;
  // conditions
  std::vector<double> epsilon_grid{0.25, 0.5, 1.0};
  std::vector<double> delta_grid{0.1, 0.25, 0.5};
  int lyapunov_n = 1000;
  std::int64_t lyapunov_replicas = 1000;
  // verify
  std::int64_t instances = 10000;
  std::int64_t telescope_instances = 200;
  // tau
  std::int64_t sigma_replicas = 20000;

  // Configuration with defaults applied, in the file schema.
  nlohmann::json echo() const;
  // Re-checks the invariants after command-line overrides.
  void validate() const;
};

// `command` replaces the file's "command" field before validation. The
// scenario may be omitted only for verify.
ExperimentConfig parse_config(std::string_view text, std::optional<Command> command = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<Command> command = std::nullopt);

// Builds the environment model described by a scenario object. Throws
// ConfigError naming the offending fields.
env::EnvironmentModel build_model(const nlohmann::json& scenario);

}  // namespace mbpre::runner
