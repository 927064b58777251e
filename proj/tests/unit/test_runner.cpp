#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mbpre/config.hpp"
#include "mbpre/runner.hpp"
#include "mbpre/verify.hpp"
#include "support/oracles.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace mbpre;
using runner::ConfigError;
namespace fs = std::filesystem;

namespace {

const char* kGeometric = R"({"kind": "finite_mixture",
  "components": [{"weight": 1, "geometric_mean": [[1]]}]})";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mbpre_test_runner_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string joined_errors(std::string_view text) {
  try {
    runner::parse_config(text);
  } catch (const ConfigError& e) {
    std::string all;
    for (const auto& msg : e.errors()) all += msg + "\n";
    return all;
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MBPRE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& file, const std::string& text) { std::ofstream(file) << text; }

}  // namespace

TEST_CASE("defaults") {
  const auto cfg = runner::parse_config(std::string(R"({"scenario": )") + kGeometric + "}");
  CHECK(cfg.command == runner::Command::survival);
  CHECK(cfg.replicas == 10000);
  CHECK(cfg.seed == 1);
  CHECK(cfg.n_grid == std::vector<int>{64, 128, 256, 512, 1024, 2048, 4096});
  CHECK(cfg.estimator == "gf");
  REQUIRE(cfg.model);
  CHECK(cfg.model->types() == 1);
  CHECK(cfg.echo().at("replicas") == 10000);
}

TEST_CASE("configuration errors") {
  SUBCASE("weights") {
    const auto msg = joined_errors(R"({"scenario": {"kind": "finite_mixture", "components": [
      {"weight": 0.5, "geometric_mean": [[1]]}, {"weight": 0.4, "geometric_mean": [[2]]}]}})");
    CHECK(msg.find("scenario.components") != std::string::npos);
    CHECK(msg.find("expected 1") != std::string::npos);
  }
  SUBCASE("type index") {
    const auto msg =
        joined_errors(std::string(R"({"type_index": 2, "scenario": )") + kGeometric + "}");
    CHECK(msg.find("type_index") != std::string::npos);
    CHECK(msg.find("out of range") != std::string::npos);
  }
  SUBCASE("syntax") {
    const auto msg = joined_errors("{\n  \"replicas\": 10,\n  \"seed\": ,\n}");
    CHECK(msg.find("line 3") != std::string::npos);
  }
  SUBCASE("unknown field") {
    const auto msg =
        joined_errors(std::string(R"({"replica": 5, "scenario": )") + kGeometric + "}");
    CHECK(msg.find("replica") != std::string::npos);
  }
  SUBCASE("several problems are all reported") {
    try {
      runner::parse_config(R"({"replicas": 0, "seed": -1, "scenario": {"kind": "scalar_symmetric", "delta": -1}})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.errors().size() >= 3);
    }
  }
  SUBCASE("missing scenario") { CHECK(!joined_errors("{}").empty()); }
}

TEST_CASE("survival run on the critical geometric process") {
  auto cfg = runner::parse_config(std::string(R"({"n_grid": [1, 2, 4, 8, 16, 32], "replicas": 10,
      "scenario": )") + kGeometric + "}");
  cfg.output = scratch("survival").string();
  const auto manifest = runner::run(cfg);
  std::ifstream in(manifest.directory / "survival.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "type_i,n,p_hat,stderr,sqrt_n_p,capped_fraction");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string type, n, p;
    std::getline(row, type, ',');
    std::getline(row, n, ',');
    std::getline(row, p, ',');
    CHECK(type == "1");
    CHECK(std::abs(std::stod(p) - oracle::geometric_survival(std::stoi(n))) < 1e-12);
    ++rows;
  }
  CHECK(rows == 6);
  CHECK(fs::exists(manifest.directory / "manifest.json"));
  CHECK(fs::exists(manifest.directory / "summary.json"));
  CHECK(manifest.json.at("version") == runner::kVersion);
  for (const auto& f : manifest.outputs)
    CHECK(f.sha256 == runner::sha256_hex(manifest.directory / f.name));
}

TEST_CASE("reruns are byte identical") {
  const std::string base = std::string(R"({"command": "tau", "n_grid": [4, 16, 64], "replicas": 500,
      "sigma_replicas": 200, "start": {"a_values": [0.5, 1.0]},
      "scenario": {"kind": "scalar_symmetric", "delta": 0.6931471805599453}})");
  auto a = runner::parse_config(base);
  auto b = runner::parse_config(base);
  a.output = scratch("rerun_a").string();
  b.output = scratch("rerun_b").string();
  a.threads = 1;
  b.threads = 4;
  const auto ma = runner::run(a);
  const auto mb = runner::run(b);
  REQUIRE(ma.outputs.size() == mb.outputs.size());
  for (std::size_t k = 0; k < ma.outputs.size(); ++k) {
    CHECK(ma.outputs[k].name == mb.outputs[k].name);
    CHECK(slurp(ma.directory / ma.outputs[k].name) == slurp(mb.directory / mb.outputs[k].name));
  }
}

TEST_CASE("verify command") {
  auto cfg = runner::parse_config(R"({"command": "verify", "instances": 50, "telescope_instances": 10})");
  cfg.output = scratch("verify").string();
  const auto manifest = runner::run(cfg);
  const std::string csv = slurp(manifest.directory / "verify.csv");
  CHECK(csv.rfind("check_name,instances,violations,max_slack,worst_seed\n", 0) == 0);
  CHECK(csv.find("telescope_identity,10,0,") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  write(dir / "good.json", std::string(R"({"n_grid": [1, 2, 4], "replicas": 5, "scenario": )") +
                               kGeometric + "}");
  write(dir / "bad.json", R"({"replicas": -3})");
  write(dir / "killed.json", R"({"lyapunov_n": 3, "replicas": 4,
      "scenario": {"kind": "finite_mixture", "components": [{"weight": 1, "geometric_mean": [[0]]}]}})");
  const std::string out = " --out " + (dir / "out").string();
  CHECK(run_cli("survival --config " + (dir / "good.json").string() + out) == 0);
  CHECK(run_cli("survival --config " + (dir / "bad.json").string() + out) == 1);
  CHECK(run_cli("nonsense --config " + (dir / "good.json").string() + out) == 1);
  CHECK(run_cli("survival --config " + (dir / "missing.json").string() + out) == 1);
  CHECK(run_cli("lyapunov --config " + (dir / "killed.json").string() + out) == 2);
  CHECK(run_cli("survival --threads 1 --config " + (dir / "good.json").string() + " --out " +
                (dir / "t1").string()) == 0);
  CHECK(run_cli("survival --threads 4 --config " + (dir / "good.json").string() + " --out " +
                (dir / "t4").string()) == 0);
  CHECK(slurp(dir / "t1" / "survival.csv") == slurp(dir / "t4" / "survival.csv"));
}
