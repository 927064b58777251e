// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include "mbpre/conditions.hpp"
#include "mbpre/config.hpp"
#include "mbpre/environment.hpp"
#include "mbpre/harmonic.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/runner.hpp"
#include "mbpre/survival.hpp"
#include "mbpre/verify.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace mbpre;
using walk::ProjectivePoint;
namespace fs = std::filesystem;

namespace {

const double kLn2 = std::log(2.0);

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

bool campaign_clean(const verify::CheckResult& r, double tol, std::string& detail) {
  detail += fmt("%s: %lld/%lld violations, max slack %.3g; ", r.check_name.c_str(),
                static_cast<long long>(r.violations), static_cast<long long>(r.instances), r.max_slack);
  return r.violations == 0 && r.max_slack < tol;
}

env::EnvironmentModel lattice() { return env::EnvironmentModel::scalar_symmetric(kLn2); }

// Two types, fractional linear offspring. Every mean matrix has equal row
// sums (2 or 1/2) so |xM| does not depend on x and S_n is the +-ln 2 walk,
// while the mixers make the type dynamics genuinely two-dimensional.
env::EnvironmentModel critical_two_type() {
  auto fl = [](double stall, double r, double m00, double m11) {
    Matrix mix(2, 2);
    mix << m00, 1.0 - m00, 1.0 - m11, m11;
    return env::FractionalLinearParams{Vector::Constant(2, stall), Vector::Constant(2, r), mix};
  };
  return env::EnvironmentModel::fractional_linear({{fl(1.0 / 3.0, 2.0 / 3.0, 0.7, 0.4), 0.25},
                                                   {fl(1.0 / 3.0, 2.0 / 3.0, 0.2, 0.9), 0.25},
                                                   {fl(2.0 / 3.0, 1.0 / 3.0, 0.5, 0.5), 0.25},
                                                   {fl(2.0 / 3.0, 1.0 / 3.0, 0.8, 0.3), 0.25}});
}

Outcome telescope_identity() {
  std::string d;
  const bool ok = campaign_clean(verify::check_telescope_identity({10000, 200, 15, 101}), 1e-9, d);
  return {ok, d};
}

Outcome psi_and_kozlov() {
  std::string d;
  bool ok = campaign_clean(verify::check_psi_bound({10000, 200, 15, 102}), 1e-12, d);
  ok &= campaign_clean(verify::check_kozlov({10000, 200, 15, 103}), 1e-12, d);
  return {ok, d};
}

Outcome norm_bounds() {
  std::string d;
  bool ok = campaign_clean(verify::check_second_moment_bound({10000, 200, 15, 104}), 1e-12, d);
  ok &= campaign_clean(verify::check_mean_norm_lower_bound({10000, 200, 15, 105}), 1e-12, d);
  return {ok, d};
}

Outcome cocycle() {
  std::string d;
  bool ok = campaign_clean(verify::check_cocycle({10000, 200, 15, 106}), 1e-12, d);
  ok &= campaign_clean(verify::check_projective_normalization({10000, 200, 15, 107}), 1e-12, d);
  return {ok, d};
}

Outcome exact_oracle_walk() {
  Vector v(3);
  v << 0.2, 0.3, 0.5;
  Matrix w1 = Matrix::Ones(3, 3), w2(3, 3);
  w2 << 1, 4, 0.5, 2, 1, 1, 0.3, 2, 5;
  const auto model = env::EnvironmentModel::common_left_eigenvector(
      v, {{2.5, 0.3}, {0.6, 0.5}, {1.1, 0.2}}, {w1, w2});
  const double a = 1.5;
  const int n = 1000;
  double worst = 0.0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    RandomStream rng(108, r);
    const auto path = walk::run_walk(ProjectivePoint(v), a, model, n, rng);
    double exact = a;
    for (int k = 0; k < n; ++k) {
      exact += std::log(model.atom_eigenvalues()[path.atoms[k]]);
      worst = std::max(worst, std::abs(path.values[k + 1] - exact));
    }
  }
  return {worst < 1e-10, fmt("max |S_n - (a + sum ln rho_k)| = %.3g over 100 paths of length 1000", worst)};
}

Outcome scalar_lyapunov() {
  std::vector<std::pair<env::EnvironmentComponent, double>> atoms;
  const double means[] = {2.5, 0.3, 1.2, 0.9};
  const double weights[] = {0.1, 0.3, 0.4, 0.2};
  for (int k = 0; k < 4; ++k)
    atoms.emplace_back(env::EnvironmentComponent(env::geometric_with_mean(means[k])), weights[k]);
  const auto model = env::EnvironmentModel::finite_mixture(atoms);
  const int n = 200;
  const std::int64_t replicas = 2000;
  const auto est = walk::lyapunov(model, n, replicas, 109);
  double total = 0.0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    RandomStream rng(109, static_cast<std::uint64_t>(r));
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += std::log(means[model.sample_index(rng)]);
    total += sum / n;
  }
  const double replay = std::abs(est.estimate - total / replicas);
  const auto sym = walk::lyapunov(lattice(), 100, 100000, 110);
  const bool ok = replay < 1e-12 && std::abs(sym.estimate) <= 3.0 * sym.se;
  return {ok, fmt("p=1 replay diff %.3g; symmetric pi_hat %.3g, 3 se %.3g", replay, sym.estimate,
                  3.0 * sym.se)};
}

Outcome harmonic_oracle() {
  const auto model = lattice();
  const auto x = ProjectivePoint::uniform(1);
  bool ok = true;
  double worst = 0.0;
  const int grid[] = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
  for (int k : {1, 2, 4}) {
    const auto est = harmonic::estimate_h(x, k * kLn2, model, grid, 100000, 111 + k);
    for (const auto& v : est.values) {
      const double z = std::abs(v.estimate - k * kLn2) / v.se;
      worst = std::max(worst, z);
      ok &= z <= 3.0;
    }
  }
  double worst_enum = 0.0;
  const int small[] = {1, 2, 3, 5, 8, 12, 16, 20};
  for (int k : {1, 3}) {
    const auto est = harmonic::estimate_h(x, k * kLn2, model, small, 100000, 120 + k);
    for (const auto& v : est.values) {
      const double exact = oracle::enumerate_lattice_paths(k, v.n, kLn2).harmonic;
      const double z = std::abs(v.estimate - exact) / v.se;
      worst_enum = std::max(worst_enum, z);
      ok &= z <= 3.0;
    }
  }
  return {ok, fmt("max |E[S_n; tau>n] - a| / se = %.2f; max |MC - enumeration| / se = %.2f", worst,
                  worst_enum)};
}

Outcome tau_tail_scaling() {
  const int k = 2;
  const int grid[] = {64, 128, 256, 512, 1024, 2048, 4096};
  const auto rep = harmonic::tau_tail(ProjectivePoint::uniform(1), k * kLn2, lattice(), grid, 100000,
                                      112, k * kLn2);
  const double target = k * std::sqrt(2.0 / std::numbers::pi);
  const auto& top = rep.points.back();
  const double rel = std::abs(top.sqrt_n_p - target) / target;
  const double ratio = rep.points[rep.points.size() - 3].sqrt_n_p / top.sqrt_n_p;
  const double s2 = kLn2 * kLn2;
  const bool ok = rel < 0.10 && std::abs(ratio - 1.0) < 0.15 &&
                  std::abs(rep.sigma2 - s2) <= 3.0 * rep.sigma2_se;
  return {ok, fmt("sqrt(n) P at 4096 = %.4f vs %.4f (%.1f%%); 1024/4096 ratio %.4f; sigma2 %.5f "
                  "(se %.2g) vs %.5f",
                  top.sqrt_n_p, target, 100 * rel, ratio, rep.sigma2, rep.sigma2_se, s2)};
}

Outcome envelope() {
  const int grid[] = {16, 64, 256, 1024, 4096};
  std::vector<harmonic::TauTailReport> reports;
  for (double a : {1.0, 2.0, 4.0, 8.0})
    reports.push_back(harmonic::tau_tail(ProjectivePoint::uniform(1), a, lattice(), grid, 50000,
                                         derive_seed(113, static_cast<std::uint64_t>(a))));
  const auto env = harmonic::fit_envelope(reports);
  return {env.holds, fmt("c_hat = %.4f, worst ratio %.4f over a in {1,2,4,8}", env.c_hat,
                         env.worst_ratio)};
}

Outcome fixed_k() {
  const int k = 5, n = 2000;
  const double a = 3 * kLn2;
  const std::vector<harmonic::PathFunctional> y{[k](const walk::WalkPath& p) {
    return p.values[k] > p.values[0] + 1e-9 ? 1.0 : 0.0;
  }};
  const auto x = ProjectivePoint::uniform(1);
  const auto hat = harmonic::hat_sampler(x, a, lattice(), k, 100000, 114,
                                         harmonic::lattice_harmonic(kLn2), y);
  const auto cond = harmonic::conditional_expectation(x, a, lattice(), n, 200000, 115, y);
  const double diff = std::abs(hat.estimates[0] - cond.estimates[0]);
  const double half = 1.96 * std::hypot(hat.se[0], cond.se[0]);
  return {diff <= half, fmt("E[Y_5 | tau > 2000] = %.4f (%lld survivors), hat E[Y_5] = %.4f, "
                            "diff %.4f, combined 95%% half width %.4f",
                            cond.estimates[0], static_cast<long long>(cond.survivors),
                            hat.estimates[0], diff, half)};
}

Outcome theorem_scaling() {
  const auto model = critical_two_type();
  walk::ConditionParams params;
  params.seed = 116;
  const auto conditions = walk::check_conditions(model, params);
  bool ok = true;
  std::string status;
  for (const char* name : {"H1", "H2", "H3", "H4", "H5"}) {
    const auto& e = conditions.at(name);
    status += std::string(name) + "=" + std::string(walk::to_string(e.status)) + " ";
    ok &= e.status == walk::Status::pass;
  }
  const int grid[] = {512, 1024, 2048, 4096};
  const auto rep = survival::annealed_survival(model, 0, grid, 100000, 117);
  std::vector<int> n;
  std::vector<double> p, se;
  for (const auto& pt : rep.points) {
    n.push_back(pt.n);
    p.push_back(pt.p_hat);
    se.push_back(pt.se);
  }
  // Slope over the whole window, not only the top half used by fit_beta.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < n.size(); ++j) {
    const double lx = std::log(double(n[j])), ly = std::log(p[j]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double m = static_cast<double>(n.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double r = rep.points[2].sqrt_n_p / rep.points[3].sqrt_n_p;
  ok &= slope >= -0.57 && slope <= -0.43 && std::abs(r - 1.0) < 0.10 &&
        rep.monotonicity_violations == 0;
  return {ok, fmt("%sslope %.4f; sqrt(n) P at 2048 / 4096 = %.4f; sqrt(n) P at 4096 = %.4f",
                  status.c_str(), slope, r, rep.points[3].sqrt_n_p)};
}

Outcome estimator_equivalence() {
  bool ok = true;
  double worst = 0.0;
  const int grid[] = {1, 2, 3, 5, 8, 12, 18, 24, 30};
  const env::EnvironmentModel models[] = {lattice(), critical_two_type()};
  std::uint64_t seed = 118;
  for (const auto& model : models)
    for (int type = 0; type < model.types(); ++type) {
      const auto gf = survival::annealed_survival(model, type, grid, 100000, seed++);
      const auto pa = survival::particle_survival(model, type, grid, 100000, seed++);
      for (std::size_t j = 0; j < gf.points.size(); ++j) {
        const double z = std::abs(gf.points[j].p_hat - pa.points[j].p_hat) /
                         std::hypot(gf.points[j].se, pa.points[j].se);
        worst = std::max(worst, z);
        ok &= z <= 3.0;
      }
    }
  return {ok, fmt("max |GF - particle| / combined se = %.2f (p = 1 and p = 2, n <= 30)", worst)};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome determinism() {
  const std::string scenario =
      R"("scenario": {"kind": "fractional_linear", "components": [
        {"weight": 0.5, "stall": [0.3333333333333333, 0.3333333333333333],
         "geometric": [0.6666666666666666, 0.6666666666666666], "mixers": [[0.7, 0.3], [0.6, 0.4]]},
        {"weight": 0.5, "stall": [0.6666666666666666, 0.6666666666666666],
         "geometric": [0.3333333333333333, 0.3333333333333333], "mixers": [[0.5, 0.5], [0.2, 0.8]]}]})";
  const std::vector<std::string> configs{
      R"({"command": "survival", "n_grid": [8, 16, 32, 64], "replicas": 3000, )" + scenario + "}",
      R"({"command": "survival", "estimator": "particle", "n_grid": [2, 4, 8, 16], "replicas": 2000, )" +
          scenario + "}",
      R"({"command": "tau", "n_grid": [16, 64, 256], "replicas": 3000, "sigma_replicas": 400,
          "start": {"a_values": [1, 2]}, )" + scenario + "}",
      R"({"command": "harmonic", "n_grid": [16, 64, 256], "replicas": 2000,
          "start": {"a_values": [0.5, 1.5]}, )" + scenario + "}",
      R"({"command": "lyapunov", "n_grid": [10, 100], "replicas": 2000, )" + scenario + "}",
      R"({"command": "conditions", "lyapunov_replicas": 500, "lyapunov_n": 200, )" + scenario + "}",
      R"({"command": "verify", "instances": 300, "telescope_instances": 20})"};
  const fs::path root = fs::temp_directory_path() / "mbpre_acceptance_determinism";
  fs::remove_all(root);
  bool ok = true;
  int files = 0;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<runner::RunManifest> runs;
    for (int variant = 0; variant < 3; ++variant) {
      auto cfg = runner::parse_config(configs[c]);
      cfg.threads = variant == 2 ? 4 : 1;
      cfg.output = (root / (std::to_string(c) + "_" + std::to_string(variant))).string();
      runs.push_back(runner::run(cfg));
    }
    for (const auto& f : runs[0].outputs) {
      if (f.name.size() < 4 || f.name.substr(f.name.size() - 4) != ".csv") continue;
      ++files;
      const std::string bytes = slurp(runs[0].directory / f.name);
      for (int v = 1; v < 3; ++v) ok &= !bytes.empty() && bytes == slurp(runs[v].directory / f.name);
    }
  }
  set_worker_count(0);
  return {ok && files > 0,
          fmt("%d CSV files over 7 commands compared across two runs and 1 vs 4 workers", files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"telescoping identity", telescope_identity},
      {"psi bound and Kozlov inequality", psi_and_kozlov},
      {"second-moment and mean-norm bounds", norm_bounds},
      {"cocycle and projective normalization", cocycle},
      {"exact-oracle walk", exact_oracle_walk},
      {"scalar Lyapunov", scalar_lyapunov},
      {"harmonic oracle", harmonic_oracle},
      {"tau tail", tau_tail_scaling},
      {"tau tail envelope", envelope},
      {"fixed-k conditioning limit", fixed_k},
      {"survival scaling", theorem_scaling},
      {"estimator equivalence", estimator_equivalence},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failures;
    std::printf("%s %2zu %s [%.1fs]: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
