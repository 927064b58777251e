#include "mbpre/runner.hpp"

#include "mbpre/conditions.hpp"
#include "mbpre/harmonic.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/survival.hpp"
#include "mbpre/verify.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mbpre::runner {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Builds one CSV table; every value goes through format_double.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : columns_(header.size()) {
    row_strings(header);
  }

  Csv& cell(const std::string& s) {
    line_.push_back(s);
    return *this;
  }
  Csv& cell(double v) { return cell(format_double(v)); }
  Csv& cell(std::int64_t v) { return cell(std::to_string(v)); }
  Csv& cell(int v) { return cell(std::to_string(v)); }
  void end() {
    if (line_.size() != columns_) throw std::logic_error("csv: wrong number of cells");
    row_strings(line_);
    line_.clear();
  }

  std::string str() const { return out_.str(); }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

  std::size_t columns_;
  std::vector<std::string> line_;
  std::ostringstream out_;
};

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    names_.push_back(name);
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

walk::ProjectivePoint start_point(const ExperimentConfig& cfg) {
  return cfg.start.x ? walk::ProjectivePoint(*cfg.start.x)
                     : walk::ProjectivePoint::uniform(cfg.model->types());
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

json run_survival(const ExperimentConfig& cfg, Outputs& out) {
  const int i = cfg.type_index - 1;
  const auto report =
      cfg.estimator == "particle"
          ? survival::particle_survival(*cfg.model, i, cfg.n_grid, cfg.replicas, cfg.seed, cfg.cap)
          : survival::annealed_survival(*cfg.model, i, cfg.n_grid, cfg.replicas, cfg.seed);
  Csv table({"type_i", "n", "p_hat", "stderr", "sqrt_n_p", "capped_fraction"});
  for (const auto& pt : report.points)
    table.cell(cfg.type_index).cell(pt.n).cell(pt.p_hat).cell(pt.se).cell(pt.sqrt_n_p)
        .cell(pt.capped_fraction).end();
  out.write("survival.csv", table.str());

  Csv summary({"type_i", "slope", "slope_ci_lo", "slope_ci_hi", "beta_hat", "beta_ci_lo",
               "beta_ci_hi", "monotonicity_violations"});
  const auto& f = report.fit;
  summary.cell(cfg.type_index)
      .cell(f ? f->slope : kNaN).cell(f ? f->slope_lo : kNaN).cell(f ? f->slope_hi : kNaN)
      .cell(f ? f->beta : kNaN).cell(f ? f->beta_lo : kNaN).cell(f ? f->beta_hi : kNaN)
      .cell(report.monotonicity_violations).end();
  out.write("survival_summary.csv", summary.str());

  json s{{"estimator", cfg.estimator},
         {"type_i", cfg.type_index},
         {"monotonicity_violations", report.monotonicity_violations}};
  if (f)
    s["fit"] = {{"slope", f->slope},     {"slope_ci", {f->slope_lo, f->slope_hi}},
                {"beta_hat", f->beta},   {"beta_ci", {f->beta_lo, f->beta_hi}},
                {"points_used", f->points_used}, {"slope_in_window", f->slope_in_window}};
  return s;
}

json run_tau(const ExperimentConfig& cfg, Outputs& out) {
  const auto x = start_point(cfg);
  Csv table({"x_id", "a", "n", "estimate", "stderr"});
  Csv summary({"x_id", "a", "h_hat", "sigma2", "sigma2_stderr", "implied_constant", "nonincreasing"});
  std::vector<harmonic::TauTailReport> reports;
  json rows = json::array();
  harmonic::TailOptions options;
  options.sigma_replicas = cfg.sigma_replicas;
  for (std::size_t k = 0; k < cfg.start.a_values.size(); ++k) {
    const double a = cfg.start.a_values[k];
    const auto h = harmonic::estimate_h(x, a, *cfg.model, cfg.n_grid, cfg.replicas,
                                        derive_seed(cfg.seed, 2 * k + 1));
    auto rep = harmonic::tau_tail(x, a, *cfg.model, cfg.n_grid, cfg.replicas,
                                  derive_seed(cfg.seed, 2 * k), h.h_hat, options);
    for (const auto& pt : rep.points) table.cell(1).cell(a).cell(pt.n).cell(pt.p_hat).cell(pt.se).end();
    summary.cell(1).cell(a).cell(h.h_hat).cell(rep.sigma2).cell(rep.sigma2_se)
        .cell(rep.implied_constant.value_or(kNaN)).cell(rep.nonincreasing ? 1 : 0).end();
    rows.push_back({{"a", a}, {"h_hat", h.h_hat}, {"h_stable", h.stable}, {"sigma2", rep.sigma2},
                    {"sigma2_stderr", rep.sigma2_se},
                    {"implied_constant", nan_safe(rep.implied_constant.value_or(kNaN))},
                    {"top_sqrt_n_p", rep.points.back().sqrt_n_p}});
    reports.push_back(std::move(rep));
  }
  const auto envelope = harmonic::fit_envelope(reports);
  out.write("tau.csv", table.str());
  out.write("tau_summary.csv", summary.str());
  return {{"rows", rows},
          {"envelope", {{"c_hat", envelope.c_hat}, {"holds", envelope.holds},
                        {"worst_ratio", envelope.worst_ratio}}}};
}

json run_harmonic(const ExperimentConfig& cfg, Outputs& out) {
  const auto x = start_point(cfg);
  Csv table({"x_id", "a", "n", "estimate", "stderr"});
  Csv summary({"x_id", "a", "h_hat", "h_stderr", "stable", "relative_change",
               "harmonicity_residual"});
  std::vector<harmonic::HarmonicEstimate> estimates;
  const auto h_fn = harmonic::monte_carlo_harmonic(*cfg.model, cfg.n_grid.back(), cfg.replicas,
                                                   derive_seed(cfg.seed, 0xa11));
  for (std::size_t k = 0; k < cfg.start.a_values.size(); ++k) {
    const double a = cfg.start.a_values[k];
    auto est = harmonic::estimate_h(x, a, *cfg.model, cfg.n_grid, cfg.replicas,
                                    derive_seed(cfg.seed, k));
    for (const auto& v : est.values) table.cell(1).cell(a).cell(v.n).cell(v.estimate).cell(v.se).end();
    double residual = kNaN;
    try {
      residual = harmonic::harmonicity_residual(x, a, *cfg.model, h_fn);
    } catch (const std::domain_error&) {
    }
    summary.cell(1).cell(a).cell(est.h_hat).cell(est.h_se).cell(est.stable ? 1 : 0)
        .cell(est.relative_change).cell(residual).end();
    estimates.push_back(std::move(est));
  }
  const auto fit = harmonic::fit_bound_constants(estimates);
  out.write("harmonic.csv", table.str());
  out.write("harmonic_summary.csv", summary.str());
  json rows = json::array();
  for (const auto& e : estimates)
    rows.push_back({{"a", e.a}, {"h_hat", e.h_hat}, {"h_stderr", e.h_se}, {"stable", e.stable}});
  return {{"rows", rows}, {"d_hat", fit.d_hat}, {"c_hat", fit.c_hat}, {"bounds_hold", fit.holds}};
}

json run_lyapunov(const ExperimentConfig& cfg, Outputs& out) {
  const auto x = start_point(cfg);
  Csv table({"quantity", "estimate", "stderr", "n", "replicas"});
  json rows = json::array();
  for (int n : cfg.n_grid) {
    const auto est = walk::lyapunov(*cfg.model, n, cfg.replicas, cfg.seed, x);
    table.cell("pi_hat").cell(est.estimate).cell(est.se).cell(n).cell(est.replicas).end();
    rows.push_back({{"n", n}, {"pi_hat", est.estimate}, {"stderr", est.se}});
  }
  out.write("lyapunov.csv", table.str());
  return {{"rows", rows}};
}

json run_conditions(const ExperimentConfig& cfg, Outputs& out) {
  walk::ConditionParams params;
  params.epsilon_grid = cfg.epsilon_grid;
  params.delta_grid = cfg.delta_grid;
  params.lyapunov_n = cfg.lyapunov_n;
  params.lyapunov_replicas = cfg.lyapunov_replicas;
  params.seed = cfg.seed;
  const auto report = walk::check_conditions(*cfg.model, params);
  Csv table({"quantity", "estimate", "stderr", "n", "replicas"});
  json rows = json::array();
  for (const auto& e : report.entries) {
    const bool mc = e.name == "H4";
    table.cell(e.name).cell(e.estimate).cell(e.se).cell(mc ? cfg.lyapunov_n : 0)
        .cell(mc ? cfg.lyapunov_replicas : std::int64_t{0}).end();
    rows.push_back({{"name", e.name}, {"status", std::string(walk::to_string(e.status))},
                    {"estimate", nan_safe(e.estimate)}, {"stderr", e.se}, {"detail", e.detail}});
  }
  out.write("conditions.csv", table.str());
  out.write("conditions.txt", walk::format_report(report));
  return {{"conditions", rows}};
}

json run_verify(const ExperimentConfig& cfg, Outputs& out) {
  verify::CampaignOptions options;
  options.instances = cfg.instances;
  options.telescope_instances = cfg.telescope_instances;
  options.seed = cfg.seed;
  const auto rows = verify::run_all(options);
  std::ostringstream csv;
  verify::write_csv(csv, rows);
  out.write("verify.csv", csv.str());
  std::int64_t violations = 0;
  for (const auto& r : rows) violations += r.violations;
  return {{"checks", rows.size()}, {"violations", violations}};
}

json run_laws(const ExperimentConfig& cfg, Outputs& out) {
  std::ostringstream text;
  const auto& model = *cfg.model;
  for (std::size_t k = 0; k < model.size(); ++k)
    for (int i = 0; i < model.types(); ++i) {
      text << "# component " << k + 1 << " weight " << format_double(model.weights()[k])
           << " parent type " << i + 1 << "\n";
      env::write_law_table(text, model.atom(k).laws()[static_cast<std::size_t>(i)]);
    }
  out.write("laws.txt", text.str());
  return {{"components", model.size()}, {"types", model.types()}};
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunManifest run(const ExperimentConfig& config) {
  config.validate();
  set_worker_count(config.threads);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  Outputs out(config.output);

  json summary;
  switch (config.command) {
    case Command::survival: summary = run_survival(config, out); break;
    case Command::tau: summary = run_tau(config, out); break;
    case Command::harmonic: summary = run_harmonic(config, out); break;
    case Command::lyapunov: summary = run_lyapunov(config, out); break;
    case Command::conditions: summary = run_conditions(config, out); break;
    case Command::verify: summary = run_verify(config, out); break;
    case Command::laws: summary = run_laws(config, out); break;
  }
  summary["command"] = std::string(to_string(config.command));
  summary["version"] = kVersion;
  out.write("summary.json", summary.dump(2) + "\n");

  RunManifest manifest;
  manifest.directory = out.dir();
  for (const auto& name : out.names()) manifest.outputs.push_back({name, sha256_hex(out.dir() / name)});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json files = json::array();
  for (const auto& f : manifest.outputs) files.push_back({{"file", f.name}, {"sha256", f.sha256}});
  manifest.json = {
      {"artifact", "mbpre"},
      {"version", kVersion},
      {"config", config.echo()},
      {"started_at", started_at},
      {"wall_clock_seconds", seconds},
      {"threads", worker_count()},
      {"streams",
       {{"scheme", "replica r draws from mt19937_64 seeded by (seed, r); sub-experiments use "
                   "splitmix64-derived seeds"},
        {"seed", config.seed},
        {"replica_stream_ids", "0.." + std::to_string(config.replicas - 1)}}},
      {"outputs", files}};
  std::ofstream mf(out.dir() / "manifest.json", std::ios::binary);
  mf << manifest.json.dump(2) << "\n";
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  return manifest;
}

}  // namespace mbpre::runner
