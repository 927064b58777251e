#include "mbpre/harmonic.hpp"

#include "mbpre/grid.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mbpre::harmonic {

using walk::kStopTolerance;

HarmonicEstimate estimate_h(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                            std::span<const int> n_grid, std::int64_t replicas, std::uint64_t seed) {
  require_grid(n_grid, "estimate_h");
  if (!(a > 0.0)) throw std::invalid_argument("estimate_h: a must be positive");
  if (replicas < 1) throw std::invalid_argument("estimate_h: replicas must be >= 1");
  if (x.types() != model.types()) throw std::invalid_argument("estimate_h: dimension mismatch");
  const std::size_t g = n_grid.size();
  const int horizon = n_grid.back();
  std::vector<double> table(static_cast<std::size_t>(replicas) * g, 0.0);

  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    Vector point = x.vector();
    double value = a;
    std::size_t next = 0;
    double* row = table.data() + static_cast<std::size_t>(r) * g;
    for (int k = 1; k <= horizon; ++k) {
      value += walk::advance(point, model.sample(rng).mean());
      if (value <= kStopTolerance) break;
      if (k == n_grid[next]) row[next++] = value;
    }
  });

  HarmonicEstimate out{x, a, {}, 0.0, 0.0, 0.0, false};
  std::vector<double> column(static_cast<std::size_t>(replicas));
  for (std::size_t j = 0; j < g; ++j) {
    for (std::int64_t r = 0; r < replicas; ++r) column[r] = table[static_cast<std::size_t>(r) * g + j];
    const MeanEstimate m = mean_estimate(column);
    out.values.push_back({n_grid[j], m.mean, m.se});
  }
  out.h_hat = out.values.back().estimate;
  out.h_se = out.values.back().se;
  if (g >= 2) {
    const double prev = out.values[g - 2].estimate;
    out.relative_change = std::abs(out.h_hat - prev) / std::max(std::abs(out.h_hat), 1e-300);
    out.stable = out.relative_change < kStableChange;
  }
  return out;
}

BoundFit fit_bound_constants(std::span<const HarmonicEstimate> estimates) {
  if (estimates.empty()) throw std::invalid_argument("fit_bound_constants: no estimates");
  BoundFit fit{0.0, 0.0, true};
  for (const auto& e : estimates) {
    fit.d_hat = std::max(fit.d_hat, e.a - e.h_hat);
    fit.c_hat = std::max(fit.c_hat, e.h_hat / (1.0 + e.a));
  }
  // d must be positive and the lower bound is strict.
  fit.d_hat = std::max(fit.d_hat, 0.0) + 1e-9;
  for (const auto& e : estimates)
    if (!(std::max(0.0, e.a - fit.d_hat) < e.h_hat && e.h_hat <= fit.c_hat * (1.0 + e.a)))
      fit.holds = false;
  return fit;
}

HarmonicFn lattice_harmonic(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("lattice_harmonic: delta must be positive");
  return [delta](const Vector&, double a) {
    return a > kStopTolerance ? delta * std::ceil((a - kStopTolerance) / delta) : 0.0;
  };
}

HarmonicFn monte_carlo_harmonic(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                                std::uint64_t seed) {
  return [&model, n, replicas, seed](const Vector& x, double a) {
    if (!(a > kStopTolerance)) return 0.0;
    std::uint64_t tag = std::bit_cast<std::uint64_t>(a);
    for (int i = 0; i < x.size(); ++i) tag = mix64(tag ^ std::bit_cast<std::uint64_t>(x[i]));
    const int grid[] = {n};
    return estimate_h(ProjectivePoint(x), a, model, grid, replicas, derive_seed(seed, tag)).h_hat;
  };
}

double harmonicity_residual(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                            const HarmonicFn& h) {
  const double h0 = h(x.vector(), a);
  if (!(h0 != 0.0)) throw std::domain_error("harmonicity residual: h(x, a) = 0");
  double step = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    Vector y = x.vector();
    const double next = a + walk::advance(y, model.atom(k).mean());
    if (next > kStopTolerance) step += model.weights()[k] * h(y, next);
  }
  return std::abs(step - h0) / std::abs(h0);
}

TauTailReport tau_tail(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                       std::span<const int> n_grid, std::int64_t replicas, std::uint64_t seed,
                       std::optional<double> h_hat, const TailOptions& options) {
  require_grid(n_grid, "tau_tail");
  if (!(a > 0.0)) throw std::invalid_argument("tau_tail: a must be positive");
  if (replicas < 1) throw std::invalid_argument("tau_tail: replicas must be >= 1");
  if (options.batches < 2 || options.sigma_replicas < 2 * options.batches)
    throw std::invalid_argument("tau_tail: need at least 2 batches of 2 walks for sigma");
  if (x.types() != model.types()) throw std::invalid_argument("tau_tail: dimension mismatch");
  const int horizon = n_grid.back();

  // Lifetime of each walk, capped at horizon + 1 (= survived the horizon).
  std::vector<int> lifetime(static_cast<std::size_t>(replicas));
  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    Vector point = x.vector();
    double value = a;
    int k = 1;
    for (; k <= horizon; ++k) {
      value += walk::advance(point, model.sample(rng).mean());
      if (value <= kStopTolerance) break;
    }
    lifetime[static_cast<std::size_t>(r)] = k;
  });

  TauTailReport out{x, a, {}, 0.0, 0.0, h_hat, std::nullopt, true};
  std::vector<std::int64_t> alive(n_grid.size(), 0);
  for (int life : lifetime)
    for (std::size_t j = 0; j < n_grid.size(); ++j)
      if (life > n_grid[j]) ++alive[j];
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    const double p = static_cast<double>(alive[j]) / static_cast<double>(replicas);
    const double se = proportion_stderr(p, static_cast<double>(replicas));
    out.points.push_back({n_grid[j], p, se, std::sqrt(static_cast<double>(n_grid[j])) * p});
    if (j > 0 && p > out.points[j - 1].p_hat) out.nonincreasing = false;
  }

  // sigma^2 from unkilled walks on separate streams.
  const std::uint64_t sigma_seed = derive_seed(seed, 0x5167);
  std::vector<double> scaled(static_cast<std::size_t>(options.sigma_replicas));
  parallel_for_replicas(options.sigma_replicas, [&](std::int64_t r) {
    RandomStream rng(sigma_seed, static_cast<std::uint64_t>(r));
    Vector point = x.vector();
    double sum = 0.0;
    for (int k = 0; k < horizon; ++k) sum += walk::advance(point, model.sample(rng).mean());
    scaled[static_cast<std::size_t>(r)] = sum / std::sqrt(static_cast<double>(horizon));
  });
  const std::size_t per_batch = scaled.size() / static_cast<std::size_t>(options.batches);
  std::vector<double> batch_var;
  for (int b = 0; b < options.batches; ++b) {
    const std::span<const double> batch(scaled.data() + b * per_batch, per_batch);
    const MeanEstimate m = mean_estimate(batch);
    double ss = 0.0;
    for (double v : batch) ss += (v - m.mean) * (v - m.mean);
    batch_var.push_back(ss / static_cast<double>(per_batch - 1));
  }
  const MeanEstimate sigma2 = mean_estimate(batch_var);
  out.sigma2 = sigma2.mean;
  out.sigma2_se = sigma2.se;
  if (h_hat && out.sigma2 > 0.0)
    out.implied_constant = 2.0 * *h_hat / (std::sqrt(out.sigma2) * std::sqrt(2.0 * std::numbers::pi));
  return out;
}

Envelope fit_envelope(std::span<const TauTailReport> reports) {
  if (reports.empty()) throw std::invalid_argument("fit_envelope: no reports");
  Envelope env{0.0, true, 0.0};
  for (const auto& rep : reports) {
    const TailPoint& top = rep.points.back();
    const double upper = std::sqrt(static_cast<double>(top.n)) * (top.p_hat + 3.0 * top.se);
    env.c_hat = std::max(env.c_hat, upper / (1.0 + rep.a));
  }
  for (const auto& rep : reports)
    for (const auto& pt : rep.points) {
      const double ratio = pt.sqrt_n_p / (env.c_hat * (1.0 + rep.a));
      env.worst_ratio = std::max(env.worst_ratio, ratio);
      if (ratio > 1.0) env.holds = false;
    }
  return env;
}

namespace {

HatSample endpoint_reweighting(const ProjectivePoint& x, double a,
                               const env::EnvironmentModel& model, int n, std::int64_t replicas,
                               std::uint64_t seed, const HarmonicFn* h,
                               std::span<const PathFunctional> functionals) {
  if (!(a > 0.0)) throw std::invalid_argument("hat sampler: a must be positive");
  if (n < 1 || replicas < 1) throw std::invalid_argument("hat sampler: n and replicas must be >= 1");
  const std::size_t nf = functionals.size();
  std::vector<char> alive(static_cast<std::size_t>(replicas), 0);
  std::vector<double> weight(static_cast<std::size_t>(replicas), 0.0);
  std::vector<double> value(static_cast<std::size_t>(replicas) * nf, 0.0);

  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    const WalkPath path = walk::run_walk(x, a, model, n, rng, true);
    if (path.tau) return;
    alive[static_cast<std::size_t>(r)] = 1;
    const double w = h ? (*h)(path.points.back(), path.values.back()) : 1.0;
    weight[static_cast<std::size_t>(r)] = w;
    for (std::size_t j = 0; j < nf; ++j)
      value[static_cast<std::size_t>(r) * nf + j] = functionals[j](path);
  });

  HatSample out{replicas, 0, {}, std::vector<std::vector<double>>(nf), {}, {}};
  double total = 0.0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    if (!alive[r]) continue;
    ++out.survivors;
    total += weight[r];
  }
  if (out.survivors == 0 || !(total > 0.0))
    throw std::runtime_error("hat sampler: no surviving paths; increase replicas");
  for (std::int64_t r = 0; r < replicas; ++r) {
    if (!alive[r]) continue;
    out.weights.push_back(weight[r] / total);
    for (std::size_t j = 0; j < nf; ++j) out.values[j].push_back(value[r * nf + j]);
  }
  for (std::size_t j = 0; j < nf; ++j) {
    double est = 0.0;
    for (std::size_t i = 0; i < out.weights.size(); ++i) est += out.weights[i] * out.values[j][i];
    // Ratio estimator: Var ~ sum_r (w_r (Y_r - R))^2 / (sum_r w_r)^2.
    double ss = 0.0;
    for (std::size_t i = 0; i < out.weights.size(); ++i) {
      const double d = out.weights[i] * (out.values[j][i] - est);
      ss += d * d;
    }
    out.estimates.push_back(est);
    out.se.push_back(std::sqrt(ss));
  }
  return out;
}

}  // namespace

HatSample hat_sampler(const ProjectivePoint& x, double a, const env::EnvironmentModel& model, int n,
                      std::int64_t replicas, std::uint64_t seed, const HarmonicFn& h,
                      std::span<const PathFunctional> functionals) {
  return endpoint_reweighting(x, a, model, n, replicas, seed, &h, functionals);
}

HatSample conditional_expectation(const ProjectivePoint& x, double a,
                                  const env::EnvironmentModel& model, int n,
                                  std::int64_t replicas, std::uint64_t seed,
                                  std::span<const PathFunctional> functionals) {
  return endpoint_reweighting(x, a, model, n, replicas, seed, nullptr, functionals);
}

}  // namespace mbpre::harmonic
