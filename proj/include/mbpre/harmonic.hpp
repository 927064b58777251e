#pragma once

#include "mbpre/environment.hpp"
#include "mbpre/matrix_walk.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace mbpre::harmonic {

using walk::ProjectivePoint;
using walk::WalkPath;

// h(x, a); any positive multiple works for the hat measure.
using HarmonicFn = std::function<double(const Vector& x, double a)>;
using PathFunctional = std::function<double(const WalkPath& path)>;

struct GridValue {
  int n;
  double estimate;
  double se;
};

struct HarmonicEstimate {
  ProjectivePoint x;
  double a;
  std::vector<GridValue> values;  // E[S_n; tau > n] per grid n
  double h_hat;                   // value at the largest n
  double h_se;
  double relative_change;         // between the last two grid points
  bool stable;                    // relative_change < kStableChange
};

inline constexpr double kStableChange = 0.02;

// Monte Carlo E[S_n; tau > n] on a strictly increasing n grid. Replica r
// uses stream (seed, r) and one walk serves the whole grid.
HarmonicEstimate estimate_h(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                            std::span<const int> n_grid, std::int64_t replicas, std::uint64_t seed);

struct BoundFit {
  double d_hat;
  double c_hat;
  bool holds;  // max{0, a - d_hat} < h_hat <= c_hat (1 + a) at every point
};

// Smallest constants consistent with the sampled (a, h_hat) pairs.
BoundFit fit_bound_constants(std::span<const HarmonicEstimate> estimates);

// h for the lattice walk with steps +-delta and killing at S <= 0:
// h(a) = delta * ceil(a / delta), the overshoot-corrected value.
HarmonicFn lattice_harmonic(double delta);

// h estimated on demand by estimate_h at a single horizon n; each query
// uses a stream seed derived from its arguments, so the function is
// deterministic.
HarmonicFn monte_carlo_harmonic(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                                std::uint64_t seed);

// |sum_k w_k h(x.M_k, a + rho(x, M_k)) 1{a + rho > 0} - h(x, a)| / h(x, a),
// an exact sum over the model's atoms. Throws std::domain_error if
// h(x, a) = 0.
double harmonicity_residual(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                            const HarmonicFn& h);

struct TailPoint {
  int n;
  double p_hat;     // P(tau > n)
  double se;
  double sqrt_n_p;  // sqrt(n) * p_hat
};

struct TauTailReport {
  ProjectivePoint x;
  double a;
  std::vector<TailPoint> points;
  double sigma2;     // batch-means estimate of Var(S_N - a) / N, N = largest grid n
  double sigma2_se;
  std::optional<double> h_hat;
  std::optional<double> implied_constant;  // 2 h_hat / (sigma sqrt(2 pi))
  bool nonincreasing;
};

struct TailOptions {
  std::int64_t sigma_replicas = 20000;
  int batches = 20;
};

TauTailReport tau_tail(const ProjectivePoint& x, double a, const env::EnvironmentModel& model,
                       std::span<const int> n_grid, std::int64_t replicas, std::uint64_t seed,
                       std::optional<double> h_hat = std::nullopt, const TailOptions& options = {});

struct Envelope {
  double c_hat;
  bool holds;
  double worst_ratio;  // max of sqrt(n) p_hat / (c_hat (1 + a)) over all points
};

// c_hat is fitted at the largest n of each report (estimate plus 3 se) and
// then checked against every grid point of every report.
Envelope fit_envelope(std::span<const TauTailReport> reports);

struct HatSample {
  std::int64_t replicas;
  std::int64_t survivors;
  std::vector<double> weights;              // normalized, one per survivor
  std::vector<std::vector<double>> values;  // values[j][i]: functional j on survivor i
  std::vector<double> estimates;            // sum_i weights[i] values[j][i]
  std::vector<double> se;                   // delta-method standard errors
};

// Self-normalized endpoint reweighting: paths are simulated under the base
// law, those with tau > n are kept with weight h(X_n, S_n). Throws
// std::runtime_error if no path survives.
HatSample hat_sampler(const ProjectivePoint& x, double a, const env::EnvironmentModel& model, int n,
                      std::int64_t replicas, std::uint64_t seed, const HarmonicFn& h,
                      std::span<const PathFunctional> functionals);

// E[Y | tau > n] with the same estimator and h = 1.
HatSample conditional_expectation(const ProjectivePoint& x, double a,
                                  const env::EnvironmentModel& model, int n,
                                  std::int64_t replicas, std::uint64_t seed,
                                  std::span<const PathFunctional> functionals);

}  // namespace mbpre::harmonic
