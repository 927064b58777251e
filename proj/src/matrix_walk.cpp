#include "mbpre/matrix_walk.hpp"

#include "mbpre/parallel.hpp"
#include "mbpre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbpre::walk {

ProjectivePoint::ProjectivePoint(Vector x) : x_(std::move(x)) {
  if (x_.size() < 1 || x_.size() > kMaxTypes)
    throw std::invalid_argument("projective point: bad dimension");
  if (!(x_.minCoeff() >= 0.0) || std::abs(x_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("projective point: need x >= 0 with |x| = 1");
}

ProjectivePoint ProjectivePoint::uniform(int p) {
  return ProjectivePoint(Vector::Constant(p, 1.0 / p));
}

ProjectivePoint ProjectivePoint::vertex(int p, int i) {
  if (i < 0 || i >= p) throw std::invalid_argument("projective point: vertex index out of range");
  Vector x = Vector::Zero(p);
  x[i] = 1.0;
  return ProjectivePoint(std::move(x));
}

double advance(Vector& x, const Matrix& a) {
  const Vector next = row_times(x, a);
  const double norm = next.sum();
  if (!(norm > 0.0)) throw std::domain_error("projective action: |xA| = 0");
  x = next / norm;
  return std::log(norm);
}

ProjectivePoint projective_action(const ProjectivePoint& x, const Matrix& a) {
  if (a.rows() != x.types() || a.cols() != x.types())
    throw std::invalid_argument("projective action: dimension mismatch");
  Vector y = x.vector();
  advance(y, a);
  return ProjectivePoint(std::move(y), ProjectivePoint::Unchecked{});
}

double cocycle(const ProjectivePoint& x, const Matrix& a) {
  if (a.rows() != x.types() || a.cols() != x.types())
    throw std::invalid_argument("cocycle: dimension mismatch");
  const double norm = row_times(x.vector(), a).sum();
  if (!(norm > 0.0)) throw std::domain_error("cocycle: |xA| = 0");
  return std::log(norm);
}

std::optional<int> first_passage(std::span<const double> values) {
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] <= kStopTolerance) return static_cast<int>(k);
  return std::nullopt;
}

WalkPath run_walk(const ProjectivePoint& x, double a, const env::EnvironmentModel& model, int n,
                  RandomStream& rng, bool stop_at_tau) {
  if (n < 0) throw std::invalid_argument("run_walk: negative length");
  if (x.types() != model.types()) throw std::invalid_argument("run_walk: dimension mismatch");
  WalkPath path{x, a, {}, {}, {}, {}, std::nullopt};
  path.points.reserve(n + 1);
  path.values.reserve(n + 1);
  path.increments.reserve(n);
  path.atoms.reserve(n);
  path.points.push_back(x.vector());
  path.values.push_back(a);

  Vector point = x.vector();
  double value = a;
  for (int k = 0; k < n; ++k) {
    const std::size_t atom = model.sample_index(rng);
    const double increment = advance(point, model.atom(atom).mean());
    value += increment;
    path.atoms.push_back(atom);
    path.increments.push_back(increment);
    path.points.push_back(point);
    path.values.push_back(value);
    if (!path.tau && value <= kStopTolerance) {
      path.tau = k + 1;
      if (stop_at_tau) break;
    }
  }
  return path;
}

LyapunovEstimate lyapunov(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                          std::uint64_t seed, std::optional<ProjectivePoint> x) {
  if (n < 1 || replicas < 1) throw std::invalid_argument("lyapunov: n and replicas must be >= 1");
  const ProjectivePoint start = x ? *x : ProjectivePoint::uniform(model.types());
  if (start.types() != model.types()) throw std::invalid_argument("lyapunov: dimension mismatch");

  std::vector<double> per_replica(static_cast<std::size_t>(replicas));
  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    Vector point = start.vector();
    double log_norm = 0.0;
    for (int k = 0; k < n; ++k) log_norm += advance(point, model.sample(rng).mean());
    per_replica[static_cast<std::size_t>(r)] = log_norm / n;
  });
  const MeanEstimate est = mean_estimate(per_replica);
  return {est.mean, est.se, n, replicas};
}

namespace {

// Test functions: x_j and x_j x_l for j <= l.
std::vector<double> test_functions(const Vector& x) {
  std::vector<double> out;
  const int p = static_cast<int>(x.size());
  for (int j = 0; j < p; ++j) out.push_back(x[j]);
  for (int j = 0; j < p; ++j)
    for (int l = j; l < p; ++l) out.push_back(x[j] * x[l]);
  return out;
}

std::vector<double> one_step_expectation(const env::EnvironmentModel& model, const Vector& x) {
  std::vector<double> acc;
  for (std::size_t k = 0; k < model.size(); ++k) {
    Vector y = x;
    advance(y, model.atom(k).mean());
    const auto phi = test_functions(y);
    if (acc.empty()) acc.assign(phi.size(), 0.0);
    for (std::size_t t = 0; t < phi.size(); ++t) acc[t] += model.weights()[k] * phi[t];
  }
  return acc;
}

}  // namespace

EmpiricalMeasure invariant_measure(const env::EnvironmentModel& model, int burn_in, int samples,
                                   RandomStream& rng, std::optional<ProjectivePoint> start) {
  if (burn_in < 1 || samples < 1)
    throw std::invalid_argument("invariant measure: burn_in and samples must be >= 1");
  Vector point = start ? start->vector() : ProjectivePoint::uniform(model.types()).vector();
  if (point.size() != model.types())
    throw std::invalid_argument("invariant measure: dimension mismatch");
  for (int k = 0; k < burn_in; ++k) advance(point, model.sample(rng).mean());

  EmpiricalMeasure out;
  out.points.reserve(samples);
  const std::size_t nphi = test_functions(point).size();
  std::vector<double> drift_sum(nphi, 0.0);     // sum (Q phi(X_k) - phi(X_k))
  std::vector<std::vector<double>> martingale(nphi);  // Q phi(X_k) - phi(X_{k+1})

  for (int k = 0; k < samples; ++k) {
    out.points.push_back(point);
    const auto q_phi = one_step_expectation(model, point);
    const auto phi = test_functions(point);
    Vector next = point;
    advance(next, model.sample(rng).mean());
    const auto phi_next = test_functions(next);
    for (std::size_t t = 0; t < nphi; ++t) {
      drift_sum[t] += q_phi[t] - phi[t];
      martingale[t].push_back(q_phi[t] - phi_next[t]);
    }
    point = next;
  }
  out.weights.assign(samples, 1.0 / samples);

  out.stationarity_residual = 0.0;
  out.tolerance = 0.0;
  for (std::size_t t = 0; t < nphi; ++t) {
    out.stationarity_residual = std::max(out.stationarity_residual, std::abs(drift_sum[t]) / samples);
    const MeanEstimate m = mean_estimate(martingale[t]);
    out.tolerance = std::max(out.tolerance, 3.0 * m.se + 2.0 / samples);
  }
  return out;
}

}  // namespace mbpre::walk
