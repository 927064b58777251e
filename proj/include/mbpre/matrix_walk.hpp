#pragma once

#include "mbpre/environment.hpp"
#include "mbpre/linalg.hpp"
#include "mbpre/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mbpre::walk {

// tau is the first n >= 1 with S_n <= kStopTolerance rather than S_n <= 0.
// Lattice walks (steps +-delta) accumulate rounding when summing multiples
// of delta, and must still stop when they return to 0.
inline constexpr double kStopTolerance = 1e-9;

// Point of the simplex X = {x >= 0, |x| = 1}.
class ProjectivePoint {
 public:
  // Throws std::invalid_argument unless x >= 0 and ||x|_1 - 1| <= 1e-12.
  explicit ProjectivePoint(Vector x);

  static ProjectivePoint uniform(int p);
  static ProjectivePoint vertex(int p, int i);

  int types() const { return static_cast<int>(x_.size()); }
  const Vector& vector() const { return x_; }
  double operator[](int i) const { return x_[i]; }

 private:
  struct Unchecked {};
  ProjectivePoint(Vector x, Unchecked) : x_(std::move(x)) {}
  friend ProjectivePoint projective_action(const ProjectivePoint&, const Matrix&);

  Vector x_;
};

// x . A = xA / |xA|. Throws std::domain_error if |xA| = 0.
ProjectivePoint projective_action(const ProjectivePoint& x, const Matrix& a);

// rho(x, A) = ln |xA|. Throws std::domain_error if |xA| = 0.
double cocycle(const ProjectivePoint& x, const Matrix& a);

// In-place step of the chain: x <- x . A, returning ln|xA|. For inner loops;
// throws std::domain_error if |xA| = 0.
double advance(Vector& x, const Matrix& a);

struct WalkPath {
  ProjectivePoint start;
  double a;
  std::vector<Vector> points;       // X_0 .. X_m
  std::vector<double> values;       // S_0 .. S_m
  std::vector<double> increments;   // rho(X_k, M_k), k < m
  std::vector<std::size_t> atoms;   // environment atom sampled at step k
  std::optional<int> tau;

  int length() const { return static_cast<int>(increments.size()); }
};

// Samples M_0 .. M_{n-1} from the model and records (X_k, S_k). With
// stop_at_tau the path ends at tau. Draws exactly one uniform per step.
WalkPath run_walk(const ProjectivePoint& x, double a, const env::EnvironmentModel& model, int n,
                  RandomStream& rng, bool stop_at_tau = false);

// First index k >= 1 with values[k] <= kStopTolerance.
std::optional<int> first_passage(std::span<const double> values);

struct LyapunovEstimate {
  double estimate;
  double se;
  int n;
  std::int64_t replicas;
};

// Average of ln|x R_n| / n over replicas; replica r uses stream (seed, r).
LyapunovEstimate lyapunov(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                          std::uint64_t seed, std::optional<ProjectivePoint> x = std::nullopt);

struct EmpiricalMeasure {
  std::vector<Vector> points;
  std::vector<double> weights;
  // max over test functions phi of |(P * nu)(phi) - nu(phi)|
  double stationarity_residual;
  // 3 standard errors of the martingale part plus the boundary term.
  double tolerance;
};

// Occupation measure of one chain X_k after burn-in, started at x (uniform
// point by default). The test functions are 1, x_j and x_j x_l; P * nu is
// computed exactly over the model's atoms.
EmpiricalMeasure invariant_measure(const env::EnvironmentModel& model, int burn_in, int samples,
                                   RandomStream& rng,
                                   std::optional<ProjectivePoint> start = std::nullopt);

}  // namespace mbpre::walk
