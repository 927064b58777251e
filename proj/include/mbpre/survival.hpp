#pragma once

#include "mbpre/environment.hpp"
#include "mbpre/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mbpre::survival {

inline constexpr std::int64_t kDefaultCap = 10'000'000;

struct BranchingState {
  std::vector<std::int64_t> counts;  // Z^(1)(n), ..., Z^(p)(n)
  int generation = 0;

  std::int64_t total() const;
  bool extinct() const { return total() == 0; }
  static BranchingState single(int types, int type_index);
};

struct PopulationTrajectory {
  std::vector<BranchingState> states;  // up to the cap event or generation n
  std::optional<int> capped_at;        // generation at which the total exceeded cap
  // Alive at generation k: extinct runs stop early, capped runs count as alive.
  bool alive_at(int k) const;
};

// Each generation draws one environment component, then every type-i
// parent draws an offspring vector from law i. Once the total exceeds cap
// the run stops and is flagged.
PopulationTrajectory simulate_population(const env::EnvironmentModel& model,
                                         const BranchingState& z0, int n, std::int64_t cap,
                                         RandomStream& rng);

struct ScalingPoint {
  int n;
  double p_hat;
  double se;
  double sqrt_n_p;
  double capped_fraction;
};

struct BetaFit {
  double slope;
  double slope_lo;
  double slope_hi;
  double beta;
  double beta_lo;
  double beta_hi;
  int points_used;
  bool slope_in_window;  // slope in [-0.57, -0.43]
};

struct ScalingReport {
  int type_index;  // 0-based
  std::int64_t replicas;
  std::vector<ScalingPoint> points;
  // Replicas whose quenched survival increased along the grid; must be 0.
  std::int64_t monotonicity_violations = 0;
  std::optional<BetaFit> fit;
};

// P(Z(n) != 0 | Z(0) = e_i) = E[(e_i, 1 - f_{0,n}(0))]. Replica r samples
// an environment prefix of length max(n_grid) from stream (seed, r) and
// evaluates the quenched survival for every grid n.
ScalingReport annealed_survival(const env::EnvironmentModel& model, int type_index,
                                std::span<const int> n_grid, std::int64_t replicas,
                                std::uint64_t seed);

// Survival frequency of direct population simulation, for cross-checks.
ScalingReport particle_survival(const env::EnvironmentModel& model, int type_index,
                                std::span<const int> n_grid, std::int64_t replicas,
                                std::uint64_t seed, std::int64_t cap = kDefaultCap);

// Weighted least squares of log p on log n over the top half of the grid
// (the last ceil(N/2) points) and the weighted mean of sqrt(n) p there;
// 95% intervals. Throws std::invalid_argument with fewer than 4 points or
// a span below a factor 8 in n.
BetaFit fit_beta(std::span<const int> n, std::span<const double> p, std::span<const double> se);

}  // namespace mbpre::survival
