#pragma once

// Serial, unoptimized versions of the Monte Carlo kernels. They consume the
// random streams exactly like the parallel kernels, so for equal seeds the
// results agree bit for bit. Used by the kernel tests and the benchmark.

#include "mbpre/environment.hpp"
#include "mbpre/harmonic.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/survival.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mbpre::reference {

// Builds the GF chain of each replica and calls gf::quenched_survival per
// grid n.
survival::ScalingReport annealed_survival(const env::EnvironmentModel& model, int type_index,
                                          std::span<const int> n_grid, std::int64_t replicas,
                                          std::uint64_t seed);

// P(tau > n) per grid n from walk::run_walk paths.
std::vector<double> tau_survival(const walk::ProjectivePoint& x, double a,
                                 const env::EnvironmentModel& model, std::span<const int> n_grid,
                                 std::int64_t replicas, std::uint64_t seed);

// E[S_n; tau > n] per grid n from walk::run_walk paths.
std::vector<double> harmonic_values(const walk::ProjectivePoint& x, double a,
                                    const env::EnvironmentModel& model,
                                    std::span<const int> n_grid, std::int64_t replicas,
                                    std::uint64_t seed);

// Mean of ln|x R_n| / n using projective_action and cocycle.
double lyapunov(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                std::uint64_t seed, const walk::ProjectivePoint& x);

}  // namespace mbpre::reference
