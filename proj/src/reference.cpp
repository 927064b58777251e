#include "mbpre/reference.hpp"

#include "mbpre/gf.hpp"
#include "mbpre/stats.hpp"

#include <cmath>

namespace mbpre::reference {

survival::ScalingReport annealed_survival(const env::EnvironmentModel& model, int type_index,
                                          std::span<const int> n_grid, std::int64_t replicas,
                                          std::uint64_t seed) {
  std::vector<std::vector<double>> columns(n_grid.size());
  for (std::int64_t r = 0; r < replicas; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    std::vector<const gf::GfHandle*> chain;
    for (int k = 0; k < n_grid.back(); ++k) chain.push_back(&model.sample(rng).gf());
    for (std::size_t j = 0; j < n_grid.size(); ++j)
      columns[j].push_back(gf::quenched_survival(
          std::span<const gf::GfHandle* const>(chain.data(), static_cast<std::size_t>(n_grid[j])),
          type_index));
  }
  survival::ScalingReport report{type_index, replicas, {}, 0, std::nullopt};
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    const MeanEstimate m = mean_estimate(columns[j]);
    report.points.push_back(
        {n_grid[j], m.mean, m.se, std::sqrt(static_cast<double>(n_grid[j])) * m.mean, 0.0});
  }
  return report;
}

std::vector<double> tau_survival(const walk::ProjectivePoint& x, double a,
                                 const env::EnvironmentModel& model, std::span<const int> n_grid,
                                 std::int64_t replicas, std::uint64_t seed) {
  std::vector<double> out(n_grid.size(), 0.0);
  for (std::int64_t r = 0; r < replicas; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    const auto path = walk::run_walk(x, a, model, n_grid.back(), rng, true);
    for (std::size_t j = 0; j < n_grid.size(); ++j)
      if (!path.tau || *path.tau > n_grid[j]) out[j] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(replicas);
  return out;
}

std::vector<double> harmonic_values(const walk::ProjectivePoint& x, double a,
                                    const env::EnvironmentModel& model,
                                    std::span<const int> n_grid, std::int64_t replicas,
                                    std::uint64_t seed) {
  std::vector<std::vector<double>> columns(n_grid.size());
  for (std::int64_t r = 0; r < replicas; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    const auto path = walk::run_walk(x, a, model, n_grid.back(), rng, true);
    for (std::size_t j = 0; j < n_grid.size(); ++j) {
      const bool alive = !path.tau || *path.tau > n_grid[j];
      columns[j].push_back(alive ? path.values[static_cast<std::size_t>(n_grid[j])] : 0.0);
    }
  }
  std::vector<double> out;
  for (const auto& c : columns) out.push_back(mean_estimate(c).mean);
  return out;
}

double lyapunov(const env::EnvironmentModel& model, int n, std::int64_t replicas,
                std::uint64_t seed, const walk::ProjectivePoint& x) {
  std::vector<double> per_replica;
  for (std::int64_t r = 0; r < replicas; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    walk::ProjectivePoint point = x;
    double log_norm = 0.0;
    for (int k = 0; k < n; ++k) {
      const Matrix& m = model.sample(rng).mean();
      log_norm += walk::cocycle(point, m);
      point = walk::projective_action(point, m);
    }
    per_replica.push_back(log_norm / n);
  }
  return mean_estimate(per_replica).mean;
}

}  // namespace mbpre::reference
