#include "mbpre/survival.hpp"

#include "mbpre/grid.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mbpre::survival {

std::int64_t BranchingState::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

BranchingState BranchingState::single(int types, int type_index) {
  if (type_index < 0 || type_index >= types)
    throw std::invalid_argument("branching state: type index out of range");
  BranchingState z{std::vector<std::int64_t>(static_cast<std::size_t>(types), 0), 0};
  z.counts[static_cast<std::size_t>(type_index)] = 1;
  return z;
}

bool PopulationTrajectory::alive_at(int k) const {
  if (k < static_cast<int>(states.size())) return !states[static_cast<std::size_t>(k)].extinct();
  return capped_at.has_value();
}

namespace {

// Cumulative tables for every (atom, parent type), built once per model.
class PopulationSampler {
 public:
  explicit PopulationSampler(const env::EnvironmentModel& model) : model_(model) {
    for (const auto& atom : model.atoms())
      for (const auto& law : atom.laws()) {
        std::vector<double> cdf(law.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < law.size(); ++k) cdf[k] = acc += law.prob(k);
        cdf.back() = 1.0;
        cdfs_.push_back(std::move(cdf));
      }
  }

  PopulationTrajectory run(const BranchingState& z0, int n, std::int64_t cap,
                           RandomStream& rng) const {
    const int p = model_.types();
    if (static_cast<int>(z0.counts.size()) != p)
      throw std::invalid_argument("simulate_population: initial state has the wrong dimension");
    for (auto c : z0.counts)
      if (c < 0) throw std::invalid_argument("simulate_population: negative initial count");
    if (cap < 1) throw std::invalid_argument("simulate_population: cap must be >= 1");

    PopulationTrajectory out;
    out.states.push_back(z0);
    BranchingState current = z0;
    for (int g = 0; g < n && !current.extinct(); ++g) {
      const std::size_t atom = model_.sample_index(rng);
      BranchingState next{std::vector<std::int64_t>(static_cast<std::size_t>(p), 0),
                          current.generation + 1};
      for (int i = 0; i < p; ++i) {
        const std::int64_t parents = current.counts[static_cast<std::size_t>(i)];
        if (parents > 0) add_offspring(atom, i, parents, next.counts, rng);
      }
      current = std::move(next);
      out.states.push_back(current);
      if (current.total() > cap) {
        out.capped_at = current.generation;
        break;
      }
    }
    return out;
  }

 private:
  void add_offspring(std::size_t atom, int type, std::int64_t parents,
                     std::vector<std::int64_t>& into, RandomStream& rng) const {
    const auto& law = model_.atom(atom).laws()[static_cast<std::size_t>(type)];
    const auto& cdf = cdfs_[atom * static_cast<std::size_t>(model_.types()) + type];
    const std::size_t support = law.size();
    auto add = [&](std::size_t k, std::int64_t times) {
      const auto z = law.counts(k);
      for (std::size_t j = 0; j < z.size(); ++j) into[j] += times * z[j];
    };
    if (parents < static_cast<std::int64_t>(support)) {
      for (std::int64_t c = 0; c < parents; ++c) {
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
        add(std::min(static_cast<std::size_t>(it - cdf.begin()), support - 1), 1);
      }
      return;
    }
    // Multinomial split of the parents over the support by sequential binomials.
    std::int64_t remaining = parents;
    double mass_left = 1.0;
    for (std::size_t k = 0; k + 1 < support && remaining > 0; ++k) {
      const double q = std::clamp(law.prob(k) / mass_left, 0.0, 1.0);
      std::binomial_distribution<std::int64_t> binom(remaining, q);
      const std::int64_t b = binom(rng.engine());
      add(k, b);
      remaining -= b;
      mass_left -= law.prob(k);
      if (!(mass_left > 0.0)) break;
    }
    if (remaining > 0) add(support - 1, remaining);
  }

  const env::EnvironmentModel& model_;
  std::vector<std::vector<double>> cdfs_;
};

void attach_fit(ScalingReport& report) {
  if (report.points.size() < 4) return;
  std::vector<int> n;
  std::vector<double> p, se;
  for (const auto& pt : report.points) {
    if (!(pt.p_hat > 0.0)) return;
    n.push_back(pt.n);
    p.push_back(pt.p_hat);
    se.push_back(pt.se);
  }
  if (n.back() < 8 * n.front()) return;
  report.fit = fit_beta(n, p, se);
}

}  // namespace

PopulationTrajectory simulate_population(const env::EnvironmentModel& model,
                                         const BranchingState& z0, int n, std::int64_t cap,
                                         RandomStream& rng) {
  if (n < 0) throw std::invalid_argument("simulate_population: negative n");
  return PopulationSampler(model).run(z0, n, cap, rng);
}

ScalingReport annealed_survival(const env::EnvironmentModel& model, int type_index,
                                std::span<const int> n_grid, std::int64_t replicas,
                                std::uint64_t seed) {
  require_grid(n_grid, "annealed_survival");
  const int p = model.types();
  if (type_index < 0 || type_index >= p)
    throw std::invalid_argument("annealed_survival: type index out of range");
  if (replicas < 1) throw std::invalid_argument("annealed_survival: replicas must be >= 1");
  const std::size_t g = n_grid.size();
  const int horizon = n_grid.back();

  std::vector<const gf::GfHandle*> handles;
  for (const auto& atom : model.atoms()) handles.push_back(&atom.gf());

  std::vector<double> table(static_cast<std::size_t>(replicas) * g);
  std::vector<char> violation(static_cast<std::size_t>(replicas), 0);
  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    std::vector<std::size_t> prefix(static_cast<std::size_t>(horizon));
    for (auto& k : prefix) k = model.sample_index(rng);
    double* row = table.data() + static_cast<std::size_t>(r) * g;
    for (std::size_t j = 0; j < g; ++j) {
      // u = 1 - f_{k,n}(0), iterated from k = n down to 0.
      Vector u = Vector::Ones(p);
      for (int k = n_grid[j] - 1; k >= 0; --k) u = handles[prefix[k]]->complement_unchecked(u);
      row[j] = u[type_index];
      if (j > 0 && row[j] > row[j - 1] * (1.0 + 1e-12)) violation[static_cast<std::size_t>(r)] = 1;
    }
  });

  ScalingReport report{type_index, replicas, {}, 0, std::nullopt};
  for (char v : violation) report.monotonicity_violations += v;
  std::vector<double> column(static_cast<std::size_t>(replicas));
  for (std::size_t j = 0; j < g; ++j) {
    for (std::int64_t r = 0; r < replicas; ++r) column[r] = table[static_cast<std::size_t>(r) * g + j];
    const MeanEstimate m = mean_estimate(column);
    report.points.push_back(
        {n_grid[j], m.mean, m.se, std::sqrt(static_cast<double>(n_grid[j])) * m.mean, 0.0});
  }
  attach_fit(report);
  return report;
}

ScalingReport particle_survival(const env::EnvironmentModel& model, int type_index,
                                std::span<const int> n_grid, std::int64_t replicas,
                                std::uint64_t seed, std::int64_t cap) {
  require_grid(n_grid, "particle_survival");
  const int p = model.types();
  const BranchingState z0 = BranchingState::single(p, type_index);
  if (replicas < 1) throw std::invalid_argument("particle_survival: replicas must be >= 1");
  const std::size_t g = n_grid.size();
  const PopulationSampler sampler(model);

  std::vector<char> alive(static_cast<std::size_t>(replicas) * g, 0);
  std::vector<int> capped_at(static_cast<std::size_t>(replicas), -1);
  parallel_for_replicas(replicas, [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    const auto traj = sampler.run(z0, n_grid.back(), cap, rng);
    for (std::size_t j = 0; j < g; ++j)
      alive[static_cast<std::size_t>(r) * g + j] = traj.alive_at(n_grid[j]) ? 1 : 0;
    if (traj.capped_at) capped_at[static_cast<std::size_t>(r)] = *traj.capped_at;
  });

  ScalingReport report{type_index, replicas, {}, 0, std::nullopt};
  const auto total = static_cast<double>(replicas);
  for (std::size_t j = 0; j < g; ++j) {
    std::int64_t count = 0, capped = 0;
    for (std::int64_t r = 0; r < replicas; ++r) {
      count += alive[static_cast<std::size_t>(r) * g + j];
      if (capped_at[r] >= 0 && capped_at[r] <= n_grid[j]) ++capped;
    }
    const double ph = static_cast<double>(count) / total;
    report.points.push_back({n_grid[j], ph, proportion_stderr(ph, total),
                             std::sqrt(static_cast<double>(n_grid[j])) * ph,
                             static_cast<double>(capped) / total});
  }
  attach_fit(report);
  return report;
}

BetaFit fit_beta(std::span<const int> n, std::span<const double> p, std::span<const double> se) {
  const std::size_t total = n.size();
  if (p.size() != total || se.size() != total)
    throw std::invalid_argument("fit_beta: n, p and se must have equal length");
  if (total < 4) throw std::invalid_argument("fit_beta: grid too short (need at least 4 points)");
  if (n.front() < 1 || n.back() < 8 * n.front())
    throw std::invalid_argument("fit_beta: grid too short (need a span of at least 8 in n)");
  const std::size_t first = total / 2;  // last ceil(total / 2) points
  const std::size_t m = total - first;

  bool known_variance = true;
  for (std::size_t k = first; k < total; ++k) {
    if (!(p[k] > 0.0)) throw std::invalid_argument("fit_beta: zero survival estimate");
    if (!(se[k] > 0.0)) known_variance = false;
  }

  std::vector<double> x, y, w;
  for (std::size_t k = first; k < total; ++k) {
    x.push_back(std::log(static_cast<double>(n[k])));
    y.push_back(std::log(p[k]));
    // Var(log p) ~ (se / p)^2.
    w.push_back(known_variance ? (p[k] / se[k]) * (p[k] / se[k]) : 1.0);
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
  }
  const double xbar = sx / sw, ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += w[k] * (x[k] - xbar) * (x[k] - xbar);
    sxy += w[k] * (x[k] - xbar) * (y[k] - ybar);
  }
  BetaFit fit{};
  fit.points_used = static_cast<int>(m);
  fit.slope = sxy / sxx;
  double slope_var = 0.0;
  if (known_variance) {
    slope_var = 1.0 / sxx;
  } else if (m > 2) {
    double rss = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double r = y[k] - ybar - fit.slope * (x[k] - xbar);
      rss += r * r;
    }
    slope_var = rss / static_cast<double>(m - 2) / sxx;
  }
  const double half = 1.96 * std::sqrt(slope_var);
  fit.slope_lo = fit.slope - half;
  fit.slope_hi = fit.slope + half;
  fit.slope_in_window = fit.slope >= -0.57 && fit.slope <= -0.43;

  // Var(sqrt(n) p) = n se^2.
  std::vector<double> scaled;
  double bw = 0.0, bsum = 0.0;
  for (std::size_t k = first; k < total; ++k) {
    const double v = std::sqrt(static_cast<double>(n[k])) * p[k];
    const double weight = known_variance ? 1.0 / (static_cast<double>(n[k]) * se[k] * se[k]) : 1.0;
    scaled.push_back(v);
    bw += weight;
    bsum += weight * v;
  }
  fit.beta = bsum / bw;
  const double beta_se = known_variance ? std::sqrt(1.0 / bw) : mean_estimate(scaled).se;
  fit.beta_lo = fit.beta - 1.96 * beta_se;
  fit.beta_hi = fit.beta + 1.96 * beta_se;
  return fit;
}

}  // namespace mbpre::survival
