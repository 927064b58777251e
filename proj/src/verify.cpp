#include "mbpre/verify.hpp"

#include "mbpre/environment.hpp"
#include "mbpre/gf.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

namespace mbpre::verify {

namespace {

int uniform_int(RandomStream& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

Vector random_cube_point(int p, RandomStream& rng) {
  Vector s(p);
  for (int i = 0; i < p; ++i) s[i] = rng.uniform();
  return s;
}

// Runs fn on instance streams (derive_seed(seed, k), 0) and collects slacks.
template <class Fn>
CheckResult campaign(std::string name, std::int64_t instances, std::uint64_t seed, double tolerance,
                     Fn fn) {
  std::vector<double> slack(static_cast<std::size_t>(instances));
  parallel_for_replicas(instances, [&](std::int64_t k) {
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(k)), 0);
    slack[static_cast<std::size_t>(k)] = fn(rng);
  });
  CheckResult out{std::move(name), instances, 0, -1e300, 0};
  for (std::int64_t k = 0; k < instances; ++k) {
    const double v = slack[static_cast<std::size_t>(k)];
    if (!(v <= tolerance)) ++out.violations;
    if (!(v <= out.max_slack)) {
      out.max_slack = v;
      out.worst_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    }
  }
  return out;
}

std::uint64_t check_seed(const CampaignOptions& o, std::uint64_t tag) { return derive_seed(o.seed, tag); }

std::vector<const gf::GfHandle*> handles_of(const std::vector<env::EnvironmentComponent>& comps) {
  std::vector<const gf::GfHandle*> out;
  for (const auto& c : comps) out.push_back(&c.gf());
  return out;
}

std::vector<env::EnvironmentComponent> random_chain(const LawGenerator& gen, int p, int n,
                                                    RandomStream& rng, bool positive) {
  std::vector<env::EnvironmentComponent> out;
  for (int k = 0; k < n; ++k) out.emplace_back(gen.laws(p, rng, positive));
  return out;
}

Matrix random_nonzero_matrix(int p, RandomStream& rng) {
  for (;;) {
    Matrix a = random_matrix(p, rng, false);
    if (a.sum() > 0.0) return a;
  }
}

}  // namespace

int LawGenerator::draw_types(RandomStream& rng) const { return uniform_int(rng, 1, max_types); }

env::OffspringLaw LawGenerator::law(int p, RandomStream& rng) const {
  const int size = uniform_int(rng, 1, max_support);
  std::set<std::vector<int>> seen;
  std::vector<env::OffspringLaw::Atom> atoms;
  double total = 0.0;
  while (static_cast<int>(atoms.size()) < size) {
    std::vector<int> z(static_cast<std::size_t>(p));
    for (int& c : z) c = uniform_int(rng, 0, max_children);
    if (!seen.insert(z).second) continue;
    const double w = 1.0 - rng.uniform();  // (0, 1]
    atoms.push_back({std::move(z), w});
    total += w;
  }
  for (auto& a : atoms) a.prob /= total;
  return env::OffspringLaw(p, std::move(atoms));
}

std::vector<env::OffspringLaw> LawGenerator::laws(int p, RandomStream& rng,
                                                  bool positive_mean) const {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<env::OffspringLaw> out;
    for (int i = 0; i < p; ++i) out.push_back(law(p, rng));
    const Matrix m = env::mean_matrix(out);
    if (m.sum() < 1e-6) continue;
    if (positive_mean && !(m.minCoeff() > 0.0)) continue;
    return out;
  }
  throw std::logic_error("law generator: no admissible law tuple found");
}

Matrix random_matrix(int p, RandomStream& rng, bool positive) {
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      const double u = rng.uniform();
      a(i, j) = positive ? 1.0 - u : (rng.uniform() < 1.0 / 3.0 ? 0.0 : u);
    }
  return a;
}

Vector random_simplex_point(int p, RandomStream& rng) {
  Vector x(p);
  for (int i = 0; i < p; ++i) x[i] = -std::log(1.0 - rng.uniform());
  const double total = x.sum();
  if (!(total > 0.0)) return Vector::Constant(p, 1.0 / p);
  x /= total;
  // Absorb rounding so that |x| = 1 holds to the last bit that matters.
  x[p - 1] = std::max(0.0, 1.0 - (x.sum() - x[p - 1]));
  return x;
}

CheckResult check_telescope_identity(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("telescope_identity", options.telescope_instances, check_seed(options, 1), 1e-9,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const int n = uniform_int(rng, 1, options.telescope_max_n);
    const auto comps = random_chain(gen, p, n, rng, true);
    const auto chain = handles_of(comps);
    const Vector x = random_simplex_point(p, rng);
    const Vector s = rng.uniform() < 0.5 ? Vector(Vector::Zero(p)) : random_cube_point(p, rng);

    // Explicit oracle: A R_k formed as matrix products, iterates in s-space.
    const Vector f0 = gf::compose(chain, s);
    const double lhs = 1.0 / x.dot(ones(p) - f0);
    Matrix ar = Matrix(x.asDiagonal());
    double rhs = 0.0;
    for (int k = 0; k < n; ++k) {
      const Vector inner = gf::compose(std::span(chain).subspan(k + 1), s);
      rhs += gf::psi(*chain[k], ar, comps[k].mean(), inner) / ar.sum();
      ar = ar * comps[k].mean();
    }
    rhs += 1.0 / (ar * (ones(p) - s)).sum();

    std::vector<gf::Step> steps;
    for (const auto& c : comps) steps.push_back(c.step());
    const auto report = gf::telescope(gf::CompositionChain(steps, s), x);
    return std::max(std::abs(rhs - lhs), std::abs(report.rhs - lhs)) / std::abs(lhs);
  });
}

CheckResult check_telescope_bound(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("telescope_bound", options.telescope_instances, check_seed(options, 2), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const int n = uniform_int(rng, 1, options.telescope_max_n);
    const auto comps = random_chain(gen, p, n, rng, true);
    std::vector<gf::Step> steps;
    for (const auto& c : comps) steps.push_back(c.step());
    const Vector x = random_simplex_point(p, rng);
    const auto report = gf::telescope(gf::CompositionChain(steps, Vector::Zero(p)), x);
    return -report.bound_slack / std::max(1.0, report.bound);
  });
}

CheckResult check_psi_bound(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("psi_bound", options.instances, check_seed(options, 3), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const env::EnvironmentComponent comp(gen.laws(p, rng, true));
    const Matrix a = random_nonzero_matrix(p, rng);
    const Vector s = random_cube_point(p, rng);
    const double value = gf::psi(comp.gf(), a, comp.mean(), s);
    const double bound = gf::ratio_bound(comp.mean()) * p * p * comp.eta();
    return std::max(-value, value - bound) / std::max(1.0, bound);
  });
}

CheckResult check_kozlov(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("kozlov", options.instances, check_seed(options, 4), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const env::EnvironmentComponent comp(gen.laws(p, rng, true));
    const Matrix a = random_nonzero_matrix(p, rng);
    const Vector s = random_cube_point(p, rng);
    const double h1 = gf::h_prime_at_one(a, comp.mean(), s);
    const double h2 = gf::h_second_at_one(comp.gf(), a, s);
    const double bound = h2 / (h1 * h1);
    double worst = -1e300;
    for (int t = 0; t < 20; ++t) {
      const double z = 0.05 * t;
      const double inv = 1.0 / gf::one_minus_h_of_z(comp.gf(), a, s, z);
      const double value = inv - 1.0 / (h1 * (1.0 - z));
      const double scale = std::max({1.0, bound, inv});
      worst = std::max(worst, std::max(-value, value - bound) / scale);
    }
    return worst;
  });
}

CheckResult check_second_moment_bound(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("second_moment_bound", options.instances, check_seed(options, 5), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const env::EnvironmentComponent comp(gen.laws(p, rng, false));
    const Vector s = random_cube_point(p, rng);
    const double lhs = gf::delta2(comp.gf(), s).sum();
    const double u = (ones(p) - s).sum();
    const double rhs = comp.mu() * u * u;
    return (lhs - rhs) / std::max(1.0, rhs);
  });
}

CheckResult check_mean_norm_lower_bound(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("mean_norm_lower_bound", options.instances, check_seed(options, 6), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const env::EnvironmentComponent comp(gen.laws(p, rng, true));
    const Matrix a = random_nonzero_matrix(p, rng);
    const Vector u = ones(p) - random_cube_point(p, rng);
    const double lhs = (a * comp.mean() * u).sum();
    const double rhs =
        a.sum() * comp.mean().sum() * u.sum() / (gf::ratio_bound(comp.mean()) * p * p);
    return (rhs - lhs) / std::max(1.0, rhs);
  });
}

CheckResult check_cocycle(const CampaignOptions& options) {
  return campaign("cocycle", options.instances, check_seed(options, 7), 1e-12,
                  [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    const walk::ProjectivePoint x(random_simplex_point(p, rng));
    const Matrix a1 = 5.0 * random_matrix(p, rng, true);
    const Matrix a2 = 5.0 * random_matrix(p, rng, true);
    const Matrix a12 = a1 * a2;
    const double lhs = walk::cocycle(x, a12);
    const double rhs = walk::cocycle(walk::projective_action(x, a1), a2) + walk::cocycle(x, a1);
    return std::abs(lhs - rhs);
  });
}

CheckResult check_projective_normalization(const CampaignOptions& options) {
  return campaign("projective_normalization", options.instances, check_seed(options, 8), 1e-12,
                  [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    const Vector x = random_simplex_point(p, rng);
    Matrix a = random_matrix(p, rng, false);
    if (!(row_times(x, a).sum() > 0.0)) a = random_matrix(p, rng, true);
    const auto y = walk::projective_action(walk::ProjectivePoint(x), a);
    return std::abs(y.vector().sum() - 1.0) + std::max(0.0, -y.vector().minCoeff());
  });
}

CheckResult check_compose_associativity(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("compose_associativity", options.instances, check_seed(options, 9), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const int n = uniform_int(rng, 1, 10);
    const auto comps = random_chain(gen, p, n, rng, false);
    const auto chain = handles_of(comps);
    const int k = uniform_int(rng, 0, n);
    const int m = uniform_int(rng, k, n);
    const Vector s = random_cube_point(p, rng);
    const std::span<const gf::GfHandle* const> all(chain);
    const Vector one_pass = gf::compose(all.subspan(k), s);
    const Vector two_pass =
        gf::compose(all.subspan(k, m - k), gf::compose(all.subspan(m), s));
    return (one_pass - two_pass).cwiseAbs().maxCoeff();
  });
}

CheckResult check_incremental_walk(const CampaignOptions& options) {
  return campaign("incremental_walk", options.instances, check_seed(options, 10), 1e-10,
                  [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    const int n = uniform_int(rng, 1, 20);
    const Vector x = random_simplex_point(p, rng);
    Vector point = x;
    double incremental = 0.0;
    Matrix r = Matrix::Identity(p, p);
    for (int k = 0; k < n; ++k) {
      const Matrix m = 3.0 * random_matrix(p, rng, true);
      incremental += walk::advance(point, m);
      r = r * m;
    }
    return std::abs(incremental - std::log(row_times(x, r).sum()));
  });
}

CheckResult check_h5_closed_form(const CampaignOptions& options) {
  return campaign("h5_closed_form", options.instances, check_seed(options, 11), 1e-12,
                  [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    const Matrix a = random_matrix(p, rng, false);
    const Vector x = random_simplex_point(p, rng);
    const double min_row = a.rowwise().sum().minCoeff();
    double min_vertex = 1e300;
    for (int i = 0; i < p; ++i) min_vertex = std::min(min_vertex, row_times(Vector::Unit(p, i), a).sum());
    const double scale = std::max(1.0, min_row);
    return std::max((min_row - row_times(x, a).sum()) / scale, std::abs(min_vertex - min_row) / scale);
  });
}

CheckResult check_eta_permutation(const CampaignOptions& options) {
  const LawGenerator gen;
  return campaign("eta_permutation", options.instances, check_seed(options, 12), 1e-12,
                  [&](RandomStream& rng) {
    const int p = gen.draw_types(rng);
    const auto laws = gen.laws(p, rng, false);
    std::vector<int> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    // Type j is relabeled perm[j], for parents and children alike.
    std::vector<env::OffspringLaw> relabeled(laws);
    for (int i = 0; i < p; ++i) {
      std::vector<env::OffspringLaw::Atom> atoms;
      for (std::size_t k = 0; k < laws[i].size(); ++k) {
        std::vector<int> z(static_cast<std::size_t>(p));
        const auto c = laws[i].counts(k);
        for (int j = 0; j < p; ++j) z[perm[j]] = c[j];
        atoms.push_back({std::move(z), laws[i].prob(k)});
      }
      relabeled[perm[i]] = env::OffspringLaw(p, std::move(atoms));
    }
    const double eta = env::second_moments(laws).eta;
    const double eta_perm = env::second_moments(relabeled).eta;
    return std::abs(eta - eta_perm) / std::max(1.0, eta);
  });
}

CheckResult check_fractional_linear_truncation(const CampaignOptions& options) {
  return campaign("fractional_linear_truncation", std::min<std::int64_t>(options.instances, 200),
                  check_seed(options, 13), 1e-10, [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    env::FractionalLinearParams params{Vector(p), Vector(p), Matrix(p, p)};
    for (int i = 0; i < p; ++i) {
      params.stall[i] = 0.9 * rng.uniform();
      params.geometric[i] = 0.05 + 0.55 * rng.uniform();
      params.mixers.row(i) = random_simplex_point(p, rng).transpose();
    }
    const auto fl = env::make_fractional_linear(p, params.stall, params.geometric, params.mixers);
    return (env::mean_matrix(fl.laws) - fl.closed_form.mean_matrix()).cwiseAbs().maxCoeff();
  });
}

CheckResult check_common_left_eigenvector(const CampaignOptions& options) {
  return campaign("common_left_eigenvector", std::min<std::int64_t>(options.instances, 1000),
                  check_seed(options, 14), 1e-12, [&](RandomStream& rng) {
    const int p = uniform_int(rng, 1, 3);
    Vector v = random_simplex_point(p, rng);
    v = (v.array() + 0.05).matrix();
    v /= v.sum();
    std::vector<env::EnvironmentModel::WeightedValue> rhos{{0.2 + 4.8 * rng.uniform(), 0.5},
                                                           {0.2 + 4.8 * rng.uniform(), 0.5}};
    std::vector<Matrix> shapes{random_matrix(p, rng, true), random_matrix(p, rng, true)};
    const auto model = env::EnvironmentModel::common_left_eigenvector(v, rhos, shapes);
    double worst = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k) {
      const Vector residual = row_times(v, model.atom(k).mean()) - model.atom_eigenvalues()[k] * v;
      worst = std::max(worst, residual.cwiseAbs().maxCoeff());
    }
    return worst;
  });
}

std::vector<CheckResult> run_all(const CampaignOptions& options) {
  return {check_telescope_identity(options),   check_telescope_bound(options),
          check_psi_bound(options),            check_kozlov(options),
          check_second_moment_bound(options),                check_mean_norm_lower_bound(options),
          check_cocycle(options),              check_projective_normalization(options),
          check_compose_associativity(options), check_incremental_walk(options),
          check_h5_closed_form(options),       check_eta_permutation(options),
          check_fractional_linear_truncation(options), check_common_left_eigenvector(options)};
}

void write_csv(std::ostream& os, const std::vector<CheckResult>& rows) {
  os << "check_name,instances,violations,max_slack,worst_seed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.max_slack);
    os << r.check_name << ',' << r.instances << ',' << r.violations << ',' << buf << ','
       << r.worst_seed << '\n';
  }
}

}  // namespace mbpre::verify
