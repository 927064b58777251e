#pragma once

#include "mbpre/gf.hpp"
#include "mbpre/linalg.hpp"
#include "mbpre/offspring_law.hpp"
#include "mbpre/rng.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace mbpre::env {

Matrix mean_matrix(std::span<const OffspringLaw> laws);

struct SecondMoments {
  std::vector<Matrix> hessians;  // B^(1), ..., B^(p)
  double mu;                     // sum_i |B^(i)|
  double eta;                    // mu / |M|^2
};

// Throws std::domain_error if |M| = 0, since eta is then undefined.
SecondMoments second_moments(std::span<const OffspringLaw> laws);

struct FractionalLinearLaws {
  std::vector<OffspringLaw> laws;  // truncated, samplable
  gf::GfHandle closed_form;        // exact, no truncation
};

FractionalLinearLaws make_fractional_linear(int types, const Vector& stall,
                                            const Vector& geometric, const Matrix& mixers);

// One environment state f_n: p offspring laws together with their moment
// summaries. A component whose mean matrix vanishes is representable (every
// particle is childless) but has eta = +infinity; operations that need
// |M| > 0 reject it. For a fractional linear component the truncated laws
// are built on the first call to laws().
class EnvironmentComponent {
 public:
  explicit EnvironmentComponent(std::vector<OffspringLaw> laws);
  // Closed-form generating function, truncated laws for sampling.
  explicit EnvironmentComponent(const FractionalLinearParams& params);

  int types() const { return gf_.types(); }
  const std::vector<OffspringLaw>& laws() const;
  const gf::GfHandle& gf() const { return gf_; }
  const Matrix& mean() const { return mean_; }
  const std::vector<Matrix>& hessians() const { return hessians_; }
  double mu() const { return mu_; }
  double eta() const { return eta_; }
  bool degenerate() const { return !(mean_.sum() > 0.0); }

  gf::Step step() const { return {&gf_, &mean_, eta_}; }

 private:
  struct LawStore {
    std::once_flag once;
    std::optional<FractionalLinearParams> params;
    std::shared_ptr<const std::vector<OffspringLaw>> laws;
  };

  explicit EnvironmentComponent(std::shared_ptr<const std::vector<OffspringLaw>> laws);
  EnvironmentComponent(std::shared_ptr<LawStore> store, gf::GfHandle gf);

  std::shared_ptr<LawStore> store_;
  gf::GfHandle gf_;
  Matrix mean_;
  std::vector<Matrix> hessians_;
  double mu_ = 0.0;
  double eta_ = 0.0;
};

enum class ModelKind { finite_mixture, fractional_linear, scalar_symmetric, common_left_eigenvector };

std::string_view to_string(ModelKind kind);

// Law of one environment component. Every kind is compiled into a finite
// list of weighted atoms at construction, so sampling is a categorical draw
// and one-step expectations are exact finite sums.
class EnvironmentModel {
 public:
  struct WeightedValue {
    double value;
    double weight;
  };

  static EnvironmentModel finite_mixture(std::vector<std::pair<EnvironmentComponent, double>> atoms);
  static EnvironmentModel deterministic(EnvironmentComponent component);
  static EnvironmentModel fractional_linear(
      std::vector<std::pair<FractionalLinearParams, double>> atoms);
  // Single type; mean offspring e^{+delta} or e^{-delta} with probability
  // 1/2 each, geometric offspring f(s) = 1 / (1 + m(1 - s)). Critical by
  // construction.
  static EnvironmentModel scalar_symmetric(double delta);
  // Mean matrices M = rho * D where v D = v: M(i,j) = rho v_j W(i,j) / (v W)_j
  // for each shape W; rho and W are drawn independently (W uniformly). Offspring
  // laws are geometric with the rows of M as means. An empty `shapes` uses the
  // all-ones matrix.
  static EnvironmentModel common_left_eigenvector(Vector v, std::vector<WeightedValue> eigenvalues,
                                                  std::vector<Matrix> shapes = {});

  ModelKind kind() const { return kind_; }
  int types() const { return types_; }
  std::size_t size() const { return atoms_.size(); }
  const EnvironmentComponent& atom(std::size_t k) const { return atoms_[k]; }
  std::span<const EnvironmentComponent> atoms() const { return atoms_; }
  std::span<const double> weights() const { return weights_; }

  // Draws one uniform from the stream.
  std::size_t sample_index(RandomStream& rng) const;
  const EnvironmentComponent& sample(RandomStream& rng) const { return atoms_[sample_index(rng)]; }

  // Only for scalar_symmetric.
  std::optional<double> delta() const { return delta_; }
  // Only for common_left_eigenvector: v, and rho of each atom.
  const std::optional<Vector>& left_eigenvector() const { return left_eigenvector_; }
  std::span<const double> atom_eigenvalues() const { return atom_eigenvalues_; }

 private:
  EnvironmentModel(ModelKind kind, std::vector<EnvironmentComponent> atoms,
                   std::vector<double> weights);

  ModelKind kind_;
  int types_ = 0;
  std::vector<EnvironmentComponent> atoms_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::optional<double> delta_;
  std::optional<Vector> left_eigenvector_;
  std::vector<double> atom_eigenvalues_;
};

inline const EnvironmentComponent& sample_component(const EnvironmentModel& model,
                                                    RandomStream& rng) {
  return model.sample(rng);
}

// Geometric offspring law with mean m for a single type, as a fractional
// linear parameter set (stall 1/(1+m), continuation m/(1+m)).
FractionalLinearParams geometric_with_mean(double m);

// Multitype geometric parameters whose mean matrix is `mean`.
FractionalLinearParams geometric_with_mean_matrix(const Matrix& mean);

}  // namespace mbpre::env
