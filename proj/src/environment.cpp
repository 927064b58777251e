#include "mbpre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mbpre::env {

Matrix mean_matrix(std::span<const OffspringLaw> laws) {
  const int p = static_cast<int>(laws.size());
  if (p < 1 || p > kMaxTypes) throw std::invalid_argument("mean matrix: bad number of laws");
  Matrix m(p, p);
  for (int i = 0; i < p; ++i) {
    if (laws[i].types() != p) throw std::invalid_argument("mean matrix: law dimension mismatch");
    m.row(i) = laws[i].mean().transpose();
  }
  return m;
}

SecondMoments second_moments(std::span<const OffspringLaw> laws) {
  const double norm_m = mean_matrix(laws).sum();
  if (!(norm_m > 0.0)) throw std::domain_error("second moments: |M| = 0, eta undefined");
  SecondMoments out{{}, 0.0, 0.0};
  for (const auto& law : laws) {
    out.hessians.push_back(law.second_factorial());
    out.mu += out.hessians.back().sum();
  }
  out.eta = out.mu / (norm_m * norm_m);
  return out;
}

FractionalLinearLaws make_fractional_linear(int types, const Vector& stall, const Vector& geometric,
                                            const Matrix& mixers) {
  FractionalLinearParams params{stall, geometric, mixers};
  if (params.types() != types)
    throw std::invalid_argument("fractional linear: stall vector length differs from type count");
  params.validate();
  return {truncate_fractional_linear(params), gf::GfHandle::fractional_linear(params)};
}

EnvironmentComponent::EnvironmentComponent(std::shared_ptr<LawStore> store, gf::GfHandle gf)
    : store_(std::move(store)), gf_(std::move(gf)) {
  mean_ = gf_.mean_matrix();
  hessians_ = gf_.hessians();
  for (const auto& b : hessians_) mu_ += b.sum();
  const double norm_m = mean_.sum();
  eta_ = norm_m > 0.0 ? mu_ / (norm_m * norm_m) : std::numeric_limits<double>::infinity();
}

namespace {

std::shared_ptr<const std::vector<OffspringLaw>> share(std::vector<OffspringLaw> laws) {
  return std::make_shared<const std::vector<OffspringLaw>>(std::move(laws));
}

}  // namespace

EnvironmentComponent::EnvironmentComponent(std::vector<OffspringLaw> laws)
    : EnvironmentComponent(share(std::move(laws))) {}

EnvironmentComponent::EnvironmentComponent(std::shared_ptr<const std::vector<OffspringLaw>> laws)
    : EnvironmentComponent(std::make_shared<LawStore>(), gf::GfHandle::finite(laws)) {
  store_->laws = std::move(laws);
}

EnvironmentComponent::EnvironmentComponent(const FractionalLinearParams& params)
    : EnvironmentComponent(std::make_shared<LawStore>(), gf::GfHandle::fractional_linear(params)) {
  store_->params = params;
}

const std::vector<OffspringLaw>& EnvironmentComponent::laws() const {
  std::call_once(store_->once, [this] {
    if (!store_->laws) store_->laws = share(truncate_fractional_linear(*store_->params));
  });
  return *store_->laws;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::finite_mixture: return "finite_mixture";
    case ModelKind::fractional_linear: return "fractional_linear";
    case ModelKind::scalar_symmetric: return "scalar_symmetric";
    case ModelKind::common_left_eigenvector: return "common_left_eigenvector";
  }
  return "unknown";
}

EnvironmentModel::EnvironmentModel(ModelKind kind, std::vector<EnvironmentComponent> atoms,
                                   std::vector<double> weights)
    : kind_(kind), atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty()) throw std::invalid_argument("environment model: no components");
  if (atoms_.size() != weights_.size())
    throw std::invalid_argument("environment model: one weight per component required");
  types_ = atoms_.front().types();
  double total = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].types() != types_)
      throw std::invalid_argument("environment model: components disagree on the number of types");
    if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k]))
      throw std::invalid_argument("environment model: negative or non-finite weight");
    total += weights_[k];
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw std::invalid_argument("environment model: weights sum to " + std::to_string(total) +
                                ", expected 1");
  cumulative_.back() = 1.0;
}

EnvironmentModel EnvironmentModel::finite_mixture(
    std::vector<std::pair<EnvironmentComponent, double>> atoms) {
  std::vector<EnvironmentComponent> comps;
  std::vector<double> weights;
  for (auto& [c, w] : atoms) {
    comps.push_back(std::move(c));
    weights.push_back(w);
  }
  return EnvironmentModel(ModelKind::finite_mixture, std::move(comps), std::move(weights));
}

EnvironmentModel EnvironmentModel::deterministic(EnvironmentComponent component) {
  std::vector<std::pair<EnvironmentComponent, double>> atoms;
  atoms.emplace_back(std::move(component), 1.0);
  return finite_mixture(std::move(atoms));
}

EnvironmentModel EnvironmentModel::fractional_linear(
    std::vector<std::pair<FractionalLinearParams, double>> atoms) {
  std::vector<EnvironmentComponent> comps;
  std::vector<double> weights;
  for (const auto& [params, w] : atoms) {
    comps.emplace_back(params);
    weights.push_back(w);
  }
  return EnvironmentModel(ModelKind::fractional_linear, std::move(comps), std::move(weights));
}

FractionalLinearParams geometric_with_mean(double m) {
  if (!(m > 0.0) || !std::isfinite(m))
    throw std::invalid_argument("geometric offspring: mean must be positive and finite");
  FractionalLinearParams params{Vector::Constant(1, 1.0 / (1.0 + m)),
                                Vector::Constant(1, m / (1.0 + m)), Matrix::Ones(1, 1)};
  return params;
}

FractionalLinearParams geometric_with_mean_matrix(const Matrix& mean) {
  const int p = static_cast<int>(mean.rows());
  if (p < 1 || p > kMaxTypes || mean.cols() != p)
    throw std::invalid_argument("geometric offspring: mean matrix must be square");
  if (mean.minCoeff() < 0.0) throw std::invalid_argument("geometric offspring: negative mean");
  FractionalLinearParams params{Vector(p), Vector(p), Matrix(p, p)};
  for (int i = 0; i < p; ++i) {
    const double m = mean.row(i).sum();
    if (m > 0.0) {
      params.stall[i] = 1.0 / (1.0 + m);
      params.geometric[i] = m / (1.0 + m);
      params.mixers.row(i) = mean.row(i) / m;
    } else {
      // Childless type; the geometric parameter is irrelevant.
      params.stall[i] = 1.0;
      params.geometric[i] = 0.5;
      params.mixers.row(i).setConstant(1.0 / p);
    }
  }
  return params;
}

EnvironmentModel EnvironmentModel::scalar_symmetric(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("scalar symmetric: delta must be positive");
  std::vector<EnvironmentComponent> comps;
  comps.emplace_back(geometric_with_mean(std::exp(delta)));
  comps.emplace_back(geometric_with_mean(std::exp(-delta)));
  EnvironmentModel model(ModelKind::scalar_symmetric, std::move(comps), {0.5, 0.5});
  model.delta_ = delta;
  return model;
}

EnvironmentModel EnvironmentModel::common_left_eigenvector(Vector v,
                                                           std::vector<WeightedValue> eigenvalues,
                                                           std::vector<Matrix> shapes) {
  const int p = static_cast<int>(v.size());
  if (p < 1 || p > kMaxTypes) throw std::invalid_argument("common left eigenvector: bad dimension");
  if (!(v.minCoeff() > 0.0) || std::abs(v.sum() - 1.0) > kProbabilityTolerance)
    throw std::invalid_argument("common left eigenvector: v must be positive with |v| = 1");
  if (eigenvalues.empty()) throw std::invalid_argument("common left eigenvector: no eigenvalues");
  if (shapes.empty()) shapes.push_back(Matrix::Ones(p, p));

  std::vector<EnvironmentComponent> comps;
  std::vector<double> weights;
  std::vector<double> rhos;
  for (const auto& [rho, w] : eigenvalues) {
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("common left eigenvector: eigenvalues must be positive");
    for (const Matrix& shape : shapes) {
      if (shape.rows() != p || shape.cols() != p || shape.minCoeff() < 0.0)
        throw std::invalid_argument("common left eigenvector: shapes must be nonnegative p x p");
      const Vector c = row_times(v, shape);
      if (!(c.minCoeff() > 0.0))
        throw std::invalid_argument("common left eigenvector: shape has a zero column");
      Matrix mean(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) mean(i, j) = rho * v[j] * shape(i, j) / c[j];
      comps.emplace_back(geometric_with_mean_matrix(mean));
      weights.push_back(w / static_cast<double>(shapes.size()));
      rhos.push_back(rho);
    }
  }
  EnvironmentModel model(ModelKind::common_left_eigenvector, std::move(comps), std::move(weights));
  model.left_eigenvector_ = std::move(v);
  model.atom_eigenvalues_ = std::move(rhos);
  return model;
}

std::size_t EnvironmentModel::sample_index(RandomStream& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto k = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(k, atoms_.size() - 1);
}

}  // namespace mbpre::env
