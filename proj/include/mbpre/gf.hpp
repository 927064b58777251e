#pragma once

#include "mbpre/linalg.hpp"
#include "mbpre/offspring_law.hpp"

#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace mbpre::gf {

// Vector of offspring generating functions f = (f^(1), ..., f^(p)), backed
// either by finite-support laws or by the closed form of the fractional
// linear family. Cheap to copy; the underlying laws are shared.
class GfHandle {
 public:
  static GfHandle finite(std::shared_ptr<const std::vector<env::OffspringLaw>> laws);
  static GfHandle fractional_linear(env::FractionalLinearParams params);

  int types() const { return types_; }
  bool is_closed_form() const { return std::holds_alternative<ClosedForm>(rep_); }

  // f(s). Throws std::domain_error if s is outside the unit cube.
  Vector evaluate(const Vector& s) const;
  // 1 - f(1 - u) for u in the unit cube. Accurate when f(s) is close to 1,
  // which is where survival probabilities live.
  Vector complement(const Vector& u) const;
  // Same as complement() without the domain check; for inner loops.
  Vector complement_unchecked(const Vector& u) const;

  Matrix mean_matrix() const;
  // B^(i)(k,l) = d^2 f^(i)(1) / ds_k ds_l, one matrix per parent type.
  std::vector<Matrix> hessians() const;

 private:
  struct ClosedForm {
    Vector one_minus_q;
    Vector r;
    Vector one_minus_r;
    Matrix mixers;
    env::FractionalLinearParams params;
  };
  using Finite = std::shared_ptr<const std::vector<env::OffspringLaw>>;

  GfHandle(int types, std::variant<Finite, ClosedForm> rep) : types_(types), rep_(std::move(rep)) {}

  int types_;
  std::variant<Finite, ClosedForm> rep_;
};

// Anything that carries a generating function and a mean matrix; the
// environment components of env-model satisfy this.
struct Step {
  const GfHandle* gf;
  const Matrix* mean;
  double eta;
};

Vector evaluate(const GfHandle& handle, const Vector& s);

// f_{k,n}(s) = f_k(f_{k+1}(...f_{n-1}(s))), with f_{n,n}(s) = s. `chain`
// holds f_k, ..., f_{n-1}. Throws std::invalid_argument on dimension
// mismatch.
Vector compose(std::span<const GfHandle* const> chain, const Vector& s);

// 1 - f_{k,n}(1 - u) by backward iteration of complements.
Vector compose_complement(std::span<const GfHandle* const> chain, const Vector& u);

// P(Z(n) != 0 | environment, Z(0) = e_i) = (e_i, 1 - f_{0,n}(0)).
double quenched_survival(std::span<const GfHandle* const> chain, int type_index);

// Delta_2(s)_i = (1-s)^T B^(i) (1-s).
Vector delta2(const GfHandle& handle, const Vector& s);

// H(z) = |A f(s + z(1-s))| / |A|, a probability generating function in z.
double h_of_z(const GfHandle& handle, const Matrix& a, const Vector& s, double z);
// 1 - H(z), evaluated through complements.
double one_minus_h_of_z(const GfHandle& handle, const Matrix& a, const Vector& s, double z);
// H'(1) = |A M (1-s)| / |A| and H''(1) = |A Delta_2(s)| / |A|.
double h_prime_at_one(const Matrix& a, const Matrix& mean, const Vector& s);
double h_second_at_one(const GfHandle& handle, const Matrix& a, const Vector& s);

// psi_{f,A,M}(s) = |A| / |A(1 - f(s))| - |A| / |A M (1 - s)|.
// Throws std::domain_error for s = 1, |A| = 0, or a vanishing denominator.
double psi(const GfHandle& handle, const Matrix& a, const Matrix& mean, const Vector& s);

// psi depends on A only through its column sums w = 1^T A, because all
// entries are nonnegative: |A v| = (w, v) and |A| = (w, 1).
double psi_weighted(const GfHandle& handle, const Vector& w, const Matrix& mean,
                    const Vector& s);

// Iterates f_{k,n}(s) for k = n, n-1, ..., 0 for a fixed seed point s.
class CompositionChain {
 public:
  CompositionChain(std::vector<Step> steps, Vector seed);

  int length() const { return static_cast<int>(steps_.size()); }
  const Step& step(int k) const { return steps_[k]; }
  const Vector& seed() const { return seed_; }
  // f_{k,n}(s); iterate(n) == s.
  const Vector& iterate(int k) const { return iterates_[k]; }
  // 1 - f_{k,n}(s), computed in complement form.
  const Vector& complement(int k) const { return complements_[k]; }

 private:
  std::vector<Step> steps_;
  Vector seed_;
  std::vector<Vector> iterates_;
  std::vector<Vector> complements_;
};

struct TelescopeTerm {
  double psi;     // psi_{f_k, A R_k, M_k}(f_{k+1,n}(s))
  double weight;  // e^{-ln|x R_k|}
  double eta;     // eta of f_k
};

struct TelescopeReport {
  double lhs;           // 1 / (x, 1 - f_{0,n}(s))
  double leading;       // 1 / |A R_n (1 - s)|
  std::vector<TelescopeTerm> terms;
  double rhs;           // leading + sum psi * weight
  double residual;      // |lhs - rhs| / |lhs|
  double b;             // common ratio bound over the chain's mean matrices
  double bound;         // e^{-S_n} + b p^2 sum eta_k e^{-S_k}; only meaningful at s = 0
  double bound_slack;   // bound - lhs
};

// Telescoping representation of 1/(x, 1 - f_{0,n}(s)) with A = diag(x).
// Weights are accumulated from cocycle increments, so no matrix product
// R_k is ever formed. Throws std::invalid_argument unless x >= 0 with
// |x| = 1, and std::domain_error on zero mean matrices or vanishing norms.
TelescopeReport telescope(const CompositionChain& chain, const Vector& x);

// H3 constant of a single matrix: max entry / min entry (infinity if some
// entry is zero).
double ratio_bound(const Matrix& m);

}  // namespace mbpre::gf
