#pragma once

#include "mbpre/linalg.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mbpre::env {

inline constexpr double kProbabilityTolerance = 1e-12;

// Finite-support probability measure on N_0^p: the offspring law of one
// parent type. Immutable once constructed.
class OffspringLaw {
 public:
  struct Atom {
    std::vector<int> z;
    double prob;
  };

  // Throws std::invalid_argument unless: types >= 1, every z has `types`
  // nonnegative coordinates, the z are distinct, probabilities are >= 0 and
  // sum to 1 within kProbabilityTolerance.
  OffspringLaw(int types, std::vector<Atom> support);

  // Law putting mass 1 on z.
  static OffspringLaw deterministic(std::vector<int> z);

  int types() const { return types_; }
  std::size_t size() const { return probs_.size(); }
  std::span<const int> counts(std::size_t k) const {
    return {counts_.data() + k * static_cast<std::size_t>(types_),
            static_cast<std::size_t>(types_)};
  }
  double prob(std::size_t k) const { return probs_[k]; }
  int max_count() const { return max_count_; }

  // E[xi_j] for j = 1..p.
  Vector mean() const;
  // B(k,l) = E[xi_k (xi_l - delta_kl)], the Hessian of the generating
  // function at s = 1.
  Matrix second_factorial() const;

  // sum_z P(z) s^z.
  double evaluate(const Vector& s) const;
  // 1 - f(1 - u), computed without forming f near 1. Expects
  // log1p_neg_u[j] = log1p(-u_j).
  double complement_from_logs(const Vector& log1p_neg_u) const;

 private:
  int types_;
  int max_count_ = 0;
  std::vector<int> counts_;
  std::vector<double> probs_;
};

// One row per support point: z_1,...,z_p,prob.
void write_law_table(std::ostream& os, const OffspringLaw& law);

// Per-type parameters of the "stall or geometric total" family: a type-i
// parent has no children with probability stall[i]; otherwise the number of
// children N >= 1 is geometric, P(N = k) = (1 - r) r^(k-1) with r =
// geometric[i], and each child independently gets a type drawn from
// mixers.row(i).
struct FractionalLinearParams {
  Vector stall;
  Vector geometric;
  Matrix mixers;

  int types() const { return static_cast<int>(stall.size()); }
  // Throws std::invalid_argument on shape mismatch, stall outside [0,1],
  // geometric outside (0,1), or mixer rows that are not probability vectors.
  void validate() const;
};

// Finite-support approximation of the family above. The total N is cut at
// the smallest K with r^K (K + 1/(1-r))^2 < 1e-13, which keeps the dropped
// mass (and its first two moments) far below 1e-12; the kept mass is
// renormalized.
// Throws std::length_error when a law would need more than
// kMaxTruncatedSupport atoms (large means with several types).
inline constexpr double kMaxTruncatedSupport = 2e6;
std::vector<OffspringLaw> truncate_fractional_linear(const FractionalLinearParams& params);

}  // namespace mbpre::env
