#include "mbpre/offspring_law.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mbpre::env {

OffspringLaw::OffspringLaw(int types, std::vector<Atom> support) : types_(types) {
  if (types < 1 || types > kMaxTypes)
    throw std::invalid_argument("offspring law: number of types must be in [1, " +
                                std::to_string(kMaxTypes) + "]");
  if (support.empty()) throw std::invalid_argument("offspring law: empty support");

  double total = 0.0;
  for (const auto& atom : support) {
    if (static_cast<int>(atom.z.size()) != types)
      throw std::invalid_argument("offspring law: support point has wrong dimension");
    for (int c : atom.z)
      if (c < 0) throw std::invalid_argument("offspring law: negative offspring count");
    if (!(atom.prob >= 0.0) || !std::isfinite(atom.prob))
      throw std::invalid_argument("offspring law: negative or non-finite probability");
    total += atom.prob;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw std::invalid_argument("offspring law: probabilities sum to " + std::to_string(total));

  std::vector<std::size_t> order(support.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return support[a].z < support[b].z; });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (support[order[k]].z == support[order[k - 1]].z)
      throw std::invalid_argument("offspring law: duplicate support point");

  counts_.reserve(support.size() * static_cast<std::size_t>(types));
  probs_.reserve(support.size());
  for (const auto& atom : support) {
    counts_.insert(counts_.end(), atom.z.begin(), atom.z.end());
    probs_.push_back(atom.prob);
    for (int c : atom.z) max_count_ = std::max(max_count_, c);
  }
}

OffspringLaw OffspringLaw::deterministic(std::vector<int> z) {
  const int p = static_cast<int>(z.size());
  return OffspringLaw(p, {Atom{std::move(z), 1.0}});
}

Vector OffspringLaw::mean() const {
  Vector m = Vector::Zero(types_);
  for (std::size_t k = 0; k < size(); ++k) {
    auto z = counts(k);
    for (int j = 0; j < types_; ++j) m[j] += probs_[k] * z[j];
  }
  return m;
}

Matrix OffspringLaw::second_factorial() const {
  Matrix b = Matrix::Zero(types_, types_);
  for (std::size_t k = 0; k < size(); ++k) {
    auto z = counts(k);
    for (int i = 0; i < types_; ++i)
      for (int j = 0; j < types_; ++j)
        b(i, j) += probs_[k] * z[i] * (z[j] - (i == j ? 1.0 : 0.0));
  }
  return b;
}

namespace {

double ipow(double base, int e) {
  double result = 1.0;
  while (e > 0) {
    if (e & 1) result *= base;
    base *= base;
    e >>= 1;
  }
  return result;
}

}  // namespace

double OffspringLaw::evaluate(const Vector& s) const {
  double total = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    auto z = counts(k);
    double term = probs_[k];
    for (int j = 0; j < types_; ++j)
      if (z[j] != 0) term *= ipow(s[j], z[j]);
    total += term;
  }
  return total;
}

double OffspringLaw::complement_from_logs(const Vector& log1p_neg_u) const {
  double total = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    auto z = counts(k);
    double log_power = 0.0;
    for (int j = 0; j < types_; ++j)
      if (z[j] != 0) log_power += z[j] * log1p_neg_u[j];
    // 1 - s^z with s = 1 - u; expm1(-inf) = -1 handles s_j = 0.
    total -= probs_[k] * std::expm1(log_power);
  }
  return std::clamp(total, 0.0, 1.0);
}

void write_law_table(std::ostream& os, const OffspringLaw& law) {
  for (int j = 0; j < law.types(); ++j) os << "z_" << (j + 1) << ',';
  os << "prob\n";
  char buf[32];
  for (std::size_t k = 0; k < law.size(); ++k) {
    for (int c : law.counts(k)) os << c << ',';
    std::snprintf(buf, sizeof buf, "%.17g", law.prob(k));
    os << buf << '\n';
  }
}

void FractionalLinearParams::validate() const {
  const int p = types();
  if (p < 1 || p > kMaxTypes)
    throw std::invalid_argument("fractional linear: number of types out of range");
  if (geometric.size() != p || mixers.rows() != p || mixers.cols() != p)
    throw std::invalid_argument("fractional linear: parameter shapes disagree");
  for (int i = 0; i < p; ++i) {
    if (!(stall[i] >= 0.0 && stall[i] <= 1.0))
      throw std::invalid_argument("fractional linear: stall probability outside [0,1]");
    if (!(geometric[i] > 0.0 && geometric[i] < 1.0))
      throw std::invalid_argument("fractional linear: geometric parameter outside (0,1)");
    double row = 0.0;
    for (int j = 0; j < p; ++j) {
      if (!(mixers(i, j) >= 0.0))
        throw std::invalid_argument("fractional linear: negative type-mixing probability");
      row += mixers(i, j);
    }
    if (std::abs(row - 1.0) > kProbabilityTolerance)
      throw std::invalid_argument("fractional linear: type-mixing row does not sum to 1");
  }
}

namespace {

// Calls fn(c) for every composition c of `total` into c.size() parts.
template <class Fn>
void for_each_composition(std::vector<int>& c, int index, int remaining, Fn&& fn) {
  const int last = static_cast<int>(c.size()) - 1;
  if (index == last) {
    c[index] = remaining;
    fn(c);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    c[index] = v;
    for_each_composition(c, index + 1, remaining - v, fn);
  }
}

int truncation_point(double r) {
  const double mean_total = 1.0 / (1.0 - r);
  int k = 1;
  double rk = r;
  while (rk * (k + mean_total) * (k + mean_total) >= 1e-13) {
    ++k;
    rk *= r;
  }
  return k;
}

}  // namespace

std::vector<OffspringLaw> truncate_fractional_linear(const FractionalLinearParams& params) {
  params.validate();
  const int p = params.types();
  std::vector<OffspringLaw> laws;
  laws.reserve(p);

  for (int i = 0; i < p; ++i) {
    const double q = params.stall[i];
    const double r = params.geometric[i];
    std::vector<OffspringLaw::Atom> atoms;
    if (q > 0.0) atoms.push_back({std::vector<int>(p, 0), q});
    if (q < 1.0) {
      const int cut = truncation_point(r);
      // Number of nonzero type vectors with total <= cut is C(cut + p, p) - 1.
      double support = 1.0;
      for (int j = 1; j <= p; ++j) support *= static_cast<double>(cut + j) / j;
      if (support - 1.0 > kMaxTruncatedSupport)
        throw std::length_error("fractional linear truncation: " + std::to_string(cut) +
                                " children and " + std::to_string(p) +
                                " types exceed the support limit");
      std::vector<double> log_mix(p);
      for (int j = 0; j < p; ++j) log_mix[j] = std::log(params.mixers(i, j));
      std::vector<int> c(p, 0);
      for (int k = 1; k <= cut; ++k) {
        const double log_total = std::log1p(-q) + std::log1p(-r) + (k - 1) * std::log(r) +
                                 std::lgamma(k + 1.0);
        for_each_composition(c, 0, k, [&](const std::vector<int>& comp) {
          double lp = log_total;
          for (int j = 0; j < p; ++j) {
            if (comp[j] == 0) continue;
            if (params.mixers(i, j) == 0.0) return;
            lp += comp[j] * log_mix[j] - std::lgamma(comp[j] + 1.0);
          }
          atoms.push_back({comp, std::exp(lp)});
        });
      }
    }
    double total = 0.0;
    for (const auto& a : atoms) total += a.prob;
    for (auto& a : atoms) a.prob /= total;
    laws.emplace_back(p, std::move(atoms));
  }
  return laws;
}

}  // namespace mbpre::env
