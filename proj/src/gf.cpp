#include "mbpre/gf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mbpre::gf {

GfHandle GfHandle::finite(std::shared_ptr<const std::vector<env::OffspringLaw>> laws) {
  if (!laws || laws->empty()) throw std::invalid_argument("generating function: no laws");
  const int p = static_cast<int>(laws->size());
  for (const auto& law : *laws)
    if (law.types() != p)
      throw std::invalid_argument("generating function: law dimension differs from type count");
  return GfHandle(p, std::move(laws));
}

GfHandle GfHandle::fractional_linear(env::FractionalLinearParams params) {
  params.validate();
  const int p = params.types();
  ClosedForm cf;
  cf.one_minus_q = (1.0 - params.stall.array()).matrix();
  cf.r = params.geometric;
  cf.one_minus_r = (1.0 - params.geometric.array()).matrix();
  cf.mixers = params.mixers;
  cf.params = std::move(params);
  return GfHandle(p, std::move(cf));
}

Vector GfHandle::evaluate(const Vector& s) const {
  if (s.size() != types_) throw std::invalid_argument("generating function: dimension mismatch");
  if (!in_unit_cube(s)) throw std::domain_error("generating function: argument outside [0,1]^p");
  if (const auto* cf = std::get_if<ClosedForm>(&rep_)) {
    const Vector t = cf->mixers * s;
    Vector out(types_);
    for (int i = 0; i < types_; ++i) {
      const double q = 1.0 - cf->one_minus_q[i];
      out[i] = q + cf->one_minus_q[i] * cf->one_minus_r[i] * t[i] / (1.0 - cf->r[i] * t[i]);
    }
    return out;
  }
  const auto& laws = *std::get<Finite>(rep_);
  Vector out(types_);
  for (int i = 0; i < types_; ++i) out[i] = laws[i].evaluate(s);
  return out;
}

Vector GfHandle::complement(const Vector& u) const {
  if (u.size() != types_) throw std::invalid_argument("generating function: dimension mismatch");
  if (!in_unit_cube(u)) throw std::domain_error("generating function: argument outside [0,1]^p");
  return complement_unchecked(u);
}

Vector GfHandle::complement_unchecked(const Vector& u) const {
  if (const auto* cf = std::get_if<ClosedForm>(&rep_)) {
    // 1 - f(s) = (1-q) (pi, u) / ((1-r) + r (pi, u)) with u = 1 - s.
    const Vector t = cf->mixers * u;
    return (cf->one_minus_q.array() * t.array() /
            (cf->one_minus_r.array() + cf->r.array() * t.array()))
        .matrix();
  }
  const auto& laws = *std::get<Finite>(rep_);
  Vector logs(types_);
  for (int j = 0; j < types_; ++j) logs[j] = std::log1p(-u[j]);
  Vector out(types_);
  for (int i = 0; i < types_; ++i) out[i] = laws[i].complement_from_logs(logs);
  return out;
}

Matrix GfHandle::mean_matrix() const {
  Matrix m(types_, types_);
  if (const auto* cf = std::get_if<ClosedForm>(&rep_)) {
    for (int i = 0; i < types_; ++i)
      m.row(i) = cf->mixers.row(i) * (cf->one_minus_q[i] / cf->one_minus_r[i]);
    return m;
  }
  const auto& laws = *std::get<Finite>(rep_);
  for (int i = 0; i < types_; ++i) m.row(i) = laws[i].mean().transpose();
  return m;
}

std::vector<Matrix> GfHandle::hessians() const {
  std::vector<Matrix> out;
  out.reserve(types_);
  if (const auto* cf = std::get_if<ClosedForm>(&rep_)) {
    for (int i = 0; i < types_; ++i) {
      // E[N(N-1)] = 2r / (1-r)^2 for the geometric total, times multinomial
      // type assignment.
      const double r = cf->r[i];
      const double factorial2 = cf->one_minus_q[i] * 2.0 * r / (cf->one_minus_r[i] * cf->one_minus_r[i]);
      const Vector pi = cf->mixers.row(i).transpose();
      out.push_back(factorial2 * pi * pi.transpose());
    }
    return out;
  }
  for (const auto& law : *std::get<Finite>(rep_)) out.push_back(law.second_factorial());
  return out;
}

Vector evaluate(const GfHandle& handle, const Vector& s) { return handle.evaluate(s); }

namespace {

void check_chain(std::span<const GfHandle* const> chain, int p) {
  for (const GfHandle* f : chain)
    if (f->types() != p) throw std::invalid_argument("compose: dimension mismatch");
}

}  // namespace

Vector compose(std::span<const GfHandle* const> chain, const Vector& s) {
  check_chain(chain, static_cast<int>(s.size()));
  Vector t = s;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) t = (*it)->evaluate(t);
  return t;
}

Vector compose_complement(std::span<const GfHandle* const> chain, const Vector& u) {
  check_chain(chain, static_cast<int>(u.size()));
  if (!in_unit_cube(u)) throw std::domain_error("compose: argument outside [0,1]^p");
  Vector t = u;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) t = (*it)->complement_unchecked(t);
  return t;
}

double quenched_survival(std::span<const GfHandle* const> chain, int type_index) {
  if (chain.empty()) throw std::invalid_argument("quenched survival: empty chain");
  const int p = chain.front()->types();
  if (type_index < 0 || type_index >= p)
    throw std::invalid_argument("quenched survival: type index out of range");
  return compose_complement(chain, ones(p))[type_index];
}

Vector delta2(const GfHandle& handle, const Vector& s) {
  if (!in_unit_cube(s)) throw std::domain_error("delta2: argument outside [0,1]^p");
  const Vector u = ones(handle.types()) - s;
  const auto b = handle.hessians();
  Vector out(handle.types());
  for (int i = 0; i < handle.types(); ++i) out[i] = u.dot(b[i] * u);
  return out;
}

namespace {

double checked_norm(const Matrix& a) {
  const double n = a.sum();
  if (!(n > 0.0)) throw std::domain_error("|A| must be positive");
  return n;
}

}  // namespace

double h_of_z(const GfHandle& handle, const Matrix& a, const Vector& s, double z) {
  const double norm_a = checked_norm(a);
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("H(z): z outside [0,1]");
  const Vector point = s + z * (ones(handle.types()) - s);
  return (a * handle.evaluate(point)).sum() / norm_a;
}

double one_minus_h_of_z(const GfHandle& handle, const Matrix& a, const Vector& s, double z) {
  const double norm_a = checked_norm(a);
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("H(z): z outside [0,1]");
  if (!in_unit_cube(s)) throw std::domain_error("H(z): s outside [0,1]^p");
  // s + z(1-s) = 1 - (1-z)(1-s)
  const Vector u = (1.0 - z) * (ones(handle.types()) - s);
  return (a * handle.complement_unchecked(u)).sum() / norm_a;
}

double h_prime_at_one(const Matrix& a, const Matrix& mean, const Vector& s) {
  const double norm_a = checked_norm(a);
  return (a * mean * (ones(static_cast<int>(s.size())) - s)).sum() / norm_a;
}

double h_second_at_one(const GfHandle& handle, const Matrix& a, const Vector& s) {
  const double norm_a = checked_norm(a);
  return (a * delta2(handle, s)).sum() / norm_a;
}

namespace {

// (w,1) / (w, 1 - f(s)) - (w,1) / (w, M(1-s)), given u = 1 - s and
// g = 1 - f(s).
double psi_from_complements(const Vector& w, const Vector& g, const Matrix& mean,
                            const Vector& u) {
  const double norm_w = w.sum();
  const double d1 = w.dot(g);
  const double d2 = w.dot(mean * u);
  if (!(norm_w > 0.0)) throw std::domain_error("psi: |A| must be positive");
  if (!(d1 > 0.0)) throw std::domain_error("psi: |A(1 - f(s))| vanishes (degenerate law)");
  if (!(d2 > 0.0)) throw std::domain_error("psi: |AM(1 - s)| vanishes");
  return norm_w / d1 - norm_w / d2;
}

}  // namespace

double psi_weighted(const GfHandle& handle, const Vector& w, const Matrix& mean,
                    const Vector& s) {
  if (s.size() != handle.types() || w.size() != handle.types())
    throw std::invalid_argument("psi: dimension mismatch");
  if (!in_unit_cube(s)) throw std::domain_error("psi: s outside [0,1]^p");
  const Vector u = ones(handle.types()) - s;
  if (u.maxCoeff() == 0.0) throw std::domain_error("psi: undefined at s = 1");
  return psi_from_complements(w, handle.complement_unchecked(u), mean, u);
}

double psi(const GfHandle& handle, const Matrix& a, const Matrix& mean, const Vector& s) {
  if (a.rows() != handle.types() || a.cols() != handle.types())
    throw std::invalid_argument("psi: dimension mismatch");
  const Vector w = a.colwise().sum().transpose();
  return psi_weighted(handle, w, mean, s);
}

CompositionChain::CompositionChain(std::vector<Step> steps, Vector seed)
    : steps_(std::move(steps)), seed_(std::move(seed)) {
  const int p = static_cast<int>(seed_.size());
  for (const auto& st : steps_)
    if (st.gf->types() != p) throw std::invalid_argument("composition chain: dimension mismatch");
  if (!in_unit_cube(seed_)) throw std::domain_error("composition chain: seed outside [0,1]^p");
  const int n = length();
  iterates_.resize(n + 1);
  complements_.resize(n + 1);
  iterates_[n] = seed_;
  complements_[n] = ones(p) - seed_;
  for (int k = n - 1; k >= 0; --k) {
    iterates_[k] = steps_[k].gf->evaluate(iterates_[k + 1]);
    complements_[k] = steps_[k].gf->complement_unchecked(complements_[k + 1]);
  }
}

double ratio_bound(const Matrix& m) {
  const double lo = m.minCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return m.maxCoeff() / lo;
}

TelescopeReport telescope(const CompositionChain& chain, const Vector& x) {
  const int p = static_cast<int>(chain.seed().size());
  if (x.size() != p) throw std::invalid_argument("telescope: dimension mismatch");
  if (x.minCoeff() < 0.0 || std::abs(x.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("telescope: x must be a nonnegative vector with |x| = 1");

  const int n = chain.length();
  TelescopeReport report{};
  report.terms.reserve(n);

  const double lhs_denominator = x.dot(chain.complement(0));
  if (!(lhs_denominator > 0.0)) throw std::domain_error("telescope: (x, 1 - f_{0,n}(s)) vanishes");
  report.lhs = 1.0 / lhs_denominator;

  // X_k and S_k = ln|x R_k| along the chain.
  Vector point = x;
  double log_norm = 0.0;
  double weighted_eta = 0.0;
  double sum = 0.0;
  report.b = 1.0;
  for (int k = 0; k < n; ++k) {
    const Step& st = chain.step(k);
    if (!(st.mean->sum() > 0.0)) throw std::domain_error("telescope: zero mean matrix");
    const double weight = std::exp(-log_norm);
    const double term = psi_from_complements(point, chain.complement(k), *st.mean,
                                             chain.complement(k + 1));
    report.terms.push_back({term, weight, st.eta});
    sum += term * weight;
    weighted_eta += st.eta * weight;
    report.b = std::max(report.b, ratio_bound(*st.mean));

    const Vector next = row_times(point, *st.mean);
    const double norm = next.sum();
    if (!(norm > 0.0)) throw std::domain_error("telescope: |x R_k| vanishes");
    point = next / norm;
    log_norm += std::log(norm);
  }

  const double tail = point.dot(chain.complement(n));
  if (!(tail > 0.0)) throw std::domain_error("telescope: |A R_n (1 - s)| vanishes");
  report.leading = std::exp(-log_norm) / tail;
  report.rhs = report.leading + sum;
  report.residual = std::abs(report.lhs - report.rhs) / std::abs(report.lhs);
  const double eta_part = weighted_eta == 0.0 ? 0.0 : report.b * p * p * weighted_eta;
  report.bound = std::exp(-log_norm) + eta_part;
  report.bound_slack = report.bound - report.lhs;
  return report;
}

}  // namespace mbpre::gf
