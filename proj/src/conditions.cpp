#include "mbpre/conditions.hpp"

#include "mbpre/gf.hpp"
#include "mbpre/matrix_walk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mbpre::walk {

std::string_view to_string(Status status) {
  switch (status) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::flagged: return "flagged";
    case Status::inconclusive: return "inconclusive";
    case Status::not_applicable: return "not_applicable";
  }
  return "unknown";
}

const ConditionEntry& ConditionReport::at(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("condition report: no entry " + std::string(name));
}

namespace {

using Pattern = std::uint64_t;  // bit i*p + j set iff entry (i,j) > 0

Pattern pattern_of(const Matrix& m) {
  Pattern out = 0;
  const int p = static_cast<int>(m.rows());
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (m(i, j) > 0.0) out |= Pattern{1} << (i * p + j);
  return out;
}

Pattern multiply(Pattern a, Pattern b, int p) {
  Pattern out = 0;
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < p; ++k) {
      if (!(a >> (i * p + k) & 1)) continue;
      for (int j = 0; j < p; ++j)
        if (b >> (k * p + j) & 1) out |= Pattern{1} << (i * p + j);
    }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr std::size_t kPatternLimit = 1 << 16;

}  // namespace

bool positive_product_exists(std::span<const Matrix> support, int max_length) {
  if (support.empty()) return false;
  const int p = static_cast<int>(support.front().rows());
  const Pattern full = p == 8 ? ~Pattern{0} : (Pattern{1} << (p * p)) - 1;
  std::set<Pattern> generators;
  for (const auto& m : support) generators.insert(pattern_of(m));
  std::set<Pattern> frontier = generators;
  std::set<Pattern> seen = generators;
  for (int length = 1; length <= max_length && !frontier.empty(); ++length) {
    if (seen.count(full)) return true;
    std::set<Pattern> next;
    for (Pattern a : frontier)
      for (Pattern g : generators) {
        const Pattern c = multiply(a, g, p);
        if (seen.insert(c).second) next.insert(c);
      }
    if (seen.size() > kPatternLimit) break;
    frontier = std::move(next);
  }
  return seen.count(full) > 0;
}

ConditionReport check_conditions(const env::EnvironmentModel& model, const ConditionParams& params) {
  ConditionReport report;
  const int p = model.types();
  const auto weights = model.weights();
  std::vector<Matrix> support;
  for (const auto& atom : model.atoms()) support.push_back(atom.mean());

  {  // H1
    ConditionEntry e{"H1", Status::pass, 0.0, 0.0, ""};
    std::ostringstream detail;
    bool first = true;
    for (double eps : params.epsilon_grid) {
      double moment = 0.0;
      for (std::size_t k = 0; k < support.size(); ++k)
        moment += weights[k] * std::pow(support[k].sum(), eps);
      if (first) e.estimate = moment;
      first = false;
      detail << "E|M|^" << fmt(eps) << " = " << fmt(moment) << "; ";
    }
    e.detail = detail.str() + "finite support, all moments finite";
    if (params.epsilon_grid.empty()) e.status = Status::inconclusive;
    report.entries.push_back(e);
  }

  {  // H2
    const int length = std::max(1, p * p);
    const bool positive = positive_product_exists(support, length);
    report.entries.push_back(
        {"H2", positive ? Status::pass : Status::inconclusive, positive ? 1.0 : 0.0, 0.0,
         positive ? "a strictly positive product of length <= " + std::to_string(length) + " exists"
                  : "no strictly positive product of length <= " + std::to_string(length)});
  }

  {  // H3
    double b = 0.0;
    for (const auto& m : support) b = std::max(b, gf::ratio_bound(m));
    const bool finite = std::isfinite(b);
    report.entries.push_back({"H3", finite ? Status::pass : Status::flagged, b, 0.0,
                              finite ? "b_hat = max entry ratio over the support"
                                     : "some support matrix has a zero entry"});
  }

  {  // H4
    ConditionEntry e{"H4", Status::fail, 0.0, 0.0, ""};
    try {
      const auto est = lyapunov(model, params.lyapunov_n, params.lyapunov_replicas,
                                derive_seed(params.seed, 4));
      e.estimate = est.estimate;
      e.se = est.se;
      e.status = std::abs(est.estimate) <= 3.0 * est.se ? Status::pass : Status::fail;
      e.detail = "|pi_hat| <= 3 se required; n = " + std::to_string(est.n) +
                 ", replicas = " + std::to_string(est.replicas);
    } catch (const std::domain_error& err) {
      e.estimate = -std::numeric_limits<double>::infinity();
      e.detail = std::string("walk killed: ") + err.what();
    }
    report.entries.push_back(e);
  }

  {  // H5: min over the simplex of ln|xM| is ln(min row sum of M).
    ConditionEntry e{"H5", Status::fail, 0.0, 0.0, ""};
    std::ostringstream detail;
    bool first = true;
    for (double delta : params.delta_grid) {
      double prob = 0.0;
      for (std::size_t k = 0; k < support.size(); ++k)
        if (support[k].rowwise().sum().minCoeff() >= std::exp(delta)) prob += weights[k];
      if (first) e.estimate = prob;
      first = false;
      if (delta > 0.0 && prob > 0.0) e.status = Status::pass;
      detail << "P(min row sum >= e^" << fmt(delta) << ") = " << fmt(prob) << "; ";
    }
    e.detail = detail.str();
    if (params.delta_grid.empty()) e.status = Status::inconclusive;
    report.entries.push_back(e);
  }

  {  // ExponFinite: x -> E[1/|xM|] is convex on the simplex, so the sup is at a vertex.
    double sup = 0.0;
    for (int i = 0; i < p; ++i) {
      double expectation = 0.0;
      for (std::size_t k = 0; k < support.size(); ++k) {
        const double row = support[k].row(i).sum();
        expectation += weights[k] * (row > 0.0 ? 1.0 / row : std::numeric_limits<double>::infinity());
      }
      sup = std::max(sup, expectation);
    }
    const bool finite = std::isfinite(sup);
    report.entries.push_back({"ExponFinite", finite ? Status::pass : Status::fail, sup, 0.0,
                              "max over simplex vertices of E[1/|xM|]"});
  }

  {  // SecondFinite
    ConditionEntry e{"SecondFinite", Status::pass, 0.0, 0.0, ""};
    std::ostringstream detail;
    bool first = true;
    for (double eps : params.epsilon_grid) {
      double moment = 0.0;
      for (std::size_t k = 0; k < model.size(); ++k) {
        if (weights[k] == 0.0) continue;
        moment += weights[k] * std::pow(model.atom(k).eta(), 1.0 + eps);
      }
      if (first) e.estimate = moment;
      first = false;
      if (!std::isfinite(moment)) e.status = Status::fail;
      detail << "E[eta^" << fmt(1.0 + eps) << "] = " << fmt(moment) << "; ";
    }
    e.detail = detail.str();
    if (params.epsilon_grid.empty()) e.status = Status::inconclusive;
    report.entries.push_back(e);
  }
  return report;
}

std::string format_report(const ConditionReport& report) {
  std::ostringstream out;
  for (const auto& e : report.entries) {
    out << e.name << ": " << to_string(e.status) << "  estimate " << fmt(e.estimate);
    if (e.se > 0.0) out << " (se " << fmt(e.se) << ")";
    out << "\n    " << e.detail << "\n";
  }
  return out.str();
}

}  // namespace mbpre::walk
