#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mbpre/environment.hpp"
#include "mbpre/gf.hpp"
#include "mbpre/verify.hpp"

#include <cmath>

using namespace mbpre;
using env::OffspringLaw;

namespace {

Vector vec1(double s) { return Vector::Constant(1, s); }

env::EnvironmentComponent doubling() {
  return env::EnvironmentComponent(std::vector<OffspringLaw>{OffspringLaw::deterministic({2})});
}

env::EnvironmentComponent geometric() {
  return env::EnvironmentComponent(
      env::FractionalLinearParams{vec1(0.5), vec1(0.5), Matrix::Ones(1, 1)});
}

env::EnvironmentComponent geometric_truncated() {
  return env::EnvironmentComponent(env::truncate_fractional_linear(
      env::FractionalLinearParams{vec1(0.5), vec1(0.5), Matrix::Ones(1, 1)}));
}

std::vector<gf::Step> repeat(const env::EnvironmentComponent& c, int n) {
  return std::vector<gf::Step>(static_cast<std::size_t>(n), c.step());
}

}  // namespace

TEST_CASE("evaluate") {
  CHECK(gf::evaluate(doubling().gf(), vec1(0.5))[0] == 0.25);
  CHECK(gf::evaluate(geometric().gf(), vec1(0.0))[0] == 0.5);
  CHECK(std::abs(gf::evaluate(geometric_truncated().gf(), vec1(0.0))[0] - 0.5) < 1e-12);
  CHECK(gf::evaluate(geometric().gf(), vec1(1.0))[0] == 1.0);
  CHECK(std::abs(gf::evaluate(geometric_truncated().gf(), vec1(1.0))[0] - 1.0) < 1e-12);
  CHECK_THROWS_AS(gf::evaluate(doubling().gf(), vec1(1.5)), std::domain_error);
  CHECK_THROWS_AS(gf::evaluate(doubling().gf(), vec1(-0.1)), std::domain_error);
}

TEST_CASE("evaluate is monotone and maps the cube into itself") {
  const verify::LawGenerator gen;
  RandomStream rng(21, 0);
  for (int t = 0; t < 500; ++t) {
    const int p = gen.draw_types(rng);
    const env::EnvironmentComponent c(gen.laws(p, rng, false));
    Vector s(p);
    for (int i = 0; i < p; ++i) s[i] = rng.uniform();
    Vector bigger = s;
    const int j = t % p;
    bigger[j] = s[j] + (1.0 - s[j]) * rng.uniform();
    const Vector fs = c.gf().evaluate(s), fb = c.gf().evaluate(bigger);
    CHECK(in_unit_cube(fs));
    CHECK((fb - fs).minCoeff() >= -1e-15);
    // Complement form agrees with 1 - f.
    CHECK((c.gf().complement(ones(p) - s) - (ones(p) - fs)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("closed form and truncation agree on the fractional linear family") {
  RandomStream rng(8, 0);
  for (int t = 0; t < 40; ++t) {
    const int p = 1 + t % 3;
    env::FractionalLinearParams params{Vector(p), Vector(p), Matrix(p, p)};
    for (int i = 0; i < p; ++i) {
      params.stall[i] = 0.8 * rng.uniform();
      params.geometric[i] = 0.05 + 0.5 * rng.uniform();
      params.mixers.row(i) = verify::random_simplex_point(p, rng).transpose();
    }
    const env::EnvironmentComponent closed(params);
    const env::EnvironmentComponent truncated(env::truncate_fractional_linear(params));
    Vector s(p);
    for (int i = 0; i < p; ++i) s[i] = rng.uniform();
    CHECK((closed.gf().evaluate(s) - truncated.gf().evaluate(s)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((closed.mean() - truncated.mean()).cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 0; i < p; ++i)
      CHECK((closed.hessians()[i] - truncated.hessians()[i]).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("compose") {
  const auto g = geometric();
  const gf::GfHandle* h = &g.gf();
  std::vector<const gf::GfHandle*> chain(3, h);
  CHECK(gf::compose({}, vec1(0.3))[0] == 0.3);
  // f_{0,n}(0) = n / (n + 1)
  CHECK(std::abs(gf::compose(chain, vec1(0.0))[0] - 0.75) < 1e-15);
  const auto d = doubling();
  std::vector<const gf::GfHandle*> dchain(7, &d.gf());
  CHECK(gf::compose(dchain, vec1(0.0))[0] == 0.0);
  const env::EnvironmentComponent two(std::vector<OffspringLaw>{OffspringLaw::deterministic({1, 0}),
                                                                OffspringLaw::deterministic({0, 1})});
  std::vector<const gf::GfHandle*> mixed{h, &two.gf()};
  CHECK_THROWS_AS(gf::compose(mixed, vec1(0.0)), std::invalid_argument);
}

TEST_CASE("compose associativity") {
  const auto row = verify::check_compose_associativity({2000, 200, 15, 3});
  CHECK(row.violations == 0);
  CHECK(row.max_slack == 0.0);  // same floating sequence
}

TEST_CASE("quenched survival") {
  const auto g = geometric();
  std::vector<const gf::GfHandle*> chain(4, &g.gf());
  CHECK(std::abs(gf::quenched_survival(chain, 0) - 0.2) < 1e-15);
  for (int n = 1; n <= 200; n += 17) {
    std::vector<const gf::GfHandle*> c(static_cast<std::size_t>(n), &g.gf());
    CHECK(std::abs(gf::quenched_survival(c, 0) * (n + 1.0) - 1.0) < 1e-12);
  }
  const auto d = doubling();
  std::vector<const gf::GfHandle*> dchain(9, &d.gf());
  CHECK(gf::quenched_survival(dchain, 0) == 1.0);
  CHECK_THROWS_AS(gf::quenched_survival({}, 0), std::invalid_argument);
  CHECK_THROWS_AS(gf::quenched_survival(chain, 1), std::invalid_argument);
}

TEST_CASE("delta2") {
  CHECK(gf::delta2(doubling().gf(), vec1(0.0))[0] == 2.0);
  CHECK(gf::delta2(doubling().gf(), vec1(1.0))[0] == 0.0);
  CHECK(std::abs(gf::delta2(geometric().gf(), vec1(0.5))[0] - 0.5) < 1e-12);
}

TEST_CASE("H(z)") {
  const Matrix a = Matrix::Ones(1, 1);
  for (double z : {0.0, 0.3, 0.8}) CHECK(std::abs(gf::h_of_z(doubling().gf(), a, vec1(0.0), z) - z * z) < 1e-15);
  CHECK(std::abs(gf::h_of_z(geometric().gf(), a, vec1(0.0), 0.5) - 2.0 / 3.0) < 1e-15);
  CHECK(gf::h_of_z(geometric().gf(), a, vec1(0.4), 1.0) == 1.0);
  CHECK_THROWS_AS(gf::h_of_z(geometric().gf(), Matrix::Zero(1, 1), vec1(0.0), 0.5), std::domain_error);
  // H'(1) and H''(1) of z^2 are 2 and 2.
  CHECK(gf::h_prime_at_one(a, doubling().mean(), vec1(0.0)) == 2.0);
  CHECK(gf::h_second_at_one(doubling().gf(), a, vec1(0.0)) == 2.0);
}

TEST_CASE("psi") {
  const Matrix a = Matrix::Ones(1, 1);
  for (double s : {0.0, 0.25, 0.5, 0.9, 0.999})
    CHECK(std::abs(gf::psi(geometric().gf(), a, geometric().mean(), vec1(s)) - 1.0) < 1e-12);
  CHECK(gf::psi(doubling().gf(), a, doubling().mean(), vec1(0.0)) == 0.5);
  CHECK_THROWS_AS(gf::psi(geometric().gf(), a, geometric().mean(), vec1(1.0)), std::domain_error);
  CHECK_THROWS_AS(gf::psi(geometric().gf(), Matrix::Zero(1, 1), geometric().mean(), vec1(0.0)),
                  std::domain_error);
  const env::EnvironmentComponent stays(std::vector<OffspringLaw>{OffspringLaw::deterministic({0})});
  CHECK_THROWS_AS(gf::psi(stays.gf(), a, stays.mean(), vec1(0.0)), std::domain_error);
}

TEST_CASE("telescope examples") {
  SUBCASE("critical geometric, n = 2") {
    const auto g = geometric();
    const auto rep = gf::telescope(gf::CompositionChain(repeat(g, 2), vec1(0.0)), vec1(1.0));
    CHECK(std::abs(rep.lhs - 3.0) < 1e-14);
    CHECK(std::abs(rep.leading - 1.0) < 1e-14);
    REQUIRE(rep.terms.size() == 2);
    for (const auto& t : rep.terms) {
      CHECK(std::abs(t.psi - 1.0) < 1e-14);
      CHECK(t.weight == 1.0);
    }
    CHECK(rep.residual < 1e-15);
  }
  SUBCASE("doubling, n = 1") {
    const auto d = doubling();
    const auto rep = gf::telescope(gf::CompositionChain(repeat(d, 1), vec1(0.0)), vec1(1.0));
    CHECK(rep.lhs == 1.0);
    CHECK(std::abs(rep.leading - 0.5) < 1e-15);
    CHECK(std::abs(rep.rhs - 1.0) < 1e-15);
    CHECK(rep.bound_slack >= 0.0);
  }
  SUBCASE("errors") {
    const auto g = geometric();
    gf::CompositionChain chain(repeat(g, 2), vec1(0.0));
    Vector x(1);
    x << 0.5;
    CHECK_THROWS_AS(gf::telescope(chain, x), std::invalid_argument);
    const env::EnvironmentComponent zero(std::vector<OffspringLaw>{OffspringLaw::deterministic({0})});
    CHECK_THROWS_AS(gf::telescope(gf::CompositionChain(repeat(zero, 2), vec1(0.0)), vec1(1.0)),
                    std::domain_error);
  }
}

TEST_CASE("property campaigns") {
  const verify::CampaignOptions options{2000, 200, 15, 17};
  const auto identity = verify::check_telescope_identity(options);
  CHECK(identity.instances == 200);
  CHECK(identity.violations == 0);
  CHECK(identity.max_slack < 1e-9);
  CHECK(verify::check_telescope_bound(options).violations == 0);
  CHECK(verify::check_psi_bound(options).violations == 0);
  CHECK(verify::check_kozlov(options).violations == 0);
  CHECK(verify::check_second_moment_bound(options).violations == 0);
  CHECK(verify::check_mean_norm_lower_bound(options).violations == 0);
}

TEST_CASE("psi terms of the telescope are nonnegative") {
  const verify::LawGenerator gen;
  RandomStream rng(4, 4);
  for (int t = 0; t < 100; ++t) {
    const int p = gen.draw_types(rng);
    std::vector<env::EnvironmentComponent> comps;
    for (int k = 0; k < 8; ++k) comps.emplace_back(gen.laws(p, rng, true));
    std::vector<gf::Step> steps;
    for (const auto& c : comps) steps.push_back(c.step());
    const auto rep = gf::telescope(gf::CompositionChain(steps, Vector::Zero(p)),
                                   verify::random_simplex_point(p, rng));
    for (const auto& term : rep.terms) CHECK(term.psi >= -1e-12);
  }
}
