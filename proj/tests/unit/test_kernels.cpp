#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mbpre/harmonic.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/reference.hpp"
#include "mbpre/survival.hpp"

#include <cmath>

using namespace mbpre;
using walk::ProjectivePoint;

namespace {

env::EnvironmentModel two_type_model() {
  Vector q0(2), r0(2), q1(2), r1(2);
  q0 << 0.3, 0.5;
  r0 << 0.6, 0.4;
  q1 << 0.5, 0.2;
  r1 << 0.3, 0.5;
  Matrix m0(2, 2), m1(2, 2);
  m0 << 0.7, 0.3, 0.2, 0.8;
  m1 << 0.4, 0.6, 0.5, 0.5;
  return env::EnvironmentModel::fractional_linear({{{q0, r0, m0}, 0.5}, {{q1, r1, m1}, 0.5}});
}

template <class F>
auto with_threads(int threads, F&& f) {
  const int saved = worker_count();
  set_worker_count(threads);
  auto out = f();
  set_worker_count(saved);
  return out;
}

}  // namespace

TEST_CASE("annealed survival matches the serial reference") {
  const auto model = two_type_model();
  const int grid[] = {1, 3, 10, 40};
  for (int type : {0, 1}) {
    const auto fast = survival::annealed_survival(model, type, grid, 3000, 8);
    const auto slow = reference::annealed_survival(model, type, grid, 3000, 8);
    for (std::size_t j = 0; j < fast.points.size(); ++j) {
      CHECK(fast.points[j].p_hat == slow.points[j].p_hat);
      CHECK(fast.points[j].se == slow.points[j].se);
    }
  }
}

TEST_CASE("walk kernels match the serial reference") {
  const auto model = two_type_model();
  const ProjectivePoint x = ProjectivePoint::vertex(2, 1);
  const int grid[] = {1, 5, 25, 125};
  const auto tail = harmonic::tau_tail(x, 0.8, model, grid, 4000, 6);
  const auto tail_ref = reference::tau_survival(x, 0.8, model, grid, 4000, 6);
  for (std::size_t j = 0; j < tail.points.size(); ++j) CHECK(tail.points[j].p_hat == tail_ref[j]);

  const auto h = harmonic::estimate_h(x, 0.8, model, grid, 4000, 6);
  const auto h_ref = reference::harmonic_values(x, 0.8, model, grid, 4000, 6);
  for (std::size_t j = 0; j < h.values.size(); ++j) CHECK(h.values[j].estimate == h_ref[j]);

  const auto lyap = walk::lyapunov(model, 200, 500, 9, x);
  CHECK(lyap.estimate == reference::lyapunov(model, 200, 500, 9, x));
}

TEST_CASE("results do not depend on the number of threads") {
  const auto model = two_type_model();
  const int grid[] = {2, 20, 200};
  const auto a = with_threads(1, [&] { return survival::annealed_survival(model, 0, grid, 2000, 3); });
  const auto b = with_threads(4, [&] { return survival::annealed_survival(model, 0, grid, 2000, 3); });
  for (std::size_t j = 0; j < a.points.size(); ++j) CHECK(a.points[j].p_hat == b.points[j].p_hat);

  const auto pa = with_threads(1, [&] { return survival::particle_survival(model, 1, grid, 500, 3); });
  const auto pb = with_threads(4, [&] { return survival::particle_survival(model, 1, grid, 500, 3); });
  for (std::size_t j = 0; j < pa.points.size(); ++j) CHECK(pa.points[j].p_hat == pb.points[j].p_hat);

  const auto x = ProjectivePoint::uniform(2);
  const auto ta = with_threads(1, [&] { return harmonic::tau_tail(x, 1.0, model, grid, 2000, 3); });
  const auto tb = with_threads(4, [&] { return harmonic::tau_tail(x, 1.0, model, grid, 2000, 3); });
  CHECK(ta.sigma2 == tb.sigma2);
  for (std::size_t j = 0; j < ta.points.size(); ++j) CHECK(ta.points[j].p_hat == tb.points[j].p_hat);
}

TEST_CASE("exceptions inside a parallel region reach the caller") {
  Matrix zero = Matrix::Zero(2, 2);
  zero(1, 1) = 1.0;
  const auto model = env::EnvironmentModel::deterministic(
      env::EnvironmentComponent(env::geometric_with_mean_matrix(zero)));
  CHECK_THROWS_AS(walk::lyapunov(model, 5, 100, 1, ProjectivePoint::vertex(2, 0)), std::domain_error);
}
