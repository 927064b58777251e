// Serial reference kernels against the OpenMP kernels on the same streams.
// Usage: mbpre_bench [replicas] [threads]

#include "mbpre/environment.hpp"
#include "mbpre/harmonic.hpp"
#include "mbpre/matrix_walk.hpp"
#include "mbpre/parallel.hpp"
#include "mbpre/reference.hpp"
#include "mbpre/survival.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

using namespace mbpre;

namespace {

template <class Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, double serial, double parallel, bool equal) {
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              equal ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
  const std::int64_t replicas = argc > 1 ? std::atoll(argv[1]) : 20000;
  if (argc > 2) set_worker_count(std::atoi(argv[2]));
  std::printf("replicas %lld, threads %d\n", static_cast<long long>(replicas), worker_count());
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial s", "omp s", "speedup");

  const auto scalar = env::EnvironmentModel::scalar_symmetric(std::log(2.0));
  Matrix mixers(2, 2);
  mixers << 0.5, 0.5, 0.3, 0.7;
  Vector stall(2), up(2), down(2);
  stall << 0.0, 0.0;
  up << 2.0 / 3.0, 2.0 / 3.0;
  down << 1.0 / 3.0, 1.0 / 3.0;
  const auto two_type = env::EnvironmentModel::fractional_linear(
      {{env::FractionalLinearParams{stall, up, mixers}, 0.5},
       {env::FractionalLinearParams{stall, down, mixers}, 0.5}});

  const std::vector<int> grid{64, 128, 256, 512, 1024};
  {
    survival::ScalingReport a, b;
    const double ts = seconds([&] { a = reference::annealed_survival(two_type, 0, grid, replicas, 7); });
    const double tp = seconds([&] { b = survival::annealed_survival(two_type, 0, grid, replicas, 7); });
    bool equal = true;
    for (std::size_t j = 0; j < grid.size(); ++j) equal &= a.points[j].p_hat == b.points[j].p_hat;
    row("annealed_survival (p=2)", ts, tp, equal);
  }
  {
    const auto x = walk::ProjectivePoint::uniform(1);
    std::vector<double> a;
    harmonic::TauTailReport b{x, 0, {}, 0, 0, {}, {}, true};
    harmonic::TailOptions opt{40, 20};
    const double ts = seconds([&] { a = reference::tau_survival(x, std::log(2.0), scalar, grid, replicas, 7); });
    const double tp = seconds([&] { b = harmonic::tau_tail(x, std::log(2.0), scalar, grid, replicas, 7, {}, opt); });
    bool equal = true;
    for (std::size_t j = 0; j < grid.size(); ++j) equal &= a[j] == b.points[j].p_hat;
    row("tau_tail (scalar)", ts, tp, equal);
  }
  {
    const auto x = walk::ProjectivePoint::uniform(2);
    double a = 0.0;
    walk::LyapunovEstimate b{};
    const double ts = seconds([&] { a = reference::lyapunov(two_type, 1024, replicas / 4, 7, x); });
    const double tp = seconds([&] { b = walk::lyapunov(two_type, 1024, replicas / 4, 7, x); });
    row("lyapunov (p=2)", ts, tp, a == b.estimate);
  }
  return 0;
}
