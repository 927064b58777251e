#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace mbpre {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;  // standard error
};

// Sample mean and its standard error, summed in index order.
inline MeanEstimate mean_estimate(std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// Standard error of a binomial proportion estimated from n trials.
inline double proportion_stderr(double p, double n) {
  return n > 1.0 ? std::sqrt(p * (1.0 - p) / (n - 1.0)) : 0.0;
}

}  // namespace mbpre
