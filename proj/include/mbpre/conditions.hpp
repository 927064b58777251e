#pragma once

#include "mbpre/environment.hpp"
#include "mbpre/linalg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mbpre::walk {

enum class Status { pass, fail, flagged, inconclusive, not_applicable };

std::string_view to_string(Status status);

struct ConditionEntry {
  std::string name;
  Status status;
  double estimate;
  double se;
  std::string detail;
};

struct ConditionParams {
  std::vector<double> epsilon_grid{0.25, 0.5, 1.0};
  std::vector<double> delta_grid{0.1, 0.25, 0.5};
  int lyapunov_n = 1000;
  std::int64_t lyapunov_replicas = 1000;
  std::uint64_t seed = 1;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;

  // Throws std::out_of_range for an unknown name.
  const ConditionEntry& at(std::string_view name) const;
};

// Every model kind is a finite list of atoms, so all checks except H4 are
// exact finite sums and report se = 0. H4 uses lyapunov() on streams
// derived from params.seed. Never throws for a valid model.
ConditionReport check_conditions(const env::EnvironmentModel& model,
                                 const ConditionParams& params = {});

// Sufficient condition for H2: some product of at most max_length support
// matrices is strictly positive. Works on zero patterns only.
bool positive_product_exists(std::span<const Matrix> support, int max_length);

std::string format_report(const ConditionReport& report);

}  // namespace mbpre::walk
