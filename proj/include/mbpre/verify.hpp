#pragma once

#include "mbpre/environment.hpp"
#include "mbpre/linalg.hpp"
#include "mbpre/offspring_law.hpp"
#include "mbpre/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mbpre::verify {

// One row of the verify CSV. Slack is the normalized amount by which an
// instance misses its inequality (or the residual of an identity); an
// instance is a violation when its slack exceeds the check's tolerance.
struct CheckResult {
  std::string check_name;
  std::int64_t instances = 0;
  std::int64_t violations = 0;
  double max_slack = -1e300;
  std::uint64_t worst_seed = 0;
};

struct CampaignOptions {
  std::int64_t instances = 10000;
  std::int64_t telescope_instances = 200;
  int telescope_max_n = 15;
  std::uint64_t seed = 1;
};

// Instance generator: p in {1,2,3}, support size <= 6, at most 5 children
// of each type, |M| >= 1e-6. With positive_mean every entry of M is > 0.
struct LawGenerator {
  int max_types = 3;
  int max_support = 6;
  int max_children = 5;

  int draw_types(RandomStream& rng) const;
  std::vector<env::OffspringLaw> laws(int p, RandomStream& rng, bool positive_mean) const;
  env::OffspringLaw law(int p, RandomStream& rng) const;
};

// Entries uniform on [0, 1); with positive false about a third are zero.
Matrix random_matrix(int p, RandomStream& rng, bool positive);
// Uniform-ish point of the simplex (normalized exponentials).
Vector random_simplex_point(int p, RandomStream& rng);

CheckResult check_telescope_identity(const CampaignOptions& options);
CheckResult check_telescope_bound(const CampaignOptions& options);
CheckResult check_psi_bound(const CampaignOptions& options);
CheckResult check_kozlov(const CampaignOptions& options);
CheckResult check_second_moment_bound(const CampaignOptions& options);
CheckResult check_mean_norm_lower_bound(const CampaignOptions& options);
CheckResult check_cocycle(const CampaignOptions& options);
CheckResult check_projective_normalization(const CampaignOptions& options);
CheckResult check_compose_associativity(const CampaignOptions& options);
CheckResult check_incremental_walk(const CampaignOptions& options);
CheckResult check_h5_closed_form(const CampaignOptions& options);
CheckResult check_eta_permutation(const CampaignOptions& options);
CheckResult check_fractional_linear_truncation(const CampaignOptions& options);
CheckResult check_common_left_eigenvector(const CampaignOptions& options);

std::vector<CheckResult> run_all(const CampaignOptions& options);

void write_csv(std::ostream& os, const std::vector<CheckResult>& rows);

}  // namespace mbpre::verify
