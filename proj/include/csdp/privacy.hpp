#ifndef CSDP_PRIVACY_HPP
#define CSDP_PRIVACY_HPP

#include <cstdint>
#include <vector>

#include "csdp/tree_plan.hpp"

namespace csdp {

// An (epsilon, delta) differential-privacy budget.
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;

  bool operator==(const PrivacyParams&) const = default;
};

// Validates epsilon > 0 and delta in (0, 1); throws InvalidArgument.
void validate_budget(const PrivacyParams& budget);

// Even split across k mechanisms under simple composition:
// (epsilon/k, delta/k), computed by plain floating-point division so that
// callers can compare assigned budgets for exact equality.
PrivacyParams split_budget(const PrivacyParams& total, int k);

// How often each user's data enters a mechanism under a plan. A user
// participates once per tree level whose node range contains it, so the
// maximum must never exceed the number of shuffler slots.
struct ParticipationReport {
  std::vector<int> per_user_counts;  // index 0 <-> user 1
  int max_count = 0;
};

ParticipationReport audit_participation(const TreePlan& plan);

}  // namespace csdp

#endif  // CSDP_PRIVACY_HPP
