#include "csdp/privacy.hpp"

#include <algorithm>
#include <string>

#include "csdp/errors.hpp"

namespace csdp {

void validate_budget(const PrivacyParams& budget) {
  if (!(budget.epsilon > 0.0)) {
    throw InvalidArgument("budget: epsilon must be > 0");
  }
  if (!(budget.delta > 0.0) || !(budget.delta < 1.0)) {
    throw InvalidArgument("budget: delta must be in (0, 1)");
  }
}

PrivacyParams split_budget(const PrivacyParams& total, int k) {
  validate_budget(total);
  if (k < 1) throw InvalidArgument("split_budget: k must be >= 1");
  return PrivacyParams{total.epsilon / static_cast<double>(k),
                       total.delta / static_cast<double>(k)};
}

ParticipationReport audit_participation(const TreePlan& plan) {
  ParticipationReport report;
  report.per_user_counts.assign(
      static_cast<std::size_t>(plan.padded_horizon), 0);
  for (const PlanNode& nd : plan.nodes) {
    for (std::int64_t u = nd.first; u <= nd.last; ++u) {
      ++report.per_user_counts[static_cast<std::size_t>(u - 1)];
    }
  }
  for (int c : report.per_user_counts) report.max_count = std::max(report.max_count, c);
  return report;
}

}  // namespace csdp
