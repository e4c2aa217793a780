#include "csdp/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "csdp/errors.hpp"

namespace csdp {

CstaEstimator::CstaEstimator(const TreePlan& plan, const MechanismPolicy& policy,
                             const PrivacyParams& total_budget, std::uint64_t seed)
    : runtime_(plan, policy, total_budget, seed),
      dimension_(policy.dimension),
      output_(static_cast<std::size_t>(policy.dimension), 0.0) {}

const std::vector<double>& CstaEstimator::step(std::span<const double> value) {
  std::vector<ClosedBatch> closed = runtime_.step(value);
  for (ClosedBatch& batch : closed) {
    absorb(batch.mechanism_id, std::move(batch.estimate));
  }
  if (!closed.empty()) recompute_output();
  return output_;
}

const std::vector<double>& CstaEstimator::step(double value) {
  return step(std::span<const double>(&value, 1));
}

void CstaEstimator::finish() {
  std::vector<double> zeros(static_cast<std::size_t>(dimension_), 0.0);
  while (runtime_.time() < runtime_.plan().padded_horizon) step(zeros);
}

void CstaEstimator::absorb(std::uint64_t node_id, SumEstimate estimate) {
  const PlanNode& node = runtime_.plan().node(node_id);
  if (estimate.value.size() != output_.size()) {
    throw ProtocolViolation("estimator: estimate dimension mismatch");
  }
  // A closing node subsumes every cover entry inside its range; entries are
  // disjoint and consecutive, so they sit at the top of the stack.
  while (!stack_.empty() && stack_.back().first >= node.first) stack_.pop_back();
  if (!stack_.empty() && stack_.back().last != node.first - 1) {
    throw ProtocolViolation("estimator: cover would become non-consecutive");
  }
  if (stack_.empty() && node.first != 1) {
    throw ProtocolViolation("estimator: cover must start at user 1");
  }
  stack_.push_back(CoverEntry{node_id, node.first, node.last, std::move(estimate)});
}

void CstaEstimator::recompute_output() {
  cover_ids_.clear();
  std::fill(output_.begin(), output_.end(), 0.0);
  for (const CoverEntry& entry : stack_) {
    cover_ids_.push_back(entry.node_id);
    for (std::size_t c = 0; c < output_.size(); ++c) {
      output_[c] += entry.estimate.value[c];
    }
  }
  closed_prefix_ = stack_.empty() ? 0 : stack_.back().last;
}

double CstaEstimator::output_variance_bound() const {
  double total = 0.0;
  for (const CoverEntry& entry : stack_) total += entry.estimate.variance_bound;
  return total;
}

ProcessResult process_stream(std::span<const double> values, const TreePlan& plan,
                             const MechanismPolicy& policy,
                             const PrivacyParams& total_budget, std::uint64_t seed,
                             std::vector<TranscriptRecord>* transcript_out) {
  if (static_cast<std::int64_t>(values.size()) != plan.horizon) {
    throw InvalidArgument("process_stream: stream length must equal the plan horizon");
  }
  if (policy.dimension != 1) {
    throw InvalidArgument("process_stream: scalar streams only (dimension 1)");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("process_stream: values must lie in [0, 1]");
    }
  }

  CstaEstimator estimator(plan, policy, total_budget, seed);
  ProcessResult result;
  result.outputs.reserve(values.size());
  result.true_prefix.reserve(values.size());
  result.abs_error.reserve(values.size());
  result.cover_sizes.reserve(values.size());

  double truth = 0.0;
  for (double v : values) {
    const std::vector<double>& y = estimator.step(v);
    truth += v;
    double err = std::abs(y[0] - truth);
    result.outputs.push_back(y[0]);
    result.true_prefix.push_back(truth);
    result.abs_error.push_back(err);
    result.cover_sizes.push_back(estimator.cover_size());
    result.max_abs_error = std::max(result.max_abs_error, err);
  }
  estimator.finish();
  if (transcript_out != nullptr) *transcript_out = estimator.runtime().transcript();
  return result;
}

double error_profile(std::span<const double> max_errors_across_runs, double beta) {
  if (max_errors_across_runs.size() < 100) {
    throw InvalidArgument("error_profile: needs at least 100 runs");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw InvalidArgument("error_profile: beta must lie in (0, 1)");
  }
  std::vector<double> sorted(max_errors_across_runs.begin(),
                             max_errors_across_runs.end());
  std::sort(sorted.begin(), sorted.end());
  double rank = std::ceil((1.0 - beta) * static_cast<double>(sorted.size()));
  std::size_t index = static_cast<std::size_t>(rank) - 1;
  if (index >= sorted.size()) index = sorted.size() - 1;
  return sorted[index];
}

}  // namespace csdp
