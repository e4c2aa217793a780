#ifndef CSDP_ESTIMATOR_HPP
#define CSDP_ESTIMATOR_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "csdp/shuffle_runtime.hpp"
#include "csdp/tree_plan.hpp"

namespace csdp {

// The online tree-aggregation server: drives the shuffle runtime through the
// plan and publishes, after every user, the sum of the decoded estimates of
// the greedy node cover of the closed prefix. Between batch closes the output
// is held at the last closed-prefix estimate.
//
// This class is pure server logic. It never sees true sums; error
// instrumentation lives in process_stream so the data flow stays
// one-directional (values -> encoders -> shuffler -> server).
class CstaEstimator {
 public:
  CstaEstimator(const TreePlan& plan, const MechanismPolicy& policy,
                const PrivacyParams& total_budget, std::uint64_t seed);

  // Feeds the next user's value and returns the published estimate, one
  // entry per dimension. The reference stays valid until the next call.
  const std::vector<double>& step(std::span<const double> value);
  const std::vector<double>& step(double value);

  // Feeds zeros for the phantom tail of a padded plan so that every node
  // closes and the transcript completes. No-op when already at the horizon.
  void finish();

  std::int64_t time() const { return runtime_.time(); }
  const std::vector<double>& current_output() const { return output_; }

  // The cover behind the current output: node ids in range order, its size
  // (the number of independent noise terms in the output), the end of the
  // covered prefix, and the summed variance bound.
  const std::vector<std::uint64_t>& cover() const { return cover_ids_; }
  std::size_t cover_size() const { return cover_ids_.size(); }
  std::int64_t closed_prefix() const { return closed_prefix_; }
  double output_variance_bound() const;

  const ShuffleRuntime& runtime() const { return runtime_; }

 private:
  struct CoverEntry {
    std::uint64_t node_id;
    std::int64_t first;
    std::int64_t last;
    SumEstimate estimate;
  };

  void absorb(std::uint64_t node_id, SumEstimate estimate);
  void recompute_output();

  ShuffleRuntime runtime_;
  int dimension_;
  std::vector<CoverEntry> stack_;  // disjoint consecutive ranges, oldest first
  std::vector<std::uint64_t> cover_ids_;
  std::vector<double> output_;
  std::int64_t closed_prefix_ = 0;
};

// One instrumented run over a scalar stream (values in [0, 1]).
struct ProcessResult {
  std::vector<double> outputs;       // published estimate after each user
  std::vector<double> true_prefix;   // exact running sum, same indexing
  std::vector<double> abs_error;
  std::vector<std::size_t> cover_sizes;
  double max_abs_error = 0.0;
};

// transcript_out, when given, receives a copy of the run's full transcript
// (all nodes closed, including any padded tail).
ProcessResult process_stream(std::span<const double> values, const TreePlan& plan,
                             const MechanismPolicy& policy,
                             const PrivacyParams& total_budget, std::uint64_t seed,
                             std::vector<TranscriptRecord>* transcript_out = nullptr);

// Empirical (1 - beta) quantile (conservative, upper rank) of per-run maximum
// errors. Requires at least 100 runs.
double error_profile(std::span<const double> max_errors_across_runs, double beta);

}  // namespace csdp

#endif  // CSDP_ESTIMATOR_HPP
