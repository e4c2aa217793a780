#ifndef CSDP_HARD_INPUTS_HPP
#define CSDP_HARD_INPUTS_HPP

#include <cstdint>
#include <vector>

#include "csdp/privacy.hpp"
#include "csdp/rng.hpp"
#include "csdp/shuffle_runtime.hpp"
#include "csdp/tree_plan.hpp"

namespace csdp {

// Bias constant of the adversarial family: e^eps / (e^{2 eps} + 1), in
// (0, 1/2].
double hard_c_eps(double epsilon);

// Repeated-block length: (1/2) n^{1/(2k+1)} c_eps^{2k/(2k+1)}. At k = 0 this
// is n/2 exactly. Satisfies hard_rep(n, k) = hard_rep(hard_big(n, k), k - 1).
double hard_rep(std::int64_t n, int k, double epsilon);

// Large-batch threshold: n^{(2k-1)/(2k+1)} c_eps^{2/(2k+1)}.
double hard_big(std::int64_t n, int k, double epsilon);

// Parameters of one adversarial stream. The prefix is a run of prefix_bit of
// length prefix_len (at most floor(rep)); after it the stream alternates a
// single fair bit with floor(rep) copies of another fair bit until length n.
struct HardDistParams {
  std::int64_t n = 0;
  int k = 0;  // k = 0 is the base family with rep = n/2
  double epsilon = 0.0;
  std::int64_t prefix_len = 0;
  int prefix_bit = 0;
};

void validate_hard_params(const HardDistParams& params);

// floor(rep), never below 1, so block lengths stay usable at small n.
std::int64_t hard_block_len(const HardDistParams& params);

// A sampled stream plus its generation record: which positions carried a
// fresh fair coin (1-based), enough to re-check the grammar after the fact.
struct HardStream {
  std::vector<int> bits;
  std::vector<std::int64_t> fresh_positions;
  std::int64_t prefix_len = 0;
  int prefix_bit = 0;
  std::int64_t block_len = 0;
};

HardStream sample_hard_stream(const HardDistParams& params, StreamRng& rng);

// Re-parses the stream against the grammar
//   prefix . (single-bit . repeated-block)*   truncated at n,
// using the generation record for the fresh-coin positions. Returns true iff
// the stream is well-formed for these parameters.
bool validate_hard_stream(const HardStream& stream, const HardDistParams& params);

// Runs the estimator on freshly sampled adversarial streams and reports the
// per-trial maximum errors (sorted ascending). Observational only: it
// documents that the error on these streams is at least the intra-batch
// floor, it proves nothing about other algorithms.
std::vector<double> worst_case_probe(const TreePlan& plan,
                                     const MechanismPolicy& policy,
                                     const PrivacyParams& total_budget,
                                     const HardDistParams& params, int trials,
                                     std::uint64_t master_seed);

}  // namespace csdp

#endif  // CSDP_HARD_INPUTS_HPP
