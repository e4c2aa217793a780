#include "csdp/hard_inputs.hpp"

#include <algorithm>
#include <cmath>

#include "csdp/errors.hpp"
#include "csdp/estimator.hpp"

namespace csdp {

double hard_c_eps(double epsilon) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("hard_c_eps: epsilon must be >= 0");
  return std::exp(epsilon) / (std::exp(2.0 * epsilon) + 1.0);
}

double hard_rep(std::int64_t n, int k, double epsilon) {
  if (n < 1) throw InvalidArgument("hard_rep: n must be >= 1");
  if (k < 0) throw InvalidArgument("hard_rep: k must be >= 0");
  double exponent = 1.0 / (2.0 * k + 1.0);
  double c = hard_c_eps(epsilon);
  return 0.5 * std::pow(static_cast<double>(n), exponent) *
         std::pow(c, 2.0 * k / (2.0 * k + 1.0));
}

double hard_big(std::int64_t n, int k, double epsilon) {
  if (n < 1) throw InvalidArgument("hard_big: n must be >= 1");
  if (k < 1) throw InvalidArgument("hard_big: k must be >= 1");
  double c = hard_c_eps(epsilon);
  return std::pow(static_cast<double>(n), (2.0 * k - 1.0) / (2.0 * k + 1.0)) *
         std::pow(c, 2.0 / (2.0 * k + 1.0));
}

void validate_hard_params(const HardDistParams& params) {
  if (params.n < 1) throw InvalidArgument("hard params: n must be >= 1");
  if (params.k < 0) throw InvalidArgument("hard params: k must be >= 0");
  if (!(params.epsilon >= 0.0)) {
    throw InvalidArgument("hard params: epsilon must be >= 0");
  }
  if (params.prefix_bit != 0 && params.prefix_bit != 1) {
    throw InvalidArgument("hard params: prefix_bit must be 0 or 1");
  }
  double rep = hard_rep(params.n, params.k, params.epsilon);
  if (params.prefix_len < 0 ||
      params.prefix_len > static_cast<std::int64_t>(std::floor(rep))) {
    throw InvalidArgument("hard params: prefix_len must lie in [0, floor(rep)]");
  }
}

std::int64_t hard_block_len(const HardDistParams& params) {
  double rep = hard_rep(params.n, params.k, params.epsilon);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(rep)));
}

HardStream sample_hard_stream(const HardDistParams& params, StreamRng& rng) {
  validate_hard_params(params);
  HardStream stream;
  stream.prefix_len = params.prefix_len;
  stream.prefix_bit = params.prefix_bit;
  stream.block_len = hard_block_len(params);
  stream.bits.reserve(static_cast<std::size_t>(params.n));

  for (std::int64_t i = 0; i < params.prefix_len &&
                           static_cast<std::int64_t>(stream.bits.size()) < params.n;
       ++i) {
    stream.bits.push_back(params.prefix_bit);
  }
  while (static_cast<std::int64_t>(stream.bits.size()) < params.n) {
    int single = rng.bernoulli(0.5) ? 1 : 0;
    stream.fresh_positions.push_back(static_cast<std::int64_t>(stream.bits.size()) + 1);
    stream.bits.push_back(single);
    if (static_cast<std::int64_t>(stream.bits.size()) >= params.n) break;
    int block_bit = rng.bernoulli(0.5) ? 1 : 0;
    stream.fresh_positions.push_back(static_cast<std::int64_t>(stream.bits.size()) + 1);
    for (std::int64_t i = 0; i < stream.block_len &&
                             static_cast<std::int64_t>(stream.bits.size()) < params.n;
         ++i) {
      stream.bits.push_back(block_bit);
    }
  }
  return stream;
}

bool validate_hard_stream(const HardStream& stream, const HardDistParams& params) {
  if (static_cast<std::int64_t>(stream.bits.size()) != params.n) return false;
  if (stream.prefix_len != params.prefix_len ||
      stream.prefix_bit != params.prefix_bit) {
    return false;
  }
  std::int64_t expected_block = hard_block_len(params);
  if (stream.block_len != expected_block) return false;
  for (int bit : stream.bits) {
    if (bit != 0 && bit != 1) return false;
  }

  std::int64_t pos = 0;  // 0-based cursor into bits
  for (; pos < stream.prefix_len; ++pos) {
    if (pos >= params.n) break;
    if (stream.bits[static_cast<std::size_t>(pos)] != stream.prefix_bit) return false;
  }

  std::size_t fresh_idx = 0;
  auto is_fresh = [&](std::int64_t p0) {
    return fresh_idx < stream.fresh_positions.size() &&
           stream.fresh_positions[fresh_idx] == p0 + 1;
  };
  // No fresh coin may fall inside the prefix.
  if (!stream.fresh_positions.empty() &&
      stream.fresh_positions.front() <= stream.prefix_len) {
    return false;
  }

  while (pos < params.n) {
    // Single fair bit.
    if (!is_fresh(pos)) return false;
    ++fresh_idx;
    ++pos;
    if (pos >= params.n) break;
    // Repeated block: a fresh leader then block_len - 1 copies, truncated.
    if (!is_fresh(pos)) return false;
    ++fresh_idx;
    int block_bit = stream.bits[static_cast<std::size_t>(pos)];
    ++pos;
    for (std::int64_t i = 1; i < stream.block_len && pos < params.n; ++i, ++pos) {
      if (is_fresh(pos)) return false;
      if (stream.bits[static_cast<std::size_t>(pos)] != block_bit) return false;
    }
  }
  return fresh_idx == stream.fresh_positions.size();
}

std::vector<double> worst_case_probe(const TreePlan& plan,
                                     const MechanismPolicy& policy,
                                     const PrivacyParams& total_budget,
                                     const HardDistParams& params, int trials,
                                     std::uint64_t master_seed) {
  if (trials < 100) throw InvalidArgument("worst_case_probe: trials must be >= 100");
  if (plan.horizon != params.n) {
    throw InvalidArgument("worst_case_probe: plan horizon must match params.n");
  }
  std::vector<double> max_errors;
  max_errors.reserve(static_cast<std::size_t>(trials));
  for (int trial = 0; trial < trials; ++trial) {
    StreamRng stream_rng =
        StreamRng::derive(master_seed, 2 * static_cast<std::uint64_t>(trial));
    HardStream stream = sample_hard_stream(params, stream_rng);
    std::vector<double> values(stream.bits.begin(), stream.bits.end());
    std::uint64_t run_seed =
        StreamRng::derive(master_seed, 2 * static_cast<std::uint64_t>(trial) + 1)
            .next_u64();
    ProcessResult run = process_stream(values, plan, policy, total_budget, run_seed);
    max_errors.push_back(run.max_abs_error);
  }
  std::sort(max_errors.begin(), max_errors.end());
  return max_errors;
}

}  // namespace csdp
