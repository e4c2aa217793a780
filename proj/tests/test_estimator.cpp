#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "csdp/errors.hpp"
#include "csdp/estimator.hpp"
#include "csdp/rng.hpp"
#include "csdp/tree_plan.hpp"

using csdp::CstaEstimator;
using csdp::MechanismKind;
using csdp::MechanismPolicy;
using csdp::PrivacyParams;
using csdp::ProcessResult;
using csdp::StreamRng;
using csdp::TreePlan;
using csdp::process_stream;

namespace {

int ceil_log2(std::int64_t n) {
  int level = 0;
  std::int64_t width = 1;
  while (width < n) {
    width *= 2;
    ++level;
  }
  return level;
}

MechanismPolicy zero_noise() {
  MechanismPolicy policy;
  policy.kind = MechanismKind::kOracle;
  policy.oracle_fixed_variance = 0.0;
  return policy;
}

std::vector<double> random_bits(std::int64_t n, std::uint64_t seed) {
  StreamRng rng(seed);
  std::vector<double> bits;
  bits.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) bits.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  return bits;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("zero noise reproduces the closed-prefix sum exactly") {
  for (std::int64_t n : {6, 17, 40, 64}) {
    int kmax = ceil_log2(n) - 1;
    for (int k = 1; k <= std::min(kmax, 3); ++k) {
      TreePlan plan = csdp::build_plan(n, k);
      std::vector<double> bits = random_bits(n, 1000 + static_cast<std::uint64_t>(n));
      ProcessResult res = process_stream(bits, plan, zero_noise(),
                                         PrivacyParams{1.0, 0.01}, 9);
      double prefix = 0.0;
      std::vector<double> cumulative;
      for (double b : bits) {
        prefix += b;
        cumulative.push_back(prefix);
      }
      for (std::int64_t t = 1; t <= n; ++t) {
        std::int64_t closed = plan.t_closed(t);
        double expect = closed == 0 ? 0.0 : cumulative[static_cast<std::size_t>(closed - 1)];
        CHECK(res.outputs[static_cast<std::size_t>(t - 1)] == expect);
      }
    }
  }
}

TEST_CASE("zero noise in binary mode, including the padded tail") {
  for (std::int64_t n : {5, 12, 16, 21}) {
    TreePlan plan = csdp::build_binary_plan(n);
    std::vector<double> bits = random_bits(n, 77 + static_cast<std::uint64_t>(n));
    ProcessResult res = process_stream(bits, plan, zero_noise(),
                                       PrivacyParams{1.0, 0.01}, 4);
    double prefix = 0.0;
    for (std::int64_t t = 1; t <= n; ++t) {
      prefix += bits[static_cast<std::size_t>(t - 1)];
      std::int64_t closed = plan.t_closed(t);
      double expect = 0.0;
      for (std::int64_t s = 1; s <= closed && s <= n; ++s) expect += bits[static_cast<std::size_t>(s - 1)];
      CHECK(res.outputs[static_cast<std::size_t>(t - 1)] == expect);
    }
  }
}

TEST_CASE("all-ones stream has max error exactly low_degree - 1 at zero noise") {
  for (std::int64_t n : {9, 27, 50, 100}) {
    int kmax = ceil_log2(n) - 1;
    for (int k = 1; k <= std::min(kmax, 3); ++k) {
      TreePlan plan = csdp::build_plan(n, k);
      std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
      ProcessResult res = process_stream(ones, plan, zero_noise(),
                                         PrivacyParams{1.0, 0.01}, 3);
      CHECK(res.max_abs_error == static_cast<double>(plan.low_degree - 1));
    }
  }
}

TEST_CASE("published cover matches vstar at every step") {
  TreePlan plan = csdp::build_plan(48, 2);
  CstaEstimator est(plan, zero_noise(), PrivacyParams{1.0, 0.01}, 21);
  for (std::int64_t t = 1; t <= plan.horizon; ++t) {
    est.step(1.0);
    std::vector<std::uint64_t> expect = csdp::vstar(plan, t);
    CHECK(est.cover() == expect);
    CHECK(est.cover_size() == expect.size());
    CHECK(est.closed_prefix() == plan.t_closed(t));
  }
}

TEST_CASE("output is held constant between batch closes") {
  // Noisy mode: the published value must not move unless a batch closed
  TreePlan plan = csdp::build_plan(36, 2);
  MechanismPolicy policy;
  policy.kind = MechanismKind::kOracle;
  policy.oracle_constant = 1.0;
  CstaEstimator est(plan, policy, PrivacyParams{1.0, 0.01}, 77);
  double last = 0.0;
  std::int64_t last_closed = 0;
  StreamRng bits(6);
  for (std::int64_t t = 1; t <= plan.horizon; ++t) {
    double y = est.step(bits.bernoulli(0.5) ? 1.0 : 0.0)[0];
    if (est.closed_prefix() == last_closed) {
      CHECK(y == last);
    }
    last = y;
    last_closed = est.closed_prefix();
  }
}

TEST_CASE("output variance bound sums the cover contributions") {
  MechanismPolicy policy;
  policy.kind = MechanismKind::kOracle;
  policy.oracle_fixed_variance = 2.5;
  TreePlan plan = csdp::build_plan(32, 2);
  CstaEstimator est(plan, policy, PrivacyParams{1.0, 0.01}, 8);
  for (std::int64_t t = 1; t <= plan.horizon; ++t) {
    est.step(0.0);
    CHECK(est.output_variance_bound() ==
          doctest::Approx(2.5 * static_cast<double>(est.cover_size())).epsilon(1e-12));
  }
}

TEST_CASE("process_stream instruments errors faithfully") {
  TreePlan plan = csdp::build_plan(30, 1);
  std::vector<double> bits = random_bits(30, 5);
  MechanismPolicy policy;
  policy.kind = MechanismKind::kOracle;
  policy.oracle_constant = 0.5;
  ProcessResult res = process_stream(bits, plan, policy, PrivacyParams{1.0, 0.01}, 66);
  REQUIRE(res.outputs.size() == 30);
  double truth = 0.0;
  double max_err = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    truth += bits[i];
    CHECK(res.true_prefix[i] == truth);
    CHECK(res.abs_error[i] == std::abs(res.outputs[i] - truth));
    max_err = std::max(max_err, res.abs_error[i]);
  }
  CHECK(res.max_abs_error == max_err);
}

TEST_CASE("process_stream validates its input") {
  TreePlan plan = csdp::build_plan(10, 1);
  std::vector<double> short_stream(5, 0.0);
  CHECK_THROWS_AS(process_stream(short_stream, plan, zero_noise(),
                                 PrivacyParams{1.0, 0.01}, 1),
                  csdp::InvalidArgument);
  std::vector<double> out_of_range(10, 0.0);
  out_of_range[3] = 1.5;
  CHECK_THROWS_AS(process_stream(out_of_range, plan, zero_noise(),
                                 PrivacyParams{1.0, 0.01}, 1),
                  csdp::InvalidArgument);
}

TEST_CASE("stepping past the horizon is a protocol violation") {
  TreePlan plan = csdp::build_plan(8, 1);
  CstaEstimator est(plan, zero_noise(), PrivacyParams{1.0, 0.01}, 2);
  for (std::int64_t t = 1; t <= plan.padded_horizon; ++t) est.step(0.0);
  CHECK_THROWS_AS(est.step(0.0), csdp::ProtocolViolation);
}

TEST_CASE("finish pads binary plans so every node closes") {
  TreePlan plan = csdp::build_binary_plan(11);  // padded to 16
  CstaEstimator est(plan, zero_noise(), PrivacyParams{1.0, 0.01}, 2);
  for (std::int64_t t = 1; t <= 11; ++t) est.step(1.0);
  est.finish();
  CHECK(est.time() == plan.padded_horizon);
  CHECK(est.runtime().all_inactive());
  CHECK(est.runtime().transcript().size() == plan.nodes.size());
  // the padded tail contributes zeros: the final output is the true sum
  CHECK(est.current_output()[0] == 11.0);
}

TEST_CASE("error_profile returns the conservative upper quantile") {
  std::vector<double> errs;
  for (int i = 1; i <= 200; ++i) errs.push_back(static_cast<double>(i));
  StreamRng rng(4);
  for (std::size_t i = errs.size(); i > 1; --i) {
    std::swap(errs[i - 1], errs[rng.uniform_int(i)]);
  }
  // rank ceil(0.9 * 200) = 180
  CHECK(csdp::error_profile(errs, 0.1) == 180.0);
  // rank ceil(0.95 * 200) = 190
  CHECK(csdp::error_profile(errs, 0.05) == 190.0);

  std::vector<double> too_few(99, 1.0);
  CHECK_THROWS_AS(csdp::error_profile(too_few, 0.1), csdp::InvalidArgument);
  std::vector<double> enough(100, 1.0);
  CHECK_THROWS_AS(csdp::error_profile(enough, 0.0), csdp::InvalidArgument);
  CHECK_THROWS_AS(csdp::error_profile(enough, 1.0), csdp::InvalidArgument);
}

}  // TEST_SUITE
