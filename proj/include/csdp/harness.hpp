#ifndef CSDP_HARNESS_HPP
#define CSDP_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csdp/mechanisms.hpp"

namespace csdp {

// Experiment configs are loaded from JSON files. Unknown keys are rejected so
// a typo in a config fails loudly instead of silently running defaults.

struct SumSweepConfig {
  std::vector<std::int64_t> n;
  std::vector<int> k;  // ignored when binary_mode is set
  std::vector<double> epsilon;
  std::vector<double> delta;
  std::vector<MechanismKind> mechanism;
  bool binary_mode = false;
  // "ones", "uniform" (seeded fair bits), or "hard" (adversarial stream
  // matched to the cell's n, k, epsilon).
  std::string input_family = "uniform";
  int trials = 1;
  // Explicit per-trial seeds; when empty, trial seeds are derived from
  // `seed` and the cell index. Explicit seeds are shared across cells,
  // which gives common random numbers for paired comparisons.
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 1;
  double beta = 0.1;  // quantile level for the alpha_hat column
  double oracle_constant = 1.0;
  double oracle_fixed_variance = -1.0;
  int workers = 0;  // 0 picks the hardware thread count
  std::string out;
  std::string trace_out;        // optional per-time CSV
  std::string dump_transcript;  // optional JSONL transcript of the first run
};

struct BanditSweepConfig {
  std::vector<std::int64_t> n;
  std::vector<int> k;
  std::vector<double> epsilon;
  std::vector<double> delta;
  bool binary_mode = false;
  MechanismKind kind = MechanismKind::kOracle;
  double oracle_constant = 1.0;
  double oracle_fixed_variance = -1.0;
  double sigma = 0.0;
  Eigen::VectorXd theta_star;
  std::vector<Eigen::VectorXd> actions;
  std::string context_mode = "fixed";  // "fixed" or "seeded-random"
  double sigma_prime_scale = 1.0;
  double sigma_prime_override = -1.0;
  double lambda_min = 1.0;
  double alpha_conf = -1.0;  // <= 0 means 1/n
  int trials = 1;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out;
  std::string trace_out;  // optional per-time CSV
};

// Reads and parses the JSON file; dispatch on the "experiment" key is the
// caller's job (see experiment_kind).
std::string experiment_kind(const std::string& config_path);
SumSweepConfig load_sum_sweep_config(const std::string& config_path);
BanditSweepConfig load_bandit_sweep_config(const std::string& config_path);

struct SweepOutcome {
  std::size_t cells_total = 0;
  std::size_t cells_failed = 0;
  std::vector<std::string> failures;  // "cell <id>: <message>" per failure
};

// Runs every grid cell (n x k x epsilon x delta x mechanism) for the
// configured trials and writes one CSV row per trial:
//   n,k,eps,mechanism,trial,max_error,alpha_hat
// alpha_hat is the cell-level (1-beta) quantile of max_error, repeated on
// each of the cell's rows; it needs at least 100 trials and is written as
// nan below that. Cells run on a worker pool but rows are merged in grid
// order, so the output bytes are a pure function of the config.
SweepOutcome run_sum_sweep(const SumSweepConfig& config);

// One CSV row per (cell, seed):
//   n,k,eps,seed,final_regret,sigma_prime,lambda,violations
SweepOutcome run_bandit_sweep(const BanditSweepConfig& config);

struct FitResult {
  int k = 0;
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;  // distinct n entering the fit
};

// Log-log least squares of the per-n aggregate max_error against n, one fit
// per k found in a sum-sweep CSV. Aggregation is the mean by default, the
// median with use_median. Throws FitUndefined when a k has fewer than 4
// distinct n, a nonpositive aggregate, or constant data.
std::vector<FitResult> fit_scaling(const std::string& csv_path,
                                   bool use_median = false);

// Shared CSV number formatting ("%.12g"), exposed so tests can pin the
// byte-level output contract.
std::string format_double(double value);

}  // namespace csdp

#endif  // CSDP_HARNESS_HPP
