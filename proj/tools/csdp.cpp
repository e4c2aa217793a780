// Command-line front end for the sum and bandit experiment harness.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "csdp/errors.hpp"
#include "csdp/hard_inputs.hpp"
#include "csdp/harness.hpp"
#include "csdp/mechanisms.hpp"
#include "csdp/privacy.hpp"
#include "csdp/rng.hpp"
#include "csdp/shuffle_runtime.hpp"

namespace {

int report_failures(const csdp::SweepOutcome& outcome) {
  for (const std::string& f : outcome.failures) std::cerr << "error: " << f << "\n";
  std::cerr << outcome.cells_total - outcome.cells_failed << "/" << outcome.cells_total
            << " cells completed\n";
  return outcome.cells_failed == 0 ? 0 : 1;
}

int run_mechanism_test(const std::string& kind_name, std::int64_t m, double eps, double delta,
                       int trials, int dim, std::uint64_t seed) {
  csdp::MechanismSpec spec;
  spec.kind = csdp::mechanism_kind_from_string(kind_name);
  spec.batch_size = m;
  spec.budget = csdp::PrivacyParams{eps, delta};
  spec.dimension = dim;
  if (spec.kind == csdp::MechanismKind::kOracle) {
    spec.oracle_variance = std::log(1.0 / delta) / (eps * eps);
  }

  // One fresh mechanism per trial, fed a seeded batch; the empirical moments
  // of (estimate - true sum) are compared against the stated variance bound.
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(trials) * static_cast<std::size_t>(dim));
  double gamma = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    csdp::StreamRng input_rng = csdp::StreamRng::derive(seed, 2 * trial + 1);
    std::uint64_t mech_seed = csdp::StreamRng::derive(seed, 2 * trial + 2).next_u64();
    csdp::MechanismInstance mech(static_cast<std::uint64_t>(trial), spec, mech_seed);
    gamma = mech.gamma();

    std::vector<double> truth(static_cast<std::size_t>(dim), 0.0);
    std::vector<csdp::Message> transcript;
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (std::int64_t user = 0; user < m; ++user) {
      if (dim == 1) {
        x[0] = input_rng.bernoulli(0.5) ? 1.0 : 0.0;
      } else {
        double norm2 = 0.0;
        for (double& c : x) {
          c = 2.0 * input_rng.uniform() - 1.0;
          norm2 += c * c;
        }
        double norm = std::sqrt(norm2);
        if (norm > 1.0) {
          for (double& c : x) c /= norm;
        }
      }
      for (int c = 0; c < dim; ++c) truth[static_cast<std::size_t>(c)] += x[static_cast<std::size_t>(c)];
      mech.encode_user(x, &transcript);
    }
    csdp::shuffle_messages(&transcript, mech.rng());
    csdp::SumEstimate est = mech.decode(transcript);
    for (int c = 0; c < dim; ++c) {
      errors.push_back(est.value[static_cast<std::size_t>(c)] -
                       truth[static_cast<std::size_t>(c)]);
    }
    if (trial == 0) {
      std::printf("variance_bound=%s\n", csdp::format_double(est.variance_bound).c_str());
    }
  }

  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  var /= static_cast<double>(errors.size());
  double stderr_mean = std::sqrt(var / static_cast<double>(errors.size()));

  std::printf("kind=%s m=%lld eps=%s delta=%s trials=%d dim=%d\n", kind_name.c_str(),
              static_cast<long long>(m), csdp::format_double(eps).c_str(),
              csdp::format_double(delta).c_str(), trials, dim);
  std::printf("gamma=%s\n", csdp::format_double(gamma).c_str());
  std::printf("mean_error=%s stderr=%s\n", csdp::format_double(mean).c_str(),
              csdp::format_double(stderr_mean).c_str());
  std::printf("empirical_variance=%s\n", csdp::format_double(var).c_str());
  return 0;
}

int run_hard_input(std::int64_t n, int k, double eps, std::uint64_t seed,
                   const std::string& out_path) {
  csdp::HardDistParams params;
  params.n = n;
  params.k = k;
  params.epsilon = eps;
  csdp::validate_hard_params(params);

  csdp::StreamRng rng(seed);
  csdp::HardStream stream = csdp::sample_hard_stream(params, rng);

  nlohmann::json j;
  j["n"] = params.n;
  j["k"] = params.k;
  j["epsilon"] = params.epsilon;
  j["seed"] = seed;
  j["block_len"] = stream.block_len;
  j["prefix_len"] = stream.prefix_len;
  j["prefix_bit"] = stream.prefix_bit;
  j["bits"] = stream.bits;
  j["fresh_positions"] = stream.fresh_positions;
  j["valid"] = csdp::validate_hard_stream(stream, params);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open output file: " << out_path << "\n";
    return 1;
  }
  out << j.dump(2) << "\n";
  std::printf("wrote %zu bits (%zu fresh) to %s\n", stream.bits.size(),
              stream.fresh_positions.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"private continual summation experiments"};
  app.require_subcommand(1);

  std::uint64_t cli_seed = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", cli_seed, "override the config seed / set the run seed");
  std::string dump_transcript;
  app.add_option("--dump-transcript", dump_transcript,
                 "write the first run's message transcript (JSONL) to this path");
  app.fallthrough();

  std::string sum_config;
  CLI::App* sum = app.add_subcommand("sum-sweep", "run a private-summation sweep from JSON config");
  sum->add_option("--config", sum_config, "path to JSON config")->required();

  std::string bandit_config;
  CLI::App* bandit =
      app.add_subcommand("bandit-sweep", "run a private bandit sweep from JSON config");
  bandit->add_option("--config", bandit_config, "path to JSON config")->required();

  std::string mt_kind = "binary-blanket";
  std::int64_t mt_m = 100;
  double mt_eps = 1.0;
  double mt_delta = 0.01;
  int mt_trials = 1000;
  int mt_dim = 1;
  CLI::App* mt = app.add_subcommand("mechanism-test",
                                    "Monte Carlo bias/variance check for one mechanism");
  mt->add_option("--kind", mt_kind, "binary-blanket | vector-fixedpoint | oracle");
  mt->add_option("--m", mt_m, "batch size")->required();
  mt->add_option("--eps", mt_eps, "epsilon")->required();
  mt->add_option("--delta", mt_delta, "delta")->required();
  mt->add_option("--trials", mt_trials, "number of independent batches");
  mt->add_option("--dim", mt_dim, "input dimension (vector kind)");

  std::int64_t hi_n = 0;
  int hi_k = 1;
  double hi_eps = 1.0;
  std::uint64_t hi_seed = 1;
  std::string hi_out;
  CLI::App* hi = app.add_subcommand("hard-input",
                                    "sample an adversarial input stream and its generation record");
  hi->add_option("--n", hi_n, "stream length")->required();
  hi->add_option("--k", hi_k, "concurrency level the stream targets")->required();
  hi->add_option("--eps", hi_eps, "epsilon")->required();
  hi->add_option("--seed", hi_seed, "sampling seed");
  hi->add_option("--out", hi_out, "output JSON path")->required();

  std::string fit_csv;
  bool fit_median = false;
  CLI::App* fit = app.add_subcommand("fit-scaling",
                                     "fit log-log error scaling from a sum-sweep CSV");
  fit->add_option("--csv", fit_csv, "path to a sum-sweep CSV")->required();
  fit->add_flag("--use-median", fit_median, "aggregate per-n errors by median instead of mean");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sum->parsed()) {
      csdp::SumSweepConfig cfg = csdp::load_sum_sweep_config(sum_config);
      if (seed_opt->count() > 0) cfg.seed = cli_seed;
      if (!dump_transcript.empty()) cfg.dump_transcript = dump_transcript;
      csdp::SweepOutcome outcome = csdp::run_sum_sweep(cfg);
      std::printf("wrote %s\n", cfg.out.c_str());
      return report_failures(outcome);
    }
    if (bandit->parsed()) {
      csdp::BanditSweepConfig cfg = csdp::load_bandit_sweep_config(bandit_config);
      if (seed_opt->count() > 0) cfg.seed = cli_seed;
      csdp::SweepOutcome outcome = csdp::run_bandit_sweep(cfg);
      std::printf("wrote %s\n", cfg.out.c_str());
      return report_failures(outcome);
    }
    if (mt->parsed()) {
      std::uint64_t seed = seed_opt->count() > 0 ? cli_seed : 1;
      return run_mechanism_test(mt_kind, mt_m, mt_eps, mt_delta, mt_trials, mt_dim, seed);
    }
    if (hi->parsed()) {
      if (hi->count("--seed") == 0 && seed_opt->count() > 0) hi_seed = cli_seed;
      return run_hard_input(hi_n, hi_k, hi_eps, hi_seed, hi_out);
    }
    if (fit->parsed()) {
      std::vector<csdp::FitResult> fits = csdp::fit_scaling(fit_csv, fit_median);
      for (const csdp::FitResult& f : fits) {
        std::printf("k=%d slope=%s stderr=%s intercept=%s points=%zu\n", f.k,
                    csdp::format_double(f.slope).c_str(),
                    csdp::format_double(f.stderr_slope).c_str(),
                    csdp::format_double(f.intercept).c_str(), f.points);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
