#include "csdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "csdp/bandit.hpp"
#include "csdp/errors.hpp"
#include "csdp/estimator.hpp"
#include "csdp/hard_inputs.hpp"
#include "csdp/privacy.hpp"
#include "csdp/rng.hpp"
#include "csdp/shuffle_runtime.hpp"
#include "csdp/tree_plan.hpp"

namespace csdp {

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown config key: \"" + it.key() + "\"");
    }
  }
}

const json& require_key(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing required config key: \"" + key + "\"");
  return j.at(key);
}

std::vector<std::int64_t> int_list(const json& j, const std::string& key) {
  const json& v = require_key(j, key);
  if (!v.is_array() || v.empty()) {
    throw ConfigError("\"" + key + "\" must be a nonempty array");
  }
  std::vector<std::int64_t> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw ConfigError("\"" + key + "\" entries must be integers");
    }
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

std::vector<double> double_list(const json& j, const std::string& key) {
  const json& v = require_key(j, key);
  if (!v.is_array() || v.empty()) {
    throw ConfigError("\"" + key + "\" must be a nonempty array");
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigError("\"" + key + "\" entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

double get_double(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("\"" + key + "\" must be a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("\"" + key + "\" must be an integer");
  return v.get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("\"" + key + "\" must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("\"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::uint64_t get_seed(const json& j, const std::string& key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    throw ConfigError("\"" + key + "\" must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

int ceil_log2(std::int64_t n) {
  int level = 0;
  std::int64_t width = 1;
  while (width < n) {
    width *= 2;
    ++level;
  }
  return level;
}

void check_grid_feasible(const std::vector<std::int64_t>& ns, const std::vector<int>& ks,
                         bool binary_mode) {
  for (std::int64_t n : ns) {
    if (binary_mode) {
      if (n < 3) throw ConfigError("binary_mode needs n >= 3, got n=" + std::to_string(n));
      continue;
    }
    if (n < 2) throw ConfigError("n must be >= 2, got n=" + std::to_string(n));
    for (int k : ks) {
      if (k < 1 || k > ceil_log2(n) - 1) {
        throw ConfigError("infeasible cell: k=" + std::to_string(k) +
                          " is outside [1, ceil(log2 n)-1] for n=" + std::to_string(n));
      }
    }
  }
}

void check_budget_grid(const std::vector<double>& eps, const std::vector<double>& delta) {
  for (double e : eps) {
    for (double d : delta) {
      try {
        validate_budget(PrivacyParams{e, d});
      } catch (const InvalidArgument& err) {
        throw ConfigError(err.what());
      }
    }
  }
}

// When "seeds" is present, trials = seeds.size() and "trials" must be absent.
void parse_trials(const json& j, int* trials, std::vector<std::uint64_t>* seeds) {
  if (j.contains("seeds")) {
    if (j.contains("trials")) {
      throw ConfigError("give either \"trials\" or \"seeds\", not both");
    }
    const json& v = j.at("seeds");
    if (!v.is_array() || v.empty()) throw ConfigError("\"seeds\" must be a nonempty array");
    std::set<std::uint64_t> distinct;
    for (const json& e : v) {
      if (!e.is_number_integer()) throw ConfigError("\"seeds\" entries must be integers");
      std::uint64_t s = e.get<std::uint64_t>();
      if (!distinct.insert(s).second) {
        throw ConfigError("\"seeds\" entries must be distinct");
      }
      seeds->push_back(s);
    }
    *trials = static_cast<int>(seeds->size());
    return;
  }
  *trials = get_int(j, "trials", 1);
  if (*trials < 1) throw ConfigError("\"trials\" must be >= 1");
}

MechanismKind parse_kind(const std::string& name) {
  try {
    return mechanism_kind_from_string(name);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t trial_seed(std::uint64_t master, const std::vector<std::uint64_t>& seeds,
                         std::size_t cell_index, int trial) {
  if (!seeds.empty()) return seeds[static_cast<std::size_t>(trial)];
  std::uint64_t cell_key = StreamRng::derive(master, cell_index + 1).next_u64();
  return StreamRng::derive(cell_key, static_cast<std::uint64_t>(trial) + 1).next_u64();
}

// Work items: per-cell results computed off the main thread, merged in grid
// order afterwards so output bytes never depend on scheduling.
struct CellResult {
  std::vector<std::string> rows;
  std::vector<std::string> trace_rows;
  std::string transcript_text;  // first cell only, when a dump was requested
  std::string error;
};

void run_pool(std::size_t cells, int workers, const std::function<void(std::size_t)>& work) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t count = workers > 0 ? static_cast<std::size_t>(workers) : hw;
  count = std::min(count, cells);
  if (count <= 1) {
    for (std::size_t i = 0; i < cells; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto loop = [&]() {
    for (std::size_t i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) work(i);
  };
  std::vector<std::thread> threads;
  threads.reserve(count);
  for (std::size_t w = 0; w < count; ++w) threads.emplace_back(loop);
  for (std::thread& t : threads) t.join();
}

struct SumCell {
  std::int64_t n = 0;
  int k = 0;  // requested levels; unused in binary mode
  double eps = 0.0;
  double delta = 0.0;
  MechanismKind mech = MechanismKind::kOracle;
};

std::string sum_cell_id(const SumCell& c, bool binary_mode) {
  std::ostringstream os;
  os << "n=" << c.n << ",k=" << (binary_mode ? std::string("binary") : std::to_string(c.k))
     << ",eps=" << format_double(c.eps) << ",delta=" << format_double(c.delta)
     << ",mechanism=" << to_string(c.mech);
  return os.str();
}

std::vector<double> make_stream(const std::string& family, std::int64_t horizon, int k_eff,
                                double eps, std::uint64_t tseed) {
  std::vector<double> stream;
  stream.reserve(static_cast<std::size_t>(horizon));
  if (family == "ones") {
    stream.assign(static_cast<std::size_t>(horizon), 1.0);
    return stream;
  }
  StreamRng rng = StreamRng::derive(tseed, 1);
  if (family == "uniform") {
    for (std::int64_t t = 0; t < horizon; ++t) {
      stream.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    }
    return stream;
  }
  // "hard": the adversarial repetition stream matched to this cell.
  HardDistParams params;
  params.n = horizon;
  params.k = k_eff;
  params.epsilon = eps;
  HardStream hs = sample_hard_stream(params, rng);
  for (int b : hs.bits) stream.push_back(static_cast<double>(b));
  return stream;
}

CellResult run_sum_cell(const SumSweepConfig& cfg, const SumCell& cell, std::size_t cell_index) {
  CellResult out;
  try {
    TreePlan plan =
        cfg.binary_mode ? build_binary_plan(cell.n) : build_plan(cell.n, cell.k);
    int k_eff = plan.requested_levels;
    MechanismPolicy policy;
    policy.kind = cell.mech;
    policy.dimension = 1;
    policy.oracle_constant = cfg.oracle_constant;
    policy.oracle_fixed_variance = cfg.oracle_fixed_variance;
    PrivacyParams budget{cell.eps, cell.delta};

    bool want_transcript = cell_index == 0 && !cfg.dump_transcript.empty();
    bool want_trace = !cfg.trace_out.empty();

    std::vector<double> max_errors;
    max_errors.reserve(static_cast<std::size_t>(cfg.trials));
    for (int trial = 0; trial < cfg.trials; ++trial) {
      std::uint64_t tseed = trial_seed(cfg.seed, cfg.seeds, cell_index, trial);
      std::vector<double> stream =
          make_stream(cfg.input_family, plan.horizon, k_eff, cell.eps, tseed);
      std::uint64_t run_seed = StreamRng::derive(tseed, 2).next_u64();

      std::vector<TranscriptRecord> transcript;
      ProcessResult res =
          process_stream(stream, plan, policy, budget, run_seed,
                         want_transcript && trial == 0 ? &transcript : nullptr);
      max_errors.push_back(res.max_abs_error);

      if (want_transcript && trial == 0) {
        std::ostringstream ts;
        write_transcript_jsonl(transcript, ts);
        out.transcript_text = ts.str();
      }
      if (want_trace) {
        std::string run_id = std::to_string(cell.n) + ":" + std::to_string(k_eff) + ":" +
                             format_double(cell.eps) + ":" + to_string(cell.mech) + ":" +
                             std::to_string(trial);
        for (std::size_t i = 0; i < res.outputs.size(); ++i) {
          out.trace_rows.push_back(run_id + "," + std::to_string(i + 1) + "," +
                                   format_double(res.outputs[i]) + "," +
                                   format_double(res.true_prefix[i]) + "," +
                                   format_double(res.abs_error[i]));
        }
      }
    }

    double alpha_hat = std::numeric_limits<double>::quiet_NaN();
    if (cfg.trials >= 100) alpha_hat = error_profile(max_errors, cfg.beta);
    std::string alpha_text = format_double(alpha_hat);

    for (int trial = 0; trial < cfg.trials; ++trial) {
      out.rows.push_back(std::to_string(cell.n) + "," + std::to_string(k_eff) + "," +
                         format_double(cell.eps) + "," + to_string(cell.mech) + "," +
                         std::to_string(trial) + "," +
                         format_double(max_errors[static_cast<std::size_t>(trial)]) + "," +
                         alpha_text);
    }
  } catch (const std::exception& e) {
    out.rows.clear();
    out.trace_rows.clear();
    out.error = e.what();
  }
  return out;
}

struct BanditCell {
  std::int64_t n = 0;
  int k = 0;
  double eps = 0.0;
  double delta = 0.0;
};

std::string bandit_cell_id(const BanditCell& c, bool binary_mode) {
  std::ostringstream os;
  os << "n=" << c.n << ",k=" << (binary_mode ? std::string("binary") : std::to_string(c.k))
     << ",eps=" << format_double(c.eps) << ",delta=" << format_double(c.delta);
  return os.str();
}

CellResult run_bandit_cell(const BanditSweepConfig& cfg, const BanditCell& cell,
                           std::size_t cell_index) {
  CellResult out;
  try {
    int k_eff = cfg.binary_mode ? build_binary_plan(cell.n).requested_levels : cell.k;

    BanditInstance instance;
    instance.theta_star = cfg.theta_star;
    instance.actions = cfg.actions;
    instance.context_mode = cfg.context_mode == "seeded-random" ? ContextMode::kSeededRandom
                                                                : ContextMode::kFixed;
    instance.sigma = cfg.sigma;

    BanditConfig bc;
    bc.n = cell.n;
    bc.k = cfg.binary_mode ? 1 : cell.k;
    bc.binary_mode = cfg.binary_mode;
    bc.budget = PrivacyParams{cell.eps, cell.delta};
    bc.kind = cfg.kind;
    bc.oracle_constant = cfg.oracle_constant;
    bc.oracle_fixed_variance = cfg.oracle_fixed_variance;
    bc.sigma_prime_scale = cfg.sigma_prime_scale;
    bc.sigma_prime_override = cfg.sigma_prime_override;
    bc.lambda_min = cfg.lambda_min;
    bc.alpha_conf = cfg.alpha_conf;

    bool want_trace = !cfg.trace_out.empty();
    for (int trial = 0; trial < cfg.trials; ++trial) {
      std::uint64_t tseed = trial_seed(cfg.seed, cfg.seeds, cell_index, trial);
      RegretTrace trace = run_bandit(instance, bc, tseed);
      RegularityReport report = regularity_diagnostics(trace);
      out.rows.push_back(std::to_string(cell.n) + "," + std::to_string(k_eff) + "," +
                         format_double(cell.eps) + "," + std::to_string(tseed) + "," +
                         format_double(trace.final_regret) + "," +
                         format_double(trace.sigma_prime) + "," +
                         format_double(trace.lambda) + "," + std::to_string(report.violations));
      if (want_trace) {
        std::string run_id = std::to_string(cell.n) + ":" + std::to_string(k_eff) + ":" +
                             format_double(cell.eps) + ":" + std::to_string(tseed);
        for (std::size_t i = 0; i < trace.actions.size(); ++i) {
          out.trace_rows.push_back(run_id + "," + std::to_string(i + 1) + "," +
                                   std::to_string(trace.actions[i]) + "," +
                                   format_double(trace.rewards[i]) + "," +
                                   format_double(trace.inst_regret[i]) + "," +
                                   format_double(trace.cum_regret[i]));
        }
      }
    }
  } catch (const std::exception& e) {
    out.rows.clear();
    out.trace_rows.clear();
    out.error = e.what();
  }
  return out;
}

Eigen::VectorXd parse_vector(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("\"" + key + "\" must be a nonempty array of numbers");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError("\"" + key + "\" entries must be numbers");
    }
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.12g", value);
  return buffer;
}

std::string experiment_kind(const std::string& config_path) {
  json j = load_json_file(config_path);
  const json& v = require_key(j, "experiment");
  if (!v.is_string()) throw ConfigError("\"experiment\" must be a string");
  return v.get<std::string>();
}

SumSweepConfig load_sum_sweep_config(const std::string& config_path) {
  json j = load_json_file(config_path);
  reject_unknown_keys(j, {"experiment", "n", "k", "epsilon", "delta", "mechanism",
                          "binary_mode", "input_family", "trials", "seeds", "seed", "beta",
                          "oracle_constant", "oracle_fixed_variance", "workers", "out",
                          "trace_out", "dump_transcript"});
  if (get_string(j, "experiment", "") != "sum-sweep") {
    throw ConfigError("\"experiment\" must be \"sum-sweep\"");
  }

  SumSweepConfig cfg;
  cfg.binary_mode = get_bool(j, "binary_mode", false);
  cfg.n = int_list(j, "n");
  if (cfg.binary_mode) {
    if (j.contains("k")) {
      throw ConfigError("\"k\" must be omitted when binary_mode is true (it is set by n)");
    }
  } else {
    cfg.k.clear();
    for (std::int64_t k : int_list(j, "k")) cfg.k.push_back(static_cast<int>(k));
  }
  cfg.epsilon = double_list(j, "epsilon");
  cfg.delta = double_list(j, "delta");
  check_grid_feasible(cfg.n, cfg.k, cfg.binary_mode);
  check_budget_grid(cfg.epsilon, cfg.delta);

  const json& mechs = require_key(j, "mechanism");
  if (!mechs.is_array() || mechs.empty()) {
    throw ConfigError("\"mechanism\" must be a nonempty array of kind names");
  }
  for (const json& m : mechs) {
    if (!m.is_string()) throw ConfigError("\"mechanism\" entries must be strings");
    cfg.mechanism.push_back(parse_kind(m.get<std::string>()));
  }

  cfg.input_family = get_string(j, "input_family", "uniform");
  if (cfg.input_family != "ones" && cfg.input_family != "uniform" &&
      cfg.input_family != "hard") {
    throw ConfigError("\"input_family\" must be one of: ones, uniform, hard");
  }
  parse_trials(j, &cfg.trials, &cfg.seeds);
  cfg.seed = get_seed(j, "seed", 1);
  cfg.beta = get_double(j, "beta", 0.1);
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) throw ConfigError("\"beta\" must lie in (0, 1)");
  cfg.oracle_constant = get_double(j, "oracle_constant", 1.0);
  cfg.oracle_fixed_variance = get_double(j, "oracle_fixed_variance", -1.0);
  cfg.workers = get_int(j, "workers", 0);
  if (cfg.workers < 0) throw ConfigError("\"workers\" must be >= 0");
  cfg.out = get_string(j, "out", "");
  if (cfg.out.empty()) throw ConfigError("missing required config key: \"out\"");
  cfg.trace_out = get_string(j, "trace_out", "");
  cfg.dump_transcript = get_string(j, "dump_transcript", "");
  return cfg;
}

BanditSweepConfig load_bandit_sweep_config(const std::string& config_path) {
  json j = load_json_file(config_path);
  reject_unknown_keys(j, {"experiment", "n", "k", "epsilon", "delta", "binary_mode",
                          "mechanism", "oracle_constant", "oracle_fixed_variance", "sigma",
                          "theta_star", "actions", "context_mode", "sigma_prime_scale",
                          "sigma_prime_override", "lambda_min", "alpha_conf", "trials",
                          "seeds", "seed", "workers", "out", "trace_out"});
  if (get_string(j, "experiment", "") != "bandit-sweep") {
    throw ConfigError("\"experiment\" must be \"bandit-sweep\"");
  }

  BanditSweepConfig cfg;
  cfg.binary_mode = get_bool(j, "binary_mode", false);
  cfg.n = int_list(j, "n");
  if (cfg.binary_mode) {
    if (j.contains("k")) {
      throw ConfigError("\"k\" must be omitted when binary_mode is true (it is set by n)");
    }
  } else {
    for (std::int64_t k : int_list(j, "k")) cfg.k.push_back(static_cast<int>(k));
  }
  cfg.epsilon = double_list(j, "epsilon");
  cfg.delta = double_list(j, "delta");
  check_grid_feasible(cfg.n, cfg.k, cfg.binary_mode);
  check_budget_grid(cfg.epsilon, cfg.delta);

  cfg.kind = parse_kind(get_string(j, "mechanism", "oracle"));
  cfg.oracle_constant = get_double(j, "oracle_constant", 1.0);
  cfg.oracle_fixed_variance = get_double(j, "oracle_fixed_variance", -1.0);
  cfg.sigma = get_double(j, "sigma", 0.0);

  cfg.theta_star = parse_vector(require_key(j, "theta_star"), "theta_star");
  const json& acts = require_key(j, "actions");
  if (!acts.is_array() || acts.empty()) {
    throw ConfigError("\"actions\" must be a nonempty array of feature arrays");
  }
  for (const json& a : acts) {
    Eigen::VectorXd phi = parse_vector(a, "actions");
    if (phi.size() != cfg.theta_star.size()) {
      throw ConfigError("every action must have the same dimension as theta_star");
    }
    cfg.actions.push_back(std::move(phi));
  }

  cfg.context_mode = get_string(j, "context_mode", "fixed");
  if (cfg.context_mode != "fixed" && cfg.context_mode != "seeded-random") {
    throw ConfigError("\"context_mode\" must be \"fixed\" or \"seeded-random\"");
  }
  cfg.sigma_prime_scale = get_double(j, "sigma_prime_scale", 1.0);
  cfg.sigma_prime_override = get_double(j, "sigma_prime_override", -1.0);
  cfg.lambda_min = get_double(j, "lambda_min", 1.0);
  cfg.alpha_conf = get_double(j, "alpha_conf", -1.0);
  parse_trials(j, &cfg.trials, &cfg.seeds);
  cfg.seed = get_seed(j, "seed", 1);
  cfg.workers = get_int(j, "workers", 0);
  if (cfg.workers < 0) throw ConfigError("\"workers\" must be >= 0");
  cfg.out = get_string(j, "out", "");
  if (cfg.out.empty()) throw ConfigError("missing required config key: \"out\"");
  cfg.trace_out = get_string(j, "trace_out", "");

  // Fail at load time, not inside a worker, when the instance itself is bad.
  BanditInstance probe;
  probe.theta_star = cfg.theta_star;
  probe.actions = cfg.actions;
  probe.context_mode = cfg.context_mode == "seeded-random" ? ContextMode::kSeededRandom
                                                           : ContextMode::kFixed;
  probe.sigma = cfg.sigma;
  try {
    validate_instance(probe);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.kind == MechanismKind::kBinaryBlanket && cfg.theta_star.size() != 1) {
    throw ConfigError(
        "mechanism \"binary-blanket\" sums scalars; a " +
        std::to_string(cfg.theta_star.size()) +
        "-dimensional instance needs \"vector-fixedpoint\" or \"oracle\"");
  }
  return cfg;
}

SweepOutcome run_sum_sweep(const SumSweepConfig& config) {
  std::vector<SumCell> cells;
  std::vector<int> k_axis = config.binary_mode ? std::vector<int>{0} : config.k;
  for (std::int64_t n : config.n) {
    for (int k : k_axis) {
      for (double eps : config.epsilon) {
        for (double delta : config.delta) {
          for (MechanismKind mech : config.mechanism) {
            cells.push_back(SumCell{n, k, eps, delta, mech});
          }
        }
      }
    }
  }

  std::vector<CellResult> results(cells.size());
  run_pool(cells.size(), config.workers, [&](std::size_t i) {
    results[i] = run_sum_cell(config, cells[i], i);
  });

  std::ofstream out(config.out, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + config.out);
  out << "n,k,eps,mechanism,trial,max_error,alpha_hat\n";

  std::ofstream trace;
  if (!config.trace_out.empty()) {
    trace.open(config.trace_out, std::ios::binary);
    if (!trace) throw ConfigError("cannot open trace file: " + config.trace_out);
    trace << "run_id,t,y_hat,true_sum,abs_error\n";
  }

  SweepOutcome outcome;
  outcome.cells_total = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& r = results[i];
    if (!r.error.empty()) {
      ++outcome.cells_failed;
      outcome.failures.push_back("cell " + sum_cell_id(cells[i], config.binary_mode) + ": " +
                                 r.error);
      continue;
    }
    for (const std::string& row : r.rows) out << row << '\n';
    for (const std::string& row : r.trace_rows) trace << row << '\n';
    if (!r.transcript_text.empty() && !config.dump_transcript.empty()) {
      std::ofstream ts(config.dump_transcript, std::ios::binary);
      if (!ts) throw ConfigError("cannot open transcript file: " + config.dump_transcript);
      ts << r.transcript_text;
    }
  }
  return outcome;
}

SweepOutcome run_bandit_sweep(const BanditSweepConfig& config) {
  std::vector<BanditCell> cells;
  std::vector<int> k_axis = config.binary_mode ? std::vector<int>{0} : config.k;
  for (std::int64_t n : config.n) {
    for (int k : k_axis) {
      for (double eps : config.epsilon) {
        for (double delta : config.delta) {
          cells.push_back(BanditCell{n, k, eps, delta});
        }
      }
    }
  }

  std::vector<CellResult> results(cells.size());
  run_pool(cells.size(), config.workers, [&](std::size_t i) {
    results[i] = run_bandit_cell(config, cells[i], i);
  });

  std::ofstream out(config.out, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + config.out);
  out << "n,k,eps,seed,final_regret,sigma_prime,lambda,violations\n";

  std::ofstream trace;
  if (!config.trace_out.empty()) {
    trace.open(config.trace_out, std::ios::binary);
    if (!trace) throw ConfigError("cannot open trace file: " + config.trace_out);
    trace << "run_id,t,action,reward,inst_regret,cum_regret\n";
  }

  SweepOutcome outcome;
  outcome.cells_total = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& r = results[i];
    if (!r.error.empty()) {
      ++outcome.cells_failed;
      outcome.failures.push_back("cell " + bandit_cell_id(cells[i], config.binary_mode) +
                                 ": " + r.error);
      continue;
    }
    for (const std::string& row : r.rows) out << row << '\n';
    for (const std::string& row : r.trace_rows) trace << row << '\n';
  }
  return outcome;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::vector<FitResult> fit_scaling(const std::string& csv_path, bool use_median) {
  std::ifstream in(csv_path);
  if (!in) throw InvalidArgument("fit_scaling: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("fit_scaling: empty CSV");
  if (line.rfind("n,k,eps,mechanism,trial,max_error", 0) != 0) {
    throw InvalidArgument("fit_scaling: unexpected CSV header: " + line);
  }

  // k -> n -> all max_error observations
  std::map<int, std::map<std::int64_t, std::vector<double>>> grouped;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() < 6) {
      throw InvalidArgument("fit_scaling: malformed row at line " + std::to_string(line_no));
    }
    try {
      std::int64_t n = std::stoll(f[0]);
      int k = std::stoi(f[1]);
      double err = std::stod(f[5]);
      grouped[k][n].push_back(err);
    } catch (const std::exception&) {
      throw InvalidArgument("fit_scaling: malformed row at line " + std::to_string(line_no));
    }
  }

  std::vector<FitResult> fits;
  for (auto& [k, by_n] : grouped) {
    if (by_n.size() < 4) {
      throw FitUndefined("fit_scaling: k=" + std::to_string(k) + " has only " +
                         std::to_string(by_n.size()) + " distinct n; need at least 4");
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (auto& [n, errs] : by_n) {
      double agg;
      if (use_median) {
        std::sort(errs.begin(), errs.end());
        std::size_t m = errs.size();
        agg = m % 2 == 1 ? errs[m / 2] : 0.5 * (errs[m / 2 - 1] + errs[m / 2]);
      } else {
        double sum = 0.0;
        for (double e : errs) sum += e;
        agg = sum / static_cast<double>(errs.size());
      }
      if (!(agg > 0.0)) {
        throw FitUndefined("fit_scaling: k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                           " has nonpositive aggregate error; log fit undefined");
      }
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(agg));
    }
    double ymin = *std::min_element(ys.begin(), ys.end());
    double ymax = *std::max_element(ys.begin(), ys.end());
    if (ymax - ymin < 1e-12) {
      throw FitUndefined("fit_scaling: k=" + std::to_string(k) +
                         " has constant aggregate error; slope undefined");
    }

    double m = static_cast<double>(xs.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mean_x += xs[i];
      mean_y += ys[i];
    }
    mean_x /= m;
    mean_y /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
      sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
    }
    FitResult fit;
    fit.k = k;
    fit.points = xs.size();
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
      ssr += resid * resid;
    }
    fit.stderr_slope = std::sqrt(ssr / (m - 2.0) / sxx);
    fits.push_back(fit);
  }
  return fits;
}

}  // namespace csdp
