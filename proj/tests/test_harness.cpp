#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "csdp/errors.hpp"
#include "csdp/harness.hpp"

using csdp::ConfigError;
using csdp::FitResult;
using csdp::FitUndefined;
using csdp::format_double;
using csdp::SweepOutcome;
using nlohmann::json;

namespace {

std::filesystem::path test_dir() {
  static std::filesystem::path dir = [] {
    std::filesystem::path p =
        std::filesystem::temp_directory_path() / "csdp-harness-tests";
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_for(const std::string& name) {
  return (test_dir() / name).string();
}

std::string write_file(const std::string& name, const std::string& text) {
  std::string path = path_for(name);
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

json minimal_sum_config(const std::string& out_name) {
  json j;
  j["experiment"] = "sum-sweep";
  j["n"] = {8};
  j["k"] = {1};
  j["epsilon"] = {1.0};
  j["delta"] = {0.01};
  j["mechanism"] = {"oracle"};
  j["out"] = path_for(out_name);
  return j;
}

json minimal_bandit_config(const std::string& out_name) {
  json j;
  j["experiment"] = "bandit-sweep";
  j["n"] = {64};
  j["k"] = {1};
  j["epsilon"] = {1.0};
  j["delta"] = {0.01};
  j["theta_star"] = {0.35, 0.65};
  j["actions"] = {{1.0, 0.0}, {0.0, 1.0}};
  j["out"] = path_for(out_name);
  return j;
}

std::string dump_config(const std::string& name, const json& j) {
  return write_file(name, j.dump(2));
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("format_double pins the CSV number contract") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1e-6) == "1e-06");
  CHECK(format_double(1.0 / 3.0) == "0.333333333333");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("experiment_kind reads the dispatch key") {
  std::string path = dump_config("kind.json", minimal_sum_config("kind.csv"));
  CHECK(csdp::experiment_kind(path) == "sum-sweep");

  std::string no_kind = write_file("no_kind.json", "{\"n\": [8]}");
  CHECK_THROWS_AS(csdp::experiment_kind(no_kind), ConfigError);

  std::string not_json = write_file("bad.json", "this is not json");
  CHECK_THROWS_AS(csdp::experiment_kind(not_json), ConfigError);

  CHECK_THROWS_AS(csdp::experiment_kind(path_for("does_not_exist.json")), ConfigError);
}

TEST_CASE("sum config: defaults and echoes") {
  json j = minimal_sum_config("defaults.csv");
  csdp::SumSweepConfig cfg =
      csdp::load_sum_sweep_config(dump_config("defaults.json", j));
  CHECK(cfg.n == std::vector<std::int64_t>{8});
  CHECK(cfg.k == std::vector<int>{1});
  CHECK(cfg.trials == 1);
  CHECK(cfg.seeds.empty());
  CHECK(cfg.seed == 1);
  CHECK(cfg.beta == 0.1);
  CHECK(cfg.input_family == "uniform");
  CHECK_FALSE(cfg.binary_mode);
  CHECK(cfg.oracle_fixed_variance == -1.0);
  CHECK(cfg.workers == 0);
  CHECK(cfg.trace_out.empty());
}

TEST_CASE("sum config: rejections") {
  auto loads = [](const json& j) {
    static int counter = 0;
    std::string path =
        dump_config("reject" + std::to_string(counter++) + ".json", j);
    return csdp::load_sum_sweep_config(path);
  };

  json typo = minimal_sum_config("r.csv");
  typo["trails"] = 5;
  CHECK_THROWS_AS(loads(typo), ConfigError);

  json both = minimal_sum_config("r.csv");
  both["trials"] = 3;
  both["seeds"] = {1, 2, 3};
  CHECK_THROWS_AS(loads(both), ConfigError);

  json dup = minimal_sum_config("r.csv");
  dup["seeds"] = {7, 7};
  CHECK_THROWS_AS(loads(dup), ConfigError);

  json infeasible = minimal_sum_config("r.csv");
  infeasible["k"] = {3};  // n=8 supports at most k=2
  CHECK_THROWS_AS(loads(infeasible), ConfigError);

  json binary_k = minimal_sum_config("r.csv");
  binary_k["binary_mode"] = true;
  CHECK_THROWS_AS(loads(binary_k), ConfigError);

  json family = minimal_sum_config("r.csv");
  family["input_family"] = "gaussian";
  CHECK_THROWS_AS(loads(family), ConfigError);

  json beta = minimal_sum_config("r.csv");
  beta["beta"] = 1.5;
  CHECK_THROWS_AS(loads(beta), ConfigError);

  json no_out = minimal_sum_config("r.csv");
  no_out.erase("out");
  CHECK_THROWS_AS(loads(no_out), ConfigError);

  json mech = minimal_sum_config("r.csv");
  mech["mechanism"] = {"laplace"};
  CHECK_THROWS_AS(loads(mech), ConfigError);

  json frac = minimal_sum_config("r.csv");
  frac["n"] = {4.5};
  CHECK_THROWS_AS(loads(frac), ConfigError);

  json zero_trials = minimal_sum_config("r.csv");
  zero_trials["trials"] = 0;
  CHECK_THROWS_AS(loads(zero_trials), ConfigError);

  json bad_budget = minimal_sum_config("r.csv");
  bad_budget["epsilon"] = {0.0};
  CHECK_THROWS_AS(loads(bad_budget), ConfigError);

  // the sum loader refuses a bandit config and vice versa
  json bandit = minimal_bandit_config("r.csv");
  std::string bandit_path = dump_config("reject_bandit.json", bandit);
  CHECK_THROWS_AS(csdp::load_sum_sweep_config(bandit_path), ConfigError);
  json sum = minimal_sum_config("r.csv");
  sum.erase("mechanism");  // keep only keys both loaders accept
  std::string sum_path = dump_config("reject_sum.json", sum);
  CHECK_THROWS_AS(csdp::load_bandit_sweep_config(sum_path), ConfigError);
}

TEST_CASE("bandit config: instance problems fail at load time") {
  auto loads = [](const json& j) {
    static int counter = 0;
    std::string path =
        dump_config("breject" + std::to_string(counter++) + ".json", j);
    return csdp::load_bandit_sweep_config(path);
  };

  json long_theta = minimal_bandit_config("r.csv");
  long_theta["theta_star"] = {2.0, 2.0};
  CHECK_THROWS_AS(loads(long_theta), ConfigError);

  json ragged = minimal_bandit_config("r.csv");
  ragged["actions"] = {{1.0, 0.0}, {0.5}};
  CHECK_THROWS_AS(loads(ragged), ConfigError);

  json mode = minimal_bandit_config("r.csv");
  mode["context_mode"] = "scripted";  // scripts are not expressible in JSON configs
  CHECK_THROWS_AS(loads(mode), ConfigError);

  json scalar_mech = minimal_bandit_config("r.csv");
  scalar_mech["mechanism"] = "binary-blanket";  // scalar mechanism, 2-dim instance
  CHECK_THROWS_AS(loads(scalar_mech), ConfigError);

  json ok = minimal_bandit_config("breject_ok.csv");
  csdp::BanditSweepConfig cfg = loads(ok);
  CHECK(cfg.kind == csdp::MechanismKind::kOracle);
  CHECK(cfg.theta_star.size() == 2);
  CHECK(cfg.actions.size() == 2);
}

TEST_CASE("sum sweep writes exact, reproducible bytes in grid order") {
  json j = minimal_sum_config("sweep_a.csv");
  j["n"] = {8, 16};
  j["input_family"] = "ones";
  j["trials"] = 3;
  j["oracle_fixed_variance"] = 0.0;
  SweepOutcome a = csdp::run_sum_sweep(
      csdp::load_sum_sweep_config(dump_config("sweep_a.json", j)));
  CHECK(a.cells_total == 2);
  CHECK(a.cells_failed == 0);

  // zero noise and the all-ones stream: the max error is exactly the worst
  // open-suffix length, low_degree - 1 (1 for n=8, 2 for n=16)
  std::string expected =
      "n,k,eps,mechanism,trial,max_error,alpha_hat\n"
      "8,1,1,oracle,0,1,nan\n"
      "8,1,1,oracle,1,1,nan\n"
      "8,1,1,oracle,2,1,nan\n"
      "16,1,1,oracle,0,2,nan\n"
      "16,1,1,oracle,1,2,nan\n"
      "16,1,1,oracle,2,2,nan\n";
  CHECK(read_file(path_for("sweep_a.csv")) == expected);

  j["out"] = path_for("sweep_b.csv");
  csdp::run_sum_sweep(csdp::load_sum_sweep_config(dump_config("sweep_b.json", j)));
  CHECK(read_file(path_for("sweep_b.csv")) == expected);
}

TEST_CASE("alpha_hat appears exactly at the 100-trial threshold") {
  json j = minimal_sum_config("alpha_99.csv");
  j["input_family"] = "ones";
  j["oracle_fixed_variance"] = 0.0;
  j["trials"] = 99;
  csdp::run_sum_sweep(csdp::load_sum_sweep_config(dump_config("alpha_99.json", j)));
  std::vector<std::string> rows99 = read_lines(path_for("alpha_99.csv"));
  REQUIRE(rows99.size() == 100);
  CHECK(rows99[1] == "8,1,1,oracle,0,1,nan");

  j["trials"] = 100;
  j["out"] = path_for("alpha_100.csv");
  csdp::run_sum_sweep(csdp::load_sum_sweep_config(dump_config("alpha_100.json", j)));
  std::vector<std::string> rows100 = read_lines(path_for("alpha_100.csv"));
  REQUIRE(rows100.size() == 101);
  // every max_error is 1, so the 0.9 quantile is 1
  CHECK(rows100[1] == "8,1,1,oracle,0,1,1");
}

TEST_CASE("a failing cell is reported without sinking the sweep") {
  json j = minimal_sum_config("isolation.csv");
  j["input_family"] = "ones";
  j["oracle_fixed_variance"] = 0.0;
  // binary-blanket at eps=1 on batches of 2 saturates gamma and throws
  j["mechanism"] = {"oracle", "binary-blanket"};
  SweepOutcome outcome = csdp::run_sum_sweep(
      csdp::load_sum_sweep_config(dump_config("isolation.json", j)));
  CHECK(outcome.cells_total == 2);
  CHECK(outcome.cells_failed == 1);
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].find("binary-blanket") != std::string::npos);

  std::vector<std::string> rows = read_lines(path_for("isolation.csv"));
  REQUIRE(rows.size() == 2);  // header plus the surviving oracle cell
  CHECK(rows[1] == "8,1,1,oracle,0,1,nan");
}

TEST_CASE("explicit seeds give common random numbers across cells") {
  json j = minimal_sum_config("crn.csv");
  j["n"] = {8, 16};
  j["seeds"] = {5, 6};
  j["oracle_fixed_variance"] = 0.0;
  j["trace_out"] = path_for("crn_trace.csv");
  SweepOutcome outcome =
      csdp::run_sum_sweep(csdp::load_sum_sweep_config(dump_config("crn.json", j)));
  CHECK(outcome.cells_failed == 0);

  std::vector<std::string> trace = read_lines(path_for("crn_trace.csv"));
  REQUIRE(trace.size() == 1 + 2 * (8 + 16));
  CHECK(trace[0] == "run_id,t,y_hat,true_sum,abs_error");

  // same seed, same input stream: the n=16 runs must open with the n=8 sums
  std::map<std::string, std::vector<std::string>> true_sums;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    std::istringstream row(trace[i]);
    std::string run_id, t, y_hat, true_sum;
    std::getline(row, run_id, ',');
    std::getline(row, t, ',');
    std::getline(row, y_hat, ',');
    std::getline(row, true_sum, ',');
    true_sums[run_id].push_back(true_sum);
  }
  REQUIRE(true_sums.count("8:1:1:oracle:0") == 1);
  REQUIRE(true_sums.count("16:1:1:oracle:0") == 1);
  for (int trial = 0; trial < 2; ++trial) {
    std::string small_id = "8:1:1:oracle:" + std::to_string(trial);
    std::string large_id = "16:1:1:oracle:" + std::to_string(trial);
    const std::vector<std::string>& small = true_sums[small_id];
    const std::vector<std::string>& large = true_sums[large_id];
    REQUIRE(small.size() == 8);
    REQUIRE(large.size() == 16);
    for (std::size_t t = 0; t < 8; ++t) CHECK(small[t] == large[t]);
  }
}

TEST_CASE("bandit sweep: header, explicit seed echo, reproducibility") {
  json j = minimal_bandit_config("bandit_a.csv");
  j["epsilon"] = {40.0};
  j["oracle_fixed_variance"] = 0.0;
  j["seeds"] = {11, 12};
  SweepOutcome outcome = csdp::run_bandit_sweep(
      csdp::load_bandit_sweep_config(dump_config("bandit_a.json", j)));
  CHECK(outcome.cells_total == 1);
  CHECK(outcome.cells_failed == 0);

  std::vector<std::string> rows = read_lines(path_for("bandit_a.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "n,k,eps,seed,final_regret,sigma_prime,lambda,violations");
  // zero mechanism noise: sigma' = 0, lambda = lambda_min = 1, no violations
  CHECK(rows[1].rfind("64,1,40,11,", 0) == 0);
  CHECK(rows[2].rfind("64,1,40,12,", 0) == 0);
  for (int r : {1, 2}) {
    const std::string& row = rows[static_cast<std::size_t>(r)];
    REQUIRE(row.size() > 6);
    CHECK(row.substr(row.size() - 6) == ",0,1,0");
  }

  j["out"] = path_for("bandit_b.csv");
  csdp::run_bandit_sweep(
      csdp::load_bandit_sweep_config(dump_config("bandit_b.json", j)));
  CHECK(read_file(path_for("bandit_b.csv")) == read_file(path_for("bandit_a.csv")));
}

TEST_CASE("fit_scaling recovers exact power laws per k") {
  std::ostringstream csv;
  csv << "n,k,eps,mechanism,trial,max_error,alpha_hat\n";
  for (std::int64_t n : {1024, 2048, 4096, 8192}) {
    csv << n << ",1,1,oracle,0," << format_double(3.0 * std::pow(n, 0.4)) << ",nan\n";
    csv << n << ",2,1,oracle,0," << format_double(7.0 * std::pow(n, -0.25)) << ",nan\n";
  }
  std::string path = write_file("fit_exact.csv", csv.str());
  std::vector<FitResult> fits = csdp::fit_scaling(path);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].k == 1);
  CHECK(fits[0].points == 4);
  CHECK(fits[0].slope == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(fits[0].intercept == doctest::Approx(std::log(3.0)).epsilon(1e-7));
  CHECK(fits[0].stderr_slope < 1e-6);
  CHECK(fits[1].k == 2);
  CHECK(fits[1].slope == doctest::Approx(-0.25).epsilon(1e-9));
  CHECK(fits[1].intercept == doctest::Approx(std::log(7.0)).epsilon(1e-7));
}

TEST_CASE("fit_scaling: median shrugs off an outlier that skews the mean") {
  std::ostringstream csv;
  csv << "n,k,eps,mechanism,trial,max_error,alpha_hat\n";
  for (std::int64_t n : {16, 32, 64, 128}) {
    std::string law = format_double(std::sqrt(static_cast<double>(n)));
    csv << n << ",1,1,oracle,0," << law << ",nan\n";
    csv << n << ",1,1,oracle,1," << law << ",nan\n";
    csv << n << ",1,1,oracle,2,1000,nan\n";
  }
  std::string path = write_file("fit_outlier.csv", csv.str());
  std::vector<FitResult> median_fit = csdp::fit_scaling(path, true);
  REQUIRE(median_fit.size() == 1);
  CHECK(median_fit[0].slope == doctest::Approx(0.5).epsilon(1e-9));
  std::vector<FitResult> mean_fit = csdp::fit_scaling(path, false);
  CHECK(std::abs(mean_fit[0].slope - 0.5) > 0.01);
}

TEST_CASE("fit_scaling refuses fits it cannot support") {
  std::string thin = write_file("fit_thin.csv",
                                "n,k,eps,mechanism,trial,max_error,alpha_hat\n"
                                "16,1,1,oracle,0,2,nan\n"
                                "32,1,1,oracle,0,3,nan\n"
                                "64,1,1,oracle,0,4,nan\n");
  CHECK_THROWS_AS(csdp::fit_scaling(thin), FitUndefined);

  std::string flat = write_file("fit_flat.csv",
                                "n,k,eps,mechanism,trial,max_error,alpha_hat\n"
                                "16,1,1,oracle,0,2,nan\n"
                                "32,1,1,oracle,0,2,nan\n"
                                "64,1,1,oracle,0,2,nan\n"
                                "128,1,1,oracle,0,2,nan\n");
  CHECK_THROWS_AS(csdp::fit_scaling(flat), FitUndefined);

  std::string zero = write_file("fit_zero.csv",
                                "n,k,eps,mechanism,trial,max_error,alpha_hat\n"
                                "16,1,1,oracle,0,0,nan\n"
                                "32,1,1,oracle,0,2,nan\n"
                                "64,1,1,oracle,0,3,nan\n"
                                "128,1,1,oracle,0,4,nan\n");
  CHECK_THROWS_AS(csdp::fit_scaling(zero), FitUndefined);

  std::string header = write_file("fit_header.csv", "time,value\n1,2\n");
  CHECK_THROWS_AS(csdp::fit_scaling(header), csdp::InvalidArgument);
  CHECK_THROWS_AS(csdp::fit_scaling(path_for("fit_missing.csv")),
                  csdp::InvalidArgument);
}

TEST_CASE("transcript dump captures the first cell's first trial") {
  json j = minimal_sum_config("dump.csv");
  j["input_family"] = "ones";
  j["oracle_fixed_variance"] = 0.0;
  j["dump_transcript"] = path_for("dump.jsonl");
  csdp::run_sum_sweep(csdp::load_sum_sweep_config(dump_config("dump.json", j)));
  std::vector<std::string> lines = read_lines(path_for("dump.jsonl"));
  // the n=8, k=1 plan has 4 leaf batches, one transcript record each
  REQUIRE(lines.size() == 4);
  for (const std::string& line : lines) {
    json record = json::parse(line);
    CHECK(record.at("kind") == "oracle");
    CHECK(record.at("m") == 2);
  }
}

}  // TEST_SUITE
