#include "csdp/bandit.hpp"

#include <algorithm>
#include <cmath>

#include "csdp/errors.hpp"
#include "csdp/estimator.hpp"
#include "csdp/mechanisms.hpp"
#include "csdp/rng.hpp"

namespace csdp {

double beta_radius(std::int64_t t, double sigma, int d, double lambda,
                   double alpha_conf) {
  if (t < 0) throw InvalidArgument("beta_radius: t must be >= 0");
  if (!(sigma >= 0.0)) throw InvalidArgument("beta_radius: sigma must be >= 0");
  if (d < 1) throw InvalidArgument("beta_radius: d must be >= 1");
  if (!(lambda > 0.0)) throw InvalidArgument("beta_radius: lambda must be > 0");
  if (!(alpha_conf > 0.0 && alpha_conf <= 1.0)) {
    throw InvalidArgument("beta_radius: alpha_conf must lie in (0, 1]");
  }
  double inner = 2.0 * std::log(2.0 / alpha_conf) +
                 d * std::log(3.0 + 2.0 * static_cast<double>(t) / (d * lambda));
  return sigma * std::sqrt(inner) + std::sqrt(3.0 * lambda / 2.0) +
         std::sqrt(lambda / 2.0);
}

int select_action(const std::vector<Eigen::VectorXd>& actions,
                  const Eigen::VectorXd& theta_hat,
                  const Eigen::MatrixXd& v_inverse, double beta) {
  if (actions.empty()) throw InvalidArgument("select_action: no actions");
  int best = -1;
  double best_score = 0.0;
  for (int a = 0; a < static_cast<int>(actions.size()); ++a) {
    const Eigen::VectorXd& phi = actions[static_cast<std::size_t>(a)];
    double quad = phi.dot(v_inverse * phi);
    if (!std::isfinite(quad) || quad < -1e-9) {
      throw NumericalFailure("select_action: V^-1 quadratic form is not PSD");
    }
    double score = phi.dot(theta_hat) + beta * std::sqrt(std::max(0.0, quad));
    if (!std::isfinite(score)) {
      throw NumericalFailure("select_action: non-finite UCB score");
    }
    if (best < 0 || score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best;
}

std::vector<double> pack_upper_triangle(const Eigen::MatrixXd& matrix) {
  int d = static_cast<int>(matrix.rows());
  std::vector<double> packed;
  packed.reserve(static_cast<std::size_t>(packed_dimension(d)));
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) packed.push_back(matrix(i, j));
  }
  return packed;
}

Eigen::MatrixXd unpack_upper_triangle(std::span<const double> packed, int d) {
  if (static_cast<int>(packed.size()) != packed_dimension(d)) {
    throw InvalidArgument("unpack_upper_triangle: size mismatch");
  }
  Eigen::MatrixXd matrix(d, d);
  std::size_t idx = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      matrix(i, j) = packed[idx];
      matrix(j, i) = packed[idx];
      ++idx;
    }
  }
  return matrix;
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& symmetric, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("psd_repair: eigendecomposition failed");
  }
  Eigen::VectorXd eigs = solver.eigenvalues();
  double floor = lambda / 2.0;
  bool repaired = false;
  for (int i = 0; i < eigs.size(); ++i) {
    if (eigs[i] < floor) {
      eigs[i] = floor;
      repaired = true;
    }
  }
  if (!repaired) return symmetric;
  return solver.eigenvectors() * eigs.asDiagonal() *
         solver.eigenvectors().transpose();
}

void validate_instance(const BanditInstance& instance) {
  int d = static_cast<int>(instance.theta_star.size());
  if (d < 1) throw InvalidArgument("bandit instance: theta_star is empty");
  if (instance.theta_star.norm() > 1.0 + 1e-9) {
    throw InvalidArgument("bandit instance: ||theta*|| must be <= 1");
  }
  if (instance.actions.empty()) {
    throw InvalidArgument("bandit instance: needs at least one action");
  }
  for (const Eigen::VectorXd& phi : instance.actions) {
    if (static_cast<int>(phi.size()) != d) {
      throw InvalidArgument("bandit instance: action dimension mismatch");
    }
    if (phi.norm() > 1.0 + 1e-9) {
      throw InvalidArgument("bandit instance: ||phi|| must be <= 1");
    }
  }
  if (instance.context_mode == ContextMode::kScripted) {
    if (instance.script.empty()) {
      throw InvalidArgument("bandit instance: scripted contexts need a script");
    }
    for (const auto& slate : instance.script) {
      if (slate.empty()) {
        throw InvalidArgument("bandit instance: empty action set in script");
      }
      for (const Eigen::VectorXd& phi : slate) {
        if (static_cast<int>(phi.size()) != d || phi.norm() > 1.0 + 1e-9) {
          throw InvalidArgument("bandit instance: bad scripted action feature");
        }
      }
    }
  }
  if (!(instance.sigma >= 0.0)) {
    throw InvalidArgument("bandit instance: sigma must be >= 0");
  }
}

double derive_sigma_prime(const TreePlan& plan, const MechanismPolicy& vec_policy,
                          const MechanismPolicy& mat_policy,
                          const PrivacyParams& pipeline_budget, int d) {
  PrivacyParams per_mech = split_budget(pipeline_budget, plan.requested_levels);
  double worst = 0.0;
  for (const PlanNode& node : plan.nodes) {
    worst = std::max(worst,
                     mechanism_variance(vec_policy.spec_for(node.size(), per_mech)));
    worst = std::max(worst,
                     mechanism_variance(mat_policy.spec_for(node.size(), per_mech)));
  }
  double vmax = static_cast<double>(max_cover_size(plan));
  double entries = static_cast<double>(d) * d + d;  // matrix plus vector entries
  double quantile =
      std::sqrt(2.0 * std::log(2.0 * static_cast<double>(plan.horizon) *
                               static_cast<double>(plan.horizon) * entries));
  return std::sqrt(worst * vmax) * quantile;
}

namespace {

double best_mean(const std::vector<Eigen::VectorXd>& actions,
                 const Eigen::VectorXd& theta_star) {
  double best = -1e300;
  for (const Eigen::VectorXd& phi : actions) best = std::max(best, phi.dot(theta_star));
  return best;
}

}  // namespace

RegretTrace run_bandit(const BanditInstance& instance, const BanditConfig& config,
                       std::uint64_t seed) {
  validate_instance(instance);
  if (config.n < 2) throw InvalidArgument("run_bandit: n must be >= 2");
  validate_budget(config.budget);
  int d = static_cast<int>(instance.theta_star.size());
  int big_d = packed_dimension(d);

  TreePlan plan = config.binary_mode ? build_binary_plan(config.n)
                                     : build_plan(config.n, config.k);

  // The vector and matrix sums compose: each pipeline runs on half the
  // budget, sharing the one tree plan (identical batches, identical closes).
  PrivacyParams pipeline_budget{config.budget.epsilon / 2.0,
                                config.budget.delta / 2.0};
  MechanismPolicy vec_policy;
  vec_policy.kind = config.kind;
  vec_policy.dimension = d;
  vec_policy.oracle_constant = config.oracle_constant;
  vec_policy.oracle_fixed_variance = config.oracle_fixed_variance;
  MechanismPolicy mat_policy = vec_policy;
  mat_policy.dimension = big_d;

  double sigma_prime =
      config.sigma_prime_override >= 0.0
          ? config.sigma_prime_override
          : config.sigma_prime_scale *
                derive_sigma_prime(plan, vec_policy, mat_policy, pipeline_budget, d);
  double lambda = std::max(2.0 * sigma_prime * d, config.lambda_min);
  if (!(lambda > 0.0)) {
    throw InvalidArgument("run_bandit: lambda_min must be > 0 when sigma' = 0");
  }
  double alpha_conf = config.alpha_conf > 0.0
                          ? config.alpha_conf
                          : 1.0 / static_cast<double>(config.n);

  StreamRng reward_rng = StreamRng::derive(seed, 101);
  StreamRng context_rng = StreamRng::derive(seed, 102);
  std::uint64_t vec_seed = StreamRng::derive(seed, 103).next_u64();
  std::uint64_t mat_seed = StreamRng::derive(seed, 104).next_u64();

  CstaEstimator vec_estimator(plan, vec_policy, pipeline_budget, vec_seed);
  CstaEstimator mat_estimator(plan, mat_policy, pipeline_budget, mat_seed);

  // Published server state, refreshed only at batch closes.
  Eigen::VectorXd theta_hat = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd v_inverse =
      Eigen::MatrixXd::Identity(d, d) / lambda;

  // Exact sums, instrumentation only; never fed back into the server state.
  Eigen::MatrixXd gram_true = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd u_true = Eigen::VectorXd::Zero(d);

  RegretTrace trace;
  trace.sigma_prime = sigma_prime;
  trace.lambda = lambda;
  trace.alpha_conf = alpha_conf;
  trace.actions.reserve(static_cast<std::size_t>(config.n));

  std::vector<Eigen::VectorXd> slate = instance.actions;
  std::vector<double> vec_value(static_cast<std::size_t>(d));
  double cum = 0.0;
  std::int64_t last_closed = 0;

  for (std::int64_t t = 1; t <= config.n; ++t) {
    switch (instance.context_mode) {
      case ContextMode::kFixed:
        break;
      case ContextMode::kScripted:
        slate = instance.script[static_cast<std::size_t>((t - 1) %
                            static_cast<std::int64_t>(instance.script.size()))];
        break;
      case ContextMode::kSeededRandom: {
        for (Eigen::VectorXd& phi : slate) {
          for (int c = 0; c < d; ++c) phi[c] = context_rng.normal();
          double norm = phi.norm();
          if (norm > 0.0) phi /= norm;
        }
        break;
      }
    }

    double beta = beta_radius(t - 1, instance.sigma, d, lambda, alpha_conf);
    int action = select_action(slate, theta_hat, v_inverse, beta);
    const Eigen::VectorXd& x = slate[static_cast<std::size_t>(action)];

    // The reward noise stream advances once per time step no matter which
    // action was chosen, so arms compared under one seed share the draws.
    double eta = reward_rng.normal(0.0, 1.0) * instance.sigma;
    double y = std::clamp(x.dot(instance.theta_star) + eta, 0.0, 1.0);

    double inst = best_mean(slate, instance.theta_star) - x.dot(instance.theta_star);
    cum += inst;
    trace.actions.push_back(action);
    trace.rewards.push_back(y);
    trace.inst_regret.push_back(inst);
    trace.cum_regret.push_back(cum);

    for (int c = 0; c < d; ++c) vec_value[static_cast<std::size_t>(c)] = x[c] * y;
    vec_estimator.step(vec_value);
    Eigen::MatrixXd outer = x * x.transpose();
    mat_estimator.step(pack_upper_triangle(outer));

    gram_true += outer;
    u_true += x * y;

    if (vec_estimator.closed_prefix() != last_closed) {
      last_closed = vec_estimator.closed_prefix();
      const std::vector<double>& u_est = vec_estimator.current_output();
      Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(u_est.data(), d);
      Eigen::MatrixXd gram_est =
          unpack_upper_triangle(mat_estimator.current_output(), d);
      Eigen::MatrixXd v_raw =
          gram_est + lambda * Eigen::MatrixXd::Identity(d, d);

      PublishedState state;
      state.close_time = t;
      state.h_norm = (u - u_true).norm();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> noise_solver(v_raw - gram_true);
      if (noise_solver.info() != Eigen::Success) {
        throw NumericalFailure("run_bandit: diagnostics eigendecomposition failed");
      }
      state.big_h_norm = noise_solver.eigenvalues().cwiseAbs().maxCoeff();
      state.h_weighted_bound = state.h_norm / std::sqrt(lambda / 2.0);
      state.violation = state.big_h_norm > 1.5 * lambda + 1e-9 ||
                        state.h_norm > 0.5 * lambda + 1e-9;
      trace.published.push_back(state);

      Eigen::MatrixXd v_repaired = psd_repair(v_raw, lambda);
      Eigen::LLT<Eigen::MatrixXd> chol(v_repaired);
      if (chol.info() != Eigen::Success) {
        throw NumericalFailure("run_bandit: repaired V is not positive definite");
      }
      theta_hat = chol.solve(u);
      v_inverse = chol.solve(Eigen::MatrixXd::Identity(d, d));
    }
  }

  vec_estimator.finish();
  mat_estimator.finish();
  trace.final_regret = cum;
  return trace;
}

RegularityReport regularity_diagnostics(const RegretTrace& trace) {
  RegularityReport report;
  report.rho_max = 1.5 * trace.lambda;
  report.rho_min = 0.5 * trace.lambda;
  report.gamma = std::sqrt(trace.lambda / 2.0);
  for (const PublishedState& state : trace.published) {
    report.max_h_norm = std::max(report.max_h_norm, state.h_norm);
    report.max_big_h_norm = std::max(report.max_big_h_norm, state.big_h_norm);
    report.violations += state.violation ? 1 : 0;
  }
  return report;
}

}  // namespace csdp
