#ifndef CSDP_BANDIT_HPP
#define CSDP_BANDIT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "csdp/privacy.hpp"
#include "csdp/shuffle_runtime.hpp"
#include "csdp/tree_plan.hpp"

namespace csdp {

// Confidence radius
//   beta_t = sigma * sqrt(2 log(2/alpha) + d log(3 + 2t/(d lambda)))
//            + sqrt(3 lambda / 2) + sqrt(lambda / 2),
// evaluated verbatim.
double beta_radius(std::int64_t t, double sigma, int d, double lambda,
                   double alpha_conf);

// UCB action choice: argmax over actions of
//   phi' theta_hat + beta * sqrt(phi' V^-1 phi),
// ties broken by the lowest action index. Throws NumericalFailure when the
// quadratic form comes out negative or non-finite despite PSD repair.
int select_action(const std::vector<Eigen::VectorXd>& actions,
                  const Eigen::VectorXd& theta_hat,
                  const Eigen::MatrixXd& v_inverse, double beta);

// Row-major upper-triangle packing of a symmetric d x d matrix into
// d(d+1)/2 entries, and its inverse (which mirrors across the diagonal, so
// the result is exactly symmetric).
std::vector<double> pack_upper_triangle(const Eigen::MatrixXd& matrix);
Eigen::MatrixXd unpack_upper_triangle(std::span<const double> packed, int d);
inline int packed_dimension(int d) { return d * (d + 1) / 2; }

// Eigenvalue clamp onto the cone {V : V >= (lambda/2) I}. Mechanism noise can
// make the regularized Gram estimate indefinite; the confidence-set analysis
// needs its spectrum bounded below by lambda/2.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& symmetric, double lambda);

// How the per-time contexts produce the action feature set.
enum class ContextMode {
  kFixed,         // the same action features every time
  kScripted,      // cycle through a caller-supplied script of action sets
  kSeededRandom,  // fresh unit-norm features each time from the run's stream
};

struct BanditInstance {
  Eigen::VectorXd theta_star;            // ||theta*||_2 <= 1
  std::vector<Eigen::VectorXd> actions;  // base features, each ||phi||_2 <= 1
  ContextMode context_mode = ContextMode::kFixed;
  std::vector<std::vector<Eigen::VectorXd>> script;  // kScripted only
  double sigma = 0.0;  // reward noise scale
};

void validate_instance(const BanditInstance& instance);

struct BanditConfig {
  std::int64_t n = 0;
  int k = 1;
  bool binary_mode = false;
  PrivacyParams budget;  // total; each of the two sum pipelines gets half
  MechanismKind kind = MechanismKind::kOracle;
  double oracle_constant = 1.0;
  double oracle_fixed_variance = -1.0;
  // sigma' sets lambda = max(2 sigma' d, lambda_min). Derived from the
  // mechanism variance at the per-entry union-bound quantile unless
  // overridden; scale multiplies the derived value.
  double sigma_prime_scale = 1.0;
  double sigma_prime_override = -1.0;  // >= 0 wins over derivation
  double lambda_min = 1.0;
  double alpha_conf = -1.0;  // <= 0 means 1/n
};

// The noise scale the regularization is built from: an upper bound on any
// entry of the published vector/matrix sum errors, holding for all times and
// entries together with probability 1 - alpha/2. Computed as
//   sqrt(max mechanism variance * max cover size)
//   * sqrt(2 ln(2 n^2 (d^2 + d))),
// the Gaussian two-sided quantile matching the union bound over n times and
// all vector plus matrix entries.
double derive_sigma_prime(const TreePlan& plan, const MechanismPolicy& vec_policy,
                          const MechanismPolicy& mat_policy,
                          const PrivacyParams& pipeline_budget, int d);

// One published server state, recorded at a batch close, with the injected
// noise measured against the exact (instrumentation-only) sums.
struct PublishedState {
  std::int64_t close_time = 0;
  double h_norm = 0.0;         // ||u_t - sum x_s y_s||_2
  double big_h_norm = 0.0;     // spectral norm of V_t - sum x_s x_s', pre-repair
  double h_weighted_bound = 0.0;  // h_norm / sqrt(lambda/2)
  bool violation = false;      // big_h_norm > 3 lambda/2 or h_norm > lambda/2
};

struct RegretTrace {
  std::vector<int> actions;         // per time, chosen action index
  std::vector<double> rewards;      // per time, clipped observed reward
  std::vector<double> inst_regret;  // per time pseudo-regret
  std::vector<double> cum_regret;   // running sum of inst_regret
  std::vector<PublishedState> published;
  double sigma_prime = 0.0;
  double lambda = 0.0;
  double alpha_conf = 0.0;
  double final_regret = 0.0;
};

RegretTrace run_bandit(const BanditInstance& instance, const BanditConfig& config,
                       std::uint64_t seed);

// Summary of the regularity conditions over one trace.
struct RegularityReport {
  double rho_max = 0.0;  // 3 lambda / 2
  double rho_min = 0.0;  // lambda / 2
  double gamma = 0.0;    // sqrt(lambda / 2)
  double max_h_norm = 0.0;
  double max_big_h_norm = 0.0;
  int violations = 0;
};

RegularityReport regularity_diagnostics(const RegretTrace& trace);

}  // namespace csdp

#endif  // CSDP_BANDIT_HPP
