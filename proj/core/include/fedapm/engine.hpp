#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedapm/numcore.hpp"
#include "fedapm/state.hpp"

namespace fedapm {

// Inner solver settings for one FedAPM local update.
struct InnerConfig {
  double v_tol = 1e-8;      // gradient-norm tolerance of the proximal v-subproblem
  int v_max_iters = 500;    // full-batch gradient steps
  int u_max_passes = 500;   // SGD passes over the shard for the u-subproblem
  int batch_size = 32;      // u-subproblem minibatch, capped at the shard size
};

// Lower bound used for rho in auto mode. `weighted` applies the 2*L_u term to the
// alpha-weighted loss alpha_i f_i (the quantity that enters the dual identity);
// `literal` applies it to the unweighted f_i.
enum class RhoPolicy { weighted, literal };

struct Hyperparams {
  double rho = 0.0;
  std::vector<double> sigma;
};

// Smallest rho satisfying the descent/relative-error/lower-bound conditions, and
// sigma_i = 1.05 * max{(8/15) rho, alpha_i L_v}.
Hyperparams auto_hyperparams(std::span<const LipschitzEstimates> lipschitz,
                             std::span<const double> alphas, RhoPolicy policy = RhoPolicy::weighted);

// sigma_i = 1.05 * max{(8/15) rho, alpha_i L_v} for a given rho.
std::vector<double> auto_sigma(double rho, std::span<const LipschitzEstimates> lipschitz,
                               std::span<const double> alphas);

// Per-client status of max{3 a L_u, 3 a L_uv} <= rho <= (15/8) sigma and sigma >= a L_v.
struct HyperparamCheck {
  std::vector<bool> ok;
  std::vector<double> rho_lower_margin;  // rho - max{3 a L_u, 3 a L_uv}
  std::vector<double> rho_upper_margin;  // (15/8) sigma - rho
  std::vector<double> sigma_margin;      // sigma - a L_v
  bool all_ok() const;
};

HyperparamCheck check_hyperparams(double rho, std::span<const double> sigma,
                                  std::span<const LipschitzEstimates> lipschitz,
                                  std::span<const double> alphas);

struct EngineConfig {
  double rho = 1.0;
  std::vector<double> sigma;  // one per client, or a single value broadcast to all
  double xi0 = 1.0;
  double mu = 0.5;
  double selection_fraction = 1.0;
  std::uint64_t seed = 0;
  double init_scale = 0.0;   // v_i^0, u^0 ~ N(0, init_scale^2)
  // pi_i^0 = -alpha_i grad_u f_i(v_i^0, u_i^0), so the first u-subproblem residual starts at zero.
  bool dual_warm_start = true;
};

// Builds the round-0 state: common u_i^0, per-client v_i^0, duals, z_i^0 and u^0 = mean z^0.
FederationState init_federation(std::span<const LocalObjective> objectives,
                                std::span<const LipschitzEstimates> lipschitz,
                                const EngineConfig& cfg);

// L_i = alpha_i f_i(v, u_i) + <pi_i, u_i - u> + rho/2 ||u_i - u||^2.
double aug_lagrangian_i(const LocalObjective& obj, const ParamVec& v, const ParamVec& u_i,
                        const ParamVec& pi_i, const ParamVec& u, double rho);

struct VSolveResult {
  ParamVec v;
  int iterations = 0;
  double grad_norm = 0.0;
};

// argmin_v alpha f(v, u_i) + sigma/2 ||v - v_t||^2 by gradient descent with step
// 1/(alpha L_v + sigma), halved whenever a step fails to decrease the subproblem.
VSolveResult solve_v_prox(const LocalObjective& obj, const ParamVec& v_t, const ParamVec& u_i,
                          double sigma, double l_v, const InnerConfig& inner);

struct USolveResult {
  ParamVec u;
  double residual_sq = 0.0;
  int passes = 0;
  bool hit_max_passes = false;
};

// Squared norm of alpha grad_u f(v, u) + pi + rho (u - u_t).
double u_residual_sq(const LocalObjective& obj, const ParamVec& v, const ParamVec& u,
                     const ParamVec& pi, const ParamVec& u_t, double rho);

// xi-approximate u-update: SGD with constant step 1/(alpha L_u + rho) from u_i_t, residual
// checked before the first pass and after every pass.
USolveResult solve_u_approx(const LocalObjective& obj, const ParamVec& v_new, const ParamVec& u_i_t,
                            const ParamVec& pi_t, const ParamVec& u_t, double rho, double xi_target,
                            double l_u, const InnerConfig& inner, Rng& rng);

struct DualUpdate {
  ParamVec pi;
  ParamVec z;
};

// pi' = pi + rho (u_new - u_t); z' = u_new + pi' / rho.
DualUpdate update_dual_and_z(const ParamVec& u_new, const ParamVec& u_t, const ParamVec& pi_t,
                             double rho);

struct ClientRoundInfo {
  int client = 0;
  int v_iterations = 0;
  int u_passes = 0;
  double u_residual_sq = 0.0;
  double xi_target = 0.0;
  bool u_flagged = false;
  long partial_grad_evals = 0;
};

struct RoundReport {
  int round = 0;  // index t of the round just executed
  std::vector<int> selected;
  std::vector<ClientRoundInfo> clients;  // one entry per selected client, ascending
  int u_flags() const;
  bool full_participation = false;
};

// One round: aggregate z -> broadcast u -> select -> per selected
// client (v prox, xi <- mu xi, u approx, pi, z). Unselected clients stay bitwise unchanged.
// On return state.u holds the aggregate of the new uploads.
RoundReport run_round(FederationState& state, std::span<const LocalObjective> objectives,
                      const InnerConfig& inner, int workers = 1);

enum class PenaltyVariant { alt, sim };

// FedAPM with pi = 0, rho = 0, sigma = 0 and u_i reset to the broadcast model: local SGD
// on the Lagrangian (Gauss-Seidel for alt, Jacobi for sim), uploads z_i = u_i.
RoundReport penalty_mode_round(FederationState& state, std::span<const LocalObjective> objectives,
                               const LocalSgdConfig& sgd, PenaltyVariant variant, int workers = 1);

}  // namespace fedapm
