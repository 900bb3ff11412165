#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedapm/engine.hpp"
#include "fedapm/state.hpp"

namespace fedapm {

// a = min{rho/60, min_i sigma_i/2 - 4 rho/15}.
double descent_constant(double rho, std::span<const double> sigma);

// b = max over clients of {22/5 sigma_i^2 + 4/3 rho^2 + 8 rho/15, 16/3 rho^2 + 2 + 8 rho/15,
// (48 + 4 rho) / (rho (1 - mu_i))}.
double relerr_constant(double rho, std::span<const double> sigma, std::span<const double> mu);

// f(V, U) = sum alpha_i f_i(v_i, u_i) and f(V, u) = sum alpha_i f_i(v_i, u).
double local_loss(const FederationState& state, std::span<const LocalObjective> objectives);
double shared_loss(const FederationState& state, std::span<const LocalObjective> objectives);

// L(P) = sum_i L_i with the state's shared model u.
double lagrangian_value(const FederationState& state, std::span<const LocalObjective> objectives);

// L + sum_i 29 / (rho (1 - mu_i)) xi_i.
double lyapunov_value(double lagrangian, std::span<const double> xi, std::span<const double> mu,
                      double rho);
double lyapunov_value(const FederationState& state, std::span<const LocalObjective> objectives);

// Squared norm of the block gradient of the Lyapunov function:
// sum_i (||alpha_i grad_v f_i||^2 + ||alpha_i grad_u f_i + pi_i + rho (u_i - u)||^2
//        + ||u_i - u||^2) + ||sum_i (pi_i + rho (u_i - u))||^2.
double stationarity_dist_sq(const FederationState& state, std::span<const LocalObjective> objectives);

struct Residuals {
  double r1 = 0.0;  // max_i ||alpha_i grad_u f_i + pi_i + rho (u_i - u)||
  double r2 = 0.0;  // max_i ||grad_v f_i||
  double r3 = 0.0;  // max_i ||u_i - u||
  double r4 = 0.0;  // ||sum_i pi_i||
  double r1_original = 0.0;  // ||sum_i alpha_i grad_u f_i(v_i, u)||
  double max() const;
};

Residuals stationarity_residuals(const FederationState& state, std::span<const LocalObjective> objectives);

// (1/m) sum_i ||u_i - u||.
double drift_metric(const FederationState& state);

struct Check {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = true;
};

// lhs = L~(P^t) - L~(P^{t+1}), rhs = a Sigma_p; passes if lhs - rhs >= -1e-9 max(1, |L~(P^t)|).
Check descent_check(double lyap_t, double lyap_next, double a, double sigma_p);

// lhs = dist^2, rhs = b (Sigma_p + Xi~); passes if lhs <= rhs (1 + 1e-9).
Check relative_error_check(double dist_sq, double b, double sigma_p, double xi_tilde);

// Per client: ||pi' - pi||^2 against 24/(1-mu)(xi - xi') + 4/15 rho^2 (||du_i||^2 + ||dv_i||^2).
std::vector<Check> dual_bound_check(const FederationState& prev, const FederationState& next);

// Squared step sizes between two consecutive states.
double step_sum_sq(const FederationState& prev, const FederationState& next);

// One row of the theory trace: the state P^{t+1} and the checks for the transition from P^t.
struct TheoryRow {
  int round = 0;  // number of completed rounds, t + 1
  double loss_local = 0.0;
  double loss_shared = 0.0;
  double lagrangian = 0.0;
  double lyapunov = 0.0;
  double sigma_p = 0.0;
  double xi_sum = 0.0;
  double xi_tilde = 0.0;  // sum_i (xi_i^t - xi_i^{t+1})
  double a = 0.0;
  double b = 0.0;
  Check descent;
  Check relerr;
  std::vector<Check> dual;
  Check lower_bound;  // L~ - (28/rho) Xi >= f(V, u)
  Residuals residuals;
  double drift = 0.0;
  bool full_participation = true;
  bool dual_ok() const;
};

TheoryRow make_theory_row(const FederationState& prev, const FederationState& next,
                          std::span<const LocalObjective> objectives, bool full_participation);

enum class RateRegime { finite, linear, sublinear, inconclusive };

std::string_view to_string(RateRegime r);

struct RateFit {
  RateRegime regime = RateRegime::inconclusive;
  double slope = 0.0;
  double r_squared = 0.0;
  std::string reason;
};

inline constexpr double kRateFloor = 1e-14;

// Least-squares fits of log(gap) against t (linear regime) and against log(t + 1) (sublinear)
// over the tail half of the sequence. A fit qualifies with r^2 >= 0.98 and a negative slope;
// when both qualify the higher r^2 wins. slope and r_squared always describe the log-linear fit.
RateFit rate_fit(std::span<const double> gaps);

// gap_t = value_t - (limit - floor).
std::vector<double> lyapunov_gaps(std::span<const double> values, double limit,
                                  double floor = kRateFloor);

}  // namespace fedapm
