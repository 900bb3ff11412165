#include "fedapm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedapm/errors.hpp"

namespace fedapm {

double descent_constant(double rho, std::span<const double> sigma) {
  require(rho > 0.0, "descent_constant: rho must be positive");
  require(!sigma.empty(), "descent_constant: need at least one sigma");
  const double s_min = *std::min_element(sigma.begin(), sigma.end());
  return std::min(rho / 60.0, s_min / 2.0 - 4.0 * rho / 15.0);
}

double relerr_constant(double rho, std::span<const double> sigma, std::span<const double> mu) {
  require(rho > 0.0, "relerr_constant: rho must be positive");
  require(sigma.size() == mu.size() && !sigma.empty(), "relerr_constant: per-client inputs differ");
  double b = 16.0 / 3.0 * rho * rho + 2.0 + 8.0 * rho / 15.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    require(mu[i] > 0.0 && mu[i] < 1.0, "relerr_constant: mu must lie in (0, 1)");
    b = std::max(b, 22.0 / 5.0 * sigma[i] * sigma[i] + 4.0 / 3.0 * rho * rho + 8.0 * rho / 15.0);
    b = std::max(b, (48.0 + 4.0 * rho) / (rho * (1.0 - mu[i])));
  }
  return b;
}

namespace {

void check_sizes(const FederationState& state, std::span<const LocalObjective> objectives) {
  if (objectives.size() != state.clients.size()) {
    throw ContractViolation("diagnostics: one objective per client required");
  }
  for (const auto& c : state.clients) {
    if (c.u.size() != state.u.size() || c.pi.size() != state.u.size()) {
      throw ContractViolation("diagnostics: shared block dimension mismatch");
    }
  }
}

}  // namespace

double local_loss(const FederationState& state, std::span<const LocalObjective> objectives) {
  check_sizes(state, objectives);
  double total = 0.0;
  for (int i = 0; i < state.num_clients(); ++i) {
    const auto& obj = objectives[static_cast<std::size_t>(i)];
    total += obj.alpha() * obj.loss(state.personal_for(i), state.clients[static_cast<std::size_t>(i)].u);
  }
  return total;
}

double shared_loss(const FederationState& state, std::span<const LocalObjective> objectives) {
  check_sizes(state, objectives);
  double total = 0.0;
  for (int i = 0; i < state.num_clients(); ++i) {
    const auto& obj = objectives[static_cast<std::size_t>(i)];
    total += obj.alpha() * obj.loss(state.personal_for(i), state.u);
  }
  return total;
}

double lagrangian_value(const FederationState& state, std::span<const LocalObjective> objectives) {
  check_sizes(state, objectives);
  double total = 0.0;
  for (std::size_t i = 0; i < state.clients.size(); ++i) {
    const auto& c = state.clients[i];
    total += aug_lagrangian_i(objectives[i], c.v, c.u, c.pi, state.u, state.rho);
  }
  return total;
}

double lyapunov_value(double lagrangian, std::span<const double> xi, std::span<const double> mu,
                      double rho) {
  require(rho > 0.0, "lyapunov_value: rho must be positive");
  require(xi.size() == mu.size(), "lyapunov_value: xi and mu differ in length");
  double total = lagrangian;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    require(mu[i] > 0.0 && mu[i] < 1.0, "lyapunov_value: mu must lie in (0, 1)");
    total += 29.0 / (rho * (1.0 - mu[i])) * xi[i];
  }
  return total;
}

double lyapunov_value(const FederationState& state, std::span<const LocalObjective> objectives) {
  std::vector<double> xi, mu;
  for (const auto& c : state.clients) {
    xi.push_back(c.xi);
    mu.push_back(c.mu);
  }
  return lyapunov_value(lagrangian_value(state, objectives), xi, mu, state.rho);
}

double stationarity_dist_sq(const FederationState& state, std::span<const LocalObjective> objectives) {
  check_sizes(state, objectives);
  double total = 0.0;
  ParamVec grad_shared = ParamVec::Zero(state.u.size());
  for (std::size_t i = 0; i < state.clients.size(); ++i) {
    const auto& c = state.clients[i];
    const double alpha = objectives[i].alpha();
    const LossGrad lg = objectives[i].loss_and_grads(c.v, c.u);
    const ParamVec gap = c.u - state.u;
    total += (alpha * lg.grad_v).squaredNorm();
    total += (alpha * lg.grad_u + c.pi + state.rho * gap).squaredNorm();
    total += gap.squaredNorm();
    grad_shared -= c.pi + state.rho * gap;
  }
  return total + grad_shared.squaredNorm();
}

double Residuals::max() const { return std::max({r1, r2, r3, r4}); }

Residuals stationarity_residuals(const FederationState& state, std::span<const LocalObjective> objectives) {
  check_sizes(state, objectives);
  Residuals r;
  ParamVec pi_sum = ParamVec::Zero(state.u.size());
  ParamVec grad_sum = ParamVec::Zero(state.u.size());
  for (std::size_t i = 0; i < state.clients.size(); ++i) {
    const auto& c = state.clients[i];
    const double alpha = objectives[i].alpha();
    const ParamVec& v = state.personal_for(static_cast<int>(i));
    const LossGrad lg = objectives[i].loss_and_grads(v, c.u);
    r.r1 = std::max(r.r1, (alpha * lg.grad_u + c.pi + state.rho * (c.u - state.u)).norm());
    r.r2 = std::max(r.r2, lg.grad_v.norm());
    r.r3 = std::max(r.r3, (c.u - state.u).norm());
    pi_sum += c.pi;
    grad_sum += alpha * objectives[i].loss_and_grads(v, state.u).grad_u;
  }
  r.r4 = pi_sum.norm();
  r.r1_original = grad_sum.norm();
  return r;
}

double drift_metric(const FederationState& state) {
  require(!state.clients.empty(), "drift_metric: need at least one client");
  double total = 0.0;
  for (const auto& c : state.clients) total += (c.u - state.u).norm();
  return total / static_cast<double>(state.clients.size());
}

Check descent_check(double lyap_t, double lyap_next, double a, double sigma_p) {
  Check c;
  c.lhs = lyap_t - lyap_next;
  c.rhs = a * sigma_p;
  c.pass = c.lhs - c.rhs >= -1e-9 * std::max(1.0, std::abs(lyap_t));
  return c;
}

Check relative_error_check(double dist_sq, double b, double sigma_p, double xi_tilde) {
  Check c;
  c.lhs = dist_sq;
  c.rhs = b * (sigma_p + xi_tilde);
  c.pass = c.lhs <= c.rhs * (1.0 + 1e-9);
  return c;
}

std::vector<Check> dual_bound_check(const FederationState& prev, const FederationState& next) {
  require(prev.clients.size() == next.clients.size(), "dual_bound_check: client count changed");
  const double rho = next.rho;
  std::vector<Check> out;
  out.reserve(next.clients.size());
  for (std::size_t i = 0; i < next.clients.size(); ++i) {
    const auto& p = prev.clients[i];
    const auto& n = next.clients[i];
    Check c;
    c.lhs = (n.pi - p.pi).squaredNorm();
    c.rhs = 24.0 / (1.0 - n.mu) * (p.xi - n.xi) +
            4.0 / 15.0 * rho * rho * ((n.u - p.u).squaredNorm() + (n.v - p.v).squaredNorm());
    c.pass = c.lhs <= c.rhs * (1.0 + 1e-9) + 1e-300;
    out.push_back(c);
  }
  return out;
}

double step_sum_sq(const FederationState& prev, const FederationState& next) {
  require(prev.clients.size() == next.clients.size(), "step_sum_sq: client count changed");
  const double du = (next.u - prev.u).squaredNorm();
  double total = 0.0;
  for (std::size_t i = 0; i < next.clients.size(); ++i) {
    total += (next.clients[i].v - prev.clients[i].v).squaredNorm();
    total += (next.clients[i].u - prev.clients[i].u).squaredNorm();
    total += du;
  }
  return total;
}

bool TheoryRow::dual_ok() const {
  return std::all_of(dual.begin(), dual.end(), [](const Check& c) { return c.pass; });
}

TheoryRow make_theory_row(const FederationState& prev, const FederationState& next,
                          std::span<const LocalObjective> objectives, bool full_participation) {
  TheoryRow row;
  row.round = next.round;
  row.full_participation = full_participation;

  std::vector<double> sigma, mu, xi_prev, xi_next;
  for (std::size_t i = 0; i < next.clients.size(); ++i) {
    sigma.push_back(next.clients[i].sigma);
    mu.push_back(next.clients[i].mu);
    xi_prev.push_back(prev.clients[i].xi);
    xi_next.push_back(next.clients[i].xi);
  }
  row.a = descent_constant(next.rho, sigma);
  row.b = relerr_constant(next.rho, sigma, mu);

  row.loss_local = local_loss(next, objectives);
  row.loss_shared = shared_loss(next, objectives);
  row.lagrangian = lagrangian_value(next, objectives);
  row.lyapunov = lyapunov_value(row.lagrangian, xi_next, mu, next.rho);
  const double lyap_prev = lyapunov_value(lagrangian_value(prev, objectives), xi_prev, mu, prev.rho);

  row.sigma_p = step_sum_sq(prev, next);
  for (std::size_t i = 0; i < xi_next.size(); ++i) {
    row.xi_sum += xi_next[i];
    row.xi_tilde += xi_prev[i] - xi_next[i];
  }
  row.descent = descent_check(lyap_prev, row.lyapunov, row.a, row.sigma_p);
  row.relerr = relative_error_check(stationarity_dist_sq(prev, objectives), row.b, row.sigma_p, row.xi_tilde);
  row.dual = dual_bound_check(prev, next);

  row.lower_bound.lhs = row.lyapunov - 28.0 / next.rho * row.xi_sum;
  row.lower_bound.rhs = row.loss_shared;
  row.lower_bound.pass =
      row.lower_bound.lhs >= row.lower_bound.rhs - 1e-9 * std::max(1.0, std::abs(row.lower_bound.rhs));

  row.residuals = stationarity_residuals(next, objectives);
  row.drift = drift_metric(next);
  return row;
}

std::string_view to_string(RateRegime r) {
  switch (r) {
    case RateRegime::finite: return "finite";
    case RateRegime::linear: return "linear";
    case RateRegime::sublinear: return "sublinear";
    case RateRegime::inconclusive: return "inconclusive";
  }
  return "unknown";
}

namespace {

struct LineFit {
  double slope = 0.0;
  double r_squared = 0.0;
  bool degenerate = false;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  if (!(syy > 1e-24 * std::max(1.0, my * my))) {
    f.degenerate = true;
    f.slope = 0.0;
    return f;
  }
  f.r_squared = sxy * sxy / (sxx * syy);
  return f;
}

}  // namespace

RateFit rate_fit(std::span<const double> gaps) {
  RateFit out;
  if (gaps.size() < 20) {
    out.reason = "need at least 20 gaps";
    return out;
  }
  for (double g : gaps) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      out.reason = "non-positive or non-finite gap";
      return out;
    }
  }
  const std::size_t start = gaps.size() / 2;
  std::vector<double> t, log_t, log_gap;
  bool at_floor = true;
  for (std::size_t k = start; k < gaps.size(); ++k) {
    t.push_back(static_cast<double>(k));
    log_t.push_back(std::log(static_cast<double>(k + 1)));
    log_gap.push_back(std::log(gaps[k]));
    at_floor = at_floor && gaps[k] <= 2.0 * kRateFloor;
  }
  if (at_floor) {
    out.regime = RateRegime::finite;
    out.reason = "tail gaps sit at the floor";
    return out;
  }
  const LineFit lin = fit_line(t, log_gap);
  out.slope = lin.slope;
  out.r_squared = lin.r_squared;
  if (lin.degenerate) {
    out.reason = "constant tail";
    return out;
  }
  const LineFit power = fit_line(log_t, log_gap);
  const bool power_ok = !power.degenerate && power.r_squared >= 0.98 && power.slope < 0.0;
  if (lin.r_squared >= 0.98 && lin.slope < 0.0 && !(power_ok && power.r_squared > lin.r_squared)) {
    out.regime = RateRegime::linear;
    return out;
  }
  if (power_ok) {
    out.regime = RateRegime::sublinear;
    out.reason = "log-log fit preferred";
    return out;
  }
  out.reason = "no fit reached r^2 >= 0.98 with negative slope";
  return out;
}

std::vector<double> lyapunov_gaps(std::span<const double> values, double limit, double floor) {
  std::vector<double> gaps;
  gaps.reserve(values.size());
  for (double v : values) gaps.push_back(v - (limit - floor));
  return gaps;
}

}  // namespace fedapm
