#include "fedapm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedapm/errors.hpp"
#include "fedapm/parallel.hpp"

namespace fedapm {

ParamVec aggregate(std::span<const ParamVec> z_all) {
  if (z_all.empty()) throw ContractViolation("aggregate: need at least one upload");
  ParamVec mean = z_all.front();
  for (std::size_t k = 1; k < z_all.size(); ++k) {
    if (z_all[k].size() != mean.size()) throw ContractViolation("aggregate: dimension mismatch");
    mean += (z_all[k] - mean) / static_cast<double>(k + 1);
  }
  return mean;
}

ParamVec weighted_aggregate(std::span<const ParamVec> values, std::span<const double> weights) {
  if (values.empty()) throw ContractViolation("weighted_aggregate: need at least one value");
  if (values.size() != weights.size()) throw ContractViolation("weighted_aggregate: weight count mismatch");
  ParamVec mean = values.front();
  double total = weights.front();
  if (!(total > 0.0)) throw ContractViolation("weighted_aggregate: weights must be positive");
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k].size() != mean.size()) throw ContractViolation("weighted_aggregate: dimension mismatch");
    if (!(weights[k] > 0.0)) throw ContractViolation("weighted_aggregate: weights must be positive");
    total += weights[k];
    mean += (weights[k] / total) * (values[k] - mean);
  }
  return mean;
}

int selection_size(int m, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction", "selection fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  if (m < 1) throw ContractViolation("select_clients: m must be >= 1");
  return std::clamp(static_cast<int>(std::lround(fraction * m)), 1, m);
}

std::vector<int> select_clients(int m, double fraction, Rng& rng) {
  const int s = selection_size(m, fraction);
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  if (s == m) return idx;
  // Partial Fisher-Yates: the first s slots become a uniform sample without replacement.
  for (int k = 0; k < s; ++k) {
    const auto j = static_cast<std::size_t>(k) + uniform_index(rng, static_cast<std::size_t>(m - k));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(s));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng) {
  if (n < 1) throw InvalidObjective("epoch_batches: empty data shard");
  if (batch_size < 1) throw ContractViolation("epoch_batches: batch_size must be >= 1");
  const int bs = std::min(batch_size, n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  shuffle_in_place(perm, rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += bs) {
    const int end = std::min(n, start + bs);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

namespace {

struct GlobalConstants {
  double l_u = 0.0, l_v = 0.0, l_uv = 0.0;
};

GlobalConstants global_constants(std::span<const LipschitzEstimates> lipschitz) {
  GlobalConstants g;
  for (const auto& l : lipschitz) {
    g.l_u = std::max(g.l_u, l.l_u);
    g.l_v = std::max(g.l_v, l.l_v);
    g.l_uv = std::max(g.l_uv, l.l_uv);
  }
  return g;
}

}  // namespace

Hyperparams auto_hyperparams(std::span<const LipschitzEstimates> lipschitz,
                             std::span<const double> alphas, RhoPolicy policy) {
  if (lipschitz.size() != alphas.size() || alphas.empty()) {
    throw ContractViolation("auto_hyperparams: need one Lipschitz estimate per client");
  }
  const GlobalConstants g = global_constants(lipschitz);
  double rho = 0.0;
  for (double a : alphas) {
    const double floor_term = policy == RhoPolicy::literal ? 2.0 * g.l_u : 2.0 * a * g.l_u;
    rho = std::max({rho, 3.0 * a * g.l_u, 3.0 * a * g.l_uv, floor_term});
  }
  if (!(rho > 0.0)) throw ContractViolation("auto_hyperparams: all Lipschitz constants are zero");
  return Hyperparams{rho, auto_sigma(rho, lipschitz, alphas)};
}

std::vector<double> auto_sigma(double rho, std::span<const LipschitzEstimates> lipschitz,
                               std::span<const double> alphas) {
  if (lipschitz.size() != alphas.size()) {
    throw ContractViolation("auto_sigma: need one Lipschitz estimate per client");
  }
  const GlobalConstants g = global_constants(lipschitz);
  std::vector<double> sigma;
  for (double a : alphas) sigma.push_back(1.05 * std::max(8.0 / 15.0 * rho, a * g.l_v));
  return sigma;
}

bool HyperparamCheck::all_ok() const {
  return std::all_of(ok.begin(), ok.end(), [](bool b) { return b; });
}

HyperparamCheck check_hyperparams(double rho, std::span<const double> sigma,
                                  std::span<const LipschitzEstimates> lipschitz,
                                  std::span<const double> alphas) {
  if (sigma.size() != alphas.size() || lipschitz.size() != alphas.size()) {
    throw ContractViolation("check_hyperparams: per-client inputs differ in length");
  }
  const GlobalConstants g = global_constants(lipschitz);
  HyperparamCheck out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double lower = std::max(3.0 * alphas[i] * g.l_u, 3.0 * alphas[i] * g.l_uv);
    const double upper = 15.0 / 8.0 * sigma[i];
    const double sig_floor = alphas[i] * g.l_v;
    out.rho_lower_margin.push_back(rho - lower);
    out.rho_upper_margin.push_back(upper - rho);
    out.sigma_margin.push_back(sigma[i] - sig_floor);
    out.ok.push_back(lower <= rho && rho <= upper && sigma[i] >= sig_floor);
  }
  return out;
}

FederationState init_federation(std::span<const LocalObjective> objectives,
                                std::span<const LipschitzEstimates> lipschitz,
                                const EngineConfig& cfg) {
  const int m = static_cast<int>(objectives.size());
  if (m < 1) throw ContractViolation("init_federation: need at least one client");
  if (lipschitz.size() != objectives.size()) {
    throw ContractViolation("init_federation: need one Lipschitz estimate per client");
  }
  if (!(cfg.rho > 0.0)) throw ConfigError("rho", "rho must be positive");
  if (!(cfg.mu > 0.0 && cfg.mu < 1.0)) throw ConfigError("mu", "mu must lie in (0, 1)");
  if (!(cfg.xi0 > 0.0)) throw ConfigError("xi0", "xi0 must be positive");
  if (cfg.sigma.size() != 1 && cfg.sigma.size() != objectives.size()) {
    throw ConfigError("sigma", "expected one sigma or one per client");
  }
  for (double s : cfg.sigma) {
    if (!(s > 0.0)) throw ConfigError("sigma", "sigma must be positive");
  }
  selection_size(m, cfg.selection_fraction);  // validates the fraction

  const int ds = objectives.front().spec().shared_dim;
  const int dp = objectives.front().spec().personal_dim;
  for (const auto& obj : objectives) {
    if (obj.spec().shared_dim != ds || obj.spec().personal_dim != dp) {
      throw ContractViolation("init_federation: clients disagree on parameter dimensions");
    }
  }

  FederationState state;
  state.rho = cfg.rho;
  state.selection_fraction = cfg.selection_fraction;
  state.selection_rng = make_stream(cfg.seed, kSelectionStream);
  Rng init_rng = make_stream(cfg.seed, kInitStream);
  const ParamVec u0 = random_normal(ds, init_rng, cfg.init_scale);

  state.clients.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& obj = objectives[static_cast<std::size_t>(i)];
    ClientState c;
    c.v = random_normal(dp, init_rng, cfg.init_scale);
    c.u = u0;
    c.alpha = obj.alpha();
    c.xi = cfg.xi0;
    c.mu = cfg.mu;
    c.sigma = cfg.sigma.size() == 1 ? cfg.sigma.front() : cfg.sigma[static_cast<std::size_t>(i)];
    c.lipschitz = lipschitz[static_cast<std::size_t>(i)];
    c.pi = cfg.dual_warm_start ? ParamVec(-obj.alpha() * obj.loss_and_grads(c.v, c.u).grad_u)
                               : ParamVec(ParamVec::Zero(ds));
    c.z = c.u + c.pi / cfg.rho;
    c.rng = make_stream(cfg.seed, static_cast<std::uint64_t>(i));
    state.clients.push_back(std::move(c));
  }
  std::vector<ParamVec> z;
  for (const auto& c : state.clients) z.push_back(c.z);
  state.u = aggregate(z);
  return state;
}

double aug_lagrangian_i(const LocalObjective& obj, const ParamVec& v, const ParamVec& u_i,
                        const ParamVec& pi_i, const ParamVec& u, double rho) {
  if (u_i.size() != u.size() || pi_i.size() != u.size()) {
    throw ContractViolation("aug_lagrangian_i: dimension mismatch");
  }
  if (!(rho > 0.0)) throw ContractViolation("aug_lagrangian_i: rho must be positive");
  const ParamVec gap = u_i - u;
  return obj.alpha() * obj.loss(v, u_i) + pi_i.dot(gap) + 0.5 * rho * gap.squaredNorm();
}

namespace {

double v_subproblem(const LocalObjective& obj, const ParamVec& v, const ParamVec& u_i,
                    const ParamVec& v_t, double sigma) {
  return obj.alpha() * obj.loss(v, u_i) + 0.5 * sigma * (v - v_t).squaredNorm();
}

}  // namespace

VSolveResult solve_v_prox(const LocalObjective& obj, const ParamVec& v_t, const ParamVec& u_i,
                          double sigma, double l_v, const InnerConfig& inner) {
  if (!(sigma > 0.0)) throw ContractViolation("solve_v_prox: sigma must be positive");
  if (v_t.size() != obj.spec().personal_dim) throw ContractViolation("solve_v_prox: v dimension mismatch");
  VSolveResult out;
  out.v = v_t;
  if (v_t.size() == 0) return out;

  const double alpha = obj.alpha();
  double step = 1.0 / (alpha * std::max(l_v, 0.0) + sigma);
  LossGrad lg = obj.loss_and_grads(out.v, u_i);
  ParamVec grad = alpha * lg.grad_v;  // proximal term vanishes at v_t
  double value = alpha * lg.loss;
  out.grad_norm = grad.norm();
  while (out.iterations < inner.v_max_iters && out.grad_norm > inner.v_tol) {
    ParamVec trial = out.v - step * grad;
    double trial_value = v_subproblem(obj, trial, u_i, v_t, sigma);
    // Backtrack if the Lipschitz estimate was too optimistic for this region.
    int halvings = 0;
    while (!(trial_value <= value) && halvings < 60) {
      step *= 0.5;
      trial = out.v - step * grad;
      trial_value = v_subproblem(obj, trial, u_i, v_t, sigma);
      ++halvings;
    }
    if (!all_finite(trial) || !std::isfinite(trial_value)) {
      throw DivergenceError(-1, -1, "v-subproblem produced a non-finite iterate");
    }
    if (!(trial_value <= value)) break;  // no further decrease representable
    out.v = std::move(trial);
    value = trial_value;
    ++out.iterations;
    lg = obj.loss_and_grads(out.v, u_i);
    grad = alpha * lg.grad_v + sigma * (out.v - v_t);
    out.grad_norm = grad.norm();
  }
  return out;
}

double u_residual_sq(const LocalObjective& obj, const ParamVec& v, const ParamVec& u,
                     const ParamVec& pi, const ParamVec& u_t, double rho) {
  const LossGrad lg = obj.loss_and_grads(v, u);
  return (obj.alpha() * lg.grad_u + pi + rho * (u - u_t)).squaredNorm();
}

USolveResult solve_u_approx(const LocalObjective& obj, const ParamVec& v_new, const ParamVec& u_i_t,
                            const ParamVec& pi_t, const ParamVec& u_t, double rho, double xi_target,
                            double l_u, const InnerConfig& inner, Rng& rng) {
  if (!(rho > 0.0)) throw ContractViolation("solve_u_approx: rho must be positive");
  if (!(xi_target > 0.0 && xi_target < 1.0)) {
    throw ContractViolation("solve_u_approx: xi_target must lie in (0, 1)");
  }
  if (u_i_t.size() != u_t.size() || pi_t.size() != u_t.size()) {
    throw ContractViolation("solve_u_approx: dimension mismatch");
  }
  const double alpha = obj.alpha();
  const double step = 1.0 / (alpha * std::max(l_u, 0.0) + rho);
  USolveResult out;
  out.u = u_i_t;
  out.residual_sq = u_residual_sq(obj, v_new, out.u, pi_t, u_t, rho);
  while (out.residual_sq > xi_target) {
    if (out.passes >= inner.u_max_passes) {
      out.hit_max_passes = true;
      break;
    }
    for (const auto& batch : epoch_batches(obj.num_samples(), inner.batch_size, rng)) {
      const LossGrad lg = obj.loss_and_grads(v_new, out.u, batch);
      out.u -= step * (alpha * lg.grad_u + pi_t + rho * (out.u - u_t));
    }
    ++out.passes;
    if (!all_finite(out.u)) throw DivergenceError(-1, -1, "u-subproblem produced a non-finite iterate");
    out.residual_sq = u_residual_sq(obj, v_new, out.u, pi_t, u_t, rho);
  }
  return out;
}

DualUpdate update_dual_and_z(const ParamVec& u_new, const ParamVec& u_t, const ParamVec& pi_t,
                             double rho) {
  if (u_new.size() != u_t.size() || pi_t.size() != u_t.size()) {
    throw ContractViolation("update_dual_and_z: dimension mismatch");
  }
  if (!(rho > 0.0)) throw ContractViolation("update_dual_and_z: rho must be positive");
  DualUpdate out;
  out.pi = pi_t + rho * (u_new - u_t);
  out.z = u_new + out.pi / rho;
  return out;
}

int RoundReport::u_flags() const {
  return static_cast<int>(std::count_if(clients.begin(), clients.end(),
                                        [](const ClientRoundInfo& c) { return c.u_flagged; }));
}

namespace {

void check_objectives(const FederationState& state, std::span<const LocalObjective> objectives) {
  if (objectives.size() != state.clients.size()) {
    throw ContractViolation("round: one objective per client required");
  }
}

ParamVec aggregate_uploads(const FederationState& state) {
  std::vector<ParamVec> z;
  z.reserve(state.clients.size());
  for (const auto& c : state.clients) z.push_back(c.z);
  return aggregate(z);
}

}  // namespace

RoundReport run_round(FederationState& state, std::span<const LocalObjective> objectives,
                      const InnerConfig& inner, int workers) {
  check_objectives(state, objectives);
  RoundReport report;
  report.round = state.round;

  // Upload, aggregate, broadcast.
  state.u = aggregate_uploads(state);
  const ParamVec u_t = state.u;

  // Client sampling.
  report.selected = select_clients(state.num_clients(), state.selection_fraction, state.selection_rng);
  report.full_participation = static_cast<int>(report.selected.size()) == state.num_clients();
  report.clients.resize(report.selected.size());

  const double rho = state.rho;
  const int round = state.round;
  parallel_for(static_cast<int>(report.selected.size()), workers, [&](int k) {
    const int i = report.selected[static_cast<std::size_t>(k)];
    const LocalObjective& obj = objectives[static_cast<std::size_t>(i)];
    ClientState& c = state.clients[static_cast<std::size_t>(i)];
    ClientRoundInfo& info = report.clients[static_cast<std::size_t>(k)];
    info.client = i;
    try {
      VSolveResult vr = solve_v_prox(obj, c.v, c.u, c.sigma, c.lipschitz.l_v, inner);
      const double xi_next = c.mu * c.xi;
      USolveResult ur = solve_u_approx(obj, vr.v, c.u, c.pi, u_t, rho, xi_next, c.lipschitz.l_u, inner, c.rng);
      DualUpdate du = update_dual_and_z(ur.u, u_t, c.pi, rho);

      info.v_iterations = vr.iterations;
      info.u_passes = ur.passes;
      info.u_residual_sq = ur.residual_sq;
      info.xi_target = xi_next;
      info.u_flagged = ur.hit_max_passes;

      c.v = std::move(vr.v);
      c.xi = xi_next;
      c.u = std::move(ur.u);
      c.pi = std::move(du.pi);
      c.z = std::move(du.z);
    } catch (const DivergenceError& e) {
      throw DivergenceError(i, round, e.what());
    }
  });

  state.u = aggregate_uploads(state);
  ++state.round;
  return report;
}

RoundReport penalty_mode_round(FederationState& state, std::span<const LocalObjective> objectives,
                               const LocalSgdConfig& sgd, PenaltyVariant variant, int workers) {
  check_objectives(state, objectives);
  if (sgd.local_epochs < 0) throw ConfigError("local_epochs", "local_epochs must be >= 0");
  if (sgd.learning_rate < 0.0) throw ConfigError("lr", "learning rate must be nonnegative");
  RoundReport report;
  report.round = state.round;

  // Uploads are z_i = u_i in this mode (pi = 0, rho -> 0).
  state.u = aggregate_uploads(state);
  const ParamVec u_t = state.u;

  report.selected = select_clients(state.num_clients(), state.selection_fraction, state.selection_rng);
  report.full_participation = static_cast<int>(report.selected.size()) == state.num_clients();
  report.clients.resize(report.selected.size());

  constexpr double kRho = 0.0;
  const int round = state.round;
  parallel_for(static_cast<int>(report.selected.size()), workers, [&](int k) {
    const int i = report.selected[static_cast<std::size_t>(k)];
    const LocalObjective& obj = objectives[static_cast<std::size_t>(i)];
    ClientState& c = state.clients[static_cast<std::size_t>(i)];
    ClientRoundInfo& info = report.clients[static_cast<std::size_t>(k)];
    info.client = i;

    const double alpha = obj.alpha();
    const double step = sgd.learning_rate / alpha;  // SGD on alpha f_i at the client's learning rate
    ParamVec pi = ParamVec::Zero(u_t.size());
    ParamVec u_i = u_t;
    ParamVec v = c.v;

    auto grad_u_lagrangian = [&](const LossGrad& lg) -> ParamVec {
      return alpha * lg.grad_u + pi + kRho * (u_i - u_t);
    };

    if (variant == PenaltyVariant::alt) {
      for (int e = 0; e < sgd.local_epochs && v.size() > 0; ++e) {
        for (const auto& batch : epoch_batches(obj.num_samples(), sgd.batch_size, c.rng)) {
          const LossGrad lg = obj.loss_and_grads(v, u_i, batch);
          v -= step * (alpha * lg.grad_v);
          info.partial_grad_evals += static_cast<long>(batch.size());
        }
      }
      for (int e = 0; e < sgd.local_epochs; ++e) {
        for (const auto& batch : epoch_batches(obj.num_samples(), sgd.batch_size, c.rng)) {
          const LossGrad lg = obj.loss_and_grads(v, u_i, batch);
          u_i -= step * grad_u_lagrangian(lg);
          info.partial_grad_evals += static_cast<long>(batch.size());
        }
      }
    } else {
      for (int e = 0; e < sgd.local_epochs; ++e) {
        for (const auto& batch : epoch_batches(obj.num_samples(), sgd.batch_size, c.rng)) {
          const LossGrad lg = obj.loss_and_grads(v, u_i, batch);
          const ParamVec gu = grad_u_lagrangian(lg);
          v -= step * (alpha * lg.grad_v);
          u_i -= step * gu;
          info.partial_grad_evals += 2L * static_cast<long>(batch.size());
        }
      }
    }
    if (!all_finite(v) || !all_finite(u_i)) {
      throw DivergenceError(i, round, "penalty-mode local update produced a non-finite iterate");
    }
    c.v = std::move(v);
    c.u = std::move(u_i);
    c.pi = std::move(pi);
    c.z = c.u;
  });

  state.u = aggregate_uploads(state);
  ++state.round;
  return report;
}

}  // namespace fedapm
