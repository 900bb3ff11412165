#include "fedapm/baselines.hpp"

#include <string>

#include "fedapm/errors.hpp"
#include "fedapm/parallel.hpp"

namespace fedapm {

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::fedavg: return "fedavg";
    case BaselineMethod::fedprox: return "fedprox";
    case BaselineMethod::fedalt: return "fedalt";
    case BaselineMethod::fedsim: return "fedsim";
  }
  return "unknown";
}

FederationState init_baseline(std::span<const LocalObjective> objectives, BaselineMethod method,
                              double selection_fraction, std::uint64_t seed, double init_scale) {
  EngineConfig cfg;
  cfg.rho = 1.0;
  cfg.sigma = {1.0};
  cfg.selection_fraction = selection_fraction;
  cfg.seed = seed;
  cfg.init_scale = init_scale;
  cfg.dual_warm_start = false;
  const std::vector<LipschitzEstimates> zeros(objectives.size());
  FederationState state = init_federation(objectives, zeros, cfg);
  if (method == BaselineMethod::fedavg || method == BaselineMethod::fedprox) {
    state.global_personal = true;
    state.v_global = state.clients.front().v;
    for (auto& c : state.clients) c.v = state.v_global;
  }
  return state;
}

namespace {

void validate(const FederationState& state, std::span<const LocalObjective> objectives,
              const LocalSgdConfig& cfg) {
  if (objectives.size() != state.clients.size()) {
    throw ContractViolation("baseline round: one objective per client required");
  }
  if (cfg.local_epochs < 0) throw ConfigError("local_epochs", "local_epochs must be >= 0");
  if (cfg.learning_rate < 0.0) throw ConfigError("lr", "learning rate must be nonnegative");
  if (cfg.prox_weight < 0.0) throw ConfigError("prox_weight", "prox_weight must be nonnegative");
}

enum class Scheme { whole_model, alternating, simultaneous };

RoundReport local_sgd_round(FederationState& state, std::span<const LocalObjective> objectives,
                            const LocalSgdConfig& cfg, Scheme scheme, double prox, int workers) {
  validate(state, objectives, cfg);
  if (scheme == Scheme::whole_model && !state.global_personal) {
    throw ContractViolation("fedavg/fedprox need a state built with a global personal block");
  }
  RoundReport report;
  report.round = state.round;
  const ParamVec u_t = state.u;
  const ParamVec v_t = state.v_global;

  report.selected = select_clients(state.num_clients(), state.selection_fraction, state.selection_rng);
  report.full_participation = static_cast<int>(report.selected.size()) == state.num_clients();
  report.clients.resize(report.selected.size());

  const int round = state.round;
  const double lr = cfg.learning_rate;
  parallel_for(static_cast<int>(report.selected.size()), workers, [&](int k) {
    const int i = report.selected[static_cast<std::size_t>(k)];
    const LocalObjective& obj = objectives[static_cast<std::size_t>(i)];
    ClientState& c = state.clients[static_cast<std::size_t>(i)];
    ClientRoundInfo& info = report.clients[static_cast<std::size_t>(k)];
    info.client = i;

    ParamVec v = scheme == Scheme::whole_model ? v_t : c.v;
    ParamVec u = u_t;
    const auto n = obj.num_samples();

    switch (scheme) {
      case Scheme::whole_model:
        for (int e = 0; e < cfg.local_epochs; ++e) {
          for (const auto& batch : epoch_batches(n, cfg.batch_size, c.rng)) {
            const LossGrad lg = obj.loss_and_grads(v, u, batch);
            ParamVec gv = lg.grad_v;
            ParamVec gu = lg.grad_u;
            if (prox > 0.0) {
              gv += prox * (v - v_t);
              gu += prox * (u - u_t);
            }
            v -= lr * gv;
            u -= lr * gu;
            info.partial_grad_evals += 2L * static_cast<long>(batch.size());
          }
        }
        break;
      case Scheme::alternating:
        for (int e = 0; e < cfg.local_epochs && v.size() > 0; ++e) {
          for (const auto& batch : epoch_batches(n, cfg.batch_size, c.rng)) {
            v -= lr * obj.loss_and_grads(v, u, batch).grad_v;
            info.partial_grad_evals += static_cast<long>(batch.size());
          }
        }
        for (int e = 0; e < cfg.local_epochs; ++e) {
          for (const auto& batch : epoch_batches(n, cfg.batch_size, c.rng)) {
            u -= lr * obj.loss_and_grads(v, u, batch).grad_u;
            info.partial_grad_evals += static_cast<long>(batch.size());
          }
        }
        break;
      case Scheme::simultaneous:
        for (int e = 0; e < cfg.local_epochs; ++e) {
          for (const auto& batch : epoch_batches(n, cfg.batch_size, c.rng)) {
            const LossGrad lg = obj.loss_and_grads(v, u, batch);
            v -= lr * lg.grad_v;
            u -= lr * lg.grad_u;
            info.partial_grad_evals += 2L * static_cast<long>(batch.size());
          }
        }
        break;
    }
    if (!all_finite(v) || !all_finite(u)) {
      throw DivergenceError(i, round, "local SGD produced a non-finite iterate");
    }
    c.v = std::move(v);
    c.u = std::move(u);
    c.z = c.u;
  });

  std::vector<ParamVec> shared, personal;
  std::vector<double> weights;
  for (int i : report.selected) {
    const ClientState& c = state.clients[static_cast<std::size_t>(i)];
    shared.push_back(c.u);
    if (scheme == Scheme::whole_model) personal.push_back(c.v);
    weights.push_back(c.alpha);
  }
  state.u = weighted_aggregate(shared, weights);
  if (scheme == Scheme::whole_model) state.v_global = weighted_aggregate(personal, weights);
  ++state.round;
  return report;
}

}  // namespace

RoundReport fedavg_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers) {
  return local_sgd_round(state, objectives, cfg, Scheme::whole_model, 0.0, workers);
}

RoundReport fedprox_round(FederationState& state, std::span<const LocalObjective> objectives,
                          const LocalSgdConfig& cfg, int workers) {
  return local_sgd_round(state, objectives, cfg, Scheme::whole_model, cfg.prox_weight, workers);
}

RoundReport fedalt_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers) {
  return local_sgd_round(state, objectives, cfg, Scheme::alternating, 0.0, workers);
}

RoundReport fedsim_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers) {
  return local_sgd_round(state, objectives, cfg, Scheme::simultaneous, 0.0, workers);
}

RoundReport baseline_round(FederationState& state, std::span<const LocalObjective> objectives,
                           const BaselineConfig& cfg, int workers) {
  switch (cfg.method) {
    case BaselineMethod::fedavg: return fedavg_round(state, objectives, cfg.sgd, workers);
    case BaselineMethod::fedprox: return fedprox_round(state, objectives, cfg.sgd, workers);
    case BaselineMethod::fedalt: return fedalt_round(state, objectives, cfg.sgd, workers);
    case BaselineMethod::fedsim: return fedsim_round(state, objectives, cfg.sgd, workers);
  }
  throw ContractViolation("baseline_round: unknown method");
}

}  // namespace fedapm
