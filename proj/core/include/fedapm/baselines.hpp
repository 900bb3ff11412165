#pragma once

#include <span>
#include <string_view>

#include "fedapm/engine.hpp"
#include "fedapm/state.hpp"

namespace fedapm {

enum class BaselineMethod { fedavg, fedprox, fedalt, fedsim };

std::string_view to_string(BaselineMethod m);

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::fedavg;
  LocalSgdConfig sgd;
};

// Round-0 state for a baseline: same initial draws as init_federation, zero duals,
// z_i = u_i = u^0. FedAvg/FedProx additionally share one personal block v_global.
FederationState init_baseline(std::span<const LocalObjective> objectives, BaselineMethod method,
                              double selection_fraction, std::uint64_t seed, double init_scale = 0.0);

// Selected clients run local_epochs of minibatch SGD on the whole model (v_global, u)
// from the broadcast; the server takes the alpha-weighted mean of the returned models.
RoundReport fedavg_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers = 1);

// fedavg_round on f_i(w) + prox_weight/2 ||w - w^t||^2.
RoundReport fedprox_round(FederationState& state, std::span<const LocalObjective> objectives,
                          const LocalSgdConfig& cfg, int workers = 1);

// local_epochs on v_i with u frozen at the broadcast, then local_epochs on a local copy of
// u with the new v_i frozen. Server averages the returned shared blocks.
RoundReport fedalt_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers = 1);

// local_epochs of joint steps; v_i and u_i move from the same pre-step iterate.
RoundReport fedsim_round(FederationState& state, std::span<const LocalObjective> objectives,
                         const LocalSgdConfig& cfg, int workers = 1);

RoundReport baseline_round(FederationState& state, std::span<const LocalObjective> objectives,
                           const BaselineConfig& cfg, int workers = 1);

}  // namespace fedapm
