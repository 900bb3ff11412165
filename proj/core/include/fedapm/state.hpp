#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedapm/numcore.hpp"
#include "fedapm/rng.hpp"

namespace fedapm {

// Per-client tuple (v_i, u_i, pi_i, z_i, xi_i) with its constants and private RNG stream.
struct ClientState {
  ParamVec v;
  ParamVec u;
  ParamVec pi;
  ParamVec z;
  double xi = 1.0;
  double mu = 0.5;
  double sigma = 1.0;
  double alpha = 1.0;
  LipschitzEstimates lipschitz;
  Rng rng;
};

struct FederationState {
  ParamVec u;  // shared model; equals aggregate(z) between rounds
  std::vector<ClientState> clients;
  int round = 0;
  double rho = 1.0;
  double selection_fraction = 1.0;
  Rng selection_rng;

  // Non-personalized methods (FedAvg, FedProx) keep the personal block global as well.
  bool global_personal = false;
  ParamVec v_global;

  int num_clients() const { return static_cast<int>(clients.size()); }
  // Parameters used by client i when evaluating the deployed model.
  const ParamVec& personal_for(int i) const {
    return global_personal ? v_global : clients[static_cast<std::size_t>(i)].v;
  }
};

// Mean of the uploads, accumulated in ascending index order as a running mean so that
// identical inputs reproduce themselves exactly.
ParamVec aggregate(std::span<const ParamVec> z_all);

// Weighted mean with the same running-mean accumulation; weights need not be normalized.
ParamVec weighted_aggregate(std::span<const ParamVec> values, std::span<const double> weights);

// max(1, round(fraction * m)) distinct indices in [0, m), sorted ascending.
std::vector<int> select_clients(int m, double fraction, Rng& rng);
int selection_size(int m, double fraction);

// Local SGD settings shared by the baselines and the engine's penalty mode.
struct LocalSgdConfig {
  int local_epochs = 3;
  double learning_rate = 0.1;
  int batch_size = 32;
  double prox_weight = 0.0;  // FedProx only
};

// Minibatches for one epoch over n samples, drawn from rng.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng);

}  // namespace fedapm
