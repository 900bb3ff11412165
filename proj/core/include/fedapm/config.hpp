#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedapm/baselines.hpp"
#include "fedapm/datagen.hpp"
#include "fedapm/engine.hpp"

namespace fedapm {

enum class Method { fedapm, fedavg, fedprox, fedalt, fedsim };
enum class ProblemKind { classification, quadratic };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::string_view to_string(ProblemKind p);

struct RunConfig {
  std::vector<Method> methods{Method::fedapm};
  int rounds = 100;
  std::vector<std::uint64_t> seeds = default_seeds();

  std::optional<double> rho;           // empty: auto from Lipschitz estimates
  RhoPolicy rho_policy = RhoPolicy::weighted;
  std::vector<double> sigma;           // empty: auto; one value or one per client
  double xi0 = 1.0;
  double mu = 0.5;
  double fraction = 1.0;
  double init_scale = 0.1;
  bool dual_warm_start = true;
  int lipschitz_probes = 16;
  InnerConfig inner;

  LocalSgdConfig sgd;

  // synthetic.m and synthetic.alpha_mode are the client count and weighting for either
  // problem kind; the seed of both specs is replaced by the run seed.
  ProblemKind problem = ProblemKind::classification;
  SyntheticSpec synthetic;
  QuadraticSpec quadratic;

  std::string out_dir = "out";

  static std::vector<std::uint64_t> default_seeds();
};

// Flat "key = value" lines; '#' starts a comment. Absent keys keep their defaults.
// Unknown keys, malformed values and out-of-range values raise ConfigError naming the key.
RunConfig parse_config(std::string_view text);

// Inverse of parse_config: every key, one per line, in a fixed order.
std::string serialize_config(const RunConfig& cfg);

// Applies one key/value pair with the same validation as parse_config.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

void validate_config(const RunConfig& cfg);

}  // namespace fedapm
