#include "fedapm/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "fedapm/errors.hpp"

namespace fedapm {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::fedapm: return "fedapm";
    case Method::fedavg: return "fedavg";
    case Method::fedprox: return "fedprox";
    case Method::fedalt: return "fedalt";
    case Method::fedsim: return "fedsim";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::fedapm, Method::fedavg, Method::fedprox, Method::fedalt, Method::fedsim}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("method", "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(ProblemKind p) {
  return p == ProblemKind::classification ? "classification" : "quadratic";
}

std::vector<std::uint64_t> RunConfig::default_seeds() {
  std::vector<std::uint64_t> s(20);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = k;
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto comma = s.find(',');
    parts.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return parts;
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(std::string(key), "expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

long long to_integer(std::string_view key, std::string_view value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(std::string(key), "expected an integer, got '" + std::string(value) + "'");
  }
  return out;
}

int to_int(std::string_view key, std::string_view value) {
  const long long v = to_integer(key, value);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(std::string(key), "integer out of range");
  return static_cast<int>(v);
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(value) + "'");
}

std::vector<std::uint64_t> to_seeds(std::string_view value) {
  std::vector<std::uint64_t> seeds;
  if (const auto dots = value.find(".."); dots != std::string_view::npos) {
    const long long lo = to_integer("seeds", trim(value.substr(0, dots)));
    const long long hi = to_integer("seeds", trim(value.substr(dots + 2)));
    if (lo < 0 || hi < lo) throw ConfigError("seeds", "range must satisfy 0 <= lo <= hi");
    for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    return seeds;
  }
  for (auto part : split_list(value)) {
    const long long s = to_integer("seeds", part);
    if (s < 0) throw ConfigError("seeds", "seeds must be nonnegative");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  return seeds;
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename F>
void wrap(std::string_view key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(key), e.what());
  }
}

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"method",
       [](RunConfig& c, std::string_view v) {
         c.methods.clear();
         for (auto part : split_list(v)) c.methods.push_back(parse_method(part));
       },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t k = 0; k < c.methods.size(); ++k) {
           if (k) s += ",";
           s += to_string(c.methods[k]);
         }
         return s;
       }},
      {"rounds", [](RunConfig& c, std::string_view v) { c.rounds = to_int("rounds", v); },
       [](const RunConfig& c) { return std::to_string(c.rounds); }},
      {"seeds", [](RunConfig& c, std::string_view v) { c.seeds = to_seeds(v); },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t k = 0; k < c.seeds.size(); ++k) {
           if (k) s += ",";
           s += std::to_string(c.seeds[k]);
         }
         return s;
       }},
      {"rho",
       [](RunConfig& c, std::string_view v) {
         if (v == "auto") {
           c.rho.reset();
         } else {
           c.rho = to_double("rho", v);
         }
       },
       [](const RunConfig& c) { return c.rho ? fmt(*c.rho) : std::string("auto"); }},
      {"rho_policy",
       [](RunConfig& c, std::string_view v) {
         if (v == "weighted") {
           c.rho_policy = RhoPolicy::weighted;
         } else if (v == "literal") {
           c.rho_policy = RhoPolicy::literal;
         } else {
           throw ConfigError("rho_policy", "expected weighted or literal");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.rho_policy == RhoPolicy::weighted ? "weighted" : "literal");
       }},
      {"sigma",
       [](RunConfig& c, std::string_view v) {
         c.sigma.clear();
         if (v == "auto") return;
         for (auto part : split_list(v)) c.sigma.push_back(to_double("sigma", part));
       },
       [](const RunConfig& c) {
         if (c.sigma.empty()) return std::string("auto");
         std::string s;
         for (std::size_t k = 0; k < c.sigma.size(); ++k) {
           if (k) s += ",";
           s += fmt(c.sigma[k]);
         }
         return s;
       }},
      {"xi0", [](RunConfig& c, std::string_view v) { c.xi0 = to_double("xi0", v); },
       [](const RunConfig& c) { return fmt(c.xi0); }},
      {"mu", [](RunConfig& c, std::string_view v) { c.mu = to_double("mu", v); },
       [](const RunConfig& c) { return fmt(c.mu); }},
      {"fraction", [](RunConfig& c, std::string_view v) { c.fraction = to_double("fraction", v); },
       [](const RunConfig& c) { return fmt(c.fraction); }},
      {"init_scale", [](RunConfig& c, std::string_view v) { c.init_scale = to_double("init_scale", v); },
       [](const RunConfig& c) { return fmt(c.init_scale); }},
      {"dual_warm_start",
       [](RunConfig& c, std::string_view v) { c.dual_warm_start = to_bool("dual_warm_start", v); },
       [](const RunConfig& c) { return fmt_bool(c.dual_warm_start); }},
      {"lipschitz_probes",
       [](RunConfig& c, std::string_view v) { c.lipschitz_probes = to_int("lipschitz_probes", v); },
       [](const RunConfig& c) { return std::to_string(c.lipschitz_probes); }},
      {"v_tol", [](RunConfig& c, std::string_view v) { c.inner.v_tol = to_double("v_tol", v); },
       [](const RunConfig& c) { return fmt(c.inner.v_tol); }},
      {"v_max_iters", [](RunConfig& c, std::string_view v) { c.inner.v_max_iters = to_int("v_max_iters", v); },
       [](const RunConfig& c) { return std::to_string(c.inner.v_max_iters); }},
      {"u_max_passes",
       [](RunConfig& c, std::string_view v) { c.inner.u_max_passes = to_int("u_max_passes", v); },
       [](const RunConfig& c) { return std::to_string(c.inner.u_max_passes); }},
      {"u_batch_size",
       [](RunConfig& c, std::string_view v) { c.inner.batch_size = to_int("u_batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.inner.batch_size); }},
      {"batch_size", [](RunConfig& c, std::string_view v) { c.sgd.batch_size = to_int("batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.sgd.batch_size); }},
      {"local_epochs", [](RunConfig& c, std::string_view v) { c.sgd.local_epochs = to_int("local_epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.sgd.local_epochs); }},
      {"lr", [](RunConfig& c, std::string_view v) { c.sgd.learning_rate = to_double("lr", v); },
       [](const RunConfig& c) { return fmt(c.sgd.learning_rate); }},
      {"prox_weight", [](RunConfig& c, std::string_view v) { c.sgd.prox_weight = to_double("prox_weight", v); },
       [](const RunConfig& c) { return fmt(c.sgd.prox_weight); }},
      {"problem",
       [](RunConfig& c, std::string_view v) {
         if (v == "classification") {
           c.problem = ProblemKind::classification;
         } else if (v == "quadratic") {
           c.problem = ProblemKind::quadratic;
         } else {
           throw ConfigError("problem", "expected classification or quadratic");
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.problem)); }},
      {"clients",
       [](RunConfig& c, std::string_view v) { c.synthetic.m = to_int("clients", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.m); }},
      {"alpha_mode",
       [](RunConfig& c, std::string_view v) {
         wrap("alpha_mode", [&] { c.synthetic.alpha_mode = parse_alpha_mode(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.synthetic.alpha_mode)); }},
      {"classes", [](RunConfig& c, std::string_view v) { c.synthetic.classes = to_int("classes", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.classes); }},
      {"features", [](RunConfig& c, std::string_view v) { c.synthetic.feature_dim = to_int("features", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.feature_dim); }},
      {"samples_per_client",
       [](RunConfig& c, std::string_view v) { c.synthetic.samples_per_client = to_int("samples_per_client", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.samples_per_client); }},
      {"concentration",
       [](RunConfig& c, std::string_view v) {
         c.synthetic.dirichlet_concentration = to_double("concentration", v);
       },
       [](const RunConfig& c) { return fmt(c.synthetic.dirichlet_concentration); }},
      {"heterogeneity",
       [](RunConfig& c, std::string_view v) { c.synthetic.heterogeneity = to_double("heterogeneity", v); },
       [](const RunConfig& c) { return fmt(c.synthetic.heterogeneity); }},
      {"separation",
       [](RunConfig& c, std::string_view v) { c.synthetic.class_separation = to_double("separation", v); },
       [](const RunConfig& c) { return fmt(c.synthetic.class_separation); }},
      {"strategy",
       [](RunConfig& c, std::string_view v) { wrap("strategy", [&] { c.synthetic.strategy = parse_strategy(v); }); },
       [](const RunConfig& c) { return std::string(to_string(c.synthetic.strategy)); }},
      {"hidden", [](RunConfig& c, std::string_view v) { c.synthetic.hidden = to_int("hidden", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.hidden); }},
      {"personal_features",
       [](RunConfig& c, std::string_view v) { c.synthetic.personal_features = to_int("personal_features", v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic.personal_features); }},
      {"train_fraction",
       [](RunConfig& c, std::string_view v) { c.synthetic.train_fraction = to_double("train_fraction", v); },
       [](const RunConfig& c) { return fmt(c.synthetic.train_fraction); }},
      {"shared_dim", [](RunConfig& c, std::string_view v) { c.quadratic.shared_dim = to_int("shared_dim", v); },
       [](const RunConfig& c) { return std::to_string(c.quadratic.shared_dim); }},
      {"personal_dim",
       [](RunConfig& c, std::string_view v) { c.quadratic.personal_dim = to_int("personal_dim", v); },
       [](const RunConfig& c) { return std::to_string(c.quadratic.personal_dim); }},
      {"rows", [](RunConfig& c, std::string_view v) { c.quadratic.rows = to_int("rows", v); },
       [](const RunConfig& c) { return std::to_string(c.quadratic.rows); }},
      {"conditioning",
       [](RunConfig& c, std::string_view v) { c.quadratic.conditioning = to_double("conditioning", v); },
       [](const RunConfig& c) { return fmt(c.quadratic.conditioning); }},
      {"target_scale",
       [](RunConfig& c, std::string_view v) { c.quadratic.target_scale = to_double("target_scale", v); },
       [](const RunConfig& c) { return fmt(c.quadratic.target_scale); }},
      {"decouple_personal",
       [](RunConfig& c, std::string_view v) {
         c.quadratic.decouple_personal = to_bool("decouple_personal", v);
       },
       [](const RunConfig& c) { return fmt_bool(c.quadratic.decouple_personal); }},
      {"out", [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
       [](const RunConfig& c) { return c.out_dir; }},
  };
  return table;
}

void range(bool ok, const char* key, const char* message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError(std::string(key), "unknown key");
}

void validate_config(const RunConfig& cfg) {
  range(!cfg.methods.empty(), "method", "at least one method is required");
  range(cfg.rounds >= 1, "rounds", "rounds must be >= 1");
  range(!cfg.seeds.empty(), "seeds", "at least one seed is required");
  range(!cfg.rho || *cfg.rho > 0.0, "rho", "rho must be positive");
  for (double s : cfg.sigma) range(s > 0.0, "sigma", "sigma must be positive");
  range(cfg.xi0 > 0.0, "xi0", "xi0 must be positive");
  range(cfg.mu > 0.0 && cfg.mu < 1.0, "mu", "mu must lie in (0, 1)");
  range(cfg.fraction > 0.0 && cfg.fraction <= 1.0, "fraction", "fraction must lie in (0, 1]");
  range(cfg.init_scale >= 0.0, "init_scale", "init_scale must be nonnegative");
  range(cfg.lipschitz_probes >= 2, "lipschitz_probes", "lipschitz_probes must be >= 2");
  range(cfg.inner.v_tol > 0.0, "v_tol", "v_tol must be positive");
  range(cfg.inner.v_max_iters >= 0, "v_max_iters", "v_max_iters must be >= 0");
  range(cfg.inner.u_max_passes >= 0, "u_max_passes", "u_max_passes must be >= 0");
  range(cfg.inner.batch_size >= 1, "u_batch_size", "u_batch_size must be >= 1");
  range(cfg.sgd.batch_size >= 1, "batch_size", "batch_size must be >= 1");
  range(cfg.sgd.local_epochs >= 0, "local_epochs", "local_epochs must be >= 0");
  range(cfg.sgd.learning_rate > 0.0, "lr", "lr must be positive");
  range(cfg.sgd.prox_weight >= 0.0, "prox_weight", "prox_weight must be nonnegative");
  range(cfg.synthetic.m >= 1, "clients", "clients must be >= 1");
  range(cfg.synthetic.classes >= 2, "classes", "classes must be >= 2");
  range(cfg.synthetic.feature_dim >= 1, "features", "features must be >= 1");
  range(cfg.synthetic.samples_per_client >= 1, "samples_per_client", "samples_per_client must be >= 1");
  range(cfg.synthetic.dirichlet_concentration > 0.0, "concentration", "concentration must be positive");
  range(cfg.synthetic.heterogeneity >= 0.0, "heterogeneity", "heterogeneity must be nonnegative");
  range(cfg.synthetic.class_separation >= 0.0, "separation", "separation must be nonnegative");
  range(cfg.synthetic.hidden >= 1, "hidden", "hidden must be >= 1");
  range(cfg.synthetic.personal_features >= 0 &&
            cfg.synthetic.personal_features < cfg.synthetic.feature_dim,
        "personal_features", "personal_features must lie in [0, features)");
  range(cfg.synthetic.train_fraction > 0.0 && cfg.synthetic.train_fraction < 1.0, "train_fraction",
        "train_fraction must lie in (0, 1)");
  range(cfg.quadratic.shared_dim >= 1, "shared_dim", "shared_dim must be >= 1");
  range(cfg.quadratic.personal_dim >= 0, "personal_dim", "personal_dim must be >= 0");
  range(cfg.quadratic.rows == 0 || cfg.quadratic.rows >= cfg.quadratic.shared_dim + cfg.quadratic.personal_dim,
        "rows", "rows must be 0 or at least shared_dim + personal_dim");
  range(cfg.quadratic.conditioning >= 1.0, "conditioning", "conditioning must be >= 1");
  range(cfg.quadratic.target_scale >= 0.0, "target_scale", "target_scale must be nonnegative");
  range(!cfg.out_dir.empty(), "out", "out must not be empty");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  validate_config(cfg);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace fedapm
