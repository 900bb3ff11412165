// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fedapm/config.hpp"
#include "fedapm/diagnostics.hpp"
#include "fedapm/engine.hpp"
#include "fedapm/errors.hpp"
#include "fedapm/experiment.hpp"
#include "fedapm/parallel.hpp"

#ifndef FEDAPM_CONFIG_DIR
#define FEDAPM_CONFIG_DIR "configs"
#endif

using namespace fedapm;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_workers = 1;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %2d %-22s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig load(const std::string& name) {
  std::ifstream in(fs::path(FEDAPM_CONFIG_DIR) / name);
  if (!in) throw std::runtime_error("cannot open config " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Runs {
  std::vector<std::vector<MetricsRow>> rows;  // per seed

  double mean_final(double MetricsRow::*field) const {
    double s = 0.0;
    for (const auto& r : rows) s += r.back().*field;
    return s / static_cast<double>(rows.size());
  }
  double at(std::size_t seed_idx, int round, double MetricsRow::*field) const {
    return rows[seed_idx][static_cast<std::size_t>(round - 1)].*field;
  }
};

Runs run_seeds(const RunConfig& cfg, Method method, int rounds) {
  Runs out;
  for (std::uint64_t seed : cfg.seeds) {
    Simulation sim(cfg, method, seed, g_workers);
    sim.run(rounds);
    out.rows.push_back(sim.rows());
  }
  return out;
}

// Criteria 1-5 share one convex quadratic run.
void convex_run() {
  const RunConfig cfg = load("quadratic_theory.cfg");
  const auto t0 = std::chrono::steady_clock::now();
  Simulation sim(cfg, Method::fedapm, cfg.seeds.front(), g_workers);
  sim.run(cfg.rounds);
  const double secs = seconds_since(t0);

  int descent_bad = 0, relerr_bad = 0, dual_bad = 0, lower_bad = 0, partial = 0;
  double worst_descent = 0.0;
  for (const auto& row : sim.theory()) {
    if (!row.full_participation) ++partial;
    if (!row.descent.pass) ++descent_bad;
    if (!row.relerr.pass) ++relerr_bad;
    if (!row.dual_ok()) ++dual_bad;
    if (!row.lower_bound.pass) ++lower_bad;
    worst_descent = std::min(worst_descent, row.descent.lhs - row.descent.rhs);
  }
  const int t = static_cast<int>(sim.theory().size());
  const bool auto_ok = sim.hyperparam_check().all_ok() && partial == 0;

  report(1, "lyapunov_descent", auto_ok && descent_bad == 0 && secs < 10.0,
         fmt("%d rounds, %d violations, min(lhs-rhs)=%.3g, rho=%.4g, hyperparams %s, %.2fs", t, descent_bad,
             worst_descent, sim.rho(), auto_ok ? "compliant" : "NOT compliant", secs));
  report(2, "relative_error", relerr_bad == 0, fmt("%d rounds, %d violations", t, relerr_bad));
  report(3, "dual_step_bound", dual_bad == 0,
         fmt("%d rounds x %d clients, %d rounds with a violation (lower bound violations: %d)", t,
             sim.state().num_clients(), dual_bad, lower_bad));

  const Residuals r = stationarity_residuals(sim.state(), sim.problem().objectives);
  const ConsensusSolution& sol = *sim.problem().solution;
  double dist_sq = (sim.state().u - sol.u).squaredNorm();
  for (int i = 0; i < sim.state().num_clients(); ++i) {
    dist_sq += (sim.state().personal_for(i) - sol.v[static_cast<std::size_t>(i)]).squaredNorm();
  }
  const double dist = std::sqrt(dist_sq);
  report(4, "stationarity", r.max() <= 1e-6 && dist <= 1e-4,
         fmt("r1=%.2e r2=%.2e r3=%.2e r4=%.2e, |(V,u)-(V*,u*)|=%.2e", r.r1, r.r2, r.r3, r.r4, dist));

  // Limit estimate from a run three times as long.
  Simulation longer(cfg, Method::fedapm, cfg.seeds.front(), g_workers);
  longer.run(3 * cfg.rounds);
  std::vector<double> lyap;
  for (const auto& row : sim.theory()) lyap.push_back(row.lyapunov);
  const auto gaps = lyapunov_gaps(lyap, longer.theory().back().lyapunov);
  const RateFit fit = rate_fit(gaps);
  report(5, "linear_rate", fit.slope < 0.0 && fit.r_squared >= 0.98,
         fmt("regime=%s slope=%.4g r2=%.6f", std::string(to_string(fit.regime)).c_str(), fit.slope,
             fit.r_squared));
}

void reduction_equivalence() {
  RunConfig cfg = load("hetero_softmax.cfg");
  cfg.fraction = 1.0;
  cfg.synthetic.alpha_mode = AlphaMode::uniform;
  const std::uint64_t seed = cfg.seeds.front();
  const Problem prob = build_problem(cfg, seed);
  const auto& objs = prob.objectives;

  double worst = 0.0;
  for (auto [variant, method] : {std::pair{PenaltyVariant::alt, BaselineMethod::fedalt},
                                 std::pair{PenaltyVariant::sim, BaselineMethod::fedsim}}) {
    EngineConfig ec;
    ec.rho = 1.0;
    ec.sigma = {1.0};
    ec.selection_fraction = cfg.fraction;
    ec.seed = seed;
    ec.init_scale = cfg.init_scale;
    ec.dual_warm_start = false;
    const std::vector<LipschitzEstimates> lip(objs.size());
    FederationState engine = init_federation(objs, lip, ec);
    FederationState base = init_baseline(objs, method, cfg.fraction, seed, cfg.init_scale);
    for (int t = 0; t < 20; ++t) {
      penalty_mode_round(engine, objs, cfg.sgd, variant, g_workers);
      baseline_round(base, objs, BaselineConfig{method, cfg.sgd}, g_workers);
      worst = std::max(worst, (engine.u - base.u).lpNorm<Eigen::Infinity>());
      for (std::size_t i = 0; i < objs.size(); ++i) {
        worst = std::max(worst, (engine.clients[i].v - base.clients[i].v).lpNorm<Eigen::Infinity>());
        worst = std::max(worst, (engine.clients[i].u - base.clients[i].u).lpNorm<Eigen::Infinity>());
      }
    }
  }
  report(6, "reduction_equivalence", worst <= 1e-10,
         fmt("20 rounds alt+sim, m=%zu, max |difference|=%.3g", objs.size(), worst));
}

void comparative() {
  const RunConfig cfg = load("hetero_softmax.cfg");
  const int rounds = cfg.rounds;
  const auto fedapm = run_seeds(cfg, Method::fedapm, rounds);
  const auto fedavg = run_seeds(cfg, Method::fedavg, rounds);
  const auto fedprox = run_seeds(cfg, Method::fedprox, rounds);
  const auto fedalt = run_seeds(cfg, Method::fedalt, rounds);
  const auto fedsim = run_seeds(cfg, Method::fedsim, rounds);

  const RunConfig hi = load("kuhar_like.cfg");
  const auto hi_alt = run_seeds(hi, Method::fedalt, hi.rounds);
  const auto hi_sim = run_seeds(hi, Method::fedsim, hi.rounds);
  const auto hi_avg = run_seeds(hi, Method::fedavg, hi.rounds);

  const double d_apm = fedapm.mean_final(&MetricsRow::drift);
  const double d_alt = fedalt.mean_final(&MetricsRow::drift);
  const double d_sim = fedsim.mean_final(&MetricsRow::drift);
  const double h_alt = hi_alt.mean_final(&MetricsRow::drift);
  const double h_sim = hi_sim.mean_final(&MetricsRow::drift);
  const double h_avg = hi_avg.mean_final(&MetricsRow::drift);
  report(7, "drift",
         d_apm < d_alt && d_apm < d_sim && (h_alt > h_avg || h_sim > h_avg),
         fmt("fedapm %.4f, fedalt %.4f, fedsim %.4f; high-heterogeneity: fedalt %.4f, fedsim %.4f, fedavg %.4f",
             d_apm, d_alt, d_sim, h_alt, h_sim, h_avg));

  RunConfig big_rho = cfg;
  big_rho.rho = 0.1;
  const auto rho_hi = run_seeds(big_rho, Method::fedapm, 50);
  int rho_wins = 0;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    if (fedapm.at(s, 50, &MetricsRow::train_loss) <= rho_hi.at(s, 50, &MetricsRow::train_loss)) ++rho_wins;
  }
  report(8, "rho_sensitivity", rho_wins >= 7,
         fmt("loss(rho=0.01) <= loss(rho=0.1) at round 50 in %d/%zu seeds", rho_wins, cfg.seeds.size()));

  RunConfig half = cfg, tenth = cfg;
  half.fraction = 0.5;
  tenth.fraction = 0.1;
  const auto f_half = run_seeds(half, Method::fedapm, 50);
  const auto f_tenth = run_seeds(tenth, Method::fedapm, 50);
  int frac_wins = 0;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    if (f_half.at(s, 50, &MetricsRow::train_loss) <= f_tenth.at(s, 50, &MetricsRow::train_loss)) ++frac_wins;
  }
  report(9, "client_fraction", frac_wins >= 7,
         fmt("loss(fraction=0.5) <= loss(fraction=0.1) at round 50 in %d/%zu seeds", frac_wins,
             cfg.seeds.size()));

  const double acc_apm = fedapm.mean_final(&MetricsRow::accuracy);
  const double acc_avg = fedavg.mean_final(&MetricsRow::accuracy);
  const double l_apm = fedapm.mean_final(&MetricsRow::train_loss);
  const double l_avg = fedavg.mean_final(&MetricsRow::train_loss);
  const double l_prox = fedprox.mean_final(&MetricsRow::train_loss);
  const double l_alt = fedalt.mean_final(&MetricsRow::train_loss);
  const double l_sim = fedsim.mean_final(&MetricsRow::train_loss);
  report(10, "method_comparison",
         acc_apm >= acc_avg && l_apm <= l_avg && l_apm <= l_prox && l_apm <= l_alt && l_apm <= l_sim,
         fmt("accuracy fedapm %.4f vs fedavg %.4f; loss fedapm %.4f, fedavg %.4f, fedprox %.4f, fedalt %.4f, "
             "fedsim %.4f",
             acc_apm, acc_avg, l_apm, l_avg, l_prox, l_alt, l_sim));
}

double rel_err(const ParamVec& a, const ParamVec& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double denom = std::max({std::abs(a[k]), std::abs(b[k]), 1e-3});
    worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
  }
  return worst;
}

void gradient_oracle() {
  std::vector<std::pair<std::string, LocalObjective>> objs;
  {
    RunConfig q = load("quadratic_theory.cfg");
    objs.emplace_back("quadratic", build_problem(q, 0).objectives.front());
  }
  for (Strategy s : {Strategy::input, Strategy::output, Strategy::split_input}) {
    RunConfig c = load("hetero_softmax.cfg");
    c.synthetic.m = 2;
    c.synthetic.strategy = s;
    objs.emplace_back("softmax/" + std::string(to_string(s)), build_problem(c, 0).objectives.front());
  }
  Rng rng(2024);
  double worst = 0.0;
  int points = 0;
  for (const auto& [name, obj] : objs) {
    for (int k = 0; k < 20; ++k, ++points) {
      const ParamVec v = random_normal(obj.spec().personal_dim, rng);
      const ParamVec u = random_normal(obj.spec().shared_dim, rng);
      const LossGrad lg = obj.loss_and_grads(v, u);
      const GradPair fd = finite_diff_grad(obj, v, u);
      worst = std::max({worst, rel_err(lg.grad_v, fd.grad_v), rel_err(lg.grad_u, fd.grad_u)});
    }
  }
  report(11, "gradient_oracle", worst <= 1e-5,
         fmt("%d points over %zu objective kinds, max rel. error %.2e", points, objs.size(), worst));
}

std::string slurp_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    all += f.filename().string() + "\n" + ss.str();
  }
  return all;
}

void determinism() {
  RunConfig cfg = load("hetero_softmax.cfg");
  cfg.rounds = 10;
  cfg.seeds = {3};
  std::vector<std::string> outputs;
  for (int workers : {1, 1, 4}) {
    const fs::path dir = fs::temp_directory_path() / ("fedapm_acceptance_det_" + std::to_string(outputs.size()));
    fs::remove_all(dir);
    cfg.out_dir = dir.string();
    std::ostringstream log;
    run_experiment(cfg, log, workers);
    outputs.push_back(slurp_dir(dir));
    fs::remove_all(dir);
  }
  const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
  report(12, "determinism", same && !outputs[0].empty(),
         fmt("%zu methods, two single-worker runs and one 4-worker run %s", cfg.methods.size(),
             same ? "byte-identical" : "DIFFER"));
}

void guarded(int first_id, const char* name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(first_id, name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  g_workers = workers_from_env();
  const auto t0 = std::chrono::steady_clock::now();
  guarded(1, "convex_run", convex_run);
  guarded(6, "reduction_equivalence", reduction_equivalence);
  guarded(7, "comparative_runs", comparative);
  guarded(11, "gradient_oracle", gradient_oracle);
  guarded(12, "determinism", determinism);
  std::printf("%d failing criteria, %.1fs total\n", g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
