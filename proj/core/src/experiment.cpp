#include "fedapm/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fedapm/errors.hpp"

namespace fedapm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kLipschitzStreamBase = 0xffff'1000ULL;

BaselineMethod as_baseline(Method m) {
  switch (m) {
    case Method::fedavg: return BaselineMethod::fedavg;
    case Method::fedprox: return BaselineMethod::fedprox;
    case Method::fedalt: return BaselineMethod::fedalt;
    case Method::fedsim: return BaselineMethod::fedsim;
    case Method::fedapm: break;
  }
  throw ContractViolation("as_baseline: fedapm is not a baseline");
}

}  // namespace

Problem build_problem(const RunConfig& cfg, std::uint64_t seed) {
  Problem p;
  if (cfg.problem == ProblemKind::classification) {
    SyntheticSpec spec = cfg.synthetic;
    spec.seed = seed;
    ClassificationProblem cp = make_classification_problem(spec);
    p.objectives = std::move(cp.objectives);
    p.clients = std::move(cp.clients);
  } else {
    QuadraticSpec spec = cfg.quadratic;
    spec.m = cfg.synthetic.m;
    spec.alpha_mode = cfg.synthetic.alpha_mode;
    spec.seed = seed;
    QuadraticProblem qp = make_quadratic_problem(spec);
    p.objectives = std::move(qp.objectives);
    p.solution = std::move(qp.solution);
  }
  return p;
}

std::vector<LipschitzEstimates> estimate_all(std::span<const LocalObjective> objectives, int probes,
                                             std::uint64_t seed) {
  std::vector<LipschitzEstimates> out;
  out.reserve(objectives.size());
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    out.push_back(estimate_lipschitz(objectives[i], probes, stream_seed(seed, kLipschitzStreamBase + i)));
  }
  return out;
}

ClassificationMetrics evaluate_state(const FederationState& state, const Problem& problem) {
  if (problem.clients.empty()) return {kNaN, kNaN, kNaN, {}};
  Eigen::Index total = 0;
  for (const auto& c : problem.clients) total += c.test_x.rows();
  const int classes = problem.objectives.front().layout().classes;
  Matrix scores(total, classes);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (int i = 0; i < state.num_clients(); ++i) {
    const ClientData& data = problem.clients[static_cast<std::size_t>(i)];
    if (data.test_x.rows() == 0) continue;
    scores.middleRows(row, data.test_x.rows()) =
        problem.objectives[static_cast<std::size_t>(i)].scores(state.personal_for(i), state.u, data.test_x);
    row += data.test_x.rows();
    labels.insert(labels.end(), data.test_y.begin(), data.test_y.end());
  }
  return evaluate_metrics(scores, labels);
}

Simulation::Simulation(const RunConfig& cfg, Method method, std::uint64_t seed, int workers)
    : Simulation(cfg, method, seed, build_problem(cfg, seed), workers) {}

Simulation::Simulation(const RunConfig& cfg, Method method, std::uint64_t seed, Problem problem,
                       int workers)
    : cfg_(cfg), method_(method), seed_(seed), workers_(workers), problem_(std::move(problem)) {
  init();
}

void Simulation::init() {
  const auto& objs = problem_.objectives;
  if (method_ != Method::fedapm) {
    state_ = init_baseline(objs, as_baseline(method_), cfg_.fraction, seed_, cfg_.init_scale);
    return;
  }
  lipschitz_ = estimate_all(objs, cfg_.lipschitz_probes, seed_);
  std::vector<double> alphas;
  for (const auto& o : objs) alphas.push_back(o.alpha());
  if (cfg_.rho) {
    rho_ = *cfg_.rho;
    sigma_ = auto_sigma(rho_, lipschitz_, alphas);
  } else {
    const Hyperparams hp = auto_hyperparams(lipschitz_, alphas, cfg_.rho_policy);
    rho_ = hp.rho;
    sigma_ = hp.sigma;
  }
  if (!cfg_.sigma.empty()) {
    if (cfg_.sigma.size() == 1) {
      sigma_.assign(objs.size(), cfg_.sigma.front());
    } else if (cfg_.sigma.size() == objs.size()) {
      sigma_ = cfg_.sigma;
    } else {
      throw ConfigError("sigma", "expected one sigma or one per client");
    }
  }
  check_ = check_hyperparams(rho_, sigma_, lipschitz_, alphas);

  EngineConfig ec;
  ec.rho = rho_;
  ec.sigma = sigma_;
  ec.xi0 = cfg_.xi0;
  ec.mu = cfg_.mu;
  ec.selection_fraction = cfg_.fraction;
  ec.seed = seed_;
  ec.init_scale = cfg_.init_scale;
  ec.dual_warm_start = cfg_.dual_warm_start;
  state_ = init_federation(objs, lipschitz_, ec);
}

MetricsRow Simulation::make_row(const TheoryRow* theory) const {
  MetricsRow r;
  r.round = state_.round;
  r.method = std::string(to_string(method_));
  r.seed = seed_;
  r.train_loss = shared_loss(state_, problem_.objectives);
  const ClassificationMetrics cm = evaluate_state(state_, problem_);
  r.accuracy = cm.accuracy;
  r.f1 = cm.macro_f1;
  r.auc = cm.auc;
  r.drift = drift_metric(state_);
  if (theory != nullptr) {
    r.lagrangian = theory->lagrangian;
    r.lyapunov = theory->lyapunov;
    r.descent_lhs = theory->descent.lhs;
    r.descent_rhs = theory->descent.rhs;
    r.relerr_lhs = theory->relerr.lhs;
    r.relerr_rhs = theory->relerr.rhs;
    r.r1 = theory->residuals.r1;
    r.r2 = theory->residuals.r2;
    r.r3 = theory->residuals.r3;
    r.r4 = theory->residuals.r4;
  } else {
    r.lagrangian = r.lyapunov = r.descent_lhs = r.descent_rhs = kNaN;
    r.relerr_lhs = r.relerr_rhs = r.r1 = r.r2 = r.r3 = r.r4 = kNaN;
  }
  return r;
}

void Simulation::step() {
  if (method_ == Method::fedapm) {
    const FederationState prev = state_;
    reports_.push_back(run_round(state_, problem_.objectives, cfg_.inner, workers_));
    theory_.push_back(make_theory_row(prev, state_, problem_.objectives, reports_.back().full_participation));
    rows_.push_back(make_row(&theory_.back()));
  } else {
    BaselineConfig bc{as_baseline(method_), cfg_.sgd};
    reports_.push_back(baseline_round(state_, problem_.objectives, bc, workers_));
    rows_.push_back(make_row(nullptr));
  }
}

void Simulation::run(int rounds) {
  for (int t = 0; t < rounds; ++t) step();
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, std::isnan(mean) ? kNaN : 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::string format_summary(std::span<const SummaryLine> lines) {
  std::ostringstream out;
  out << "# final-round mean and sample standard deviation (n - 1) across seeds\n";
  out << "method,runs,train_loss_mean,train_loss_std,accuracy_mean,accuracy_std,f1_mean,f1_std,"
         "auc_mean,auc_std,drift_mean,drift_std\n";
  for (const auto& l : lines) {
    out << l.method << ',' << l.runs;
    for (double x : {l.loss_mean, l.loss_std, l.accuracy_mean, l.accuracy_std, l.f1_mean, l.f1_std,
                     l.auc_mean, l.auc_std, l.drift_mean, l.drift_std}) {
      out << ',' << format_real(x);
    }
    out << '\n';
  }
  return out.str();
}

int run_experiment(const RunConfig& cfg, std::ostream& log, int workers) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);

  int status = 0;
  std::vector<SummaryLine> summary;
  for (Method method : cfg.methods) {
    const std::string name(to_string(method));
    std::vector<double> loss, acc, f1, auc, drift;
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path csv_path = out_dir / (name + "_seed" + std::to_string(seed) + ".csv");
      std::optional<Simulation> sim;
      try {
        sim.emplace(cfg, method, seed, workers);
        sim->run(cfg.rounds);
      } catch (const std::exception& e) {
        status = 1;
        std::ofstream(out_dir / "failure.log", std::ios::app)
            << name << " seed " << seed << ": " << e.what() << '\n';
        log << "FAILED " << name << " seed " << seed << ": " << e.what() << '\n';
        if (sim) {
          std::ofstream(csv_path.string() + ".partial", std::ios::binary) << emit_csv(sim->rows());
        }
        continue;
      }
      std::ofstream(csv_path, std::ios::binary) << emit_csv(sim->rows());
      const MetricsRow& last = sim->rows().back();
      loss.push_back(last.train_loss);
      acc.push_back(last.accuracy);
      f1.push_back(last.f1);
      auc.push_back(last.auc);
      drift.push_back(last.drift);
      log << name << " seed " << seed << ": loss " << format_real(last.train_loss) << ", drift "
          << format_real(last.drift) << '\n';
    }
    SummaryLine line;
    line.method = name;
    line.runs = static_cast<int>(loss.size());
    std::tie(line.loss_mean, line.loss_std) = mean_std(loss);
    std::tie(line.accuracy_mean, line.accuracy_std) = mean_std(acc);
    std::tie(line.f1_mean, line.f1_std) = mean_std(f1);
    std::tie(line.auc_mean, line.auc_std) = mean_std(auc);
    std::tie(line.drift_mean, line.drift_std) = mean_std(drift);
    summary.push_back(line);
  }
  std::ofstream(out_dir / "summary.txt", std::ios::binary) << format_summary(summary);
  return status;
}

}  // namespace fedapm
