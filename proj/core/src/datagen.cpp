#include "fedapm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "fedapm/errors.hpp"

namespace fedapm {

std::string_view to_string(AlphaMode m) {
  return m == AlphaMode::uniform ? "uniform" : "proportional";
}

AlphaMode parse_alpha_mode(std::string_view name) {
  if (name == "uniform") return AlphaMode::uniform;
  if (name == "proportional") return AlphaMode::proportional;
  throw ConfigError("alpha_mode", "expected 'uniform' or 'proportional', got '" + std::string(name) + "'");
}

std::vector<double> dirichlet_sample(int k, double concentration, Rng& rng) {
  if (k < 1) throw ContractViolation("dirichlet_sample: k must be >= 1");
  if (!(concentration > 0.0)) throw ContractViolation("dirichlet_sample: concentration must be positive");
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng);
    sum += x;
  }
  if (!(sum > 0.0)) {
    // Every draw underflowed (tiny concentration): put all mass on one uniformly chosen entry.
    std::fill(p.begin(), p.end(), 0.0);
    p[uniform_index(rng, p.size())] = 1.0;
    return p;
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<int> largest_remainder_counts(const std::vector<double>& proportions, int total) {
  std::vector<int> counts(proportions.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  remainders.reserve(proportions.size());
  int assigned = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * total;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) {
    counts[remainders[r % remainders.size()].second] += 1;
  }
  return counts;
}

std::vector<std::vector<int>> dirichlet_partition(const std::vector<int>& labels, int m,
                                                  double concentration, Rng& rng) {
  if (m < 1) throw ContractViolation("dirichlet_partition: m must be >= 1");
  if (!(concentration > 0.0)) throw ContractViolation("dirichlet_partition: concentration must be positive");
  if (static_cast<int>(labels.size()) < m) {
    throw GenerationError("dirichlet_partition: fewer samples (" + std::to_string(labels.size()) +
                          ") than clients (" + std::to_string(m) + ")");
  }
  const int classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] < 0) throw ContractViolation("dirichlet_partition: negative label");
    by_class[static_cast<std::size_t>(labels[k])].push_back(static_cast<int>(k));
  }

  std::vector<std::vector<int>> shards(static_cast<std::size_t>(m));
  for (auto& members : by_class) {
    if (members.empty()) continue;
    shuffle_in_place(members, rng);
    const std::vector<double> p = dirichlet_sample(m, concentration, rng);
    const std::vector<int> counts = largest_remainder_counts(p, static_cast<int>(members.size()));
    std::size_t cursor = 0;
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < counts[static_cast<std::size_t>(i)]; ++c) {
        shards[static_cast<std::size_t>(i)].push_back(members[cursor++]);
      }
    }
  }

  for (auto& shard : shards) {
    if (!shard.empty()) continue;
    auto largest = std::max_element(shards.begin(), shards.end(),
                                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    shard.push_back(largest->back());
    largest->pop_back();
  }
  for (auto& shard : shards) std::sort(shard.begin(), shard.end());
  return shards;
}

namespace {

std::vector<Eigen::VectorXd> class_means(const SyntheticSpec& spec, Rng& rng) {
  std::vector<Eigen::VectorXd> means;
  const double radius = spec.class_separation / std::sqrt(2.0);
  for (int c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(spec.feature_dim);
    if (spec.classes <= spec.feature_dim) {
      mu[c] = radius;  // orthogonal means: pairwise distance equals class_separation
    } else {
      mu = random_normal(spec.feature_dim, rng, 1.0);
      mu *= radius / std::max(mu.norm(), 1e-12);
    }
    means.push_back(std::move(mu));
  }
  return means;
}

}  // namespace

ClassificationProblem make_classification_problem(const SyntheticSpec& spec) {
  if (spec.m < 1 || spec.classes < 2 || spec.feature_dim < 1 || spec.samples_per_client < 1) {
    throw GenerationError("classification spec: counts must be >= 1 (classes >= 2)");
  }
  if (!(spec.dirichlet_concentration > 0.0)) {
    throw GenerationError("classification spec: dirichlet_concentration must be positive");
  }
  if (spec.heterogeneity < 0.0 || !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw GenerationError("classification spec: heterogeneity >= 0 and train_fraction in (0,1] required");
  }
  if (spec.strategy == Strategy::split_input &&
      (spec.personal_features < 0 || spec.personal_features >= spec.feature_dim)) {
    throw GenerationError("classification spec: personal_features must lie in [0, feature_dim)");
  }
  if (spec.strategy != Strategy::split_input && spec.hidden < 1) {
    throw GenerationError("classification spec: hidden must be >= 1");
  }

  Rng data_rng = make_stream(spec.seed, kDataStream);
  Rng part_rng = make_stream(spec.seed, kPartitionStream);

  const int total = spec.m * spec.samples_per_client;
  std::vector<int> labels(static_cast<std::size_t>(total));
  for (int k = 0; k < total; ++k) labels[static_cast<std::size_t>(k)] = k % spec.classes;

  const auto shards = dirichlet_partition(labels, spec.m, spec.dirichlet_concentration, part_rng);
  const auto means = class_means(spec, data_rng);

  ClassificationProblem problem;
  problem.layout.features = spec.feature_dim;
  problem.layout.classes = spec.classes;
  problem.layout.hidden = spec.hidden;
  problem.layout.personal_features = spec.personal_features;
  problem.layout.strategy = spec.strategy;

  std::size_t total_train = 0;
  for (int i = 0; i < spec.m; ++i) {
    const Eigen::VectorXd shift = random_normal(spec.feature_dim, data_rng, spec.heterogeneity);
    std::vector<int> idx = shards[static_cast<std::size_t>(i)];
    shuffle_in_place(idx, data_rng);
    const int n = static_cast<int>(idx.size());
    const int n_train = std::clamp(static_cast<int>(std::lround(spec.train_fraction * n)), 1, n);

    ClientData cd;
    cd.train_x.resize(n_train, spec.feature_dim);
    cd.test_x.resize(n - n_train, spec.feature_dim);
    for (int k = 0; k < n; ++k) {
      const int label = labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      Eigen::VectorXd x = means[static_cast<std::size_t>(label)] + shift +
                          random_normal(spec.feature_dim, data_rng, 1.0);
      if (k < n_train) {
        cd.train_x.row(k) = x.transpose();
        cd.train_y.push_back(label);
      } else {
        cd.test_x.row(k - n_train) = x.transpose();
        cd.test_y.push_back(label);
      }
    }
    total_train += static_cast<std::size_t>(n_train);
    problem.clients.push_back(std::move(cd));
  }

  for (int i = 0; i < spec.m; ++i) {
    const auto& cd = problem.clients[static_cast<std::size_t>(i)];
    const double alpha = spec.alpha_mode == AlphaMode::uniform
                             ? 1.0 / spec.m
                             : static_cast<double>(cd.train_y.size()) / static_cast<double>(total_train);
    problem.objectives.push_back(LocalObjective::softmax(problem.layout, cd.train_x, cd.train_y, alpha));
  }
  return problem;
}

namespace {

Matrix random_orthonormal_columns(int rows, int cols, Rng& rng) {
  Matrix g(rows, cols);
  for (int j = 0; j < cols; ++j) g.col(j) = random_normal(rows, rng, 1.0);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

}  // namespace

ConsensusSolution solve_quadratic_consensus(const std::vector<LocalObjective>& objectives) {
  if (objectives.empty()) throw ContractViolation("solve_quadratic_consensus: no objectives");
  const int ds = objectives.front().spec().shared_dim;
  const int dp = objectives.front().spec().personal_dim;
  const int m = static_cast<int>(objectives.size());
  int total_rows = 0;
  for (const auto& obj : objectives) {
    if (obj.kind() != ObjectiveKind::quadratic) {
      throw ContractViolation("solve_quadratic_consensus: quadratic objectives only");
    }
    if (obj.spec().shared_dim != ds || obj.spec().personal_dim != dp) {
      throw ContractViolation("solve_quadratic_consensus: inconsistent dimensions");
    }
    total_rows += obj.num_samples();
  }

  const int unknowns = ds + m * dp;
  Matrix sys = Matrix::Zero(total_rows, unknowns);
  Eigen::VectorXd rhs(total_rows);
  int r0 = 0;
  for (int i = 0; i < m; ++i) {
    const auto& obj = objectives[static_cast<std::size_t>(i)];
    const Eigen::VectorXd s = (obj.alpha() * obj.sample_weights()).array().sqrt().matrix();
    const int n = obj.num_samples();
    sys.block(r0, 0, n, ds) = s.asDiagonal() * obj.a();
    if (dp > 0) sys.block(r0, ds + i * dp, n, dp) = s.asDiagonal() * obj.b();
    rhs.segment(r0, n) = s.asDiagonal() * obj.targets();
    r0 += n;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(sys);
  const Eigen::VectorXd x = qr.solve(rhs);

  ConsensusSolution sol;
  sol.u = x.head(ds);
  for (int i = 0; i < m; ++i) sol.v.push_back(x.segment(ds + i * dp, dp));
  sol.f_star = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto& obj = objectives[static_cast<std::size_t>(i)];
    sol.f_star += obj.alpha() * obj.loss(sol.v[static_cast<std::size_t>(i)], sol.u);
  }
  return sol;
}

QuadraticProblem make_quadratic_problem(const QuadraticSpec& spec) {
  if (spec.m < 1 || spec.shared_dim < 1 || spec.personal_dim < 0) {
    throw GenerationError("quadratic spec: m >= 1, shared_dim >= 1, personal_dim >= 0 required");
  }
  if (!(spec.conditioning >= 1.0)) throw GenerationError("quadratic spec: conditioning must be >= 1");
  const int p = spec.shared_dim + spec.personal_dim;
  const int rows = spec.rows > 0 ? spec.rows : p + 4;
  if (rows < p) throw GenerationError("quadratic spec: rows must be >= shared_dim + personal_dim");

  Rng rng = make_stream(spec.seed, kDataStream);
  constexpr int kMaxRetries = 8;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    std::vector<Matrix> as, bs;
    std::vector<Eigen::VectorXd> ys;
    int total_rows = 0;
    for (int i = 0; i < spec.m; ++i) {
      // Singular values of [A B] decay geometrically from 1 to conditioning^(-1/2).
      Eigen::VectorXd sv(p);
      for (int j = 0; j < p; ++j) {
        const double frac = p > 1 ? static_cast<double>(j) / (p - 1) : 0.0;
        sv[j] = std::pow(spec.conditioning, -0.5 * frac);
      }
      const Matrix q = random_orthonormal_columns(rows, p, rng);
      const Matrix r = random_orthonormal_columns(p, p, rng);
      const Matrix joint = q * sv.asDiagonal() * r.transpose();
      as.push_back(joint.leftCols(spec.shared_dim));
      bs.push_back(spec.decouple_personal ? Matrix::Zero(rows, spec.personal_dim)
                                          : Matrix(joint.rightCols(spec.personal_dim)));
      ys.push_back(random_normal(rows, rng, spec.target_scale));
      total_rows += rows;
    }

    QuadraticProblem problem;
    for (int i = 0; i < spec.m; ++i) {
      const double alpha = spec.alpha_mode == AlphaMode::uniform
                               ? 1.0 / spec.m
                               : static_cast<double>(rows) / static_cast<double>(total_rows);
      problem.objectives.push_back(LocalObjective::quadratic(as[static_cast<std::size_t>(i)],
                                                             bs[static_cast<std::size_t>(i)],
                                                             ys[static_cast<std::size_t>(i)], alpha));
    }

    // Full column rank of every A_i, and of the joint system unless B is decoupled.
    bool full_rank = true;
    for (const auto& a : as) {
      Eigen::ColPivHouseholderQR<Matrix> qr(a);
      qr.setThreshold(1e-10);
      if (qr.rank() < spec.shared_dim) full_rank = false;
    }
    if (!full_rank) continue;
    if (spec.decouple_personal && spec.personal_dim > 0) {
      // v_i is free in this case; pin it to zero in the reported solution.
      Matrix stacked(total_rows, spec.shared_dim);
      Eigen::VectorXd rhs(total_rows);
      int r0 = 0;
      for (int i = 0; i < spec.m; ++i) {
        const double s = std::sqrt(problem.objectives[static_cast<std::size_t>(i)].alpha());
        stacked.middleRows(r0, rows) = s * as[static_cast<std::size_t>(i)];
        rhs.segment(r0, rows) = s * ys[static_cast<std::size_t>(i)];
        r0 += rows;
      }
      problem.solution.u = stacked.colPivHouseholderQr().solve(rhs);
      problem.solution.v.assign(static_cast<std::size_t>(spec.m), ParamVec::Zero(spec.personal_dim));
      problem.solution.f_star = 0.0;
      for (int i = 0; i < spec.m; ++i) {
        const auto& obj = problem.objectives[static_cast<std::size_t>(i)];
        problem.solution.f_star += obj.alpha() * obj.loss(problem.solution.v[static_cast<std::size_t>(i)],
                                                          problem.solution.u);
      }
    } else {
      problem.solution = solve_quadratic_consensus(problem.objectives);
    }
    return problem;
  }
  throw GenerationError("make_quadratic_problem: rank-deficient draws after bounded retries");
}

void write_shard(std::ostream& out, const Matrix& x, const std::vector<int>& labels) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ContractViolation("write_shard: row count mismatch");
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << 'x' << j << ',';
  out << "label\n";
  out.precision(17);
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << x(k, j) << ',';
    out << labels[static_cast<std::size_t>(k)] << '\n';
  }
}

}  // namespace fedapm
