#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedapm/numcore.hpp"
#include "fedapm/rng.hpp"

namespace fedapm {

enum class AlphaMode { uniform, proportional };

std::string_view to_string(AlphaMode m);
AlphaMode parse_alpha_mode(std::string_view name);

// Synthetic heterogeneous classification problem.
struct SyntheticSpec {
  int m = 20;
  int classes = 4;
  int feature_dim = 16;
  int samples_per_client = 200;
  double dirichlet_concentration = 0.5;
  double heterogeneity = 1.0;     // std-dev of the per-client feature mean shift
  double class_separation = 4.0;  // pairwise distance between class means (noise std 1)
  Strategy strategy = Strategy::output;
  int hidden = 8;
  int personal_features = 4;  // split_input only
  double train_fraction = 0.8;
  AlphaMode alpha_mode = AlphaMode::uniform;
  std::uint64_t seed = 0;
};

// Split each class's samples across m clients with Dirichlet(concentration) proportions.
// Counts come from largest-remainder rounding; a client left empty takes one sample from
// the currently largest shard. Returns per-client index lists in ascending order.
std::vector<std::vector<int>> dirichlet_partition(const std::vector<int>& labels, int m,
                                                  double concentration, Rng& rng);

// Proportions for one Dirichlet draw; sums to 1.
std::vector<double> dirichlet_sample(int k, double concentration, Rng& rng);

// Largest-remainder rounding of total * proportions; ties go to the lower index.
std::vector<int> largest_remainder_counts(const std::vector<double>& proportions, int total);

struct ClientData {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
};

struct ClassificationProblem {
  SoftmaxLayout layout;
  std::vector<LocalObjective> objectives;  // training shards
  std::vector<ClientData> clients;
};

ClassificationProblem make_classification_problem(const SyntheticSpec& spec);

// Coercive quadratic consensus problem f_i = 1/2 ||A_i u + B_i v_i - y_i||^2.
struct QuadraticSpec {
  int m = 8;
  int shared_dim = 6;
  int personal_dim = 2;
  int rows = 0;               // samples per client; 0 means shared_dim + personal_dim + 4
  double conditioning = 4.0;  // eigenvalue spread of [A_i B_i]^T [A_i B_i]
  double target_scale = 1.0;
  bool decouple_personal = false;  // B_i = 0
  AlphaMode alpha_mode = AlphaMode::uniform;
  std::uint64_t seed = 0;
};

struct ConsensusSolution {
  ParamVec u;
  std::vector<ParamVec> v;
  double f_star = 0.0;
};

struct QuadraticProblem {
  std::vector<LocalObjective> objectives;
  ConsensusSolution solution;
};

QuadraticProblem make_quadratic_problem(const QuadraticSpec& spec);

// Minimizer of sum_i alpha_i f_i(v_i, u) for quadratic objectives, by block least squares.
ConsensusSolution solve_quadratic_consensus(const std::vector<LocalObjective>& objectives);

// Columnar text export: header "x0,...,x{d-1},label", one sample per line.
void write_shard(std::ostream& out, const Matrix& x, const std::vector<int>& labels);

}  // namespace fedapm
