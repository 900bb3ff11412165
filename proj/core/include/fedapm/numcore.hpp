#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fedapm/rng.hpp"

namespace fedapm {

// Flat parameter container for personal blocks, shared blocks, duals and uploads.
using ParamVec = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Strategy { input, output, split_input };
enum class ObjectiveKind { quadratic, softmax_split };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct SplitSpec {
  int shared_dim = 1;
  int personal_dim = 0;
  Strategy strategy = Strategy::output;
};

struct LossGrad {
  double loss = 0.0;
  ParamVec grad_v;
  ParamVec grad_u;
};

struct GradPair {
  ParamVec grad_v;
  ParamVec grad_u;
};

// Layout of a two-block linear softmax classifier.
//   output:      logits = W_personal (classes x hidden) * W_shared (hidden x features) * x
//   input:       logits = W_shared (classes x hidden) * W_personal (hidden x features) * x
//   split_input: logits = W_personal * x[0, personal_features) + W_shared * x[personal_features, features)
// All weight matrices are flattened column-major into the parameter vectors.
struct SoftmaxLayout {
  int features = 1;
  int classes = 2;
  int hidden = 1;              // input/output strategies
  int personal_features = 0;   // split_input strategy
  Strategy strategy = Strategy::output;

  SplitSpec split() const;
};

// A client's loss f_i(v, u) over its data shard, together with its weight alpha_i.
//
// Quadratic kind: f(v, u) = 1/2 * sum_k w_k (a_k . u + b_k . v - y_k)^2, rows of A and B
// being samples. Softmax kind: f(v, u) = 1/n * sum_k w_k * crossentropy_k. Sample weights
// default to 1; zero weights give the constant zero objective.
//
// Immutable after construction and safe to share across threads.
class LocalObjective {
 public:
  static LocalObjective quadratic(Matrix a, Matrix b, Eigen::VectorXd y, double alpha);
  static LocalObjective softmax(SoftmaxLayout layout, Matrix features, std::vector<int> labels,
                                double alpha);

  ObjectiveKind kind() const { return kind_; }
  const SplitSpec& spec() const { return spec_; }
  double alpha() const { return alpha_; }
  int num_samples() const { return num_samples_; }
  const SoftmaxLayout& layout() const { return layout_; }

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const Matrix& features() const { return x_; }
  const std::vector<int>& labels() const { return labels_; }
  const Eigen::VectorXd& sample_weights() const { return w_; }

  LocalObjective with_alpha(double alpha) const;
  LocalObjective with_sample_weights(Eigen::VectorXd weights) const;

  double loss(const ParamVec& v, const ParamVec& u) const;
  LossGrad loss_and_grads(const ParamVec& v, const ParamVec& u) const;

  // Unbiased minibatch estimate: the batch sum is rescaled by n / |batch|, so that the
  // full index set reproduces loss_and_grads exactly.
  LossGrad loss_and_grads(const ParamVec& v, const ParamVec& u, std::span<const int> batch) const;

  // Class scores (logits) for arbitrary feature rows; softmax kind only.
  Matrix scores(const ParamVec& v, const ParamVec& u, const Matrix& rows) const;

 private:
  LocalObjective() = default;
  void check_dims(const ParamVec& v, const ParamVec& u) const;
  LossGrad quadratic_eval(const ParamVec& v, const ParamVec& u, std::span<const int> batch,
                          bool want_grad) const;
  LossGrad softmax_eval(const ParamVec& v, const ParamVec& u, std::span<const int> batch,
                        bool want_grad) const;

  ObjectiveKind kind_ = ObjectiveKind::quadratic;
  SplitSpec spec_;
  SoftmaxLayout layout_;
  double alpha_ = 1.0;
  int num_samples_ = 0;
  Matrix a_, b_;
  Eigen::VectorXd y_;
  Matrix x_;
  std::vector<int> labels_;
  Eigen::VectorXd w_;
};

inline constexpr double kDefaultFiniteDiffStep = 1e-6;

// Central-difference approximation of both partial gradients.
GradPair finite_diff_grad(const LocalObjective& obj, const ParamVec& v, const ParamVec& u,
                          double step = kDefaultFiniteDiffStep);

// Gradient-Lipschitz constants of one objective, Euclidean norm throughout.
//   l_u:  grad_u w.r.t. u      l_v:  grad_v w.r.t. v
//   l_uv: grad_u w.r.t. v      l_vu: grad_v w.r.t. u
struct LipschitzEstimates {
  double l_u = 0.0;
  double l_v = 0.0;
  double l_uv = 0.0;
  double l_vu = 0.0;
};

inline constexpr double kLipschitzSafetyFactor = 1.5;

struct LipschitzProbeConfig {
  double radius = 1.0;  // probe points drawn from N(0, radius^2 I)
  double safety_factor = kLipschitzSafetyFactor;
  int max_retries = 16;
};

// Quadratic kind: exact spectral values by power iteration. Softmax kind: maximum
// difference quotient over sampled probe pairs, scaled by the safety factor.
LipschitzEstimates estimate_lipschitz(const LocalObjective& obj, int n_probes, std::uint64_t seed,
                                      const LipschitzProbeConfig& cfg = {});

// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
double power_iteration(const Matrix& sym, int max_iters = 5000, double tol = 1e-15);

// Difference quotients at (v, u) for displacements dv (personal) and du (shared);
// one quotient per constant. Exposed for soundness tests.
LipschitzEstimates lipschitz_ratios(const LocalObjective& obj, const ParamVec& v,
                                    const ParamVec& u, const ParamVec& dv, const ParamVec& du);

bool all_finite(const ParamVec& x);

double standard_normal(Rng& rng);
ParamVec random_normal(int dim, Rng& rng, double scale = 1.0);

}  // namespace fedapm
