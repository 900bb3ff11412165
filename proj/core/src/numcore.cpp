#include "fedapm/numcore.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fedapm/errors.hpp"

namespace fedapm {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::input:
      return "input";
    case Strategy::output:
      return "output";
    case Strategy::split_input:
      return "split_input";
  }
  return "output";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "input") return Strategy::input;
  if (name == "output") return Strategy::output;
  if (name == "split_input") return Strategy::split_input;
  throw ConfigError("strategy", "unknown personalization strategy '" + std::string(name) + "'");
}

SplitSpec SoftmaxLayout::split() const {
  SplitSpec s;
  s.strategy = strategy;
  switch (strategy) {
    case Strategy::output:
      s.shared_dim = hidden * features;
      s.personal_dim = classes * hidden;
      break;
    case Strategy::input:
      s.shared_dim = classes * hidden;
      s.personal_dim = hidden * features;
      break;
    case Strategy::split_input:
      s.shared_dim = classes * (features - personal_features);
      s.personal_dim = classes * personal_features;
      break;
  }
  return s;
}

bool all_finite(const ParamVec& x) { return x.allFinite(); }

double standard_normal(Rng& rng) {
  // Box-Muller on the fixed uniform01 generator; one draw discarded for simplicity.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

ParamVec random_normal(int dim, Rng& rng, double scale) {
  ParamVec x(dim);
  for (int i = 0; i < dim; ++i) x[i] = scale * standard_normal(rng);
  return x;
}

LocalObjective LocalObjective::quadratic(Matrix a, Matrix b, Eigen::VectorXd y, double alpha) {
  if (a.rows() != y.size() || b.rows() != y.size()) {
    throw ContractViolation("quadratic objective: A, B and y must have the same row count");
  }
  if (a.cols() < 1) throw ContractViolation("quadratic objective: shared_dim must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in (0, 1]");
  LocalObjective obj;
  obj.kind_ = ObjectiveKind::quadratic;
  obj.spec_ = SplitSpec{static_cast<int>(a.cols()), static_cast<int>(b.cols()), Strategy::split_input};
  obj.alpha_ = alpha;
  obj.num_samples_ = static_cast<int>(y.size());
  obj.a_ = std::move(a);
  obj.b_ = std::move(b);
  obj.y_ = std::move(y);
  obj.w_ = Eigen::VectorXd::Ones(obj.num_samples_);
  return obj;
}

LocalObjective LocalObjective::softmax(SoftmaxLayout layout, Matrix features,
                                       std::vector<int> labels, double alpha) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ContractViolation("softmax objective: feature rows and labels differ in length");
  }
  if (features.cols() != layout.features) {
    throw ContractViolation("softmax objective: feature width does not match layout");
  }
  if (layout.classes < 2) throw ContractViolation("softmax objective: need at least 2 classes");
  if (layout.strategy == Strategy::split_input &&
      (layout.personal_features < 0 || layout.personal_features >= layout.features)) {
    throw ContractViolation("split_input: personal_features must lie in [0, features)");
  }
  if (layout.strategy != Strategy::split_input && layout.hidden < 1) {
    throw ContractViolation("softmax objective: hidden width must be >= 1");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in (0, 1]");
  for (int label : labels) {
    if (label < 0 || label >= layout.classes) {
      throw ContractViolation("softmax objective: label out of range");
    }
  }
  LocalObjective obj;
  obj.kind_ = ObjectiveKind::softmax_split;
  obj.layout_ = layout;
  obj.spec_ = layout.split();
  obj.alpha_ = alpha;
  obj.num_samples_ = static_cast<int>(labels.size());
  obj.x_ = std::move(features);
  obj.labels_ = std::move(labels);
  obj.w_ = Eigen::VectorXd::Ones(obj.num_samples_);
  return obj;
}

LocalObjective LocalObjective::with_alpha(double alpha) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in (0, 1]");
  LocalObjective copy = *this;
  copy.alpha_ = alpha;
  return copy;
}

LocalObjective LocalObjective::with_sample_weights(Eigen::VectorXd weights) const {
  if (weights.size() != num_samples_) throw ContractViolation("sample weight length mismatch");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw ContractViolation("sample weights must be finite and nonnegative");
  }
  LocalObjective copy = *this;
  copy.w_ = std::move(weights);
  return copy;
}

void LocalObjective::check_dims(const ParamVec& v, const ParamVec& u) const {
  if (v.size() != spec_.personal_dim || u.size() != spec_.shared_dim) {
    throw ContractViolation("loss_and_grads: expected v.dim=" + std::to_string(spec_.personal_dim) +
                            ", u.dim=" + std::to_string(spec_.shared_dim) + ", got " +
                            std::to_string(v.size()) + ", " + std::to_string(u.size()));
  }
  if (num_samples_ == 0) throw InvalidObjective("objective has an empty data shard");
}

double LocalObjective::loss(const ParamVec& v, const ParamVec& u) const {
  check_dims(v, u);
  std::vector<int> all(num_samples_);
  std::iota(all.begin(), all.end(), 0);
  return kind_ == ObjectiveKind::quadratic ? quadratic_eval(v, u, all, false).loss
                                           : softmax_eval(v, u, all, false).loss;
}

LossGrad LocalObjective::loss_and_grads(const ParamVec& v, const ParamVec& u) const {
  check_dims(v, u);
  std::vector<int> all(num_samples_);
  std::iota(all.begin(), all.end(), 0);
  return kind_ == ObjectiveKind::quadratic ? quadratic_eval(v, u, all, true)
                                           : softmax_eval(v, u, all, true);
}

LossGrad LocalObjective::loss_and_grads(const ParamVec& v, const ParamVec& u,
                                        std::span<const int> batch) const {
  check_dims(v, u);
  if (batch.empty()) throw ContractViolation("loss_and_grads: empty minibatch");
  for (int k : batch) {
    if (k < 0 || k >= num_samples_) throw ContractViolation("loss_and_grads: sample index out of range");
  }
  return kind_ == ObjectiveKind::quadratic ? quadratic_eval(v, u, batch, true)
                                           : softmax_eval(v, u, batch, true);
}

LossGrad LocalObjective::quadratic_eval(const ParamVec& v, const ParamVec& u,
                                        std::span<const int> batch, bool want_grad) const {
  const double scale = static_cast<double>(num_samples_) / static_cast<double>(batch.size());
  LossGrad out;
  out.grad_u = ParamVec::Zero(spec_.shared_dim);
  out.grad_v = ParamVec::Zero(spec_.personal_dim);
  double loss = 0.0;
  for (int k : batch) {
    const double r = a_.row(k).dot(u) + (spec_.personal_dim > 0 ? b_.row(k).dot(v) : 0.0) - y_[k];
    const double wr = w_[k] * r;
    loss += 0.5 * wr * r;
    if (want_grad) {
      out.grad_u.noalias() += wr * a_.row(k).transpose();
      if (spec_.personal_dim > 0) out.grad_v.noalias() += wr * b_.row(k).transpose();
    }
  }
  out.loss = scale * loss;
  if (want_grad) {
    out.grad_u *= scale;
    out.grad_v *= scale;
  }
  return out;
}

namespace {

Matrix gather_rows(const Matrix& x, std::span<const int> batch) {
  Matrix out(static_cast<Eigen::Index>(batch.size()), x.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(batch[i]);
  return out;
}

}  // namespace

Matrix LocalObjective::scores(const ParamVec& v, const ParamVec& u, const Matrix& rows) const {
  if (kind_ != ObjectiveKind::softmax_split) throw ContractViolation("scores: softmax objectives only");
  if (v.size() != spec_.personal_dim || u.size() != spec_.shared_dim) {
    throw ContractViolation("scores: parameter dimension mismatch");
  }
  if (rows.cols() != layout_.features) throw ContractViolation("scores: feature width mismatch");
  const int c = layout_.classes;
  const int h = layout_.hidden;
  const int d = layout_.features;
  Matrix logits;  // classes x samples
  switch (layout_.strategy) {
    case Strategy::output: {
      Eigen::Map<const Matrix> w1(u.data(), h, d);
      Eigen::Map<const Matrix> w2(v.data(), c, h);
      logits = w2 * (w1 * rows.transpose());
      break;
    }
    case Strategy::input: {
      Eigen::Map<const Matrix> w1(v.data(), h, d);
      Eigen::Map<const Matrix> w2(u.data(), c, h);
      logits = w2 * (w1 * rows.transpose());
      break;
    }
    case Strategy::split_input: {
      const int dp = layout_.personal_features;
      Eigen::Map<const Matrix> wp(v.data(), c, dp);
      Eigen::Map<const Matrix> ws(u.data(), c, d - dp);
      logits = ws * rows.rightCols(d - dp).transpose();
      if (dp > 0) logits.noalias() += wp * rows.leftCols(dp).transpose();
      break;
    }
  }
  return logits.transpose();
}

LossGrad LocalObjective::softmax_eval(const ParamVec& v, const ParamVec& u,
                                      std::span<const int> batch, bool want_grad) const {
  const int c = layout_.classes;
  const int h = layout_.hidden;
  const int d = layout_.features;
  const auto nb = static_cast<Eigen::Index>(batch.size());
  const double scale = 1.0 / static_cast<double>(nb);
  const Matrix xb = gather_rows(x_, batch);  // nb x d

  Matrix hidden_act;  // h x nb (input/output strategies)
  Matrix logits;      // c x nb
  switch (layout_.strategy) {
    case Strategy::output: {
      Eigen::Map<const Matrix> w1(u.data(), h, d);
      Eigen::Map<const Matrix> w2(v.data(), c, h);
      hidden_act = w1 * xb.transpose();
      logits = w2 * hidden_act;
      break;
    }
    case Strategy::input: {
      Eigen::Map<const Matrix> w1(v.data(), h, d);
      Eigen::Map<const Matrix> w2(u.data(), c, h);
      hidden_act = w1 * xb.transpose();
      logits = w2 * hidden_act;
      break;
    }
    case Strategy::split_input: {
      const int dp = layout_.personal_features;
      Eigen::Map<const Matrix> wp(v.data(), c, dp);
      Eigen::Map<const Matrix> ws(u.data(), c, d - dp);
      logits = ws * xb.rightCols(d - dp).transpose();
      if (dp > 0) logits.noalias() += wp * xb.leftCols(dp).transpose();
      break;
    }
  }

  double loss = 0.0;
  Matrix g(c, nb);  // d loss / d logits, already weighted and scaled
  for (Eigen::Index k = 0; k < nb; ++k) {
    const int label = labels_[batch[static_cast<std::size_t>(k)]];
    const double wk = w_[batch[static_cast<std::size_t>(k)]];
    const double zmax = logits.col(k).maxCoeff();
    const Eigen::VectorXd e = (logits.col(k).array() - zmax).exp().matrix();
    const double sum = e.sum();
    // log-sum-exp minus the true logit; nonnegative up to rounding, clamped.
    const double ce = std::max(0.0, zmax + std::log(sum) - logits(label, k));
    loss += wk * ce;
    if (want_grad) {
      g.col(k) = (wk * scale) * (e / sum);
      g(label, k) -= wk * scale;
    }
  }

  LossGrad out;
  out.loss = scale * loss;
  if (!want_grad) return out;

  out.grad_u = ParamVec::Zero(spec_.shared_dim);
  out.grad_v = ParamVec::Zero(spec_.personal_dim);
  switch (layout_.strategy) {
    case Strategy::output: {
      Eigen::Map<const Matrix> w2(v.data(), c, h);
      Eigen::Map<Matrix> gw1(out.grad_u.data(), h, d);
      Eigen::Map<Matrix> gw2(out.grad_v.data(), c, h);
      gw2.noalias() = g * hidden_act.transpose();
      gw1.noalias() = (w2.transpose() * g) * xb;
      break;
    }
    case Strategy::input: {
      Eigen::Map<const Matrix> w2(u.data(), c, h);
      Eigen::Map<Matrix> gw1(out.grad_v.data(), h, d);
      Eigen::Map<Matrix> gw2(out.grad_u.data(), c, h);
      gw2.noalias() = g * hidden_act.transpose();
      gw1.noalias() = (w2.transpose() * g) * xb;
      break;
    }
    case Strategy::split_input: {
      const int dp = layout_.personal_features;
      Eigen::Map<Matrix> gs(out.grad_u.data(), c, d - dp);
      gs.noalias() = g * xb.rightCols(d - dp);
      if (dp > 0) {
        Eigen::Map<Matrix> gp(out.grad_v.data(), c, dp);
        gp.noalias() = g * xb.leftCols(dp);
      }
      break;
    }
  }
  return out;
}

GradPair finite_diff_grad(const LocalObjective& obj, const ParamVec& v, const ParamVec& u,
                          double step) {
  if (!(step > 0.0)) throw ContractViolation("finite_diff_grad: step must be positive");
  GradPair out;
  out.grad_v = ParamVec::Zero(v.size());
  out.grad_u = ParamVec::Zero(u.size());
  ParamVec vp = v;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    vp[j] = v[j] + step;
    const double fp = obj.loss(vp, u);
    vp[j] = v[j] - step;
    const double fm = obj.loss(vp, u);
    vp[j] = v[j];
    out.grad_v[j] = (fp - fm) / (2.0 * step);
  }
  ParamVec up = u;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    up[j] = u[j] + step;
    const double fp = obj.loss(v, up);
    up[j] = u[j] - step;
    const double fm = obj.loss(v, up);
    up[j] = u[j];
    out.grad_u[j] = (fp - fm) / (2.0 * step);
  }
  return out;
}

double power_iteration(const Matrix& sym, int max_iters, double tol) {
  if (sym.rows() != sym.cols()) throw ContractViolation("power_iteration: matrix must be square");
  if (sym.rows() == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(sym.rows());
  // Deterministic but not axis-aligned start, so symmetric spectra still get mixed.
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.1 * std::sin(1.0 + static_cast<double>(i));
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd y = sym * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    const double next = x.dot(y);
    x = y / norm;
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotient at the final iterate.
  return std::max(0.0, x.dot(sym * x));
}

LipschitzEstimates lipschitz_ratios(const LocalObjective& obj, const ParamVec& v,
                                    const ParamVec& u, const ParamVec& dv, const ParamVec& du) {
  LipschitzEstimates r;
  const LossGrad base = obj.loss_and_grads(v, u);
  const double ndu = du.norm();
  const double ndv = dv.norm();
  if (ndu > 0.0) {
    const LossGrad moved = obj.loss_and_grads(v, u + du);
    r.l_u = (moved.grad_u - base.grad_u).norm() / ndu;
    r.l_vu = (moved.grad_v - base.grad_v).norm() / ndu;
  }
  if (ndv > 0.0) {
    const LossGrad moved = obj.loss_and_grads(v + dv, u);
    r.l_v = (moved.grad_v - base.grad_v).norm() / ndv;
    r.l_uv = (moved.grad_u - base.grad_u).norm() / ndv;
  }
  return r;
}

namespace {

LipschitzEstimates quadratic_lipschitz(const LocalObjective& obj) {
  const Eigen::VectorXd& w = obj.sample_weights();
  const Matrix wa = w.asDiagonal() * obj.a();
  const Matrix auu = obj.a().transpose() * wa;
  LipschitzEstimates out;
  out.l_u = power_iteration(auu);
  if (obj.spec().personal_dim > 0) {
    const Matrix wb = w.asDiagonal() * obj.b();
    out.l_v = power_iteration(obj.b().transpose() * wb);
    const Matrix cross = obj.a().transpose() * wb;  // shared x personal
    out.l_uv = std::sqrt(power_iteration(cross.transpose() * cross));
    out.l_vu = out.l_uv;
  }
  return out;
}

ParamVec nondegenerate_direction(int dim, Rng& rng, double radius, int max_retries) {
  if (dim == 0) return ParamVec(0);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    ParamVec d = random_normal(dim, rng, 1.0);
    const double n = d.norm();
    if (n > 1e-12) {
      const double len = radius * (0.05 + 0.95 * uniform01(rng));
      return d * (len / n);
    }
  }
  throw EstimationError("estimate_lipschitz: could not draw a nonzero probe displacement");
}

}  // namespace

LipschitzEstimates estimate_lipschitz(const LocalObjective& obj, int n_probes, std::uint64_t seed,
                                      const LipschitzProbeConfig& cfg) {
  if (n_probes < 2) throw ContractViolation("estimate_lipschitz: n_probes must be >= 2");
  if (obj.num_samples() == 0) throw InvalidObjective("estimate_lipschitz: empty data shard");
  if (obj.kind() == ObjectiveKind::quadratic) return quadratic_lipschitz(obj);

  Rng rng(seed);
  const int pv = obj.spec().personal_dim;
  const int pu = obj.spec().shared_dim;
  LipschitzEstimates best;
  for (int k = 0; k < n_probes; ++k) {
    const ParamVec v = random_normal(pv, rng, cfg.radius);
    const ParamVec u = random_normal(pu, rng, cfg.radius);
    const ParamVec dv = nondegenerate_direction(pv, rng, cfg.radius, cfg.max_retries);
    const ParamVec du = nondegenerate_direction(pu, rng, cfg.radius, cfg.max_retries);
    const LipschitzEstimates r = lipschitz_ratios(obj, v, u, dv, du);
    best.l_u = std::max(best.l_u, r.l_u);
    best.l_v = std::max(best.l_v, r.l_v);
    best.l_uv = std::max(best.l_uv, r.l_uv);
    best.l_vu = std::max(best.l_vu, r.l_vu);
  }
  const double s = std::max(1.0, cfg.safety_factor);
  best.l_u *= s;
  best.l_v *= s;
  best.l_uv *= s;
  best.l_vu *= s;
  return best;
}

}  // namespace fedapm
