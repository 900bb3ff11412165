#include <gtest/gtest.h>

#include <cmath>
#include <ostream>
#include <string>

#include "fedapm/errors.hpp"
#include "fedapm/numcore.hpp"
#include "test_util.hpp"

namespace fedapm {
void PrintTo(Strategy s, std::ostream* os) { *os << to_string(s); }
}  // namespace fedapm

using namespace fedapm;
using fedapm::testing::random_quadratic;
using fedapm::testing::random_softmax;
using fedapm::testing::rel_err;
using fedapm::testing::vec;

TEST(Quadratic, IdentityCaseLossAndGradient) {
  auto obj = LocalObjective::quadratic(Matrix::Identity(2, 2), Matrix(2, 0), Eigen::VectorXd::Zero(2), 1.0);
  const auto lg = obj.loss_and_grads(ParamVec(0), vec({1, 1}));
  EXPECT_DOUBLE_EQ(lg.loss, 1.0);
  EXPECT_DOUBLE_EQ(lg.grad_u[0], 1.0);
  EXPECT_DOUBLE_EQ(lg.grad_u[1], 1.0);
  EXPECT_EQ(lg.grad_v.size(), 0);
}

TEST(Softmax, ZeroHeadGivesLog2PerSample) {
  auto obj = random_softmax(1, 12, 4, 2, Strategy::output, 3);
  Rng rng(5);
  const ParamVec u = random_normal(obj.spec().shared_dim, rng);
  const ParamVec v = ParamVec::Zero(obj.spec().personal_dim);
  EXPECT_NEAR(obj.loss(v, u), std::log(2.0), 1e-14);
}

TEST(Softmax, SeedSevenMatchesFiniteDifferences) {
  auto obj = random_softmax(7, 20, 4, 3);
  Rng rng(7);
  const ParamVec v = random_normal(obj.spec().personal_dim, rng);
  const ParamVec u = random_normal(obj.spec().shared_dim, rng);
  const auto lg = obj.loss_and_grads(v, u);
  const auto fd = finite_diff_grad(obj, v, u, 1e-6);
  EXPECT_LE(rel_err(lg.grad_v, fd.grad_v), 1e-5);
  EXPECT_LE(rel_err(lg.grad_u, fd.grad_u), 1e-5);
}

class GradientOracle : public ::testing::TestWithParam<Strategy> {};

TEST_P(GradientOracle, TwentyRandomPoints) {
  auto obj = random_softmax(11, 30, 5, 3, GetParam(), 4, 2);
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    const ParamVec v = random_normal(obj.spec().personal_dim, rng);
    const ParamVec u = random_normal(obj.spec().shared_dim, rng);
    const auto lg = obj.loss_and_grads(v, u);
    const auto fd = finite_diff_grad(obj, v, u);
    EXPECT_LE(rel_err(lg.grad_v, fd.grad_v), 1e-5) << "point " << k;
    EXPECT_LE(rel_err(lg.grad_u, fd.grad_u), 1e-5) << "point " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Strategies, GradientOracle,
                         ::testing::Values(Strategy::input, Strategy::output, Strategy::split_input),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Quadratic, GradientOracleTwentyPoints) {
  auto obj = random_quadratic(3, 9, 4, 2, 0.3);
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const ParamVec v = random_normal(2, rng);
    const ParamVec u = random_normal(4, rng);
    const auto lg = obj.loss_and_grads(v, u);
    const auto fd = finite_diff_grad(obj, v, u);
    EXPECT_LE(rel_err(lg.grad_v, fd.grad_v), 1e-5);
    EXPECT_LE(rel_err(lg.grad_u, fd.grad_u), 1e-5);
  }
}

TEST(FiniteDiff, HalfSquaredNorm) {
  auto obj = LocalObjective::quadratic(Matrix::Identity(2, 2), Matrix(2, 0), Eigen::VectorXd::Zero(2), 1.0);
  const auto fd = finite_diff_grad(obj, ParamVec(0), vec({2, 0}));
  EXPECT_NEAR(fd.grad_u[0], 2.0, 1e-8);
  EXPECT_NEAR(fd.grad_u[1], 0.0, 1e-8);
}

TEST(FiniteDiff, ZeroWeightsGiveZeroGradient) {
  auto obj = random_softmax(2, 10, 3, 3).with_sample_weights(Eigen::VectorXd::Zero(10));
  Rng rng(2);
  const ParamVec v = random_normal(obj.spec().personal_dim, rng);
  const ParamVec u = random_normal(obj.spec().shared_dim, rng);
  const auto fd = finite_diff_grad(obj, v, u);
  EXPECT_LE(fd.grad_v.norm(), 1e-12);
  EXPECT_LE(fd.grad_u.norm(), 1e-12);
  EXPECT_EQ(obj.loss(v, u), 0.0);
}

TEST(Minibatch, FullIndexSetReproducesFullGradient) {
  auto obj = random_softmax(4, 16, 3, 3);
  Rng rng(1);
  const ParamVec v = random_normal(obj.spec().personal_dim, rng);
  const ParamVec u = random_normal(obj.spec().shared_dim, rng);
  std::vector<int> all(16);
  for (int k = 0; k < 16; ++k) all[static_cast<std::size_t>(k)] = k;
  const auto full = obj.loss_and_grads(v, u);
  const auto batch = obj.loss_and_grads(v, u, all);
  EXPECT_NEAR(full.loss, batch.loss, 1e-14);
  EXPECT_LE((full.grad_u - batch.grad_u).norm(), 1e-14);
  EXPECT_LE((full.grad_v - batch.grad_v).norm(), 1e-14);
}

TEST(Objective, DimensionMismatchThrows) {
  auto obj = random_quadratic(1, 6, 3, 1);
  EXPECT_THROW(obj.loss(ParamVec::Zero(2), ParamVec::Zero(3)), ContractViolation);
  EXPECT_THROW(obj.loss(ParamVec::Zero(1), ParamVec::Zero(4)), ContractViolation);
}

TEST(Objective, RejectsBadAlphaAndLabels) {
  EXPECT_THROW(LocalObjective::quadratic(Matrix::Identity(2, 2), Matrix(2, 0), Eigen::VectorXd::Zero(2), 0.0),
               ContractViolation);
  SoftmaxLayout layout{2, 2, 1, 0, Strategy::output};
  EXPECT_THROW(LocalObjective::softmax(layout, Matrix::Zero(1, 2), {2}, 1.0), ContractViolation);
}

TEST(Lipschitz, TwiceIdentityGivesFour) {
  auto obj = LocalObjective::quadratic(2.0 * Matrix::Identity(3, 3), Matrix(3, 0), Eigen::VectorXd::Ones(3), 1.0);
  const auto est = estimate_lipschitz(obj, 4, 1);
  EXPECT_NEAR(est.l_u, 4.0, 1e-6);
}

TEST(Lipschitz, DecoupledQuadraticHasZeroCrossTerms) {
  Rng rng(8);
  Matrix a = fedapm::testing::random_matrix(6, 3, rng);
  auto obj = LocalObjective::quadratic(a, Matrix::Zero(6, 2), random_normal(6, rng), 1.0);
  const auto est = estimate_lipschitz(obj, 4, 1);
  EXPECT_EQ(est.l_v, 0.0);
  EXPECT_EQ(est.l_uv, 0.0);
  EXPECT_EQ(est.l_vu, 0.0);
}

TEST(Lipschitz, SoftmaxEstimateDominatesFreshPairs) {
  auto obj = random_softmax(3, 25, 4, 3);
  const auto est = estimate_lipschitz(obj, 16, 3);
  Rng rng(303);
  const int dv = obj.spec().personal_dim;
  const int du = obj.spec().shared_dim;
  for (int k = 0; k < 100; ++k) {
    const ParamVec v = random_normal(dv, rng);
    const ParamVec u = random_normal(du, rng);
    const auto r = lipschitz_ratios(obj, v, u, random_normal(dv, rng), random_normal(du, rng));
    EXPECT_GE(est.l_u, r.l_u);
    EXPECT_GE(est.l_v, r.l_v);
    EXPECT_GE(est.l_uv, r.l_uv);
    EXPECT_GE(est.l_vu, r.l_vu);
  }
}

TEST(Lipschitz, RejectsTooFewProbes) {
  auto obj = random_softmax(3, 5, 2, 2);
  EXPECT_THROW(estimate_lipschitz(obj, 1, 0), ContractViolation);
}

TEST(PowerIteration, DiagonalMatrix) {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1.0, 7.0, 3.0;
  EXPECT_NEAR(power_iteration(d), 7.0, 1e-10);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(42, 1), b = make_stream(42, 1), c = make_stream(42, 2);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
}
