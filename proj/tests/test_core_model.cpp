#include <gtest/gtest.h>

#include "dosattack/core_model.hpp"
#include "test_support.hpp"

using namespace dosattack;
using testsupport::Sampler;

namespace {

SystemModel scalar_model(double a, double b, int N) {
  SystemModel m;
  m.A = MatrixXd::Constant(1, 1, a);
  m.B = MatrixXd::Constant(1, 1, b);
  m.sigma_w = MatrixXd::Constant(1, 1, 0.01);
  m.sigma_x = MatrixXd::Constant(1, 1, 0.01);
  m.x_bar = VectorXd::Ones(1);
  m.q_diag = VectorXd::Ones(1);
  m.omega_diag = VectorXd::Ones(N);
  m.psi_diag = VectorXd::Ones(N);
  m.horizon = N;
  return m;
}

}  // namespace

TEST(PredictionEnsemble, ScalarHandExample) {
  const auto ens = build_prediction_ensemble(scalar_model(2.0, 1.0, 3));
  EXPECT_DOUBLE_EQ(ens.phi(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ens.phi(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(ens.phi(2, 0), 8.0);
  EXPECT_DOUBLE_EQ(ens.gamma(2, 0), 4.0);
  EXPECT_DOUBLE_EQ(ens.gamma(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(ens.gamma(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(ens.gamma(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(ens.delta_phi(0, 0), 84.0);
  // F = Gamma' Phi: column sums of Gamma weighted by Phi.
  EXPECT_DOUBLE_EQ(ens.f(0, 0), 1 * 2 + 2 * 4 + 4 * 8);
  EXPECT_DOUBLE_EQ(ens.f(2, 0), 8.0);
}

TEST(PredictionEnsemble, StackedEqualsIterated) {
  Sampler s(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = s.integer(1, 4), m = s.integer(1, 4);
    const int N = s.integer(1, 8);
    const auto model = testsupport::random_model(s, n, m, N);
    const auto ens = build_prediction_ensemble(model);
    const VectorXd x = s.gaussian(n, 1, 1.0);
    const VectorXd u = s.gaussian(N * m, 1, 1.0);
    const VectorXd w = s.gaussian(N * n, 1, 0.1);
    const VectorXd stacked = ens.phi * x + ens.gamma * u + ens.lambda * w;
    const VectorXd iterated = testsupport::iterate_trajectory(model, x, u, w);
    EXPECT_LE((stacked - iterated).norm(), 1e-10 * (1.0 + iterated.norm())) << "trial " << trial;
  }
}

TEST(PredictionEnsemble, GramiansSymmetricAndConsistent) {
  Sampler s(12);
  const auto model = testsupport::random_model(s, 3, 2, 4);
  const auto ens = build_prediction_ensemble(model);
  const MatrixXd omega = model.omega_diag.asDiagonal();
  EXPECT_TRUE(ens.delta_gamma.isApprox(ens.gamma.transpose() * omega * ens.gamma, 1e-12));
  EXPECT_TRUE(ens.delta_phi.isApprox(ens.phi.transpose() * omega * ens.phi, 1e-12));
  EXPECT_EQ(ens.delta_gamma, ens.delta_gamma.transpose());
  EXPECT_EQ(ens.delta_h.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE((ens.delta_h + MatrixXd(ens.delta_gamma_diag.asDiagonal())).isApprox(ens.delta_gamma));
}

TEST(PredictionEnsemble, NoiseCostMatchesDenseTrace) {
  Sampler s(13);
  const auto model = testsupport::random_model(s, 3, 2, 5);
  const auto ens = build_prediction_ensemble(model);
  EXPECT_NEAR(ens.noise_cost(), (ens.delta_lambda * ens.horizon_noise_covariance()).trace(), 1e-12);
}

TEST(StepPlant, TwoStateHandExample) {
  auto model = testsupport::reference_plant(5);
  const VectorXd x = VectorXd::Ones(2);
  VectorXd u(2), v(2);
  u << -1.0, 0.5;
  v << 1.0, 0.0;
  const VectorXd next = step_plant(model, x, u, v, VectorXd::Zero(2));
  EXPECT_NEAR(next(0), 0.035, 1e-15);
  EXPECT_NEAR(next(1), 0.85, 1e-15);
}

TEST(StepPlant, AllDroppedEqualsZeroInputBitwise) {
  Sampler s(14);
  const auto model = testsupport::random_model(s, 3, 2, 2);
  const VectorXd x = s.gaussian(3, 1, 1.0), u = s.gaussian(2, 1, 5.0), w = s.gaussian(3, 1, 0.1);
  const VectorXd a = step_plant(model, x, u, VectorXd::Zero(2), w);
  const VectorXd b = step_plant(model, x, VectorXd::Zero(2), VectorXd::Ones(2), w);
  EXPECT_EQ(a, b);
}

TEST(StepPlant, RejectsWrongDimensions) {
  auto model = testsupport::reference_plant(5);
  try {
    step_plant(model, VectorXd::Ones(3), VectorXd::Ones(2), VectorXd::Ones(2), VectorXd::Zero(2));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(Validate, RejectsBadFields) {
  auto model = testsupport::reference_plant(5);
  model.psi_diag = VectorXd::Ones(3);
  EXPECT_THROW(model.validate(), Error);
  model = testsupport::reference_plant(5);
  model.sigma_w(0, 1) = 1.0;
  EXPECT_THROW(model.validate(), Error);
  model = testsupport::reference_plant(5);
  model.q_diag(0) = 0.0;
  EXPECT_THROW(model.validate(), Error);
  model = testsupport::reference_plant(5);
  model.horizon = 0;
  EXPECT_THROW(model.validate(), Error);
}

TEST(Reachability, ReferencePlantReachable) {
  const auto r = check_reachable(testsupport::reference_plant(5));
  EXPECT_TRUE(r.reachable);
  EXPECT_EQ(r.rank, 2);
}

TEST(Reachability, UnreachableDirectionDetected) {
  SystemModel model = testsupport::reference_plant(4);
  model.A = MatrixXd::Identity(2, 2);
  model.B = MatrixXd::Zero(2, 1);
  model.B(0, 0) = 1.0;
  model.psi_diag = VectorXd::Ones(4);
  const auto r = check_reachable(model);
  EXPECT_FALSE(r.reachable);
  EXPECT_EQ(r.rank, 1);
}

TEST(Reachability, WideInputMatrixUsesAttainableRank) {
  SystemModel model = testsupport::reference_plant(2);
  model.B = MatrixXd::Identity(2, 3).eval();
  model.psi_diag = VectorXd::Ones(6);
  const auto r = check_reachable(model);
  EXPECT_EQ(r.max_rank, 2);
  EXPECT_TRUE(r.reachable);
}
