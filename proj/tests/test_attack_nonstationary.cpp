#include <gtest/gtest.h>

#include "dosattack/attack_nonstationary.hpp"
#include "test_support.hpp"

using namespace dosattack;
using testsupport::Sampler;

namespace {

struct Instance {
  SystemModel model;
  PredictionEnsemble ens;
  ControllerGain gain;
  VectorXd x, mu, lo, hi;
};

Instance random_instance(Sampler& s, Protocol p, Eigen::Index n, Eigen::Index m, int N, bool shared) {
  Instance in;
  in.model = testsupport::random_model(s, n, m, N);
  in.ens = build_prediction_ensemble(in.model);
  in.mu = shared ? VectorXd::Constant(m, s.uniform(0.1, 0.9)) : s.uniform_vector(m, 0.1, 0.9);
  const double eps = s.uniform(0.05, 0.3);
  in.lo = (in.mu.array() - eps).max(0.0);
  in.hi = (in.mu.array() + eps).min(1.0);
  in.gain = control_gain(in.ens, in.model, in.mu, p);
  in.x = s.gaussian(n, 1, 1.0);
  return in;
}

AttackContext context(const Instance& in) {
  return AttackContext(in.ens, in.model, in.gain, in.x, in.mu, in.lo, in.hi);
}

double brute_vertex_max(const BoxQP& qp) {
  const auto d = qp.size();
  double best = -INFINITY;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
    VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = (mask >> i) & 1u ? qp.hi(i) : qp.lo(i);
    best = std::max(best, qp.objective(z));
  }
  return best;
}

}  // namespace

TEST(Restriction, ConstantScheduleEqualsScalarObjective) {
  Sampler s(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Protocol p = trial % 2 ? Protocol::TcpLike : Protocol::UdpLike;
    const auto in = random_instance(s, p, s.integer(1, 3), s.integer(1, 3), s.integer(1, 4), true);
    const auto ctx = context(in);
    const auto qp = build_qp(ctx);
    for (int j = 0; j < 5; ++j) {
      const double a = s.uniform(0.0, 1.0);
      const double scalar = iid_objective(ctx, a);
      EXPECT_NEAR(qp.objective(VectorXd::Constant(qp.size(), a)), scalar, 1e-10 * (1.0 + std::abs(scalar)));
    }
  }
}

// The UDP schedule objective is the exact expected-cost increase over the
// all-dropped channel for any per-step means.
TEST(Restriction, UdpScheduleObjectiveMatchesEnumeration) {
  Sampler s(52);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(s, Protocol::UdpLike, 2, 2, 3, false);
    const auto ctx = context(in);
    const auto qp = build_qp(ctx);
    const VectorXd z = s.uniform_vector(qp.size(), 0.0, 1.0);
    const VectorXd u = ctx.u_star();
    const double oracle = testsupport::enumerated_expected_cost(in.model, in.x, u, z) -
                          testsupport::enumerated_expected_cost(in.model, in.x, u, VectorXd::Zero(z.size()));
    EXPECT_NEAR(qp.objective(z), oracle, 1e-9 * (1.0 + std::abs(oracle)));
  }
}

TEST(Structure, TcpHessianPositiveSemidefinite) {
  Sampler s(53);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(s, Protocol::TcpLike, 2, 2, 3, false);
    const auto qp = build_qp(context(in));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(qp.H);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * qp.H.norm());
  }
}

TEST(Structure, UdpHessianHasZeroDiagonal) {
  Sampler s(54);
  const auto in = random_instance(s, Protocol::UdpLike, 2, 2, 3, false);
  const auto qp = build_qp(context(in));
  EXPECT_EQ(qp.H.diagonal().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Vertices, GrayCodeMatchesBruteForce) {
  Sampler s(55);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(s, Protocol::UdpLike, 2, 2, 4, false);
    const auto qp = build_qp(context(in));
    const VectorXd v = detail::best_vertex(qp);
    const double brute = brute_vertex_max(qp);
    EXPECT_NEAR(qp.objective(v), brute, 1e-10 * (1.0 + std::abs(brute)));
  }
}

TEST(Solver, BeatsCoarseGrid) {
  Sampler s(56);
  for (int trial = 0; trial < 4; ++trial) {
    const Protocol p = trial % 2 ? Protocol::TcpLike : Protocol::UdpLike;
    const auto in = random_instance(s, p, 2, 2, 4, false);
    const auto qp = build_qp(context(in));
    ASSERT_EQ(qp.size(), 8);
    const auto sol = solve_box_qp_max(qp);
    double grid = -INFINITY;
    VectorXd z(8);
    for (int code = 0; code < 390625; ++code) {  // 5^8
      int rest = code;
      for (int i = 0; i < 8; ++i) {
        z(i) = qp.lo(i) + 0.25 * (rest % 5) * (qp.hi(i) - qp.lo(i));
        rest /= 5;
      }
      grid = std::max(grid, qp.objective(z));
    }
    EXPECT_GE(sol.objective, grid - 1e-9 * (1.0 + std::abs(grid))) << "trial " << trial;
    EXPECT_TRUE(((sol.z - qp.lo).array() >= 0.0).all() && ((qp.hi - sol.z).array() >= 0.0).all());
  }
}

TEST(Solver, ExactFacesAgreeWithFullSolver) {
  Sampler s(57);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(s, Protocol::UdpLike, 2, 2, 3, false);
    const auto qp = build_qp(context(in));
    double exact = -INFINITY;
    for (const auto& p : detail::face_stationary_points(qp)) exact = std::max(exact, qp.objective(p));
    const auto sol = solve_box_qp_max(qp);
    EXPECT_NEAR(sol.objective, exact, 1e-10 * (1.0 + std::abs(exact)));
  }
}

TEST(Solver, NonStationaryDominatesIid) {
  Sampler s(58);
  for (int trial = 0; trial < 20; ++trial) {
    const Protocol p = trial % 2 ? Protocol::TcpLike : Protocol::UdpLike;
    const auto in = random_instance(s, p, 2, 2, 3, trial % 3 == 0);
    const auto qp = build_qp(context(in));
    const auto iid = solve_iid_constrained(qp);
    const auto full = solve_box_qp_max(qp);
    EXPECT_GE(full.objective, iid.objective - 1e-9 * (1.0 + std::abs(iid.objective)));
  }
}

TEST(Solver, IidScheduleIsConstantPerGroup) {
  Sampler s(59);
  const auto in = random_instance(s, Protocol::UdpLike, 2, 2, 4, false);
  const auto iid = solve_iid_constrained(build_qp(context(in)));
  for (std::size_t k = 1; k < iid.means.size(); ++k) EXPECT_EQ(iid.means[k], iid.means[0]);
}

TEST(Solver, SharedIidMatchesScalarOptimum) {
  Sampler s(60);
  for (int trial = 0; trial < 10; ++trial) {
    const Protocol p = trial % 2 ? Protocol::TcpLike : Protocol::UdpLike;
    const auto in = random_instance(s, p, 2, 2, 3, true);
    const auto ctx = context(in);
    const auto iid = solve_iid_constrained(build_qp(ctx));
    const auto scalar = optimal_alpha(ctx);
    EXPECT_NEAR(iid.objective, scalar.objective_star, 1e-10 * (1.0 + std::abs(scalar.objective_star)));
  }
}

TEST(Ascent, ObjectiveNeverDecreases) {
  Sampler s(61);
  const auto in = random_instance(s, Protocol::UdpLike, 3, 3, 4, false);
  const auto qp = build_qp(context(in));
  std::vector<double> trace;
  detail::projected_ascent(qp, 0.5 * (qp.lo + qp.hi), BoxQPSettings{}, &trace);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1]);
}

TEST(Solver, PointBoxReturnsNominal) {
  Sampler s(62);
  auto in = random_instance(s, Protocol::UdpLike, 2, 2, 3, false);
  in.lo = in.mu;
  in.hi = in.mu;
  const auto sol = solve_box_qp_max(build_qp(context(in)));
  EXPECT_EQ(sol.z, horizon_means(in.mu, 3));
}
