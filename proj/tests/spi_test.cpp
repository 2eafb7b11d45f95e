#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dlqr/errors.hpp"
#include "dlqr/problems.hpp"
#include "dlqr/spi.hpp"
#include "dlqr/synthesis.hpp"
#include "testing.hpp"

namespace dlqr {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Classical policy iteration on (sqrt(g) A, sqrt(g) B), evaluated through a
// dense Kronecker solve written here independently of the library.
std::vector<Matrix> hewer_gains(const ProblemInstance& prob, double g, Matrix K, int steps) {
  const int n = prob.states();
  const Matrix As = std::sqrt(g) * prob.A();
  const Matrix Bs = std::sqrt(g) * prob.B();
  const Matrix& Q = prob.Q().dense();
  const Matrix& R = prob.R().dense();
  std::vector<Matrix> gains{K};
  for (int j = 0; j < steps; ++j) {
    const Matrix M = As + Bs * K;
    const Matrix W = Q + K.transpose() * R * K;
    Matrix kron(n * n, n * n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) kron.block(a * n, b * n, n, n) = M(b, a) * M.transpose();
    }
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
    const Vector p = lhs.partialPivLu().solve(Eigen::Map<const Vector>(W.data(), n * n));
    Matrix P = Eigen::Map<const Matrix>(p.data(), n, n);
    P = 0.5 * (P + P.transpose());
    K = -(R + Bs.transpose() * P * Bs).inverse() * Bs.transpose() * P * As;
    gains.push_back(K);
  }
  return gains;
}

void expect_trace_invariants(const ProblemInstance& prob, const SpiTrace& trace) {
  const auto& it = trace.iterations;
  ASSERT_FALSE(it.empty());
  std::mt19937_64 rng(61);
  for (std::size_t j = 0; j < it.size(); ++j) {
    EXPECT_LT(it[j].rho_closed_loop, 1.0);
    EXPECT_LT(it[j].rho_discounted, 1.0);
    EXPECT_GE(linalg::min_eig_sym(SymMatrix(it[j].P.dense() - prob.Q().dense())), -1e-8);
    if (j == 0) continue;
    EXPECT_LE(linalg::max_eig_sym(SymMatrix(it[j].P.dense() - it[j - 1].P.dense())), 1e-8);
    EXPECT_LE(it[j].gap, it[j - 1].gap + 1e-12);
    for (int k = 0; k < 20; ++k) {
      const Vector x0 = testing::random_matrix(rng, prob.states(), 1);
      EXPECT_LE(eval_cost(prob, trace.gamma, it[j].K, x0),
                eval_cost(prob, trace.gamma, it[j - 1].K, x0) + 1e-8);
    }
  }
}

TEST(PiTarget, Examples) {
  const ProblemInstance prob = problems::scalar_unit();
  EXPECT_EQ(pi_target(prob, 0.0, SymMatrix(scalar(3.0)))(0, 0), 0.0);
  EXPECT_NEAR(pi_target(prob, 0.5, SymMatrix(scalar(std::sqrt(2.0))))(0, 0), -0.414214, 1e-6);
  std::mt19937_64 rng(62);
  for (int p = 0; p < 10; ++p) {
    const ProblemInstance r = testing::random_problem(rng);
    const RiccatiSolution sol = solve_dare(r, 0.6);
    EXPECT_LE((pi_target(r, 0.6, sol.P) - sol.K).norm(), 1e-10);
  }
}

TEST(MaxStableAlpha, GridValues) {
  const ProblemInstance prob = problems::scalar_unit();
  // A + B K = 1 + K: stable for K in (-2, 0). Blend from K = -1 toward K = 1.
  EXPECT_DOUBLE_EQ(max_stable_alpha(prob, scalar(-1.0), scalar(-0.5), 0.01), 1.0);
  const double a = max_stable_alpha(prob, scalar(-1.0), scalar(1.0), 0.01);
  // -1 + 2 alpha < 0  <=>  alpha < 0.5.
  EXPECT_NEAR(a, 0.49, 1e-12);
  EXPECT_THROW(max_stable_alpha(prob, scalar(-1.0), scalar(1.0), 0.0), DomainError);
  EXPECT_THROW(max_stable_alpha(prob, scalar(-1.0), scalar(1.0), 1.5), DomainError);
}

TEST(MaxStableAlpha, FallsBackWhenStableSetIsNotAPrefix) {
  // A = 0, B = I, so the closed loop is K(alpha) = [[0, 4 alpha - a],
  // [4 alpha - b, 0]] with eigenvalues +-sqrt(q), q = 16 (alpha - 3/8)^2 - 2.
  // On the grid {1/4, 1/2, 3/4, 1}, |q| < 1 only at 3/4, so bisection finds
  // nothing and the downward scan must.
  const double a = 1.5 + std::sqrt(2.0);
  const double b = 1.5 - std::sqrt(2.0);
  const ProblemInstance prob(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                             Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  const Matrix K0 = (Matrix(2, 2) << 0, -a, -b, 0).finished();
  const Matrix Kt = (Matrix(2, 2) << 0, 4 - a, 4 - b, 0).finished();
  EXPECT_DOUBLE_EQ(max_stable_alpha(prob, K0, Kt, 0.25), 0.75);
}

TEST(SpiRun, OptimalStartConvergesImmediately) {
  const ProblemInstance prob = problems::example1();
  const RiccatiSolution sol = solve_dare(prob, 0.5);
  SpiConfig cfg;
  cfg.gamma = 0.5;
  cfg.K0 = sol.K;
  const SpiTrace trace = spi_run(prob, cfg);
  EXPECT_EQ(trace.stop_reason, SpiStopReason::converged_to_optimal);
  ASSERT_EQ(trace.iterations.size(), 2u);
  EXPECT_EQ(trace.iterations[1].alpha, 1.0);
  EXPECT_LE((trace.iterations[1].K - sol.K).norm(), 1e-10);
}

TEST(SpiRun, ScalarFromHalfGain) {
  const ProblemInstance prob = problems::scalar_unit();
  SpiConfig cfg;
  cfg.gamma = 0.5;
  cfg.K0 = scalar(-0.5);
  const SpiTrace trace = spi_run(prob, cfg);
  EXPECT_EQ(trace.stop_reason, SpiStopReason::converged_to_optimal);
  // P0 (1 - 0.5 * 0.25) = 1 + 0.25.
  EXPECT_NEAR(trace.iterations.front().P(0, 0), 1.25 / 0.875, 1e-12);
  EXPECT_NEAR(trace.iterations.back().P(0, 0), std::sqrt(2.0), 1e-9);
  expect_trace_invariants(prob, trace);
}

TEST(SpiRun, ExampleOneFromGuaranteedCostGain) {
  const ProblemInstance prob = problems::example1();
  const CostSynthesisResult c = synth_guaranteed_cost(prob, 0.1, Vector::Ones(2));
  SpiConfig cfg;
  cfg.gamma = 0.1;
  cfg.K0 = c.K_hat;
  cfg.alpha_scale = 0.1;
  const SpiTrace trace = spi_run(prob, cfg);
  EXPECT_EQ(trace.stop_reason, SpiStopReason::alpha_below_epsilon);
  expect_trace_invariants(prob, trace);
  EXPECT_LE(trace.iterations.back().gap, 1e-2);
  EXPECT_GT(trace.iterations.back().gap, 0.0);
  for (std::size_t j = 1; j < trace.iterations.size(); ++j) {
    EXPECT_GE(trace.iterations[j].alpha_bar, cfg.alpha_grid_step);
  }
}

TEST(SpiRun, MatchesClassicalPolicyIterationWhenFullStepsAreStable) {
  std::mt19937_64 rng(63);
  int compared = 0;
  for (int p = 0; p < 40 && compared < 5; ++p) {
    const ProblemInstance prob = testing::random_problem(rng, 3, 2);
    const double g = 0.9;
    const RiccatiSolution opt = solve_dare(prob, g);
    if (!(linalg::spectral_radius(prob.closed_loop(opt.K)) < 0.95)) continue;
    SpiConfig cfg;
    cfg.gamma = g;
    cfg.K0 = testing::random_gain_in_K_gamma(rng, prob, g);
    if (!(linalg::spectral_radius(prob.closed_loop(cfg.K0)) < 1.0)) continue;
    cfg.max_iterations = 8;
    const SpiTrace trace = spi_run(prob, cfg);
    bool all_full = true;
    for (std::size_t j = 1; j < trace.iterations.size(); ++j) {
      all_full = all_full && trace.iterations[j].alpha_bar == 1.0;
    }
    if (!all_full) continue;
    ++compared;
    const auto ref = hewer_gains(prob, g, cfg.K0, static_cast<int>(trace.iterations.size()) - 1);
    for (std::size_t j = 0; j < trace.iterations.size(); ++j) {
      EXPECT_LE((trace.iterations[j].K - ref[j]).norm(), 1e-10) << "iteration " << j;
    }
  }
  EXPECT_GE(compared, 3);
}

TEST(SpiRun, RandomProblemsKeepInvariants) {
  std::mt19937_64 rng(64);
  for (int p = 0; p < 10; ++p) {
    const ProblemInstance prob = testing::random_problem(rng, 3, 2);
    const double g = 0.3;
    // Start from a Schur-stabilizing gain of the undiscounted problem.
    SpiConfig cfg;
    cfg.gamma = g;
    cfg.K0 = solve_dare(prob, 1.0).K;
    cfg.alpha_scale = 0.5;
    cfg.max_iterations = 60;
    expect_trace_invariants(prob, spi_run(prob, cfg));
  }
}

TEST(SpiRun, IterationCap) {
  const ProblemInstance prob = problems::example1();
  SpiConfig cfg;
  cfg.gamma = 0.1;
  cfg.K0 = solve_dare(prob, 1.0).K;
  cfg.alpha_scale = 0.1;
  cfg.max_iterations = 3;
  const SpiTrace trace = spi_run(prob, cfg);
  EXPECT_EQ(trace.stop_reason, SpiStopReason::max_iterations);
  EXPECT_EQ(trace.iterations.size(), 4u);
}

TEST(SpiRun, RejectsNonStabilizingStart) {
  SpiConfig cfg;
  cfg.gamma = 0.5;
  cfg.K0 = scalar(1.0);
  EXPECT_THROW(spi_run(problems::scalar_unit(), cfg), InputError);
  cfg.K0 = Matrix::Zero(2, 1);
  EXPECT_THROW(spi_run(problems::scalar_unit(), cfg), DimensionError);
  cfg.K0 = scalar(-1.0);
  cfg.alpha_scale = 0.0;
  EXPECT_THROW(spi_run(problems::scalar_unit(), cfg), DomainError);
}

TEST(SpiStopReason, Names) {
  EXPECT_EQ(to_string(SpiStopReason::alpha_below_epsilon), "alpha_below_epsilon");
  EXPECT_EQ(to_string(SpiStopReason::max_iterations), "max_iterations");
  EXPECT_EQ(to_string(SpiStopReason::converged_to_optimal), "converged_to_optimal");
}

}  // namespace
}  // namespace dlqr
