#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "dlqr/errors.hpp"
#include "dlqr/lyap_riccati.hpp"
#include "dlqr/problems.hpp"
#include "testing.hpp"

namespace dlqr {
namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector unit1() { return Vector::Ones(1); }

// Discounted DARE residual computed directly from its definition, as an
// oracle independent of the library's residual routine.
double dare_residual_oracle(const ProblemInstance& prob, double g, const Matrix& P) {
  const Matrix& A = prob.A();
  const Matrix& B = prob.B();
  const Matrix S = prob.R().dense() + g * B.transpose() * P * B;
  const Matrix rhs = g * A.transpose() * P * A -
                     g * g * A.transpose() * P * B * S.inverse() * B.transpose() * P * A +
                     prob.Q().dense();
  return (rhs - P).norm();
}

TEST(ProblemInstance, RejectsShapeMismatch) {
  EXPECT_THROW(ProblemInstance(Matrix::Identity(2, 2), Matrix::Ones(3, 1),
                               Matrix::Identity(2, 2), scalar(1)),
               DimensionError);
  EXPECT_THROW(ProblemInstance(Matrix::Identity(2, 2), Matrix::Ones(2, 1),
                               Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
               DimensionError);
}

TEST(ProblemInstance, RejectsIndefiniteWeightsNamingTheAssumption) {
  try {
    ProblemInstance(scalar(1), scalar(1), scalar(-1), scalar(1));
    FAIL() << "expected AssumptionError";
  } catch (const AssumptionError& e) {
    EXPECT_NE(std::string(e.what()).find("SA2"), std::string::npos);
  }
  EXPECT_THROW(ProblemInstance(scalar(1), scalar(1), scalar(1), scalar(0)),
               AssumptionError);
}

TEST(ProblemInstance, RejectsUnstabilizablePair) {
  // Unstable mode at 2 is not reachable from B.
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = 2.0;
  A(1, 1) = 0.5;
  Matrix B(2, 1);
  B << 0.0, 1.0;
  try {
    ProblemInstance(A, B, Matrix::Identity(2, 2), scalar(1));
    FAIL() << "expected AssumptionError";
  } catch (const AssumptionError& e) {
    EXPECT_NE(std::string(e.what()).find("SA1"), std::string::npos);
  }
  // The same uncontrollable mode inside the unit circle is fine.
  A(0, 0) = 0.9;
  EXPECT_NO_THROW(ProblemInstance(A, B, Matrix::Identity(2, 2), scalar(1)));
}

TEST(ProblemInstance, ValidatesStageFactorization) {
  Matrix C(2, 1), D(2, 1);
  C << 1, 0;
  D << 0, 1;
  EXPECT_NO_THROW(ProblemInstance(scalar(1), scalar(1), scalar(1), scalar(1), C, D));
  Matrix D_bad(2, 1);
  D_bad << 1, 0;  // C'D != 0
  EXPECT_THROW(ProblemInstance(scalar(1), scalar(1), scalar(1), scalar(1), C, D_bad),
               AssumptionError);
}

TEST(IsStabilizable, Examples) {
  EXPECT_TRUE(is_stabilizable(problems::example1().A(), problems::example1().B()));
  EXPECT_FALSE(is_stabilizable(scalar(1.5), scalar(0)));
  EXPECT_TRUE(is_stabilizable(scalar(0.5), scalar(0)));
}

TEST(SolveDare, ScalarClosedForms) {
  const ProblemInstance prob = problems::scalar_unit();
  const RiccatiSolution s0 = solve_dare(prob, 0.0);
  EXPECT_NEAR(s0.P(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(s0.K(0, 0), 0.0, 1e-12);

  const RiccatiSolution s5 = solve_dare(prob, 0.5);
  EXPECT_NEAR(s5.P(0, 0), kSqrt2, 1e-9);
  EXPECT_NEAR(s5.K(0, 0), -0.5 * kSqrt2 / (1.0 + 0.5 * kSqrt2), 1e-9);
  EXPECT_NEAR(s5.K(0, 0), -0.414214, 1e-6);

  const RiccatiSolution s1 = solve_dare(prob, 1.0);
  EXPECT_NEAR(s1.P(0, 0), kGolden, 1e-9);
  EXPECT_NEAR(s1.K(0, 0), -(kGolden - 1.0), 1e-9);
}

TEST(SolveDare, ExampleOneDestabilizingAtSmallDiscount) {
  const ProblemInstance prob = problems::example1();
  const RiccatiSolution sol = solve_dare(prob, 0.07);
  EXPECT_GT(linalg::spectral_radius(prob.closed_loop(sol.K)), 1.0);
  // Yet the discounted closed loop is always Schur.
  EXPECT_LT(std::sqrt(0.07) * linalg::spectral_radius(prob.closed_loop(sol.K)), 1.0);
}

TEST(SolveDare, RejectsDiscountOutsideUnitInterval) {
  EXPECT_THROW(solve_dare(problems::scalar_unit(), -0.1), DomainError);
  EXPECT_THROW(solve_dare(problems::scalar_unit(), 1.1), DomainError);
}

TEST(SolveDare, InvariantsOnRandomProblems) {
  std::mt19937_64 rng(21);
  for (int p = 0; p < 50; ++p) {
    const ProblemInstance prob = testing::random_problem(rng);
    for (double g : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      const RiccatiSolution sol = solve_dare(prob, g);
      const Matrix& P = sol.P.dense();
      const double pn = P.norm();
      const Matrix& A = prob.A();
      const Matrix& B = prob.B();
      const Matrix acl = prob.closed_loop(sol.K);
      EXPECT_LE(dare_residual_oracle(prob, g, P), 1e-9 * (1.0 + pn));
      EXPECT_GE(linalg::min_eig_sym(SymMatrix(P - prob.Q().dense())), -1e-8);
      EXPECT_LE((g * A.transpose() * P * acl - (P - prob.Q().dense())).norm(),
                1e-8 * (1.0 + pn));
      const Matrix rinv_bt = prob.R().dense().inverse() * B.transpose();
      EXPECT_LE((acl - (A - g * B * rinv_bt * P * acl)).norm(), 1e-8);
      EXPECT_LT(std::sqrt(g) * linalg::spectral_radius(acl), 1.0);
    }
  }
}

TEST(SolveDare, MatchesScaledProblemOracle) {
  // The discounted problem equals the undiscounted one on (sqrt(g) A, sqrt(g) B).
  std::mt19937_64 rng(22);
  for (int p = 0; p < 10; ++p) {
    const ProblemInstance prob = testing::random_problem(rng);
    const double g = 0.7;
    const RiccatiSolution sol = solve_dare(prob, g);
    const ProblemInstance scaled(std::sqrt(g) * prob.A(), std::sqrt(g) * prob.B(),
                                 prob.Q().dense(), prob.R().dense());
    const RiccatiSolution ref = solve_dare(scaled, 1.0);
    EXPECT_LE((sol.P.dense() - ref.P.dense()).norm(), 1e-9 * (1.0 + ref.P.dense().norm()));
  }
}

TEST(SolveStein, Examples) {
  const SymMatrix W(Matrix::Identity(2, 2) * 3.0);
  EXPECT_TRUE(solve_stein(Matrix::Zero(2, 2), W).dense().isApprox(W.dense()));
  EXPECT_NEAR(solve_stein(scalar(0.5), SymMatrix(scalar(1))).dense()(0, 0), 4.0 / 3.0, 1e-14);
  const double k = -0.5 * kSqrt2 / (1.0 + 0.5 * kSqrt2);
  const SymMatrix P = solve_stein(scalar(std::sqrt(0.5) * (1.0 + k)), SymMatrix(scalar(1.0 + k * k)));
  EXPECT_NEAR(P(0, 0), kSqrt2, 1e-10);
}

TEST(SolveStein, RejectsNonSchur) {
  EXPECT_THROW(solve_stein(scalar(1.0), SymMatrix(scalar(1))), SpectralPreconditionError);
  EXPECT_THROW(solve_stein(scalar(-1.2), SymMatrix(scalar(1))), SpectralPreconditionError);
}

TEST(SolveStein, ResidualAndSymmetryOnRandomInputs) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    Matrix M = testing::random_matrix(rng, n, n);
    M *= 0.95 / std::max(1e-3, linalg::spectral_radius(M));
    const SymMatrix W = testing::random_spd(rng, n);
    const SymMatrix P = solve_stein(M, W);
    const Matrix& p = P.dense();
    EXPECT_LE((M.transpose() * p * M - p + W.dense()).norm(), 1e-10 * (1.0 + p.norm()));
    EXPECT_EQ((p - p.transpose()).norm(), 0.0);
  }
}

TEST(EvalCost, ScalarExamples) {
  const ProblemInstance prob = problems::scalar_unit();
  const double k = solve_dare(prob, 0.5).K(0, 0);
  EXPECT_NEAR(eval_cost(prob, 0.5, scalar(0), unit1()), 2.0, 1e-12);
  EXPECT_NEAR(eval_cost(prob, 0.5, scalar(k), unit1()), kSqrt2, 1e-10);
  EXPECT_EQ(eval_cost(prob, 0.5, scalar(k), Vector::Zero(1)), 0.0);
}

TEST(EvalCost, InfiniteOutsideDiscountedStabilitySet) {
  const ProblemInstance prob = problems::scalar_unit();
  // sqrt(0.5) * |1 + 1| > 1.
  EXPECT_TRUE(std::isinf(eval_cost(prob, 0.5, scalar(1.0), unit1())));
  EXPECT_FALSE(evaluate_policy(prob, 0.5, scalar(1.0)).in_K_gamma);
}

TEST(EvalCostTrace, ScalarExamples) {
  const ProblemInstance prob = problems::scalar_unit();
  const double k = solve_dare(prob, 0.5).K(0, 0);
  EXPECT_NEAR(eval_cost_trace(prob, 0.5, scalar(0), unit1()), 2.0, 1e-12);
  EXPECT_NEAR(eval_cost_trace(prob, 0.5, scalar(k), unit1()), kSqrt2, 1e-10);
  EXPECT_EQ(eval_cost_trace(prob, 0.5, scalar(k), Vector::Zero(1)), 0.0);
  EXPECT_THROW(eval_cost_trace(prob, 0.5, scalar(1.0), unit1()), SpectralPreconditionError);
}

TEST(EvalCostSim, ScalarExamples) {
  const ProblemInstance prob = problems::scalar_unit();
  const double k = solve_dare(prob, 0.5).K(0, 0);
  EXPECT_DOUBLE_EQ(eval_cost_sim(prob, 0.5, scalar(0), unit1(), 1), 1.0);
  EXPECT_NEAR(eval_cost_sim(prob, 0.5, scalar(0), unit1(), 50), 2.0, 1e-12);
  EXPECT_NEAR(eval_cost_sim(prob, 0.5, scalar(k), unit1(), 60), kSqrt2, 1e-8);
}

TEST(EvalCostSim, OverflowIsInfinite) {
  const ProblemInstance prob = problems::scalar_unit();
  EXPECT_TRUE(std::isinf(eval_cost_sim(prob, 1.0, scalar(10.0), unit1(), 100000)));
}

TEST(EvalCost, ThreeRoutesAgreeOnRandomPolicies) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> gamma_dist(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const ProblemInstance prob = testing::random_problem(rng);
    const double g = gamma_dist(rng);
    const Matrix K = testing::random_gain_in_K_gamma(rng, prob, g);
    const Vector x0 = testing::random_matrix(rng, prob.states(), 1);
    const double exact = eval_cost(prob, g, K, x0);
    const double trace = eval_cost_trace(prob, g, K, x0);
    const double r = std::sqrt(g) * linalg::spectral_radius(prob.closed_loop(K));
    // Horizon with r^h small enough that the tail is below 1e-10 relative.
    const int horizon = static_cast<int>(std::ceil(std::log(1e-13) / std::log(r))) + 50;
    const double sim = eval_cost_sim(prob, g, K, x0, horizon);
    EXPECT_NEAR(trace, exact, 1e-8 * exact);
    EXPECT_NEAR(sim, exact, 1e-8 * exact);
  }
}

TEST(EvalCost, OptimalGainMinimizesCost) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 50; ++trial) {
    const ProblemInstance prob = testing::random_problem(rng);
    const double g = 0.8;
    const RiccatiSolution opt = solve_dare(prob, g);
    const Matrix K = testing::random_gain_in_K_gamma(rng, prob, g);
    const Vector x0 = testing::random_matrix(rng, prob.states(), 1);
    EXPECT_GE(eval_cost(prob, g, K, x0), eval_cost(prob, g, opt.K, x0) - 1e-8);
    const CostEvaluation ev = evaluate_policy(prob, g, K);
    ASSERT_TRUE(ev.in_K_gamma);
    EXPECT_GE(linalg::min_eig_sym(SymMatrix(ev.P_K.dense() - opt.P.dense())), -1e-8);
  }
}

TEST(RelativeError, Examples) {
  const ProblemInstance prob = problems::scalar_unit();
  const RiccatiSolution opt = solve_dare(prob, 0.5);
  EXPECT_NEAR(relative_error(prob, 0.5, opt.K, unit1()), 0.0, 1e-10);
  EXPECT_NEAR(relative_error(prob, 0.5, scalar(0), unit1()), (2.0 - kSqrt2) / kSqrt2, 1e-10);
  EXPECT_NEAR(relative_error(prob, 0.5, scalar(0), unit1()), 0.414214, 1e-6);
  EXPECT_THROW(relative_error(prob, 0.5, scalar(0), Vector::Zero(1)), DomainError);
}

}  // namespace
}  // namespace dlqr
