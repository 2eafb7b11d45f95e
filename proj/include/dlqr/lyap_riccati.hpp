#pragma once

#include <optional>

#include "dlqr/linalg.hpp"

namespace dlqr {

using linalg::Matrix;
using linalg::SymMatrix;
using linalg::Vector;

/// Discounted LQR data: x+ = A x + B u, stage cost x'Qx + u'Ru, and an
/// optional factorization Q = C'C, R = D'D.
///
/// Construction enforces the standing assumptions: Q > 0 and R > 0, (A, B)
/// stabilizable by the PBH test, and C'C = Q, D'D = R, C'D = 0 when C and D
/// are supplied. Violations raise AssumptionError whose message names the
/// assumption (SA1 for stabilizability, SA2 for the weights).
class ProblemInstance {
 public:
  ProblemInstance(Matrix A, Matrix B, const Matrix& Q, const Matrix& R,
                  std::optional<Matrix> C = std::nullopt,
                  std::optional<Matrix> D = std::nullopt);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const SymMatrix& Q() const { return Q_; }
  const SymMatrix& R() const { return R_; }
  const std::optional<Matrix>& C() const { return C_; }
  const std::optional<Matrix>& D() const { return D_; }

  int states() const { return static_cast<int>(A_.rows()); }
  int inputs() const { return static_cast<int>(B_.cols()); }

  /// A + B K.
  Matrix closed_loop(const Matrix& K) const;

 private:
  Matrix A_;
  Matrix B_;
  SymMatrix Q_;
  SymMatrix R_;
  std::optional<Matrix> C_;
  std::optional<Matrix> D_;
};

/// PBH test: rank [A - lambda I, B] = n for every eigenvalue |lambda| >= 1,
/// with rank tolerance 1e-10 * ||[A, B]||.
bool is_stabilizable(const Matrix& A, const Matrix& B);

struct RiccatiSolution {
  double gamma = 0.0;
  SymMatrix P;
  Matrix K;
  double dare_residual = 0.0;
  int iterations = 0;
};

/// Value matrix of a fixed policy u = K x under discount gamma.
struct CostEvaluation {
  double gamma = 0.0;
  Matrix K;
  SymMatrix P_K;  // empty when !in_K_gamma
  bool in_K_gamma = false;
};

/// Residual of the discounted DARE at P, Frobenius norm.
double dare_residual(const ProblemInstance& prob, double gamma,
                     const SymMatrix& P);

/// -gamma (R + gamma B'PB)^{-1} B'PA.
Matrix greedy_gain(const ProblemInstance& prob, double gamma,
                   const SymMatrix& P);

/// Unique positive-definite solution of the discounted DARE by fixed-point
/// Riccati recursion from P_0 = Q, plus the optimal gain. Every invariant
/// of RiccatiSolution is verified before returning (ConsistencyError
/// otherwise).
RiccatiSolution solve_dare(const ProblemInstance& prob, double gamma);

/// Solves M' P M - P + W = 0 through the Kronecker-vectorized system
/// (I - M' (x) M') vec(P) = vec(W). Requires rho(M) < 1.
SymMatrix solve_stein(const Matrix& M, const SymMatrix& W);

/// Policy evaluation of u = K x: P_K from the Stein equation with
/// M = sqrt(gamma)(A + BK), W = Q + K'RK.
CostEvaluation evaluate_policy(const ProblemInstance& prob, double gamma,
                               const Matrix& K);

/// J_gamma(x0, K) = x0' P_K x0, or +infinity when sqrt(gamma)(A+BK) is not
/// Schur.
double eval_cost(const ProblemInstance& prob, double gamma, const Matrix& K,
                 const Vector& x0);

/// trace(S (Q + K'RK)) with S the discounted closed-loop Gramian seeded by
/// x0 x0'. Throws SpectralPreconditionError outside K_gamma.
double eval_cost_trace(const ProblemInstance& prob, double gamma,
                       const Matrix& K, const Vector& x0);

/// Truncated discounted sum of stage costs along the closed-loop trajectory.
/// Returns +infinity on overflow.
double eval_cost_sim(const ProblemInstance& prob, double gamma,
                     const Matrix& K, const Vector& x0, int horizon);

/// (J(x0,K) - J(x0,K_gamma)) / J(x0,K_gamma); DomainError for x0 = 0.
double relative_error(const ProblemInstance& prob, double gamma,
                      const Matrix& K, const Vector& x0);
double relative_error(const ProblemInstance& prob, const RiccatiSolution& opt,
                      const Matrix& K, const Vector& x0);

}  // namespace dlqr
