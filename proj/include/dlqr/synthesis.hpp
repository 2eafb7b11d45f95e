#pragma once

#include <string>

#include "dlqr/lyap_riccati.hpp"
#include "dlqr/sdp.hpp"

namespace dlqr {

/// Q = C'C, R = D'D with C'D = 0.
struct StageFactorization {
  Matrix C;
  Matrix D;
};

/// C = [chol(Q); 0], D = [0; chol(R)] with p = n + m rows, where chol
/// denotes the upper Cholesky factor. DefinitenessError unless Q, R > 0.
StageFactorization orthogonal_factorization(const SymMatrix& Q, const SymMatrix& R);

/// The problem's own (C, D) when present, otherwise the orthogonal one.
StageFactorization stage_factorization(const ProblemInstance& prob);

/// Decision variables of the guaranteed-cost program at a solution.
struct GuaranteedCostWitness {
  SymMatrix X;
  SymMatrix Z;
  Matrix G;
  Matrix Y;
  double mu = 0.0;
};

struct CostSynthesisResult {
  double gamma = 0.0;
  Vector x0;
  Matrix K_hat;
  SymMatrix X;
  double mu = 0.0;
  double guaranteed_bound = 0.0;  // x0' X^{-1} x0
  double achieved_cost = 0.0;     // J(x0, K_hat)
  double optimal_cost = 0.0;      // x0' P_gamma x0
  double rho_closed_loop = 0.0;
  GuaranteedCostWitness witness;
  sdp::LmiSolution solver;
};

/// The guaranteed-cost program in (X, Z symmetric; G n x n; Y m x n; mu):
///   [mu, x0'; x0, X] >= 0
///   [G+G'-X, *, *; sqrt(g)(AG+BY), X, *; CG+DY, 0, I] >= 0
///   [G+G'-Z, *; AG+BY, Z] > 0
/// minimizing mu. Variable order: X, Z, G, Y, mu.
sdp::LmiProgram guaranteed_cost_program(const ProblemInstance& prob, double gamma,
                                        const Vector& x0);

/// Min eigenvalue of each guaranteed-cost block (minus its margin) when the
/// witness is plugged into the program built for `gamma`. All non-negative
/// means the witness is feasible at `gamma`.
std::vector<double> guaranteed_cost_slacks(const ProblemInstance& prob, double gamma,
                                           const Vector& x0,
                                           const GuaranteedCostWitness& w);

/// Minimizes mu, extracts K_hat = Y G^{-1}, and verifies
/// rho(A + B K_hat) < 1 and x0'P x0 <= J(x0,K_hat) <= x0'X^{-1}x0 <= mu
/// before returning.
CostSynthesisResult synth_guaranteed_cost(const ProblemInstance& prob, double gamma,
                                          const Vector& x0);

struct GainSynthesisResult {
  double gamma = 0.0;
  Matrix K_gamma;
  Matrix K_bar;
  SymMatrix L_bar;
  double mismatch_bound = 0.0;   // lambda_max(L_bar^{-1})
  double mismatch_actual = 0.0;  // lambda_max((K_bar-K)'(K_bar-K))
  double rho_closed_loop = 0.0;
  // The trace objective drove a variable into the solver's box.
  bool box_warning = false;
  sdp::LmiSolution solver;
};

/// Gain-proximity program in (L, Z symmetric; S n x n; T m x n):
///   [S+S'-L, *; T-K_gamma S, I] >= 0
///   [S+S'-Z, *; AS+BT, Z] > 0
///   L > 0
/// maximizing trace(L). Variable order: L, Z, S, T.
sdp::LmiProgram gain_proximity_program(const ProblemInstance& prob,
                                       const Matrix& K_gamma);

/// Solves the program above, extracts K_bar = T S^{-1}, verifies that it is
/// Schur-stabilizing and that the mismatch bound holds.
GainSynthesisResult synth_gain_proximity(const ProblemInstance& prob, double gamma);

}  // namespace dlqr
