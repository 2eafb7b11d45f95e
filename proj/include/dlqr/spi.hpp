#pragma once

#include <string>
#include <vector>

#include "dlqr/lyap_riccati.hpp"

namespace dlqr {

struct SpiConfig {
  double gamma = 1.0;
  Matrix K0;                     // must satisfy rho(A + B K0) < 1
  double alpha_grid_step = 1e-5;
  double alpha_scale = 1.0;      // fraction of the largest feasible alpha used
  double epsilon_stop = 1e-5;
  int max_iterations = 500;
};

enum class SpiStopReason { alpha_below_epsilon, max_iterations, converged_to_optimal };
std::string to_string(SpiStopReason reason);

struct SpiIterate {
  int j = 0;
  double alpha_bar = 0.0;  // largest feasible grid alpha; 0 for j = 0
  double alpha = 0.0;      // step taken; 0 for j = 0
  Matrix K;
  SymMatrix P;
  double rho_closed_loop = 0.0;  // rho(A + B K_j)
  double rho_discounted = 0.0;   // rho(sqrt(gamma)(A + B K_j))
  double gap = 0.0;              // ||P_j - P_gamma||_F
};

struct SpiTrace {
  double gamma = 0.0;
  SymMatrix P_gamma;
  Matrix K_gamma;
  std::vector<SpiIterate> iterations;  // iterations[0] is the initial gain
  SpiStopReason stop_reason = SpiStopReason::max_iterations;
  // alpha_bar of the final (rejected) improvement step when stopping on
  // alpha_below_epsilon.
  double final_alpha_bar = 0.0;
};

/// Policy-iteration target -gamma (R + gamma B'PB)^{-1} B'PA.
Matrix pi_target(const ProblemInstance& prob, double gamma, const SymMatrix& P);

/// Largest alpha = k * step (k = 1..1/step) for which
/// A + B (alpha K_target + (1 - alpha) K_prev) is Schur; 0 if none.
double max_stable_alpha(const ProblemInstance& prob, const Matrix& K_prev,
                        const Matrix& K_target, double step);

/// Stability-preserving policy iteration. Each improvement step blends the
/// policy-iteration target with the previous gain so that every iterate
/// stabilizes the undiscounted closed loop; the value matrices decrease
/// monotonically. Throws InputError if K0 is not stabilizing.
SpiTrace spi_run(const ProblemInstance& prob, const SpiConfig& config);

}  // namespace dlqr
