#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlqr/lyap_riccati.hpp"
#include "dlqr/sdp.hpp"

namespace dlqr {

struct ConditionResult {
  bool holds = false;
  double margin = 0.0;  // min eigenvalue of the condition's matrix
};

/// Q + (gamma - 1) P > 0 (common Lyapunov function V*).
ConditionResult check_cond9(const RiccatiSolution& sol, const ProblemInstance& prob);

/// gamma^2 P B R^{-1} B' P + Q + (gamma - 1) P > 0.
ConditionResult check_cond11(const RiccatiSolution& sol, const ProblemInstance& prob);

/// K'RK + Q + (gamma - 1) P > 0.
ConditionResult check_cond16(const RiccatiSolution& sol, const ProblemInstance& prob);

enum class Thm2Status { feasible, infeasible, inconclusive };
std::string to_string(Thm2Status status);

struct Thm2Result {
  Thm2Status status = Thm2Status::inconclusive;
  std::optional<SymMatrix> X;  // witness when feasible
  sdp::LmiSolution solver;
};

/// The LMI feasibility program in the entries of a symmetric X:
///   gamma P + X > 0,
///   K'RK + Q + (gamma - 1) P + X - (A+BK)' X (A+BK) > 0,
/// feasible exactly when A + BK is Schur.
sdp::LmiProgram thm2_program(const RiccatiSolution& sol, const ProblemInstance& prob);

Thm2Result check_thm2(const RiccatiSolution& sol, const ProblemInstance& prob);

struct CertificateReport {
  double gamma = 0.0;
  double rho_closed_loop = 0.0;
  ConditionResult cond9;
  ConditionResult cond11;
  ConditionResult cond16;
  Thm2Status thm2 = Thm2Status::inconclusive;
  // Set when the per-gamma analysis threw; the other fields are then unset.
  std::optional<std::string> error;
};

CertificateReport analyze(const ProblemInstance& prob, double gamma,
                          bool with_thm2 = true);

/// Where a condition changes truth value between two adjacent grid points.
struct Boundary {
  std::string condition;  // "unstable", "cond9", "cond11", "cond16"
  double gamma = 0.0;     // bisection estimate
  double lower = 0.0;     // bracket after refinement
  double upper = 0.0;
  bool becomes_true = false;  // value at `upper` side
};

struct SweepOptions {
  bool with_thm2 = true;
  unsigned workers = 1;
  double boundary_tol = 1e-4;
};

struct SweepResult {
  std::vector<CertificateReport> rows;
  std::vector<Boundary> boundaries;
};

/// One report per grid point (strictly increasing, within [0, 1]) and
/// bisection-refined flip points for rho >= 1 and each sufficient condition.
SweepResult sweep(const ProblemInstance& prob, const std::vector<double>& gamma_grid,
                  const SweepOptions& opts = {});

/// Evenly spaced grid with `steps` points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int steps);

}  // namespace dlqr
