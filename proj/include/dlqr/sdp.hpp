#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "dlqr/linalg.hpp"

// Small dense linear SDP: minimize c'x subject to block constraints
//   F0 + sum_i x_i F_i >= margin * I.
// Solved by a phase-1 max-t program followed by a log-det barrier
// path-following method with damped Newton steps.
namespace dlqr::sdp {

using linalg::Matrix;
using linalg::SymMatrix;
using linalg::Vector;

struct AffineBlock {
  int dim = 0;
  SymMatrix F0;
  std::vector<SymMatrix> F;  // one coefficient per decision variable
  double strictness_margin = 0.0;
  std::string label;
};

class LmiProgram {
 public:
  explicit LmiProgram(int num_vars);

  int num_vars() const { return num_vars_; }
  const Vector& objective() const { return objective_; }
  const std::vector<AffineBlock>& blocks() const { return blocks_; }

  void set_objective(const Vector& c);
  /// Validates dimensions: `block.F` must hold num_vars matrices of size dim.
  void add_block(AffineBlock block);

  SymMatrix evaluate(std::size_t block, const Vector& x) const;

 private:
  int num_vars_;
  Vector objective_;
  std::vector<AffineBlock> blocks_;
};

enum class LmiStatus { optimal, infeasible, max_iterations, unbounded, inconclusive };

std::string to_string(LmiStatus status);

struct LmiSolution {
  LmiStatus status = LmiStatus::max_iterations;
  Vector x;
  double objective_value = 0.0;
  // Worst min-eigenvalue of F0 + sum x_i F_i over the program's blocks.
  double min_block_eig = 0.0;
  // Phase-1 value: max t with every block F(x) >= t I.
  double feasibility_t = 0.0;
  int newton_steps = 0;
  int outer_iterations = 0;
  // Objective after each completed centering (phase 2 only).
  std::vector<double> outer_objectives;
  // Some |x_i| ended within 1% of the variable box.
  bool box_active = false;
};

struct SolverOptions {
  double variable_box = 1e6;
  double t_cap = 1e6;
  // Terminate when barrier parameter * total block dimension drops below this.
  double gap_tolerance = 1e-9;
  double barrier_decrease = 10.0;
  int max_newton_steps = 20000;
  double unbounded_threshold = -1e9;
};

/// Phase-1 program max t s.t. F(x) - t I >= 0 for every block, t <= t_cap.
/// optimal: t* exceeds every block's strictness margin, so `x` satisfies the
/// program; infeasible: t* < 0 with the barrier gap closed; inconclusive in
/// between.
LmiSolution solve_feasibility(const LmiProgram& prog,
                              const SolverOptions& opts = {});

/// Minimizes c'x over the program's blocks.
LmiSolution solve_min(const LmiProgram& prog, const SolverOptions& opts = {});

/// E_ii and E_ij + E_ji (i < j), in row-major upper-triangle order.
std::vector<SymMatrix> symmetric_var_basis(int dim);

/// Debug dump: blocks as dense row-major arrays.
std::string dump_json(const LmiProgram& prog);

/// Process-wide tally of a posteriori checks on optimal results.
struct CertificateStats {
  std::uint64_t optimal_results = 0;
  std::uint64_t violations = 0;
  // Smallest min_block_eig among them; +infinity before the first.
  double worst_min_block_eig = 0.0;
};
CertificateStats certificate_stats();

// ---------------------------------------------------------------------------
// Builder for matrix expressions affine in the decision variables.

class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(int rows, int cols);
  static AffineExpr constant(const Matrix& m);

  int rows() const { return static_cast<int>(constant_.rows()); }
  int cols() const { return static_cast<int>(constant_.cols()); }
  const Matrix& constant_term() const { return constant_; }
  const std::map<int, Matrix>& terms() const { return terms_; }

  AffineExpr transpose() const;
  Matrix evaluate(const Vector& x) const;

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(const AffineExpr& a);
  friend AffineExpr operator*(double s, const AffineExpr& a);
  friend AffineExpr operator*(const Matrix& m, const AffineExpr& a);
  friend AffineExpr operator*(const AffineExpr& a, const Matrix& m);

  /// Block matrix assembly; rows of the grid must agree in height and
  /// columns in width.
  static AffineExpr blocks(
      std::initializer_list<std::initializer_list<AffineExpr>> grid);

 private:
  friend class VariableSet;
  Matrix constant_;
  std::map<int, Matrix> terms_;
};

/// Allocates scalar decision variables for matrix unknowns.
class VariableSet {
 public:
  AffineExpr add_symmetric(int dim);
  AffineExpr add_full(int rows, int cols);
  AffineExpr add_scalar();
  int count() const { return count_; }

 private:
  int count_ = 0;
};

/// Converts a square, symmetric affine expression into a program block.
AffineBlock to_block(const AffineExpr& expr, int num_vars, double margin,
                     std::string label);

/// 1e-8 * (1 + ||F0||): the margin used to encode a strict inequality.
double strict_margin(const AffineExpr& expr);

}  // namespace dlqr::sdp
