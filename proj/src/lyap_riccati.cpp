#include "dlqr/lyap_riccati.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dlqr/errors.hpp"

namespace dlqr {

namespace {

constexpr int kDareMaxIterations = 1'000'000;
constexpr double kDareStepTol = 1e-13;

void require_gamma(double gamma, const char* what) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError(std::string(what) + ": discount factor " +
                      std::to_string(gamma) + " outside [0, 1]");
  }
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + " is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

SymMatrix stage_weight(const ProblemInstance& prob, const Matrix& K) {
  return SymMatrix(prob.Q().dense() +
                   K.transpose() * prob.R().dense() * K);
}

}  // namespace

bool is_stabilizable(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  Matrix ab(n, A.cols() + B.cols());
  ab << A, B;
  const double tol = 1e-10 * linalg::frobenius(ab);
  for (const auto& lambda : linalg::eigenvalues(A)) {
    if (std::abs(lambda) < 1.0) continue;
    Eigen::MatrixXcd pencil(n, n + B.cols());
    pencil.leftCols(n) = A.cast<std::complex<double>>() -
                         lambda * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol) ++rank;
    }
    if (rank < n) return false;
  }
  return true;
}

ProblemInstance::ProblemInstance(Matrix A, Matrix B, const Matrix& Q,
                                 const Matrix& R, std::optional<Matrix> C,
                                 std::optional<Matrix> D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  linalg::require_square(A_, "A");
  const auto n = A_.rows();
  if (n < 1) throw DimensionError("A must have at least one state");
  if (B_.rows() != n || B_.cols() < 1) {
    throw DimensionError("B is " + std::to_string(B_.rows()) + "x" +
                         std::to_string(B_.cols()) + ", expected " +
                         std::to_string(n) + "xm with m >= 1");
  }
  const auto m = B_.cols();
  require_shape(Q, n, n, "Q");
  require_shape(R, m, m, "R");
  linalg::require_finite(A_, "A");
  linalg::require_finite(B_, "B");
  linalg::require_finite(Q, "Q");
  linalg::require_finite(R, "R");

  auto check_sym = [](const Matrix& w, const char* name) {
    if ((w - w.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * (1.0 + w.cwiseAbs().maxCoeff())) {
      throw AssumptionError(std::string("SA2 violated: ") + name +
                            " is not symmetric");
    }
  };
  check_sym(Q, "Q");
  check_sym(R, "R");
  Q_ = SymMatrix(Q);
  R_ = SymMatrix(R);
  if (!linalg::is_pd(Q_, 0.0)) {
    throw AssumptionError("SA2 violated: Q is not positive definite");
  }
  if (!linalg::is_pd(R_, 0.0)) {
    throw AssumptionError("SA2 violated: R is not positive definite");
  }
  if (C_.has_value() != D_.has_value()) {
    throw DimensionError("C and D must be given together");
  }
  if (C_) {
    const auto p = C_->rows();
    require_shape(*C_, p, n, "C");
    require_shape(*D_, p, m, "D");
    linalg::require_finite(*C_, "C");
    linalg::require_finite(*D_, "D");
    if ((C_->transpose() * *C_ - Q).cwiseAbs().maxCoeff() > 1e-10) {
      throw AssumptionError("SA2 violated: C'C differs from Q");
    }
    if ((D_->transpose() * *D_ - R).cwiseAbs().maxCoeff() > 1e-10) {
      throw AssumptionError("SA2 violated: D'D differs from R");
    }
    if ((C_->transpose() * *D_).cwiseAbs().maxCoeff() > 1e-10) {
      throw AssumptionError("C'D must vanish");
    }
  }
  if (!is_stabilizable(A_, B_)) {
    throw AssumptionError("SA1 violated: (A, B) is not stabilizable");
  }
}

Matrix ProblemInstance::closed_loop(const Matrix& K) const {
  require_shape(K, inputs(), states(), "K");
  return A_ + B_ * K;
}

Matrix greedy_gain(const ProblemInstance& prob, double gamma,
                   const SymMatrix& P) {
  const Matrix& A = prob.A();
  const Matrix& B = prob.B();
  const Matrix& p = P.dense();
  const Matrix lhs = prob.R().dense() + gamma * B.transpose() * p * B;
  const Matrix rhs = B.transpose() * p * A;
  return -gamma * linalg::solve_linear(lhs, rhs);
}

double dare_residual(const ProblemInstance& prob, double gamma,
                     const SymMatrix& P) {
  const Matrix& A = prob.A();
  const Matrix& B = prob.B();
  const Matrix& p = P.dense();
  const Matrix bpa = B.transpose() * p * A;
  const Matrix lhs = prob.R().dense() + gamma * B.transpose() * p * B;
  const Matrix rhs = gamma * A.transpose() * p * A -
                     gamma * gamma * bpa.transpose() *
                         linalg::solve_linear(lhs, bpa) +
                     prob.Q().dense();
  return linalg::frobenius(p - rhs);
}

RiccatiSolution solve_dare(const ProblemInstance& prob, double gamma) {
  require_gamma(gamma, "solve_dare");
  const Matrix& A = prob.A();
  const Matrix& B = prob.B();
  const Matrix& Q = prob.Q().dense();
  const Matrix& R = prob.R().dense();

  Matrix P = Q;
  int it = 0;
  bool converged = false;
  while (it < kDareMaxIterations) {
    ++it;
    const Matrix bpa = B.transpose() * P * A;
    const Matrix gain_lhs = R + gamma * B.transpose() * P * B;
    Matrix next = gamma * A.transpose() * P * A -
                  gamma * gamma * bpa.transpose() * gain_lhs.llt().solve(bpa) +
                  Q;
    next = 0.5 * (next + next.transpose());
    const double step = (next - P).norm();
    const double scale = 1.0 + P.norm();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (step <= kDareStepTol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("solve_dare: Riccati recursion did not converge "
                           "for gamma = " + std::to_string(gamma));
  }

  RiccatiSolution sol;
  sol.gamma = gamma;
  sol.P = SymMatrix(P);
  sol.K = greedy_gain(prob, gamma, sol.P);
  sol.dare_residual = dare_residual(prob, gamma, sol.P);
  sol.iterations = it;

  const double pnorm = P.norm();
  if (sol.dare_residual > 1e-9 * (1.0 + pnorm)) {
    throw ConsistencyError("solve_dare: residual " +
                           std::to_string(sol.dare_residual) + " too large");
  }
  if (linalg::min_eig_sym(sol.P - prob.Q()) < -1e-8) {
    throw ConsistencyError("solve_dare: P is not bounded below by Q");
  }
  const Matrix acl = A + B * sol.K;
  const Matrix id13 = gamma * A.transpose() * P * acl - (P - Q);
  if (id13.norm() > 1e-8 * (1.0 + pnorm)) {
    throw ConsistencyError("solve_dare: gamma A'P(A+BK) != P - Q");
  }
  const Matrix id14 =
      acl - (A - gamma * B * linalg::solve_linear(R, B.transpose()) * P * acl);
  if (id14.norm() > 1e-8) {
    throw ConsistencyError("solve_dare: closed-loop identity violated");
  }
  return sol;
}

SymMatrix solve_stein(const Matrix& M, const SymMatrix& W) {
  linalg::require_square(M, "solve_stein");
  if (W.dim() != M.rows()) {
    throw DimensionError("solve_stein: W dimension does not match M");
  }
  const double rho = linalg::spectral_radius(M);
  if (!(rho < 1.0)) {
    throw SpectralPreconditionError("solve_stein: spectral radius " +
                                    std::to_string(rho) + " >= 1");
  }
  const int n = static_cast<int>(M.rows());
  const Matrix mt = M.transpose();
  const Matrix system =
      Matrix::Identity(n * n, n * n) - linalg::kron(mt, mt);
  const Matrix w = linalg::vec(W.dense());
  const Matrix p = linalg::solve_linear(system, w);
  return SymMatrix(linalg::unvec(p.col(0), n, n));
}

CostEvaluation evaluate_policy(const ProblemInstance& prob, double gamma,
                               const Matrix& K) {
  require_gamma(gamma, "evaluate_policy");
  CostEvaluation ev;
  ev.gamma = gamma;
  ev.K = K;
  const Matrix M = std::sqrt(gamma) * prob.closed_loop(K);
  if (!(linalg::spectral_radius(M) < 1.0)) return ev;
  ev.in_K_gamma = true;
  ev.P_K = solve_stein(M, stage_weight(prob, K));
  return ev;
}

double eval_cost(const ProblemInstance& prob, double gamma, const Matrix& K,
                 const Vector& x0) {
  if (x0.size() != prob.states()) {
    throw DimensionError("eval_cost: x0 has wrong length");
  }
  const CostEvaluation ev = evaluate_policy(prob, gamma, K);
  if (!ev.in_K_gamma) return std::numeric_limits<double>::infinity();
  return x0.dot(ev.P_K.dense() * x0);
}

double eval_cost_trace(const ProblemInstance& prob, double gamma,
                       const Matrix& K, const Vector& x0) {
  require_gamma(gamma, "eval_cost_trace");
  if (x0.size() != prob.states()) {
    throw DimensionError("eval_cost_trace: x0 has wrong length");
  }
  const Matrix M = std::sqrt(gamma) * prob.closed_loop(K);
  // M S M' - S + x0 x0' = 0 is the Stein equation in M'.
  const SymMatrix S = solve_stein(M.transpose(), SymMatrix(x0 * x0.transpose()));
  return (S.dense() * stage_weight(prob, K).dense()).trace();
}

double eval_cost_sim(const ProblemInstance& prob, double gamma,
                     const Matrix& K, const Vector& x0, int horizon) {
  require_gamma(gamma, "eval_cost_sim");
  if (horizon < 1) throw DomainError("eval_cost_sim: horizon must be >= 1");
  if (x0.size() != prob.states()) {
    throw DimensionError("eval_cost_sim: x0 has wrong length");
  }
  const Matrix acl = prob.closed_loop(K);
  const Matrix& Q = prob.Q().dense();
  const Matrix& R = prob.R().dense();
  Vector x = x0;
  double weight = 1.0;
  double total = 0.0;
  for (int k = 0; k < horizon; ++k) {
    const Vector u = K * x;
    total += weight * (x.dot(Q * x) + u.dot(R * u));
    if (!std::isfinite(total)) return std::numeric_limits<double>::infinity();
    x = acl * x;
    weight *= gamma;
  }
  return total;
}

double relative_error(const ProblemInstance& prob, const RiccatiSolution& opt,
                      const Matrix& K, const Vector& x0) {
  if (x0.size() != prob.states()) {
    throw DimensionError("relative_error: x0 has wrong length");
  }
  if (x0.isZero(0.0)) {
    throw DomainError("relative_error: undefined for x0 = 0");
  }
  const double optimal = eval_cost(prob, opt.gamma, opt.K, x0);
  const double cost = eval_cost(prob, opt.gamma, K, x0);
  if (!std::isfinite(cost)) return std::numeric_limits<double>::infinity();
  return (cost - optimal) / optimal;
}

double relative_error(const ProblemInstance& prob, double gamma,
                      const Matrix& K, const Vector& x0) {
  return relative_error(prob, solve_dare(prob, gamma), K, x0);
}

}  // namespace dlqr
