#include "dlqr/synthesis.hpp"

#include <cmath>

#include "dlqr/errors.hpp"

namespace dlqr {

namespace {

using sdp::AffineExpr;

constexpr double kMaxExtractionCondition = 1e10;
constexpr double kSandwichSlack = 1e-6;

bool leq_with_slack(double a, double b) {
  return a <= b + kSandwichSlack * (1.0 + std::abs(b));
}

Matrix upper_cholesky(const SymMatrix& m, const char* name) {
  Eigen::LLT<Matrix> llt(m.dense());
  if (llt.info() != Eigen::Success || !linalg::is_pd(m, 0.0)) {
    throw DefinitenessError(std::string(name) + " is not positive definite");
  }
  return llt.matrixU();
}

struct CostProgram {
  sdp::LmiProgram prog{0};
  AffineExpr X, Z, G, Y, mu;
};

CostProgram build_cost_program(const ProblemInstance& prob, double gamma,
                               const Vector& x0) {
  const int n = prob.states();
  const int m = prob.inputs();
  if (x0.size() != n) throw DimensionError("guaranteed cost: x0 has wrong length");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError("guaranteed cost: discount factor outside [0, 1]");
  }
  const StageFactorization cd = stage_factorization(prob);
  const int p = static_cast<int>(cd.C.rows());
  const Matrix& A = prob.A();
  const Matrix& B = prob.B();
  const double sg = std::sqrt(gamma);

  CostProgram cp;
  sdp::VariableSet vars;
  cp.X = vars.add_symmetric(n);
  cp.Z = vars.add_symmetric(n);
  cp.G = vars.add_full(n, n);
  cp.Y = vars.add_full(m, n);
  cp.mu = vars.add_scalar();
  const int d = vars.count();

  const AffineExpr x0_row = AffineExpr::constant(x0.transpose());
  const AffineExpr bound = AffineExpr::blocks({
      {cp.mu, x0_row},
      {x0_row.transpose(), cp.X},
  });

  const AffineExpr GGt = cp.G + cp.G.transpose();
  const AffineExpr AGBY = A * cp.G + B * cp.Y;
  const AffineExpr CGDY = cd.C * cp.G + cd.D * cp.Y;
  const AffineExpr zero_pn = AffineExpr(p, n);
  const AffineExpr cost = AffineExpr::blocks({
      {GGt - cp.X, (sg * AGBY).transpose(), CGDY.transpose()},
      {sg * AGBY, cp.X, zero_pn.transpose()},
      {CGDY, zero_pn, AffineExpr::constant(Matrix::Identity(p, p))},
  });

  const AffineExpr lyap = AffineExpr::blocks({
      {GGt - cp.Z, AGBY.transpose()},
      {AGBY, cp.Z},
  });

  cp.prog = sdp::LmiProgram(d);
  cp.prog.add_block(sdp::to_block(bound, d, 0.0, "cost-bound"));
  cp.prog.add_block(sdp::to_block(cost, d, 0.0, "discounted-cost"));
  cp.prog.add_block(sdp::to_block(lyap, d, sdp::strict_margin(lyap), "stability"));
  Vector c = Vector::Zero(d);
  c(cp.mu.terms().begin()->first) = 1.0;
  cp.prog.set_objective(c);
  return cp;
}

Vector witness_vector(const CostProgram& cp, const GuaranteedCostWitness& w) {
  Vector x = Vector::Zero(cp.prog.num_vars());
  auto scatter = [&x](const AffineExpr& e, const Matrix& value) {
    for (const auto& [var, coeff] : e.terms()) {
      // Each basis coefficient has a single 1 (full) or a symmetric pair.
      Eigen::Index r = 0, c = 0;
      coeff.maxCoeff(&r, &c);
      x(var) = value(r, c);
    }
  };
  scatter(cp.X, w.X.dense());
  scatter(cp.Z, w.Z.dense());
  scatter(cp.G, w.G);
  scatter(cp.Y, w.Y);
  scatter(cp.mu, Matrix::Constant(1, 1, w.mu));
  return x;
}

struct GainProgram {
  sdp::LmiProgram prog{0};
  AffineExpr L, Z, S, T;
};

GainProgram build_gain_program(const ProblemInstance& prob, const Matrix& K_gamma) {
  const int n = prob.states();
  const int m = prob.inputs();
  if (K_gamma.rows() != m || K_gamma.cols() != n) {
    throw DimensionError("gain proximity: K has wrong shape");
  }
  GainProgram gp;
  sdp::VariableSet vars;
  gp.L = vars.add_symmetric(n);
  gp.Z = vars.add_symmetric(n);
  gp.S = vars.add_full(n, n);
  gp.T = vars.add_full(m, n);
  const int d = vars.count();

  const AffineExpr SSt = gp.S + gp.S.transpose();
  const AffineExpr mismatch = gp.T - K_gamma * gp.S;
  const AffineExpr proximity = AffineExpr::blocks({
      {SSt - gp.L, mismatch.transpose()},
      {mismatch, AffineExpr::constant(Matrix::Identity(m, m))},
  });
  const AffineExpr ASBT = prob.A() * gp.S + prob.B() * gp.T;
  const AffineExpr lyap = AffineExpr::blocks({
      {SSt - gp.Z, ASBT.transpose()},
      {ASBT, gp.Z},
  });

  gp.prog = sdp::LmiProgram(d);
  gp.prog.add_block(sdp::to_block(proximity, d, 0.0, "proximity"));
  gp.prog.add_block(sdp::to_block(lyap, d, sdp::strict_margin(lyap), "stability"));
  // The mismatch bound is L^{-1}, so L must be positive definite.
  gp.prog.add_block(sdp::to_block(gp.L, d, sdp::strict_margin(gp.L), "bound-definite"));
  Vector c = Vector::Zero(d);
  for (const auto& [var, coeff] : gp.L.terms()) c(var) = -coeff.trace();
  gp.prog.set_objective(c);
  return gp;
}

}  // namespace

StageFactorization orthogonal_factorization(const SymMatrix& Q, const SymMatrix& R) {
  const int n = Q.dim();
  const int m = R.dim();
  StageFactorization f;
  f.C = Matrix::Zero(n + m, n);
  f.D = Matrix::Zero(n + m, m);
  f.C.topRows(n) = upper_cholesky(Q, "Q");
  f.D.bottomRows(m) = upper_cholesky(R, "R");
  return f;
}

StageFactorization stage_factorization(const ProblemInstance& prob) {
  if (prob.C() && prob.D()) return {*prob.C(), *prob.D()};
  return orthogonal_factorization(prob.Q(), prob.R());
}

sdp::LmiProgram guaranteed_cost_program(const ProblemInstance& prob, double gamma,
                                        const Vector& x0) {
  return build_cost_program(prob, gamma, x0).prog;
}

std::vector<double> guaranteed_cost_slacks(const ProblemInstance& prob, double gamma,
                                           const Vector& x0,
                                           const GuaranteedCostWitness& w) {
  const CostProgram cp = build_cost_program(prob, gamma, x0);
  const Vector x = witness_vector(cp, w);
  std::vector<double> slacks;
  for (std::size_t k = 0; k < cp.prog.blocks().size(); ++k) {
    slacks.push_back(linalg::min_eig_sym(cp.prog.evaluate(k, x)) -
                     cp.prog.blocks()[k].strictness_margin);
  }
  return slacks;
}

CostSynthesisResult synth_guaranteed_cost(const ProblemInstance& prob, double gamma,
                                          const Vector& x0) {
  const CostProgram cp = build_cost_program(prob, gamma, x0);
  CostSynthesisResult res;
  res.gamma = gamma;
  res.x0 = x0;
  res.solver = sdp::solve_min(cp.prog);
  if (res.solver.status != sdp::LmiStatus::optimal) {
    throw SynthesisInfeasibleError(
        "guaranteed-cost program not solved: " + sdp::to_string(res.solver.status),
        sdp::to_string(res.solver.status));
  }
  const Vector& x = res.solver.x;
  res.witness.X = SymMatrix(cp.X.evaluate(x));
  res.witness.Z = SymMatrix(cp.Z.evaluate(x));
  res.witness.G = cp.G.evaluate(x);
  res.witness.Y = cp.Y.evaluate(x);
  res.witness.mu = cp.mu.evaluate(x)(0, 0);
  res.X = res.witness.X;
  res.mu = res.witness.mu;

  if (linalg::condition_number(res.witness.G) > kMaxExtractionCondition) {
    throw ExtractionError("guaranteed cost: G is ill-conditioned");
  }
  // K = Y G^{-1}  <=>  G' K' = Y'.
  res.K_hat = linalg::solve_linear(res.witness.G.transpose(),
                                   res.witness.Y.transpose())
                  .transpose();

  res.rho_closed_loop = linalg::spectral_radius(prob.closed_loop(res.K_hat));
  if (!(res.rho_closed_loop < 1.0 - 1e-9)) {
    throw CertificateError("guaranteed cost: extracted gain is not stabilizing");
  }
  const RiccatiSolution opt = solve_dare(prob, gamma);
  res.optimal_cost = x0.dot(opt.P.dense() * x0);
  res.achieved_cost = eval_cost(prob, gamma, res.K_hat, x0);
  const double trace_cost = eval_cost_trace(prob, gamma, res.K_hat, x0);
  if (std::abs(trace_cost - res.achieved_cost) >
      1e-8 * std::max(1.0, std::abs(res.achieved_cost))) {
    throw CertificateError("guaranteed cost: cost evaluations disagree");
  }
  if (!linalg::is_pd(res.X, 0.0)) {
    throw CertificateError("guaranteed cost: X is not positive definite");
  }
  res.guaranteed_bound =
      x0.dot(linalg::solve_linear(res.X.dense(), x0).col(0));
  if (!leq_with_slack(res.optimal_cost, res.achieved_cost) ||
      !leq_with_slack(res.achieved_cost, res.guaranteed_bound) ||
      !leq_with_slack(res.guaranteed_bound, res.mu)) {
    throw CertificateError("guaranteed cost: cost sandwich violated");
  }
  return res;
}

sdp::LmiProgram gain_proximity_program(const ProblemInstance& prob,
                                       const Matrix& K_gamma) {
  return build_gain_program(prob, K_gamma).prog;
}

GainSynthesisResult synth_gain_proximity(const ProblemInstance& prob, double gamma) {
  const RiccatiSolution opt = solve_dare(prob, gamma);
  const GainProgram gp = build_gain_program(prob, opt.K);

  GainSynthesisResult res;
  res.gamma = gamma;
  res.K_gamma = opt.K;
  res.solver = sdp::solve_min(gp.prog);
  if (res.solver.status != sdp::LmiStatus::optimal) {
    throw SynthesisInfeasibleError(
        "gain-proximity program not solved: " + sdp::to_string(res.solver.status),
        sdp::to_string(res.solver.status));
  }
  res.box_warning = res.solver.box_active;

  const Vector& x = res.solver.x;
  const Matrix S = gp.S.evaluate(x);
  const Matrix T = gp.T.evaluate(x);
  res.L_bar = SymMatrix(gp.L.evaluate(x));
  if (linalg::condition_number(S) > kMaxExtractionCondition) {
    throw ExtractionError("gain proximity: S is ill-conditioned");
  }
  res.K_bar = linalg::solve_linear(S.transpose(), T.transpose()).transpose();

  res.rho_closed_loop = linalg::spectral_radius(prob.closed_loop(res.K_bar));
  if (!(res.rho_closed_loop < 1.0 - 1e-9)) {
    throw CertificateError("gain proximity: extracted gain is not stabilizing");
  }
  const double l_min = linalg::min_eig_sym(res.L_bar);
  if (!(l_min > 0.0)) {
    throw CertificateError("gain proximity: L is not positive definite");
  }
  res.mismatch_bound = 1.0 / l_min;
  const Matrix delta = res.K_bar - opt.K;
  res.mismatch_actual = linalg::max_eig_sym(SymMatrix(delta.transpose() * delta));
  if (res.mismatch_actual >
      res.mismatch_bound + 1e-6 * (1.0 + res.mismatch_bound)) {
    throw CertificateError("gain proximity: mismatch exceeds its bound");
  }
  return res;
}

}  // namespace dlqr
