#include "dlqr/certificates.hpp"

#include <cmath>
#include <functional>

#include "dlqr/errors.hpp"
#include "dlqr/parallel.hpp"

namespace dlqr {

namespace {

ConditionResult evaluate_condition(const SymMatrix& m, const RiccatiSolution& sol) {
  ConditionResult r;
  r.margin = linalg::min_eig_sym(m);
  r.holds = r.margin > 1e-9 * (1.0 + linalg::frobenius(sol.P.dense()));
  return r;
}

SymMatrix cond16_matrix(const RiccatiSolution& sol, const ProblemInstance& prob) {
  const double g = sol.gamma;
  return SymMatrix(sol.K.transpose() * prob.R().dense() * sol.K +
                   prob.Q().dense() + (g - 1.0) * sol.P.dense());
}

}  // namespace

ConditionResult check_cond9(const RiccatiSolution& sol, const ProblemInstance& prob) {
  return evaluate_condition(
      SymMatrix(prob.Q().dense() + (sol.gamma - 1.0) * sol.P.dense()), sol);
}

ConditionResult check_cond11(const RiccatiSolution& sol, const ProblemInstance& prob) {
  const double g = sol.gamma;
  const Matrix& P = sol.P.dense();
  const Matrix& B = prob.B();
  const Matrix rinv_bt = linalg::solve_linear(prob.R().dense(), B.transpose());
  return evaluate_condition(
      SymMatrix(g * g * P * B * rinv_bt * P + prob.Q().dense() + (g - 1.0) * P),
      sol);
}

ConditionResult check_cond16(const RiccatiSolution& sol, const ProblemInstance& prob) {
  return evaluate_condition(cond16_matrix(sol, prob), sol);
}

std::string to_string(Thm2Status status) {
  switch (status) {
    case Thm2Status::feasible: return "feasible";
    case Thm2Status::infeasible: return "infeasible";
    case Thm2Status::inconclusive: return "inconclusive";
  }
  return "unknown";
}

sdp::LmiProgram thm2_program(const RiccatiSolution& sol, const ProblemInstance& prob) {
  const int n = prob.states();
  const Matrix acl = prob.closed_loop(sol.K);
  sdp::VariableSet vars;
  const sdp::AffineExpr X = vars.add_symmetric(n);
  const sdp::AffineExpr lyap_shift =
      sdp::AffineExpr::constant(sol.gamma * sol.P.dense()) + X;
  const sdp::AffineExpr decrease =
      sdp::AffineExpr::constant(cond16_matrix(sol, prob).dense()) + X -
      acl.transpose() * X * acl;
  sdp::LmiProgram prog(vars.count());
  prog.add_block(sdp::to_block(lyap_shift, vars.count(),
                               sdp::strict_margin(lyap_shift), "gammaP+X"));
  prog.add_block(sdp::to_block(decrease, vars.count(),
                               sdp::strict_margin(decrease), "decrease"));
  return prog;
}

Thm2Result check_thm2(const RiccatiSolution& sol, const ProblemInstance& prob) {
  Thm2Result r;
  r.solver = sdp::solve_feasibility(thm2_program(sol, prob));
  switch (r.solver.status) {
    case sdp::LmiStatus::optimal: {
      r.status = Thm2Status::feasible;
      const int n = prob.states();
      Matrix X(n, n);
      int k = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j, ++k) {
          X(i, j) = r.solver.x(k);
          X(j, i) = r.solver.x(k);
        }
      }
      r.X = SymMatrix(X);
      break;
    }
    case sdp::LmiStatus::infeasible:
      r.status = Thm2Status::infeasible;
      break;
    default:
      r.status = Thm2Status::inconclusive;
  }
  return r;
}

CertificateReport analyze(const ProblemInstance& prob, double gamma, bool with_thm2) {
  CertificateReport rep;
  rep.gamma = gamma;
  try {
    const RiccatiSolution sol = solve_dare(prob, gamma);
    rep.rho_closed_loop = linalg::spectral_radius(prob.closed_loop(sol.K));
    rep.cond9 = check_cond9(sol, prob);
    rep.cond11 = check_cond11(sol, prob);
    rep.cond16 = check_cond16(sol, prob);
    if (with_thm2) rep.thm2 = check_thm2(sol, prob).status;
  } catch (const Error& e) {
    rep.error = e.what();
  }
  return rep;
}

std::vector<double> linear_grid(double lo, double hi, int steps) {
  if (steps < 2) throw DomainError("linear_grid: need at least two points");
  std::vector<double> grid(steps);
  for (int i = 0; i < steps; ++i) {
    grid[i] = i == steps - 1 ? hi : lo + (hi - lo) * i / (steps - 1);
  }
  return grid;
}

SweepResult sweep(const ProblemInstance& prob, const std::vector<double>& grid,
                  const SweepOptions& opts) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw DomainError("sweep: grid value outside [0, 1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw DomainError("sweep: grid must be strictly increasing");
    }
  }
  SweepResult out;
  out.rows.resize(grid.size());
  parallel_for(grid.size(), opts.workers, [&](std::size_t i) {
    out.rows[i] = analyze(prob, grid[i], opts.with_thm2);
  });

  using Predicate = std::function<bool(const CertificateReport&)>;
  const std::vector<std::pair<std::string, Predicate>> conditions = {
      {"unstable", [](const CertificateReport& r) { return r.rho_closed_loop >= 1.0; }},
      {"cond9", [](const CertificateReport& r) { return r.cond9.holds; }},
      {"cond11", [](const CertificateReport& r) { return r.cond11.holds; }},
      {"cond16", [](const CertificateReport& r) { return r.cond16.holds; }},
  };
  for (const auto& [name, pred] : conditions) {
    for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
      const auto& a = out.rows[i];
      const auto& b = out.rows[i + 1];
      if (a.error || b.error || pred(a) == pred(b)) continue;
      const bool lower_value = pred(a);
      double lo = a.gamma;
      double hi = b.gamma;
      bool failed = false;
      while (hi - lo > opts.boundary_tol) {
        const double mid = 0.5 * (lo + hi);
        const CertificateReport r = analyze(prob, mid, false);
        if (r.error) {
          failed = true;
          break;
        }
        (pred(r) == lower_value ? lo : hi) = mid;
      }
      if (failed) continue;
      out.boundaries.push_back({name, 0.5 * (lo + hi), lo, hi, !lower_value});
    }
  }
  return out;
}

}  // namespace dlqr
