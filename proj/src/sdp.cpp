#include "dlqr/sdp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>

#include <nlohmann/json.hpp>

#include "dlqr/errors.hpp"

namespace dlqr::sdp {

namespace {

std::atomic<std::uint64_t> g_optimal_results{0};
std::atomic<std::uint64_t> g_violations{0};
std::atomic<double> g_worst_min_block_eig{std::numeric_limits<double>::infinity()};

constexpr double kCenteringTol = 1e-9;  // Newton decrement^2 / 2
// Below this decrement a short or rejected step means roundoff dominates the
// Newton direction; the iterate is as centered as it can get.
constexpr double kRoundoffDecrement = 1e-5;

struct Term {
  int var;
  Matrix F;
};

struct Block {
  int dim = 0;
  Matrix F0;  // margin already subtracted
  std::vector<Term> terms;
};

// Barrier problem: minimize c'x / mu - sum log det S_k(x)
//   - sum_{boxed i} [log(box - x_i) + log(box + x_i)] - log(cap - x_cap).
struct BarrierProblem {
  int nvars = 0;
  std::vector<Block> blocks;
  Vector c;
  int boxed_vars = 0;  // variables [0, boxed_vars) carry the box
  double box = 1e6;
  int capped_var = -1;
  double cap = 0.0;

  int total_dim() const {
    int m = 2 * boxed_vars + (capped_var >= 0 ? 1 : 0);
    for (const auto& b : blocks) m += b.dim;
    return m;
  }
};

struct Factorization {
  std::vector<Matrix> inverses;
  double logdet = 0.0;  // sum of all log-slacks, box terms included
};

std::optional<Factorization> factor(const BarrierProblem& bp, const Vector& x) {
  Factorization f;
  f.inverses.reserve(bp.blocks.size());
  for (const auto& b : bp.blocks) {
    Matrix s = b.F0;
    for (const auto& t : b.terms) s.noalias() += x(t.var) * t.F;
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const auto& l = llt.matrixLLT();
    for (int i = 0; i < b.dim; ++i) {
      const double d = l(i, i);
      if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
      f.logdet += 2.0 * std::log(d);
    }
    f.inverses.push_back(llt.solve(Matrix::Identity(b.dim, b.dim)));
  }
  for (int i = 0; i < bp.boxed_vars; ++i) {
    const double up = bp.box - x(i);
    const double lo = bp.box + x(i);
    if (!(up > 0.0) || !(lo > 0.0)) return std::nullopt;
    f.logdet += std::log(up) + std::log(lo);
  }
  if (bp.capped_var >= 0) {
    const double s = bp.cap - x(bp.capped_var);
    if (!(s > 0.0)) return std::nullopt;
    f.logdet += std::log(s);
  }
  return f;
}

enum class CenterOutcome { centered, stalled, budget, early_stop };

// Damped Newton centering at barrier parameter mu.
template <typename StopFn>
CenterOutcome center(const BarrierProblem& bp, Vector& x, double mu,
                     int& budget, int& steps, StopFn&& early_stop) {
  const int n = bp.nvars;
  auto fac = factor(bp, x);
  if (!fac) throw ConsistencyError("sdp: iterate left the feasible cone");
  while (true) {
    if (early_stop(x)) return CenterOutcome::early_stop;
    if (budget <= 0) return CenterOutcome::budget;

    Vector g = bp.c / mu;
    Matrix H = Matrix::Zero(n, n);
    std::vector<Matrix> work;
    for (std::size_t k = 0; k < bp.blocks.size(); ++k) {
      const auto& b = bp.blocks[k];
      const Matrix& sinv = fac->inverses[k];
      work.clear();
      work.reserve(b.terms.size());
      for (const auto& t : b.terms) work.push_back(sinv * t.F);
      for (std::size_t a = 0; a < b.terms.size(); ++a) {
        const int ia = b.terms[a].var;
        g(ia) -= work[a].trace();
        for (std::size_t c = a; c < b.terms.size(); ++c) {
          const int ic = b.terms[c].var;
          const double h =
              (work[a].array() * work[c].transpose().array()).sum();
          H(ia, ic) += h;
          if (ia != ic) H(ic, ia) += h;
        }
      }
    }
    for (int i = 0; i < bp.boxed_vars; ++i) {
      const double up = bp.box - x(i);
      const double lo = bp.box + x(i);
      g(i) += 1.0 / up - 1.0 / lo;
      H(i, i) += 1.0 / (up * up) + 1.0 / (lo * lo);
    }
    if (bp.capped_var >= 0) {
      const double s = bp.cap - x(bp.capped_var);
      g(bp.capped_var) += 1.0 / s;
      H(bp.capped_var, bp.capped_var) += 1.0 / (s * s);
    }

    // Symmetric diagonal scaling keeps the Newton system well conditioned
    // when variables live on very different scales.
    Vector scale = H.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Matrix Hs = scale.asDiagonal() * H * scale.asDiagonal();
    Vector gs = scale.cwiseProduct(g);
    Eigen::LDLT<Matrix> ldlt(Hs);
    Vector dxs = ldlt.solve(-gs);
    if (ldlt.info() != Eigen::Success || !dxs.allFinite()) {
      Hs.diagonal().array() += 1e-12;
      dxs = Hs.ldlt().solve(-gs);
      if (!dxs.allFinite()) return CenterOutcome::stalled;
    }
    const Vector dx = scale.cwiseProduct(dxs);
    const double decrement2 = -g.dot(dx);
    if (decrement2 < 0.0) return CenterOutcome::stalled;
    if (decrement2 / 2.0 <= kCenteringTol) return CenterOutcome::centered;

    // Backtracking: stay inside the cone, then Armijo on the change in the
    // barrier objective, computed as a difference to avoid cancellation.
    const double slope = g.dot(dx);
    const double c_dx = bp.c.dot(dx);
    double s = 1.0;
    std::optional<Factorization> trial;
    bool accepted = false;
    while (s > 1e-14) {
      trial = factor(bp, x + s * dx);
      if (trial) {
        const double change = s * c_dx / mu - (trial->logdet - fac->logdet);
        if (change <= 0.25 * s * slope) {
          accepted = true;
          break;
        }
      }
      s *= 0.5;
    }
    --budget;
    ++steps;
    if (!accepted) {
      return decrement2 < kRoundoffDecrement ? CenterOutcome::centered
                                             : CenterOutcome::stalled;
    }
    const bool negligible = s * dx.norm() <= 1e-14 * (1.0 + x.norm());
    x += s * dx;
    fac = std::move(trial);
    if (negligible || (s < 1.0 && decrement2 < kRoundoffDecrement)) {
      return CenterOutcome::centered;
    }
  }
}

enum class PathOutcome { converged, budget, early_stop };

struct PathResult {
  PathOutcome outcome = PathOutcome::converged;
  std::vector<double> objectives;
  int outer = 0;
};

template <typename StopFn>
PathResult follow_path(const BarrierProblem& bp, Vector& x, double mu0,
                       const SolverOptions& opts, int& budget, int& steps,
                       StopFn&& early_stop,
                       double unbounded_threshold =
                           -std::numeric_limits<double>::infinity()) {
  PathResult res;
  const double m = bp.total_dim();
  double mu = mu0;
  while (true) {
    const auto out = center(bp, x, mu, budget, steps, early_stop);
    ++res.outer;
    if (out == CenterOutcome::early_stop) {
      res.outcome = PathOutcome::early_stop;
      return res;
    }
    if (out == CenterOutcome::budget) {
      res.outcome = PathOutcome::budget;
      return res;
    }
    res.objectives.push_back(bp.c.dot(x));
    if (bp.c.dot(x) < unbounded_threshold) {
      res.outcome = PathOutcome::early_stop;
      return res;
    }
    if (mu * m < opts.gap_tolerance) break;
    mu /= opts.barrier_decrease;
  }
  res.outcome = PathOutcome::converged;
  return res;
}

double max_f0_norm(const LmiProgram& prog) {
  double v = 0.0;
  for (const auto& b : prog.blocks()) v = std::max(v, b.F0.dense().norm());
  return v;
}

double worst_block_eig(const LmiProgram& prog, const Vector& x) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < prog.blocks().size(); ++k) {
    worst = std::min(worst, linalg::min_eig_sym(prog.evaluate(k, x)));
  }
  return worst;
}

bool near_box(const Vector& x, double box) {
  return x.size() > 0 && x.cwiseAbs().maxCoeff() >= 0.99 * box;
}

// Phase-1 problem: variables (x, t); block k becomes F_k(x) - t I.
BarrierProblem phase_one(const LmiProgram& prog, const SolverOptions& opts) {
  const int d = prog.num_vars();
  BarrierProblem bp;
  bp.nvars = d + 1;
  bp.c = Vector::Zero(d + 1);
  bp.c(d) = -1.0;
  bp.boxed_vars = d;
  bp.box = opts.variable_box;
  bp.capped_var = d;
  bp.cap = opts.t_cap;
  for (const auto& blk : prog.blocks()) {
    Block b;
    b.dim = blk.dim;
    b.F0 = blk.F0.dense();
    for (int i = 0; i < d; ++i) {
      if (!blk.F[i].dense().isZero(0.0)) b.terms.push_back({i, blk.F[i].dense()});
    }
    b.terms.push_back({d, -Matrix::Identity(blk.dim, blk.dim)});
    bp.blocks.push_back(std::move(b));
  }
  return bp;
}

BarrierProblem phase_two(const LmiProgram& prog, const SolverOptions& opts) {
  const int d = prog.num_vars();
  BarrierProblem bp;
  bp.nvars = d;
  bp.c = prog.objective();
  bp.boxed_vars = d;
  bp.box = opts.variable_box;
  for (const auto& blk : prog.blocks()) {
    Block b;
    b.dim = blk.dim;
    b.F0 = blk.F0.dense() -
           blk.strictness_margin * Matrix::Identity(blk.dim, blk.dim);
    for (int i = 0; i < d; ++i) {
      if (!blk.F[i].dense().isZero(0.0)) b.terms.push_back({i, blk.F[i].dense()});
    }
    bp.blocks.push_back(std::move(b));
  }
  return bp;
}

double initial_t(const LmiProgram& prog) {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& blk : prog.blocks()) t = std::min(t, linalg::min_eig_sym(blk.F0));
  return t;
}

// Phase-1 t must exceed every block's strictness margin for x to satisfy the
// program as stated.
double strictness_threshold(const LmiProgram& prog) {
  double v = 0.0;
  for (const auto& b : prog.blocks()) v = std::max(v, b.strictness_margin);
  return v;
}

struct PhaseOneResult {
  Vector x;
  double t = 0.0;
  PathOutcome outcome = PathOutcome::converged;
  int outer = 0;
};

PhaseOneResult run_phase_one(const LmiProgram& prog, const SolverOptions& opts,
                             bool stop_when_feasible, int& budget, int& steps) {
  const int d = prog.num_vars();
  PhaseOneResult r;
  if (prog.blocks().empty()) {
    r.x = Vector::Zero(d);
    r.t = opts.t_cap;
    return r;
  }
  const double t0 = std::min(initial_t(prog), opts.t_cap / 2.0);
  Vector z = Vector::Zero(d + 1);
  z(d) = t0 - 1.0;
  const BarrierProblem bp = phase_one(prog, opts);
  const double mu0 = 1.0;
  const double enough = strictness_threshold(prog) + 1e-8 * (1.0 + max_f0_norm(prog));
  auto stop = [&](const Vector& v) { return stop_when_feasible && v(d) > enough; };
  const PathResult path = follow_path(bp, z, mu0, opts, budget, steps, stop);
  r.x = z.head(d);
  r.t = z(d);
  r.outcome = path.outcome;
  r.outer = path.outer;
  return r;
}

// Feasible once t clears the strictness margins; infeasible only when the
// path converged (gap below tolerance) with t < 0.
LmiStatus phase_one_verdict(const LmiProgram& prog, const PhaseOneResult& p1) {
  if (p1.t > strictness_threshold(prog)) return LmiStatus::optimal;
  if (p1.outcome == PathOutcome::budget) return LmiStatus::max_iterations;
  if (p1.t < 0.0) return LmiStatus::infeasible;
  return LmiStatus::inconclusive;
}

void record_certificate(LmiSolution& sol, const LmiProgram& prog) {
  sol.min_block_eig = worst_block_eig(prog, sol.x);
  ++g_optimal_results;
  double worst = g_worst_min_block_eig.load();
  while (sol.min_block_eig < worst &&
         !g_worst_min_block_eig.compare_exchange_weak(worst, sol.min_block_eig)) {
  }
  if (sol.min_block_eig < -1e-7 * (1.0 + max_f0_norm(prog))) {
    ++g_violations;
    sol.status = LmiStatus::inconclusive;
  }
}

}  // namespace

LmiProgram::LmiProgram(int num_vars)
    : num_vars_(num_vars), objective_(Vector::Zero(num_vars)) {
  if (num_vars < 0) throw DimensionError("LmiProgram: negative variable count");
}

void LmiProgram::set_objective(const Vector& c) {
  if (c.size() != num_vars_) {
    throw DimensionError("LmiProgram: objective length mismatch");
  }
  objective_ = c;
}

void LmiProgram::add_block(AffineBlock block) {
  if (block.dim < 1 || block.F0.dim() != block.dim) {
    throw DimensionError("LmiProgram: block constant has wrong size");
  }
  if (static_cast<int>(block.F.size()) != num_vars_) {
    throw DimensionError("LmiProgram: block needs one coefficient per variable");
  }
  for (const auto& f : block.F) {
    if (f.dim() != block.dim) {
      throw DimensionError("LmiProgram: block coefficient has wrong size");
    }
  }
  if (block.strictness_margin < 0.0) {
    throw DomainError("LmiProgram: negative strictness margin");
  }
  blocks_.push_back(std::move(block));
}

SymMatrix LmiProgram::evaluate(std::size_t k, const Vector& x) const {
  const auto& b = blocks_.at(k);
  Matrix s = b.F0.dense();
  for (int i = 0; i < num_vars_; ++i) {
    if (x(i) != 0.0) s += x(i) * b.F[i].dense();
  }
  return SymMatrix(s);
}

std::string to_string(LmiStatus status) {
  switch (status) {
    case LmiStatus::optimal: return "optimal";
    case LmiStatus::infeasible: return "infeasible";
    case LmiStatus::max_iterations: return "max_iterations";
    case LmiStatus::unbounded: return "unbounded";
    case LmiStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

LmiSolution solve_feasibility(const LmiProgram& prog, const SolverOptions& opts) {
  LmiSolution sol;
  int budget = opts.max_newton_steps;
  int steps = 0;
  const PhaseOneResult p1 = run_phase_one(prog, opts, false, budget, steps);
  sol.x = p1.x;
  sol.feasibility_t = p1.t;
  sol.newton_steps = steps;
  sol.outer_iterations = p1.outer;
  sol.objective_value = prog.objective().dot(p1.x);
  sol.box_active = near_box(p1.x, opts.variable_box);
  sol.status = phase_one_verdict(prog, p1);
  if (sol.status == LmiStatus::optimal) {
    record_certificate(sol, prog);
  } else {
    sol.min_block_eig = prog.blocks().empty() ? 0.0 : worst_block_eig(prog, sol.x);
  }
  return sol;
}

LmiSolution solve_min(const LmiProgram& prog, const SolverOptions& opts) {
  LmiSolution sol;
  int budget = opts.max_newton_steps;
  int steps = 0;
  const PhaseOneResult p1 = run_phase_one(prog, opts, true, budget, steps);
  sol.feasibility_t = p1.t;
  sol.x = p1.x;
  const LmiStatus verdict = phase_one_verdict(prog, p1);
  if (verdict != LmiStatus::optimal) {
    sol.status = verdict;
    sol.newton_steps = steps;
    sol.objective_value = prog.objective().dot(sol.x);
    sol.min_block_eig = prog.blocks().empty() ? 0.0 : worst_block_eig(prog, sol.x);
    return sol;
  }

  const BarrierProblem bp = phase_two(prog, opts);
  Vector x = p1.x;
  // Start where the objective's range over the box is comparable to the
  // barrier, so the first centering is a short Newton run.
  const double mu0 = std::max(1.0, opts.variable_box * prog.objective().lpNorm<1>());
  auto never = [](const Vector&) { return false; };
  const PathResult path = follow_path(bp, x, mu0, opts, budget, steps, never,
                                      opts.unbounded_threshold);
  sol.x = x;
  sol.objective_value = prog.objective().dot(x);
  sol.newton_steps = steps;
  sol.outer_iterations = p1.outer + path.outer;
  sol.outer_objectives = path.objectives;
  sol.box_active = near_box(x, opts.variable_box);
  if (sol.objective_value < opts.unbounded_threshold) {
    sol.status = LmiStatus::unbounded;
    sol.min_block_eig = worst_block_eig(prog, x);
    return sol;
  }
  if (path.outcome == PathOutcome::budget) {
    sol.status = LmiStatus::max_iterations;
    sol.min_block_eig = worst_block_eig(prog, x);
    return sol;
  }
  sol.status = LmiStatus::optimal;
  record_certificate(sol, prog);
  return sol;
}

std::vector<SymMatrix> symmetric_var_basis(int dim) {
  if (dim < 1) throw DimensionError("symmetric_var_basis: dim must be >= 1");
  std::vector<SymMatrix> basis;
  basis.reserve(dim * (dim + 1) / 2);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      Matrix e = Matrix::Zero(dim, dim);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      basis.emplace_back(e);
    }
  }
  return basis;
}

std::string dump_json(const LmiProgram& prog) {
  auto dense = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json doc;
  doc["num_vars"] = prog.num_vars();
  doc["objective"] = std::vector<double>(
      prog.objective().data(), prog.objective().data() + prog.num_vars());
  doc["blocks"] = nlohmann::json::array();
  for (const auto& b : prog.blocks()) {
    nlohmann::json jb;
    jb["label"] = b.label;
    jb["dim"] = b.dim;
    jb["strictness_margin"] = b.strictness_margin;
    jb["F0"] = dense(b.F0.dense());
    jb["F"] = nlohmann::json::array();
    for (const auto& f : b.F) jb["F"].push_back(dense(f.dense()));
    doc["blocks"].push_back(std::move(jb));
  }
  return doc.dump(2);
}

CertificateStats certificate_stats() {
  return {g_optimal_results.load(), g_violations.load(), g_worst_min_block_eig.load()};
}

// ---------------------------------------------------------------------------

AffineExpr::AffineExpr(int rows, int cols) : constant_(Matrix::Zero(rows, cols)) {}

AffineExpr AffineExpr::constant(const Matrix& m) {
  AffineExpr e;
  e.constant_ = m;
  return e;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr e;
  e.constant_ = constant_.transpose();
  for (const auto& [var, coeff] : terms_) e.terms_[var] = coeff.transpose();
  return e;
}

Matrix AffineExpr::evaluate(const Vector& x) const {
  Matrix m = constant_;
  for (const auto& [var, coeff] : terms_) m += x(var) * coeff;
  return m;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  if (rows() != o.rows() || cols() != o.cols()) {
    throw DimensionError("AffineExpr: size mismatch in addition");
  }
  constant_ += o.constant_;
  for (const auto& [var, coeff] : o.terms_) {
    auto it = terms_.find(var);
    if (it == terms_.end()) {
      terms_.emplace(var, coeff);
    } else {
      it->second += coeff;
    }
  }
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) { return *this += -o; }

AffineExpr operator-(const AffineExpr& a) { return -1.0 * a; }

AffineExpr operator*(double s, const AffineExpr& a) {
  AffineExpr e;
  e.constant_ = s * a.constant_;
  for (const auto& [var, coeff] : a.terms_) e.terms_[var] = s * coeff;
  return e;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& a) {
  if (m.cols() != a.rows()) {
    throw DimensionError("AffineExpr: size mismatch in left product");
  }
  AffineExpr e;
  e.constant_ = m * a.constant_;
  for (const auto& [var, coeff] : a.terms_) e.terms_[var] = m * coeff;
  return e;
}

AffineExpr operator*(const AffineExpr& a, const Matrix& m) {
  if (a.cols() != m.rows()) {
    throw DimensionError("AffineExpr: size mismatch in right product");
  }
  AffineExpr e;
  e.constant_ = a.constant_ * m;
  for (const auto& [var, coeff] : a.terms_) e.terms_[var] = coeff * m;
  return e;
}

AffineExpr AffineExpr::blocks(
    std::initializer_list<std::initializer_list<AffineExpr>> grid) {
  int total_rows = 0;
  int total_cols = -1;
  for (const auto& row : grid) {
    if (row.size() == 0) throw DimensionError("AffineExpr::blocks: empty row");
    const int h = row.begin()->rows();
    int w = 0;
    for (const auto& cell : row) {
      if (cell.rows() != h) {
        throw DimensionError("AffineExpr::blocks: ragged block row");
      }
      w += cell.cols();
    }
    if (total_cols >= 0 && w != total_cols) {
      throw DimensionError("AffineExpr::blocks: rows differ in width");
    }
    total_cols = w;
    total_rows += h;
  }
  AffineExpr out(total_rows, std::max(total_cols, 0));
  int r0 = 0;
  for (const auto& row : grid) {
    int c0 = 0;
    const int h = row.begin()->rows();
    for (const auto& cell : row) {
      out.constant_.block(r0, c0, h, cell.cols()) = cell.constant_;
      for (const auto& [var, coeff] : cell.terms_) {
        auto it = out.terms_.find(var);
        if (it == out.terms_.end()) {
          it = out.terms_.emplace(var, Matrix::Zero(total_rows, total_cols)).first;
        }
        it->second.block(r0, c0, h, cell.cols()) = coeff;
      }
      c0 += cell.cols();
    }
    r0 += h;
  }
  return out;
}

AffineExpr VariableSet::add_symmetric(int dim) {
  AffineExpr e(dim, dim);
  for (const auto& basis : symmetric_var_basis(dim)) {
    e.terms_.emplace(count_++, basis.dense());
  }
  return e;
}

AffineExpr VariableSet::add_full(int rows, int cols) {
  AffineExpr e(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      Matrix m = Matrix::Zero(rows, cols);
      m(i, j) = 1.0;
      e.terms_.emplace(count_++, std::move(m));
    }
  }
  return e;
}

AffineExpr VariableSet::add_scalar() { return add_full(1, 1); }

AffineBlock to_block(const AffineExpr& expr, int num_vars, double margin,
                     std::string label) {
  if (expr.rows() != expr.cols()) {
    throw DimensionError("to_block: expression is not square");
  }
  const int dim = expr.rows();
  auto check = [&](const Matrix& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
      throw DomainError("to_block: block '" + label + "' is not symmetric");
    }
    return SymMatrix(m);
  };
  AffineBlock b;
  b.dim = dim;
  b.F0 = check(expr.constant_term());
  b.F.assign(num_vars, SymMatrix::zero(dim));
  for (const auto& [var, coeff] : expr.terms()) {
    if (var >= num_vars) throw DimensionError("to_block: variable out of range");
    b.F[var] = check(coeff);
  }
  b.strictness_margin = margin;
  b.label = std::move(label);
  return b;
}

double strict_margin(const AffineExpr& expr) {
  return 1e-8 * (1.0 + linalg::frobenius(expr.constant_term()));
}

}  // namespace dlqr::sdp
