#include "dlqr/spi.hpp"

#include <cmath>

#include "dlqr/errors.hpp"

namespace dlqr {

namespace {

constexpr double kFixedPointTol = 1e-12;

SpiIterate make_iterate(const ProblemInstance& prob, double gamma, int j,
                        const Matrix& K, const SymMatrix& P_gamma) {
  SpiIterate it;
  it.j = j;
  it.K = K;
  const Matrix acl = prob.closed_loop(K);
  it.rho_closed_loop = linalg::spectral_radius(acl);
  it.rho_discounted = std::sqrt(gamma) * it.rho_closed_loop;
  const CostEvaluation ev = evaluate_policy(prob, gamma, K);
  if (!ev.in_K_gamma) {
    throw ConsistencyError("spi: iterate left the discounted stability set");
  }
  it.P = ev.P_K;
  it.gap = linalg::frobenius(it.P.dense() - P_gamma.dense());
  return it;
}

}  // namespace

std::string to_string(SpiStopReason reason) {
  switch (reason) {
    case SpiStopReason::alpha_below_epsilon: return "alpha_below_epsilon";
    case SpiStopReason::max_iterations: return "max_iterations";
    case SpiStopReason::converged_to_optimal: return "converged_to_optimal";
  }
  return "unknown";
}

Matrix pi_target(const ProblemInstance& prob, double gamma, const SymMatrix& P) {
  return greedy_gain(prob, gamma, P);
}

double max_stable_alpha(const ProblemInstance& prob, const Matrix& K_prev,
                        const Matrix& K_target, double step) {
  if (!(step > 0.0 && step <= 1.0)) {
    throw DomainError("max_stable_alpha: grid step must lie in (0, 1]");
  }
  const long n = std::lround(1.0 / step);
  auto alpha_at = [n](long k) {
    return k == n ? 1.0 : static_cast<double>(k) / static_cast<double>(n);
  };
  auto stable = [&](long k) {
    const double a = alpha_at(k);
    const Matrix K = a * K_target + (1.0 - a) * K_prev;
    return linalg::spectral_radius(prob.closed_loop(K)) < 1.0;
  };
  if (stable(n)) return 1.0;
  // Bisection assuming feasibility is a prefix of the grid; `lo` is always a
  // verified-stable index (or 0 meaning alpha = 0), `hi` a verified-unstable one.
  long lo = 0;
  long hi = n;
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    (stable(mid) ? lo : hi) = mid;
  }
  if (lo > 0) return alpha_at(lo);
  // The prefix assumption can fail when stability in alpha is not an
  // interval; scan the whole grid downward.
  for (long k = n - 1; k >= 1; --k) {
    if (stable(k)) return alpha_at(k);
  }
  return 0.0;
}

SpiTrace spi_run(const ProblemInstance& prob, const SpiConfig& config) {
  const double gamma = config.gamma;
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError("spi_run: discount factor outside [0, 1]");
  }
  if (config.K0.rows() != prob.inputs() || config.K0.cols() != prob.states()) {
    throw DimensionError("spi_run: K0 has wrong shape");
  }
  if (!(config.alpha_scale > 0.0 && config.alpha_scale <= 1.0)) {
    throw DomainError("spi_run: alpha_scale must lie in (0, 1]");
  }
  if (!(config.epsilon_stop > 0.0)) {
    throw DomainError("spi_run: epsilon_stop must be positive");
  }
  if (!(linalg::spectral_radius(prob.closed_loop(config.K0)) < 1.0)) {
    throw InputError("spi_run: K0 does not stabilize A + B K0");
  }

  const RiccatiSolution opt = solve_dare(prob, gamma);
  SpiTrace trace;
  trace.gamma = gamma;
  trace.P_gamma = opt.P;
  trace.K_gamma = opt.K;
  trace.iterations.push_back(make_iterate(prob, gamma, 0, config.K0, opt.P));

  const long grid_points = std::lround(1.0 / config.alpha_grid_step);
  for (int j = 1;; ++j) {
    if (j > config.max_iterations) {
      trace.stop_reason = SpiStopReason::max_iterations;
      break;
    }
    const SpiIterate& prev = trace.iterations.back();
    const Matrix target = pi_target(prob, gamma, prev.P);
    const double alpha_bar =
        max_stable_alpha(prob, prev.K, target, config.alpha_grid_step);
    const long k_bar = std::lround(alpha_bar * grid_points);
    const long k = static_cast<long>(std::floor(config.alpha_scale * k_bar + 1e-9));
    const double alpha =
        k == grid_points ? 1.0 : static_cast<double>(k) / grid_points;
    if (alpha < config.epsilon_stop) {
      trace.stop_reason = SpiStopReason::alpha_below_epsilon;
      trace.final_alpha_bar = alpha_bar;
      break;
    }
    const Matrix K = alpha * target + (1.0 - alpha) * prev.K;
    const bool fixed_point = linalg::frobenius(target - prev.K) < kFixedPointTol &&
                             linalg::spectral_radius(prob.closed_loop(target)) < 1.0;
    SpiIterate next = make_iterate(prob, gamma, j, K, opt.P);
    next.alpha_bar = alpha_bar;
    next.alpha = alpha;
    if (!(next.rho_closed_loop < 1.0)) {
      throw ConsistencyError("spi: improvement step lost stability");
    }
    trace.iterations.push_back(std::move(next));
    if (fixed_point) {
      trace.stop_reason = SpiStopReason::converged_to_optimal;
      break;
    }
  }
  return trace;
}

}  // namespace dlqr
