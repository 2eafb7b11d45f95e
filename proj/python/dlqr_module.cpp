#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlqr/certificates.hpp"
#include "dlqr/errors.hpp"
#include "dlqr/parallel.hpp"
#include "dlqr/problems.hpp"
#include "dlqr/spi.hpp"
#include "dlqr/synthesis.hpp"

namespace py = pybind11;
using namespace dlqr;

namespace {

py::dict condition_dict(const ConditionResult& c) {
  py::dict d;
  d["holds"] = c.holds;
  d["margin"] = c.margin;
  return d;
}

py::dict report_dict(const CertificateReport& r) {
  py::dict d;
  d["gamma"] = r.gamma;
  if (r.error) {
    d["error"] = *r.error;
    return d;
  }
  d["rho_closed_loop"] = r.rho_closed_loop;
  d["cond9"] = condition_dict(r.cond9);
  d["cond11"] = condition_dict(r.cond11);
  d["cond16"] = condition_dict(r.cond16);
  d["thm2"] = to_string(r.thm2);
  return d;
}

py::dict solver_dict(const sdp::LmiSolution& s) {
  py::dict d;
  d["status"] = sdp::to_string(s.status);
  d["objective"] = s.objective_value;
  d["min_block_eig"] = s.min_block_eig;
  d["newton_steps"] = s.newton_steps;
  d["box_active"] = s.box_active;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dlqr, m) {
  m.doc() = "Discounted LQR stability certificates, gain synthesis and policy iteration";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", error);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", error);
  py::register_exception<SingularityError>(m, "SingularityError", error);
  py::register_exception<DomainError>(m, "DomainError", error);
  py::register_exception<SpectralPreconditionError>(m, "SpectralPreconditionError", error);
  py::register_exception<DefinitenessError>(m, "DefinitenessError", error);
  py::register_exception<AssumptionError>(m, "AssumptionError", error);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", error);
  py::register_exception<SynthesisInfeasibleError>(m, "SynthesisInfeasibleError", error);
  py::register_exception<ExtractionError>(m, "ExtractionError", error);
  py::register_exception<CertificateError>(m, "CertificateError", error);
  py::register_exception<InputError>(m, "InputError", error);

  py::class_<ProblemInstance>(m, "ProblemInstance")
      .def(py::init<Matrix, Matrix, const Matrix&, const Matrix&, std::optional<Matrix>,
                    std::optional<Matrix>>(),
           py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"), py::arg("C") = py::none(),
           py::arg("D") = py::none())
      .def_property_readonly("A", &ProblemInstance::A)
      .def_property_readonly("B", &ProblemInstance::B)
      .def_property_readonly("Q", [](const ProblemInstance& p) { return p.Q().dense(); })
      .def_property_readonly("R", [](const ProblemInstance& p) { return p.R().dense(); })
      .def_property_readonly("states", &ProblemInstance::states)
      .def_property_readonly("inputs", &ProblemInstance::inputs)
      .def("closed_loop", &ProblemInstance::closed_loop, py::arg("K"));

  m.def("example1", &problems::example1);
  m.def("scalar_unit", &problems::scalar_unit);

  m.def("spectral_radius", &linalg::spectral_radius, py::arg("M"));
  m.def("eigenvalues", &linalg::eigenvalues, py::arg("M"));

  py::class_<RiccatiSolution>(m, "RiccatiSolution")
      .def_readonly("gamma", &RiccatiSolution::gamma)
      .def_property_readonly("P", [](const RiccatiSolution& s) { return s.P.dense(); })
      .def_readonly("K", &RiccatiSolution::K)
      .def_readonly("dare_residual", &RiccatiSolution::dare_residual)
      .def_readonly("iterations", &RiccatiSolution::iterations);

  m.def("solve_dare", &solve_dare, py::arg("problem"), py::arg("gamma"));
  m.def(
      "solve_stein",
      [](const Matrix& M, const Matrix& W) { return solve_stein(M, SymMatrix(W)).dense(); },
      py::arg("M"), py::arg("W"));
  m.def("eval_cost", &eval_cost, py::arg("problem"), py::arg("gamma"), py::arg("K"),
        py::arg("x0"));
  m.def("eval_cost_trace", &eval_cost_trace, py::arg("problem"), py::arg("gamma"), py::arg("K"),
        py::arg("x0"));
  m.def("eval_cost_sim", &eval_cost_sim, py::arg("problem"), py::arg("gamma"), py::arg("K"),
        py::arg("x0"), py::arg("horizon"));
  m.def(
      "relative_error",
      [](const ProblemInstance& p, double g, const Matrix& K, const Vector& x0) {
        return relative_error(p, g, K, x0);
      },
      py::arg("problem"), py::arg("gamma"), py::arg("K"), py::arg("x0"));

  m.def(
      "analyze",
      [](const ProblemInstance& p, double g, bool with_thm2) {
        return report_dict(analyze(p, g, with_thm2));
      },
      py::arg("problem"), py::arg("gamma"), py::arg("with_thm2") = true);
  m.def(
      "check_thm2",
      [](const ProblemInstance& p, double g) {
        const Thm2Result r = check_thm2(solve_dare(p, g), p);
        py::dict d;
        d["status"] = to_string(r.status);
        d["X"] = r.X ? py::cast(r.X->dense()) : py::none();
        d["solver"] = solver_dict(r.solver);
        return d;
      },
      py::arg("problem"), py::arg("gamma"));
  m.def(
      "sweep",
      [](const ProblemInstance& p, const std::vector<double>& grid, bool with_thm2,
         unsigned workers) {
        SweepOptions opts;
        opts.with_thm2 = with_thm2;
        opts.workers = workers == 0 ? default_workers() : workers;
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = sweep(p, grid, opts);
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(report_dict(row));
        py::list boundaries;
        for (const auto& b : r.boundaries) {
          py::dict d;
          d["condition"] = b.condition;
          d["gamma"] = b.gamma;
          d["lower"] = b.lower;
          d["upper"] = b.upper;
          d["becomes_true"] = b.becomes_true;
          boundaries.append(d);
        }
        py::dict d;
        d["rows"] = rows;
        d["boundaries"] = boundaries;
        return d;
      },
      py::arg("problem"), py::arg("gammas"), py::arg("with_thm2") = true,
      py::arg("workers") = 0);
  m.def("linear_grid", &linear_grid, py::arg("lo"), py::arg("hi"), py::arg("steps"));

  m.def(
      "synth_guaranteed_cost",
      [](const ProblemInstance& p, double g, const Vector& x0) {
        const CostSynthesisResult r = synth_guaranteed_cost(p, g, x0);
        py::dict d;
        d["gamma"] = r.gamma;
        d["K_hat"] = r.K_hat;
        d["X"] = r.X.dense();
        d["mu"] = r.mu;
        d["guaranteed_bound"] = r.guaranteed_bound;
        d["achieved_cost"] = r.achieved_cost;
        d["optimal_cost"] = r.optimal_cost;
        d["rho_closed_loop"] = r.rho_closed_loop;
        d["solver"] = solver_dict(r.solver);
        return d;
      },
      py::arg("problem"), py::arg("gamma"), py::arg("x0"));
  m.def(
      "synth_gain_proximity",
      [](const ProblemInstance& p, double g) {
        const GainSynthesisResult r = synth_gain_proximity(p, g);
        py::dict d;
        d["gamma"] = r.gamma;
        d["K_gamma"] = r.K_gamma;
        d["K_bar"] = r.K_bar;
        d["L_bar"] = r.L_bar.dense();
        d["mismatch_bound"] = r.mismatch_bound;
        d["mismatch_actual"] = r.mismatch_actual;
        d["rho_closed_loop"] = r.rho_closed_loop;
        d["box_warning"] = r.box_warning;
        d["solver"] = solver_dict(r.solver);
        return d;
      },
      py::arg("problem"), py::arg("gamma"));

  m.def(
      "spi_run",
      [](const ProblemInstance& p, double g, const Matrix& K0, double alpha_grid_step,
         double alpha_scale, double epsilon_stop, int max_iterations) {
        SpiConfig cfg;
        cfg.gamma = g;
        cfg.K0 = K0;
        cfg.alpha_grid_step = alpha_grid_step;
        cfg.alpha_scale = alpha_scale;
        cfg.epsilon_stop = epsilon_stop;
        cfg.max_iterations = max_iterations;
        const SpiTrace t = spi_run(p, cfg);
        py::list its;
        for (const auto& it : t.iterations) {
          py::dict d;
          d["j"] = it.j;
          d["alpha_bar"] = it.alpha_bar;
          d["alpha"] = it.alpha;
          d["K"] = it.K;
          d["P"] = it.P.dense();
          d["rho_closed_loop"] = it.rho_closed_loop;
          d["rho_discounted"] = it.rho_discounted;
          d["gap"] = it.gap;
          its.append(d);
        }
        py::dict d;
        d["gamma"] = t.gamma;
        d["P_gamma"] = t.P_gamma.dense();
        d["K_gamma"] = t.K_gamma;
        d["stop_reason"] = to_string(t.stop_reason);
        d["iterations"] = its;
        return d;
      },
      py::arg("problem"), py::arg("gamma"), py::arg("K0"), py::arg("alpha_grid_step") = 1e-5,
      py::arg("alpha_scale") = 1.0, py::arg("epsilon_stop") = 1e-5,
      py::arg("max_iterations") = 500);
}
