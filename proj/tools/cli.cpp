#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "artifacts.hpp"
#include "dlqr/certificates.hpp"
#include "dlqr/parallel.hpp"
#include "dlqr/problems.hpp"
#include "dlqr/spi.hpp"
#include "dlqr/synthesis.hpp"
#include "problem_file.hpp"

namespace dlqr::cli {

namespace {

// A failed sub-step of `reproduce`; keeps the exit code of the cause.
class StepError : public Error {
 public:
  StepError(const std::string& what, int code) : Error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StepError*>(&e)) return s->code();
  if (dynamic_cast<const IoError*>(&e)) return kIoError;
  if (dynamic_cast<const BadGainError*>(&e)) return kBadGain;
  if (dynamic_cast<const SynthesisInfeasibleError*>(&e) ||
      dynamic_cast<const ExtractionError*>(&e) || dynamic_cast<const CertificateError*>(&e)) {
    return kInfeasible;
  }
  return kInputError;
}

template <class F>
auto step(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StepError&) {
    throw;
  } catch (const std::exception& e) {
    throw StepError(name + ": " + e.what(), exit_code_for(e));
  }
}

struct Options {
  std::string problem;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double gamma_min = 0.0;
  double gamma_max = 1.0;
  int steps = 1000;
  std::string x0;
  std::string mode;
  std::string k0;
  double alpha_grid = 1e-5;
  double alpha_scale = 1.0;
  double eps = 1e-5;
  int max_iterations = 500;
  std::string out;
  std::string figure;
};

std::string fmt(double v) { return format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

void require_gamma(double gamma, const char* flag) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InputError(std::string(flag) + " must lie in [0, 1]");
  }
}

void require_out(const Options& o) {
  if (o.out.empty()) throw InputError("--out is required");
}

std::optional<Vector> parse_x0(const std::string& text, int states) {
  if (text.empty()) return std::nullopt;
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::size_t b = pos, e = end;
    while (b < e && text[b] == ' ') ++b;
    while (e > b && text[e - 1] == ' ') --e;
    double v = 0.0;
    const auto res = std::from_chars(text.data() + b, text.data() + e, v);
    if (b == e || res.ec != std::errc() || res.ptr != text.data() + e || !std::isfinite(v)) {
      throw InputError("--x0: '" + text.substr(pos, end - pos) + "' is not a number");
    }
    values.push_back(v);
    pos = end + 1;
  }
  if (static_cast<int>(values.size()) != states) {
    throw InputError("--x0 has " + std::to_string(values.size()) + " entries, the problem has " +
                     std::to_string(states) + " states");
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json condition_json(const ConditionResult& c) {
  Json j;
  j["holds"] = c.holds;
  j["margin"] = c.margin;
  return j;
}

Json solver_json(const sdp::LmiSolution& s) {
  Json j;
  j["status"] = sdp::to_string(s.status);
  j["objective"] = s.objective_value;
  j["min_block_eig"] = s.min_block_eig;
  j["newton_steps"] = s.newton_steps;
  j["box_active"] = s.box_active;
  return j;
}

void check_rows(const SweepResult& r) {
  for (const auto& row : r.rows) {
    if (row.error) throw Error("sweep at gamma=" + fmt(row.gamma) + ": " + *row.error);
  }
}

std::string sweep_csv(const SweepResult& r) {
  CsvWriter csv({"gamma", "rho", "cond9", "cond9_margin", "cond11", "cond11_margin", "cond16",
                 "cond16_margin", "thm2_status"});
  for (const auto& row : r.rows) {
    csv.add_row({fmt(row.gamma), fmt(row.rho_closed_loop), fmt(row.cond9.holds),
                 fmt(row.cond9.margin), fmt(row.cond11.holds), fmt(row.cond11.margin),
                 fmt(row.cond16.holds), fmt(row.cond16.margin), to_string(row.thm2)});
  }
  return csv.str();
}

std::string boundaries_csv(const SweepResult& r) {
  CsvWriter csv({"condition", "becomes_true", "gamma", "lower", "upper"});
  for (const auto& b : r.boundaries) {
    csv.add_row({b.condition, fmt(b.becomes_true), fmt(b.gamma), fmt(b.lower), fmt(b.upper)});
  }
  return csv.str();
}

std::string rho_svg(const SweepResult& r, const std::string& title) {
  std::vector<double> g, rho;
  for (const auto& row : r.rows) {
    g.push_back(row.gamma);
    rho.push_back(row.rho_closed_loop);
  }
  SvgPlot plot(title, "gamma", "spectral radius of A + B K_gamma");
  plot.add_hline(1.0, "gray");
  plot.add_line(g, rho, "steelblue", "rho");
  return plot.render();
}

void print_boundaries(const SweepResult& r, std::ostream& out) {
  for (const auto& b : r.boundaries) {
    out << b.condition << (b.becomes_true ? " becomes true" : " becomes false") << " at gamma "
        << fmt(b.gamma) << " (bracket " << fmt(b.lower) << " to " << fmt(b.upper) << ")\n";
  }
}

SweepOptions sweep_options() {
  SweepOptions so;
  so.workers = default_workers();
  return so;
}

std::string spi_csv(const SpiTrace& t) {
  CsvWriter csv({"j", "alpha_j", "rho_j", "gap_frobenius"});
  for (const auto& it : t.iterations) {
    csv.add_row({std::to_string(it.j), fmt(it.alpha), fmt(it.rho_closed_loop), fmt(it.gap)});
  }
  return csv.str();
}

Json spi_json(const SpiTrace& t) {
  Json j;
  j["gamma"] = t.gamma;
  j["stop_reason"] = to_string(t.stop_reason);
  j["final_alpha_bar"] = t.final_alpha_bar;
  j["K_gamma"] = to_json(t.K_gamma);
  j["P_gamma"] = to_json(t.P_gamma.dense());
  Json its = Json::array();
  for (const auto& it : t.iterations) {
    Json e;
    e["j"] = it.j;
    e["alpha_bar"] = it.alpha_bar;
    e["alpha"] = it.alpha;
    e["rho_closed_loop"] = it.rho_closed_loop;
    e["rho_discounted"] = it.rho_discounted;
    e["gap_frobenius"] = it.gap;
    e["K"] = to_json(it.K);
    e["P"] = to_json(it.P.dense());
    its.push_back(std::move(e));
  }
  j["iterations"] = std::move(its);
  return j;
}

Json cost_json(const CostSynthesisResult& c) {
  Json j;
  j["mode"] = "cost";
  j["gamma"] = c.gamma;
  j["x0"] = to_json(c.x0);
  j["K_hat"] = to_json(c.K_hat);
  j["X"] = to_json(c.X.dense());
  j["mu"] = c.mu;
  j["guaranteed_bound"] = c.guaranteed_bound;
  j["achieved_cost"] = c.achieved_cost;
  j["optimal_cost"] = c.optimal_cost;
  j["rho_closed_loop"] = c.rho_closed_loop;
  Json v;
  v["schur_margin"] = 1.0 - c.rho_closed_loop;
  v["achieved_minus_optimal"] = c.achieved_cost - c.optimal_cost;
  v["bound_minus_achieved"] = c.guaranteed_bound - c.achieved_cost;
  v["mu_minus_bound"] = c.mu - c.guaranteed_bound;
  j["verification"] = std::move(v);
  j["solver"] = solver_json(c.solver);
  return j;
}

Json gain_json(const ProblemInstance& prob, const GainSynthesisResult& g,
               const std::optional<Vector>& x0) {
  Json j;
  j["mode"] = "gain";
  j["gamma"] = g.gamma;
  j["K_gamma"] = to_json(g.K_gamma);
  j["K_bar"] = to_json(g.K_bar);
  j["L_bar"] = to_json(g.L_bar.dense());
  j["mismatch_bound"] = g.mismatch_bound;
  j["mismatch_actual"] = g.mismatch_actual;
  j["rho_closed_loop"] = g.rho_closed_loop;
  j["rho_optimal_gain"] = linalg::spectral_radius(prob.closed_loop(g.K_gamma));
  j["box_warning"] = g.box_warning;
  Json v;
  v["schur_margin"] = 1.0 - g.rho_closed_loop;
  v["mismatch_margin"] = g.mismatch_bound - g.mismatch_actual;
  if (x0) v["relative_error"] = relative_error(prob, g.gamma, g.K_bar, *x0);
  j["verification"] = std::move(v);
  j["solver"] = solver_json(g.solver);
  return j;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const LoadedProblem lp = load_problem(o.problem);
  require_gamma(o.gamma, "--gamma");
  const CertificateReport r = analyze(lp.problem, o.gamma, true);
  if (r.error) throw Error(*r.error);
  const RiccatiSolution sol = solve_dare(lp.problem, o.gamma);
  const bool stable = r.rho_closed_loop < 1.0;
  Json j;
  j["problem"] = lp.name;
  j["gamma"] = r.gamma;
  j["rho_closed_loop"] = r.rho_closed_loop;
  j["stable"] = stable;
  j["cond9"] = condition_json(r.cond9);
  j["cond11"] = condition_json(r.cond11);
  j["cond16"] = condition_json(r.cond16);
  j["thm2"] = to_string(r.thm2);
  j["K_gamma"] = to_json(sol.K);
  j["P_gamma"] = to_json(sol.P.dense());
  out << j.dump(2) << "\n";
  return stable ? kOk : kUnstable;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const LoadedProblem lp = load_problem(o.problem);
  require_gamma(o.gamma_min, "--gamma-min");
  require_gamma(o.gamma_max, "--gamma-max");
  if (!(o.gamma_min < o.gamma_max)) throw InputError("--gamma-min must be below --gamma-max");
  if (o.steps < 2) throw InputError("--steps must be at least 2");
  require_out(o);
  OutputDir dir(o.out);
  const SweepResult r = sweep(lp.problem, linear_grid(o.gamma_min, o.gamma_max, o.steps),
                              sweep_options());
  check_rows(r);
  dir.write("sweep.csv", sweep_csv(r));
  dir.write("boundaries.csv", boundaries_csv(r));
  dir.write("rho.svg", rho_svg(r, "Closed-loop spectral radius, " + lp.name));
  Json params;
  params["problem"] = lp.name;
  params["gamma_min"] = o.gamma_min;
  params["gamma_max"] = o.gamma_max;
  params["steps"] = o.steps;
  dir.write_manifest("sweep", lp.hash, params);
  print_boundaries(r, out);
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const LoadedProblem lp = load_problem(o.problem);
  require_gamma(o.gamma, "--gamma");
  const std::optional<Vector> x0 = parse_x0(o.x0, lp.problem.states());
  if (o.mode == "cost" && !x0) throw InputError("--mode cost requires --x0");
  std::optional<OutputDir> dir;
  if (!o.out.empty()) dir.emplace(o.out);
  Json result = o.mode == "cost"
                    ? cost_json(synth_guaranteed_cost(lp.problem, o.gamma, *x0))
                    : gain_json(lp.problem, synth_gain_proximity(lp.problem, o.gamma), x0);
  result["problem"] = lp.name;
  if (dir) {
    dir->write("synth.json", result.dump(2) + "\n");
    Json params;
    params["problem"] = lp.name;
    params["mode"] = o.mode;
    params["gamma"] = o.gamma;
    if (x0) params["x0"] = to_json(*x0);
    dir->write_manifest("synth", lp.hash, params);
  }
  out << result.dump(2) << "\n";
  return kOk;
}

Matrix resolve_k0(const Options& o, const ProblemInstance& prob) {
  Matrix K0;
  if (o.k0 == "synth-cost") {
    const std::optional<Vector> x0 = parse_x0(o.x0, prob.states());
    if (!x0) throw InputError("--k0 synth-cost requires --x0");
    K0 = synth_guaranteed_cost(prob, o.gamma, *x0).K_hat;
  } else if (o.k0 == "synth-gain") {
    K0 = synth_gain_proximity(prob, o.gamma).K_bar;
  } else {
    K0 = parse_gain(read_text_file(o.k0));
  }
  if (K0.rows() != prob.inputs() || K0.cols() != prob.states()) {
    throw BadGainError("K0 is " + std::to_string(K0.rows()) + "x" + std::to_string(K0.cols()) +
                       ", expected " + std::to_string(prob.inputs()) + "x" +
                       std::to_string(prob.states()));
  }
  const double rho = linalg::spectral_radius(prob.closed_loop(K0));
  if (!(rho < 1.0)) {
    throw BadGainError("K0 does not stabilize A + B K0 (spectral radius " + fmt(rho) + ")");
  }
  return K0;
}

int cmd_spi(const Options& o, std::ostream& out) {
  const LoadedProblem lp = load_problem(o.problem);
  require_gamma(o.gamma, "--gamma");
  if (o.k0.empty()) throw InputError("--k0 is required");
  require_out(o);
  OutputDir dir(o.out);
  SpiConfig cfg;
  cfg.gamma = o.gamma;
  cfg.K0 = resolve_k0(o, lp.problem);
  cfg.alpha_grid_step = o.alpha_grid;
  cfg.alpha_scale = o.alpha_scale;
  cfg.epsilon_stop = o.eps;
  cfg.max_iterations = o.max_iterations;
  const SpiTrace t = spi_run(lp.problem, cfg);
  dir.write("spi.csv", spi_csv(t));
  dir.write("spi.json", spi_json(t).dump(2) + "\n");
  Json params;
  params["problem"] = lp.name;
  params["gamma"] = o.gamma;
  params["k0"] = o.k0;
  if (!o.x0.empty()) params["x0"] = o.x0;
  params["alpha_grid"] = o.alpha_grid;
  params["alpha_scale"] = o.alpha_scale;
  params["eps"] = o.eps;
  params["max_iterations"] = o.max_iterations;
  dir.write_manifest("spi", lp.hash, params);
  Json summary;
  summary["stop_reason"] = to_string(t.stop_reason);
  summary["improvement_steps"] = static_cast<int>(t.iterations.size()) - 1;
  summary["final_gap_frobenius"] = t.iterations.back().gap;
  out << summary.dump(2) << "\n";
  return kOk;
}

void reproduce_fig1(const ProblemInstance& prob, OutputDir& dir) {
  const SweepResult full = step("fig1: sweep over [0, 1]", [&] {
    SweepResult r = sweep(prob, linear_grid(0.0, 1.0, 1000), sweep_options());
    check_rows(r);
    return r;
  });
  dir.write("fig1.csv", sweep_csv(full));
  dir.write("fig1_boundaries.csv", boundaries_csv(full));
  dir.write("fig1.svg", rho_svg(full, "Closed-loop spectral radius, example1"));
  const SweepResult zoom = step("fig1: sweep over [0, 0.2]", [&] {
    SweepResult r = sweep(prob, linear_grid(0.0, 0.2, 201), sweep_options());
    check_rows(r);
    return r;
  });
  dir.write("fig1_zoom.csv", sweep_csv(zoom));
  dir.write("fig1_zoom.svg", rho_svg(zoom, "Closed-loop spectral radius, gamma in [0, 0.2]"));
}

void reproduce_fig2(const ProblemInstance& prob, OutputDir& dir) {
  const std::vector<double> grid = linear_grid(0.02, 1.0, 50);
  const Vector x0 = Vector::Ones(prob.states());
  std::vector<std::optional<CostSynthesisResult>> results(grid.size());
  parallel_for(grid.size(), default_workers(), [&](std::size_t i) {
    results[i] = step("fig2: guaranteed-cost synthesis at gamma " + fmt(grid[i]),
                      [&] { return synth_guaranteed_cost(prob, grid[i], x0); });
  });
  CsvWriter csv({"gamma", "J_achieved", "x0_Xinv_x0", "x0_P_x0", "mu"});
  std::vector<double> achieved, bound, optimal;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CostSynthesisResult& r = *results[i];
    csv.add_row({fmt(grid[i]), fmt(r.achieved_cost), fmt(r.guaranteed_bound),
                 fmt(r.optimal_cost), fmt(r.mu)});
    achieved.push_back(r.achieved_cost);
    bound.push_back(r.guaranteed_bound);
    optimal.push_back(r.optimal_cost);
  }
  dir.write("fig2.csv", csv.str());
  SvgPlot plot("Guaranteed-cost synthesis, x0 = [1, 1]", "gamma", "cost");
  plot.add_line(grid, bound, "firebrick", "x0' X^-1 x0");
  plot.add_line(grid, achieved, "steelblue", "J(x0, K_hat)");
  plot.add_line(grid, optimal, "darkgreen", "x0' P x0");
  dir.write("fig2.svg", plot.render());
}

SpiTrace example_spi(const ProblemInstance& prob, const std::string& fig) {
  SpiConfig cfg;
  cfg.gamma = 0.1;
  cfg.alpha_scale = 0.1;
  cfg.K0 = step(fig + ": guaranteed-cost synthesis of K0", [&] {
    return synth_guaranteed_cost(prob, 0.1, Vector::Ones(prob.states())).K_hat;
  });
  return step(fig + ": sPI run", [&] { return spi_run(prob, cfg); });
}

void reproduce_fig3(const SpiTrace& t, OutputDir& dir) {
  CsvWriter csv({"j", "real", "imag", "modulus"});
  std::vector<double> re, im;
  for (const auto& it : t.iterations) {
    for (const auto& ev : linalg::eigenvalues(problems::example1().closed_loop(it.K))) {
      csv.add_row({std::to_string(it.j), fmt(ev.real()), fmt(ev.imag()), fmt(std::abs(ev))});
      re.push_back(ev.real());
      im.push_back(ev.imag());
    }
  }
  dir.write("fig3.csv", csv.str());
  SvgPlot plot("Closed-loop eigenvalues along sPI, gamma = 0.1", "real", "imaginary");
  plot.add_unit_circle();
  plot.add_scatter(re, im, "steelblue");
  dir.write("fig3.svg", plot.render());
}

void reproduce_fig4(const SpiTrace& t, OutputDir& dir) {
  dir.write("fig4.csv", spi_csv(t));
  std::vector<double> j, gap;
  for (const auto& it : t.iterations) {
    j.push_back(it.j);
    gap.push_back(it.gap);
  }
  SvgPlot plot("Distance to the optimal value matrix, gamma = 0.1", "iteration j",
               "||P_j - P_gamma||_F");
  plot.add_line(j, gap, "steelblue", "");
  dir.write("fig4.svg", plot.render());
}

int cmd_reproduce(const Options& o, std::ostream& out) {
  require_out(o);
  OutputDir dir(o.out);
  const ProblemInstance prob = problems::example1();
  const bool all = o.figure == "all";
  if (all || o.figure == "fig1") reproduce_fig1(prob, dir);
  if (all || o.figure == "fig2") reproduce_fig2(prob, dir);
  if (all || o.figure == "fig3" || o.figure == "fig4") {
    const SpiTrace t = example_spi(prob, all ? "fig3" : o.figure);
    if (all || o.figure == "fig3") reproduce_fig3(t, dir);
    if (all || o.figure == "fig4") reproduce_fig4(t, dir);
  }
  Json params;
  params["problem"] = "example1";
  params["figure"] = o.figure;
  dir.write_manifest("reproduce", problem_hash(prob), params);
  for (const auto& f : dir.files()) out << f << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Discounted LQR stability certificates, gain synthesis and policy iteration",
               "dlqr");
  app.require_subcommand(1);

  auto add_problem = [&](CLI::App* sub) {
    sub->add_option("--problem", o.problem, "problem JSON file, or example1 / scalar")
        ->required();
  };
  auto add_gamma = [&](CLI::App* sub) {
    sub->add_option("--gamma", o.gamma, "discount factor in [0, 1]")->required();
  };

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "stability certificates at one gamma");
  add_problem(analyze_cmd);
  add_gamma(analyze_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "certificates over a gamma grid");
  add_problem(sweep_cmd);
  sweep_cmd->add_option("--gamma-min", o.gamma_min, "grid start")->capture_default_str();
  sweep_cmd->add_option("--gamma-max", o.gamma_max, "grid end")->capture_default_str();
  sweep_cmd->add_option("--steps", o.steps, "grid points")->capture_default_str();
  sweep_cmd->add_option("--out", o.out, "output directory");

  CLI::App* synth_cmd = app.add_subcommand("synth", "guaranteed-cost or gain-proximity synthesis");
  add_problem(synth_cmd);
  add_gamma(synth_cmd);
  synth_cmd->add_option("--mode", o.mode, "cost or gain")
      ->required()
      ->check(CLI::IsMember({"cost", "gain"}));
  synth_cmd->add_option("--x0", o.x0, "initial state, comma separated");
  synth_cmd->add_option("--out", o.out, "output directory");

  CLI::App* spi_cmd = app.add_subcommand("spi", "stability-preserving policy iteration");
  add_problem(spi_cmd);
  add_gamma(spi_cmd);
  spi_cmd->add_option("--k0", o.k0, "gain JSON file, synth-cost or synth-gain")->required();
  spi_cmd->add_option("--x0", o.x0, "initial state for --k0 synth-cost");
  spi_cmd->add_option("--alpha-grid", o.alpha_grid, "step of the alpha grid")
      ->capture_default_str();
  spi_cmd->add_option("--alpha-scale", o.alpha_scale, "fraction of the largest stable alpha")
      ->capture_default_str();
  spi_cmd->add_option("--eps", o.eps, "stop when the stable alpha falls below this")
      ->capture_default_str();
  spi_cmd->add_option("--max-iterations", o.max_iterations, "improvement step limit")
      ->capture_default_str();
  spi_cmd->add_option("--out", o.out, "output directory");

  CLI::App* reproduce_cmd = app.add_subcommand("reproduce", "regenerate figure data for example1");
  reproduce_cmd->add_option("figure", o.figure, "fig1, fig2, fig3, fig4 or all")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "all"}));
  reproduce_cmd->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(o, out);
    if (sweep_cmd->parsed()) return cmd_sweep(o, out);
    if (synth_cmd->parsed()) return cmd_synth(o, out);
    if (spi_cmd->parsed()) return cmd_spi(o, out);
    return cmd_reproduce(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace dlqr::cli
