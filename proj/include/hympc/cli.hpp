#pragma once

/**
 * @file
 * @brief `hymppc` command-line front end, callable in-process.
 *
 * Exit codes: 0 ok, 1 validation or solve-quality failure, 2 usage or I/O,
 * 3 infeasible candidate.
 */

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hympc/hmp_solver.hpp"
#include "hympc/io.hpp"
#include "hympc/mpc.hpp"
#include "hympc/sim.hpp"

namespace hympc::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInfeasible = 3 };

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct RunConfig
{
  std::string model_path;
  double horizon = 1.0;
  double dt = 0.1;
  int steps = 0;
  Vector x0;
  ModeId q0{0};
  std::size_t max_depth = 3;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::optional<double> target_radius;
  SolverOptions solver;
  std::string out_dir = ".";

  void check() const
  {
    if (!(horizon > 0.0)) { throw UsageError("horizon must be positive"); }
    if (!(dt > 0.0)) { throw UsageError("dt must be positive"); }
    if (steps < 0) { throw UsageError("steps must be non-negative"); }
    if (max_depth < 1) { throw UsageError("max-depth must be at least 1"); }
    if (max_iterations < 1) { throw UsageError("max-iterations must be at least 1"); }
    if (jobs < 1) { throw UsageError("jobs must be at least 1"); }
  }

  MpcOptions mpc_options() const
  {
    MpcOptions o;
    o.horizon = horizon;
    o.max_depth = max_depth;
    o.max_iterations = max_iterations;
    o.jobs = jobs;
    o.solver = solver;
    o.solver.seed = seed;
    return o;
  }
};

/// Defaults from the optional `run` object of the model file.
inline RunConfig run_config_from_json(const Json & root, const AffineHybridModel & model)
{
  RunConfig rc;
  rc.x0 = Vector::Zero(model.nx());
  if (!root.contains("run")) { return rc; }
  const Json & r = root.at("run");
  if (!r.is_object()) { throw ConfigError("run: expected an object"); }
  auto num = [&](const char * key, double & dst) {
    if (r.contains(key)) { dst = detail::json_number(r.at(key), std::string("run.") + key); }
  };
  num("horizon", rc.horizon);
  num("dt", rc.dt);
  double tmp = 0.0;
  if (r.contains("steps")) { num("steps", tmp); rc.steps = static_cast<int>(tmp); }
  if (r.contains("max_depth")) { num("max_depth", tmp); rc.max_depth = static_cast<std::size_t>(std::max(0.0, tmp)); }
  if (r.contains("max_iterations")) { num("max_iterations", tmp); rc.max_iterations = static_cast<int>(tmp); }
  if (r.contains("seed")) {
    if (!r.at("seed").is_number_unsigned()) { throw ConfigError("run.seed: expected a non-negative integer"); }
    rc.seed = r.at("seed").get<std::uint64_t>();
  }
  if (r.contains("jobs")) { num("jobs", tmp); rc.jobs = static_cast<int>(tmp); }
  if (r.contains("target_radius")) { num("target_radius", tmp); rc.target_radius = tmp; }
  if (r.contains("x0")) {
    rc.x0 = detail::json_vector(r.at("x0"), "run.x0");
    if (rc.x0.size() != model.nx()) { throw ConfigError("run.x0: expected " + std::to_string(model.nx()) + " entries"); }
  }
  if (r.contains("q0")) {
    const auto q = model.mode_id(r.at("q0").get<std::string>());
    if (!q) { throw ConfigError("run.q0: unknown mode"); }
    rc.q0 = *q;
  }
  if (r.contains("tolerances")) {
    const Json & t = r.at("tolerances");
    auto tol = [&](const char * key, double & dst) {
      if (t.contains(key)) { dst = detail::json_number(t.at(key), std::string("run.tolerances.") + key); }
    };
    tol("newton_tol", rc.solver.newton_tol);
    tol("step_tol", rc.solver.step_tol);
    tol("fd_step", rc.solver.fd_step);
    tol("pivot_tol", rc.solver.pivot_tol);
    tol("max_condition", rc.solver.max_condition);
    if (t.contains("max_newton_iterations")) {
      tol("max_newton_iterations", tmp);
      rc.solver.max_newton_iterations = static_cast<int>(tmp);
    }
    if (t.contains("perturbed_starts")) {
      tol("perturbed_starts", tmp);
      rc.solver.perturbed_starts = static_cast<int>(tmp);
    }
  }
  if (r.contains("final_switch")) {
    const auto v = r.at("final_switch").get<std::string>();
    if (v == "vanishing") {
      rc.solver.final_switch = FinalSwitchCondition::VanishingHamiltonian;
    } else if (v == "continuity") {
      rc.solver.final_switch = FinalSwitchCondition::HamiltonianContinuity;
    } else {
      throw ConfigError("run.final_switch: expected \"vanishing\" or \"continuity\"");
    }
  }
  return rc;
}

inline std::vector<std::string> split_list(const std::string & s)
{
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) { out.push_back(item); }
  if (!s.empty() && s.back() == ',') { out.emplace_back(); }
  return out;
}

inline Vector parse_vector_flag(const std::string & s, int n, const std::string & flag)
{
  const auto items = split_list(s);
  if (static_cast<int>(items.size()) != n) {
    throw UsageError(flag + ": expected " + std::to_string(n) + " comma-separated numbers");
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    std::size_t used = 0;
    try {
      v(i) = std::stod(items[i], &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != items[i].size() || !std::isfinite(v(i))) {
      throw UsageError(flag + ": malformed number '" + items[i] + "'");
    }
  }
  return v;
}

inline std::vector<ModeId> parse_mode_sequence(const AffineHybridModel & model, const std::string & s)
{
  std::vector<ModeId> q;
  for (const auto & tok : split_list(s)) {
    const auto id = model.mode_id(tok);
    if (!id) { throw UsageError("--seq: unknown mode '" + tok + "'"); }
    q.push_back(*id);
  }
  if (q.empty()) { throw UsageError("--seq: empty sequence"); }
  return q;
}

/// Explicit input names, or the unique declared input for each consecutive mode pair.
inline std::vector<InputId> parse_input_sequence(
  const AffineHybridModel & model, const std::vector<ModeId> & q, const std::optional<std::string> & s)
{
  std::vector<InputId> sigma;
  if (s) {
    for (const auto & tok : split_list(*s)) {
      const auto id = model.input_id(tok);
      if (!id) { throw UsageError("--inputs: unknown input '" + tok + "'"); }
      sigma.push_back(*id);
    }
    if (sigma.size() + 1 != q.size()) {
      throw UsageError("--inputs: expected " + std::to_string(q.size() - 1) + " inputs for the mode sequence");
    }
  } else {
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      std::vector<InputId> options;
      for (const auto & [in, to] : transitions_from(model, q[i])) {
        if (to == q[i + 1]) { options.push_back(in); }
      }
      if (options.size() != 1) {
        throw UsageError("--inputs: cannot infer the input for " + model.mode_name(q[i]) + " -> " + model.mode_name(q[i + 1]));
      }
      sigma.push_back(options.front());
    }
  }
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    try {
      (void)model.find_transition(q[i], sigma[i], q[i + 1]);
    } catch (const ModelError & e) {
      throw UsageError(std::string("sequence: ") + e.what());
    }
  }
  return sigma;
}

inline std::filesystem::path prepare_out_dir(const std::string & dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) { throw IoError("cannot create output directory '" + dir + "'"); }
  return std::filesystem::path(dir);
}

inline void print_report(std::ostream & out, const ValidationReport & rep)
{
  for (const auto & e : rep.errors) { out << "error: " << e << '\n'; }
  for (const auto & w : rep.warnings) { out << "warning: " << w << '\n'; }
  out << rep.errors.size() << " error(s), " << rep.warnings.size() << " warning(s)\n";
}

inline Json diagnostics_json(const SolverDiagnostics & d, bool with_starts)
{
  Json j{
    {"newton_iterations", d.newton_iterations},
    {"residual_norm", d.residual_norm},
    {"condition_estimate", d.condition_estimate},
    {"starts_tried", d.starts_tried},
    {"starts_converged", d.starts_converged}};
  if (with_starts) {
    Json starts = Json::array();
    for (const auto & s : d.starts) {
      starts.push_back(
        {{"initial_times", s.initial_times},
         {"final_times", s.final_times},
         {"iterations", s.iterations},
         {"residual", std::isfinite(s.residual) ? Json(s.residual) : Json(nullptr)},
         {"converged", s.converged},
         {"cost", std::isfinite(s.cost) ? Json(s.cost) : Json(nullptr)},
         {"failure", s.failure}});
    }
    j["starts"] = starts;
  }
  return j;
}

inline Json residuals_json(const MaximumPrincipleResiduals & r)
{
  return Json{
    {"costate_flow", r.costate_flow}, {"costate_jump", r.costate_jump}, {"terminal", r.terminal},
    {"guard", r.guard},               {"reset", r.reset},               {"hamiltonian_gap", r.hamiltonian_gap}};
}

/// Residuals within the tolerances a returned solution is expected to meet.
inline bool residuals_acceptable(const MaximumPrincipleResiduals & r)
{
  return r.costate_flow <= 1e-6 && r.costate_jump <= 1e-9 && r.terminal <= 1e-9 && r.guard <= 1e-9 &&
         r.reset <= 1e-9 && r.hamiltonian_gap <= 1e-8;
}

inline std::string sequence_text(const AffineHybridModel & model, const std::vector<ModeId> & q, const std::vector<InputId> & s)
{
  std::string t = model.mode_name(q.front());
  for (std::size_t i = 0; i < s.size(); ++i) { t += " -" + model.input_name(s[i]) + "-> " + model.mode_name(q[i + 1]); }
  return t;
}

/// Writes the closed-loop trace `step,t_wall,q,x_*,u_*,sigma_ap,J,iterations,solve_ms`.
inline void write_trace_csv(std::ostream & out, const AffineHybridModel & model, const ClosedLoopTrace & trace, bool timing)
{
  out << "step,t_wall,q";
  for (int i = 1; i <= model.nx(); ++i) { out << ",x_" << i; }
  for (int i = 1; i <= model.nu(); ++i) { out << ",u_" << i; }
  out << ",sigma_ap,J,iterations,solve_ms\n";
  for (const auto & r : trace.steps) {
    out << r.step << ',' << format_double(r.t) << ',' << model.mode_name(r.q);
    for (Eigen::Index i = 0; i < r.x.size(); ++i) { out << ',' << format_double(r.x(i)); }
    for (Eigen::Index i = 0; i < r.u.size(); ++i) { out << ',' << format_double(r.u(i)); }
    out << ',' << (r.sigma_ap ? model.input_name(*r.sigma_ap) : std::string()) << ',' << format_double(r.J) << ','
        << r.iterations << ',';
    if (timing) { out << format_double(r.solve_ms); }
    out << '\n';
  }
}

struct BenchOptions
{
  std::optional<std::string> model_path;
  bool verbose = false;
};

/// Runs the quantitative acceptance checks and prints a table; returns an exit code.
using BenchRunner = std::function<int(const BenchOptions &, std::ostream &)>;

namespace detail {

struct Flags
{
  std::string config;
  std::optional<std::string> seq, inputs, x0, q0, out;
  std::optional<double> horizon, dt;
  std::optional<int> steps, jobs, max_iterations;
  std::optional<std::size_t> max_depth;
  std::optional<std::uint64_t> seed;
  bool free_final = false, strict = false, verbose = false, timing = false;
};

inline RunConfig resolve(const Json & root, const AffineHybridModel & model, const Flags & f)
{
  RunConfig rc = run_config_from_json(root, model);
  rc.model_path = f.config;
  if (f.horizon) { rc.horizon = *f.horizon; }
  if (f.dt) { rc.dt = *f.dt; }
  if (f.steps) { rc.steps = *f.steps; }
  if (f.jobs) { rc.jobs = *f.jobs; }
  if (f.max_iterations) { rc.max_iterations = *f.max_iterations; }
  if (f.max_depth) { rc.max_depth = *f.max_depth; }
  if (f.seed) { rc.seed = *f.seed; }
  if (f.x0) { rc.x0 = parse_vector_flag(*f.x0, model.nx(), "--x0"); }
  if (f.q0) {
    const auto q = model.mode_id(*f.q0);
    if (!q) { throw UsageError("--q0: unknown mode '" + *f.q0 + "'"); }
    rc.q0 = *q;
  }
  if (f.out) { rc.out_dir = *f.out; }
  rc.check();
  return rc;
}

inline int cmd_validate(const Flags & f, std::ostream & out)
{
  const AffineHybridModel model = load_model(f.config);
  const ValidationReport rep = validate(model);
  print_report(out, rep);
  if (!rep.ok()) { return kFailure; }
  if (f.strict && !rep.warnings.empty()) { return kFailure; }
  return kOk;
}

inline int cmd_solve(const Flags & f, std::ostream & out, std::ostream & err)
{
  const Json root = read_json_file(f.config);
  const AffineHybridModel model = parse_model(root);
  const RunConfig rc = resolve(root, model, f);
  if (!f.seq) { throw UsageError("solve: --seq is required"); }
  const auto q = parse_mode_sequence(model, *f.seq);
  const auto sigma = parse_input_sequence(model, q, f.inputs);
  if (f.free_final && q.size() < 2) { throw UsageError("--free-final needs a sequence with at least one jump"); }

  const ValidationReport rep = validate(model);
  if (!rep.ok()) {
    print_report(err, rep);
    return kFailure;
  }
  if (auto why = check_initial_state(model, q.front(), rc.x0)) { err << "warning: " << *why << '\n'; }

  SolverOptions opts = rc.solver;
  opts.seed = rc.seed;
  opts.guess_horizon = rc.horizon;
  SolverSolution sol;
  try {
    if (f.free_final) {
      sol = solve_jump_times(model, q, sigma, rc.x0, FreeFinal{}, opts);
    } else {
      sol = solve_jump_times(model, q, sigma, rc.x0, FixedHorizon{rc.horizon}, opts);
    }
  } catch (const SolveError & e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  }
  const MaximumPrincipleResiduals res = maximum_principle_residuals(model, sol, opts);

  out << "sequence: " << sequence_text(model, q, sigma) << '\n';
  if (f.free_final) {
    out << "J_m = " << format_double(sol.cost.Jm) << '\n';
  } else {
    out << "J = " << format_double(sol.cost.J) << '\n';
  }
  out << "jump times:";
  for (std::size_t i = 0; i < sol.jump_times.size(); ++i) { out << " t" << (i + 1) << '=' << format_double(sol.jump_times[i]); }
  if (sol.jump_times.empty()) { out << " none"; }
  out << '\n';
  out << "final time: " << format_double(sol.final_time) << '\n';
  out << "u0: ";
  for (Eigen::Index i = 0; i < sol.u0.size(); ++i) { out << (i ? "," : "") << format_double(sol.u0(i)); }
  out << '\n';
  out << "residuals: costate_flow=" << res.costate_flow << " costate_jump=" << res.costate_jump
      << " terminal=" << res.terminal << " guard=" << res.guard << " reset=" << res.reset
      << " hamiltonian_gap=" << res.hamiltonian_gap << '\n';

  const auto dir = prepare_out_dir(rc.out_dir);
  std::ostringstream csv;
  write_execution_csv(csv, model, sol.execution);
  write_text_file((dir / "solve_trace.csv").string(), csv.str());
  Json summary = execution_summary(model, sol.execution, sol.cost);
  summary["variant"] = f.free_final ? "free_final" : "fixed_horizon";
  if (!f.free_final) { summary["horizon"] = rc.horizon; }
  summary["x0"] = to_json(rc.x0);
  summary["u0"] = to_json(sol.u0);
  summary["seed"] = rc.seed;
  summary["diagnostics"] = diagnostics_json(sol.diagnostics, f.verbose);
  summary["residuals"] = residuals_json(res);
  write_text_file((dir / "solve_summary.json").string(), summary.dump(2) + "\n");

  if (!residuals_acceptable(res)) {
    err << "solution residuals exceed tolerance\n";
    return kFailure;
  }
  return kOk;
}

inline Json candidates_json(const AffineHybridModel & model, const std::vector<ScoredCandidate> & cands)
{
  Json arr = Json::array();
  for (const auto & c : cands) {
    Json qj = Json::array(), sj = Json::array();
    for (ModeId q : c.node.q) { qj.push_back(model.mode_name(q)); }
    for (InputId s : c.node.sigma) { sj.push_back(model.input_name(s)); }
    Json e{{"iteration", c.iteration}, {"complete", c.node.complete}, {"q_seq", qj}, {"sigma_seq", sj}, {"feasible", c.feasible}};
    if (c.feasible) {
      e["J"] = c.node.J;
      e["u0"] = to_json(c.node.u0);
    } else {
      e["failure"] = c.failure;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

inline int cmd_mpc(const Flags & f, std::ostream & out, std::ostream & err)
{
  const Json root = read_json_file(f.config);
  const AffineHybridModel model = parse_model(root);
  const RunConfig rc = resolve(root, model, f);
  const ValidationReport rep = validate(model);
  if (!rep.ok()) {
    print_report(err, rep);
    return kFailure;
  }
  if (auto why = check_initial_state(model, rc.q0, rc.x0)) { err << "warning: " << *why << '\n'; }
  const auto dir = prepare_out_dir(rc.out_dir);

  ClosedLoopTrace trace;
  try {
    trace = closed_loop_run(model, rc.x0, rc.q0, rc.mpc_options(), rc.dt, rc.steps);
  } catch (const MpcError & e) {
    err << "mpc failed (" << to_string(e.kind()) << ") at step " << e.step() << ": " << e.what() << '\n';
    return kInfeasible;
  } catch (const SimulationError & e) {
    err << "plant simulation failed: " << e.what() << '\n';
    return kFailure;
  }

  std::ostringstream csv;
  write_trace_csv(csv, model, trace, f.timing);
  write_text_file((dir / "mpc_trace.csv").string(), csv.str());
  std::ostringstream plant_csv;
  write_execution_csv(plant_csv, model, trace.plant);
  write_text_file((dir / "mpc_plant.csv").string(), plant_csv.str());

  const double h_min = minimum_jump_cost(model);
  int max_iter = 0;
  std::uint64_t max_bound = 0;
  bool bound_ok = true;
  for (const auto & r : trace.steps) {
    max_iter = std::max(max_iter, r.iterations);
    if (h_min > 0.0 && std::isfinite(h_min)) {
      const auto b = iteration_bound(r.J, h_min, model.mode_count(), model.input_count());
      max_bound = std::max(max_bound, b);
      bound_ok = bound_ok && static_cast<std::uint64_t>(r.iterations) <= b;
    }
  }
  const auto & fs = trace.final_state;
  const Vector & xbar = model.mode_cost(fs.q).xbar;
  const double dist = (fs.x - xbar).norm();

  out << "steps: " << trace.steps.size() << '\n';
  out << "final mode: " << model.mode_name(fs.q) << '\n';
  out << "final state:";
  for (Eigen::Index i = 0; i < fs.x.size(); ++i) { out << ' ' << format_double(fs.x(i)); }
  out << '\n';
  out << "distance to target: " << format_double(dist);
  if (rc.target_radius) { out << (dist <= *rc.target_radius ? " (within " : " (outside ") << *rc.target_radius << ")"; }
  out << '\n';
  out << "realized cost: " << format_double(trace.cost.J) << '\n';
  out << "max iterations: " << max_iter;
  if (h_min > 0.0 && std::isfinite(h_min)) { out << " (bound " << max_bound << ")"; }
  out << '\n';

  Json summary;
  summary["steps"] = trace.steps.size();
  summary["dt"] = rc.dt;
  summary["horizon"] = rc.horizon;
  summary["seed"] = rc.seed;
  summary["max_depth"] = rc.max_depth;
  summary["final_mode"] = model.mode_name(fs.q);
  summary["final_state"] = to_json(fs.x);
  summary["distance_to_target"] = dist;
  if (rc.target_radius) { summary["target_reached"] = dist <= *rc.target_radius; }
  summary["cost"] = to_json(trace.cost);
  summary["max_iterations_observed"] = max_iter;
  if (h_min > 0.0 && std::isfinite(h_min)) {
    summary["max_iteration_bound"] = max_bound;
    summary["iteration_bound_respected"] = bound_ok;
  }
  Json jumps = Json::array();
  for (std::size_t i = 1; i < trace.plant.size(); ++i) {
    jumps.push_back(
      {{"t", trace.plant.times()[i]},
       {"from", model.mode_name(trace.plant.modes()[i - 1])},
       {"input", model.input_name(trace.plant.inputs()[i - 1])},
       {"to", model.mode_name(trace.plant.modes()[i])}});
  }
  summary["jumps"] = jumps;
  if (f.verbose) {
    Json per_step = Json::array();
    for (const auto & r : trace.steps) {
      per_step.push_back({{"step", r.step}, {"accrued", r.accrued}, {"candidates", candidates_json(model, r.candidates)}});
    }
    summary["per_step"] = per_step;
  }
  write_text_file((dir / "mpc_summary.json").string(), summary.dump(2) + "\n");
  if (f.strict && rc.target_radius && dist > *rc.target_radius) { return kFailure; }
  return kOk;
}

}  // namespace detail

/**
 * @brief Entry point. `args` excludes the program name. `bench` is invoked for
 * the `bench` subcommand; without one the subcommand reports a usage error.
 */
inline int run_cli(
  const std::vector<std::string> & args, std::ostream & out, std::ostream & err, const BenchRunner & bench = {})
{
  CLI::App app{"Continuous-time hybrid MPC for affine hybrid systems", "hymppc"};
  app.require_subcommand(1);
  detail::Flags f;

  auto add_config = [&](CLI::App * sub) {
    sub->add_option("config", f.config, "model/cost JSON file")->required();
  };
  auto add_run = [&](CLI::App * sub) {
    sub->add_option("--horizon", f.horizon, "prediction horizon T_h (s)");
    sub->add_option("--x0", f.x0, "initial state, comma-separated");
    sub->add_option("--seed", f.seed, "multistart seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_flag("--verbose", f.verbose, "include per-start / per-candidate logs in the JSON summary");
  };

  auto * validate_cmd = app.add_subcommand("validate", "check a model file");
  add_config(validate_cmd);
  validate_cmd->add_flag("--strict", f.strict, "treat warnings as failures");

  auto * solve_cmd = app.add_subcommand("solve", "solve one discrete sequence");
  add_config(solve_cmd);
  add_run(solve_cmd);
  solve_cmd->add_option("--seq", f.seq, "mode sequence, e.g. q1,q2");
  solve_cmd->add_option("--inputs", f.inputs, "discrete input sequence, e.g. s1");
  solve_cmd->add_flag("--free-final", f.free_final, "free final time, no terminal cost");

  auto * mpc_cmd = app.add_subcommand("mpc", "closed-loop receding-horizon run");
  add_config(mpc_cmd);
  add_run(mpc_cmd);
  mpc_cmd->add_option("--dt", f.dt, "control period (s)");
  mpc_cmd->add_option("--steps", f.steps, "number of control steps");
  mpc_cmd->add_option("--q0", f.q0, "initial mode");
  mpc_cmd->add_option("--max-depth", f.max_depth, "longest mode sequence considered");
  mpc_cmd->add_option("--max-iterations", f.max_iterations, "branch-and-bound iteration cap");
  mpc_cmd->add_option("--jobs", f.jobs, "parallel candidate solves");
  mpc_cmd->add_flag("--strict", f.strict, "fail when the target radius is not reached");
  mpc_cmd->add_flag("--timing", f.timing, "fill the solve_ms column (output is then not reproducible)");

  BenchOptions bench_opts;
  auto * bench_cmd = app.add_subcommand("bench", "run the quantitative acceptance checks");
  bench_cmd->add_option("config", bench_opts.model_path, "benchmark model file");
  bench_cmd->add_flag("--verbose", bench_opts.verbose, "print check details");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError & e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*validate_cmd) { return detail::cmd_validate(f, out); }
    if (*solve_cmd) { return detail::cmd_solve(f, out, err); }
    if (*mpc_cmd) { return detail::cmd_mpc(f, out, err); }
    if (*bench_cmd) {
      if (!bench) {
        err << "bench: no acceptance checks linked into this binary\n";
        return kUsage;
      }
      return bench(bench_opts, out);
    }
  } catch (const UsageError & e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError & e) {
    err << "I/O error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError & e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ModelError & e) {
    err << "model error: " << e.what() << '\n';
    return kFailure;
  } catch (const Json::exception & e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace hympc::cli
