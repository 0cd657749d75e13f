#pragma once

/**
 * @file
 * @brief Branch-and-bound hybrid MPC over discrete sequences.
 *
 * The frontier holds two kinds of candidates:
 *  - expandable prefixes, scored by the free-final-time cost J_m (a lower bound
 *    on every fixed-horizon execution extending the prefix), and
 *  - completed sequences, scored by the fixed-horizon cost J.
 * The cheapest candidate is expanded until it is a completed one.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hympc/expm.hpp"
#include "hympc/hmp_solver.hpp"
#include "hympc/quadrature.hpp"
#include "hympc/sim.hpp"

namespace hympc {

enum class MpcFailure { Exhausted, IterationLimit };

inline const char * to_string(MpcFailure f)
{
  switch (f) {
    case MpcFailure::Exhausted: return "Exhausted";
    case MpcFailure::IterationLimit: return "IterationLimit";
  }
  return "?";
}

class MpcError : public std::runtime_error
{
public:
  MpcError(MpcFailure kind, const std::string & what, int step = -1)
  : std::runtime_error(what), kind_(kind), step_(step)
  {}
  MpcFailure kind() const noexcept { return kind_; }
  /// Closed-loop step at which the failure occurred, -1 outside a closed loop.
  int step() const noexcept { return step_; }

private:
  MpcFailure kind_;
  int step_;
};

struct CandidateNode
{
  /// false: expandable prefix scored by J_m; true: completed sequence scored by J.
  bool complete = false;
  std::vector<InputId> sigma;
  std::vector<ModeId> q;
  Vector u0;
  double J = 0.0;
};

/// Frontier order: cost, then shorter sequence, then (sigma, q) lexicographically, completed first.
inline bool candidate_before(const CandidateNode & a, const CandidateNode & b)
{
  if (a.J != b.J) { return a.J < b.J; }
  if (a.q.size() != b.q.size()) { return a.q.size() < b.q.size(); }
  if (a.sigma != b.sigma) { return a.sigma < b.sigma; }
  if (a.q != b.q) { return a.q < b.q; }
  return a.complete && !b.complete;
}

struct ScoredCandidate
{
  CandidateNode node;
  int iteration = 0;
  bool feasible = true;
  std::string failure;
};

struct MpcOptions
{
  double horizon = 1.0;
  std::size_t max_depth = 3;
  int max_iterations = 100;
  /// Worker threads for the per-iteration solves; results do not depend on it.
  int jobs = 1;
  SolverOptions solver;
};

struct MpcResult
{
  Vector u_ap;
  std::optional<InputId> sigma_ap;
  CandidateNode chosen;
  int iterations = 0;
  std::vector<ScoredCandidate> explored;
  SolverSolution solution;
};

/**
 * @brief Bound on the iteration count of the branch-and-bound loop:
 * (n_a^m - 1) / (n_a - 1) with m = floor(1 + J_opt / h_min) and
 * n_a = |Sigma| (|Q| - 1). Saturates at the largest uint64.
 */
inline std::uint64_t iteration_bound(double J_opt, double h_min, std::size_t n_modes, std::size_t n_inputs)
{
  if (!(h_min > 0.0)) { throw std::invalid_argument("iteration_bound: h_min must be positive"); }
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const double mf = std::floor(1.0 + J_opt / h_min);
  if (!(mf < 1e18)) { return kMax; }
  const auto m = static_cast<std::uint64_t>(std::max(0.0, mf));
  const std::uint64_t na = n_modes == 0 ? 0 : n_inputs * (n_modes - 1);
  if (na == 0) { return 1; }
  if (na == 1) { return m; }
  // 1 + n_a + ... + n_a^(m-1)
  std::uint64_t sum = 0, term = 1;
  for (std::uint64_t i = 0; i < m; ++i) {
    if (sum > kMax - term) { return kMax; }
    sum += term;
    if (i + 1 < m) {
      if (term > kMax / na) { return kMax; }
      term *= na;
    }
  }
  return sum;
}

/// Smallest jump cost over every transition and schedule entry.
inline double minimum_jump_cost(const AffineHybridModel & model)
{
  double h = std::numeric_limits<double>::infinity();
  for (const auto & jc : model.cost().jumps) { h = std::min(h, jc.minimum()); }
  return h;
}

namespace detail {

struct ScoreTask
{
  bool complete;
  std::vector<InputId> sigma;
  std::vector<ModeId> q;
};

struct ScoreOutcome
{
  std::optional<SequenceScore> score;
  std::string failure;
};

inline ScoreOutcome run_task(const AffineHybridModel & model, const Vector & x_ic, const ScoreTask & task, const MpcOptions & opts)
{
  ScoreOutcome out;
  try {
    if (task.complete) {
      out.score = jpmpa(model, x_ic, task.sigma, task.q, opts.horizon, opts.solver);
    } else {
      out.score = jpmpb(model, x_ic, task.sigma, task.q, opts.solver);
    }
  } catch (const SolveError & e) {
    out.failure = e.what();
  }
  return out;
}

}  // namespace detail

/**
 * @brief One MPC decision from (q_ic, x_ic).
 *
 * Throws MpcError(Exhausted) when the frontier runs empty or the root
 * completion is infeasible, MpcError(IterationLimit) when the loop exceeds
 * `max_iterations`.
 */
inline MpcResult mpc_step(const AffineHybridModel & model, ModeId q_ic, const Vector & x_ic, const MpcOptions & opts)
{
  model.check_mode(q_ic);
  MpcOptions local = opts;
  local.solver.guess_horizon = opts.horizon;

  struct Entry
  {
    CandidateNode node;
    std::optional<SolverSolution> solution;
  };
  std::vector<Entry> frontier;
  frontier.push_back({CandidateNode{false, {}, {q_ic}, Vector::Zero(model.nu()), 0.0}, std::nullopt});

  MpcResult result;
  auto best_index = [&]() {
    std::size_t b = 0;
    for (std::size_t i = 1; i < frontier.size(); ++i) {
      if (candidate_before(frontier[i].node, frontier[b].node)) { b = i; }
    }
    return b;
  };

  std::size_t best = 0;
  while (!frontier[best].node.complete) {
    if (result.iterations >= local.max_iterations) {
      throw MpcError(MpcFailure::IterationLimit, "iteration limit reached");
    }
    ++result.iterations;
    const CandidateNode parent = frontier[best].node;

    std::vector<detail::ScoreTask> tasks{{true, parent.sigma, parent.q}};
    if (parent.q.size() < local.max_depth) {
      for (const auto & [sigma, q_next] : transitions_from(model, parent.q.back())) {
        detail::ScoreTask t{false, parent.sigma, parent.q};
        t.sigma.push_back(sigma);
        t.q.push_back(q_next);
        tasks.push_back(std::move(t));
      }
    }

    std::vector<detail::ScoreOutcome> outcomes(tasks.size());
    if (local.jobs <= 1 || tasks.size() == 1) {
      for (std::size_t i = 0; i < tasks.size(); ++i) { outcomes[i] = detail::run_task(model, x_ic, tasks[i], local); }
    } else {
      const auto batch = static_cast<std::size_t>(local.jobs);
      for (std::size_t start = 0; start < tasks.size(); start += batch) {
        std::vector<std::future<detail::ScoreOutcome>> futs;
        for (std::size_t i = start; i < std::min(tasks.size(), start + batch); ++i) {
          futs.push_back(std::async(std::launch::async, [&, i]() { return detail::run_task(model, x_ic, tasks[i], local); }));
        }
        for (std::size_t i = 0; i < futs.size(); ++i) { outcomes[start + i] = futs[i].get(); }
      }
    }

    if (parent.q.size() == 1 && parent.sigma.empty() && !outcomes[0].score) {
      throw MpcError(MpcFailure::Exhausted, "root completion infeasible: " + outcomes[0].failure);
    }

    for (std::size_t i = 0; i < tasks.size(); ++i) {
      ScoredCandidate rec;
      rec.iteration = result.iterations;
      rec.node.complete = tasks[i].complete;
      rec.node.sigma = tasks[i].sigma;
      rec.node.q = tasks[i].q;
      if (outcomes[i].score) {
        rec.node.u0 = outcomes[i].score->u0;
        rec.node.J = outcomes[i].score->J;
        frontier.push_back({rec.node, std::move(outcomes[i].score->solution)});
      } else {
        rec.feasible = false;
        rec.failure = outcomes[i].failure;
        rec.node.J = std::numeric_limits<double>::infinity();
      }
      result.explored.push_back(std::move(rec));
    }

    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(best));
    if (frontier.empty()) { throw MpcError(MpcFailure::Exhausted, "every candidate is infeasible"); }
    best = best_index();
  }

  result.chosen = frontier[best].node;
  result.u_ap = result.chosen.u0;
  if (!result.chosen.sigma.empty()) { result.sigma_ap = result.chosen.sigma.front(); }
  result.solution = std::move(*frontier[best].solution);
  return result;
}

// ---------------------------------------------------------------------------
// Closed loop

struct ClosedLoopStep
{
  int step = 0;
  double t = 0.0;
  ModeId q;
  Vector x;
  Vector u;
  std::optional<InputId> sigma_ap;
  double J = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
  /// Stage plus jump cost accrued by the plant over this control period.
  double accrued = 0.0;
  std::vector<JumpEvent> events;
  std::vector<ScoredCandidate> candidates;
};

struct ClosedLoopTrace
{
  std::vector<ClosedLoopStep> steps;
  SimulatorState final_state;
  /// Realized cost from the per-step accounting, terminal cost taken at the final state.
  CostBreakdown cost;
  /// Sampled plant execution over [0, steps * dt].
  Execution plant;
};

/// Stage cost of the affine flow from (q, x) under constant u over [0, duration].
inline double constant_input_flow_cost(const AffineHybridModel & model, ModeId q, const Vector & x, const Vector & u, double duration)
{
  if (duration <= 0.0) { return 0.0; }
  const auto & m = model.mode(q);
  const Eigen::Index nx = model.nx();
  Matrix Aa = Matrix::Zero(nx + 1, nx + 1);
  Aa.topLeftCorner(nx, nx) = m.A;
  Aa.topRightCorner(nx, 1) = m.Bu * u + m.Bc;
  Vector z(nx + 1);
  z << x, 1.0;
  const auto f = [&](double s) {
    const Vector xs = (expm(Aa * s) * z).head(nx);
    return stage_cost(model, q, u, xs);
  };
  return integrate_gauss_adaptive(f, 0.0, duration, 1e-12).value;
}

/**
 * @brief Receding-horizon loop: every dt the plant state is handed to
 * mpc_step (time shifted to the origin), u_ap is held constant and sigma_ap
 * (when present) replaces the plant's input latch.
 */
inline ClosedLoopTrace closed_loop_run(
  const AffineHybridModel & model, const Vector & x0, ModeId q0, const MpcOptions & mpc, double dt, int steps,
  const SimOptions & sim_opts = {}, std::optional<InputId> initial_latch = std::nullopt)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("closed_loop_run: dt must be positive"); }
  if (steps < 0) { throw std::invalid_argument("closed_loop_run: steps must be non-negative"); }
  ClosedLoopTrace trace;
  Simulator plant(model, SimulatorState{q0, x0, 0.0, initial_latch}, sim_opts);
  std::vector<FlowRecord> records;
  std::vector<JumpEvent> all_events;
  records.push_back({q0, {}});

  for (int k = 0; k < steps; ++k) {
    ClosedLoopStep row;
    row.step = k;
    row.t = k * dt;
    row.q = plant.state().q;
    row.x = plant.state().x;
    const auto start = std::chrono::steady_clock::now();
    MpcResult res;
    try {
      res = mpc_step(model, row.q, row.x, mpc);
    } catch (const MpcError & e) {
      throw MpcError(e.kind(), "step " + std::to_string(k) + ": " + e.what(), k);
    }
    row.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    row.u = res.u_ap;
    row.sigma_ap = res.sigma_ap;
    row.J = res.chosen.J;
    row.iterations = res.iterations;
    row.candidates = std::move(res.explored);
    if (res.sigma_ap) { plant.state().latch = res.sigma_ap; }
    const Vector u = res.u_ap;
    row.events = plant.advance([u](double, ModeId) { return u; }, (k + 1) * dt, &records);
    double t_prev = row.t;
    ModeId q_prev = row.q;
    Vector x_prev = row.x;
    for (const auto & ev : row.events) {
      const double stage = constant_input_flow_cost(model, q_prev, x_prev, u, ev.t - t_prev);
      const auto tr = model.find_transition(ev.from, ev.input, ev.to);
      const double jump = model.jump_cost(tr).at(all_events.size() + 1);
      trace.cost.stage += stage;
      trace.cost.jumps += jump;
      row.accrued += stage + jump;
      all_events.push_back(ev);
      t_prev = ev.t;
      q_prev = ev.to;
      x_prev = ev.x_plus;
    }
    const double tail = constant_input_flow_cost(model, q_prev, x_prev, u, (k + 1) * dt - t_prev);
    trace.cost.stage += tail;
    row.accrued += tail;
    trace.steps.push_back(std::move(row));
  }
  trace.final_state = plant.state();
  trace.cost.terminal = terminal_cost(model, trace.final_state.q, trace.final_state.x);
  trace.cost.Jm = trace.cost.stage + trace.cost.jumps;
  trace.cost.J = trace.cost.Jm + trace.cost.terminal;
  if (records.front().samples.t.empty()) {
    SampledFlow & s = records.front().samples;
    const Vector u0 = Vector::Zero(model.nu());
    s.t = {0.0};
    s.x = {x0};
    s.u = {u0};
    s.xdot = {vector_field(model, q0, x0, u0)};
  }
  trace.plant = execution_from_records(records, all_events, 0.0, steps * dt);
  return trace;
}

}  // namespace hympc
