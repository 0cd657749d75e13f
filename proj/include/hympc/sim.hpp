#pragma once

/**
 * @file
 * @brief Plant simulator for affine hybrid models.
 *
 * Flows are integrated by the dense-output Dormand-Prince 5(4) stepper from
 * Boost.Odeint. After each accepted step every armed guard (outgoing
 * transition whose input equals the latched discrete input) is tested for a
 * sign change; crossings are localized by bisection on the dense output and
 * the jump is applied before any further flow.
 */

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hympc/execution.hpp"
#include "hympc/model.hpp"

namespace hympc {

enum class SimulationFailure { ZenoSuspect, IntegrationFailure };

class SimulationError : public std::runtime_error
{
public:
  SimulationError(SimulationFailure kind, const std::string & what)
  : std::runtime_error(what), kind_(kind)
  {}

  SimulationFailure kind() const noexcept { return kind_; }

private:
  SimulationFailure kind_;
};

struct SimulatorState
{
  ModeId q;
  Vector x;
  double t = 0.0;
  std::optional<InputId> latch;
};

struct JumpEvent
{
  double t = 0.0;
  ModeId from;
  InputId input;
  ModeId to;
  Vector x_minus;
  Vector x_plus;
};

struct SimOptions
{
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  /// |g| at a localized event.
  double guard_tol = 1e-10;
  /// |g| below which a guard counts as reached.
  double touch_tol = 1e-12;
  /// Sample spacing of recorded trajectories.
  double record_dt = 1e-3;
  double min_step = 1e-14;
  long max_steps = 10'000'000;
};

/// Continuous input as a function of time and current mode.
using InputFunction = std::function<Vector(double, ModeId)>;

/// Recorded flow of one mode visit.
struct FlowRecord
{
  ModeId q;
  SampledFlow samples;
};

class Simulator
{
public:
  Simulator(const AffineHybridModel & model, SimulatorState state, SimOptions opts = {})
  : model_(&model), state_(std::move(state)), opts_(opts)
  {
    model.check_mode(state_.q);
    if (state_.x.size() != model.nx()) { throw ModelError("simulator: state dimension mismatch"); }
  }

  const SimulatorState & state() const { return state_; }
  SimulatorState & state() { return state_; }
  const SimOptions & options() const { return opts_; }

  /**
   * @brief Integrates until t_end with input u(t, q).
   *
   * When `record` is given, each mode visit appends to it (a new record per
   * jump).
   */
  std::vector<JumpEvent> advance(const InputFunction & u, double t_end, std::vector<FlowRecord> * record = nullptr)
  {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    std::vector<JumpEvent> events;
    const auto nx = static_cast<std::size_t>(model_->nx());

    auto to_vec = [&](const State & s) {
      Vector v(static_cast<Eigen::Index>(nx));
      for (std::size_t i = 0; i < nx; ++i) { v(static_cast<Eigen::Index>(i)) = s[i]; }
      return v;
    };
    auto to_state = [&](const Vector & v) { return State(v.data(), v.data() + v.size()); };

    auto push_sample = [&](double t, const Vector & x) {
      if (!record) { return; }
      const Vector uu = u(t, state_.q);
      auto & s = record->back().samples;
      // a repeated instant is kept only as the right limit of an input step
      if (!s.t.empty() && (t < s.t.back() || (t == s.t.back() && uu == s.u.back()))) { return; }
      s.t.push_back(t);
      s.x.push_back(x);
      s.u.push_back(uu);
      s.xdot.push_back(vector_field(*model_, state_.q, x, uu));
    };
    auto open_record = [&]() {
      if (record) { record->push_back({state_.q, {}}); }
      push_sample(state_.t, state_.x);
    };

    if (record && (record->empty() || record->back().q != state_.q)) {
      open_record();
    } else {
      push_sample(state_.t, state_.x);
    }

    double last_jump_time = std::numeric_limits<double>::quiet_NaN();
    auto fire = [&](std::size_t k, double t, const Vector & x_minus) {
      const auto & tr = model_->transition(k);
      if (t == last_jump_time) {
        throw SimulationError(SimulationFailure::ZenoSuspect, "second jump at the same instant t = " + std::to_string(t));
      }
      last_jump_time = t;
      JumpEvent ev{t, state_.q, tr.input, tr.target, x_minus, tr.Lx * x_minus + tr.Lc};
      state_.x = ev.x_plus;
      state_.q = tr.target;
      state_.t = t;
      events.push_back(ev);
      open_record();
    };

    // armed transition whose guard set already contains x
    auto immediate = [&](const Vector & x) -> std::optional<std::size_t> {
      for (std::size_t k : armed()) {
        if (in_guard_set(model_->transition(k), x, opts_.touch_tol)) { return k; }
      }
      return std::nullopt;
    };

    while (auto k = immediate(state_.x)) { fire(*k, state_.t, state_.x); }

    long steps = 0;
    while (state_.t < t_end) {
      const ModeId q = state_.q;
      auto rhs = [&](const State & s, State & ds, double t) {
        Vector xv = to_vec(s);
        const Vector f = vector_field(*model_, q, xv, u(t, q));
        for (std::size_t i = 0; i < nx; ++i) { ds[i] = f(static_cast<Eigen::Index>(i)); }
      };
      auto stepper = odeint::make_dense_output(opts_.abs_tol, opts_.rel_tol, odeint::runge_kutta_dopri5<State>());
      stepper.initialize(to_state(state_.x), state_.t, std::min(1e-3, t_end - state_.t));
      const std::vector<std::size_t> guards = armed();
      auto guard_value = [&](std::size_t k, const Vector & x) {
        const auto & tr = model_->transition(k);
        return tr.Mx.dot(x) + tr.Mc;
      };
      std::vector<double> g_prev;
      for (std::size_t k : guards) { g_prev.push_back(guard_value(k, state_.x)); }
      double next_record = state_.t + opts_.record_dt;

      bool jumped = false;
      while (!jumped) {
        if (++steps > opts_.max_steps) { throw SimulationError(SimulationFailure::IntegrationFailure, "step budget exhausted"); }
        const auto [t0, t1_raw] = stepper.do_step(rhs);
        if (!(stepper.current_time_step() >= opts_.min_step) || !std::isfinite(t1_raw)) {
          throw SimulationError(SimulationFailure::IntegrationFailure, "step size underflow");
        }
        const double t1 = std::min(t1_raw, t_end);
        State buf(nx);
        auto state_at = [&](double t) {
          stepper.calc_state(t, buf);
          return to_vec(buf);
        };
        const Vector x1 = state_at(t1);

        // earliest crossing among armed guards
        double t_event = std::numeric_limits<double>::infinity();
        std::size_t k_event = 0;
        Vector x_event;
        for (std::size_t j = 0; j < guards.size(); ++j) {
          const double g1 = guard_value(guards[j], x1);
          if (g_prev[j] > opts_.touch_tol && g1 <= opts_.touch_tol) {
            double a = t0, b = t1;
            Vector xb = x1;
            double gb = g1;
            for (int it = 0; it < 200 && std::abs(gb) > opts_.guard_tol && b - a > 1e-15; ++it) {
              const double m = 0.5 * (a + b);
              const Vector xm = state_at(m);
              const double gm = guard_value(guards[j], xm);
              if (gm > opts_.touch_tol) {
                a = m;
              } else {
                b = m;
                xb = xm;
                gb = gm;
              }
            }
            const auto & tr = model_->transition(guards[j]);
            const bool allowed = !tr.extra_guard || tr.extra_guard->contains(xb, opts_.touch_tol);
            if (allowed && b < t_event) {
              t_event = b;
              k_event = guards[j];
              x_event = xb;
            }
          }
          g_prev[j] = g1;
        }

        const double t_stop = std::min(t_event, t1);
        while (record && next_record < t_stop) {
          push_sample(next_record, state_at(next_record));
          next_record += opts_.record_dt;
        }
        if (std::isfinite(t_event)) {
          push_sample(t_event, x_event);
          state_.t = t_event;
          state_.x = x_event;
          fire(k_event, t_event, x_event);
          while (auto k = immediate(state_.x)) { fire(*k, state_.t, state_.x); }
          jumped = true;
        } else if (t1_raw >= t_end) {
          state_.t = t_end;
          state_.x = x1;
          push_sample(t_end, x1);
          break;
        }
      }
      if (!jumped) { break; }
    }
    return events;
  }

private:
  std::vector<std::size_t> armed() const
  {
    std::vector<std::size_t> out;
    if (!state_.latch) { return out; }
    for (std::size_t k = 0; k < model_->transitions().size(); ++k) {
      const auto & tr = model_->transitions()[k];
      if (tr.source == state_.q && tr.input == *state_.latch) { out.push_back(k); }
    }
    return out;
  }

  const AffineHybridModel * model_;
  SimulatorState state_;
  SimOptions opts_;
};

/// One zero-order-hold step of length dt.
inline std::pair<SimulatorState, std::vector<JumpEvent>> step(
  const AffineHybridModel & model, const SimulatorState & state, const Vector & u, double dt, const SimOptions & opts = {})
{
  if (!(dt > 0.0)) { throw std::invalid_argument("step: dt must be positive"); }
  if (u.size() != model.nu()) { throw ModelError("step: input dimension mismatch"); }
  Simulator sim(model, state, opts);
  auto events = sim.advance([&](double, ModeId) { return u; }, state.t + dt);
  return {sim.state(), std::move(events)};
}

struct InputSchedule
{
  InputFunction u;
  std::function<std::optional<InputId>(double)> latch;
  /// Interval at which the latch is re-read.
  double latch_period = 1e-2;
};

/// Assembles a sampled execution from per-visit flow records and jump events.
inline Execution execution_from_records(
  const std::vector<FlowRecord> & records, const std::vector<JumpEvent> & events, double t_begin, double t_end)
{
  if (records.empty()) { throw ModelError("no flow records"); }
  std::vector<double> times{t_begin};
  std::vector<ModeId> modes;
  std::vector<InputId> inputs;
  std::vector<TrajectorySegment> segs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    modes.push_back(records[i].q);
    SampledFlow s = records[i].samples;
    segs.emplace_back(records[i].q, std::move(s));
    if (i + 1 < records.size()) {
      times.push_back(events.at(i).t);
      inputs.push_back(events.at(i).input);
    }
  }
  times.push_back(t_end);
  const bool degenerate = t_end == t_begin;
  return Execution(std::move(times), std::move(modes), std::move(inputs), std::move(segs), degenerate);
}

/**
 * @brief Runs the plant from (q0, x0) at t = 0 under an input schedule and
 * returns the sampled execution. T = 0 yields a single-point trace flagged
 * degenerate.
 */
inline Execution simulate(
  const AffineHybridModel & model, const Vector & x0, ModeId q0, const InputSchedule & schedule, double T,
  const SimOptions & opts = {})
{
  if (!(T >= 0.0)) { throw std::invalid_argument("simulate: T must be non-negative"); }
  Simulator sim(model, SimulatorState{q0, x0, 0.0, schedule.latch ? schedule.latch(0.0) : std::nullopt}, opts);
  std::vector<FlowRecord> records;
  std::vector<JumpEvent> events;
  if (T == 0.0) {
    records.push_back({q0, {}});
    SampledFlow & s = records.back().samples;
    const Vector u0 = schedule.u(0.0, q0);
    s.t = {0.0};
    s.x = {x0};
    s.u = {u0};
    s.xdot = {vector_field(model, q0, x0, u0)};
    return execution_from_records(records, events, 0.0, 0.0);
  }
  const auto chunks = static_cast<long>(std::ceil(T / schedule.latch_period - 1e-9));
  for (long c = 0; c < chunks; ++c) {
    const double t_begin = c * schedule.latch_period;
    const double t_next = c + 1 == chunks ? T : (c + 1) * schedule.latch_period;
    if (schedule.latch) { sim.state().latch = schedule.latch(t_begin); }
    auto ev = sim.advance(schedule.u, t_next, &records);
    events.insert(events.end(), ev.begin(), ev.end());
  }
  return execution_from_records(records, events, 0.0, T);
}

}  // namespace hympc
