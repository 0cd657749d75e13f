#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hympc/expm.hpp"
#include "hympc/model.hpp"
#include "hympc/quadrature.hpp"

namespace hympc {

/**
 * @brief Segment known in closed form: the augmented vector z = (x; lambda; 1)
 * follows z(t) = exp((t - t_start) Ae) z0 and u = ubar - gain * lambda.
 */
struct ClosedFormFlow
{
  Matrix Ae;
  Vector z0;
  Matrix gain;
  Vector ubar;
};

/// Dense samples; x is Hermite-interpolated with xdot, u with three-point slopes.
struct SampledFlow
{
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> xdot;
  std::vector<Vector> u;
};

class TrajectorySegment
{
public:
  TrajectorySegment(ModeId mode, double t_start, double t_end, ClosedFormFlow flow)
  : mode_(mode), t_start_(t_start), t_end_(t_end), flow_(std::move(flow))
  {}

  TrajectorySegment(ModeId mode, SampledFlow flow)
  : mode_(mode), flow_(std::move(flow))
  {
    const auto & s = std::get<SampledFlow>(flow_);
    if (s.t.empty() || s.x.size() != s.t.size() || s.xdot.size() != s.t.size() || s.u.size() != s.t.size()) {
      throw ModelError("sampled segment: inconsistent sample arrays");
    }
    t_start_ = s.t.front();
    t_end_ = s.t.back();
  }

  ModeId mode() const { return mode_; }
  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  double duration() const { return t_end_ - t_start_; }
  bool closed_form() const { return std::holds_alternative<ClosedFormFlow>(flow_); }
  const ClosedFormFlow * as_closed_form() const { return std::get_if<ClosedFormFlow>(&flow_); }
  const SampledFlow * as_sampled() const { return std::get_if<SampledFlow>(&flow_); }

  /// Augmented vector (x; lambda; 1); closed-form segments only.
  Vector augmented(double t) const
  {
    const auto & cf = std::get<ClosedFormFlow>(flow_);
    const double dt = t - t_start_;
    if (dt == 0.0) { return cf.z0; }
    return expm(cf.Ae * dt) * cf.z0;
  }

  Vector state(double t) const
  {
    if (const auto * cf = as_closed_form()) { return augmented(t).head(cf->gain.cols()); }
    const auto & s = std::get<SampledFlow>(flow_);
    const auto [i, tau, h] = locate(s, t);
    if (h == 0.0) { return s.x[i]; }
    const double t2 = tau * tau, t3 = t2 * tau;
    return (2 * t3 - 3 * t2 + 1) * s.x[i] + (t3 - 2 * t2 + tau) * h * s.xdot[i] + (-2 * t3 + 3 * t2) * s.x[i + 1] +
           (t3 - t2) * h * s.xdot[i + 1];
  }

  std::optional<Vector> costate(double t) const
  {
    if (const auto * cf = as_closed_form()) {
      const auto nx = cf->gain.cols();
      return Vector(augmented(t).segment(nx, nx));
    }
    return std::nullopt;
  }

  Vector control(double t) const
  {
    if (const auto * cf = as_closed_form()) {
      const auto nx = cf->gain.cols();
      return cf->ubar - cf->gain * augmented(t).segment(nx, nx);
    }
    const auto & s = std::get<SampledFlow>(flow_);
    const auto [i, tau, h] = locate(s, t);
    if (h == 0.0) { return s.u[i]; }
    const Vector m0 = slope(s, i) * h, m1 = slope(s, i + 1) * h;
    const double t2 = tau * tau, t3 = t2 * tau;
    return (2 * t3 - 3 * t2 + 1) * s.u[i] + (t3 - 2 * t2 + tau) * m0 + (-2 * t3 + 3 * t2) * s.u[i + 1] +
           (t3 - t2) * m1;
  }

private:
  struct Locus
  {
    std::size_t index;
    double tau;
    double h;
  };

  static Locus locate(const SampledFlow & s, double t)
  {
    if (s.t.size() == 1) { return {0, 0.0, 0.0}; }
    auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
    std::size_t i = it == s.t.begin() ? 0 : static_cast<std::size_t>(it - s.t.begin()) - 1;
    i = std::min(i, s.t.size() - 2);
    const double h = s.t[i + 1] - s.t[i];
    const double tau = h > 0.0 ? std::clamp((t - s.t[i]) / h, 0.0, 1.0) : 0.0;
    return {i, tau, h};
  }

  static Vector slope(const SampledFlow & s, std::size_t i)
  {
    const std::size_t n = s.t.size();
    if (n < 2) { return Vector::Zero(s.u[0].size()); }
    if (i == 0) { return (s.u[1] - s.u[0]) / (s.t[1] - s.t[0]); }
    if (i == n - 1) { return (s.u[n - 1] - s.u[n - 2]) / (s.t[n - 1] - s.t[n - 2]); }
    const double h0 = s.t[i] - s.t[i - 1], h1 = s.t[i + 1] - s.t[i];
    if (h0 <= 0.0 || h1 <= 0.0) { return Vector::Zero(s.u[i].size()); }
    return (h0 * h0 * (s.u[i + 1] - s.u[i]) + h1 * h1 * (s.u[i] - s.u[i - 1])) / (h0 * h1 * (h0 + h1));
  }

  ModeId mode_;
  double t_start_ = 0.0;
  double t_end_ = 0.0;
  std::variant<ClosedFormFlow, SampledFlow> flow_;
};

enum class Side { Left, Right };

struct ExecutionSample
{
  ModeId q;
  Vector x;
  Vector u;
};

/**
 * @brief Hybrid execution: times t_0..t_n, modes q_1..q_n, inputs sigma_1..sigma_{n-1}
 * and one trajectory segment per mode visit.
 */
class Execution
{
public:
  Execution() = default;

  Execution(
    std::vector<double> times, std::vector<ModeId> modes, std::vector<InputId> inputs,
    std::vector<TrajectorySegment> segments, bool degenerate = false)
  : times_(std::move(times)), modes_(std::move(modes)), inputs_(std::move(inputs)),
    segments_(std::move(segments)), degenerate_(degenerate)
  {
    const std::size_t n = modes_.size();
    if (n == 0) { throw ModelError("execution needs at least one mode"); }
    if (times_.size() != n + 1 || inputs_.size() != n - 1 || segments_.size() != n) {
      throw ModelError("execution: |t| = n + 1, |sigma| = n - 1 and one segment per mode required");
    }
    for (std::size_t i = 1; i + 1 < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) { throw ModelError("execution: jump times must strictly increase"); }
    }
    if (!(times_[n] >= times_[n - 1])) { throw ModelError("execution: final time precedes the last jump"); }
  }

  std::size_t size() const { return modes_.size(); }
  std::size_t jump_count() const { return modes_.size() - 1; }
  const std::vector<double> & times() const { return times_; }
  const std::vector<ModeId> & modes() const { return modes_; }
  const std::vector<InputId> & inputs() const { return inputs_; }
  const std::vector<TrajectorySegment> & segments() const { return segments_; }
  double t0() const { return times_.front(); }
  double tf() const { return times_.back(); }
  bool degenerate() const { return degenerate_; }

  /// x_i^- for i in [1..n].
  Vector x_minus(std::size_t i) const { return segments_.at(i - 1).state(times_[i]); }
  /// x_i^+ for i in [0..n-1].
  Vector x_plus(std::size_t i) const { return segments_.at(i).state(times_[i]); }

private:
  std::vector<double> times_;
  std::vector<ModeId> modes_;
  std::vector<InputId> inputs_;
  std::vector<TrajectorySegment> segments_;
  bool degenerate_ = false;
};

/// Segment index active at t from the requested side.
inline std::size_t segment_index(const Execution & exec, double t, Side side)
{
  const auto & ts = exec.times();
  const std::size_t n = exec.size();
  if (!(t >= ts.front() && t <= ts.back())) { throw std::out_of_range("evaluate: t outside [t0, tn]"); }
  if (side == Side::Right) {
    std::size_t i = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
    return std::min(i, n - 1);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t <= ts[i + 1]) { return i; }
  }
  return n - 1;
}

inline ExecutionSample evaluate(const Execution & exec, double t, Side side)
{
  const auto & seg = exec.segments()[segment_index(exec, t, side)];
  return {seg.mode(), seg.state(t), seg.control(t)};
}

// ---------------------------------------------------------------------------
// Cost

struct CostBreakdown
{
  double stage = 0.0;
  double jumps = 0.0;
  double terminal = 0.0;
  double Jm = 0.0;
  double J = 0.0;
};

/// Stage integral of one segment.
inline double segment_stage_cost(const AffineHybridModel & model, const TrajectorySegment & seg)
{
  if (seg.duration() <= 0.0) { return 0.0; }
  if (seg.closed_form()) {
    auto integrand = [&](double t) { return stage_cost(model, seg.mode(), seg.control(t), seg.state(t)); };
    return integrate_gauss_adaptive(integrand, seg.t_start(), seg.t_end(), 1e-10).value;
  }
  // composite Simpson over the sample grid, midpoints from the interpolant
  const auto & s = *seg.as_sampled();
  double total = 0.0;
  auto l = [&](double t) { return stage_cost(model, seg.mode(), seg.control(t), seg.state(t)); };
  for (std::size_t i = 0; i + 1 < s.t.size(); ++i) {
    const double a = s.t[i], b = s.t[i + 1];
    if (b <= a) { continue; }
    const double fa = stage_cost(model, seg.mode(), s.u[i], s.x[i]);
    const double fb = stage_cost(model, seg.mode(), s.u[i + 1], s.x[i + 1]);
    total += (b - a) / 6.0 * (fa + 4.0 * l(0.5 * (a + b)) + fb);
  }
  return total;
}

inline CostBreakdown execution_cost(const AffineHybridModel & model, const Execution & exec)
{
  CostBreakdown c;
  for (const auto & seg : exec.segments()) {
    if (seg.state(seg.t_start()).size() != model.nx()) { throw ModelError("execution_cost: state dimension mismatch"); }
    c.stage += segment_stage_cost(model, seg);
  }
  for (std::size_t i = 1; i < exec.size(); ++i) {
    const auto k = model.find_transition(exec.modes()[i - 1], exec.inputs()[i - 1], exec.modes()[i]);
    c.jumps += model.jump_cost(k).at(i);
  }
  c.terminal = terminal_cost(model, exec.modes().back(), exec.x_minus(exec.size()));
  c.Jm = c.stage + c.jumps;
  c.J = c.Jm + c.terminal;
  return c;
}

// ---------------------------------------------------------------------------
// Admissibility

struct AdmissibilityReport
{
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  double max_ode_residual = 0.0;
  double max_guard_residual = 0.0;
  double max_reset_error = 0.0;

  bool ok() const { return failures.empty(); }
};

struct AdmissibilityOptions
{
  int samples_per_segment = 32;
  bool strict_domain = false;
};

/**
 * @brief Checks an execution against the flow, guard, reset, domain and
 * time-ordering conditions of the model, each at tolerance `tol`.
 */
inline AdmissibilityReport check_execution(
  const AffineHybridModel & model, const Execution & exec, double tol, const AdmissibilityOptions & opts = {})
{
  AdmissibilityReport rep;
  const auto & ts = exec.times();
  const std::size_t n = exec.size();

  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    if (!(ts[i] > ts[i - 1])) { rep.failures.push_back("time sequence not increasing at index " + std::to_string(i)); }
  }
  if (ts[n] < ts[n - 1]) { rep.failures.push_back("final time precedes last jump"); }

  for (std::size_t i = 0; i < n; ++i) {
    const auto & seg = exec.segments()[i];
    const ModeId q = exec.modes()[i];
    if (!model.has_mode(q)) {
      rep.failures.push_back("segment " + std::to_string(i + 1) + " refers to an unknown mode");
      continue;
    }
    const double L = seg.duration();
    bool domain_violation = false;
    if (!model.mode(q).domain.contains(seg.state(seg.t_start()), tol) ||
        !model.mode(q).domain.contains(seg.state(seg.t_end()), tol)) {
      domain_violation = true;
    }
    if (L > 0.0) {
      const double h = 1e-6 * L;
      const int m = opts.samples_per_segment;
      for (int k = 0; k < m; ++k) {
        const double t = seg.t_start() + (k + 0.5) / m * L;
        const Vector x = seg.state(t);
        const Vector xdot = (seg.state(t + h) - seg.state(t - h)) / (2.0 * h);
        const Vector f = vector_field(model, q, x, seg.control(t));
        rep.max_ode_residual = std::max(rep.max_ode_residual, (xdot - f).cwiseAbs().maxCoeff());
        if (!model.mode(q).domain.contains(x, tol)) { domain_violation = true; }
      }
    }
    if (domain_violation) {
      const std::string msg = "segment " + std::to_string(i + 1) + " leaves the domain of " + model.mode_name(q);
      (opts.strict_domain ? rep.failures : rep.warnings).push_back(msg);
    }
  }
  if (rep.max_ode_residual > tol) {
    std::ostringstream os;
    os << "flow residual " << rep.max_ode_residual << " exceeds " << tol;
    rep.failures.push_back(os.str());
  }

  for (std::size_t i = 1; i < n; ++i) {
    const ModeId q = exec.modes()[i - 1], qn = exec.modes()[i];
    const InputId s = exec.inputs()[i - 1];
    std::size_t k = 0;
    try {
      k = model.find_transition(q, s, qn);
    } catch (const ModelError & e) {
      rep.failures.push_back("jump " + std::to_string(i) + ": " + e.what());
      continue;
    }
    const auto & tr = model.transition(k);
    const Vector xm = exec.x_minus(i), xp = exec.x_plus(i);
    const double g = std::abs(tr.Mx.dot(xm) + tr.Mc);
    rep.max_guard_residual = std::max(rep.max_guard_residual, g);
    if (g > tol) { rep.failures.push_back("jump " + std::to_string(i) + ": x^- is off the guard boundary"); }
    if (tr.extra_guard && !tr.extra_guard->contains(xm, tol)) {
      rep.failures.push_back("jump " + std::to_string(i) + ": x^- outside the guard restriction");
    }
    const double e = (xp - (tr.Lx * xm + tr.Lc)).cwiseAbs().maxCoeff();
    rep.max_reset_error = std::max(rep.max_reset_error, e);
    if (e > tol) { rep.failures.push_back("jump " + std::to_string(i) + ": x^+ does not match the reset"); }
  }
  return rep;
}

}  // namespace hympc
