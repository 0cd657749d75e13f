#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hympc/types.hpp"

namespace hympc {

/**
 * @brief Polyhedral set { x : P x + p >= 0 }.
 *
 * An empty constraint list (zero rows) is the whole space.
 */
struct Polyhedron
{
  Matrix P;
  Vector p;

  bool unconstrained() const { return P.rows() == 0; }

  bool contains(const Vector & x, double tol = 0.0) const
  {
    if (unconstrained()) { return true; }
    return ((P * x + p).array() >= -tol).all();
  }
};

struct AffineMode
{
  Matrix A;
  Matrix Bu;
  Vector Bc;
  Polyhedron domain;
};

/**
 * @brief Declared jump q --sigma--> q' with affine guard function and reset.
 *
 * The guard set is { x : Mx x + Mc <= 0 } intersected with extra_guard; jumps
 * fire on its boundary hyperplane Mx x + Mc = 0.
 */
struct AffineTransition
{
  ModeId source;
  InputId input;
  ModeId target;
  RowVector Mx;
  double Mc = 0.0;
  Matrix Lx;
  Vector Lc;
  std::optional<Polyhedron> extra_guard;
};

/// Stage and terminal weights of one mode.
struct ModeCost
{
  Matrix Wx;
  Matrix Wu;
  double Wc = 0.0;
  Vector xbar;
  Vector ubar;
  Matrix Wf;
};

/// Constant jump cost, optionally scheduled by jump position (1-based).
struct JumpCost
{
  double weight = 1.0;
  std::vector<double> schedule;

  double at(std::size_t jump_index) const
  {
    if (jump_index >= 1 && jump_index <= schedule.size()) { return schedule[jump_index - 1]; }
    return weight;
  }

  double minimum() const
  {
    double m = weight;
    for (double w : schedule) { m = std::min(m, w); }
    return m;
  }
};

/// Quadratic cost family; `jumps[k]` belongs to transition k of the model.
struct QuadraticCostSpec
{
  std::vector<ModeCost> modes;
  std::vector<JumpCost> jumps;
};

class AffineHybridModel
{
public:
  AffineHybridModel() = default;

  AffineHybridModel(
    int nx, int nu, std::vector<AffineMode> modes, std::vector<AffineTransition> transitions,
    QuadraticCostSpec cost, std::vector<std::string> mode_names = {},
    std::vector<std::string> input_names = {})
  : nx_(nx), nu_(nu), modes_(std::move(modes)), transitions_(std::move(transitions)),
    cost_(std::move(cost)), mode_names_(std::move(mode_names)), input_names_(std::move(input_names))
  {
    if (mode_names_.empty()) {
      for (std::size_t i = 0; i < modes_.size(); ++i) { mode_names_.push_back("q" + std::to_string(i + 1)); }
    }
    std::size_t n_inputs = 0;
    for (const auto & tr : transitions_) { n_inputs = std::max(n_inputs, tr.input.value + 1); }
    if (input_names_.empty()) {
      for (std::size_t i = 0; i < n_inputs; ++i) { input_names_.push_back("s" + std::to_string(i + 1)); }
    }
    if (mode_names_.size() != modes_.size()) { throw ModelError("mode name table does not match mode count"); }
    if (input_names_.size() < n_inputs) { throw ModelError("input name table is shorter than the inputs in use"); }
  }

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  std::size_t mode_count() const { return modes_.size(); }
  std::size_t input_count() const { return input_names_.size(); }

  const std::vector<AffineMode> & modes() const { return modes_; }
  const std::vector<AffineTransition> & transitions() const { return transitions_; }
  const QuadraticCostSpec & cost() const { return cost_; }

  const AffineMode & mode(ModeId q) const
  {
    check_mode(q);
    return modes_[q.value];
  }

  const ModeCost & mode_cost(ModeId q) const
  {
    check_mode(q);
    if (q.value >= cost_.modes.size()) { throw ModelError("no cost declared for mode " + mode_name(q)); }
    return cost_.modes[q.value];
  }

  const AffineTransition & transition(std::size_t k) const { return transitions_.at(k); }

  const JumpCost & jump_cost(std::size_t k) const
  {
    if (k >= cost_.jumps.size()) { throw ModelError("no jump cost declared for transition " + std::to_string(k)); }
    return cost_.jumps[k];
  }

  /// Index of the transition (q, sigma, q'); throws ModelError when undeclared.
  std::size_t find_transition(ModeId q, InputId sigma, ModeId q_next) const
  {
    for (std::size_t k = 0; k < transitions_.size(); ++k) {
      const auto & tr = transitions_[k];
      if (tr.source == q && tr.input == sigma && tr.target == q_next) { return k; }
    }
    throw ModelError(
      "unknown transition (" + mode_name(q) + ", " + input_name(sigma) + ", " + mode_name(q_next) + ")");
  }

  bool has_mode(ModeId q) const { return q.value < modes_.size(); }

  void check_mode(ModeId q) const
  {
    if (!has_mode(q)) { throw ModelError("unknown mode id " + std::to_string(q.value)); }
  }

  std::string mode_name(ModeId q) const
  {
    return q.value < mode_names_.size() ? mode_names_[q.value] : "#" + std::to_string(q.value);
  }

  std::string input_name(InputId s) const
  {
    return s.value < input_names_.size() ? input_names_[s.value] : "#" + std::to_string(s.value);
  }

  const std::vector<std::string> & mode_names() const { return mode_names_; }
  const std::vector<std::string> & input_names() const { return input_names_; }

  std::optional<ModeId> mode_id(const std::string & name) const
  {
    auto it = std::find(mode_names_.begin(), mode_names_.end(), name);
    if (it == mode_names_.end()) { return std::nullopt; }
    return ModeId{static_cast<std::size_t>(it - mode_names_.begin())};
  }

  std::optional<InputId> input_id(const std::string & name) const
  {
    auto it = std::find(input_names_.begin(), input_names_.end(), name);
    if (it == input_names_.end()) { return std::nullopt; }
    return InputId{static_cast<std::size_t>(it - input_names_.begin())};
  }

  /// Copy of this model with a replaced cost specification.
  AffineHybridModel with_cost(QuadraticCostSpec cost) const
  {
    AffineHybridModel out = *this;
    out.cost_ = std::move(cost);
    return out;
  }

private:
  int nx_ = 0;
  int nu_ = 0;
  std::vector<AffineMode> modes_;
  std::vector<AffineTransition> transitions_;
  QuadraticCostSpec cost_;
  std::vector<std::string> mode_names_;
  std::vector<std::string> input_names_;
};

// ---------------------------------------------------------------------------
// Pointwise evaluation

/// (sigma, q') pairs leaving q, sorted by (InputId, ModeId).
inline std::vector<std::pair<InputId, ModeId>> transitions_from(const AffineHybridModel & model, ModeId q)
{
  model.check_mode(q);
  std::vector<std::pair<InputId, ModeId>> out;
  for (const auto & tr : model.transitions()) {
    if (tr.source == q) { out.emplace_back(tr.input, tr.target); }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double guard_residual(
  const AffineHybridModel & model, ModeId q, InputId sigma, ModeId q_next, const Vector & x)
{
  const auto & tr = model.transition(model.find_transition(q, sigma, q_next));
  return tr.Mx.dot(x) + tr.Mc;
}

inline Vector apply_reset(
  const AffineHybridModel & model, ModeId q, InputId sigma, ModeId q_next, const Vector & x)
{
  const auto & tr = model.transition(model.find_transition(q, sigma, q_next));
  return tr.Lx * x + tr.Lc;
}

inline Vector vector_field(const AffineHybridModel & model, ModeId q, const Vector & x, const Vector & u)
{
  const auto & m = model.mode(q);
  if (x.size() != model.nx() || u.size() != model.nu()) {
    throw ModelError("vector_field: dimension mismatch");
  }
  return m.A * x + m.Bu * u + m.Bc;
}

/// Running cost l(q, u, x).
inline double stage_cost(const AffineHybridModel & model, ModeId q, const Vector & u, const Vector & x)
{
  const auto & c = model.mode_cost(q);
  const Vector dx = x - c.xbar;
  const Vector du = u - c.ubar;
  return 0.5 * dx.dot(c.Wx * dx) + 0.5 * du.dot(c.Wu * du) + c.Wc;
}

/// Terminal cost h_f(q, x).
inline double terminal_cost(const AffineHybridModel & model, ModeId q, const Vector & x)
{
  const auto & c = model.mode_cost(q);
  const Vector dx = x - c.xbar;
  return 0.5 * dx.dot(c.Wf * dx);
}

/// Whether x lies in the guard set of transition k (boundary included).
inline bool in_guard_set(const AffineTransition & tr, const Vector & x, double tol = 1e-12)
{
  if (tr.Mx.dot(x) + tr.Mc > tol) { return false; }
  return !tr.extra_guard || tr.extra_guard->contains(x, tol);
}

/// Membership in D(q) minus every outgoing guard set of q.
inline bool in_flow_domain(const AffineHybridModel & model, ModeId q, const Vector & x, double tol = 1e-12)
{
  if (!model.mode(q).domain.contains(x, tol)) { return false; }
  for (const auto & tr : model.transitions()) {
    if (tr.source == q && in_guard_set(tr, x, tol)) { return false; }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport
{
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }

  bool mentions(const std::string & needle) const
  {
    auto has = [&](const std::vector<std::string> & v) {
      return std::any_of(v.begin(), v.end(), [&](const std::string & s) { return s.find(needle) != std::string::npos; });
    };
    return has(errors) || has(warnings);
  }
};

struct ValidationOptions
{
  int guard_samples = 64;
  double sample_radius = 10.0;
  double psd_tolerance = 1e-10;
};

namespace detail {

inline bool has_shape(const Matrix & m, Eigen::Index rows, Eigen::Index cols)
{
  return m.rows() == rows && m.cols() == cols;
}

inline bool symmetric(const Matrix & m)
{
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

inline double min_eigenvalue(const Matrix & m)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Radical inverse in the given base; drives the deterministic guard samples.
inline double radical_inverse(unsigned index, unsigned base)
{
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * (index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

inline bool polyhedron_dims_ok(const Polyhedron & poly, int nx)
{
  if (poly.P.rows() == 0) { return poly.p.size() == 0; }
  return poly.P.cols() == nx && poly.p.size() == poly.P.rows();
}

/// Points on the hyperplane Mx x + Mc = 0 (Halton pattern over its tangent basis).
inline std::vector<Vector> hyperplane_samples(const RowVector & Mx, double Mc, int count, double radius)
{
  const Eigen::Index n = Mx.size();
  const Vector normal = Mx.transpose();
  const Vector base = -Mc * normal / normal.squaredNorm();
  std::vector<Vector> out{base};
  if (n == 1) { return out; }
  Eigen::HouseholderQR<Matrix> qr(normal);
  const Matrix Q = qr.householderQ();
  const Matrix tangent = Q.rightCols(n - 1);
  static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (int s = 1; s < count; ++s) {
    Vector c(n - 1);
    for (Eigen::Index d = 0; d < n - 1; ++d) {
      const unsigned base_prime = kPrimes[d % 12];
      c(d) = radius * (2.0 * radical_inverse(static_cast<unsigned>(s), base_prime) - 1.0);
    }
    out.push_back(base + tangent * c);
  }
  return out;
}

}  // namespace detail

/**
 * @brief Structural and numerical checks of an affine hybrid model.
 *
 * Errors cover dimensions, weight definiteness, degenerate guards and dangling
 * references. Warnings come from the sampled check that every reset image of
 * a guard-boundary point can flow in its target mode.
 */
inline ValidationReport validate(const AffineHybridModel & model, const ValidationOptions & opts = {})
{
  ValidationReport rep;
  const int nx = model.nx();
  const int nu = model.nu();
  auto err = [&](std::string s) { rep.errors.push_back(std::move(s)); };

  if (nx <= 0) { err("n_x must be positive"); }
  if (nu <= 0) { err("n_u must be positive"); }
  if (model.mode_count() == 0) { err("model has no modes"); }
  if (!rep.ok()) { return rep; }

  for (std::size_t i = 0; i < model.mode_count(); ++i) {
    const auto & m = model.modes()[i];
    const std::string name = "mode " + model.mode_name(ModeId{i});
    if (!detail::has_shape(m.A, nx, nx)) { err(name + ": A must be n_x x n_x"); }
    if (!detail::has_shape(m.Bu, nx, nu)) { err(name + ": Bu must be n_x x n_u"); }
    if (m.Bc.size() != nx) { err(name + ": Bc must have n_x entries"); }
    if (!detail::polyhedron_dims_ok(m.domain, nx)) { err(name + ": domain dimensions inconsistent"); }
  }

  const auto & cost = model.cost();
  if (cost.modes.size() != model.mode_count()) { err("cost: one entry per mode required"); }
  for (std::size_t i = 0; i < std::min(cost.modes.size(), model.mode_count()); ++i) {
    const auto & c = cost.modes[i];
    const std::string name = "mode " + model.mode_name(ModeId{i});
    bool shapes = true;
    if (!detail::has_shape(c.Wx, nx, nx)) { err(name + ": Wx must be n_x x n_x"); shapes = false; }
    if (!detail::has_shape(c.Wu, nu, nu)) { err(name + ": Wu must be n_u x n_u"); shapes = false; }
    if (!detail::has_shape(c.Wf, nx, nx)) { err(name + ": Wf must be n_x x n_x"); shapes = false; }
    if (c.xbar.size() != nx) { err(name + ": xbar must have n_x entries"); }
    if (c.ubar.size() != nu) { err(name + ": ubar must have n_u entries"); }
    if (!(c.Wc >= 0.0)) { err(name + ": Wc must be non-negative"); }
    if (!shapes) { continue; }
    if (!detail::symmetric(c.Wu) || Eigen::LLT<Matrix>(c.Wu).info() != Eigen::Success) {
      err(name + ": Wu not positive definite");
    }
    if (!detail::symmetric(c.Wx) || detail::min_eigenvalue(c.Wx) < -opts.psd_tolerance) {
      err(name + ": Wx not symmetric positive semidefinite");
    }
    if (!detail::symmetric(c.Wf) || detail::min_eigenvalue(c.Wf) < -opts.psd_tolerance) {
      err(name + ": Wf not symmetric positive semidefinite");
    }
  }

  if (cost.jumps.size() != model.transitions().size()) { err("cost: one jump cost per transition required"); }
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < model.transitions().size(); ++k) {
    const auto & tr = model.transitions()[k];
    std::ostringstream id;
    id << "transition " << k;
    if (!model.has_mode(tr.source) || !model.has_mode(tr.target)) {
      err(id.str() + ": refers to an unknown mode");
      continue;
    }
    id << " (" << model.mode_name(tr.source) << ", " << model.input_name(tr.input) << ", "
       << model.mode_name(tr.target) << ")";
    if (!seen.insert({tr.source.value, tr.input.value, tr.target.value}).second) {
      err(id.str() + ": duplicate (source, input, target) triple");
    }
    if (tr.Mx.size() != nx) {
      err(id.str() + ": Mx must have n_x entries");
    } else if (tr.Mx.cwiseAbs().maxCoeff() == 0.0) {
      err(id.str() + ": guard row Mx is zero");
    }
    if (!detail::has_shape(tr.Lx, nx, nx)) { err(id.str() + ": Lx must be n_x x n_x"); }
    if (tr.Lc.size() != nx) { err(id.str() + ": Lc must have n_x entries"); }
    if (tr.extra_guard && !detail::polyhedron_dims_ok(*tr.extra_guard, nx)) {
      err(id.str() + ": extra_guard dimensions inconsistent");
    }
    if (k < cost.jumps.size()) {
      const auto & jc = cost.jumps[k];
      if (!(jc.weight > 0.0)) { err(id.str() + ": jump cost must be positive"); }
      for (double w : jc.schedule) {
        if (!(w > 0.0)) { err(id.str() + ": scheduled jump cost must be positive"); }
      }
    }
  }

  // A mode that can neither flow nor jump away.
  for (std::size_t i = 0; i < model.mode_count(); ++i) {
    const auto & dom = model.modes()[i].domain;
    if (!detail::polyhedron_dims_ok(dom, nx)) { continue; }
    bool trivially_empty = false;
    for (Eigen::Index r = 0; r < dom.P.rows(); ++r) {
      if (dom.P.row(r).cwiseAbs().maxCoeff() == 0.0 && dom.p(r) < 0.0) { trivially_empty = true; }
    }
    const bool has_exit = !transitions_from(model, ModeId{i}).empty();
    if (trivially_empty && !has_exit) {
      err("mode " + model.mode_name(ModeId{i}) + ": empty domain and no outgoing transition");
    }
  }
  if (!rep.ok()) { return rep; }

  for (std::size_t k = 0; k < model.transitions().size(); ++k) {
    const auto & tr = model.transitions()[k];
    int failures = 0, tested = 0;
    for (const Vector & x : detail::hyperplane_samples(tr.Mx, tr.Mc, opts.guard_samples, opts.sample_radius)) {
      if (tr.extra_guard && !tr.extra_guard->contains(x, 1e-12)) { continue; }
      ++tested;
      const Vector xr = tr.Lx * x + tr.Lc;
      if (!in_flow_domain(model, tr.target, xr)) { ++failures; }
    }
    if (failures > 0) {
      std::ostringstream w;
      w << "transition " << k << " (" << model.mode_name(tr.source) << ", " << model.input_name(tr.input) << ", "
        << model.mode_name(tr.target) << "): " << failures << " of " << tested
        << " reset guard samples cannot flow in the target mode";
      rep.warnings.push_back(w.str());
    }
  }
  return rep;
}

/// Initial-state admissibility: x_ic must lie in the flow domain of q_ic.
inline std::optional<std::string> check_initial_state(const AffineHybridModel & model, ModeId q, const Vector & x)
{
  if (!model.has_mode(q)) { return "unknown initial mode"; }
  if (x.size() != model.nx()) { return "initial state has wrong dimension"; }
  if (!in_flow_domain(model, q, x)) {
    return "initial state is not in the flow domain of " + model.mode_name(q);
  }
  return std::nullopt;
}

}  // namespace hympc
