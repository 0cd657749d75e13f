#pragma once

/**
 * @file
 * @brief Sequence-conditioned optimal control of affine hybrid systems.
 *
 * For a fixed mode sequence q_1..q_n and input sequence sigma_1..sigma_{n-1}
 * the necessary conditions of the hybrid maximum principle reduce, with
 * affine dynamics/guards/resets and quadratic costs, to
 *
 *  - a square linear system in the boundary values (x_i^-, lambda_i^-,
 *    x_i^+, lambda_i^+, alpha_i) once the jump times are fixed, and
 *  - n - 1 Hamiltonian-continuity equations that determine the jump times.
 *
 * The jump times are found with a damped multistart Newton iteration and the
 * root with the least cost is returned.
 */

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hympc/execution.hpp"
#include "hympc/expm.hpp"
#include "hympc/model.hpp"

namespace hympc {

/// Problem 2 style: final time pinned to the prediction horizon.
struct FixedHorizon
{
  double T = 1.0;
};

/// Problem 3 style: execution ends at the last jump, no terminal cost.
struct FreeFinal
{};

using HorizonVariant = std::variant<FixedHorizon, FreeFinal>;

inline bool is_free_final(const HorizonVariant & v) { return std::holds_alternative<FreeFinal>(v); }

/// Switching condition imposed at the final jump of a free-final-time solve.
enum class FinalSwitchCondition {
  /// H(q_{n-1}, x^-, lambda^-, u^-) equals H(q_n, x^+, 0, ubar): continuity into the empty final segment.
  HamiltonianContinuity,
  /// H(q_{n-1}, x^-, lambda^-, u^-) = 0: stationarity in the free final time.
  VanishingHamiltonian,
};

struct SolverOptions
{
  double newton_tol = 1e-9;
  double step_tol = 1e-12;
  int max_newton_iterations = 60;
  double fd_step = 1e-6;
  double pivot_tol = 1e-12;
  double max_condition = 1e12;
  int perturbed_starts = 8;
  std::uint64_t seed = 0;
  /// Time scale for the multistart guesses of free-final solves.
  double guess_horizon = 1.0;
  FinalSwitchCondition final_switch = FinalSwitchCondition::VanishingHamiltonian;
};

// ---------------------------------------------------------------------------
// Per-mode building blocks

/// Wu^{-1} Bu^T.
inline Matrix control_gain(const AffineMode & mode, const ModeCost & cost)
{
  Eigen::LLT<Matrix> llt(cost.Wu);
  if (llt.info() != Eigen::Success) { throw ModelError("Wu not positive definite"); }
  return llt.solve(mode.Bu.transpose());
}

/**
 * @brief Extended matrix of the coupled state/costate flow under the
 * minimizing control:
 *
 *     [  A   -Bu Wu^-1 Bu^T   Bc + Bu ubar ]
 *     [ -Wx  -A^T             Wx xbar      ]
 *     [  0    0               0            ]
 */
inline Matrix extended_matrix(const AffineMode & mode, const ModeCost & cost)
{
  const auto nx = mode.A.rows();
  const Matrix gain = control_gain(mode, cost);
  Matrix Ae = Matrix::Zero(2 * nx + 1, 2 * nx + 1);
  Ae.topLeftCorner(nx, nx) = mode.A;
  Ae.block(0, nx, nx, nx) = -mode.Bu * gain;
  Ae.block(0, 2 * nx, nx, 1) = mode.Bc + mode.Bu * cost.ubar;
  Ae.block(nx, 0, nx, nx) = -cost.Wx;
  Ae.block(nx, nx, nx, nx) = -mode.A.transpose();
  Ae.block(nx, 2 * nx, nx, 1) = cost.Wx * cost.xbar;
  return Ae;
}

/// Top 2 n_x rows of exp(alpha Ae).
inline Matrix transition_map(const Matrix & Ae, double alpha)
{
  if (alpha < 0.0) { throw std::invalid_argument("transition_map: negative duration"); }
  const auto nx2 = Ae.rows() - 1;
  return expm(alpha * Ae).topRows(nx2);
}

inline Matrix transition_map(const AffineMode & mode, const ModeCost & cost, double alpha)
{
  return transition_map(extended_matrix(mode, cost), alpha);
}

/// Minimizer of the Hamiltonian in u: ubar - Wu^{-1} Bu^T lambda.
inline Vector optimal_control(const AffineMode & mode, const ModeCost & cost, const Vector & lambda)
{
  return cost.ubar - control_gain(mode, cost) * lambda;
}

/// H = l(q, u, x) + lambda^T f(q, x, u).
inline double hamiltonian(
  const AffineMode & mode, const ModeCost & cost, const Vector & x, const Vector & u, const Vector & lambda)
{
  const Vector dx = x - cost.xbar;
  const Vector du = u - cost.ubar;
  const double l = 0.5 * dx.dot(cost.Wx * dx) + 0.5 * du.dot(cost.Wu * du) + cost.Wc;
  return l + lambda.dot(mode.A * x + mode.Bu * u + mode.Bc);
}

// ---------------------------------------------------------------------------
// Unknown vector

/**
 * @brief Boundary values of one sequence solve, stored flat in the order
 * (x_1^-..x_m^-, lambda_1^-..lambda_m^-, x_0^+..x_{n-1}^+, lambda_0^+..lambda_{n-1}^+, alpha_1..alpha_{n-1})
 * with m = n (fixed horizon) or m = n - 1 (free final time).
 */
class SolverUnknowns
{
public:
  SolverUnknowns() = default;

  SolverUnknowns(std::size_t n, int nx, bool free_final, Vector values = {})
  : n_(n), nx_(nx), free_final_(free_final), values_(std::move(values))
  {
    if (values_.size() == 0) { values_ = Vector::Zero(static_cast<Eigen::Index>(dimension(n, nx, free_final))); }
    if (static_cast<std::size_t>(values_.size()) != dimension(n, nx, free_final)) {
      throw ModelError("SolverUnknowns: value vector has the wrong length");
    }
  }

  static std::size_t dimension(std::size_t n, int nx, bool free_final)
  {
    const std::size_t m = free_final ? n - 1 : n;
    return 2 * m * nx + 2 * n * nx + n - 1;
  }

  std::size_t n() const { return n_; }
  int nx() const { return nx_; }
  bool free_final() const { return free_final_; }
  std::size_t minus_count() const { return free_final_ ? n_ - 1 : n_; }
  const Vector & values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Eigen::Index off_x_minus(std::size_t i) const { return idx((i - 1) * nx_); }
  Eigen::Index off_lambda_minus(std::size_t i) const { return idx((minus_count() + i - 1) * nx_); }
  Eigen::Index off_x_plus(std::size_t i) const { return idx((2 * minus_count() + i) * nx_); }
  Eigen::Index off_lambda_plus(std::size_t i) const { return idx((2 * minus_count() + n_ + i) * nx_); }
  Eigen::Index off_alpha(std::size_t i) const { return idx((2 * minus_count() + 2 * n_) * nx_ + i - 1); }

  Vector x_minus(std::size_t i) const { check_minus(i); return values_.segment(off_x_minus(i), nx_); }
  Vector lambda_minus(std::size_t i) const { check_minus(i); return values_.segment(off_lambda_minus(i), nx_); }
  Vector x_plus(std::size_t i) const { check_plus(i); return values_.segment(off_x_plus(i), nx_); }
  Vector lambda_plus(std::size_t i) const { check_plus(i); return values_.segment(off_lambda_plus(i), nx_); }
  double alpha(std::size_t i) const
  {
    if (i < 1 || i >= n_) { throw std::out_of_range("alpha index"); }
    return values_(off_alpha(i));
  }

private:
  static Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
  void check_minus(std::size_t i) const
  {
    if (i < 1 || i > minus_count()) { throw std::out_of_range("minus-side index"); }
  }
  void check_plus(std::size_t i) const
  {
    if (i >= n_) { throw std::out_of_range("plus-side index"); }
  }

  std::size_t n_ = 0;
  int nx_ = 0;
  bool free_final_ = false;
  Vector values_;
};

struct LinearSystem
{
  Matrix matrix;
  Vector rhs;
};

struct StartOutcome
{
  std::vector<double> initial_times;
  std::vector<double> final_times;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  double cost = std::numeric_limits<double>::infinity();
  std::string failure;
};

struct SolverDiagnostics
{
  int newton_iterations = 0;
  double residual_norm = 0.0;
  double condition_estimate = 0.0;
  int starts_tried = 0;
  int starts_converged = 0;
  std::vector<StartOutcome> starts;
};

struct SolverSolution
{
  SolverUnknowns unknowns;
  std::vector<double> jump_times;
  double final_time = 0.0;
  Execution execution;
  CostBreakdown cost;
  Vector u0;
  SolverDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Sequence problem

/**
 * @brief Precomputed data for one (q, sigma, x_ic, horizon) combination.
 *
 * Evaluating the jump-time residual repeatedly only re-exponentiates the
 * per-mode extended matrices; everything else is computed once.
 */
class SequenceProblem
{
public:
  SequenceProblem(
    const AffineHybridModel & model, std::vector<ModeId> q, std::vector<InputId> sigma, Vector x_ic,
    HorizonVariant variant, SolverOptions opts = {})
  : model_(&model), q_(std::move(q)), sigma_(std::move(sigma)), x_ic_(std::move(x_ic)), variant_(variant),
    opts_(opts)
  {
    if (q_.empty()) { throw ModelError("mode sequence must not be empty"); }
    if (sigma_.size() + 1 != q_.size()) { throw ModelError("|q| must equal |sigma| + 1"); }
    if (x_ic_.size() != model.nx()) { throw ModelError("initial state has the wrong dimension"); }
    if (const auto * fh = std::get_if<FixedHorizon>(&variant_); fh && !(fh->T > 0.0)) {
      throw ModelError("horizon must be positive");
    }
    for (ModeId m : q_) {
      const auto & mode = model.mode(m);
      const auto & c = model.mode_cost(m);
      Ae_.push_back(extended_matrix(mode, c));
      gain_.push_back(control_gain(mode, c));
    }
    for (std::size_t i = 0; i + 1 < q_.size(); ++i) {
      transition_.push_back(model.find_transition(q_[i], sigma_[i], q_[i + 1]));
    }
  }

  const AffineHybridModel & model() const { return *model_; }
  const std::vector<ModeId> & modes() const { return q_; }
  const std::vector<InputId> & inputs() const { return sigma_; }
  const Vector & initial_state() const { return x_ic_; }
  const HorizonVariant & variant() const { return variant_; }
  const SolverOptions & options() const { return opts_; }
  std::size_t n() const { return q_.size(); }
  bool free_final() const { return is_free_final(variant_); }
  std::size_t unknown_count() const { return SolverUnknowns::dimension(n(), model_->nx(), free_final()); }

  double horizon() const
  {
    if (const auto * fh = std::get_if<FixedHorizon>(&variant_)) { return fh->T; }
    return std::numeric_limits<double>::infinity();
  }

  const Matrix & extended(std::size_t i) const { return Ae_.at(i - 1); }

  /// 0 < t_1 < ... < t_{n-1} (< T for fixed horizon).
  bool ordered(const std::vector<double> & times) const
  {
    if (times.size() + 1 != n()) { return false; }
    double prev = 0.0;
    for (double t : times) {
      if (!(t > prev) || !std::isfinite(t)) { return false; }
      prev = t;
    }
    return prev < horizon() || n() == 1;
  }

  /// Square linear system over the unknown vector for the given jump times.
  LinearSystem assemble(const std::vector<double> & times) const
  {
    if (times.size() + 1 != n()) { throw ModelError("expected n - 1 jump times"); }
    const int nx = model_->nx();
    const std::size_t N = n();
    const bool ff = free_final();
    const SolverUnknowns layout(N, nx, ff);
    const auto dim = static_cast<Eigen::Index>(layout.size());
    LinearSystem sys{Matrix::Zero(dim, dim), Vector::Zero(dim)};
    Eigen::Index row = 0;
    const Matrix I = Matrix::Identity(nx, nx);

    // x_0^+ = x_ic
    sys.matrix.block(row, layout.off_x_plus(0), nx, nx) = I;
    sys.rhs.segment(row, nx) = x_ic_;
    row += nx;

    // flow over each non-degenerate segment
    const std::size_t flows = ff ? N - 1 : N;
    for (std::size_t i = 1; i <= flows; ++i) {
      const double t_prev = i == 1 ? 0.0 : times[i - 2];
      const double t_cur = i == N ? horizon() : times[i - 1];
      const Matrix Psi = transition_map(Ae_[i - 1], t_cur - t_prev);
      sys.matrix.block(row, layout.off_x_minus(i), nx, nx) = I;
      sys.matrix.block(row + nx, layout.off_lambda_minus(i), nx, nx) = I;
      sys.matrix.block(row, layout.off_x_plus(i - 1), 2 * nx, nx) = -Psi.leftCols(nx);
      sys.matrix.block(row, layout.off_lambda_plus(i - 1), 2 * nx, nx) = -Psi.middleCols(nx, nx);
      sys.rhs.segment(row, 2 * nx) = Psi.col(2 * nx);
      row += 2 * nx;
    }

    for (std::size_t i = 1; i < N; ++i) {
      const auto & tr = model_->transition(transition_[i - 1]);
      // guard boundary: Mx x_i^- + Mc = 0
      sys.matrix.block(row, layout.off_x_minus(i), 1, nx) = tr.Mx;
      sys.rhs(row) = -tr.Mc;
      row += 1;
      // reset: x_i^+ = Lx x_i^- + Lc
      sys.matrix.block(row, layout.off_x_plus(i), nx, nx) = I;
      sys.matrix.block(row, layout.off_x_minus(i), nx, nx) = -tr.Lx;
      sys.rhs.segment(row, nx) = tr.Lc;
      row += nx;
      // costate jump: lambda_i^- = Lx^T lambda_i^+ + alpha_i Mx^T
      sys.matrix.block(row, layout.off_lambda_minus(i), nx, nx) = I;
      sys.matrix.block(row, layout.off_lambda_plus(i), nx, nx) = -tr.Lx.transpose();
      sys.matrix.block(row, layout.off_alpha(i), nx, 1) = -tr.Mx.transpose();
      row += nx;
    }

    if (ff) {
      // lambda_{n-1}^+ = 0
      sys.matrix.block(row, layout.off_lambda_plus(N - 1), nx, nx) = I;
    } else {
      // lambda_n^- = Wf (x_n^- - xbar)
      const auto & c = model_->mode_cost(q_.back());
      sys.matrix.block(row, layout.off_lambda_minus(N), nx, nx) = I;
      sys.matrix.block(row, layout.off_x_minus(N), nx, nx) = -c.Wf;
      sys.rhs.segment(row, nx) = -c.Wf * c.xbar;
    }
    row += nx;
    if (row != dim) { throw std::logic_error("assembled row count does not match unknown count"); }
    return sys;
  }

  /// Solves the linear system; throws SolveError(SingularSystem) on degenerate pivots.
  SolverUnknowns solve_linear(const std::vector<double> & times, double * condition = nullptr) const
  {
    if (!ordered(times)) { throw SolveError(SolveFailure::OrderViolation, "jump times are not ordered"); }
    LinearSystem sys = assemble(times);
    // row equilibration
    for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) {
      const double s = sys.matrix.row(r).cwiseAbs().maxCoeff();
      if (s == 0.0) { throw SolveError(SolveFailure::SingularSystem, "zero row in linear system"); }
      sys.matrix.row(r) /= s;
      sys.rhs(r) /= s;
    }
    if (!sys.matrix.allFinite() || !sys.rhs.allFinite()) {
      throw SolveError(SolveFailure::SingularSystem, "non-finite linear system");
    }
    Eigen::PartialPivLU<Matrix> lu(sys.matrix);
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(min_pivot >= opts_.pivot_tol)) {
      throw SolveError(SolveFailure::SingularSystem, "pivot below threshold");
    }
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (condition) { *condition = cond; }
    if (!(cond <= opts_.max_condition)) {
      std::ostringstream os;
      os << "condition estimate " << cond << " exceeds " << opts_.max_condition;
      throw SolveError(SolveFailure::SingularSystem, os.str());
    }
    Vector y = lu.solve(sys.rhs);
    if (!y.allFinite()) { throw SolveError(SolveFailure::SingularSystem, "non-finite solution"); }
    return SolverUnknowns(n(), model_->nx(), free_final(), std::move(y));
  }

  /// Hamiltonian mismatch across each jump.
  Vector hamiltonian_gap(const SolverUnknowns & y) const
  {
    const std::size_t N = n();
    Vector gap(static_cast<Eigen::Index>(N - 1));
    for (std::size_t i = 1; i < N; ++i) {
      const auto & m0 = model_->mode(q_[i - 1]);
      const auto & c0 = model_->mode_cost(q_[i - 1]);
      const auto & m1 = model_->mode(q_[i]);
      const auto & c1 = model_->mode_cost(q_[i]);
      const Vector lm = y.lambda_minus(i), lp = y.lambda_plus(i);
      const double h_minus = hamiltonian(m0, c0, y.x_minus(i), c0.ubar - gain_[i - 1] * lm, lm);
      double h_plus = hamiltonian(m1, c1, y.x_plus(i), c1.ubar - gain_[i] * lp, lp);
      if (free_final() && i == N - 1 && opts_.final_switch == FinalSwitchCondition::VanishingHamiltonian) {
        h_plus = 0.0;
      }
      gap(static_cast<Eigen::Index>(i - 1)) = h_minus - h_plus;
    }
    return gap;
  }

  /// F_t: jump times -> Hamiltonian gap.
  Vector residual(const std::vector<double> & times, double * condition = nullptr) const
  {
    return hamiltonian_gap(solve_linear(times, condition));
  }

  /// Forward-difference Jacobian of the residual (backward where the forward step leaves the ordered region).
  Matrix residual_jacobian(const std::vector<double> & times, const Vector & f0, double rel_step) const
  {
    const auto m = static_cast<Eigen::Index>(times.size());
    Matrix J(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double h = rel_step * std::max(1.0, times[static_cast<std::size_t>(j)]);
      std::vector<double> tp = times;
      tp[static_cast<std::size_t>(j)] += h;
      double sign = 1.0;
      if (!ordered(tp)) {
        tp[static_cast<std::size_t>(j)] = times[static_cast<std::size_t>(j)] - h;
        sign = -1.0;
      }
      J.col(j) = sign * (residual(tp) - f0) / h;
    }
    return J;
  }

  /// Closed-form execution and cost for solved unknowns.
  SolverSolution reconstruct(const std::vector<double> & times, SolverUnknowns y) const
  {
    const std::size_t N = n();
    const int nx = model_->nx();
    std::vector<double> ts{0.0};
    ts.insert(ts.end(), times.begin(), times.end());
    ts.push_back(free_final() ? (times.empty() ? 0.0 : times.back()) : horizon());
    std::vector<TrajectorySegment> segs;
    for (std::size_t i = 1; i <= N; ++i) {
      Vector z0(2 * nx + 1);
      z0 << y.x_plus(i - 1), y.lambda_plus(i - 1), 1.0;
      const auto & c = model_->mode_cost(q_[i - 1]);
      segs.emplace_back(q_[i - 1], ts[i - 1], ts[i], ClosedFormFlow{Ae_[i - 1], z0, gain_[i - 1], c.ubar});
    }
    SolverSolution sol;
    sol.execution = Execution(ts, q_, sigma_, std::move(segs));
    sol.cost = execution_cost(*model_, sol.execution);
    sol.jump_times = times;
    sol.final_time = ts.back();
    const auto & c = model_->mode_cost(q_.front());
    sol.u0 = c.ubar - gain_.front() * y.lambda_plus(0);
    sol.unknowns = std::move(y);
    return sol;
  }

  /// Seed for the multistart generator: option seed mixed with an FNV-1a hash of the sequence.
  std::uint64_t sequence_seed() const
  {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    mix(opts_.seed);
    mix(free_final() ? 1 : 0);
    for (ModeId m : q_) { mix(m.value); }
    for (InputId s : sigma_) { mix(s.value + 0x9e3779b97f4a7c15ull); }
    return h;
  }

  /// Equally spaced guess followed by Latin-hypercube perturbations.
  std::vector<std::vector<double>> initial_guesses() const
  {
    const std::size_t m = n() - 1;
    const double scale = free_final() ? opts_.guess_horizon : horizon();
    std::vector<std::vector<double>> guesses;
    std::vector<double> even(m);
    for (std::size_t i = 0; i < m; ++i) { even[i] = scale * static_cast<double>(i + 1) / static_cast<double>(n()); }
    guesses.push_back(even);

    const int k = opts_.perturbed_starts;
    if (k <= 0) { return guesses; }
    std::mt19937_64 rng(sequence_seed());
    auto uniform = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<std::vector<double>> strata(m, std::vector<double>(static_cast<std::size_t>(k)));
    for (std::size_t d = 0; d < m; ++d) {
      std::vector<int> perm(static_cast<std::size_t>(k));
      for (int s = 0; s < k; ++s) { perm[static_cast<std::size_t>(s)] = s; }
      for (int s = k - 1; s > 0; --s) {
        const auto r = static_cast<int>(rng() % static_cast<std::uint64_t>(s + 1));
        std::swap(perm[static_cast<std::size_t>(s)], perm[static_cast<std::size_t>(r)]);
      }
      for (int s = 0; s < k; ++s) {
        strata[d][static_cast<std::size_t>(s)] = (perm[static_cast<std::size_t>(s)] + uniform()) / k;
      }
    }
    for (int s = 0; s < k; ++s) {
      std::vector<double> g(m);
      for (std::size_t d = 0; d < m; ++d) {
        g[d] = scale * std::clamp(strata[d][static_cast<std::size_t>(s)], 1e-3, 1.0 - 1e-3);
      }
      std::sort(g.begin(), g.end());
      if (ordered(g)) { guesses.push_back(std::move(g)); }
    }
    return guesses;
  }

  /// Damped Newton from one start.
  /// A few undamped Newton steps past tolerance, kept only while the residual shrinks.
  void polish(std::vector<double> & times, Vector & f, double & fnorm) const
  {
    for (int k = 0; k < 3 && fnorm > 0.0; ++k) {
      try {
        const Matrix J = residual_jacobian(times, f, opts_.fd_step);
        Eigen::ColPivHouseholderQR<Matrix> qr(J);
        if (qr.rank() < J.cols()) { return; }
        const Vector delta = -qr.solve(f);
        std::vector<double> trial(times.size());
        for (std::size_t j = 0; j < times.size(); ++j) { trial[j] = times[j] + delta(static_cast<Eigen::Index>(j)); }
        if (!ordered(trial)) { return; }
        Vector ftrial = residual(trial);
        const double tn = ftrial.cwiseAbs().maxCoeff();
        if (!(tn < fnorm)) { return; }
        times = std::move(trial);
        f = std::move(ftrial);
        fnorm = tn;
      } catch (const std::exception &) {
        return;
      }
    }
  }

  StartOutcome newton(std::vector<double> times) const
  {
    StartOutcome out;
    out.initial_times = times;
    Vector f;
    try {
      f = residual(times);
    } catch (const SolveError & e) {
      out.failure = e.what();
      return out;
    } catch (const std::overflow_error & e) {
      out.failure = e.what();
      return out;
    }
    double fnorm = f.cwiseAbs().maxCoeff();
    for (int it = 0; it <= opts_.max_newton_iterations; ++it) {
      out.iterations = it;
      if (fnorm <= opts_.newton_tol) {
        out.converged = true;
        polish(times, f, fnorm);
        break;
      }
      if (it == opts_.max_newton_iterations) {
        out.failure = "iteration limit";
        break;
      }
      Matrix J;
      try {
        J = residual_jacobian(times, f, opts_.fd_step);
      } catch (const std::exception & e) {
        out.failure = std::string("jacobian: ") + e.what();
        break;
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(J);
      if (qr.rank() < J.cols()) {
        out.failure = "singular jacobian";
        break;
      }
      const Vector delta = -qr.solve(f);
      double step = 1.0;
      bool accepted = false;
      std::vector<double> trial(times.size());
      Vector ftrial;
      while (step * delta.cwiseAbs().maxCoeff() >= opts_.step_tol) {
        for (std::size_t j = 0; j < times.size(); ++j) {
          trial[j] = times[j] + step * delta(static_cast<Eigen::Index>(j));
        }
        if (ordered(trial)) {
          try {
            ftrial = residual(trial);
            if (ftrial.cwiseAbs().maxCoeff() < fnorm) {
              accepted = true;
              break;
            }
          } catch (const SolveError &) {
          } catch (const std::overflow_error &) {
          }
        }
        step *= 0.5;
      }
      if (!accepted) {
        out.failure = "step below tolerance";
        break;
      }
      times = trial;
      f = ftrial;
      fnorm = f.cwiseAbs().maxCoeff();
    }
    out.final_times = times;
    out.residual = fnorm;
    return out;
  }

private:
  const AffineHybridModel * model_;
  std::vector<ModeId> q_;
  std::vector<InputId> sigma_;
  Vector x_ic_;
  HorizonVariant variant_;
  SolverOptions opts_;
  std::vector<Matrix> Ae_;
  std::vector<Matrix> gain_;
  std::vector<std::size_t> transition_;
};

// ---------------------------------------------------------------------------
// Public operations

inline SolverUnknowns assemble_and_solve(
  const AffineHybridModel & model, const std::vector<ModeId> & q, const std::vector<InputId> & sigma,
  const Vector & x_ic, const std::vector<double> & times, const HorizonVariant & variant,
  const SolverOptions & opts = {})
{
  return SequenceProblem(model, q, sigma, x_ic, variant, opts).solve_linear(times);
}

inline Vector hamiltonian_gap(
  const AffineHybridModel & model, const std::vector<ModeId> & q, const std::vector<InputId> & sigma,
  const SolverUnknowns & unknowns, const SolverOptions & opts = {})
{
  if (unknowns.n() != q.size()) { throw ModelError("unknowns do not match the mode sequence"); }
  HorizonVariant v = unknowns.free_final() ? HorizonVariant{FreeFinal{}} : HorizonVariant{FixedHorizon{1.0}};
  SequenceProblem prob(model, q, sigma, Vector::Zero(model.nx()), v, opts);
  return prob.hamiltonian_gap(unknowns);
}

/**
 * @brief Solves the sequence-conditioned problem including its jump times.
 *
 * Throws SolveError(NoRoot) when no start converges and
 * SolveError(SingularSystem) when every start failed on a degenerate system.
 */
inline SolverSolution solve_jump_times(const SequenceProblem & prob)
{
  const auto & opts = prob.options();
  if (prob.n() == 1) {
    double cond = 0.0;
    SolverUnknowns y = prob.solve_linear({}, &cond);
    SolverSolution sol = prob.reconstruct({}, std::move(y));
    sol.diagnostics.condition_estimate = cond;
    sol.diagnostics.starts_tried = 1;
    sol.diagnostics.starts_converged = 1;
    return sol;
  }

  SolverDiagnostics diag;
  bool any_non_singular = false;
  std::optional<SolverSolution> best;
  std::vector<std::vector<double>> roots;
  for (const auto & guess : prob.initial_guesses()) {
    StartOutcome out = prob.newton(guess);
    ++diag.starts_tried;
    if (out.failure.rfind("SingularSystem", 0) != 0) { any_non_singular = true; }
    if (out.converged && !prob.ordered(out.final_times)) {
      out.converged = false;
      out.failure = "OrderViolation: converged root is not ordered";
    }
    if (out.converged) {
      ++diag.starts_converged;
      bool duplicate = false;
      for (const auto & r : roots) {
        double d = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) { d = std::max(d, std::abs(r[j] - out.final_times[j])); }
        if (d < 1e-8) { duplicate = true; }
      }
      if (!duplicate) {
        roots.push_back(out.final_times);
        try {
          double cond = 0.0;
          SolverUnknowns y = prob.solve_linear(out.final_times, &cond);
          SolverSolution sol = prob.reconstruct(out.final_times, std::move(y));
          sol.diagnostics.condition_estimate = cond;
          sol.diagnostics.newton_iterations = out.iterations;
          sol.diagnostics.residual_norm = out.residual;
          out.cost = prob.free_final() ? sol.cost.Jm : sol.cost.J;
          const double best_cost = best ? (prob.free_final() ? best->cost.Jm : best->cost.J) : 0.0;
          if (!best || out.cost < best_cost) { best = std::move(sol); }
        } catch (const SolveError & e) {
          out.failure = e.what();
        }
      }
    }
    diag.starts.push_back(std::move(out));
  }
  if (!best) {
    if (!any_non_singular) {
      throw SolveError(SolveFailure::SingularSystem, "linear system degenerate at every start");
    }
    throw SolveError(SolveFailure::NoRoot, "no start converged");
  }
  diag.newton_iterations = best->diagnostics.newton_iterations;
  diag.residual_norm = best->diagnostics.residual_norm;
  diag.condition_estimate = best->diagnostics.condition_estimate;
  best->diagnostics = std::move(diag);
  return std::move(*best);
}

inline SolverSolution solve_jump_times(
  const AffineHybridModel & model, const std::vector<ModeId> & q, const std::vector<InputId> & sigma,
  const Vector & x_ic, const HorizonVariant & variant, const SolverOptions & opts = {})
{
  return solve_jump_times(SequenceProblem(model, q, sigma, x_ic, variant, opts));
}

struct SequenceScore
{
  Vector u0;
  double J = 0.0;
  SolverSolution solution;
};

/// Fixed-horizon solve scored by the full cost J.
inline SequenceScore jpmpa(
  const AffineHybridModel & model, const Vector & x_ic, const std::vector<InputId> & sigma,
  const std::vector<ModeId> & q, double horizon, const SolverOptions & opts = {})
{
  SolverSolution sol = solve_jump_times(model, q, sigma, x_ic, FixedHorizon{horizon}, opts);
  return {sol.u0, sol.cost.J, std::move(sol)};
}

/// Free-final-time solve scored by J_m (no terminal cost).
inline SequenceScore jpmpb(
  const AffineHybridModel & model, const Vector & x_ic, const std::vector<InputId> & sigma,
  const std::vector<ModeId> & q, const SolverOptions & opts = {})
{
  if (q.size() < 2) { throw ModelError("jpmpb needs a sequence with at least one jump"); }
  SolverSolution sol = solve_jump_times(model, q, sigma, x_ic, FreeFinal{}, opts);
  return {sol.u0, sol.cost.Jm, std::move(sol)};
}

// ---------------------------------------------------------------------------
// Residual audit

struct MaximumPrincipleResiduals
{
  double costate_flow = 0.0;      // lambda' + Wx (x - xbar) + A^T lambda, sampled
  double costate_jump = 0.0;      // lambda_i^- - Lx^T lambda_i^+ - alpha_i Mx^T
  double terminal = 0.0;          // lambda_n^- - Wf (x_n^- - xbar), or |lambda_{n-1}^+|
  double guard = 0.0;             // |Mx x_i^- + Mc|
  double reset = 0.0;             // |x_i^+ - Lx x_i^- - Lc|
  double hamiltonian_gap = 0.0;   // |F_h|
};

/**
 * @brief Evaluates the optimality conditions on the reconstructed closed-form
 * execution (boundary values re-propagated through each segment, not read
 * back from the linear solve).
 */
inline MaximumPrincipleResiduals maximum_principle_residuals(
  const AffineHybridModel & model, const SolverSolution & sol, const SolverOptions & opts = {},
  int samples_per_segment = 32)
{
  MaximumPrincipleResiduals r;
  const auto & exec = sol.execution;
  const std::size_t n = exec.size();
  const bool ff = sol.unknowns.free_final();

  for (std::size_t i = 0; i < n; ++i) {
    const auto & seg = exec.segments()[i];
    const double L = seg.duration();
    if (L <= 0.0) { continue; }
    const auto & mode = model.mode(seg.mode());
    const auto & c = model.mode_cost(seg.mode());
    // five-point stencil; sample offsets keep t +- 2h inside the segment
    const double h = std::min(1e-3, 0.1 / samples_per_segment) * L;
    for (int k = 0; k < samples_per_segment; ++k) {
      const double t = seg.t_start() + (k + 0.5) / samples_per_segment * L;
      const Vector lam = *seg.costate(t);
      const Vector lam_dot =
        (*seg.costate(t - 2 * h) - 8.0 * *seg.costate(t - h) + 8.0 * *seg.costate(t + h) - *seg.costate(t + 2 * h)) /
        (12.0 * h);
      const Vector res = lam_dot + c.Wx * (seg.state(t) - c.xbar) + mode.A.transpose() * lam;
      r.costate_flow = std::max(r.costate_flow, res.cwiseAbs().maxCoeff());
    }
  }

  auto lambda_minus = [&](std::size_t i) { return *exec.segments()[i - 1].costate(exec.times()[i]); };
  auto lambda_plus = [&](std::size_t i) { return *exec.segments()[i].costate(exec.times()[i]); };

  Vector gap(static_cast<Eigen::Index>(n - 1));
  for (std::size_t i = 1; i < n; ++i) {
    const ModeId q0 = exec.modes()[i - 1], q1 = exec.modes()[i];
    const auto & tr = model.transition(model.find_transition(q0, exec.inputs()[i - 1], q1));
    const Vector xm = exec.x_minus(i), xp = exec.x_plus(i);
    const Vector lm = lambda_minus(i), lp = lambda_plus(i);
    r.guard = std::max(r.guard, std::abs(tr.Mx.dot(xm) + tr.Mc));
    r.reset = std::max(r.reset, (xp - tr.Lx * xm - tr.Lc).cwiseAbs().maxCoeff());
    const Vector jump = lm - tr.Lx.transpose() * lp - sol.unknowns.alpha(i) * tr.Mx.transpose();
    r.costate_jump = std::max(r.costate_jump, jump.cwiseAbs().maxCoeff());

    const auto & m0 = model.mode(q0);
    const auto & c0 = model.mode_cost(q0);
    const auto & m1 = model.mode(q1);
    const auto & c1 = model.mode_cost(q1);
    const double hm = hamiltonian(m0, c0, xm, optimal_control(m0, c0, lm), lm);
    double hp = hamiltonian(m1, c1, xp, optimal_control(m1, c1, lp), lp);
    if (ff && i == n - 1 && opts.final_switch == FinalSwitchCondition::VanishingHamiltonian) { hp = 0.0; }
    gap(static_cast<Eigen::Index>(i - 1)) = hm - hp;
  }
  r.hamiltonian_gap = gap.size() ? gap.cwiseAbs().maxCoeff() : 0.0;

  if (ff) {
    r.terminal = lambda_plus(n - 1).cwiseAbs().maxCoeff();
  } else {
    const auto & c = model.mode_cost(exec.modes().back());
    const Vector lam = *exec.segments().back().costate(exec.tf());
    r.terminal = (lam - c.Wf * (exec.x_minus(n) - c.xbar)).cwiseAbs().maxCoeff();
  }
  return r;
}

}  // namespace hympc
