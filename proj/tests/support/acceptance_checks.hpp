#pragma once

// Quantitative acceptance checks. Each check prints one PASS/FAIL line.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hympc/cli.hpp"
#include "hympc/hympc.hpp"
#include "oracles.hpp"

#ifndef HYMPC_BENCHMARK_PATH
#define HYMPC_BENCHMARK_PATH "data/benchmark.json"
#endif

namespace hympc::acceptance {

struct Settings
{
  std::string benchmark_path = HYMPC_BENCHMARK_PATH;
  bool verbose = false;
  int random_instances = 50;
  std::uint64_t random_seed = 20240611;
};

struct CheckResult
{
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string sci(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

namespace detail {

inline const std::vector<ModeId> kQ1{ModeId{0}};
inline const std::vector<ModeId> kQ12{ModeId{0}, ModeId{1}};
inline const std::vector<ModeId> kQ121{ModeId{0}, ModeId{1}, ModeId{0}};
inline const std::vector<InputId> kS1{InputId{0}};
inline const std::vector<InputId> kS11{InputId{0}, InputId{0}};

inline Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) { out(i++) = x; }
  return out;
}

inline std::string slurp(const std::filesystem::path & p)
{
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

// 1 -------------------------------------------------------------------------
inline CheckResult check_lqr(const Settings & s)
{
  CheckResult r{1, "LQR equivalence (Riccati sweep)"};
  const auto model = load_model(s.benchmark_path);
  double ex = 0.0, eu = 0.0, ec = 0.0;
  for (std::size_t q = 0; q < model.mode_count(); ++q) {
    for (const Vector & x0 : {detail::vec({0.0, 0.0}), detail::vec({0.7, -0.4})}) {
      const std::vector<ModeId> seq{ModeId{q}};
      const auto sc = jpmpa(model, x0, {}, seq, 2.0);
      const auto o = oracle::riccati_lqr(model.mode(ModeId{q}), model.mode_cost(ModeId{q}), x0, 2.0, 1e-5);
      for (std::size_t k = 0; k < o.t.size(); k += 50) {
        const auto smp = evaluate(sc.solution.execution, o.t[k], Side::Right);
        ex = std::max(ex, (smp.x - o.x[k]).cwiseAbs().maxCoeff());
        eu = std::max(eu, (smp.u - o.u[k]).cwiseAbs().maxCoeff());
      }
      ec = std::max(ec, std::abs(sc.J - o.value) / std::abs(o.value));
      ec = std::max(ec, std::abs(sc.J - o.integrated) / std::abs(o.integrated));
    }
  }
  r.passed = ex <= 1e-6 && eu <= 1e-6 && ec <= 1e-6;
  r.detail = "sup|dx|=" + sci(ex) + " sup|du|=" + sci(eu) + " rel dJ=" + sci(ec) + " (tol 1e-6)";
  return r;
}

// 2 -------------------------------------------------------------------------
inline CheckResult check_residuals(const Settings & s)
{
  CheckResult r{2, "maximum-principle residual suite"};
  MaximumPrincipleResiduals worst;
  int solutions = 0, multi_mode_instances = 0, violations = 0;
  auto audit = [&](const AffineHybridModel & m, const SolverSolution & sol) {
    const auto res = maximum_principle_residuals(m, sol);
    ++solutions;
    worst.costate_flow = std::max(worst.costate_flow, res.costate_flow);
    worst.costate_jump = std::max(worst.costate_jump, res.costate_jump);
    worst.terminal = std::max(worst.terminal, res.terminal);
    worst.guard = std::max(worst.guard, res.guard);
    worst.reset = std::max(worst.reset, res.reset);
    worst.hamiltonian_gap = std::max(worst.hamiltonian_gap, res.hamiltonian_gap);
    if (!cli::residuals_acceptable(res)) { ++violations; }
  };
  for (int i = 0; i < s.random_instances; ++i) {
    const auto m = oracle::random_two_mode(s.random_seed + static_cast<std::uint64_t>(i));
    const Vector x0 = Vector::Zero(m.nx());
    bool multi = false;
    audit(m, jpmpa(m, x0, {}, detail::kQ1, 2.0).solution);
    for (const auto & [q, sg] : {std::pair{detail::kQ12, detail::kS1}, std::pair{detail::kQ121, detail::kS11}}) {
      for (bool ff : {false, true}) {
        try {
          const auto sc = ff ? jpmpb(m, x0, sg, q) : jpmpa(m, x0, sg, q, 2.0);
          audit(m, sc.solution);
          multi = true;
        } catch (const SolveError &) {
        }
      }
    }
    if (multi) { ++multi_mode_instances; }
  }
  const int required = (4 * s.random_instances) / 5;
  r.passed = violations == 0 && multi_mode_instances >= required;
  r.detail = std::to_string(solutions) + " solutions, " + std::to_string(multi_mode_instances) + "/" +
             std::to_string(s.random_instances) + " instances with jumps (need " + std::to_string(required) +
             "), worst: flow " + sci(worst.costate_flow) + " jump " + sci(worst.costate_jump) + " terminal " +
             sci(worst.terminal) + " guard " + sci(worst.guard) + " reset " + sci(worst.reset) + " gap " +
             sci(worst.hamiltonian_gap);
  return r;
}

// 3 -------------------------------------------------------------------------
inline CheckResult check_dimensions(const Settings &)
{
  CheckResult r{3, "square-system dimension"};
  int cases = 0, bad = 0;
  for (int nx = 1; nx <= 3; ++nx) {
    const auto m = oracle::random_two_mode(77 + static_cast<std::uint64_t>(nx), nx, 1);
    for (std::size_t n = 1; n <= 4; ++n) {
      std::vector<ModeId> q;
      std::vector<InputId> sg;
      for (std::size_t i = 0; i < n; ++i) {
        q.push_back(ModeId{i % 2});
        if (i > 0) { sg.push_back(InputId{0}); }
      }
      for (bool ff : {false, true}) {
        const HorizonVariant v = ff ? HorizonVariant{FreeFinal{}} : HorizonVariant{FixedHorizon{1.0}};
        const SequenceProblem prob(m, q, sg, Vector::Zero(nx), v);
        std::vector<double> ts;
        for (std::size_t i = 1; i < n; ++i) { ts.push_back(static_cast<double>(i) / static_cast<double>(n)); }
        const auto sys = prob.assemble(ts);
        const auto expect = static_cast<Eigen::Index>(
          ff ? (4 * n - 2) * static_cast<std::size_t>(nx) + n - 1 : 4 * n * static_cast<std::size_t>(nx) + n - 1);
        ++cases;
        if (sys.matrix.rows() != expect || sys.matrix.cols() != expect || sys.rhs.size() != expect ||
            static_cast<Eigen::Index>(SolverUnknowns::dimension(n, nx, ff)) != expect) {
          ++bad;
        }
      }
    }
  }
  r.passed = bad == 0;
  r.detail = std::to_string(cases - bad) + "/" + std::to_string(cases) + " (n, n_x, variant) cases square with the expected size";
  return r;
}

// 4 -------------------------------------------------------------------------

/// Per-mode piecewise-linear replay of a solver control sampled every `dt`.
inline InputFunction sampled_replay(const Execution & exec, double dt)
{
  struct Table
  {
    ModeId q;
    std::vector<double> t;
    std::vector<Vector> u;
  };
  std::vector<Table> tables;
  for (const auto & seg : exec.segments()) {
    if (seg.duration() <= 0.0) { continue; }
    Table tb{seg.mode(), {}, {}};
    const int k = std::max(1, static_cast<int>(std::ceil(seg.duration() / dt)));
    for (int i = 0; i <= k; ++i) {
      const double t = i == k ? seg.t_end() : seg.t_start() + i * dt;
      tb.t.push_back(t);
      tb.u.push_back(seg.control(t));
    }
    tables.push_back(std::move(tb));
  }
  return [tables](double t, ModeId q) -> Vector {
    // latest visit of q that starts no later than t (or the first visit)
    const Table * tb = nullptr;
    for (const auto & cand : tables) {
      if (cand.q != q) { continue; }
      if (!tb || cand.t.front() <= t + 1e-9) { tb = &cand; }
    }
    if (!tb) { return tables.front().u.front() * 0.0; }
    const auto & ts = tb->t;
    if (t <= ts.front()) { return tb->u.front(); }
    if (t >= ts.back()) { return tb->u.back(); }
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const auto i = static_cast<std::size_t>(it - ts.begin()) - 1;
    const double w = (t - ts[i]) / (ts[i + 1] - ts[i]);
    return (1.0 - w) * tb->u[i] + w * tb->u[i + 1];
  };
}

inline CheckResult check_replay(const Settings & s)
{
  CheckResult r{4, "cross-integrator consistency"};
  const auto model = load_model(s.benchmark_path);
  double ex = 0.0, et = 0.0;
  bool jumps_match = true;
  struct Case
  {
    std::vector<ModeId> q;
    std::vector<InputId> sg;
    Vector x0;
  };
  const std::vector<Case> cases{
    {detail::kQ12, detail::kS1, detail::vec({0.0, 0.0})},
    {detail::kQ12, detail::kS1, detail::vec({0.3, 0.5})},
    {detail::kQ1, {}, detail::vec({0.0, 0.0})},
    {detail::kQ12, detail::kS1, detail::vec({-0.5, 0.2})}};
  for (const auto & c : cases) {
    SolverSolution sol;
    try {
      sol = jpmpa(model, c.x0, c.sg, c.q, 2.0).solution;
    } catch (const SolveError &) {
      continue;
    }
    // the latch arms the planned jumps only
    const std::optional<InputId> latch = c.sg.empty() ? std::nullopt : std::optional<InputId>(c.sg.front());
    InputSchedule sched{sampled_replay(sol.execution, 1e-3), [latch](double) { return latch; }};
    const Execution sim = simulate(model, c.x0, c.q.front(), sched, 2.0);
    if (sim.jump_count() != sol.execution.jump_count() || sim.modes() != sol.execution.modes()) {
      jumps_match = false;
      continue;
    }
    for (std::size_t i = 1; i < sim.size(); ++i) { et = std::max(et, std::abs(sim.times()[i] - sol.execution.times()[i])); }
    for (int k = 0; k <= 2000; ++k) {
      const double t = 2.0 * k / 2000.0;
      bool near_jump = false;
      for (std::size_t i = 1; i < sim.size(); ++i) {
        near_jump = near_jump || std::abs(t - sim.times()[i]) < 1e-5 || std::abs(t - sol.execution.times()[i]) < 1e-5;
      }
      if (near_jump) { continue; }
      const auto a = evaluate(sim, t, Side::Right);
      const auto b = evaluate(sol.execution, t, Side::Right);
      ex = std::max(ex, (a.x - b.x).cwiseAbs().maxCoeff());
    }
  }
  r.passed = jumps_match && ex <= 1e-5 && et <= 1e-6;
  r.detail = std::string(jumps_match ? "" : "jump sequences differ; ") + "sup|dx|=" + sci(ex) + " (tol 1e-5), max|dt_jump|=" +
             sci(et) + " (tol 1e-6)";
  return r;
}

// 5 and 7 share the benchmark start set ---------------------------------------
inline std::vector<std::pair<ModeId, Vector>> benchmark_starts()
{
  return {
    {ModeId{0}, detail::vec({0.0, 0.0})},  {ModeId{0}, detail::vec({0.5, 1.0})}, {ModeId{0}, detail::vec({-0.5, 0.0})},
    {ModeId{0}, detail::vec({0.9, -0.3})}, {ModeId{1}, detail::vec({1.2, 0.3})}, {ModeId{1}, detail::vec({0.8, -0.5})},
    {ModeId{1}, detail::vec({2.0, 0.0})}};
}

inline double enumeration_minimum(const AffineHybridModel & model, ModeId q0, const Vector & x0, std::size_t depth, double T)
{
  double best = std::numeric_limits<double>::infinity();
  oracle::enumerate_sequences(model, q0, depth, [&](const std::vector<ModeId> & q, const std::vector<InputId> & sg) {
    try {
      best = std::min(best, jpmpa(model, x0, sg, q, T).J);
    } catch (const SolveError &) {
    }
  });
  return best;
}

inline CheckResult check_exactness(const Settings & s)
{
  CheckResult r{5, "branch-and-bound exactness"};
  const auto model = load_model(s.benchmark_path);
  double worst = 0.0;
  int cases = 0, bad = 0;
  for (std::size_t D = 1; D <= 3; ++D) {
    for (const auto & [q0, x0] : benchmark_starts()) {
      MpcOptions o;
      o.horizon = 2.0;
      o.max_depth = D;
      const double brute = enumeration_minimum(model, q0, x0, D, 2.0);
      ++cases;
      try {
        const auto res = mpc_step(model, q0, x0, o);
        const double d = std::abs(res.chosen.J - brute);
        worst = std::max(worst, d);
        if (!(d <= 1e-8)) { ++bad; }
      } catch (const MpcError &) {
        if (std::isfinite(brute)) { ++bad; }
      }
    }
  }
  r.passed = bad == 0;
  r.detail = std::to_string(cases - bad) + "/" + std::to_string(cases) + " starts x depths agree, max |J_bb - J_enum|=" + sci(worst) + " (tol 1e-8)";
  return r;
}

// 6 -------------------------------------------------------------------------
inline CheckResult check_lower_bound(const Settings & s)
{
  CheckResult r{6, "lower-bound property"};
  const auto model = load_model(s.benchmark_path);
  double min_margin = std::numeric_limits<double>::infinity();
  int prefixes = 0, bad = 0;
  const double T = 2.0;
  const std::vector<std::pair<ModeId, Vector>> starts{
    {ModeId{0}, detail::vec({0.0, 0.0})}, {ModeId{0}, detail::vec({0.5, 1.0})}, {ModeId{1}, detail::vec({1.2, 0.3})}};
  for (const auto & [q0, x0] : starts) {
    oracle::enumerate_sequences(model, q0, 3, [&](const std::vector<ModeId> & q, const std::vector<InputId> & sg) {
      if (q.size() < 2) { return; }
      double Jm = 0.0;
      try {
        Jm = jpmpb(model, x0, sg, q).J;
      } catch (const SolveError &) {
        return;
      }
      ++prefixes;
      // completions of this prefix up to three modes
      oracle::enumerate_sequences(model, q0, 3, [&](const std::vector<ModeId> & cq, const std::vector<InputId> & cs) {
        if (cq.size() < q.size() || !std::equal(q.begin(), q.end(), cq.begin()) || !std::equal(sg.begin(), sg.end(), cs.begin())) {
          return;
        }
        const int cells = cq.size() == 2 ? 200 : 40;
        const double g = oracle::fixed_horizon_grid_minimum(model, cq, cs, x0, T, cells, 5e-3);
        if (!std::isfinite(g)) { return; }
        min_margin = std::min(min_margin, g - Jm);
        if (Jm > g + 1e-8) { ++bad; }
      });
    });
  }
  r.passed = bad == 0 && prefixes > 0;
  r.detail = std::to_string(prefixes) + " prefixes, min(grid completion - J_m)=" + sci(min_margin) + " (must be >= -1e-8)";
  return r;
}

// 7 -------------------------------------------------------------------------
inline CheckResult check_iteration_bound(const Settings & s)
{
  CheckResult r{7, "iteration bound"};
  bool unit_ok = iteration_bound(2.3, 0.5, 2, 1) == 5 && iteration_bound(2.0, 1.0, 3, 2) == 21 &&
                 iteration_bound(0.0, 1.0, 3, 2) == 1 && iteration_bound(7.9, 1.0, 1, 3) == 1;
  int calls = 0, bad = 0;
  double worst_ratio = 0.0;
  auto audit = [&](const AffineHybridModel & m, ModeId q0, const Vector & x0, std::size_t D) {
    MpcOptions o;
    o.horizon = 2.0;
    o.max_depth = D;
    try {
      const auto res = mpc_step(m, q0, x0, o);
      const auto bound = iteration_bound(res.chosen.J, minimum_jump_cost(m), m.mode_count(), m.input_count());
      ++calls;
      worst_ratio = std::max(worst_ratio, static_cast<double>(res.iterations) / static_cast<double>(bound));
      if (static_cast<std::uint64_t>(res.iterations) > bound) { ++bad; }
    } catch (const MpcError &) {
    }
  };
  const auto model = load_model(s.benchmark_path);
  for (const auto & [q0, x0] : benchmark_starts()) {
    for (std::size_t D = 1; D <= 3; ++D) { audit(model, q0, x0, D); }
  }
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_two_mode(s.random_seed + 1000 + static_cast<std::uint64_t>(i));
    audit(m, ModeId{0}, Vector::Zero(m.nx()), 3);
  }
  r.passed = unit_ok && bad == 0 && calls > 0;
  r.detail = std::string(unit_ok ? "unit values ok; " : "unit values WRONG; ") + std::to_string(calls - bad) + "/" +
             std::to_string(calls) + " mpc_step calls within bound, max iterations/bound=" + sci(worst_ratio);
  return r;
}

// 8 -------------------------------------------------------------------------
inline CheckResult check_expm(const Settings & s)
{
  CheckResult r{8, "matrix-exponential contract"};
  std::mt19937_64 rng(s.random_seed + 8);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.05, 1.5);
  bool identity_exact = true;
  double nil = 0.0, semi = 0.0, series = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_two_mode(s.random_seed + 500 + static_cast<std::uint64_t>(i), 1 + i % 3, 1);
    for (std::size_t q = 0; q < 2; ++q) {
      const Matrix Ae = extended_matrix(m.mode(ModeId{q}), m.mode_cost(ModeId{q}));
      const auto n2 = 2 * m.nx();
      Matrix expect = Matrix::Zero(n2, n2 + 1);
      expect.leftCols(n2) = Matrix::Identity(n2, n2);
      if (transition_map(Ae, 0.0) != expect) { identity_exact = false; }
      const double a = U(rng), b = U(rng);
      const Matrix lhs = expm(Ae * (a + b));
      const Matrix rhs = expm(Ae * a) * expm(Ae * b);
      semi = std::max(semi, (lhs - rhs).cwiseAbs().maxCoeff() / lhs.cwiseAbs().maxCoeff());
      const Matrix ref = oracle::series_expm(Ae * (a + b));
      series = std::max(series, (lhs - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
    }
  }
  for (int n = 2; n <= 7; ++n) {
    Matrix Nm = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) { Nm(i, j) = N(rng); }
    }
    nil = std::max(nil, (expm(Nm) - oracle::nilpotent_expm(Nm)).cwiseAbs().maxCoeff());
  }
  r.passed = identity_exact && nil <= 1e-14 && semi <= 1e-10;
  r.detail = std::string(identity_exact ? "Psi(0)=[I 0] exact; " : "Psi(0) NOT exact; ") + "nilpotent err=" + sci(nil) +
             " (tol 1e-14), semigroup rel err=" + sci(semi) + " (tol 1e-10), vs series rel err=" + sci(series);
  return r;
}

// 9 -------------------------------------------------------------------------
inline CheckResult check_jacobian(const Settings & s)
{
  CheckResult r{9, "F_t finite-difference Jacobian consistency"};
  double worst = 0.0;
  int cases = 0;
  auto probe = [&](const AffineHybridModel & m, const std::vector<ModeId> & q, const std::vector<InputId> & sg,
                   const Vector & x0, const HorizonVariant & v, const std::vector<double> & ts) {
    const SequenceProblem prob(m, q, sg, x0, v);
    if (!prob.ordered(ts)) { return; }
    double cond = 0.0;
    try {
      (void)prob.solve_linear(ts, &cond);
    } catch (const SolveError &) {
      return;
    }
    if (cond > 1e8) { return; }
    const Vector f0 = prob.residual(ts);
    const Matrix J = prob.residual_jacobian(ts, f0, 1e-6);
    // re-computed at a smaller forward step and by central differences with a larger one
    Matrix C(J.rows(), J.cols());
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const double h = 1e-4 * std::max(1.0, ts[j]);
      auto tp = ts, tm = ts;
      tp[j] += h;
      tm[j] -= h;
      C.col(static_cast<Eigen::Index>(j)) = (prob.residual(tp) - prob.residual(tm)) / (2.0 * h);
    }
    const Matrix J7 = prob.residual_jacobian(ts, f0, 1e-7);
    const double scale = C.cwiseAbs().maxCoeff();
    if (scale <= 0.0) { return; }
    worst = std::max(worst, (J - C).cwiseAbs().maxCoeff() / scale);
    worst = std::max(worst, (J - J7).cwiseAbs().maxCoeff() / scale);
    ++cases;
  };
  const auto model = load_model(s.benchmark_path);
  const Vector x0 = Vector::Zero(2);
  for (double t1 : {0.5, 0.84, 1.3}) {
    probe(model, detail::kQ12, detail::kS1, x0, FixedHorizon{2.0}, {t1});
    probe(model, detail::kQ12, detail::kS1, x0, FreeFinal{}, {t1});
    probe(model, detail::kQ121, detail::kS11, x0, FixedHorizon{2.0}, {t1, t1 + 0.5});
    probe(model, detail::kQ121, detail::kS11, x0, FreeFinal{}, {t1, t1 + 2.0});
  }
  for (int i = 0; i < 10; ++i) {
    const auto m = oracle::random_two_mode(s.random_seed + 900 + static_cast<std::uint64_t>(i));
    probe(m, detail::kQ12, detail::kS1, Vector::Zero(2), FixedHorizon{2.0}, {0.9});
    probe(m, detail::kQ121, detail::kS11, Vector::Zero(2), FixedHorizon{2.0}, {0.7, 1.4});
  }
  r.passed = cases > 0 && worst <= 1e-4;
  r.detail = std::to_string(cases) + " instances, max relative difference=" + sci(worst) + " (tol 1e-4)";
  return r;
}

// 10 ------------------------------------------------------------------------
inline CheckResult check_closed_loop(const Settings & s)
{
  CheckResult r{10, "closed-loop demo"};
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / ("hympc_closed_loop_" + std::to_string(::getpid()));
  const fs::path a = base / "a", b = base / "b";
  std::ostringstream out, err;
  const int rc1 = cli::run_cli({"mpc", s.benchmark_path, "--seed", "7", "--out", a.string()}, out, err);
  const int rc2 = cli::run_cli({"mpc", s.benchmark_path, "--seed", "7", "--out", b.string()}, out, err);
  bool identical = rc1 == 0 && rc2 == 0;
  for (const char * f : {"mpc_trace.csv", "mpc_summary.json", "mpc_plant.csv"}) {
    const auto x = detail::slurp(a / f), y = detail::slurp(b / f);
    identical = identical && !x.empty() && x == y;
  }
  double dist = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  if (rc1 == 0) {
    const Json summary = read_json_file((a / "mpc_summary.json").string());
    dist = summary.at("distance_to_target").get<double>();
    steps = summary.at("steps").get<std::size_t>();
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  r.passed = identical && steps <= 40 && dist <= 0.05;
  r.detail = "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", " + std::to_string(steps) +
             " steps, final |x - xbar|=" + sci(dist) + " (tol 0.05), reruns " + (identical ? "byte-identical" : "DIFFER");
  if (!err.str().empty()) { r.detail += "; stderr: " + err.str(); }
  return r;
}

// ---------------------------------------------------------------------------

inline std::vector<std::function<CheckResult(const Settings &)>> all_checks()
{
  return {check_lqr,  check_residuals,       check_dimensions, check_replay,  check_exactness,
          check_lower_bound, check_iteration_bound, check_expm, check_jacobian, check_closed_loop};
}

inline CheckResult run_check(const std::function<CheckResult(const Settings &)> & check, const Settings & s, int id)
{
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = check(s);
  } catch (const std::exception & e) {
    r.id = id;
    r.name = "check " + std::to_string(id);
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void print_line(std::ostream & out, const CheckResult & r)
{
  char head[96];
  std::snprintf(head, sizeof(head), "[%s] %2d %-44s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  out << head << ' ' << r.detail << "  (" << std::fixed;
  out.precision(1);
  out << r.seconds << " s)\n";
  out.unsetf(std::ios::fixed);
  out.precision(6);
}

/// Runs every check, one line each, and returns true when all pass.
inline bool run_all(const Settings & s, std::ostream & out)
{
  const auto checks = all_checks();
  int passed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto r = run_check(checks[i], s, static_cast<int>(i + 1));
    print_line(out, r);
    out.flush();
    if (r.passed) { ++passed; }
  }
  out << passed << "/" << checks.size() << " acceptance checks passed\n";
  return passed == static_cast<int>(checks.size());
}

}  // namespace hympc::acceptance
