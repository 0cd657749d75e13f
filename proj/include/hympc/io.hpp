#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hympc/execution.hpp"
#include "hympc/model.hpp"

namespace hympc {

using Json = nlohmann::json;

/// Ill-formed configuration content.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable file.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Matrix json_matrix(const Json & j, const std::string & what)
{
  if (!j.is_array()) { throw ConfigError(what + ": expected a nested array"); }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) { return Matrix(0, 0); }
  if (!j[0].is_array()) { throw ConfigError(what + ": expected a nested array"); }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto & row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(what + ": ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto & v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) { throw ConfigError(what + ": non-numeric entry"); }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline Vector json_vector(const Json & j, const std::string & what)
{
  if (!j.is_array()) { throw ConfigError(what + ": expected an array"); }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) { throw ConfigError(what + ": non-numeric entry"); }
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline double json_number(const Json & j, const std::string & what)
{
  if (!j.is_number()) { throw ConfigError(what + ": expected a number"); }
  return j.get<double>();
}

inline Polyhedron json_polyhedron(const Json & j, int nx, const std::string & what)
{
  Polyhedron poly;
  if (!j.is_object()) { throw ConfigError(what + ": expected an object with P and p"); }
  poly.P = j.contains("P") ? json_matrix(j.at("P"), what + ".P") : Matrix(0, nx);
  poly.p = j.contains("p") ? json_vector(j.at("p"), what + ".p") : Vector(0);
  if (poly.P.rows() == 0) { poly.P.resize(0, nx); }
  return poly;
}

inline const Json & require(const Json & j, const char * key, const std::string & what)
{
  if (!j.contains(key)) { throw ConfigError(what + ": missing key '" + key + "'"); }
  return j.at(key);
}

}  // namespace detail

/**
 * @brief Builds a model from its JSON description.
 *
 * Mode ids follow the order of `modes`; input ids follow the lexicographic
 * order of the input names used by `transitions`.
 */
inline AffineHybridModel parse_model(const Json & root)
{
  using namespace detail;
  if (!root.is_object()) { throw ConfigError("config root must be an object"); }
  const int nx = static_cast<int>(json_number(require(root, "n_x", "config"), "n_x"));
  const int nu = static_cast<int>(json_number(require(root, "n_u", "config"), "n_u"));

  const Json & jmodes = require(root, "modes", "config");
  if (!jmodes.is_array() || jmodes.empty()) { throw ConfigError("modes: expected a non-empty array"); }
  std::vector<std::string> mode_names;
  std::vector<AffineMode> modes;
  for (const auto & jm : jmodes) {
    const std::string id = require(jm, "id", "mode").get<std::string>();
    if (std::find(mode_names.begin(), mode_names.end(), id) != mode_names.end()) {
      throw ConfigError("duplicate mode id '" + id + "'");
    }
    const std::string what = "mode " + id;
    AffineMode m;
    m.A = json_matrix(require(jm, "A", what), what + ".A");
    m.Bu = json_matrix(require(jm, "Bu", what), what + ".Bu");
    m.Bc = jm.contains("Bc") ? json_vector(jm.at("Bc"), what + ".Bc") : Vector(Vector::Zero(nx));
    m.domain = jm.contains("domain") ? json_polyhedron(jm.at("domain"), nx, what + ".domain") : Polyhedron{Matrix(0, nx), Vector(0)};
    mode_names.push_back(id);
    modes.push_back(std::move(m));
  }
  auto mode_of = [&](const std::string & name, const std::string & what) {
    auto it = std::find(mode_names.begin(), mode_names.end(), name);
    if (it == mode_names.end()) { throw ConfigError(what + ": unknown mode '" + name + "'"); }
    return ModeId{static_cast<std::size_t>(it - mode_names.begin())};
  };

  const Json jtrans = root.contains("transitions") ? root.at("transitions") : Json::array();
  if (!jtrans.is_array()) { throw ConfigError("transitions: expected an array"); }
  std::set<std::string> input_set;
  for (const auto & jt : jtrans) { input_set.insert(require(jt, "input", "transition").get<std::string>()); }
  const std::vector<std::string> input_names(input_set.begin(), input_set.end());

  std::vector<AffineTransition> transitions;
  std::vector<JumpCost> jumps;
  for (std::size_t k = 0; k < jtrans.size(); ++k) {
    const auto & jt = jtrans[k];
    const std::string what = "transition " + std::to_string(k);
    AffineTransition tr;
    tr.source = mode_of(require(jt, "source", what).get<std::string>(), what);
    tr.target = mode_of(require(jt, "target", what).get<std::string>(), what);
    const std::string input = jt.at("input").get<std::string>();
    tr.input = InputId{static_cast<std::size_t>(
      std::find(input_names.begin(), input_names.end(), input) - input_names.begin())};
    tr.Mx = json_vector(require(jt, "Mx", what), what + ".Mx").transpose();
    tr.Mc = json_number(require(jt, "Mc", what), what + ".Mc");
    tr.Lx = jt.contains("Lx") ? json_matrix(jt.at("Lx"), what + ".Lx") : Matrix(Matrix::Identity(nx, nx));
    tr.Lc = jt.contains("Lc") ? json_vector(jt.at("Lc"), what + ".Lc") : Vector(Vector::Zero(nx));
    if (jt.contains("extra_guard")) { tr.extra_guard = json_polyhedron(jt.at("extra_guard"), nx, what + ".extra_guard"); }
    JumpCost jc;
    const Json & jj = require(jt, "jump_cost", what);
    if (jj.is_number()) {
      jc.weight = jj.get<double>();
    } else if (jj.is_object()) {
      jc.weight = json_number(require(jj, "weight", what + ".jump_cost"), what + ".jump_cost.weight");
      if (jj.contains("schedule")) {
        const Vector s = json_vector(jj.at("schedule"), what + ".jump_cost.schedule");
        jc.schedule.assign(s.data(), s.data() + s.size());
      }
    } else {
      throw ConfigError(what + ".jump_cost: expected a number or an object");
    }
    transitions.push_back(std::move(tr));
    jumps.push_back(std::move(jc));
  }

  QuadraticCostSpec cost;
  cost.jumps = std::move(jumps);
  const Json & jcost = require(root, "cost", "config");
  if (!jcost.is_object()) { throw ConfigError("cost: expected an object keyed by mode id"); }
  for (const auto & [key, value] : jcost.items()) { mode_of(key, "cost"); }
  for (const auto & name : mode_names) {
    const std::string what = "cost " + name;
    if (!jcost.contains(name)) { throw ConfigError(what + ": missing"); }
    const Json & jc = jcost.at(name);
    ModeCost c;
    c.Wx = json_matrix(require(jc, "Wx", what), what + ".Wx");
    c.Wu = json_matrix(require(jc, "Wu", what), what + ".Wu");
    c.Wc = jc.contains("Wc") ? json_number(jc.at("Wc"), what + ".Wc") : 0.0;
    c.xbar = jc.contains("xbar") ? json_vector(jc.at("xbar"), what + ".xbar") : Vector(Vector::Zero(nx));
    c.ubar = jc.contains("ubar") ? json_vector(jc.at("ubar"), what + ".ubar") : Vector(Vector::Zero(nu));
    c.Wf = jc.contains("Wf") ? json_matrix(jc.at("Wf"), what + ".Wf") : Matrix(Matrix::Zero(nx, nx));
    cost.modes.push_back(std::move(c));
  }
  return AffineHybridModel(nx, nu, std::move(modes), std::move(transitions), std::move(cost), mode_names, input_names);
}

inline Json read_json_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open '" + path + "'"); }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error & e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline AffineHybridModel load_model(const std::string & path) { return parse_model(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Output

/// Shortest text that round-trips a double (17 significant digits).
inline std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline Json to_json(const Vector & v)
{
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { j.push_back(v(i)); }
  return j;
}

inline Json to_json(const CostBreakdown & c)
{
  return Json{{"stage", c.stage}, {"jumps", c.jumps}, {"terminal", c.terminal}, {"J_m", c.Jm}, {"J", c.J}};
}

/**
 * @brief CSV trace `t,mode,x_1..x_nx,u_1..u_nu,side`.
 *
 * Each segment is sampled on a uniform grid of roughly `sample_dt`; jump
 * instants produce a `-` row (left limit) followed by a `+` row.
 */
inline void write_execution_csv(
  std::ostream & out, const AffineHybridModel & model, const Execution & exec, double sample_dt = 0.01)
{
  out << "t,mode";
  for (int i = 1; i <= model.nx(); ++i) { out << ",x_" << i; }
  for (int i = 1; i <= model.nu(); ++i) { out << ",u_" << i; }
  out << ",side\n";
  auto row = [&](double t, ModeId q, const Vector & x, const Vector & u, const char * side) {
    out << format_double(t) << ',' << model.mode_name(q);
    for (Eigen::Index i = 0; i < x.size(); ++i) { out << ',' << format_double(x(i)); }
    for (Eigen::Index i = 0; i < u.size(); ++i) { out << ',' << format_double(u(i)); }
    out << ',' << side << '\n';
  };
  const std::size_t n = exec.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto & seg = exec.segments()[i];
    const double L = seg.duration();
    if (L <= 0.0) {
      if (i == n - 1 && i > 0) { continue; }
      row(seg.t_start(), seg.mode(), seg.state(seg.t_start()), seg.control(seg.t_start()), i > 0 ? "+" : "");
      continue;
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(L / sample_dt)));
    for (int k = 0; k <= steps; ++k) {
      const double t = k == steps ? seg.t_end() : seg.t_start() + L * k / steps;
      const char * side = "";
      if (k == 0 && i > 0) { side = "+"; }
      if (k == steps && i + 1 < n) { side = "-"; }
      if (k == steps && i + 1 == n) { side = ""; }
      if (k == steps && i + 1 < n && exec.segments()[i + 1].duration() <= 0.0) {
        // jump into an empty final segment: emit both sides here
        row(t, seg.mode(), seg.state(t), seg.control(t), "-");
        const auto & last = exec.segments()[i + 1];
        row(t, last.mode(), last.state(t), last.control(t), "+");
        continue;
      }
      row(t, seg.mode(), seg.state(t), seg.control(t), side);
    }
  }
}

inline Json execution_summary(const AffineHybridModel & model, const Execution & exec, const CostBreakdown & cost)
{
  Json j;
  Json tj = Json::array();
  for (std::size_t i = 1; i < exec.size(); ++i) { tj.push_back(exec.times()[i]); }
  Json qj = Json::array(), sj = Json::array();
  for (ModeId q : exec.modes()) { qj.push_back(model.mode_name(q)); }
  for (InputId s : exec.inputs()) { sj.push_back(model.input_name(s)); }
  j["t_jumps"] = tj;
  j["t_final"] = exec.tf();
  j["q_seq"] = qj;
  j["sigma_seq"] = sj;
  j["J"] = cost.J;
  j["J_m"] = cost.Jm;
  j["cost"] = to_json(cost);
  return j;
}

inline void write_text_file(const std::string & path, const std::string & content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw IoError("cannot write '" + path + "'"); }
  out << content;
  if (!out) { throw IoError("write failed for '" + path + "'"); }
}

}  // namespace hympc
