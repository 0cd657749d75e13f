#include <gtest/gtest.h>

#include <cmath>

#include "hympc/expm.hpp"
#include "hympc/io.hpp"
#include "hympc/model.hpp"
#include "hympc/quadrature.hpp"
#include "oracles.hpp"

using namespace hympc;

namespace {

AffineHybridModel benchmark() { return load_model(HYMPC_BENCHMARK_PATH); }

Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) { out(i++) = d; }
  return out;
}

}  // namespace

TEST(Model, BenchmarkLoadsAndValidates)
{
  const auto m = benchmark();
  EXPECT_EQ(m.nx(), 2);
  EXPECT_EQ(m.nu(), 1);
  EXPECT_EQ(m.mode_count(), 2u);
  EXPECT_EQ(m.transitions().size(), 2u);
  const auto rep = validate(m);
  EXPECT_TRUE(rep.ok()) << (rep.errors.empty() ? "" : rep.errors.front());
}

TEST(Model, GuardResidualAndReset)
{
  const auto m = benchmark();
  const ModeId q1{0}, q2{1};
  const InputId s1{0};
  EXPECT_DOUBLE_EQ(guard_residual(m, q1, s1, q2, vec({1.0, 3.0})), 0.0);
  EXPECT_DOUBLE_EQ(guard_residual(m, q1, s1, q2, vec({0.25, 0.0})), 0.75);
  EXPECT_DOUBLE_EQ(guard_residual(m, q2, s1, q1, vec({0.25, 0.0})), -0.25);
  const Vector xp = apply_reset(m, q1, s1, q2, vec({1.0, -0.4}));
  EXPECT_DOUBLE_EQ(xp(0), 1.0);
  EXPECT_DOUBLE_EQ(xp(1), -0.4);
  EXPECT_THROW(guard_residual(m, q1, InputId{3}, q2, vec({0.0, 0.0})), ModelError);
}

TEST(Model, VectorFieldAndCosts)
{
  const auto m = benchmark();
  const Vector f = vector_field(m, ModeId{1}, vec({1.0, 2.0}), vec({0.5}));
  // A x = (2, -3), Bu u = (0, 1), Bc = (0, 1)
  EXPECT_DOUBLE_EQ(f(0), 2.0);
  EXPECT_DOUBLE_EQ(f(1), -1.0);
  EXPECT_THROW(vector_field(m, ModeId{0}, vec({1.0}), vec({0.0})), ModelError);
  // 0.5 * (1 * 1 + 0.1 * 4) + 0.5 * 0.2 * 1 + 1
  EXPECT_NEAR(stage_cost(m, ModeId{0}, vec({1.0}), vec({1.0, 2.0})), 1.8, 1e-14);
  EXPECT_NEAR(terminal_cost(m, ModeId{0}, vec({1.0, 2.0})), 0.7, 1e-14);
}

TEST(Model, TransitionsFromAreSorted)
{
  std::vector<AffineMode> modes(3);
  for (auto & md : modes) {
    md.A = Matrix::Zero(1, 1);
    md.Bu = Matrix::Ones(1, 1);
    md.Bc = Vector::Zero(1);
    md.domain = Polyhedron{Matrix::Zero(0, 1), Vector::Zero(0)};
  }
  auto tr = [](std::size_t from, std::size_t in, std::size_t to) {
    return AffineTransition{
      ModeId{from}, InputId{in}, ModeId{to}, RowVector::Ones(1), -1.0, Matrix::Identity(1, 1), Vector::Zero(1), {}};
  };
  QuadraticCostSpec cost;
  for (int i = 0; i < 3; ++i) {
    cost.modes.push_back({Matrix::Ones(1, 1), Matrix::Ones(1, 1), 0.0, Vector::Zero(1), Vector::Zero(1), Matrix::Ones(1, 1)});
  }
  cost.jumps.assign(4, JumpCost{});
  const AffineHybridModel m(1, 1, modes, {tr(0, 1, 2), tr(0, 1, 1), tr(0, 0, 2), tr(1, 0, 0)}, cost);
  const auto out = transitions_from(m, ModeId{0});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], std::make_pair(InputId{0}, ModeId{2}));
  EXPECT_EQ(out[1], std::make_pair(InputId{1}, ModeId{1}));
  EXPECT_EQ(out[2], std::make_pair(InputId{1}, ModeId{2}));
  EXPECT_TRUE(transitions_from(m, ModeId{2}).empty());
  EXPECT_THROW(transitions_from(m, ModeId{5}), ModelError);
}

TEST(Model, ValidateRejectsSingularInputWeight)
{
  const auto m = benchmark();
  auto cost = m.cost();
  cost.modes[0].Wu = Matrix::Zero(1, 1);
  const auto rep = validate(m.with_cost(cost));
  EXPECT_FALSE(rep.ok());
  EXPECT_TRUE(rep.mentions("Wu not positive definite"));
}

TEST(Model, ValidateRejectsIndefiniteStateWeight)
{
  const auto m = benchmark();
  auto cost = m.cost();
  cost.modes[1].Wx(0, 0) = -1.0;
  EXPECT_FALSE(validate(m.with_cost(cost)).ok());
}

TEST(Model, DomainMembership)
{
  const auto m = benchmark();
  EXPECT_TRUE(in_flow_domain(m, ModeId{0}, vec({0.5, 0.0})));
  EXPECT_FALSE(in_flow_domain(m, ModeId{0}, vec({1.5, 0.0})));
  EXPECT_TRUE(in_flow_domain(m, ModeId{1}, vec({1.5, 0.0})));
  EXPECT_FALSE(in_flow_domain(m, ModeId{1}, vec({0.2, 0.0})));
}

TEST(Io, MalformedMatrixIsConfigError)
{
  auto j = read_json_file(HYMPC_BENCHMARK_PATH);
  j["modes"][0]["A"] = Json::array({Json::array({1.0, 2.0}), Json::array({3.0})});
  EXPECT_THROW(parse_model(j), ConfigError);
}

TEST(Io, MissingFileIsIoError) { EXPECT_THROW(load_model("/nonexistent/model.json"), IoError); }

TEST(Expm, AgreesWithSeriesOracle)
{
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    const double scale = std::pow(10.0, -3.0 + 0.25 * trial);
    Matrix A(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) { A(i, k) = scale * N(rng); }
    }
    const Matrix E = expm(A);
    const Matrix R = oracle::series_expm(A);
    EXPECT_LE((E - R).norm() / R.norm(), 1e-12) << "trial " << trial;
  }
}

TEST(Expm, NilpotentIsExact)
{
  Matrix N = Matrix::Zero(4, 4);
  N(0, 1) = 2.0;
  N(1, 2) = -1.0;
  N(2, 3) = 3.0;
  EXPECT_LE((expm(N) - oracle::nilpotent_expm(N)).norm(), 1e-13);
  EXPECT_LE((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm(), 0.0);
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials)
{
  const auto f = [](double t) { return 3 * t * t * t * t * t - t * t + 2.0; };
  // integral over [0, 2] = 32 - 8/3 + 4
  EXPECT_NEAR(integrate_fixed(f, 0.0, 2.0, 3), 32.0 - 8.0 / 3.0 + 4.0, 1e-12);
}

TEST(Quadrature, AdaptiveHandlesOscillation)
{
  const auto r = integrate_gauss_adaptive([](double t) { return std::sin(20.0 * t); }, 0.0, 3.0, 1e-12);
  EXPECT_NEAR(r.value, (1.0 - std::cos(60.0)) / 20.0, 1e-11);
}
