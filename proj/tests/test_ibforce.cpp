#include "ibflow/ibforce.hpp"
#include "ibflow/shapes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ibflow;

namespace {

EulerianGrid cube_grid(double extent, double h) { return EulerianGrid::build({Vec3::Zero(), Vec3::Constant(extent)}, h); }

struct SphereSetup {
  EulerianGrid grid;
  LagrangianCloud cloud;
  CouplingMatrix D;
};

SphereSetup sphere_setup() {
  SphereSetup s{cube_grid(1.0, 0.05), {}, {}};
  s.cloud = resample_uniform(make_icosphere(0.3, 3, Vec3::Constant(0.5)), 0.06);
  s.D = build_coupling(s.grid, s.cloud);
  return s;
}

VectorField random_field(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorField f(n);
  for (int a = 0; a < 3; ++a)
    for (auto& v : f[a]) v = u(rng);
  return f;
}

}  // namespace

TEST(AssembleA, SinglePointOnNodeIsThreeEighthsCubed) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(4, 4, 4)});
  const auto A = assemble_A(D, {1.0}, 1.0, 1.0);
  ASSERT_EQ(A.rows(), 1);
  EXPECT_NEAR(A(0, 0), 0.052734375, 1e-15);
}

TEST(AssembleA, EmptyCloudIsRejected) {
  CouplingMatrix D;
  EXPECT_THROW(assemble_A(D, {}, 1.0, 1.0), ConfigError);
}

TEST(AssembleA, UniformAreasGiveSymmetricMatrix) {
  const auto s = sphere_setup();
  const auto A = assemble_A(s.D, s.cloud.areas, 1e-3, 1050.0);
  EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12 * A.cwiseAbs().maxCoeff());
}

TEST(AssembleA, DisjointSupportsDecouple) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(2.5, 4, 4), Vec3(6.6, 4, 4)});
  const auto A = assemble_A(D, {1.0, 1.0}, 1.0, 1.0);
  EXPECT_EQ(A(0, 1), 0.0);
  EXPECT_EQ(A(1, 0), 0.0);
}

TEST(AssembleA, AreaWeightFollowsSummedIndex) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(4, 4, 4), Vec3(4.7, 4.2, 3.9)});
  const auto A1 = assemble_A(D, {1.0, 1.0}, 1.0, 1.0);
  const auto A2 = assemble_A(D, {1.0, 3.0}, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(A2(0, 0), A1(0, 0));
  EXPECT_DOUBLE_EQ(A2(0, 1), 3.0 * A1(0, 1));
  EXPECT_DOUBLE_EQ(A2(1, 0), A1(1, 0));
}

TEST(AssembleB, ConsistencyAndConstantTarget) {
  const auto s = sphere_setup();
  const auto n = s.grid.active_count();
  VectorField u(n);
  for (std::size_t a = 0; a < n; ++a) u.set(a, Vec3(0.2, -0.1, 0.4));
  std::vector<Vec3> UB(s.cloud.size(), Vec3(0.2, -0.1, 0.4));
  EXPECT_LT(assemble_B(s.D, u, UB).cwiseAbs().maxCoeff(), 1e-12);

  const auto B = assemble_B(s.D, VectorField(n), std::vector<Vec3>(s.cloud.size(), Vec3(1, 0, 0)));
  for (Eigen::Index i = 0; i < B.rows(); ++i) EXPECT_EQ(B.row(i), Eigen::RowVector3d(1, 0, 0));
}

TEST(AssembleB, MatchesLoopEvaluation) {
  const auto s = sphere_setup();
  const auto u = random_field(s.grid.active_count(), 3);
  std::vector<Vec3> UB(s.cloud.size());
  for (std::size_t i = 0; i < UB.size(); ++i) UB[i] = Vec3(0.01 * static_cast<double>(i), 1.0, -0.5);
  const auto B = assemble_B(s.D, u, UB);
  const double h = s.grid.spacing();
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    Vec3 acc = Vec3::Zero();
    for (std::size_t j = 0; j < s.grid.active_count(); ++j) {
      const double w = kernel_3d(s.grid.position(j), s.cloud.points[i], h);
      if (w != 0.0) acc += w * h * h * h * u.at(j);
    }
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(B(static_cast<Eigen::Index>(i), a), UB[i][a] - acc[a], 1e-14);
  }
}

TEST(SolveForces, SinglePointOracle) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(4, 4, 4)});
  ForceSystem sys{assemble_A(D, {1.0}, 1.0, 1.0), assemble_B(D, VectorField(g.active_count()), {Vec3(1, 1, 1)}), 1.0,
                  1.0, true};
  const auto F = solve_forces(sys);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(F[0][a] / (1.0 / 0.052734375), 1.0, 1e-10);
  EXPECT_NEAR(F[0].x(), 18.963, 5e-4);
}

TEST(SolveForces, ZeroRightHandSideGivesZeroForce) {
  const auto s = sphere_setup();
  ForceSystem sys{assemble_A(s.D, s.cloud.areas, 1e-3, 1.0), Eigen::MatrixXd::Zero(s.cloud.size(), 3), 1e-3, 1.0,
                  true};
  for (const auto& f : solve_forces(sys)) EXPECT_EQ(f, Vec3::Zero());
}

TEST(SolveForces, DuplicatePointIsSingular) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(4.2, 4, 4), Vec3(4.2, 4, 4)});
  ForceSystem sys{assemble_A(D, {1.0, 1.0}, 1.0, 1.0), Eigen::MatrixXd::Ones(2, 3), 1.0, 1.0, true};
  try {
    solve_forces(sys);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("spacing"), std::string::npos);
  }
  EXPECT_THROW(IbCorrector(D, {1.0, 1.0}, {Vec3::Zero(), Vec3::Zero()}, 1.0, 1.0, {}), NumericalError);
}

TEST(SolveForces, CapIsEnforced) {
  const auto s = sphere_setup();
  ForceSystem sys{assemble_A(s.D, s.cloud.areas, 1e-3, 1.0), Eigen::MatrixXd::Zero(s.cloud.size(), 3), 1e-3, 1.0,
                  true};
  EXPECT_THROW(solve_forces(sys, 10), ConfigError);
}

TEST(CorrectVelocity, ZeroForceLeavesFieldUnchanged) {
  const auto u = random_field(50, 4);
  EXPECT_EQ(correct_velocity(u, VectorField(50), 0.1, 2.0), u);
}

TEST(IbCorrector, EnforcesBoundaryVelocity) {
  const auto s = sphere_setup();
  std::vector<Vec3> UB(s.cloud.size());
  for (std::size_t i = 0; i < UB.size(); ++i) UB[i] = 0.3 * s.cloud.normals[i].cross(Vec3(0, 0, 1));
  const IbCorrector ib(s.D, s.cloud.areas, UB, 1e-3, 1050.0, {});
  auto u = random_field(s.grid.active_count(), 5);
  const auto res = ib.correct(u);
  EXPECT_LE(res.enforcement_residual, 1e-8 * 1.0);
  EXPECT_EQ(res.enforcement_residual, ib.enforcement_error(u));
  EXPECT_GT(res.rcond, DenseFactorization::kSingularRcond);
}

TEST(IbCorrector, IdempotentAndZeroFixedPoint) {
  const auto s = sphere_setup();
  const IbCorrector ib(s.D, s.cloud.areas, std::vector<Vec3>(s.cloud.size(), Vec3(0.1, 0, 0)), 1e-3, 1050.0, {});
  auto u = random_field(s.grid.active_count(), 6);
  ib.correct(u);
  const auto once = u;
  ib.correct(u);
  for (int a = 0; a < 3; ++a)
    for (std::size_t j = 0; j < u.size(); ++j) EXPECT_NEAR(u[a][j], once[a][j], 1e-8 * 1.0);

  const IbCorrector zero(s.D, s.cloud.areas, std::vector<Vec3>(s.cloud.size(), Vec3::Zero()), 1e-3, 1050.0, {});
  VectorField z(s.grid.active_count());
  VectorField f;
  zero.correct(z, &f);
  EXPECT_EQ(z, VectorField(s.grid.active_count()));
  EXPECT_EQ(f, VectorField(s.grid.active_count()));
}

TEST(IbCorrector, CorrectionIsLinearInMismatch) {
  const auto s = sphere_setup();
  const auto n = s.grid.active_count();
  const std::vector<Vec3> UB(s.cloud.size(), Vec3::Zero());
  const IbCorrector ib(s.D, s.cloud.areas, UB, 1e-3, 1050.0, {});
  const auto u1 = random_field(n, 7), u2 = random_field(n, 8);
  VectorField sum(n);
  for (int a = 0; a < 3; ++a)
    for (std::size_t j = 0; j < n; ++j) sum[a][j] = 2.0 * u1[a][j] + u2[a][j];
  auto c1 = u1, c2 = u2, cs = sum;
  ib.correct(c1);
  ib.correct(c2);
  ib.correct(cs);
  for (int a = 0; a < 3; ++a)
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(cs[a][j] - sum[a][j], 2.0 * (c1[a][j] - u1[a][j]) + (c2[a][j] - u2[a][j]), 1e-10);
}

TEST(IbCorrector, SinglePointHandExpansion) {
  const auto g = cube_grid(8.0, 1.0);
  const Vec3 X(4.3, 3.8, 4.1);
  const auto D = build_coupling(g, std::vector<Vec3>{X});
  const double dt = 0.5, rho = 2.0, dS = 0.7;
  const IbCorrector ib(D, {dS}, {Vec3(1, 0, 0)}, dt, rho, {});
  VectorField u(g.active_count()), f;
  const auto res = ib.correct(u, &f);
  const auto a = static_cast<std::size_t>(g.active_at(4, 4, 4));
  const double Dij = kernel_3d(g.position(a), X, 1.0);
  EXPECT_NEAR(u[0][a], dt / rho * res.forces[0].x() * Dij * dS, 1e-14);
  EXPECT_NEAR(res.forces[0].x(), 1.0 / (dt / rho * dS * [&] {
                                   double s = 0;
                                   for (double v : D.val) s += v * v;
                                   return s;
                                 }()),
              1e-10 * std::abs(res.forces[0].x()));
}

TEST(IbCorrector, MaskedNodesAreLeftAlone) {
  const auto s = sphere_setup();
  const auto n = s.grid.active_count();
  std::vector<char> correctable(n, 1);
  for (std::size_t j = 0; j < n; j += 7) correctable[j] = 0;
  const IbCorrector ib(s.D, s.cloud.areas, std::vector<Vec3>(s.cloud.size(), Vec3(0, 0.2, 0)), 1e-3, 1050.0,
                       correctable);
  auto u = random_field(n, 9);
  const auto before = u;
  const auto res = ib.correct(u);
  for (std::size_t j = 0; j < n; j += 7) EXPECT_EQ(u.at(j), before.at(j));
  EXPECT_LE(res.enforcement_residual, 1e-8);
}
