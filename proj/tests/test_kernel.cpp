#include "ibflow/kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ibflow;

namespace {

// Direct transcription of the kernel, written independently of delta_1d.
double reference_delta(double r) {
  if (r < 0) r = -r;
  if (r > 2) return 0.0;
  if (r > 1) return 0.125 * (5 - 2 * r - std::sqrt(std::max(0.0, 12 * r - 4 * r * r - 7)));
  return 0.125 * (3 - 2 * r + std::sqrt(1 + 4 * r - 4 * r * r));
}

EulerianGrid cube_grid(double extent, double h) { return EulerianGrid::build({Vec3::Zero(), Vec3::Constant(extent)}, h); }

std::vector<Vec3> random_points(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

}  // namespace

TEST(Delta, PinnedValues) {
  EXPECT_DOUBLE_EQ(delta_1d(0.0), 0.5);
  EXPECT_DOUBLE_EQ(delta_1d(1.0), 0.25);
  EXPECT_DOUBLE_EQ(delta_1d(-1.0), 0.25);
  EXPECT_EQ(delta_1d(2.5), 0.0);
  EXPECT_EQ(delta_1d(-2.5), 0.0);
  EXPECT_NEAR(delta_1d(2.0), 0.0, 1e-15);
}

TEST(Delta, BranchesAgreeAtOne) {
  const double inner = (3.0 - 2.0 + std::sqrt(1.0 + 4.0 - 4.0)) / 8.0;
  const double outer = (5.0 - 2.0 - std::sqrt(-7.0 + 12.0 - 4.0)) / 8.0;
  EXPECT_DOUBLE_EQ(inner, 0.25);
  EXPECT_DOUBLE_EQ(outer, 0.25);
  EXPECT_NEAR(delta_1d(1.0 - 1e-12), delta_1d(1.0 + 1e-12), 1e-11);
  EXPECT_NEAR(delta_1d(2.0 - 1e-12), 0.0, 1e-6);
}

TEST(Delta, EvenInR) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = u(rng);
    EXPECT_EQ(delta_1d(r), delta_1d(-r));
  }
}

TEST(Delta, MomentIdentities) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = u(rng);
    double s0 = 0, s1 = 0, s2 = 0;
    for (int k = static_cast<int>(std::floor(r)) - 3; k <= static_cast<int>(std::floor(r)) + 3; ++k) {
      const double d = delta_1d(r - k);
      s0 += d;
      s1 += (r - k) * d;
      s2 += d * d;
    }
    EXPECT_NEAR(s0, 1.0, 1e-12);
    EXPECT_NEAR(s1, 0.0, 1e-12);
    EXPECT_NEAR(s2, 3.0 / 8.0, 1e-12);
  }
}

TEST(Kernel3d, CoincidentAndSupportEdge) {
  EXPECT_DOUBLE_EQ(kernel_3d(Vec3(1, 2, 3), Vec3(1, 2, 3), 1.0), 0.125);
  EXPECT_NEAR(kernel_3d(Vec3(0.2, 0, 0), Vec3(0, 0, 0), 0.1), 0.0, 1e-12);
  EXPECT_EQ(kernel_3d(Vec3(0.3, 0, 0), Vec3(0, 0, 0), 0.1), 0.0);
}

TEST(Kernel3d, MatchesIndependentEvaluation) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double h = 0.37;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 d(u(rng) * h, u(rng) * h, u(rng) * h);
    const Vec3 X(0.1, -0.2, 0.3);
    const double ref = reference_delta(d.x() / h) * reference_delta(d.y() / h) * reference_delta(d.z() / h) / (h * h * h);
    EXPECT_NEAR(kernel_3d(X + d, X, h), ref, 1e-15 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Coupling, PointOnLatticeNodeHas27Entries) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(4, 4, 4)});
  EXPECT_EQ(D.row_size(0), 27u);
  double s = 0;
  for (double v : D.val) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Coupling, PointOutsideBoxIsRejected) {
  const auto g = cube_grid(1.0, 0.1);
  EXPECT_THROW(build_coupling(g, std::vector<Vec3>{Vec3(1.5, 0.5, 0.5)}), ConfigError);
  try {
    build_coupling(g, std::vector<Vec3>{Vec3(0.5, 0.5, 0.5), Vec3(0.05, 0.5, 0.5)});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos);
  }
}

TEST(Coupling, InactiveSupportNodeIsRejected) {
  const auto g0 = cube_grid(1.0, 0.1);
  auto mask = g0.mask();
  mask[g0.lattice_index(5, 5, 5)] = 0;
  const auto g = g0.with_mask(mask);
  EXPECT_THROW(build_coupling(g, std::vector<Vec3>{Vec3(0.52, 0.51, 0.49)}), ConfigError);
}

TEST(Coupling, ZerothMomentOnRandomPlacements) {
  const double h = 0.1;
  const auto g = cube_grid(1.0, h);
  const auto pts = random_points(1000, 0.25, 0.75, 4);
  const auto D = build_coupling(g, pts);
  for (std::size_t i = 0; i < D.rows; ++i) {
    EXPECT_LE(D.row_size(i), 64u);
    double s = 0;
    for (std::size_t e = D.row_ptr[i]; e < D.row_ptr[i + 1]; ++e) {
      s += D.val[e];
      const Vec3 off = (g.position(D.col[e]) - pts[i]) / h;
      EXPECT_LT(off.cwiseAbs().maxCoeff(), 2.0);
    }
    EXPECT_NEAR(s * h * h * h, 1.0, 1e-12);
  }
}

TEST(Interpolate, ConstantLinearAndZeroFields) {
  const double h = 0.1;
  const auto g = cube_grid(1.0, h);
  const auto pts = random_points(200, 0.25, 0.75, 5);
  const auto D = build_coupling(g, pts);
  VectorField c(g.active_count()), lin(g.active_count()), zero(g.active_count());
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    c.set(a, Vec3(1.5, -2.0, 0.25));
    lin.set(a, g.position(a));
  }
  const auto Uc = interpolate(D, c), Ul = interpolate(D, lin), Uz = interpolate(D, zero);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_LT((Uc[i] - Vec3(1.5, -2.0, 0.25)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((Ul[i] - pts[i]).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(Uz[i], Vec3::Zero());
  }
}

TEST(Spread, SinglePointReproducesRow) {
  const auto g = cube_grid(8.0, 1.0);
  const auto D = build_coupling(g, std::vector<Vec3>{Vec3(3.3, 4.1, 4.7)});
  const auto f = spread(D, {Vec3(1, 0, 0)}, {1.0});
  for (std::size_t e = D.row_ptr[0]; e < D.row_ptr[1]; ++e) EXPECT_EQ(f[0][D.col[e]], D.val[e]);
  double total = 0;
  for (double v : f[0]) total += v;
  double row = 0;
  for (double v : D.val) row += v;
  EXPECT_EQ(total, row);
}

TEST(Spread, ForceConservationAndZero) {
  const double h = 0.1;
  const auto g = cube_grid(1.0, h);
  const auto pts = random_points(300, 0.25, 0.75, 6);
  const auto D = build_coupling(g, pts);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> F(pts.size());
  std::vector<double> dS(pts.size());
  Vec3 total = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    F[i] = Vec3(u(rng), u(rng), u(rng));
    dS[i] = 1e-3 * (1.5 + u(rng));
    total += F[i] * dS[i];
  }
  const auto f = spread(D, F, dS);
  for (int a = 0; a < 3; ++a) {
    double s = 0;
    for (double v : f[a]) s += v;
    EXPECT_NEAR(s * h * h * h, total[a], 1e-12);
  }
  const auto z = spread(D, std::vector<Vec3>(pts.size(), Vec3::Zero()), dS);
  for (int a = 0; a < 3; ++a)
    for (double v : z[a]) EXPECT_EQ(v, 0.0);
}

TEST(Spread, AdjointOfInterpolate) {
  const double h = 0.1;
  const auto g = cube_grid(1.0, h);
  const auto pts = random_points(100, 0.25, 0.75, 8);
  const auto D = build_coupling(g, pts);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorField field(g.active_count());
  for (int a = 0; a < 3; ++a)
    for (auto& v : field[a]) v = u(rng);
  std::vector<Vec3> F(pts.size());
  std::vector<double> dS(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    F[i] = Vec3(u(rng), u(rng), u(rng));
    dS[i] = 0.5 + 0.25 * u(rng);
  }
  const auto f = spread(D, F, dS);
  const auto U = interpolate(D, field);
  double lhs = 0, rhs = 0;
  for (int a = 0; a < 3; ++a)
    for (std::size_t j = 0; j < f.size(); ++j) lhs += f[a][j] * field[a][j];
  lhs *= h * h * h;
  for (std::size_t i = 0; i < pts.size(); ++i) rhs += dS[i] * F[i].dot(U[i]);
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
}
