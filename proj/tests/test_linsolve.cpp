#include "ibflow/linsolve.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ibflow;

namespace {

SparseOperator laplacian_1d(std::size_t n) {
  std::vector<SparseOperator::Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return SparseOperator::from_triplets(n, std::move(t), true);
}

// Thomas algorithm for a constant tridiagonal matrix.
DVec thomas(std::size_t n, double lower, double diag, double upper, DVec d) {
  DVec c(n, 0.0);
  c[0] = upper / diag;
  d[0] /= diag;
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag - lower * c[i - 1];
    c[i] = upper / m;
    d[i] = (d[i] - lower * d[i - 1]) / m;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
  return d;
}

double true_relative_residual(const SparseOperator& A, const DVec& b, const DVec& x) {
  const DVec Ax = A * x;
  double r = 0, bn = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    r += (b[i] - Ax[i]) * (b[i] - Ax[i]);
    bn += b[i] * b[i];
  }
  return std::sqrt(r / bn);
}

double binomial(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST(SparseOperator, MergesDuplicatesAndDropsZeros) {
  const auto A = SparseOperator::from_triplets(3, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 2, 5.0}, {1, 2, -5.0}, {2, 1, 4.0}});
  EXPECT_EQ(A.nonzeros(), 2u);
  EXPECT_EQ(A.coeff(0, 0), 3.0);
  EXPECT_EQ(A.coeff(1, 2), 0.0);
  EXPECT_EQ(A.coeff(2, 1), 4.0);
  for (double v : A.val()) EXPECT_NE(v, 0.0);
}

TEST(SparseOperator, SymmetricFlagHoldsStructurally) {
  const auto A = laplacian_1d(6);
  ASSERT_TRUE(A.symmetric());
  for (std::size_t r = 0; r < A.size(); ++r)
    for (std::size_t e = A.row_ptr()[r]; e < A.row_ptr()[r + 1]; ++e) EXPECT_EQ(A.coeff(A.col()[e], r), A.val()[e]);
}

TEST(Cg, IdentityConvergesInOneIteration) {
  const auto I = SparseOperator::identity(5);
  const DVec b{1, -2, 3, 0.5, 7};
  DVec x;
  const auto rep = cg_solve(I, b, x);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(x[i], b[i]);
}

TEST(Cg, Laplacian1dMatchesTridiagonalSolve) {
  const std::size_t n = 10;
  DVec b(n, 0.0);
  b[0] = 1.0;
  DVec x;
  SolveOptions opt;
  opt.tol = 1e-14;
  const auto rep = cg_solve(laplacian_1d(n), b, x, opt);
  EXPECT_TRUE(rep.converged);
  const DVec ref = thomas(n, -1, 2, -1, b);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], ref[i], 1e-12);
}

TEST(Cg, IndefiniteOperatorBreaksDown) {
  const auto A = SparseOperator::from_triplets(2, {{0, 0, 1.0}, {1, 1, -1.0}}, true);
  DVec x;
  EXPECT_THROW(cg_solve(A, {1.0, 1.0}, x), NumericalError);
}

TEST(Cg, NonConvergenceIsReported) {
  DVec b(200, 1.0), x;
  SolveOptions opt;
  opt.max_iter = 3;
  const auto rep = cg_solve(laplacian_1d(200), b, x, opt);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 3);
  EXPECT_NE(rep.summary().find("not converged"), std::string::npos);
  EXPECT_EQ(rep.history.size(), 3u);
}

TEST(Cg, TamperedRecurrenceIsDetected) {
  const auto A = laplacian_1d(50);
  DVec b(50, 1.0), x;
  SolveOptions opt;
  opt.max_iter = 20;
  // Claim convergence on every iteration by wiping the recurrence residual.
  opt.on_iteration = [](int, DVec&, DVec& r) { std::fill(r.begin(), r.end(), 0.0); };
  const auto rep = cg_solve(A, b, x, opt);
  EXPECT_FALSE(rep.converged);
  EXPECT_DOUBLE_EQ(rep.relative_residual, true_relative_residual(A, b, x));
  EXPECT_GT(rep.relative_residual, opt.tol);
}

TEST(Cg, OneOffTamperingRecoversThroughRestart) {
  const auto A = laplacian_1d(50);
  DVec b(50, 1.0), x;
  SolveOptions opt;
  opt.on_iteration = [](int it, DVec&, DVec& r) {
    if (it == 3) std::fill(r.begin(), r.end(), 0.0);
  };
  const auto rep = cg_solve(A, b, x, opt);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(true_relative_residual(A, b, x), opt.tol);
}

TEST(Cg, DeterministicAcrossRuns) {
  const auto A = laplacian_1d(300);
  DVec b(300);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sin(0.1 * static_cast<double>(i));
  DVec x1, x2;
  cg_solve(A, b, x1);
  cg_solve(A, b, x2);
  EXPECT_EQ(x1, x2);
}

TEST(Krylov, DiagonalSystemWithinTwoIterations) {
  const auto A = SparseOperator::from_triplets(4, {{0, 0, 2.0}, {1, 1, -3.0}, {2, 2, 0.5}, {3, 3, 10.0}});
  const DVec b{1, 2, 3, 4};
  DVec x;
  const auto rep = krylov_solve(A, b, x);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 2);
  EXPECT_NEAR(x[1], -2.0 / 3.0, 1e-14);
}

TEST(Krylov, RandomDiagonallyDominantMatchesDenseLu) {
  const std::size_t n = 40;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<SparseOperator::Triplet> t;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || u(rng) < 0.6) continue;
      const double v = u(rng);
      t.push_back({i, j, v});
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      off += std::abs(v);
    }
    t.push_back({i, i, off + 1.0});
    M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = off + 1.0;
  }
  const auto A = SparseOperator::from_triplets(n, t);
  DVec b(n);
  Eigen::VectorXd be(n);
  for (std::size_t i = 0; i < n; ++i) be(static_cast<Eigen::Index>(i)) = b[i] = u(rng);
  DVec x;
  SolveOptions opt;
  opt.tol = 1e-13;
  ASSERT_TRUE(krylov_solve(A, b, x, opt).converged);
  const Eigen::VectorXd ref = M.partialPivLu().solve(be);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], ref(static_cast<Eigen::Index>(i)), 1e-10);
}

TEST(Krylov, SingularSystemIsNotConverged) {
  const auto A = SparseOperator::from_triplets(2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  DVec x;
  SolveOptions opt;
  opt.max_iter = 100;
  const auto rep = krylov_solve(A, {1.0, 0.0}, x, opt);
  EXPECT_FALSE(rep.converged);
  EXPECT_GT(rep.relative_residual, 0.1);
}

TEST(Krylov, TamperedRecurrenceIsDetected) {
  const auto A = laplacian_1d(50);
  DVec b(50, 1.0), x;
  SolveOptions opt;
  opt.max_iter = 10;
  opt.on_iteration = [](int, DVec&, DVec& r) { std::fill(r.begin(), r.end(), 0.0); };
  const auto rep = krylov_solve(A, b, x, opt);
  EXPECT_FALSE(rep.converged);
  EXPECT_DOUBLE_EQ(rep.relative_residual, true_relative_residual(A, b, x));
}

TEST(Dense, IdentityReturnsRightHandSide) {
  const Eigen::MatrixXd B = Eigen::MatrixXd::Random(6, 3);
  const Eigen::MatrixXd X = dense_factor_solve(Eigen::MatrixXd::Identity(6, 6), B, true);
  EXPECT_EQ(X, B);
}

TEST(Dense, HilbertMatchesExactInverse) {
  const int n = 5;
  Eigen::MatrixXd H(n, n), Hinv(n, n);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      H(i - 1, j - 1) = 1.0 / (i + j - 1);
      const double c = binomial(i + j - 2, i - 1);
      Hinv(i - 1, j - 1) = ((i + j) % 2 ? -1.0 : 1.0) * (i + j - 1) * binomial(n + i - 1, n - j) *
                           binomial(n + j - 1, n - i) * c * c;
    }
  EXPECT_EQ(Hinv(0, 0), 25.0);
  EXPECT_EQ(Hinv(4, 4), 44100.0);
  for (bool sym : {true, false}) {
    const Eigen::MatrixXd X = dense_factor_solve(H, Eigen::MatrixXd::Identity(n, n), sym);
    EXPECT_LT(((X - Hinv).array() / Hinv.array()).abs().maxCoeff(), 1e-8);
  }
}

TEST(Dense, CapIsConfigurationError) {
  EXPECT_THROW(DenseFactorization(Eigen::MatrixXd::Identity(10, 10), true, 9), ConfigError);
  EXPECT_EQ(kDefaultDenseCap, 20000u);
}

TEST(Dense, SingularMatrixIsRejected) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 1, 1, 1;
  EXPECT_THROW(DenseFactorization(A, true), NumericalError);
  EXPECT_THROW(DenseFactorization(A, false), NumericalError);
}

TEST(Dense, FactorizationIsReusedAcrossRightHandSides) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(8, 8);
  A += 8 * Eigen::MatrixXd::Identity(8, 8);
  const DenseFactorization f(A, false);
  for (int k = 0; k < 3; ++k) {
    const Eigen::MatrixXd B = Eigen::MatrixXd::Random(8, 2);
    const Eigen::MatrixXd X = f.solve(B);
    EXPECT_LT((A * X - B).cwiseAbs().maxCoeff(), 1e-10 * B.cwiseAbs().maxCoeff());
  }
}
