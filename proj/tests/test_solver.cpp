#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sscdr/core.hpp"
#include "sscdr/datagen.hpp"
#include "sscdr/rng.hpp"
#include "sscdr/solver.hpp"

using namespace sscdr;

namespace {

NormalizedDataMatrix random_unit_columns(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  rng::SplitMix64 gen(seed);
  Matrix X(d, n);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = gen.next_gaussian();
  return normalize_columns(X);
}

Matrix drop_column(const Matrix& X, Eigen::Index i) {
  Matrix out(X.rows(), X.cols() - 1);
  Eigen::Index t = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (j != i) out.col(t++) = X.col(j);
  return out;
}

double paper_objective(const Matrix& design, const Vector& x, const Vector& c, double lambda) {
  return (x - design * c).squaredNorm() + 2.0 * lambda * c.lpNorm<1>();
}

}  // namespace

TEST_CASE("lasso matches the sign-enumeration oracle", "[solver]") {
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = 4 + t % 4;
    const Eigen::Index n = 5 + t % 3;
    NormalizedDataMatrix X = random_unit_columns(d, n, 900 + t);
    const Eigen::Index i = t % n;
    for (double lambda : {0.05, 0.2, 0.5}) {
      LassoSettings settings;
      settings.lambda = lambda;
      ColumnSolution sol = lasso_column(X, i, settings);

      Matrix design = drop_column(X.values, i);
      Vector x = X.values.col(i);
      oracles::LassoSolution oracle = oracles::lasso_sign_enumeration(design, x, lambda);
      REQUIRE(oracle.found);

      CHECK(std::abs(sol.primal_value - oracle.objective) < 1e-6);

      // identical minimizer in both objective conventions (same lambda)
      Vector mine(n - 1);
      Eigen::Index w = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) mine[w++] = sol.coefficients[j];
      CHECK((mine - oracle.c).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK(std::abs(paper_objective(design, x, mine, lambda) -
                     paper_objective(design, x, oracle.c, lambda)) < 1e-9);

      // dual feasibility against the reduced design
      Vector nu = sol.dual;
      CHECK((design.transpose() * nu).lpNorm<Eigen::Infinity>() <= 1.0 + 1e-8);
      ++checked;
    }
  }
  CHECK(checked == 60);
}

TEST_CASE("large lambda gives the zero solution with nu = x/lambda", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(6, 5, 77);
  const Eigen::Index i = 2;
  Vector corr = X.values.transpose() * X.values.col(i);
  corr[i] = 0.0;
  const double lambda = 1.01 * corr.lpNorm<Eigen::Infinity>();
  LassoSettings settings;
  settings.lambda = lambda;
  ColumnSolution sol = lasso_column(X, i, settings);
  CHECK(sol.coefficients.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((sol.dual - X.values.col(i) / lambda).lpNorm<Eigen::Infinity>() < 1e-12);

  DualDirection dd = dual_direction(X, i, lambda);
  CHECK(dd.value == Catch::Approx(1.0 / (2.0 * lambda)).margin(1e-10));
}

TEST_CASE("duplicate column takes the weight and leaves a small residual", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(8, 6, 31);
  X.values.col(4) = X.values.col(1);  // duplicate of column 1
  const double lambda = 0.1;
  LassoSettings settings;
  settings.lambda = lambda;
  ColumnSolution sol = lasso_column(X, 1, settings);
  double dominant = std::abs(sol.coefficients[4]);
  for (Eigen::Index j = 0; j < 6; ++j)
    if (j != 4) CHECK(std::abs(sol.coefficients[j]) <= dominant + 1e-12);
  Vector residual = X.values.col(1) - X.values * sol.coefficients;
  CHECK(residual.norm() <= lambda + 1e-8);
}

TEST_CASE("identical inputs give bit-identical solutions", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(10, 8, 5);
  LassoSettings settings;
  settings.lambda = 0.15;
  ColumnSolution a = lasso_column(X, 3, settings);
  ColumnSolution b = lasso_column(X, 3, settings);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.dual - b.dual).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.primal_value == b.primal_value);
}

TEST_CASE("certified gap and kkt residual hold on random instances", "[solver]") {
  for (int t = 0; t < 10; ++t) {
    NormalizedDataMatrix X = random_unit_columns(12, 9, 400 + t);
    LassoSettings settings;
    settings.lambda = 0.2;
    ColumnSolution sol = lasso_column(X, t % 9, settings);
    CHECK(sol.kkt_residual <= settings.tol_kkt);
    CHECK(sol.primal_value - sol.dual_value <= settings.tol_kkt * std::max(1.0, sol.primal_value));
  }
}

// The two-sided norm bound holds for columns that admit a good sparse
// representation (the residual at the optimum must satisfy ||r||^2 <= 2*lambda,
// which the value bound f(nu) >= 1 - lambda/2 guarantees only on subspace-
// structured data). Unstructured matrices, where a column may be far from the
// span of the rest, only obey the weaker unconditional bounds checked in the
// following test case.
TEST_CASE("dual direction satisfies the lemma bounds on subspace data", "[solver]") {
  for (int t = 0; t < 25; ++t) {
    ModelSpec spec;
    spec.d = 20;
    spec.k = 3;
    spec.dims = {3, 3, 3};
    spec.counts = {25, 25, 25};
    spec.model = DataModel::FullyRandom;
    spec.seed = 1200 + static_cast<std::uint64_t>(t);
    Instance inst = generate(spec);
    NormalizedDataMatrix X = normalize_columns(inst.X);
    const Eigen::Index probe = static_cast<Eigen::Index>(t * 3) % X.values.cols();
    for (double lambda : {0.1, 0.3, 0.7}) {
      DualDirection dd = dual_direction(X, probe, lambda);
      double norm = dd.nu.norm();
      CHECK(norm >= 1.0 - lambda / 2.0 - 1e-8);
      CHECK(norm <= std::sqrt(2.0 / lambda) + 1e-8);
      CHECK(dd.value >= 1.0 - lambda / 2.0 - 1e-8);
    }
  }
}

TEST_CASE("dual direction obeys the unconditional bounds on arbitrary data", "[solver]") {
  for (int t = 0; t < 25; ++t) {
    NormalizedDataMatrix X = random_unit_columns(10, 8, 1200 + t);
    for (double lambda : {0.1, 0.3, 0.7}) {
      DualDirection dd = dual_direction(X, t % 8, lambda);
      double norm = dd.nu.norm();
      CHECK(norm >= 1.0 - lambda / 2.0 - 1e-8);
      CHECK(norm <= 2.0 / lambda + 1e-8);
      CHECK(dd.value >= 1.0 - lambda / 2.0 - 1e-8);
    }
  }
}

TEST_CASE("dual solution is unique across admm parameters", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(9, 7, 88);
  LassoSettings a, b;
  a.lambda = b.lambda = 0.25;
  a.admm_rho = 0.5;
  b.admm_rho = 2.0;
  ColumnSolution sa = lasso_column(X, 2, a);
  ColumnSolution sb = lasso_column(X, 2, b);
  CHECK((sa.dual - sb.dual).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("non-convergence raises with iteration count", "[solver]") {
  // 400 columns in R^20 at a tiny lambda: the optimum needs a support of
  // around twenty columns, far more than any rescue heuristic can identify
  // from a two-iteration iterate, so the budget is genuinely exhausted.
  NormalizedDataMatrix X = random_unit_columns(20, 400, 3);
  LassoSettings settings;
  settings.lambda = 0.002;
  settings.tol_kkt = 1e-14;
  settings.max_iters = 2;
  try {
    lasso_column(X, 0, settings);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.iterations == 2);
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("exact recovery of a duplicate column", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(8, 7, 10);
  X.values.col(5) = X.values.col(0);
  ColumnSolution sol = exact_column(X, 0);
  CHECK(sol.coefficients.lpNorm<1>() == Catch::Approx(1.0).margin(1e-4));
  CHECK(sol.coefficients[5] == Catch::Approx(1.0).margin(1e-4));

  Matrix design = drop_column(X.values, 0);
  oracles::LassoSolution lp = oracles::l1_exact_enumeration(design, X.values.col(0));
  REQUIRE(lp.found);
  CHECK(sol.coefficients.lpNorm<1>() == Catch::Approx(lp.objective).margin(1e-4));
}

TEST_CASE("exact solve matches the l1 oracle on spanning instances", "[solver]") {
  for (int t = 0; t < 8; ++t) {
    // points in a 3-dim subspace of R^5: every column lies in the others' span
    rng::SplitMix64 gen(600 + t);
    Matrix G(5, 3);
    for (Eigen::Index i = 0; i < G.size(); ++i) G(i) = gen.next_gaussian();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix U = qr.householderQ() * Matrix::Identity(5, 3);
    Matrix coeff(3, 7);
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) = gen.next_gaussian();
    NormalizedDataMatrix X = normalize_columns(U * coeff);

    ColumnSolution sol = exact_column(X, 0);
    oracles::LassoSolution lp = oracles::l1_exact_enumeration(drop_column(X.values, 0), X.values.col(0));
    REQUIRE(lp.found);
    CHECK(sol.coefficients.lpNorm<1>() == Catch::Approx(lp.objective).margin(1e-4));
  }
}

TEST_CASE("column orthogonal to the rest is infeasible for exact solve", "[solver]") {
  Matrix X = Matrix::Zero(5, 4);
  X(0, 0) = 1.0;  // e1, orthogonal to the others
  X(1, 1) = 1.0;
  X(2, 2) = 1.0;
  X.col(3) << 0, 1, 1, 0, 0;
  NormalizedDataMatrix Xn = normalize_columns(X);
  CHECK_THROWS_AS(exact_column(Xn, 0), Infeasible);
}

TEST_CASE("exact solve keeps support inside the subspace when separated", "[solver]") {
  rng::SplitMix64 gen(41);
  Matrix U = Matrix::Zero(8, 2);
  U(0, 0) = 1.0;
  U(1, 1) = 1.0;  // subspace = first two coordinates
  Matrix coeff(2, 10);
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) = gen.next_gaussian();
  Matrix inside = U * coeff;
  Matrix outside = Matrix::Zero(8, 4);
  outside(2, 0) = 1.0;
  outside(3, 1) = 1.0;  // orthogonal complement columns
  outside(4, 2) = 1.0;
  outside(5, 3) = 1.0;
  Matrix all(8, 14);
  all << inside, outside;
  NormalizedDataMatrix X = normalize_columns(all);
  ColumnSolution sol = exact_column(X, 0);
  for (Eigen::Index j = 10; j < 14; ++j) CHECK(std::abs(sol.coefficients[j]) < 1e-8);
}

TEST_CASE("solve_all returns zero for orthogonal columns", "[solver]") {
  Matrix X = Matrix::Identity(4, 2);
  NormalizedDataMatrix Xn = normalize_columns(X);
  LassoSettings settings;
  settings.lambda = 0.1;
  SelfRepresentation C = solve_all(Xn, settings);
  CHECK(C.dense().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_all is independent of thread count", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(12, 20, 2024);
  LassoSettings settings;
  settings.lambda = 0.2;
  Matrix serial = solve_all(X, settings, 1).dense();
  Matrix parallel = solve_all(X, settings, 4).dense();
  CHECK((serial - parallel).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_all recovers block structure on orthogonal subspaces", "[solver]") {
  rng::SplitMix64 gen(7);
  Matrix X(8, 16);
  for (Eigen::Index j = 0; j < 8; ++j) {
    Vector g(2);
    g << gen.next_gaussian(), gen.next_gaussian();
    X.col(j).setZero();
    X.col(j).head(2) = g;  // subspace A: coordinates 0,1
    Vector h(2);
    h << gen.next_gaussian(), gen.next_gaussian();
    X.col(8 + j).setZero();
    X.col(8 + j).segment(4, 2) = h;  // subspace B: coordinates 4,5
  }
  NormalizedDataMatrix Xn = normalize_columns(X);
  LassoSettings settings;
  settings.lambda = 0.3;
  Matrix C = solve_all(Xn, settings).dense();
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j)
      if ((i < 8) != (j < 8)) CHECK(std::abs(C(i, j)) < 1e-8);
}

TEST_CASE("solve_all aggregates failures when a report is supplied", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(10, 12, 66);
  LassoSettings settings;
  settings.lambda = 0.05;
  settings.tol_kkt = 1e-14;
  settings.max_iters = 2;
  SolveReport report;
  SelfRepresentation C = solve_all(X, settings, 1, &report);
  CHECK(!report.failed_columns.empty());
  CHECK(C.size() == 12);
  CHECK_THROWS_AS(solve_all(X, settings, 1), SolveError);
}

TEST_CASE("warm started sweep matches cold solves", "[solver]") {
  NormalizedDataMatrix X = random_unit_columns(10, 14, 303);
  const Eigen::Index i = 4;
  detail::LassoState warm;
  for (double lambda : {0.5, 0.25, 0.1}) {
    LassoSettings settings;
    settings.lambda = lambda;
    ColumnSolution warm_sol = detail::lasso_column_impl(X.values, i, settings, nullptr, &warm);
    ColumnSolution cold_sol = lasso_column(X, i, settings);
    CHECK((warm_sol.coefficients - cold_sol.coefficients).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(warm_sol.kkt_residual <= settings.tol_kkt);
  }
}
