#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sscdr/core.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/parallel.hpp"

namespace sscdr {

struct LassoSettings {
  double lambda = 0.1;
  double tol_kkt = 1e-8;
  long max_iters = 10000;
  double admm_rho = 1.0;
};

//! Solution of the column problem  min_c 0.5*||x_i - X_{-i} c||^2 + lambda*||c||_1.
//!
//! `coefficients` is the reported solution (length N, entry i exactly zero,
//! entries below 1e-8 * max|c| truncated to exact zero). The certificates
//! (dual vector, primal/dual values, KKT residual) are computed from the
//! untruncated optimum. kkt_residual is in units of lambda: it bounds both
//! the dual-feasibility excess ||X_{-i}^T nu||_inf - 1 and the on-support
//! stationarity error |x_j^T r / lambda - sign(c_j)|.
struct ColumnSolution {
  Vector coefficients;
  Vector dual;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double kkt_residual = 0.0;
  long iterations = 0;
};

struct SolveError : Error {
  std::vector<int> columns;
  explicit SolveError(std::vector<int> cols)
      : Error("lasso failed to converge on " + std::to_string(cols.size()) + " column(s)"),
        columns(std::move(cols)) {}
};

namespace detail {

inline constexpr double kTruncationRel = 1e-8;

struct LassoState {
  Vector z;  // sparse iterate (exact zeros)
  Vector u;  // scaled dual of the splitting
};

//! Certificates for iterate z of column i. All quantities are exact
//! evaluations; feasibility/stationarity are expressed in units of lambda.
struct KktInfo {
  double feasibility_excess = 0.0;
  double support_violation = 0.0;
  double relative_gap = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  Vector nu;

  double residual() const { return std::max(feasibility_excess, support_violation); }
  bool ok(double tol) const { return residual() <= tol && relative_gap <= tol; }
};

inline KktInfo evaluate_kkt(const Matrix& X, Eigen::Index i, const Vector& x, const Vector& z,
                            double lambda) {
  KktInfo info;
  Vector r = x - X * z;
  Vector corr = X.transpose() * r;
  corr[i] = 0.0;
  double corr_max = corr.lpNorm<Eigen::Infinity>();
  info.feasibility_excess = std::max(0.0, corr_max / lambda - 1.0);
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (z[j] != 0.0)
      info.support_violation =
          std::max(info.support_violation, std::abs(corr[j] / lambda - (z[j] > 0 ? 1.0 : -1.0)));
  info.nu = r / lambda;
  info.primal = 0.5 * r.squaredNorm() + lambda * z.lpNorm<1>();
  double scale = std::max(1.0, corr_max / lambda);
  Vector nu_feas = info.nu / scale;
  info.dual = lambda * x.dot(nu_feas) - 0.5 * lambda * lambda * nu_feas.squaredNorm();
  info.relative_gap = (info.primal - info.dual) / std::max(1.0, info.primal);
  return info;
}

//! Acceptance threshold for polished solutions, in units of lambda. The
//! floating-point noise floor of the KKT residual is about 1e-16/lambda
//! (correlations of size lambda carry absolute error near machine epsilon),
//! so for very small lambda "machine precision" has to be measured in
//! absolute correlation units rather than relative ones.
inline double polish_accept_tol(double lambda) { return std::max(1e-11, 1e-15 / lambda); }

//! Solve the stationarity system on the given support with the given signs;
//! accept only if the full KKT conditions hold at machine precision.
inline bool polish_on_support(const Matrix& X, Eigen::Index i, const Vector& x,
                              const std::vector<Eigen::Index>& support, const Vector& sv,
                              double lambda, Vector& z) {
  const Eigen::Index s = static_cast<Eigen::Index>(support.size());
  if (s == 0 || s > X.rows()) return false;
  Matrix As(X.rows(), s);
  for (Eigen::Index t = 0; t < s; ++t) As.col(t) = X.col(support[static_cast<std::size_t>(t)]);
  Matrix gram = As.transpose() * As;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) return false;
  Vector rhs = As.transpose() * x - lambda * sv;
  Vector cs = ldlt.solve(rhs);
  if ((gram * cs - rhs).lpNorm<Eigen::Infinity>() > 1e-10) return false;
  for (Eigen::Index t = 0; t < s; ++t)
    if (cs[t] * sv[t] <= 0.0) return false;
  Vector candidate = Vector::Zero(z.size());
  for (Eigen::Index t = 0; t < s; ++t) candidate[support[static_cast<std::size_t>(t)]] = cs[t];
  KktInfo info = evaluate_kkt(X, i, x, candidate, lambda);
  if (info.residual() > polish_accept_tol(lambda)) return false;
  z = candidate;
  return true;
}

//! Polish using the nonzeros of z as the candidate support.
inline bool try_polish(const Matrix& X, Eigen::Index i, const Vector& x, Vector& z,
                       double lambda) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (j != i && z[j] != 0.0) support.push_back(j);
  Vector sv(static_cast<Eigen::Index>(support.size()));
  for (std::size_t t = 0; t < support.size(); ++t)
    sv[static_cast<Eigen::Index>(t)] = z[support[t]] > 0 ? 1.0 : -1.0;
  return polish_on_support(X, i, x, support, sv, lambda, z);
}

//! Polish using a dual-derived candidate support: every coordinate whose
//! correlation with the residual is within `margin` of the active value
//! lambda. Rescues iterates that stall because soft-thresholding keeps
//! deleting a true support coordinate. Wrong-signed coordinates are dropped
//! over a few rounds; acceptance is still gated by exact KKT inside
//! polish_on_support, so a bad guess cannot produce a wrong answer.
inline bool try_polish_candidate(const Matrix& X, Eigen::Index i, const Vector& x, Vector& z,
                                 double lambda, double margin) {
  Vector corr = X.transpose() * (x - X * z);
  corr[i] = 0.0;
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (j != i && std::abs(corr[j]) >= lambda * (1.0 - margin)) support.push_back(j);
  for (int round = 0; round < 3; ++round) {
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    if (s == 0 || s > X.rows()) return false;
    Matrix As(X.rows(), s);
    Vector sv(s);
    for (Eigen::Index t = 0; t < s; ++t) {
      As.col(t) = X.col(support[static_cast<std::size_t>(t)]);
      sv[t] = corr[support[static_cast<std::size_t>(t)]] > 0 ? 1.0 : -1.0;
    }
    Matrix gram = As.transpose() * As;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) return false;
    Vector rhs = As.transpose() * x - lambda * sv;
    Vector cs = ldlt.solve(rhs);
    if ((gram * cs - rhs).lpNorm<Eigen::Infinity>() > 1e-10) return false;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index t = 0; t < s; ++t)
      if (cs[t] * sv[t] > 0.0) kept.push_back(support[static_cast<std::size_t>(t)]);
    if (kept.size() == support.size()) {
      Vector candidate = Vector::Zero(z.size());
      for (Eigen::Index t = 0; t < s; ++t) candidate[support[static_cast<std::size_t>(t)]] = cs[t];
      KktInfo info = evaluate_kkt(X, i, x, candidate, lambda);
      if (info.residual() > polish_accept_tol(lambda)) return false;
      z = candidate;
      return true;
    }
    support = std::move(kept);
  }
  return false;
}

//! Both polish strategies in order; margin for the candidate support scales
//! with the currently observed KKT residual, then widens geometrically. A
//! wider margin only adds candidate coordinates, and wrong supports are
//! rejected by the exact KKT gate, so widening is safe.
inline bool polish_any(const Matrix& X, Eigen::Index i, const Vector& x, Vector& z, double lambda,
                       const KktInfo& info) {
  if (try_polish(X, i, x, z, lambda)) return true;
  const double margin = std::max(4.0 * info.residual(), 1e-9);
  if (try_polish_candidate(X, i, x, z, lambda, margin)) return true;
  for (double wide : {1e-4, 1e-3, 1e-2})
    if (try_polish_candidate(X, i, x, z, lambda, wide)) return true;
  return false;
}

//! Last-resort active-set search for a stalled iterate. Near-collinear
//! columns can leave a handful of coordinates hovering at the activation
//! boundary, where the splitting converges too slowly and the optimal subset
//! is not a by-magnitude prefix of the candidates, so the single-support
//! polishes miss it. Enumerate every subset of the nearly-active set (capped
//! at 12 coordinates), solve each restricted system with a sign-consistency
//! fixed point, and accept only through the exact KKT gate. Runs once per
//! column, at budget exhaustion.
inline bool try_polish_subsets(const Matrix& X, Eigen::Index i, const Vector& x, Vector& z,
                               double lambda) {
  Vector corr = X.transpose() * (x - X * z);
  corr[i] = 0.0;
  std::vector<Eigen::Index> cand;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (j != i && std::abs(corr[j]) >= lambda * (1.0 - 1e-2)) cand.push_back(j);
  if (cand.empty()) return false;
  if (cand.size() > 12) {
    std::sort(cand.begin(), cand.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(corr[a]) > std::abs(corr[b]); });
    cand.resize(12);
  }
  const int m = static_cast<int>(cand.size());
  Matrix A(X.rows(), m);
  for (int t = 0; t < m; ++t) A.col(t) = X.col(cand[static_cast<std::size_t>(t)]);
  const Matrix G = A.transpose() * A;
  const Vector ax = A.transpose() * x;

  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<int> idx;
    for (int t = 0; t < m; ++t)
      if (mask & (1u << t)) idx.push_back(t);
    const Eigen::Index s = static_cast<Eigen::Index>(idx.size());
    Matrix Gs(s, s);
    Vector axs(s), sv(s);
    for (Eigen::Index a = 0; a < s; ++a) {
      axs[a] = ax[idx[static_cast<std::size_t>(a)]];
      sv[a] = corr[cand[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])]] > 0 ? 1.0 : -1.0;
      for (Eigen::Index b = 0; b < s; ++b)
        Gs(a, b) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    for (int round = 0; round < 8; ++round) {
      Eigen::LDLT<Matrix> ldlt(Gs);
      if (ldlt.info() != Eigen::Success) break;
      Vector rhs = axs - lambda * sv;
      Vector cs = ldlt.solve(rhs);
      if ((Gs * cs - rhs).lpNorm<Eigen::Infinity>() > 1e-9) break;
      bool stable = true;
      for (Eigen::Index t = 0; t < s; ++t) {
        double want = cs[t] > 0.0 ? 1.0 : (cs[t] < 0.0 ? -1.0 : sv[t]);
        if (want != sv[t]) {
          sv[t] = want;
          stable = false;
        }
      }
      if (!stable) continue;
      Vector candidate = Vector::Zero(X.cols());
      for (Eigen::Index t = 0; t < s; ++t)
        candidate[cand[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])]] = cs[t];
      KktInfo info = evaluate_kkt(X, i, x, candidate, lambda);
      if (info.residual() <= polish_accept_tol(lambda)) {
        z = candidate;
        return true;
      }
      break;
    }
  }
  return false;
}

//! ADMM on the masked design (column i of X treated as zero), with an
//! optional shared X X^T Gram for the Woodbury-form update. The penalty rho
//! is rebalanced (factor 2, bounded) whenever the primal and dual residuals
//! of the splitting drift apart by more than 10x; every rebalance triggers a
//! refactorization, so it runs on a coarse cadence. Returns the final iterate
//! in `state`; certificates are evaluated by the caller.
inline long admm_masked(const Matrix& X, Eigen::Index i, const Vector& x,
                        const LassoSettings& settings, const Matrix* shared_xxt,
                        LassoState& state, KktInfo& info) {
  const Eigen::Index N = X.cols();
  const Eigen::Index p = X.rows();
  const double lambda = settings.lambda;
  double rho = settings.admm_rho;

  Vector corr0 = X.transpose() * x;
  corr0[i] = 0.0;
  const double lambda_max = corr0.lpNorm<Eigen::Infinity>();
  if (lambda >= lambda_max) {
    state.z.setZero();
    state.u.setZero();
    info = evaluate_kkt(X, i, x, state.z, lambda);
    return 0;
  }

  const bool woodbury = p < N;
  Eigen::LLT<Matrix> chol;
  auto refactor = [&]() {
    if (woodbury) {
      Matrix K = shared_xxt ? *shared_xxt : Matrix(X * X.transpose());
      K.noalias() -= x * x.transpose();
      K.diagonal().array() += rho;
      chol.compute(K);
    } else {
      Matrix H = X.transpose() * X;
      H.row(i).setZero();
      H.col(i).setZero();
      H.diagonal().array() += rho;
      chol.compute(H);
    }
    if (chol.info() != Eigen::Success) throw Error("lasso: Cholesky factorization failed");
  };
  refactor();

  Vector c(N), b(N), t1(p), t2(N), z_prev(N);
  const long check_every = 10;
  const long polish_every = 100;
  const double rho_floor = settings.admm_rho * 1e-4;
  const double rho_cap = settings.admm_rho * 1e4;
  for (long iter = 1; iter <= settings.max_iters; ++iter) {
    z_prev = state.z;
    b = corr0 + rho * (state.z - state.u);
    if (woodbury) {
      t1.noalias() = X * b;
      t1 = chol.solve(t1);
      t2.noalias() = X.transpose() * t1;
      t2[i] = 0.0;
      c = (b - t2) / rho;
    } else {
      c = chol.solve(b);
    }
    const double thresh = lambda / rho;
    for (Eigen::Index j = 0; j < N; ++j) {
      double v = c[j] + state.u[j];
      state.z[j] = v > thresh ? v - thresh : (v < -thresh ? v + thresh : 0.0);
    }
    state.z[i] = 0.0;
    state.u += c - state.z;

    if (iter % check_every == 0 || iter == settings.max_iters) {
      info = evaluate_kkt(X, i, x, state.z, lambda);
      if (info.ok(settings.tol_kkt)) {
        if (polish_any(X, i, x, state.z, lambda, info))
          info = evaluate_kkt(X, i, x, state.z, lambda);
        return iter;
      }
      if (iter % polish_every == 0) {
        if (polish_any(X, i, x, state.z, lambda, info)) {
          info = evaluate_kkt(X, i, x, state.z, lambda);
          return iter;
        }
        // Rebalance only while clearly unconverged: near the fixed point the
        // residual ratio is numerical noise and rescaling u would cycle.
        if (info.residual() > 100.0 * settings.tol_kkt) {
          const double primal_res = (c - state.z).norm();
          const double dual_res = rho * (state.z - z_prev).norm();
          double rho_next = rho;
          if (primal_res > 10.0 * dual_res)
            rho_next = std::min(rho * 2.0, rho_cap);
          else if (dual_res > 10.0 * primal_res)
            rho_next = std::max(rho * 0.5, rho_floor);
          if (rho_next != rho) {
            state.u *= rho / rho_next;
            rho = rho_next;
            refactor();
          }
        }
      }
    }
  }
  info = evaluate_kkt(X, i, x, state.z, lambda);
  if (polish_any(X, i, x, state.z, lambda, info) || try_polish_subsets(X, i, x, state.z, lambda)) {
    info = evaluate_kkt(X, i, x, state.z, lambda);
    return settings.max_iters;
  }
  throw NoConvergence(settings.max_iters, info.residual());
}

inline ColumnSolution finish_solution(const Vector& z, const KktInfo& info, Eigen::Index i,
                                      long iterations) {
  ColumnSolution out;
  out.coefficients = z;
  double zmax = z.lpNorm<Eigen::Infinity>();
  if (zmax > 0.0) {
    const double cut = kTruncationRel * zmax;
    for (Eigen::Index j = 0; j < z.size(); ++j)
      if (std::abs(out.coefficients[j]) < cut) out.coefficients[j] = 0.0;
  }
  out.coefficients[i] = 0.0;
  out.dual = info.nu;
  out.primal_value = info.primal;
  out.dual_value = info.dual;
  out.kkt_residual = info.residual();
  out.iterations = iterations;
  return out;
}

inline ColumnSolution lasso_column_impl(const Matrix& X, Eigen::Index i,
                                        const LassoSettings& settings, const Matrix* shared_xxt,
                                        LassoState* warm) {
  if (X.cols() < 2) throw BadDimensions("lasso requires N >= 2");
  if (i < 0 || i >= X.cols()) throw BadDimensions("column index out of range");
  if (settings.lambda <= 0.0) throw BadParameter("lambda must be positive");
  if (settings.tol_kkt <= 0.0) throw BadParameter("tol_kkt must be positive");
  Vector x = X.col(i);
  LassoState state;
  if (warm && warm->z.size() == X.cols()) {
    state = *warm;
    state.z[i] = 0.0;
    state.u[i] = 0.0;
  } else {
    state.z = Vector::Zero(X.cols());
    state.u = Vector::Zero(X.cols());
  }
  KktInfo info;
  long iters = admm_masked(X, i, x, settings, shared_xxt, state, info);
  if (warm) *warm = state;
  return finish_solution(state.z, info, i, iters);
}

}  // namespace detail

//! Lasso self-regression for column i against all other columns.
inline ColumnSolution lasso_column(const NormalizedDataMatrix& X, Eigen::Index i,
                                   const LassoSettings& settings) {
  return detail::lasso_column_impl(X.values, i, settings, nullptr, nullptr);
}

//! Near-exact l1 minimization subject to x_i = X_{-i} c, by lambda
//! continuation: lambda is halved (warm-started) until the fit residual
//! drops below 1e-6.
inline ColumnSolution exact_column(const NormalizedDataMatrix& X, Eigen::Index i) {
  const Matrix& M = X.values;
  if (M.cols() < 2) throw BadDimensions("exact_column requires N >= 2");
  Vector x = M.col(i);

  Matrix design(M.rows(), M.cols() - 1);
  Eigen::Index t = 0;
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    if (j != i) design.col(t++) = M.col(j);
  double ls_residual = (design * design.colPivHouseholderQr().solve(x) - x).norm();
  if (ls_residual > 1e-6)
    throw Infeasible("column " + std::to_string(i) + " is not in the span of the others (residual " +
                     std::to_string(ls_residual) + ")");

  Vector corr0 = M.transpose() * x;
  corr0[i] = 0.0;
  double lambda0 = 0.5 * corr0.lpNorm<Eigen::Infinity>();
  if (lambda0 <= 0.0) throw Infeasible("column is orthogonal to all other columns");

  LassoSettings stage;
  stage.max_iters = 20000;
  detail::LassoState warm;
  for (int stage_idx = 0; stage_idx < 50; ++stage_idx) {
    stage.lambda = lambda0 * std::pow(2.0, -stage_idx);
    // The KKT residual is measured in units of lambda; its floating-point
    // floor is about 1e-16/lambda, so deep continuation stages need an
    // absolute rather than relative target.
    stage.tol_kkt = std::min(1e-3, std::max(1e-9, 1e-14 / stage.lambda));
    ColumnSolution sol = detail::lasso_column_impl(M, i, stage, nullptr, &warm);
    double fit_residual = (x - M * warm.z).norm();
    if (fit_residual <= 1e-6) return sol;
  }
  throw Infeasible("lambda continuation did not reach the interpolation floor");
}

//! Dual direction nu(x_i) and dual objective value f(nu).
struct DualDirection {
  Vector nu;
  double value = 0.0;
};

inline DualDirection dual_direction(const NormalizedDataMatrix& X, Eigen::Index i, double lambda) {
  LassoSettings settings;
  settings.lambda = lambda;
  ColumnSolution sol = lasso_column(X, i, settings);
  DualDirection out;
  out.nu = sol.dual;
  out.value = X.values.col(i).dot(out.nu) - 0.5 * lambda * out.nu.squaredNorm();
  return out;
}

struct SolveReport {
  std::vector<int> failed_columns;
  long total_iterations = 0;
};

//! Column-wise Lasso for the whole matrix. Columns are independent and run
//! in parallel; results are assembled by column index, so the output does
//! not depend on scheduling. With a null report, any non-converged column
//! raises SolveError; otherwise failures are recorded and their columns
//! left empty.
inline SelfRepresentation solve_all(const NormalizedDataMatrix& X, const LassoSettings& settings,
                                    int threads = 0, SolveReport* report = nullptr) {
  const Matrix& M = X.values;
  const Eigen::Index N = M.cols();
  if (N < 2) throw BadDimensions("solve_all requires N >= 2");
  Matrix shared_xxt;
  if (M.rows() < N) shared_xxt = M * M.transpose();
  const Matrix* xxt = M.rows() < N ? &shared_xxt : nullptr;

  std::vector<std::vector<SelfRepresentation::Entry>> columns(static_cast<std::size_t>(N));
  std::vector<int> failed(static_cast<std::size_t>(N), 0);
  std::vector<long> iters(static_cast<std::size_t>(N), 0);
  parallel_for(
      static_cast<std::size_t>(N),
      [&](std::size_t idx) {
        const Eigen::Index i = static_cast<Eigen::Index>(idx);
        try {
          ColumnSolution sol = detail::lasso_column_impl(M, i, settings, xxt, nullptr);
          std::vector<SelfRepresentation::Entry> entries;
          for (Eigen::Index j = 0; j < N; ++j)
            if (sol.coefficients[j] != 0.0) entries.emplace_back(static_cast<int>(j), sol.coefficients[j]);
          columns[idx] = std::move(entries);
          iters[idx] = sol.iterations;
        } catch (const NoConvergence&) {
          failed[idx] = 1;
        }
      },
      threads);

  std::vector<int> failed_columns;
  for (Eigen::Index i = 0; i < N; ++i)
    if (failed[static_cast<std::size_t>(i)]) failed_columns.push_back(static_cast<int>(i));
  if (report) {
    report->failed_columns = failed_columns;
    report->total_iterations = 0;
    for (long v : iters) report->total_iterations += v;
  } else if (!failed_columns.empty()) {
    throw SolveError(std::move(failed_columns));
  }
  SelfRepresentation C(N);
  for (Eigen::Index i = 0; i < N; ++i) C.set_column(i, std::move(columns[static_cast<std::size_t>(i)]));
  return C;
}

}  // namespace sscdr
