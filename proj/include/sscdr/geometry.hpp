#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sscdr/core.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/parallel.hpp"
#include "sscdr/rng.hpp"
#include "sscdr/solver.hpp"

namespace sscdr {

//! Geometric certificate bundle for one clustered data set: per-cluster
//! incoherence mu, per-cluster inradius rho, their global summaries, and the
//! pairwise normalized affinity matrix. degenerate_duals counts columns whose
//! dual direction had a negligible component inside its own subspace and was
//! therefore skipped when forming mu.
struct GeometryReport {
  std::vector<double> mu;
  std::vector<double> rho;
  double rho_min = 0.0;
  double margin = 0.0;
  Matrix affinity;
  int degenerate_duals = 0;
};

//! Outcome of a success-condition check. binding_constraint names the
//! inequality with the least slack; lhs/rhs are its two sides (always finite).
struct ConditionVerdict {
  bool satisfied = false;
  std::string binding_constraint;
  double lhs = 0.0;
  double rhs = 0.0;
};

namespace detail {

//! One inequality of a success condition: lhs < rhs (strict) or lhs <= rhs.
struct Term {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = false;
};

inline ConditionVerdict verdict_from_terms(const std::vector<Term>& terms) {
  ConditionVerdict v;
  v.satisfied = true;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& t : terms) {
    bool holds = t.strict ? (t.lhs < t.rhs) : (t.lhs <= t.rhs);
    if (!holds) v.satisfied = false;
    double slack = t.rhs - t.lhs;
    if (slack < worst) {
      worst = slack;
      v.binding_constraint = t.name;
      v.lhs = t.lhs;
      v.rhs = t.rhs;
    }
  }
  if (terms.empty()) v.binding_constraint = "none";
  return v;
}

}  // namespace detail

//! Normalized affinity between two subspaces given by orthonormal bases:
//! sqrt(sum of squared cosines of canonical angles / (r1*r2)). Lies in [0,1];
//! identical rank-r subspaces give 1/sqrt(r), orthogonal subspaces give 0.
inline double affinity(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows()) throw DimensionMismatch("affinity: bases live in different spaces");
  if (U.cols() < 1 || V.cols() < 1) throw BadDimensions("affinity: empty basis");
  detail::check_orthonormal(U);
  detail::check_orthonormal(V);
  Eigen::BDCSVD<Matrix> svd(U.transpose() * V);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    double s = std::min(1.0, svd.singularValues()[i]);
    sum += s * s;
  }
  double r1 = static_cast<double>(U.cols());
  double r2 = static_cast<double>(V.cols());
  return std::min(1.0, std::sqrt(sum / (r1 * r2)));
}

//! Tuning knobs for the inradius minimizer. Defaults are deterministic; the
//! seed only drives the internal multistart draw.
struct InradiusSettings {
  int restarts = 200;
  int descent_iters = 60;
  int refine_iters = 40;
  std::uint64_t seed = 0x726164697573ull;
};

namespace detail {

//! Local refinement of min_{|w|=1} max_j |b_j^T w|: equalize the active
//! |b_j^T w| via damped Gauss-Newton steps in the tangent space of the
//! sphere. Returns the best value found, updating w in place.
inline double refine_minimax(const Matrix& B, Vector& w, int max_iters) {
  const Eigen::Index r = B.rows();
  const Eigen::Index m = B.cols();
  Vector y = B.transpose() * w;
  double h = y.cwiseAbs().maxCoeff();
  if (r < 2 || m == 0) return h;
  for (int iter = 0; iter < max_iters; ++iter) {
    if (h < 1e-15) return h;
    double tol_act = std::max(1e-10 * h, h * 0.05 * std::pow(0.5, iter));
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < m; ++j)
      if (std::abs(y[j]) >= h - tol_act) active.push_back(j);
    Eigen::HouseholderQR<Matrix> qr(w);
    Matrix Q = qr.householderQ();
    Matrix T = Q.rightCols(r - 1);
    const Eigen::Index rows = static_cast<Eigen::Index>(active.size());
    Matrix sys(rows, r);
    Vector rhs(rows);
    for (Eigen::Index t = 0; t < rows; ++t) {
      Eigen::Index j = active[static_cast<std::size_t>(t)];
      double s = y[j] >= 0.0 ? 1.0 : -1.0;
      sys.row(t).head(r - 1) = s * (B.col(j).transpose() * T);
      sys(t, r - 1) = -1.0;
      rhs[t] = -s * y[j];
    }
    Vector sol = sys.colPivHouseholderQr().solve(rhs);
    Vector delta = T * sol.head(r - 1);
    double dn = delta.norm();
    if (dn < 1e-15) return h;
    if (dn > 0.5) delta *= 0.5 / dn;
    bool improved = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 9; ++ls) {
      Vector w_try = (w + alpha * delta).normalized();
      Vector y_try = B.transpose() * w_try;
      double h_try = y_try.cwiseAbs().maxCoeff();
      if (h_try < h) {
        bool tiny = (h - h_try) < 1e-15 * std::max(1.0, h);
        w = w_try;
        y = y_try;
        h = h_try;
        improved = true;
        if (tiny) return h;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) return h;
  }
  return h;
}

//! Global minimization of max_j |b_j^T w| over the unit sphere in R^r.
//! Multistart projected subgradient descent, each endpoint sharpened by
//! Gauss-Newton; for r <= 3 a dense direction sweep is added as a fallback.
inline double min_linf_on_sphere(const Matrix& B, const InradiusSettings& settings,
                                 std::uint64_t stream) {
  const Eigen::Index r = B.rows();
  const Eigen::Index m = B.cols();
  if (m == 0) return 0.0;
  if (r == 1) return B.cwiseAbs().maxCoeff();

  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](Vector w) {
    double h = refine_minimax(B, w, settings.refine_iters);
    best = std::min(best, h);
  };

  for (int t = 0; t < settings.restarts; ++t) {
    rng::SplitMix64 gen(rng::derive(settings.seed, {stream, static_cast<std::uint64_t>(t)}));
    Vector w(r);
    do {
      for (Eigen::Index a = 0; a < r; ++a) w[a] = gen.next_gaussian();
    } while (w.norm() < 1e-12);
    w.normalize();
    double step = 0.3;
    Vector y(m);
    for (int it = 0; it < settings.descent_iters; ++it) {
      y.noalias() = B.transpose() * w;
      Eigen::Index jmax = 0;
      y.cwiseAbs().maxCoeff(&jmax);
      Vector g = (y[jmax] >= 0.0 ? 1.0 : -1.0) * B.col(jmax);
      Vector gt = g - g.dot(w) * w;
      double gn = gt.norm();
      if (gn < 1e-14) break;
      w = (w - (step / gn) * gt).normalized();
      step *= 0.9;
    }
    consider(w);
  }

  if (r == 2) {
    const int n_dir = 4096;
    Vector best_w(2);
    double best_h = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_dir; ++a) {
      double theta = M_PI * static_cast<double>(a) / n_dir;
      Vector w(2);
      w << std::cos(theta), std::sin(theta);
      double h = (B.transpose() * w).cwiseAbs().maxCoeff();
      if (h < best_h) {
        best_h = h;
        best_w = w;
      }
    }
    consider(best_w);
  } else if (r == 3) {
    const int n_dir = 20000;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    Vector best_w(3);
    double best_h = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_dir; ++a) {
      double z = 1.0 - 2.0 * (a + 0.5) / n_dir;
      double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = golden * a;
      Vector w(3);
      w << rad * std::cos(phi), rad * std::sin(phi), z;
      double h = (B.transpose() * w).cwiseAbs().maxCoeff();
      if (h < best_h) {
        best_h = h;
        best_w = w;
      }
    }
    consider(best_w);
  }

  return best;
}

}  // namespace detail

//! Inradius of the symmetrized convex hull of the given unit columns, taken
//! as the minimum over leave-one-out subsets: min_i min_{|w|=1, w in span}
//! max_{j != i} |a_j^T w|. The minimization runs inside an r-dimensional
//! orthonormal chart of the column span. Accuracy degrades for r > 6.
inline double inradius(const Matrix& points, Eigen::Index r,
                       const InradiusSettings& settings = {}, int threads = 1) {
  const Eigen::Index n = points.cols();
  if (r < 1) throw BadParameter("inradius: subspace dimension must be positive");
  if (n < r) throw BadParameter("inradius: need at least r points");
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::abs(points.col(j).norm() - 1.0) > 1e-6)
      throw BadParameter("inradius: columns must have unit norm");

  Eigen::BDCSVD<Matrix> svd(points, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * sv[0]) ++rank;
  if (rank < r) throw RankDeficient("inradius: points span fewer than r dimensions");
  if (rank > r) throw RankDeficient("inradius: points span more than r dimensions");

  Matrix chart = svd.matrixU().leftCols(r).transpose() * points;  // r x n

  if (n == 1) return 0.0;
  std::vector<double> values(static_cast<std::size_t>(n));
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) {
        Matrix sub(r, n - 1);
        Eigen::Index at = 0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != static_cast<Eigen::Index>(i)) sub.col(at++) = chart.col(j);
        values[i] = detail::min_linf_on_sphere(sub, settings, static_cast<std::uint64_t>(i));
      },
      threads);
  return *std::min_element(values.begin(), values.end());
}

namespace detail {

//! mu from precomputed dual directions (duals and data share the same row
//! space as the bases). Degenerate projections are skipped and counted.
inline std::vector<double> incoherence_from_duals(const Matrix& data, const Matrix& duals,
                                                  const Labels& labels,
                                                  const SubspaceEnsemble& bases,
                                                  int* degenerate_out) {
  const Eigen::Index N = data.cols();
  const int k = labels.k;
  if (bases.k() != k) throw DimensionMismatch("subspace_incoherence: one basis per cluster required");
  if (static_cast<Eigen::Index>(labels.size()) != N)
    throw DimensionMismatch("subspace_incoherence: labels/data size mismatch");
  for (const Matrix& U : bases.bases) {
    if (U.rows() != data.rows())
      throw DimensionMismatch("subspace_incoherence: basis dimension mismatch");
    check_orthonormal(U);
  }

  int degenerate = 0;
  std::vector<double> mu(static_cast<std::size_t>(k), 0.0);
  for (int l = 0; l < k; ++l) {
    std::vector<Eigen::Index> inside, outside;
    for (Eigen::Index j = 0; j < N; ++j)
      (labels.assignments[static_cast<std::size_t>(j)] == l ? inside : outside).push_back(j);
    const Matrix& U = bases.bases[static_cast<std::size_t>(l)];
    Matrix V(data.rows(), static_cast<Eigen::Index>(inside.size()));
    Eigen::Index kept = 0;
    for (Eigen::Index c : inside) {
      Vector proj = U * (U.transpose() * duals.col(c));
      double nrm = proj.norm();
      if (nrm < 1e-10) {
        ++degenerate;
        continue;
      }
      V.col(kept++) = proj / nrm;
    }
    if (kept == 0)
      throw ProjectionDegenerate("subspace_incoherence: every dual direction in cluster " +
                                 std::to_string(l) + " is orthogonal to its subspace");
    if (outside.empty()) {
      mu[static_cast<std::size_t>(l)] = 0.0;
      continue;
    }
    Matrix W(data.rows(), static_cast<Eigen::Index>(outside.size()));
    for (std::size_t t = 0; t < outside.size(); ++t)
      W.col(static_cast<Eigen::Index>(t)) = data.col(outside[t]);
    double val = (V.leftCols(kept).transpose() * W).cwiseAbs().maxCoeff();
    mu[static_cast<std::size_t>(l)] = std::min(1.0, val);
  }
  if (degenerate_out) *degenerate_out = degenerate;
  return mu;
}

}  // namespace detail

//! Per-cluster subspace incoherence at regularization lambda: dual directions
//! are computed for every column on the full matrix, projected onto the
//! column's own subspace and normalized, and mu_l is the largest absolute
//! inner product between those directions and any column outside cluster l.
inline std::vector<double> subspace_incoherence(const NormalizedDataMatrix& X, const Labels& labels,
                                                const SubspaceEnsemble& bases, double lambda,
                                                int threads = 1, int* degenerate_out = nullptr) {
  if (!(lambda > 0.0)) throw BadParameter("subspace_incoherence: lambda must be positive");
  const Eigen::Index N = X.N();
  if (static_cast<Eigen::Index>(labels.size()) != N)
    throw DimensionMismatch("subspace_incoherence: labels/data size mismatch");
  Matrix duals(X.d(), N);
  Matrix shared_xxt;
  const Matrix* xxt = nullptr;
  if (X.d() < N) {
    shared_xxt = X.values * X.values.transpose();
    xxt = &shared_xxt;
  }
  LassoSettings settings;
  settings.lambda = lambda;
  parallel_for(
      static_cast<std::size_t>(N),
      [&](std::size_t i) {
        ColumnSolution sol =
            detail::lasso_column_impl(X.values, static_cast<Eigen::Index>(i), settings, xxt, nullptr);
        duals.col(static_cast<Eigen::Index>(i)) = sol.dual;
      },
      threads);
  return detail::incoherence_from_duals(X.values, duals, labels, bases, degenerate_out);
}

//! Minimum gap between inradius and incoherence across clusters.
inline double margin(const GeometryReport& report) {
  if (report.mu.empty() || report.mu.size() != report.rho.size())
    throw BadDimensions("margin: report has mismatched mu/rho");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < report.mu.size(); ++l) m = std::min(m, report.rho[l] - report.mu[l]);
  return m;
}

//! Assemble the full certificate bundle for one labeled data set. The columns
//! passed here determine which geometry is measured: pass uncorrupted
//! unprojected columns for theorem-style certificates, or projected and
//! renormalized columns for post-projection geometry.
inline GeometryReport make_geometry_report(const NormalizedDataMatrix& X, const Labels& labels,
                                           const SubspaceEnsemble& bases, double lambda,
                                           const InradiusSettings& inradius_settings = {},
                                           int threads = 1) {
  GeometryReport report;
  report.mu = subspace_incoherence(X, labels, bases, lambda, threads, &report.degenerate_duals);
  const int k = labels.k;
  report.rho.resize(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index j = 0; j < X.N(); ++j)
      if (labels.assignments[static_cast<std::size_t>(j)] == l) members.push_back(j);
    Matrix pts(X.d(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t t = 0; t < members.size(); ++t)
      pts.col(static_cast<Eigen::Index>(t)) = X.values.col(members[t]);
    report.rho[static_cast<std::size_t>(l)] =
        inradius(pts, bases.bases[static_cast<std::size_t>(l)].cols(), inradius_settings, threads);
  }
  report.rho_min = *std::min_element(report.rho.begin(), report.rho.end());
  report.margin = margin(report);
  report.affinity = Matrix(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double v = affinity(bases.bases[static_cast<std::size_t>(a)],
                          bases.bases[static_cast<std::size_t>(b)]);
      report.affinity(a, b) = v;
      report.affinity(b, a) = v;
    }
  return report;
}

inline nlohmann::json report_to_json(const GeometryReport& report) {
  nlohmann::json j;
  j["mu"] = report.mu;
  j["rho"] = report.rho;
  j["rho_min"] = report.rho_min;
  j["margin"] = report.margin;
  std::vector<std::vector<double>> aff;
  for (Eigen::Index a = 0; a < report.affinity.rows(); ++a) {
    std::vector<double> row;
    for (Eigen::Index b = 0; b < report.affinity.cols(); ++b) row.push_back(report.affinity(a, b));
    aff.push_back(std::move(row));
  }
  j["affinity"] = aff;
  j["degenerate_duals"] = report.degenerate_duals;
  return j;
}

//! Success condition for noiseless data: positive margin, 0 < lambda <
//! rho/2, and projection distortion eps <= c_eps * margin^2 * lambda^{3/2}.
inline ConditionVerdict check_noiseless(const GeometryReport& report, double lambda, double eps,
                                        double c_eps) {
  if (!(c_eps > 0.0)) throw BadParameter("check_noiseless: c_eps must be positive");
  double delta = report.margin;
  std::vector<detail::Term> terms;
  terms.push_back({"margin", 0.0, delta, true});
  terms.push_back({"lambda lower", 0.0, lambda, true});
  terms.push_back({"lambda upper", lambda, report.rho_min / 2.0, true});
  double cap = c_eps * delta * delta * std::pow(std::max(lambda, 0.0), 1.5);
  terms.push_back({"eps bound", eps, cap, false});
  return detail::verdict_from_terms(terms);
}

//! Success condition under bounded adversarial noise of column norm at most
//! eta: 24*eta/margin < lambda < rho*(1-eps) - 6*eta and max(eps, eta) <=
//! c_eps * margin^2 * lambda^{3/2}.
inline ConditionVerdict check_deterministic_noise(const GeometryReport& report, double lambda,
                                                  double eps, double eta, double c_eps) {
  if (eta < 0.0) throw BadParameter("check_deterministic_noise: eta must be nonnegative");
  if (!(c_eps > 0.0)) throw BadParameter("check_deterministic_noise: c_eps must be positive");
  double delta = report.margin;
  std::vector<detail::Term> terms;
  terms.push_back({"margin", 0.0, delta, true});
  if (delta > 0.0) terms.push_back({"lambda lower", 24.0 * eta / delta, lambda, true});
  terms.push_back({"lambda upper", lambda, report.rho_min * (1.0 - eps) - 6.0 * eta, true});
  double cap = c_eps * delta * delta * std::pow(std::max(lambda, 0.0), 1.5);
  terms.push_back({"noise bound", std::max(eps, eta), cap, false});
  return detail::verdict_from_terms(terms);
}

struct StochasticConstants {
  double C1 = 80.0;
  double C2 = 20.0;
  double c_eps = 1.0;
};

//! Success condition under Gaussian noise with per-coordinate variance
//! sigma^2/d. Checks the lambda window, the eps bound, and sigma against the
//! minimum of the three scale expressions, sharing c_eps as the constant.
inline ConditionVerdict check_stochastic_noise(const GeometryReport& report, double lambda,
                                               double eps, double sigma, Eigen::Index d,
                                               Eigen::Index N, Eigen::Index r,
                                               const StochasticConstants& constants = {}) {
  if (sigma < 0.0) throw BadParameter("check_stochastic_noise: sigma must be nonnegative");
  if (d < 1) throw BadParameter("check_stochastic_noise: d must be positive");
  if (N < 2) throw BadParameter("check_stochastic_noise: need at least two points");
  if (r < 1) throw BadParameter("check_stochastic_noise: r must be positive");
  if (!(constants.c_eps > 0.0))
    throw BadParameter("check_stochastic_noise: c_eps must be positive");
  double delta = report.margin;
  double rho = report.rho_min;
  double logN = std::log(static_cast<double>(N));
  double dd = static_cast<double>(d);
  double rr = static_cast<double>(r);
  double noise = sigma * (1.0 + sigma) * std::sqrt(logN / dd);

  std::vector<detail::Term> terms;
  terms.push_back({"margin", 0.0, delta, true});
  if (delta > 0.0) terms.push_back({"lambda lower", constants.C1 * noise / delta, lambda, true});
  terms.push_back({"lambda upper", lambda, rho / 2.0 - constants.C2 * noise, true});
  double cap = constants.c_eps * delta * delta * std::pow(std::max(lambda, 0.0), 1.5);
  terms.push_back({"eps bound", eps, cap, false});

  double e1 = std::sqrt(std::max(delta, 0.0) * std::max(lambda, 0.0)) * std::pow(dd, 0.25) /
              std::pow(logN, 0.25);
  double e2 = delta * std::sqrt(std::max(rho, 0.0)) * std::pow(dd, 0.25) /
              (std::pow(rr, 0.25) * std::pow(logN, 1.25));
  double e3 = delta * delta * std::pow(std::max(lambda, 0.0), 1.5) * std::sqrt(dd) /
              (std::sqrt(rr) * std::pow(logN, 1.5));
  terms.push_back({"sigma bound", sigma, constants.c_eps * std::min({e1, e2, e3}), false});
  return detail::verdict_from_terms(terms);
}

//! Success condition of the cited noisy-SSC theorem (no projection): eta at
//! most min_l rho*(rho_l - mu_l)/(7*rho_l + 2) and lambda inside
//! (max_l eta(1+eta)(2+rho_l)/(rho_l - mu_l - 2*eta), rho - 2*eta - eta^2).
inline ConditionVerdict check_cited_noisy_ssc(const GeometryReport& report, double lambda,
                                              double eta) {
  if (eta < 0.0) throw BadParameter("check_cited_noisy_ssc: eta must be nonnegative");
  if (report.mu.empty() || report.mu.size() != report.rho.size())
    throw BadDimensions("check_cited_noisy_ssc: report has mismatched mu/rho");
  double rho = report.rho_min;
  double eta_cap = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  double lower = 0.0;
  for (std::size_t l = 0; l < report.mu.size(); ++l) {
    double gap = report.rho[l] - report.mu[l];
    min_gap = std::min(min_gap, gap);
    eta_cap = std::min(eta_cap, rho * gap / (7.0 * report.rho[l] + 2.0));
  }
  std::vector<detail::Term> terms;
  terms.push_back({"eta bound", eta, eta_cap, false});
  if (min_gap - 2.0 * eta <= 0.0) {
    terms.push_back({"gap over noise", 2.0 * eta, min_gap, true});
  } else {
    for (std::size_t l = 0; l < report.mu.size(); ++l) {
      double gap = report.rho[l] - report.mu[l];
      lower = std::max(lower, eta * (1.0 + eta) * (2.0 + report.rho[l]) / (gap - 2.0 * eta));
    }
    terms.push_back({"lambda lower", lower, lambda, true});
  }
  terms.push_back({"lambda upper", lambda, rho - 2.0 * eta - eta * eta, true});
  return detail::verdict_from_terms(terms);
}

//! Affinity condition of the semi-random model: the supplied affinity
//! statistic must stay below c / log^2(kN) * sqrt(log(kappa)/r).
inline ConditionVerdict check_semirandom(double kappa, Eigen::Index r, Eigen::Index k,
                                         Eigen::Index N, double affinity_max, double c) {
  if (!(kappa > 1.0)) throw BadParameter("check_semirandom: kappa must exceed 1");
  if (r < 1 || k < 1 || N < 2) throw BadParameter("check_semirandom: bad instance size");
  if (!(c > 0.0)) throw BadParameter("check_semirandom: c must be positive");
  double logkN = std::log(static_cast<double>(k) * static_cast<double>(N));
  double cap = c / (logkN * logkN) * std::sqrt(std::log(kappa) / static_cast<double>(r));
  return detail::verdict_from_terms({{"affinity bound", affinity_max, cap, false}});
}

//! Projected dimension sufficient for the semi-random guarantee:
//! ceil(c * r^{9/2} * log(kN) / log^{7/2}(kappa)).
inline Eigen::Index semirandom_dimension(Eigen::Index r, Eigen::Index k, Eigen::Index N,
                                         double kappa, double c) {
  if (!(kappa > 1.0)) throw BadParameter("semirandom_dimension: kappa must exceed 1");
  if (r < 1 || k < 1 || N < 2) throw BadParameter("semirandom_dimension: bad instance size");
  if (!(c > 0.0)) throw BadParameter("semirandom_dimension: c must be positive");
  double logkN = std::log(static_cast<double>(k) * static_cast<double>(N));
  double value = c * std::pow(static_cast<double>(r), 4.5) * logkN / std::pow(std::log(kappa), 3.5);
  return static_cast<Eigen::Index>(std::ceil(value));
}

//! Fully-random variant: instead of an affinity condition, the subspace
//! dimension itself must satisfy r <= c * d * log(kappa) / log(N).
inline ConditionVerdict check_fully_random(Eigen::Index r, Eigen::Index d, Eigen::Index N,
                                           double kappa, double c) {
  if (!(kappa > 1.0)) throw BadParameter("check_fully_random: kappa must exceed 1");
  if (r < 1 || d < 1 || N < 2) throw BadParameter("check_fully_random: bad instance size");
  if (!(c > 0.0)) throw BadParameter("check_fully_random: c must be positive");
  double cap = c * static_cast<double>(d) * std::log(kappa) / std::log(static_cast<double>(N));
  return detail::verdict_from_terms({{"rank bound", static_cast<double>(r), cap, false}});
}

}  // namespace sscdr
