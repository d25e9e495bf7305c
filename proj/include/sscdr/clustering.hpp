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

namespace sscdr {

//! Symmetric nonnegative similarity matrix with zero diagonal.
struct SimilarityGraph {
  Matrix W;

  SimilarityGraph() = default;
  explicit SimilarityGraph(Matrix w) : W(std::move(w)) {
    if (W.rows() != W.cols()) throw BadDimensions("SimilarityGraph: matrix must be square");
    if (W.size() > 0 && W.minCoeff() < 0.0)
      throw BadParameter("SimilarityGraph: weights must be nonnegative");
    W.diagonal().setZero();
    Matrix sym = 0.5 * (W + W.transpose());
    W = std::move(sym);
  }

  Eigen::Index size() const { return W.rows(); }
};

//! W = |C| + |C|^T entrywise.
inline SimilarityGraph build_similarity(const SelfRepresentation& C) {
  const Eigen::Index n = C.size();
  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (const auto& [row, value] : C.column(j)) {
      W(row, j) += std::abs(value);
      W(j, row) += std::abs(value);
    }
  SimilarityGraph graph;
  graph.W = std::move(W);  // symmetric and clean by construction
  return graph;
}

//! Side information from spectral clustering: isolated (zero-degree)
//! vertices, and whether the graph was too disconnected for k clusters to be
//! determined by the embedding alone.
struct SpectralDiagnostics {
  Eigen::Index isolated_vertices = 0;
  bool degenerate = false;
};

namespace detail {

inline Matrix symmetric_laplacian(const Matrix& W) {
  const Eigen::Index n = W.rows();
  Vector dinv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = W.row(i).sum();
    dinv[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Matrix L = -(dinv.asDiagonal() * W * dinv.asDiagonal());
  L.diagonal().array() += 1.0;
  Matrix sym = 0.5 * (L + L.transpose());
  return sym;
}

struct KMeansRun {
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
};

//! One seeded k-means run on the rows of E: k-means++ initialization, Lloyd
//! iterations with deterministic tie-breaking, empty clusters repaired by
//! stealing the point farthest from its centroid.
inline KMeansRun kmeans_once(const Matrix& E, int k, std::uint64_t seed, int max_iters) {
  const Eigen::Index n = E.rows();
  rng::SplitMix64 gen(seed);
  Matrix centroids(k, E.cols());

  centroids.row(0) = E.row(static_cast<Eigen::Index>(gen.next_below(static_cast<std::uint64_t>(n))));
  Vector dist2 = (E.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = gen.next_double() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(gen.next_below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = E.row(pick);
    dist2 = dist2.cwiseMin((E.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  Vector best(n);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = (E.row(i) - centroids.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          arg = c;
        }
      }
      best[i] = bd;
      if (labels[static_cast<std::size_t>(i)] != arg) {
        labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] <= 1) continue;
        if (best[i] > fd) {
          fd = best[i];
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      best[far] = 0.0;
      changed = true;
    }
    centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      centroids.row(labels[static_cast<std::size_t>(i)]) += E.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    if (!changed && iter > 0) break;
  }

  KMeansRun run;
  run.labels = std::move(labels);
  run.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    run.inertia += (E.row(i) - centroids.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return run;
}

}  // namespace detail

//! Normalized-cut spectral clustering: embed with the k eigenvectors of the
//! smallest eigenvalues of the symmetric normalized Laplacian, row-normalize,
//! then k-means (k-means++ seeding, 50 restarts, 300 iterations, ties broken
//! by restart index). Deterministic given the seed, also across thread
//! counts. Zero-degree vertices keep zero embedding rows and land with the
//! centroid nearest the origin; diagnostics report them.
inline Labels spectral_cluster(const SimilarityGraph& graph, int k, std::uint64_t seed,
                               SpectralDiagnostics* diagnostics = nullptr, int threads = 1) {
  const Eigen::Index n = graph.size();
  if (k < 1) throw BadParameter("spectral_cluster: k must be positive");
  if (n < k) throw BadDimensions("spectral_cluster: fewer points than clusters");

  SpectralDiagnostics diag;
  for (Eigen::Index i = 0; i < n; ++i)
    if (graph.W.row(i).sum() <= 0.0) ++diag.isolated_vertices;
  diag.degenerate = diag.isolated_vertices > n - k;

  Matrix L = detail::symmetric_laplacian(graph.W);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L);
  Matrix E = eig.eigenvectors().leftCols(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = E.row(i).norm();
    if (norm > 1e-12) E.row(i) /= norm;
    else E.row(i).setZero();
  }

  const int restarts = 50;
  std::vector<detail::KMeansRun> runs(restarts);
  parallel_for(
      static_cast<std::size_t>(restarts),
      [&](std::size_t t) {
        runs[t] = detail::kmeans_once(E, k, rng::derive(seed, {static_cast<std::uint64_t>(t)}), 300);
      },
      threads);
  std::size_t best = 0;
  for (std::size_t t = 1; t < runs.size(); ++t)
    if (runs[t].inertia < runs[best].inertia) best = t;

  if (diagnostics) *diagnostics = diag;
  return Labels(std::move(runs[best].labels), k);
}

namespace detail {

//! Maximum-weight perfect matching on a square score matrix via the Hungarian
//! potentials method; returns per-column matched rows.
inline std::vector<int> hungarian_max(const Matrix& score) {
  const int s = static_cast<int>(score.rows());
  const double big = score.size() > 0 ? score.maxCoeff() : 0.0;
  Matrix cost = Matrix::Constant(s, s, big) - score;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(s) + 1, 0.0), v(static_cast<std::size_t>(s) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(s) + 1, 0), way(static_cast<std::size_t>(s) + 1, 0);
  for (int i = 1; i <= s; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(s) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(s) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= s; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= s; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match(static_cast<std::size_t>(s), -1);
  for (int j = 1; j <= s; ++j) match[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
  return match;
}

}  // namespace detail

//! Fraction of points mislabeled under the best one-to-one matching of
//! cluster labels (Hungarian on the contingency table, padded when the two
//! labelings use different numbers of clusters).
inline double clustering_error(const Labels& pred, const Labels& truth) {
  if (pred.size() != truth.size()) throw LengthMismatch("clustering_error: label lengths differ");
  if (pred.k > 64 || truth.k > 64) throw BadParameter("clustering_error: more than 64 clusters");
  const std::size_t n = truth.size();
  if (n == 0) throw BadDimensions("clustering_error: empty labelings");
  const int s = std::max(pred.k, truth.k);
  Matrix contingency = Matrix::Zero(s, s);
  for (std::size_t i = 0; i < n; ++i)
    contingency(pred.assignments[i], truth.assignments[i]) += 1.0;
  std::vector<int> match = detail::hungarian_max(contingency);
  double agree = 0.0;
  for (int j = 0; j < s; ++j) agree += contingency(match[static_cast<std::size_t>(j)], j);
  return 1.0 - agree / static_cast<double>(n);
}

//! Ratio of self-representation mass that crosses ground-truth clusters to
//! the mass that stays inside them. 0/0 counts as 0; x/0 with x > 0 as +inf.
inline double rel_violation(const SelfRepresentation& C, const Labels& truth) {
  if (static_cast<std::size_t>(C.size()) != truth.size())
    throw LengthMismatch("rel_violation: sizes differ");
  double inside = 0.0, outside = 0.0;
  for (Eigen::Index j = 0; j < C.size(); ++j)
    for (const auto& [row, value] : C.column(j)) {
      if (truth.assignments[static_cast<std::size_t>(row)] ==
          truth.assignments[static_cast<std::size_t>(j)])
        inside += std::abs(value);
      else
        outside += std::abs(value);
    }
  if (inside == 0.0) return outside == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return outside / inside;
}

struct SdpReport {
  bool sdp = false;
  bool sep = false;
  long trivial_columns = 0;
};

//! Column-wise detection check. An entry counts only if its magnitude
//! exceeds zero_tol relative to the column's largest magnitude. sep holds if
//! no counted entry crosses clusters; sdp additionally requires every column
//! to have at least one counted entry.
inline SdpReport check_sdp(const SelfRepresentation& C, const Labels& truth,
                           double zero_tol = 1e-8) {
  if (static_cast<std::size_t>(C.size()) != truth.size())
    throw LengthMismatch("check_sdp: sizes differ");
  if (zero_tol < 0.0) throw BadParameter("check_sdp: zero_tol must be nonnegative");
  SdpReport report;
  report.sep = true;
  for (Eigen::Index j = 0; j < C.size(); ++j) {
    double colmax = 0.0;
    for (const auto& [row, value] : C.column(j)) colmax = std::max(colmax, std::abs(value));
    double threshold = zero_tol * colmax;
    bool any = false;
    for (const auto& [row, value] : C.column(j)) {
      if (std::abs(value) <= threshold) continue;
      any = true;
      if (truth.assignments[static_cast<std::size_t>(row)] !=
          truth.assignments[static_cast<std::size_t>(j)])
        report.sep = false;
    }
    if (!any) ++report.trivial_columns;
  }
  report.sdp = report.sep && report.trivial_columns == 0;
  return report;
}

//! All quality metrics of one clustering outcome against ground truth.
struct EvaluationReport {
  double clustering_error = 0.0;
  double rel_violation = 0.0;
  bool sdp_holds = false;
  bool sep_holds = false;
  long trivial_columns = 0;
};

inline EvaluationReport evaluate(const SelfRepresentation& C, const Labels& pred,
                                 const Labels& truth, double zero_tol = 1e-8) {
  EvaluationReport report;
  report.clustering_error = clustering_error(pred, truth);
  report.rel_violation = rel_violation(C, truth);
  SdpReport sdp = check_sdp(C, truth, zero_tol);
  report.sdp_holds = sdp.sdp;
  report.sep_holds = sdp.sep;
  report.trivial_columns = sdp.trivial_columns;
  return report;
}

inline nlohmann::json evaluation_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["clustering_error"] = report.clustering_error;
  j["rel_violation"] = std::isinf(report.rel_violation)
                           ? nlohmann::json("inf")
                           : nlohmann::json(report.rel_violation);
  j["sdp_holds"] = report.sdp_holds;
  j["sep_holds"] = report.sep_holds;
  j["trivial_columns"] = report.trivial_columns;
  return j;
}

}  // namespace sscdr
