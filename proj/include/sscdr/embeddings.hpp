#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sscdr/core.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/rng.hpp"

namespace sscdr {

enum class ProjectorKind { Gaussian, UniformRows, FJLT, Sketch };

inline std::string kind_name(ProjectorKind kind) {
  switch (kind) {
    case ProjectorKind::Gaussian: return "gaussian";
    case ProjectorKind::UniformRows: return "uniform_rows";
    case ProjectorKind::FJLT: return "fjlt";
    case ProjectorKind::Sketch: return "sketch";
  }
  throw BadParameter("unknown projector kind");
}

inline ProjectorKind kind_from_name(const std::string& name) {
  if (name == "gaussian") return ProjectorKind::Gaussian;
  if (name == "uniform_rows") return ProjectorKind::UniformRows;
  if (name == "fjlt") return ProjectorKind::FJLT;
  if (name == "sketch") return ProjectorKind::Sketch;
  throw BadParameter("unknown projector kind: " + name);
}

//! Random projection x -> Psi x from d to p < d dimensions. Construction is
//! a pure function of (kind, d, p, seed): the Gaussian matrix is streamed
//! row-by-row from per-row substreams at apply time (never stored), the
//! other kinds keep their sampled state explicit.
struct ProjectionOperator {
  ProjectorKind kind = ProjectorKind::Gaussian;
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  std::uint64_t seed = 0;

  // UniformRows
  std::vector<Eigen::Index> rows;
  // FJLT
  Eigen::Index d2 = 0;
  Vector fjlt_signs;
  Eigen::SparseMatrix<double> P;
  double q = 0.0;
  // Sketch
  std::vector<Eigen::Index> buckets;
  Vector sketch_signs;
};

namespace detail {

inline void check_dims(Eigen::Index d, Eigen::Index p) {
  if (p < 1 || p >= d) throw BadDimensions("projection requires 1 <= p < d");
}

inline Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index v = 1;
  while (v < n) v <<= 1;
  return v;
}

//! In-place normalized Walsh-Hadamard transform; n must be a power of two.
inline void fwht_normalized(double* data, Eigen::Index n) {
  for (Eigen::Index len = 1; len < n; len <<= 1)
    for (Eigen::Index i = 0; i < n; i += (len << 1))
      for (Eigen::Index j = i; j < i + len; ++j) {
        double a = data[j];
        double b = data[j + len];
        data[j] = a + b;
        data[j + len] = a - b;
      }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) data[i] *= scale;
}

inline ProjectionOperator make_fjlt_with_q(Eigen::Index d, Eigen::Index p, std::uint64_t seed,
                                           double q) {
  check_dims(d, p);
  if (!(q > 0.0 && q <= 1.0)) throw BadParameter("fjlt density q must be in (0,1]");
  ProjectionOperator op;
  op.kind = ProjectorKind::FJLT;
  op.d = d;
  op.p = p;
  op.seed = seed;
  op.d2 = next_pow2(d);
  op.q = q;
  rng::SplitMix64 sign_stream(rng::derive(seed, {0}));
  op.fjlt_signs = Vector(d);
  for (Eigen::Index j = 0; j < d; ++j) op.fjlt_signs[j] = sign_stream.next_sign();
  const double scale = 1.0 / std::sqrt(static_cast<double>(p) * q);
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < p; ++i) {
    rng::SplitMix64 row_stream(rng::derive(seed, {static_cast<std::uint64_t>(i) + 1}));
    for (Eigen::Index j = 0; j < op.d2; ++j) {
      double u = row_stream.next_double();
      if (u < q) triplets.emplace_back(i, j, row_stream.next_gaussian() * scale);
    }
  }
  op.P = Eigen::SparseMatrix<double>(p, op.d2);
  op.P.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

}  // namespace detail

//! Dense i.i.d. N(0, 1/p) projection.
inline ProjectionOperator make_gaussian(Eigen::Index d, Eigen::Index p, std::uint64_t seed) {
  detail::check_dims(d, p);
  ProjectionOperator op;
  op.kind = ProjectorKind::Gaussian;
  op.d = d;
  op.p = p;
  op.seed = seed;
  return op;
}

//! Row sampling: each output row is sqrt(d/p) * e_j, j uniform with
//! replacement.
inline ProjectionOperator make_uniform_rows(Eigen::Index d, Eigen::Index p, std::uint64_t seed) {
  detail::check_dims(d, p);
  ProjectionOperator op;
  op.kind = ProjectorKind::UniformRows;
  op.d = d;
  op.p = p;
  op.seed = seed;
  rng::SplitMix64 stream(rng::derive(seed, {0}));
  op.rows.resize(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i)
    op.rows[static_cast<std::size_t>(i)] =
        static_cast<Eigen::Index>(stream.next_below(static_cast<std::uint64_t>(d)));
  return op;
}

//! Fast JL transform P*H*D with zero-padding to the next power of two.
//! The sparse matrix P has i.i.d. entries: N(0, 1/(p q)) with probability q,
//! zero otherwise, q = min(1, c ln^2(n_points)/d). n_points defaults to d
//! when the point count is not known at construction time.
inline ProjectionOperator make_fjlt(Eigen::Index d, Eigen::Index p, std::uint64_t seed,
                                    Eigen::Index n_points = 0, double c = 1.0) {
  detail::check_dims(d, p);
  if (n_points <= 0) n_points = d;
  double logn = std::log(static_cast<double>(n_points));
  double q = std::min(1.0, c * logn * logn / static_cast<double>(d));
  if (q <= 0.0) q = 1.0;  // n_points = 1 edge case
  return detail::make_fjlt_with_q(d, p, seed, q);
}

//! Count-sketch: bucket hash h: [0,d) -> [0,p) and signs s, apply cost
//! proportional to the nonzeros of x.
inline ProjectionOperator make_sketch(Eigen::Index d, Eigen::Index p, std::uint64_t seed) {
  detail::check_dims(d, p);
  ProjectionOperator op;
  op.kind = ProjectorKind::Sketch;
  op.d = d;
  op.p = p;
  op.seed = seed;
  rng::SplitMix64 stream(rng::derive(seed, {0}));
  op.buckets.resize(static_cast<std::size_t>(d));
  op.sketch_signs = Vector(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    op.buckets[static_cast<std::size_t>(j)] =
        static_cast<Eigen::Index>(stream.next_below(static_cast<std::uint64_t>(p)));
    op.sketch_signs[j] = stream.next_sign();
  }
  return op;
}

inline Matrix apply(const ProjectionOperator& op, const Matrix& X) {
  if (X.rows() != op.d) throw DimensionMismatch("apply: operator expects d = " + std::to_string(op.d));
  const Eigen::Index N = X.cols();
  Matrix out(op.p, N);
  switch (op.kind) {
    case ProjectorKind::Gaussian: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(op.p));
      const Eigen::Index block = 256;
      Matrix G(std::min(block, op.p), op.d);
      for (Eigen::Index i0 = 0; i0 < op.p; i0 += block) {
        const Eigen::Index b = std::min(block, op.p - i0);
        for (Eigen::Index bi = 0; bi < b; ++bi) {
          rng::SplitMix64 row(rng::derive(op.seed, {static_cast<std::uint64_t>(i0 + bi)}));
          for (Eigen::Index j = 0; j < op.d; ++j) G(bi, j) = row.next_gaussian() * scale;
        }
        out.middleRows(i0, b).noalias() = G.topRows(b) * X;
      }
      break;
    }
    case ProjectorKind::UniformRows: {
      const double scale = std::sqrt(static_cast<double>(op.d) / static_cast<double>(op.p));
      for (Eigen::Index i = 0; i < op.p; ++i)
        out.row(i) = scale * X.row(op.rows[static_cast<std::size_t>(i)]);
      break;
    }
    case ProjectorKind::FJLT: {
      Vector buffer(op.d2);
      for (Eigen::Index col = 0; col < N; ++col) {
        buffer.setZero();
        buffer.head(op.d) = op.fjlt_signs.cwiseProduct(X.col(col));
        detail::fwht_normalized(buffer.data(), op.d2);
        out.col(col).noalias() = op.P * buffer;
      }
      break;
    }
    case ProjectorKind::Sketch: {
      out.setZero();
      for (Eigen::Index col = 0; col < N; ++col)
        for (Eigen::Index j = 0; j < op.d; ++j) {
          double v = X(j, col);
          if (v != 0.0) out(op.buckets[static_cast<std::size_t>(j)], col) += op.sketch_signs[j] * v;
        }
      break;
    }
  }
  return out;
}

//! Materialized p x d matrix of the operator (test and diagnostic use).
inline Matrix dense_matrix(const ProjectionOperator& op) {
  return apply(op, Matrix::Identity(op.d, op.d));
}

//! Sufficient Gaussian embedding dimension for k subspaces of dimension
//! <= r and N points at distortion eps, failure probability delta.
inline Eigen::Index min_dimension_gaussian(Eigen::Index r, Eigen::Index k, Eigen::Index N,
                                           double eps, double delta) {
  if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw BadParameter("eps and delta must lie in (0,1)");
  if (r < 1 || k < 1 || N < 1) throw BadParameter("r, k, N must be >= 1");
  double lk = std::log(2.0 * static_cast<double>(k) * static_cast<double>(k) / delta);
  double ln = std::log(4.0 * static_cast<double>(N) / delta);
  double v = 2.0 / (eps * eps) *
             (static_cast<double>(r) + lk + std::sqrt(4.0 * static_cast<double>(r) * lk) + 12.0 * ln);
  return static_cast<Eigen::Index>(std::ceil(v));
}

//! Sufficient uniform-row-sampling dimension under column-space
//! incoherence mu0.
inline Eigen::Index min_dimension_uniform(Eigen::Index r, Eigen::Index k, Eigen::Index N,
                                          double eps, double delta, double mu0) {
  if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw BadParameter("eps and delta must lie in (0,1)");
  if (r < 1 || k < 1 || N < 1) throw BadParameter("r, k, N must be >= 1");
  if (mu0 < 1.0) throw BadParameter("mu0 must be >= 1");
  double t1 = static_cast<double>(r) *
              std::log(4.0 * static_cast<double>(r) * static_cast<double>(k) * static_cast<double>(k) / delta);
  double t2 = std::log(8.0 * static_cast<double>(N) / delta);
  double v = 8.0 / (eps * eps) * mu0 * (t1 + t2);
  return static_cast<Eigen::Index>(std::ceil(v));
}

struct DistortionReport {
  double max_norm_distortion = 0.0;
  double max_inner_product_violation = 0.0;
  double epsilon_target = 0.0;
  long trials = 0;
};

namespace detail {

//! Distortion of a linear map given its restriction PB = map(basis) to the
//! subspace. Probes are unit vectors in span(basis) drawn in coefficient
//! space.
inline DistortionReport measure_distortion_restricted(const Matrix& PB, Eigen::Index r,
                                                      long n_probe, std::uint64_t seed,
                                                      double epsilon_target) {
  DistortionReport report;
  report.epsilon_target = epsilon_target;
  report.trials = n_probe;
  rng::SplitMix64 stream(rng::derive(seed, {0}));
  Vector a(r), b(r);
  for (long t = 0; t < n_probe; ++t) {
    for (Eigen::Index i = 0; i < r; ++i) a[i] = stream.next_gaussian();
    for (Eigen::Index i = 0; i < r; ++i) b[i] = stream.next_gaussian();
    double an = a.norm(), bn = b.norm();
    if (an < 1e-12 || bn < 1e-12) continue;
    a /= an;
    b /= bn;
    Vector pa = PB * a;
    Vector pb = PB * b;
    report.max_norm_distortion = std::max(report.max_norm_distortion, std::abs(pa.norm() - 1.0));
    report.max_norm_distortion = std::max(report.max_norm_distortion, std::abs(pb.norm() - 1.0));
    double true_inner = a.dot(b);
    report.max_inner_product_violation =
        std::max(report.max_inner_product_violation, std::abs(true_inner - pa.dot(pb)));
  }
  return report;
}

}  // namespace detail

//! Empirical subspace distortion of an operator over random unit probes in
//! span(basis): max ||Psi x| - 1| and max |<x,y> - <Psi x, Psi y>|.
inline DistortionReport measure_distortion(const ProjectionOperator& op, const Matrix& basis,
                                           long n_probe, std::uint64_t seed,
                                           double epsilon_target = 0.0) {
  if (basis.rows() != op.d) throw DimensionMismatch("basis rows must equal operator d");
  detail::check_orthonormal(basis);
  Matrix PB = apply(op, basis);
  return detail::measure_distortion_restricted(PB, basis.cols(), n_probe, seed, epsilon_target);
}

//! Same measurement for an explicit matrix map (tests use this with exact
//! subspace isometries).
inline DistortionReport measure_distortion(const Matrix& map, const Matrix& basis, long n_probe,
                                           std::uint64_t seed, double epsilon_target = 0.0) {
  if (basis.rows() != map.cols()) throw DimensionMismatch("basis rows must equal map columns");
  detail::check_orthonormal(basis);
  Matrix PB = map * basis;
  return detail::measure_distortion_restricted(PB, basis.cols(), n_probe, seed, epsilon_target);
}

inline nlohmann::json operator_to_json(const ProjectionOperator& op) {
  nlohmann::json j{{"kind", kind_name(op.kind)}, {"d", op.d}, {"p", op.p}, {"seed", op.seed}};
  if (op.kind == ProjectorKind::FJLT) j["q"] = op.q;
  return j;
}

inline ProjectionOperator operator_from_json(const nlohmann::json& j) {
  ProjectorKind kind = kind_from_name(j.at("kind").get<std::string>());
  Eigen::Index d = j.at("d").get<Eigen::Index>();
  Eigen::Index p = j.at("p").get<Eigen::Index>();
  std::uint64_t seed = j.at("seed").get<std::uint64_t>();
  switch (kind) {
    case ProjectorKind::Gaussian: return make_gaussian(d, p, seed);
    case ProjectorKind::UniformRows: return make_uniform_rows(d, p, seed);
    case ProjectorKind::FJLT: return detail::make_fjlt_with_q(d, p, seed, j.at("q").get<double>());
    case ProjectorKind::Sketch: return make_sketch(d, p, seed);
  }
  throw BadParameter("unknown projector kind");
}

}  // namespace sscdr
