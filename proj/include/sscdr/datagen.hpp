#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sscdr/core.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/geometry.hpp"
#include "sscdr/rng.hpp"

namespace sscdr {

enum class DataModel { Deterministic, SemiRandom, FullyRandom };
enum class NoiseKind { None, Adversarial, Gaussian };
enum class AdversarialStrategy { RandomDirection, TowardOtherSubspace };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double eta = 0.0;
  double sigma = 0.0;
  AdversarialStrategy strategy = AdversarialStrategy::RandomDirection;
};

//! Full description of one synthetic instance. Deterministic requires both
//! bases and points; SemiRandom requires bases and samples points; FullyRandom
//! samples both. The homogeneous flag appends a constant coordinate to every
//! clean point (and extends each basis accordingly) before noise is added.
struct ModelSpec {
  Eigen::Index d = 0;
  int k = 0;
  std::vector<Eigen::Index> dims;
  std::vector<Eigen::Index> counts;
  DataModel model = DataModel::FullyRandom;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  bool homogeneous = false;
  std::vector<Matrix> given_bases;
  std::vector<Matrix> given_points;

  void validate() const {
    if (d < 1) throw BadParameter("ModelSpec: d must be positive");
    if (k < 1) throw BadParameter("ModelSpec: k must be positive");
    if (dims.size() != static_cast<std::size_t>(k) || counts.size() != static_cast<std::size_t>(k))
      throw BadParameter("ModelSpec: dims and counts must have k entries");
    for (Eigen::Index r : dims)
      if (r < 1 || r > d) throw BadParameter("ModelSpec: each r must lie in [1, d]");
    for (Eigen::Index n : counts)
      if (n < 1) throw BadParameter("ModelSpec: each count must be positive");
    if (noise.eta < 0.0 || noise.sigma < 0.0)
      throw BadParameter("ModelSpec: noise magnitudes must be nonnegative");
    if (model != DataModel::FullyRandom && given_bases.size() != static_cast<std::size_t>(k))
      throw BadParameter("ModelSpec: this model requires k given bases");
    if (model == DataModel::Deterministic && given_points.size() != static_cast<std::size_t>(k))
      throw BadParameter("ModelSpec: the deterministic model requires k given point sets");
  }
};

struct Instance {
  Matrix Y;
  Matrix X;
  Matrix Z;
  SubspaceEnsemble ensemble;
  Labels truth;
};

//! Orthonormal basis whose column space is Haar distributed: QR of a standard
//! Gaussian matrix with the sign of each R diagonal folded into Q.
inline Matrix random_subspace(Eigen::Index d, Eigen::Index r, std::uint64_t seed) {
  if (r < 1 || r > d) throw BadDimensions("random_subspace: need 1 <= r <= d");
  rng::SplitMix64 gen(seed);
  Matrix G(d, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < d; ++i) G(i, j) = gen.next_gaussian();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(d, r);
  Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

//! n points drawn i.i.d. uniformly from the unit sphere of span(U).
inline Matrix semirandom_points(const Matrix& U, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw BadParameter("semirandom_points: n must be positive");
  const Eigen::Index r = U.cols();
  rng::SplitMix64 gen(seed);
  Matrix out(U.rows(), n);
  Vector g(r);
  for (Eigen::Index j = 0; j < n; ++j) {
    double norm = 0.0;
    do {
      for (Eigen::Index i = 0; i < r; ++i) g[i] = gen.next_gaussian();
      norm = g.norm();
    } while (norm < 1e-12);
    out.col(j) = U * (g / norm);
  }
  return out;
}

//! d x N matrix of i.i.d. N(0, sigma^2/d) entries. Each column uses its own
//! derived stream, so the result does not depend on evaluation order.
inline Matrix gaussian_noise(Eigen::Index d, Eigen::Index N, double sigma, std::uint64_t seed) {
  if (d < 1 || N < 1) throw BadDimensions("gaussian_noise: d and N must be positive");
  if (sigma < 0.0) throw BadParameter("gaussian_noise: sigma must be nonnegative");
  Matrix Z = Matrix::Zero(d, N);
  if (sigma == 0.0) return Z;
  const double sd = sigma / std::sqrt(static_cast<double>(d));
  for (Eigen::Index j = 0; j < N; ++j) {
    rng::SplitMix64 gen(rng::derive(seed, {static_cast<std::uint64_t>(j)}));
    for (Eigen::Index i = 0; i < d; ++i) Z(i, j) = sd * gen.next_gaussian();
  }
  return Z;
}

namespace detail {

inline Vector random_unit(Eigen::Index d, rng::SplitMix64& gen) {
  Vector v(d);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = gen.next_gaussian();
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

}  // namespace detail

//! Noise columns of exact norm eta. RandomDirection puts each column
//! uniformly on the sphere. TowardOtherSubspace aims each column at the
//! most-aligned other subspace: with m the subspace of highest affinity to
//! the column's own, it takes the component of the projection of y onto
//! U^(m) that is orthogonal to y; columns where that direction degenerates
//! (or when k = 1) fall back to a random direction.
inline Matrix adversarial_noise(const Matrix& Y, const SubspaceEnsemble& ensemble, double eta,
                                AdversarialStrategy strategy, std::uint64_t seed) {
  if (eta < 0.0) throw BadParameter("adversarial_noise: eta must be nonnegative");
  const Eigen::Index d = Y.rows();
  const Eigen::Index N = Y.cols();
  Matrix Z = Matrix::Zero(d, N);
  if (eta == 0.0 || N == 0) return Z;

  const int k = static_cast<int>(ensemble.k());
  std::vector<int> target(static_cast<std::size_t>(k), -1);
  if (strategy == AdversarialStrategy::TowardOtherSubspace && k > 1) {
    for (int l = 0; l < k; ++l) {
      double best = -1.0;
      for (int m = 0; m < k; ++m) {
        if (m == l) continue;
        double a = affinity(ensemble.bases[static_cast<std::size_t>(l)],
                            ensemble.bases[static_cast<std::size_t>(m)]);
        if (a > best) {
          best = a;
          target[static_cast<std::size_t>(l)] = m;
        }
      }
    }
  }

  for (Eigen::Index j = 0; j < N; ++j) {
    rng::SplitMix64 gen(rng::derive(seed, {static_cast<std::uint64_t>(j)}));
    Vector dir;
    if (strategy == AdversarialStrategy::TowardOtherSubspace && k > 1) {
      Vector y = Y.col(j);
      int own = 0;
      double best_res = std::numeric_limits<double>::infinity();
      for (int l = 0; l < k; ++l) {
        const Matrix& U = ensemble.bases[static_cast<std::size_t>(l)];
        double res = (y - U * (U.transpose() * y)).norm();
        if (res < best_res) {
          best_res = res;
          own = l;
        }
      }
      const Matrix& Um = ensemble.bases[static_cast<std::size_t>(target[static_cast<std::size_t>(own)])];
      Vector q = Um * (Um.transpose() * y);
      double qn = q.norm();
      if (qn > 1e-10) {
        Vector u = q / qn;
        Vector raw = q - y * y.dot(u);
        if (raw.norm() > 1e-10) dir = raw.normalized();
      }
    }
    if (dir.size() == 0) dir = detail::random_unit(d, gen);
    Z.col(j) = eta * dir;
  }
  return Z;
}

//! Build one instance from a model description: bases per the model, unit
//! points per the model, optional homogeneous embedding, then noise, with
//! X = Y + Z. Deterministic given spec.seed.
inline Instance generate(const ModelSpec& spec) {
  spec.validate();
  const int k = spec.k;

  SubspaceEnsemble ensemble;
  ensemble.bases.resize(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l) {
    if (spec.model == DataModel::FullyRandom) {
      ensemble.bases[static_cast<std::size_t>(l)] = random_subspace(
          spec.d, spec.dims[static_cast<std::size_t>(l)],
          rng::derive(spec.seed, {0, static_cast<std::uint64_t>(l)}));
    } else {
      const Matrix& U = spec.given_bases[static_cast<std::size_t>(l)];
      if (U.rows() != spec.d || U.cols() != spec.dims[static_cast<std::size_t>(l)])
        throw BadDimensions("generate: given basis has wrong shape");
      detail::check_orthonormal(U);
      ensemble.bases[static_cast<std::size_t>(l)] = U;
    }
  }

  Eigen::Index N = 0;
  for (Eigen::Index n : spec.counts) N += n;
  Matrix Y(spec.d, N);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(N));
  Eigen::Index at = 0;
  for (int l = 0; l < k; ++l) {
    const Eigen::Index n = spec.counts[static_cast<std::size_t>(l)];
    Matrix pts;
    if (spec.model == DataModel::Deterministic) {
      pts = spec.given_points[static_cast<std::size_t>(l)];
      if (pts.rows() != spec.d || pts.cols() != n)
        throw BadDimensions("generate: given points have wrong shape");
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(pts.col(j).norm() - 1.0) > 1e-6)
          throw BadParameter("generate: given points must have unit norm");
    } else {
      pts = semirandom_points(ensemble.bases[static_cast<std::size_t>(l)], n,
                              rng::derive(spec.seed, {1, static_cast<std::uint64_t>(l)}));
    }
    Y.middleCols(at, n) = pts;
    for (Eigen::Index j = 0; j < n; ++j) labels.push_back(l);
    at += n;
  }

  Eigen::Index d_eff = spec.d;
  if (spec.homogeneous) {
    d_eff = spec.d + 1;
    Matrix Yh(d_eff, N);
    Yh.topRows(spec.d) = Y;
    Yh.row(spec.d).setOnes();
    for (Eigen::Index j = 0; j < N; ++j) Yh.col(j) /= Yh.col(j).norm();
    Y = std::move(Yh);
    for (int l = 0; l < k; ++l) {
      Matrix& U = ensemble.bases[static_cast<std::size_t>(l)];
      Matrix Uh = Matrix::Zero(d_eff, U.cols() + 1);
      Uh.topLeftCorner(spec.d, U.cols()) = U;
      Uh(spec.d, U.cols()) = 1.0;
      U = std::move(Uh);
    }
  }

  Matrix Z;
  switch (spec.noise.kind) {
    case NoiseKind::None:
      Z = Matrix::Zero(d_eff, N);
      break;
    case NoiseKind::Gaussian:
      Z = gaussian_noise(d_eff, N, spec.noise.sigma, rng::derive(spec.seed, {2}));
      break;
    case NoiseKind::Adversarial:
      Z = adversarial_noise(Y, ensemble, spec.noise.eta, spec.noise.strategy,
                            rng::derive(spec.seed, {2}));
      break;
  }

  Instance instance;
  instance.Y = std::move(Y);
  instance.Z = std::move(Z);
  instance.X = instance.Y + instance.Z;
  instance.ensemble = std::move(ensemble);
  instance.truth = Labels(std::move(labels), k);
  return instance;
}

inline std::string model_name(DataModel model) {
  switch (model) {
    case DataModel::Deterministic: return "deterministic";
    case DataModel::SemiRandom: return "semi_random";
    case DataModel::FullyRandom: return "fully_random";
  }
  throw BadParameter("model_name: unknown model");
}

inline DataModel model_from_name(const std::string& name) {
  if (name == "deterministic") return DataModel::Deterministic;
  if (name == "semi_random") return DataModel::SemiRandom;
  if (name == "fully_random") return DataModel::FullyRandom;
  throw BadParameter("model_from_name: unknown model '" + name + "'");
}

namespace detail {

inline std::vector<std::vector<double>> matrix_to_rows(const Matrix& M) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_rows(const nlohmann::json& j) {
  auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ParseError(0, 0, "matrix_from_rows: empty matrix");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw RaggedRows(static_cast<int>(i), rows[i].size(), rows[0].size());
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return M;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["d"] = spec.d;
  j["k"] = spec.k;
  j["dims"] = spec.dims;
  j["counts"] = spec.counts;
  j["model"] = model_name(spec.model);
  j["seed"] = spec.seed;
  j["homogeneous"] = spec.homogeneous;
  nlohmann::json noise;
  switch (spec.noise.kind) {
    case NoiseKind::None:
      noise["kind"] = "none";
      break;
    case NoiseKind::Adversarial:
      noise["kind"] = "adversarial";
      noise["eta"] = spec.noise.eta;
      noise["strategy"] = spec.noise.strategy == AdversarialStrategy::RandomDirection
                              ? "random_direction"
                              : "toward_other_subspace";
      break;
    case NoiseKind::Gaussian:
      noise["kind"] = "gaussian";
      noise["sigma"] = spec.noise.sigma;
      break;
  }
  j["noise"] = noise;
  if (!spec.given_bases.empty()) {
    nlohmann::json bases = nlohmann::json::array();
    for (const Matrix& U : spec.given_bases) bases.push_back(detail::matrix_to_rows(U));
    j["bases"] = bases;
  }
  if (!spec.given_points.empty()) {
    nlohmann::json points = nlohmann::json::array();
    for (const Matrix& P : spec.given_points) points.push_back(detail::matrix_to_rows(P));
    j["points"] = points;
  }
  return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.d = j.at("d").get<Eigen::Index>();
  spec.k = j.at("k").get<int>();
  spec.dims = j.at("dims").get<std::vector<Eigen::Index>>();
  spec.counts = j.at("counts").get<std::vector<Eigen::Index>>();
  spec.model = model_from_name(j.at("model").get<std::string>());
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.homogeneous = j.value("homogeneous", false);
  if (j.contains("noise")) {
    const nlohmann::json& noise = j.at("noise");
    std::string kind = noise.value("kind", "none");
    if (kind == "none") {
      spec.noise.kind = NoiseKind::None;
    } else if (kind == "adversarial") {
      spec.noise.kind = NoiseKind::Adversarial;
      spec.noise.eta = noise.at("eta").get<double>();
      std::string strategy = noise.value("strategy", "random_direction");
      if (strategy == "random_direction")
        spec.noise.strategy = AdversarialStrategy::RandomDirection;
      else if (strategy == "toward_other_subspace")
        spec.noise.strategy = AdversarialStrategy::TowardOtherSubspace;
      else
        throw BadParameter("model_from_json: unknown strategy '" + strategy + "'");
    } else if (kind == "gaussian") {
      spec.noise.kind = NoiseKind::Gaussian;
      spec.noise.sigma = noise.at("sigma").get<double>();
    } else {
      throw BadParameter("model_from_json: unknown noise kind '" + kind + "'");
    }
  }
  if (j.contains("bases"))
    for (const auto& b : j.at("bases")) spec.given_bases.push_back(detail::matrix_from_rows(b));
  if (j.contains("points"))
    for (const auto& p : j.at("points")) spec.given_points.push_back(detail::matrix_from_rows(p));
  spec.validate();
  return spec;
}

}  // namespace sscdr
