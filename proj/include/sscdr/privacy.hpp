#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "sscdr/core.hpp"
#include "sscdr/embeddings.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/geometry.hpp"
#include "sscdr/parallel.hpp"
#include "sscdr/rng.hpp"

namespace sscdr {

//! Parameters of one differentially private release. eps_priv/delta_priv are
//! the privacy budget, mu0 bounds the spikiness of every data column, and
//! eps_embed is the distortion level of the projection operator used.
struct PrivacyParams {
  double eps_priv = 1.0;
  double delta_priv = 0.05;
  double mu0 = 1.0;
  double eps_embed = 0.0;

  void validate() const {
    if (!(eps_priv > 0.0)) throw BadParameter("PrivacyParams: eps_priv must be positive");
    if (!(delta_priv > 0.0 && delta_priv < 1.0))
      throw BadParameter("PrivacyParams: delta_priv must lie in (0,1)");
    if (!(mu0 >= 1.0)) throw BadParameter("PrivacyParams: mu0 must be at least 1");
    if (!(eps_embed >= 0.0 && eps_embed < 1.0))
      throw BadParameter("PrivacyParams: eps_embed must lie in [0,1)");
  }
};

//! Spikiness of a vector: d * |x|_inf^2 / |x|_2^2, in [1, d].
inline double spikiness(const Vector& x) {
  if (x.size() == 0) throw BadDimensions("spikiness: empty vector");
  double n2 = x.squaredNorm();
  if (n2 <= 0.0) throw ZeroVector("spikiness: zero vector");
  double m = x.cwiseAbs().maxCoeff();
  return static_cast<double>(x.size()) * m * m / n2;
}

//! Incoherence of a column space given an orthonormal basis: (d/r) times the
//! largest squared row norm, in [1, d/r].
inline double column_space_incoherence(const Matrix& U) {
  if (U.cols() < 1 || U.rows() < U.cols())
    throw BadDimensions("column_space_incoherence: need a tall orthonormal basis");
  detail::check_orthonormal(U);
  double m = U.rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(U.rows()) / static_cast<double>(U.cols()) * m;
}

//! Gaussian-mechanism noise level of the private release:
//! (1+eps_embed)/(1-eps_embed) * sqrt(32 * mu0 * ln(1.25/delta) / eps^2).
inline double noise_scale(const PrivacyParams& params) {
  params.validate();
  return (1.0 + params.eps_embed) / (1.0 - params.eps_embed) *
         std::sqrt(32.0 * params.mu0 * std::log(1.25 / params.delta_priv) /
                   (params.eps_priv * params.eps_priv));
}

//! Worst-case l2 change of a normalized projected column when one entry of
//! the underlying data changes: 4*sqrt(mu0/d)*(1+eps_embed)/(1-eps_embed).
inline double l2_sensitivity_bound(double mu0, double eps_embed, Eigen::Index d) {
  if (!(mu0 >= 1.0)) throw BadParameter("l2_sensitivity_bound: mu0 must be at least 1");
  if (!(eps_embed >= 0.0 && eps_embed < 1.0))
    throw BadParameter("l2_sensitivity_bound: eps_embed must lie in [0,1)");
  if (d < 1) throw BadParameter("l2_sensitivity_bound: d must be positive");
  return 4.0 * std::sqrt(mu0 / static_cast<double>(d)) * (1.0 + eps_embed) / (1.0 - eps_embed);
}

//! A released matrix together with the exact noise level and parameters used.
struct PrivateRelease {
  Matrix data;
  double sigma = 0.0;
  PrivacyParams params;
  std::uint64_t seed = 0;
};

//! Add i.i.d. Gaussian noise with per-entry standard deviation
//! noise_scale(params)/sqrt(d_original) to an already projected and
//! normalized matrix. Deterministic given the seed; column j draws from its
//! own derived stream so the result is independent of evaluation order.
inline PrivateRelease privatize(const NormalizedDataMatrix& Xn, const PrivacyParams& params,
                                Eigen::Index d_original, std::uint64_t seed, int threads = 1) {
  params.validate();
  if (d_original < 1) throw BadParameter("privatize: d_original must be positive");
  PrivateRelease release;
  release.params = params;
  release.seed = seed;
  release.sigma = noise_scale(params);
  release.data = Xn.values;
  const double sd = release.sigma / std::sqrt(static_cast<double>(d_original));
  const Eigen::Index p = Xn.d();
  parallel_for(
      static_cast<std::size_t>(Xn.N()),
      [&](std::size_t j) {
        rng::SplitMix64 gen(rng::derive(seed, {static_cast<std::uint64_t>(j)}));
        for (Eigen::Index i = 0; i < p; ++i)
          release.data(i, static_cast<Eigen::Index>(j)) += sd * gen.next_gaussian();
      },
      threads);
  return release;
}

//! Utility condition of the private release: the privacy budget eps_priv
//! must be at least c * sqrt(mu0 * ln(1/delta) / d) * max(log^{5/4}N / B^2,
//! log^{3/2}N / (B^{11/2} p^{1/4})), where B summarizes the geometry
//! (min of rho, 1/sqrt(r), and the margin).
inline ConditionVerdict check_utility(double eps_priv, double delta_priv, double mu0,
                                      Eigen::Index d, Eigen::Index p, Eigen::Index N, double B,
                                      double c) {
  if (!(eps_priv > 0.0)) throw BadParameter("check_utility: eps_priv must be positive");
  if (!(delta_priv > 0.0 && delta_priv < 1.0))
    throw BadParameter("check_utility: delta_priv must lie in (0,1)");
  if (!(mu0 >= 1.0)) throw BadParameter("check_utility: mu0 must be at least 1");
  if (d < 1 || p < 1 || N < 1) throw BadParameter("check_utility: bad instance size");
  if (!(B > 0.0)) throw BadParameter("check_utility: B must be positive");
  if (!(c > 0.0)) throw BadParameter("check_utility: c must be positive");
  double logN = std::log(static_cast<double>(N));
  double t1 = std::pow(logN, 1.25) / (B * B);
  double t2 = std::pow(logN, 1.5) / (std::pow(B, 5.5) * std::pow(static_cast<double>(p), 0.25));
  double threshold =
      c * std::sqrt(mu0 * std::log(1.0 / delta_priv) / static_cast<double>(d)) * std::max(t1, t2);
  return detail::verdict_from_terms({{"privacy budget", threshold, eps_priv, false}});
}

namespace detail {

//! Unit vector with spikiness at most mu0: clip entries at sqrt(mu0/d) and
//! renormalize until the constraint holds.
inline Vector spiky_unit_column(Eigen::Index d, double mu0, rng::SplitMix64& gen) {
  Vector x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = gen.next_gaussian();
  if (x.norm() < 1e-12) x[0] = 1.0;
  x.normalize();
  const double cap = std::sqrt(mu0 / static_cast<double>(d));
  for (int pass = 0; pass < 200; ++pass) {
    if (spikiness(x) <= mu0) break;
    for (Eigen::Index i = 0; i < d; ++i) x[i] = std::clamp(x[i], -cap, cap);
    x.normalize();
  }
  return x;
}

}  // namespace detail

//! Largest observed l2 change of the projected, normalized column under
//! random single-entry perturbations bounded by 2*sqrt(mu0/d), with both the
//! original and the perturbed column keeping spikiness at most mu0. Monte
//! Carlo counterpart of l2_sensitivity_bound.
inline double empirical_sensitivity(const ProjectionOperator& op, Eigen::Index d, Eigen::Index p,
                                    double mu0, long trials, std::uint64_t seed, int threads = 1) {
  if (trials < 1) throw BadParameter("empirical_sensitivity: trials must be positive");
  if (!(mu0 >= 1.0)) throw BadParameter("empirical_sensitivity: mu0 must be at least 1");
  if (op.d != d || op.p != p)
    throw DimensionMismatch("empirical_sensitivity: operator shape mismatch");
  std::vector<double> worst(static_cast<std::size_t>(trials), 0.0);
  parallel_for(
      static_cast<std::size_t>(trials),
      [&](std::size_t t) {
        rng::SplitMix64 gen(rng::derive(seed, {static_cast<std::uint64_t>(t)}));
        Vector x = detail::spiky_unit_column(d, mu0, gen);
        Eigen::Index j = static_cast<Eigen::Index>(gen.next_below(static_cast<std::uint64_t>(d)));
        double delta = (2.0 * gen.next_double() - 1.0) * 2.0 * std::sqrt(mu0 / static_cast<double>(d));
        Vector xp = x;
        for (int halve = 0; halve < 80; ++halve) {
          xp[j] = x[j] + delta;
          if (xp.squaredNorm() > 0.0 && spikiness(xp) <= mu0) break;
          delta *= 0.5;
        }
        if (!(xp.squaredNorm() > 0.0 && spikiness(xp) <= mu0)) xp = x;
        Matrix pair(d, 2);
        pair.col(0) = x;
        pair.col(1) = xp;
        Matrix proj = apply(op, pair);
        double n0 = proj.col(0).norm();
        double n1 = proj.col(1).norm();
        if (n0 < 1e-300 || n1 < 1e-300) return;
        worst[t] = (proj.col(0) / n0 - proj.col(1) / n1).norm();
      },
      threads);
  return *std::max_element(worst.begin(), worst.end());
}

inline nlohmann::json params_to_json(const PrivacyParams& params) {
  return nlohmann::json{{"eps_priv", params.eps_priv},
                        {"delta_priv", params.delta_priv},
                        {"mu0", params.mu0},
                        {"eps_embed", params.eps_embed}};
}

inline PrivacyParams params_from_json(const nlohmann::json& j) {
  PrivacyParams params;
  params.eps_priv = j.at("eps_priv").get<double>();
  params.delta_priv = j.at("delta_priv").get<double>();
  params.mu0 = j.at("mu0").get<double>();
  params.eps_embed = j.at("eps_embed").get<double>();
  params.validate();
  return params;
}

//! Metadata of a release; the data matrix itself is stored as CSV next to it.
inline nlohmann::json release_to_json(const PrivateRelease& release) {
  return nlohmann::json{{"params", params_to_json(release.params)},
                        {"sigma", release.sigma},
                        {"seed", release.seed}};
}

}  // namespace sscdr
