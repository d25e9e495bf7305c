#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sscdr/clustering.hpp"
#include "sscdr/core.hpp"
#include "sscdr/datagen.hpp"
#include "sscdr/embeddings.hpp"
#include "sscdr/errors.hpp"
#include "sscdr/geometry.hpp"
#include "sscdr/parallel.hpp"
#include "sscdr/privacy.hpp"
#include "sscdr/rng.hpp"
#include "sscdr/solver.hpp"

namespace sscdr {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class GeometryLevel { None, Post, Full };

inline std::string geometry_level_name(GeometryLevel level) {
  switch (level) {
    case GeometryLevel::None: return "none";
    case GeometryLevel::Post: return "post";
    case GeometryLevel::Full: return "full";
  }
  throw BadParameter("geometry_level_name: unknown level");
}

inline GeometryLevel geometry_level_from_name(const std::string& name) {
  if (name == "none") return GeometryLevel::None;
  if (name == "post") return GeometryLevel::Post;
  if (name == "full") return GeometryLevel::Full;
  throw BadParameter("geometry level must be none, post, or full");
}

//! Everything one sweep needs. Data comes either from a generator model or
//! from a CSV file with a labels file. The projector runs over p_grid; a
//! "none" projector keeps the ambient data and uses a single pseudo grid
//! point at p = d. Lambdas are absolute by default; in relative mode the
//! grid value alpha means lambda_i = alpha * |X_{-i}^T x_i|_inf per column.
struct ExperimentConfig {
  bool has_model = false;
  ModelSpec data;
  std::string input_csv;
  std::string input_labels;
  bool fixed_instance = false;

  ProjectorKind projector = ProjectorKind::Gaussian;
  bool project = true;
  std::vector<Eigen::Index> p_grid;
  std::vector<double> lambda_grid;
  bool lambda_relative = false;

  std::optional<PrivacyParams> privacy;
  long replicates = 1;
  std::uint64_t seed = 0;
  GeometryLevel geometry = GeometryLevel::None;
  double c_eps = 1.0;
  long distortion_probes = 200;

  double tol_kkt = 1e-8;
  long max_iters = 10000;

  void validate() const {
    if (has_model)
      data.validate();
    else if (input_csv.empty() || input_labels.empty())
      throw BadParameter("config: either a data model or csv+labels input is required");
    if (project && p_grid.empty()) throw BadParameter("config: p_grid must be non-empty");
    for (Eigen::Index p : p_grid)
      if (p < 1) throw BadParameter("config: every p must be positive");
    if (lambda_grid.empty()) throw BadParameter("config: lambda_grid must be non-empty");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw BadParameter("config: every lambda must be positive");
    if (replicates < 1) throw BadParameter("config: replicates must be at least 1");
    if (!(c_eps > 0.0)) throw BadParameter("config: c_eps must be positive");
    if (distortion_probes < 1) throw BadParameter("config: distortion_probes must be positive");
    if (!(tol_kkt > 0.0)) throw BadParameter("config: tol_kkt must be positive");
    if (max_iters < 1) throw BadParameter("config: max_iters must be positive");
    if (privacy) privacy->validate();
    if (lambda_relative && geometry != GeometryLevel::None)
      throw BadParameter("config: geometry reports require absolute lambda mode");
  }
};

//! One row of results.csv: every config coordinate of the grid point plus
//! all measured outcomes. Optional fields hold NaN / "na" when a quantity
//! does not apply to the run. Wall time lives in timings.csv so that
//! results.csv stays byte-identical across thread counts and machines.
struct ResultRecord {
  long grid_index = 0;
  long p_index = 0;
  long lambda_index = 0;
  long replicate = 0;
  std::uint64_t record_seed = 0;
  std::string projector;
  Eigen::Index p = 0;
  std::string lambda_mode;
  double lambda = 0.0;
  Eigen::Index d = 0;
  Eigen::Index N = 0;
  int k = 0;
  std::string model;
  std::string noise;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  bool privacy = false;
  double eps_priv = std::numeric_limits<double>::quiet_NaN();
  double sigma_release = std::numeric_limits<double>::quiet_NaN();
  double eps_measured = std::numeric_limits<double>::quiet_NaN();
  long solver_failures = 0;
  long total_iterations = 0;
  long trivial_columns = 0;
  bool sdp = false;
  bool sep = false;
  double rel_violation = 0.0;
  double clustering_error = 0.0;
  Eigen::Index isolated_vertices = 0;
  bool degenerate_graph = false;

  std::vector<double> mu_pre, rho_pre;
  double rho_min_pre = std::numeric_limits<double>::quiet_NaN();
  double margin_pre = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mu_post, rho_post;
  double rho_min_post = std::numeric_limits<double>::quiet_NaN();
  double margin_post = std::numeric_limits<double>::quiet_NaN();
  int degenerate_duals_pre = 0;
  int degenerate_duals_post = 0;

  int verdict_noiseless = -1;  // -1 = not applicable, else 0/1
  std::string binding_noiseless = "na";
  int verdict_deterministic = -1;
  std::string binding_deterministic = "na";
  int verdict_stochastic = -1;
  std::string binding_stochastic = "na";
  int verdict_cited = -1;
  std::string binding_cited = "na";
  int verdict_semirandom = -1;
  int verdict_fully_random = -1;

  std::string error;
};

namespace detail {

inline constexpr std::uint64_t kTagInstance = 1;
inline constexpr std::uint64_t kTagProjector = 2;
inline constexpr std::uint64_t kTagPrivacy = 3;
inline constexpr std::uint64_t kTagSpectral = 4;
inline constexpr std::uint64_t kTagDistortion = 5;

inline std::string csv_double(double v) {
  if (std::isnan(v)) return "na";
  return format_double(v);
}

inline std::string csv_list(const std::vector<double>& values) {
  if (values.empty()) return "na";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += '|';
    out += format_double(values[i]);
  }
  return out;
}

inline std::string csv_verdict(int v) { return v < 0 ? "na" : std::to_string(v); }

inline std::string sanitize_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> columns = {
      "grid_index", "p_index", "lambda_index", "replicate", "record_seed", "projector", "p",
      "lambda_mode", "lambda", "d", "N", "k", "model", "noise", "eta", "sigma", "privacy",
      "eps_priv", "sigma_release", "eps_measured", "solver_failures", "total_iterations",
      "trivial_columns", "sdp", "sep", "rel_violation", "clustering_error", "isolated_vertices",
      "degenerate_graph", "mu_pre", "rho_pre", "rho_min_pre", "margin_pre", "mu_post", "rho_post",
      "rho_min_post", "margin_post", "degenerate_duals_pre", "degenerate_duals_post",
      "verdict_noiseless", "binding_noiseless", "verdict_deterministic", "binding_deterministic",
      "verdict_stochastic", "binding_stochastic", "verdict_cited", "binding_cited",
      "verdict_semirandom", "verdict_fully_random", "error"};
  return columns;
}

inline std::string result_row(const ResultRecord& r) {
  std::vector<std::string> f;
  f.push_back(std::to_string(r.grid_index));
  f.push_back(std::to_string(r.p_index));
  f.push_back(std::to_string(r.lambda_index));
  f.push_back(std::to_string(r.replicate));
  f.push_back(std::to_string(r.record_seed));
  f.push_back(r.projector);
  f.push_back(std::to_string(r.p));
  f.push_back(r.lambda_mode);
  f.push_back(format_double(r.lambda));
  f.push_back(std::to_string(r.d));
  f.push_back(std::to_string(r.N));
  f.push_back(std::to_string(r.k));
  f.push_back(r.model);
  f.push_back(r.noise);
  f.push_back(csv_double(r.eta));
  f.push_back(csv_double(r.sigma));
  f.push_back(r.privacy ? "1" : "0");
  f.push_back(csv_double(r.eps_priv));
  f.push_back(csv_double(r.sigma_release));
  f.push_back(csv_double(r.eps_measured));
  f.push_back(std::to_string(r.solver_failures));
  f.push_back(std::to_string(r.total_iterations));
  f.push_back(std::to_string(r.trivial_columns));
  f.push_back(r.sdp ? "1" : "0");
  f.push_back(r.sep ? "1" : "0");
  f.push_back(format_double(r.rel_violation));
  f.push_back(format_double(r.clustering_error));
  f.push_back(std::to_string(r.isolated_vertices));
  f.push_back(r.degenerate_graph ? "1" : "0");
  f.push_back(csv_list(r.mu_pre));
  f.push_back(csv_list(r.rho_pre));
  f.push_back(csv_double(r.rho_min_pre));
  f.push_back(csv_double(r.margin_pre));
  f.push_back(csv_list(r.mu_post));
  f.push_back(csv_list(r.rho_post));
  f.push_back(csv_double(r.rho_min_post));
  f.push_back(csv_double(r.margin_post));
  f.push_back(std::to_string(r.degenerate_duals_pre));
  f.push_back(std::to_string(r.degenerate_duals_post));
  f.push_back(csv_verdict(r.verdict_noiseless));
  f.push_back(sanitize_field(r.binding_noiseless));
  f.push_back(csv_verdict(r.verdict_deterministic));
  f.push_back(sanitize_field(r.binding_deterministic));
  f.push_back(csv_verdict(r.verdict_stochastic));
  f.push_back(sanitize_field(r.binding_stochastic));
  f.push_back(csv_verdict(r.verdict_cited));
  f.push_back(sanitize_field(r.binding_cited));
  f.push_back(csv_verdict(r.verdict_semirandom));
  f.push_back(csv_verdict(r.verdict_fully_random));
  f.push_back(sanitize_field(r.error));
  std::string row;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) row += ',';
    row += f[i];
  }
  return row;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  if (config.has_model)
    j["data"] = model_to_json(config.data);
  else
    j["data"] = nlohmann::json{{"csv", config.input_csv}, {"labels", config.input_labels}};
  j["fixed_instance"] = config.fixed_instance;
  nlohmann::json proj;
  proj["kind"] = config.project ? kind_name(config.projector) : "none";
  proj["p_grid"] = config.p_grid;
  j["projector"] = proj;
  j["lambda_grid"] = config.lambda_grid;
  j["lambda_mode"] = config.lambda_relative ? "relative" : "absolute";
  if (config.privacy) j["privacy"] = params_to_json(*config.privacy);
  j["replicates"] = config.replicates;
  j["seed"] = config.seed;
  j["geometry"] = geometry_level_name(config.geometry);
  j["c_eps"] = config.c_eps;
  j["distortion_probes"] = config.distortion_probes;
  j["solver"] = nlohmann::json{{"tol_kkt", config.tol_kkt}, {"max_iters", config.max_iters}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  const nlohmann::json& data = j.at("data");
  if (data.contains("csv")) {
    config.has_model = false;
    config.input_csv = data.at("csv").get<std::string>();
    config.input_labels = data.at("labels").get<std::string>();
  } else {
    config.has_model = true;
    config.data = model_from_json(data);
  }
  config.fixed_instance = j.value("fixed_instance", false);
  const nlohmann::json& proj = j.at("projector");
  std::string kind = proj.at("kind").get<std::string>();
  if (kind == "none") {
    config.project = false;
  } else {
    config.project = true;
    config.projector = kind_from_name(kind);
    config.p_grid = proj.at("p_grid").get<std::vector<Eigen::Index>>();
  }
  config.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  std::string mode = j.value("lambda_mode", "absolute");
  if (mode == "relative")
    config.lambda_relative = true;
  else if (mode != "absolute")
    throw BadParameter("config: lambda_mode must be absolute or relative");
  if (j.contains("privacy")) config.privacy = params_from_json(j.at("privacy"));
  config.replicates = j.value("replicates", 1L);
  config.seed = j.value("seed", std::uint64_t{0});
  config.geometry = geometry_level_from_name(j.value("geometry", std::string("none")));
  config.c_eps = j.value("c_eps", 1.0);
  config.distortion_probes = j.value("distortion_probes", 200L);
  if (j.contains("solver")) {
    config.tol_kkt = j.at("solver").value("tol_kkt", 1e-8);
    config.max_iters = j.at("solver").value("max_iters", 10000L);
  }
  config.validate();
  return config;
}

struct RunOutput {
  std::vector<ResultRecord> records;
  std::vector<double> wall_ms;
  bool any_failures = false;
};

namespace detail {

struct LoadedData {
  Matrix X;
  Labels truth;
  std::optional<Instance> instance;  // present when generated
};

inline LoadedData obtain_data(const ExperimentConfig& config, long replicate) {
  LoadedData out;
  if (config.has_model) {
    ModelSpec spec = config.data;
    spec.seed = config.fixed_instance
                    ? rng::derive(config.seed, {kTagInstance})
                    : rng::derive(config.seed, {kTagInstance, static_cast<std::uint64_t>(replicate)});
    Instance instance = generate(spec);
    out.X = instance.X;
    out.truth = instance.truth;
    out.instance = std::move(instance);
  } else {
    out.X = load_csv(config.input_csv);
    out.truth = load_labels(config.input_labels);
    if (static_cast<Eigen::Index>(out.truth.size()) != out.X.cols())
      throw BadDimensions("config: labels length must match the number of data columns");
  }
  return out;
}

inline ProjectionOperator make_projector(ProjectorKind kind, Eigen::Index d, Eigen::Index p,
                                         std::uint64_t seed) {
  switch (kind) {
    case ProjectorKind::Gaussian: return make_gaussian(d, p, seed);
    case ProjectorKind::UniformRows: return make_uniform_rows(d, p, seed);
    case ProjectorKind::FJLT: return make_fjlt(d, p, seed);
    case ProjectorKind::Sketch: return make_sketch(d, p, seed);
  }
  throw BadParameter("make_projector: unknown kind");
}

//! Solve the whole self-representation at one grid point, reusing warm
//! states across calls (the caller owns them, ordered by column).
struct GridSolve {
  SelfRepresentation C;
  long failures = 0;
  long total_iterations = 0;

  GridSolve(Eigen::Index n) : C(n) {}
};

inline GridSolve solve_grid_point(const Matrix& M, const std::vector<double>& lambdas,
                                  double tol_kkt, long max_iters, const Matrix* shared_xxt,
                                  std::vector<LassoState>& warm) {
  const Eigen::Index N = M.cols();
  GridSolve out(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    LassoSettings settings;
    settings.lambda = lambdas[static_cast<std::size_t>(i)];
    settings.tol_kkt = tol_kkt;
    settings.max_iters = max_iters;
    try {
      ColumnSolution sol =
          lasso_column_impl(M, i, settings, shared_xxt, &warm[static_cast<std::size_t>(i)]);
      out.total_iterations += sol.iterations;
      std::vector<SelfRepresentation::Entry> entries;
      for (Eigen::Index j = 0; j < N; ++j)
        if (sol.coefficients[j] != 0.0)
          entries.emplace_back(static_cast<int>(j), sol.coefficients[j]);
      out.C.set_column(i, std::move(entries));
    } catch (const NoConvergence&) {
      ++out.failures;
      out.total_iterations += max_iters;
    }
  }
  return out;
}

//! Orthonormal bases of the projected subspaces; empty when any basis loses
//! rank under the projection.
inline std::optional<SubspaceEnsemble> project_ensemble(const ProjectionOperator& op,
                                                        const SubspaceEnsemble& ensemble) {
  SubspaceEnsemble out;
  for (const Matrix& U : ensemble.bases) {
    Matrix PU = apply(op, U);
    if (PU.rows() < U.cols()) return std::nullopt;
    Eigen::HouseholderQR<Matrix> qr(PU);
    Matrix R = qr.matrixQR().topRows(U.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < U.cols(); ++j)
      if (std::abs(R(j, j)) < 1e-10) return std::nullopt;
    out.bases.push_back(qr.householderQ() * Matrix::Identity(PU.rows(), U.cols()));
  }
  return out;
}

}  // namespace detail

//! Execute the full sweep: for every (p, replicate) work unit the instance is
//! built, projected, normalized, optionally privatized, and solved across the
//! lambda grid in descending order with warm starts; each lambda yields one
//! record. Units run in parallel; records are returned in deterministic
//! (grid_index, replicate) order regardless of thread count.
inline RunOutput run_pipeline(const ExperimentConfig& config, int threads = 0) {
  config.validate();
  const int workers = thread_count(threads);

  std::vector<Eigen::Index> ps = config.project ? config.p_grid : std::vector<Eigen::Index>{0};
  const long P = static_cast<long>(ps.size());
  const long L = static_cast<long>(config.lambda_grid.size());
  const long R = config.replicates;

  // lambda execution order: descending values (warm-start friendly)
  std::vector<std::size_t> lambda_order(static_cast<std::size_t>(L));
  for (std::size_t i = 0; i < lambda_order.size(); ++i) lambda_order[i] = i;
  std::sort(lambda_order.begin(), lambda_order.end(), [&](std::size_t a, std::size_t b) {
    if (config.lambda_grid[a] != config.lambda_grid[b])
      return config.lambda_grid[a] > config.lambda_grid[b];
    return a < b;
  });

  RunOutput output;
  output.records.resize(static_cast<std::size_t>(P * L * R));
  output.wall_ms.assign(static_cast<std::size_t>(P * L * R), 0.0);

  parallel_for(
      static_cast<std::size_t>(P * R),
      [&](std::size_t unit) {
        const long p_index = static_cast<long>(unit) / R;
        const long replicate = static_cast<long>(unit) % R;

        detail::LoadedData data = detail::obtain_data(config, replicate);
        const Eigen::Index d_eff = data.X.rows();
        const Eigen::Index N = data.X.cols();

        std::optional<ProjectionOperator> op;
        Matrix projected;
        double eps_measured = std::numeric_limits<double>::quiet_NaN();
        if (config.project) {
          op = detail::make_projector(
              config.projector, d_eff, ps[static_cast<std::size_t>(p_index)],
              rng::derive(config.seed, {detail::kTagProjector, static_cast<std::uint64_t>(p_index),
                                   static_cast<std::uint64_t>(replicate)}));
          projected = apply(*op, data.X);
          if (data.instance) {
            double worst = 0.0;
            for (std::size_t l = 0; l < data.instance->ensemble.bases.size(); ++l) {
              DistortionReport rep = measure_distortion(
                  *op, data.instance->ensemble.bases[l], config.distortion_probes,
                  rng::derive(config.seed, {detail::kTagDistortion, static_cast<std::uint64_t>(p_index),
                                       static_cast<std::uint64_t>(replicate),
                                       static_cast<std::uint64_t>(l)}));
              worst = std::max(worst, rep.max_norm_distortion);
            }
            eps_measured = worst;
          }
        } else {
          projected = data.X;
          eps_measured = 0.0;
        }

        NormalizedDataMatrix Xn = normalize_columns(projected);

        double sigma_release = std::numeric_limits<double>::quiet_NaN();
        if (config.privacy) {
          PrivateRelease release = privatize(
              Xn, *config.privacy, d_eff,
              rng::derive(config.seed, {detail::kTagPrivacy, static_cast<std::uint64_t>(p_index),
                                   static_cast<std::uint64_t>(replicate)}));
          sigma_release = release.sigma;
          // The release is the pipeline input as-is; downstream must not
          // re-normalize, so the carrier keeps the noisy columns untouched.
          Xn.values = std::move(release.data);
          Xn.original_norms = Vector::Ones(N);
        }

        Matrix shared_xxt;
        const Matrix* xxt = nullptr;
        if (Xn.d() < N) {
          shared_xxt = Xn.values * Xn.values.transpose();
          xxt = &shared_xxt;
        }

        std::vector<double> lambda_max;
        if (config.lambda_relative) {
          lambda_max.resize(static_cast<std::size_t>(N));
          for (Eigen::Index i = 0; i < N; ++i) {
            Vector corr = Xn.values.transpose() * Xn.values.col(i);
            corr[i] = 0.0;
            lambda_max[static_cast<std::size_t>(i)] = corr.lpNorm<Eigen::Infinity>();
          }
        }

        // Post-projection geometry inputs (clean data), independent of lambda.
        std::optional<NormalizedDataMatrix> clean_post;
        std::optional<SubspaceEnsemble> ensemble_post;
        std::optional<NormalizedDataMatrix> clean_pre;
        if (config.geometry != GeometryLevel::None && data.instance) {
          Matrix Yp = config.project ? apply(*op, data.instance->Y) : data.instance->Y;
          bool ok = true;
          for (Eigen::Index j = 0; j < Yp.cols() && ok; ++j)
            if (Yp.col(j).norm() < kZeroColumnTol) ok = false;
          if (ok) {
            clean_post = normalize_columns(Yp);
            if (config.project)
              ensemble_post = detail::project_ensemble(*op, data.instance->ensemble);
            else
              ensemble_post = data.instance->ensemble;
          }
          if (config.geometry == GeometryLevel::Full)
            clean_pre = normalize_columns(data.instance->Y);
        }

        std::vector<detail::LassoState> warm(static_cast<std::size_t>(N));
        for (std::size_t at = 0; at < lambda_order.size(); ++at) {
          const long lambda_index = static_cast<long>(lambda_order[at]);
          const double alpha = config.lambda_grid[static_cast<std::size_t>(lambda_index)];
          auto t0 = std::chrono::steady_clock::now();

          std::vector<double> lambdas(static_cast<std::size_t>(N), alpha);
          if (config.lambda_relative)
            for (Eigen::Index i = 0; i < N; ++i)
              lambdas[static_cast<std::size_t>(i)] =
                  std::max(alpha * lambda_max[static_cast<std::size_t>(i)], 1e-12);

          ResultRecord record;
          record.p_index = p_index;
          record.lambda_index = lambda_index;
          record.grid_index = p_index * L + lambda_index;
          record.replicate = replicate;
          record.record_seed = rng::derive(config.seed, {static_cast<std::uint64_t>(record.grid_index),
                                                    static_cast<std::uint64_t>(replicate)});
          record.projector = config.project ? kind_name(config.projector) : "none";
          record.p = config.project ? ps[static_cast<std::size_t>(p_index)] : d_eff;
          record.lambda_mode = config.lambda_relative ? "relative" : "absolute";
          record.lambda = alpha;
          record.d = d_eff;
          record.N = N;
          record.k = data.truth.k;
          record.model = config.has_model ? model_name(config.data.model) : "file";
          record.eps_measured = eps_measured;
          record.privacy = config.privacy.has_value();
          if (config.privacy) {
            record.eps_priv = config.privacy->eps_priv;
            record.sigma_release = sigma_release;
          }
          if (config.has_model) {
            switch (config.data.noise.kind) {
              case NoiseKind::None: record.noise = "none"; break;
              case NoiseKind::Adversarial:
                record.noise = "adversarial";
                record.eta = config.data.noise.eta;
                break;
              case NoiseKind::Gaussian:
                record.noise = "gaussian";
                record.sigma = config.data.noise.sigma;
                break;
            }
          } else {
            record.noise = "unknown";
          }

          try {
            detail::GridSolve solved = detail::solve_grid_point(
                Xn.values, lambdas, config.tol_kkt, config.max_iters, xxt, warm);
            record.solver_failures = solved.failures;
            record.total_iterations = solved.total_iterations;

            SimilarityGraph graph = build_similarity(solved.C);
            SpectralDiagnostics diag;
            Labels predicted = spectral_cluster(
                graph, data.truth.k, rng::derive(record.record_seed, {detail::kTagSpectral}), &diag);
            record.isolated_vertices = diag.isolated_vertices;
            record.degenerate_graph = diag.degenerate;

            EvaluationReport eval = evaluate(solved.C, predicted, data.truth);
            record.clustering_error = eval.clustering_error;
            record.rel_violation = eval.rel_violation;
            record.sdp = eval.sdp_holds;
            record.sep = eval.sep_holds;
            record.trivial_columns = eval.trivial_columns;

            if (clean_post && ensemble_post) {
              GeometryReport post =
                  make_geometry_report(*clean_post, data.truth, *ensemble_post, alpha);
              record.mu_post = post.mu;
              record.rho_post = post.rho;
              record.rho_min_post = post.rho_min;
              record.margin_post = post.margin;
              record.degenerate_duals_post = post.degenerate_duals;
            }
            if (clean_pre && data.instance) {
              GeometryReport pre = make_geometry_report(*clean_pre, data.truth,
                                                        data.instance->ensemble, alpha);
              record.mu_pre = pre.mu;
              record.rho_pre = pre.rho;
              record.rho_min_pre = pre.rho_min;
              record.margin_pre = pre.margin;
              record.degenerate_duals_pre = pre.degenerate_duals;

              double eps_for_checkers = config.project ? eps_measured : 0.0;
              const NoiseSpec& noise = config.data.noise;
              if (noise.kind == NoiseKind::None) {
                ConditionVerdict v = check_noiseless(pre, alpha, eps_for_checkers, config.c_eps);
                record.verdict_noiseless = v.satisfied ? 1 : 0;
                record.binding_noiseless = v.binding_constraint;
              } else if (noise.kind == NoiseKind::Adversarial) {
                ConditionVerdict v = check_deterministic_noise(pre, alpha, eps_for_checkers,
                                                               noise.eta, config.c_eps);
                record.verdict_deterministic = v.satisfied ? 1 : 0;
                record.binding_deterministic = v.binding_constraint;
                ConditionVerdict cited = check_cited_noisy_ssc(pre, alpha, noise.eta);
                record.verdict_cited = cited.satisfied ? 1 : 0;
                record.binding_cited = cited.binding_constraint;
              } else {
                Eigen::Index r_max = 0;
                for (const Matrix& U : data.instance->ensemble.bases)
                  r_max = std::max(r_max, U.cols());
                StochasticConstants constants;
                constants.c_eps = config.c_eps;
                ConditionVerdict v =
                    check_stochastic_noise(pre, alpha, eps_for_checkers, noise.sigma,
                                           data.instance->Y.rows(), N, r_max, constants);
                record.verdict_stochastic = v.satisfied ? 1 : 0;
                record.binding_stochastic = v.binding_constraint;
              }

              if (config.data.model != DataModel::Deterministic && data.truth.k > 1) {
                double kappa = std::numeric_limits<double>::infinity();
                Eigen::Index r_max = 0;
                for (int l = 0; l < data.truth.k; ++l) {
                  double nl = static_cast<double>(config.data.counts[static_cast<std::size_t>(l)]);
                  double rl = static_cast<double>(config.data.dims[static_cast<std::size_t>(l)]);
                  kappa = std::min(kappa, nl / rl);
                  r_max = std::max(r_max, config.data.dims[static_cast<std::size_t>(l)]);
                }
                if (kappa > 1.0 && N >= 2) {
                  double aff_stat = 0.0;
                  for (int l = 0; l < data.truth.k; ++l) {
                    double closest = 1.0;
                    for (int m = 0; m < data.truth.k; ++m)
                      if (m != l) closest = std::min(closest, pre.affinity(l, m));
                    aff_stat = std::max(aff_stat, closest);
                  }
                  record.verdict_semirandom =
                      check_semirandom(kappa, r_max, data.truth.k, N, aff_stat, config.c_eps)
                              .satisfied
                          ? 1
                          : 0;
                  if (config.data.model == DataModel::FullyRandom)
                    record.verdict_fully_random =
                        check_fully_random(r_max, data.instance->Y.rows(), N, kappa, config.c_eps)
                                .satisfied
                            ? 1
                            : 0;
                }
              }
            }
          } catch (const Error& e) {
            record.error = e.what();
          }

          auto t1 = std::chrono::steady_clock::now();
          std::size_t slot = static_cast<std::size_t>(record.grid_index * R + replicate);
          output.wall_ms[slot] =
              std::chrono::duration<double, std::milli>(t1 - t0).count();
          output.records[slot] = std::move(record);
        }
      },
      workers);

  for (const ResultRecord& r : output.records)
    if (r.solver_failures > 0 || !r.error.empty()) output.any_failures = true;
  return output;
}

namespace detail {

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

//! Write results.csv (deterministic contents), timings.csv (wall time per
//! record, excluded from the deterministic surface), and run.json.
inline void write_run(const RunOutput& output, const ExperimentConfig& config,
                      const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);

  std::string results;
  {
    const auto& columns = detail::result_columns();
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) results += ',';
      results += columns[i];
    }
    results += '\n';
    for (const ResultRecord& r : output.records) {
      results += detail::result_row(r);
      results += '\n';
    }
  }
  detail::write_text_atomically(dir / "results.csv", results);

  std::string timings = "grid_index,replicate,milliseconds\n";
  for (std::size_t i = 0; i < output.records.size(); ++i) {
    timings += std::to_string(output.records[i].grid_index);
    timings += ',';
    timings += std::to_string(output.records[i].replicate);
    timings += ',';
    timings += detail::format_double(output.wall_ms[i]);
    timings += '\n';
  }
  detail::write_text_atomically(dir / "timings.csv", timings);

  nlohmann::json meta;
  meta["config"] = config_to_json(config);
  meta["version"] = kLibraryVersion;
  meta["rng"] = nlohmann::json{{"name", "splitmix64"},
                               {"gamma", "0x9E3779B97F4A7C15"},
                               {"splitting", "derive(seed, path) chains the finalizer over path"}};
  meta["results_schema"] = detail::result_columns();
  detail::write_text_atomically(dir / "run.json", meta.dump(2) + "\n");
}

//! Aggregated phase-diagram matrices: rows follow the lambda grid order,
//! columns follow the p grid order; entries are means over replicates.
struct PhaseMatrices {
  std::vector<double> lambdas;
  std::vector<Eigen::Index> ps;
  Matrix rel_violation;
  Matrix clustering_error;
  Matrix trivial_columns;
};

inline PhaseMatrices phase_diagram(const ExperimentConfig& config, int threads = 0,
                                   const std::string& out_dir = "", RunOutput* output_out = nullptr) {
  config.validate();
  if (!config.project || config.p_grid.size() < 2 || config.lambda_grid.size() < 2)
    throw BadParameter("phase_diagram: need a projector and at least a 2x2 (p, lambda) grid");

  RunOutput output = run_pipeline(config, threads);

  const long P = static_cast<long>(config.p_grid.size());
  const long L = static_cast<long>(config.lambda_grid.size());
  PhaseMatrices phase;
  phase.lambdas = config.lambda_grid;
  phase.ps = config.p_grid;
  phase.rel_violation = Matrix::Zero(L, P);
  phase.clustering_error = Matrix::Zero(L, P);
  phase.trivial_columns = Matrix::Zero(L, P);
  for (const ResultRecord& r : output.records) {
    phase.rel_violation(r.lambda_index, r.p_index) += r.rel_violation;
    phase.clustering_error(r.lambda_index, r.p_index) += r.clustering_error;
    phase.trivial_columns(r.lambda_index, r.p_index) += static_cast<double>(r.trivial_columns);
  }
  const double scale = 1.0 / static_cast<double>(config.replicates);
  phase.rel_violation *= scale;
  phase.clustering_error *= scale;
  phase.trivial_columns *= scale;

  if (!out_dir.empty()) {
    write_run(output, config, out_dir);
    std::filesystem::path dir(out_dir);
    auto dump = [&](const Matrix& M, const std::string& name) {
      std::string text = "lambda";
      for (Eigen::Index p : config.p_grid) text += ",p" + std::to_string(p);
      text += '\n';
      for (long l = 0; l < L; ++l) {
        text += detail::format_double(config.lambda_grid[static_cast<std::size_t>(l)]);
        for (long p = 0; p < P; ++p) {
          text += ',';
          text += detail::format_double(M(l, p));
        }
        text += '\n';
      }
      detail::write_text_atomically(dir / name, text);
    };
    dump(phase.rel_violation, "phase_rel_violation.csv");
    dump(phase.clustering_error, "phase_clustering_error.csv");
    dump(phase.trivial_columns, "phase_trivial_columns.csv");
  }
  if (output_out) *output_out = std::move(output);
  return phase;
}

}  // namespace sscdr
