#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sscdr/harness.hpp"

using namespace sscdr;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.has_model = true;
  config.data.d = 12;
  config.data.k = 2;
  config.data.dims = {2, 2};
  config.data.counts = {8, 8};
  config.data.seed = 0;  // overwritten by the harness derivation
  config.projector = ProjectorKind::Gaussian;
  config.p_grid = {6, 8};
  config.lambda_grid = {0.3, 0.15};
  config.replicates = 2;
  config.seed = 71;
  return config;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config json round trip is lossless", "[harness]") {
  ExperimentConfig config = small_config();
  config.privacy = PrivacyParams{};
  config.privacy->eps_priv = 2.0;
  config.geometry = GeometryLevel::Post;
  config.c_eps = 0.5;
  config.distortion_probes = 100;
  config.tol_kkt = 1e-9;
  config.max_iters = 5000;

  nlohmann::json j = config_to_json(config);
  ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.privacy->eps_priv == 2.0);
  CHECK(back.geometry == GeometryLevel::Post);
  CHECK(back.p_grid == config.p_grid);
  CHECK(back.lambda_grid == config.lambda_grid);

  ExperimentConfig rel = small_config();
  rel.lambda_relative = true;
  nlohmann::json jr = config_to_json(rel);
  CHECK(jr.at("lambda_mode") == "relative");
  CHECK(config_from_json(jr).lambda_relative);

  rel.project = false;
  nlohmann::json jn = config_to_json(rel);
  CHECK(jn.at("projector").at("kind") == "none");
  CHECK_FALSE(config_from_json(jn).project);
}

TEST_CASE("config defaults and validation", "[harness]") {
  nlohmann::json j;
  j["data"] = model_to_json(small_config().data);
  j["projector"] = {{"kind", "gaussian"}, {"p_grid", {4}}};
  j["lambda_grid"] = {0.2};
  ExperimentConfig config = config_from_json(j);
  CHECK(config.replicates == 1);
  CHECK(config.seed == 0);
  CHECK(config.geometry == GeometryLevel::None);
  CHECK(config.distortion_probes == 200);
  CHECK(config.tol_kkt == 1e-8);
  CHECK(config.max_iters == 10000);
  CHECK_FALSE(config.lambda_relative);
  CHECK_FALSE(config.fixed_instance);

  ExperimentConfig bad = small_config();
  bad.lambda_grid.clear();
  CHECK_THROWS_AS(bad.validate(), BadParameter);
  bad = small_config();
  bad.p_grid = {0};
  CHECK_THROWS_AS(bad.validate(), BadParameter);
  bad = small_config();
  bad.replicates = 0;
  CHECK_THROWS_AS(bad.validate(), BadParameter);
  bad = small_config();
  bad.lambda_relative = true;
  bad.geometry = GeometryLevel::Full;
  CHECK_THROWS_AS(bad.validate(), BadParameter);
  bad = small_config();
  bad.has_model = false;
  CHECK_THROWS_AS(bad.validate(), BadParameter);
}

TEST_CASE("pipeline produces the full record grid in order", "[harness]") {
  ExperimentConfig config = small_config();
  RunOutput output = run_pipeline(config, 1);
  REQUIRE(output.records.size() == 8);  // 2 p * 2 lambda * 2 replicates
  REQUIRE(output.wall_ms.size() == 8);
  for (std::size_t i = 0; i < output.records.size(); ++i) {
    const ResultRecord& r = output.records[i];
    CHECK(r.grid_index == static_cast<long>(i) / 2);
    CHECK(r.replicate == static_cast<long>(i) % 2);
    CHECK(r.p_index == r.grid_index / 2);
    CHECK(r.lambda_index == r.grid_index % 2);
    CHECK(r.lambda == config.lambda_grid[static_cast<std::size_t>(r.lambda_index)]);
    CHECK(r.p == config.p_grid[static_cast<std::size_t>(r.p_index)]);
    CHECK(r.record_seed ==
          rng::derive(config.seed, {static_cast<std::uint64_t>(r.grid_index),
                                    static_cast<std::uint64_t>(r.replicate)}));
    CHECK(r.d == 12);
    CHECK(r.N == 16);
    CHECK(r.k == 2);
    CHECK(r.model == "fully_random");
    CHECK(r.noise == "none");
    CHECK(r.projector == "gaussian");
    CHECK(r.lambda_mode == "absolute");
    CHECK(std::isfinite(r.eps_measured));
    CHECK(r.error.empty());
    CHECK(r.verdict_noiseless == -1);  // no geometry requested
  }
}

TEST_CASE("pipeline records are identical across runs and thread counts", "[harness]") {
  ExperimentConfig config = small_config();
  RunOutput a = run_pipeline(config, 1);
  RunOutput b = run_pipeline(config, 1);
  RunOutput c = run_pipeline(config, 4);
  REQUIRE(a.records.size() == b.records.size());
  REQUIRE(a.records.size() == c.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(detail::result_row(a.records[i]) == detail::result_row(b.records[i]));
    CHECK(detail::result_row(a.records[i]) == detail::result_row(c.records[i]));
  }
}

TEST_CASE("fixed instance reuses the data across replicates", "[harness]") {
  ExperimentConfig config = small_config();
  config.fixed_instance = true;
  detail::LoadedData r0 = detail::obtain_data(config, 0);
  detail::LoadedData r1 = detail::obtain_data(config, 1);
  CHECK((r0.X - r1.X).cwiseAbs().maxCoeff() == 0.0);

  config.fixed_instance = false;
  detail::LoadedData s0 = detail::obtain_data(config, 0);
  detail::LoadedData s1 = detail::obtain_data(config, 1);
  CHECK((s0.X - s1.X).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pipeline without projector keeps the ambient data", "[harness]") {
  ExperimentConfig config = small_config();
  config.project = false;
  config.p_grid.clear();
  config.replicates = 1;
  RunOutput output = run_pipeline(config, 1);
  REQUIRE(output.records.size() == 2);
  for (const ResultRecord& r : output.records) {
    CHECK(r.projector == "none");
    CHECK(r.p == 12);
    CHECK(r.eps_measured == 0.0);
  }
}

TEST_CASE("pipeline on a separable instance recovers the clusters", "[harness]") {
  // orthogonal 2-dim subspaces: coordinates {0,1} and {2,3}
  Matrix U = Matrix::Identity(8, 2);
  Matrix V = Matrix::Zero(8, 2);
  V(2, 0) = 1.0;
  V(3, 1) = 1.0;
  ExperimentConfig config;
  config.has_model = true;
  config.data.d = 8;
  config.data.k = 2;
  config.data.dims = {2, 2};
  config.data.counts = {9, 9};
  config.data.model = DataModel::SemiRandom;
  config.data.given_bases = {U, V};
  config.project = false;
  config.lambda_grid = {0.2};
  config.seed = 3;
  config.geometry = GeometryLevel::Full;
  RunOutput output = run_pipeline(config, 1);
  REQUIRE(output.records.size() == 1);
  const ResultRecord& r = output.records[0];
  CHECK(r.error.empty());
  CHECK(r.solver_failures == 0);
  CHECK(r.clustering_error == 0.0);
  CHECK(r.rel_violation < 1e-10);
  CHECK(r.sep);
  REQUIRE(r.mu_pre.size() == 2);
  REQUIRE(r.rho_pre.size() == 2);
  CHECK(r.mu_pre[0] < 1e-8);
  CHECK(r.rho_min_pre > 0.0);
  CHECK(std::isfinite(r.margin_pre));
  CHECK(r.margin_post == r.margin_pre);  // no projector: post equals pre
  CHECK(r.verdict_noiseless != -1);
  CHECK(r.binding_noiseless != "na");
  CHECK(r.verdict_semirandom != -1);
  CHECK(r.verdict_fully_random == -1);  // semi-random model
}

TEST_CASE("relative lambda at alpha above one zeroes every column", "[harness]") {
  ExperimentConfig config = small_config();
  config.lambda_relative = true;
  config.lambda_grid = {1.01};
  config.replicates = 1;
  config.p_grid = {8};
  RunOutput output = run_pipeline(config, 1);
  REQUIRE(output.records.size() == 1);
  const ResultRecord& r = output.records[0];
  CHECK(r.lambda_mode == "relative");
  CHECK(r.trivial_columns == 16);
  CHECK(r.rel_violation == 0.0);
  CHECK_FALSE(r.sdp);
  CHECK(r.sep);
  CHECK(r.isolated_vertices == 16);
  CHECK(r.degenerate_graph);
}

TEST_CASE("privacy release is recorded in the results", "[harness]") {
  ExperimentConfig config = small_config();
  config.replicates = 1;
  config.p_grid = {8};
  config.privacy = PrivacyParams{};
  config.privacy->eps_priv = 5.0;
  config.privacy->delta_priv = 0.1;
  RunOutput output = run_pipeline(config, 1);
  for (const ResultRecord& r : output.records) {
    CHECK(r.privacy);
    CHECK(r.eps_priv == 5.0);
    CHECK(r.sigma_release == Catch::Approx(noise_scale(*config.privacy)).margin(1e-15));
    CHECK(r.error.empty());
  }
}

TEST_CASE("pipeline reads csv data and rejects mismatched labels", "[harness]") {
  TempDir dir("sscdr_harness_csv_test");
  rng::SplitMix64 gen(6);
  Matrix X(5, 8);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = gen.next_gaussian();
  save_csv(X, (dir.path / "data.csv").string());
  std::vector<int> raw = {0, 0, 0, 0, 1, 1, 1, 1};
  save_labels(Labels(raw, 2), (dir.path / "labels.csv").string());

  ExperimentConfig config;
  config.has_model = false;
  config.input_csv = (dir.path / "data.csv").string();
  config.input_labels = (dir.path / "labels.csv").string();
  config.project = false;
  config.lambda_grid = {0.3};
  RunOutput output = run_pipeline(config, 1);
  REQUIRE(output.records.size() == 1);
  CHECK(output.records[0].model == "file");
  CHECK(output.records[0].noise == "unknown");
  CHECK(output.records[0].N == 8);

  std::vector<int> short_raw = {0, 0, 1, 1};
  save_labels(Labels(short_raw, 2), (dir.path / "short.csv").string());
  config.input_labels = (dir.path / "short.csv").string();
  CHECK_THROWS_AS(run_pipeline(config, 1), BadDimensions);
}

TEST_CASE("write_run emits deterministic results and full metadata", "[harness]") {
  TempDir dir("sscdr_harness_write_test");
  ExperimentConfig config = small_config();
  RunOutput a = run_pipeline(config, 1);
  RunOutput b = run_pipeline(config, 4);
  write_run(a, config, (dir.path / "a").string());
  write_run(b, config, (dir.path / "b").string());

  std::string results_a = slurp(dir.path / "a" / "results.csv");
  std::string results_b = slurp(dir.path / "b" / "results.csv");
  CHECK(results_a == results_b);

  // header row matches the published schema
  std::string header = results_a.substr(0, results_a.find('\n'));
  std::string expected;
  for (const std::string& c : detail::result_columns()) {
    if (!expected.empty()) expected += ',';
    expected += c;
  }
  CHECK(header == expected);
  CHECK(std::count(results_a.begin(), results_a.end(), '\n') == 9);  // header + 8 records

  nlohmann::json meta = nlohmann::json::parse(slurp(dir.path / "a" / "run.json"));
  CHECK(meta.at("version").get<std::string>() == kLibraryVersion);
  CHECK(meta.at("rng").at("name") == "splitmix64");
  CHECK(meta.at("results_schema").get<std::vector<std::string>>() == detail::result_columns());
  ExperimentConfig back = config_from_json(meta.at("config"));
  CHECK(config_to_json(back) == config_to_json(config));

  std::string timings = slurp(dir.path / "a" / "timings.csv");
  CHECK(std::count(timings.begin(), timings.end(), '\n') == 9);
  CHECK(timings.rfind("grid_index,replicate,milliseconds\n", 0) == 0);
}

TEST_CASE("phase diagram aggregates replicate means", "[harness]") {
  TempDir dir("sscdr_harness_phase_test");
  ExperimentConfig config = small_config();
  RunOutput output;
  PhaseMatrices phase = phase_diagram(config, 2, (dir.path / "out").string(), &output);
  REQUIRE(phase.rel_violation.rows() == 2);
  REQUIRE(phase.rel_violation.cols() == 2);
  CHECK(phase.lambdas == config.lambda_grid);
  CHECK(phase.ps == config.p_grid);

  for (long p = 0; p < 2; ++p)
    for (long l = 0; l < 2; ++l) {
      double sum_rv = 0.0, sum_ce = 0.0, sum_tc = 0.0;
      long n = 0;
      for (const ResultRecord& r : output.records)
        if (r.p_index == p && r.lambda_index == l) {
          sum_rv += r.rel_violation;
          sum_ce += r.clustering_error;
          sum_tc += static_cast<double>(r.trivial_columns);
          ++n;
        }
      REQUIRE(n == 2);
      CHECK(phase.rel_violation(l, p) == Catch::Approx(sum_rv / 2.0).margin(1e-15));
      CHECK(phase.clustering_error(l, p) == Catch::Approx(sum_ce / 2.0).margin(1e-15));
      CHECK(phase.trivial_columns(l, p) == Catch::Approx(sum_tc / 2.0).margin(1e-15));
    }

  std::string grid = slurp(dir.path / "out" / "phase_rel_violation.csv");
  CHECK(grid.rfind("lambda,p6,p8\n", 0) == 0);
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 3);
  CHECK(std::filesystem::exists(dir.path / "out" / "results.csv"));
  CHECK(std::filesystem::exists(dir.path / "out" / "phase_clustering_error.csv"));
  CHECK(std::filesystem::exists(dir.path / "out" / "phase_trivial_columns.csv"));

  ExperimentConfig flat = small_config();
  flat.p_grid = {8};
  CHECK_THROWS_AS(phase_diagram(flat, 1), BadParameter);
  ExperimentConfig ambient = small_config();
  ambient.project = false;
  CHECK_THROWS_AS(phase_diagram(ambient, 1), BadParameter);
}

TEST_CASE("csv field helpers format optional values", "[harness]") {
  CHECK(detail::csv_double(std::numeric_limits<double>::quiet_NaN()) == "na");
  CHECK(detail::csv_double(0.5) == detail::format_double(0.5));
  CHECK(detail::csv_list({}) == "na");
  CHECK(detail::csv_list({0.5, 0.25}) ==
        detail::format_double(0.5) + "|" + detail::format_double(0.25));
  CHECK(detail::csv_verdict(-1) == "na");
  CHECK(detail::csv_verdict(0) == "0");
  CHECK(detail::csv_verdict(1) == "1");
  CHECK(detail::sanitize_field("a,b\nc") == "a;b;c");
  CHECK(geometry_level_from_name("full") == GeometryLevel::Full);
  CHECK_THROWS_AS(geometry_level_from_name("bogus"), BadParameter);
}
