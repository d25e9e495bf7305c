#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "sscdr/core.hpp"
#include "sscdr/rng.hpp"

using namespace sscdr;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

}  // namespace

TEST_CASE("normalize_columns scales a 3-4-5 column", "[core]") {
  Matrix X(3, 1);
  X << 3, 4, 0;
  NormalizedDataMatrix out = normalize_columns(X);
  CHECK(out.values(0, 0) == Catch::Approx(0.6).margin(1e-15));
  CHECK(out.values(1, 0) == Catch::Approx(0.8).margin(1e-15));
  CHECK(out.values(2, 0) == 0.0);
  CHECK(out.original_norms[0] == Catch::Approx(5.0).margin(1e-15));
}

TEST_CASE("normalize_columns keeps unit columns and is idempotent", "[core]") {
  rng::SplitMix64 gen(21);
  Matrix X(6, 9);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = gen.next_gaussian();
  NormalizedDataMatrix once = normalize_columns(X);
  for (Eigen::Index j = 0; j < once.values.cols(); ++j)
    CHECK(std::abs(once.values.col(j).norm() - 1.0) < 1e-9);
  NormalizedDataMatrix twice = normalize_columns(once.values);
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index j = 0; j < twice.values.cols(); ++j)
    CHECK(twice.original_norms[j] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("normalize_columns rejects zero columns", "[core]") {
  Matrix X = Matrix::Zero(4, 2);
  X(0, 0) = 1.0;
  CHECK_THROWS_AS(normalize_columns(X), ZeroColumn);
}

TEST_CASE("csv load parses a 2x2 literal", "[core]") {
  auto path = temp_file("sscdr_core_2x2.csv");
  write_file(path, "1,2\n3,4\n");
  Matrix X = load_csv(path.string());
  REQUIRE(X.rows() == 2);
  REQUIRE(X.cols() == 2);
  CHECK(X(0, 0) == 1.0);
  CHECK(X(0, 1) == 2.0);
  CHECK(X(1, 0) == 3.0);
  CHECK(X(1, 1) == 4.0);
}

TEST_CASE("csv round trip is exact", "[core]") {
  rng::SplitMix64 gen(31);
  Matrix X(10, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = gen.next_gaussian();
  auto path = temp_file("sscdr_core_roundtrip.csv");
  save_csv(X, path.string());
  Matrix Y = load_csv(path.string());
  REQUIRE(Y.rows() == X.rows());
  REQUIRE(Y.cols() == X.cols());
  CHECK((X - Y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("csv loader reports parse and shape errors", "[core]") {
  auto bad = temp_file("sscdr_core_bad.csv");
  write_file(bad, "1,2\n3,oops\n");
  try {
    load_csv(bad.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row == 2);
    CHECK(e.col == 2);
  }
  auto ragged = temp_file("sscdr_core_ragged.csv");
  write_file(ragged, "1,2\n3\n");
  CHECK_THROWS_AS(load_csv(ragged.string()), RaggedRows);
  auto header = temp_file("sscdr_core_header.csv");
  write_file(header, "a,b\n1,2\n");
  Matrix X = load_csv(header.string(), true);
  CHECK(X.rows() == 1);
  CHECK(X.cols() == 2);
}

TEST_CASE("labels validate and round trip", "[core]") {
  Labels labels({0, 1, 1, 2, 0}, 3);
  auto path = temp_file("sscdr_core_labels.txt");
  save_labels(labels, path.string());
  Labels back = load_labels(path.string());
  CHECK(back.k == 3);
  CHECK(back.assignments == labels.assignments);
  CHECK_THROWS_AS(Labels({0, 2}, 3), BadParameter);  // cluster 1 empty
  CHECK_THROWS_AS(Labels({0, 3}, 3), BadParameter);  // out of range
}

TEST_CASE("self representation rejects diagonal entries and round trips", "[core]") {
  SelfRepresentation C(4);
  C.set_column(0, {{1, 0.5}, {3, -2.0}});
  C.set_column(2, {{0, 1.25}});
  CHECK_THROWS_AS(C.set_column(1, {{1, 0.1}}), BadParameter);
  CHECK_THROWS_AS(C.set_column(1, {{0, 0.1}, {0, 0.2}}), BadParameter);
  CHECK_THROWS_AS(C.set_column(1, {{4, 0.1}}), BadDimensions);

  auto path = temp_file("sscdr_core_sparse.csv");
  save_sparse(C, path.string());
  SelfRepresentation back = load_sparse(path.string(), 4);
  CHECK((back.dense() - C.dense()).cwiseAbs().maxCoeff() == 0.0);

  Matrix dense = C.dense();
  CHECK(dense(1, 0) == 0.5);
  CHECK(dense(3, 0) == -2.0);
  CHECK(dense(0, 2) == 1.25);
  CHECK(dense.diagonal().cwiseAbs().maxCoeff() == 0.0);
}
