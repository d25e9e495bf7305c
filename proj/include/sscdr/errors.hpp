#pragma once

#include <stdexcept>
#include <string>

namespace sscdr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroColumn : Error {
  int index;
  explicit ZeroColumn(int i)
      : Error("column " + std::to_string(i) + " has near-zero norm"), index(i) {}
};

struct ParseError : Error {
  int row, col;
  ParseError(int r, int c, const std::string& token)
      : Error("cannot parse token '" + token + "' at row " + std::to_string(r) +
              ", column " + std::to_string(c)),
        row(r), col(c) {}
};

struct RaggedRows : Error {
  RaggedRows(int row, std::size_t got, std::size_t expected)
      : Error("row " + std::to_string(row) + " has " + std::to_string(got) +
              " fields, expected " + std::to_string(expected)) {}
};

struct BadDimensions : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct BadParameter : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  long iterations;
  double residual;
  NoConvergence(long iters, double res)
      : Error("no convergence after " + std::to_string(iters) +
              " iterations, residual " + std::to_string(res)),
        iterations(iters), residual(res) {}
};

struct Infeasible : Error {
  using Error::Error;
};

struct NotOrthonormal : Error {
  using Error::Error;
};

struct RankDeficient : Error {
  using Error::Error;
};

struct ProjectionDegenerate : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct ZeroVector : Error {
  using Error::Error;
};

}  // namespace sscdr
