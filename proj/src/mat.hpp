#pragma once
#include <algorithm>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace altlab {

// Dense row-major matrix of doubles. This is a storage type with a few fixed
// kernels, not a linear-algebra DSL; accumulation order in the kernels is
// fixed so results are reproducible bit-for-bit on a given platform.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B with shapes (m x k) * (k x n).
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
// C = A^T * B with shapes (m x k) * (m x n) -> (k x n).
void matmul_at(const Matrix& a, const Matrix& b, Matrix& c);
Matrix transpose(const Matrix& a);

}  // namespace altlab
