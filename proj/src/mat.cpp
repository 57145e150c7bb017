#include "mat.hpp"

namespace altlab {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}
}  // namespace

// Broadcast-accumulate loop order (i, p, j): streams rows of B and lets the
// compiler vectorize the inner axpy. Much faster than the dot-product order
// for the sizes used here.
void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.cols) c = Matrix(a.rows, b.cols);
  else c.zero();
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int p = 0; p < a.cols; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_at(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows == b.rows, "matmul_at: leading dimensions differ");
  if (c.rows != a.cols || c.cols != b.cols) c = Matrix(a.cols, b.cols);
  else c.zero();
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (int p = 0; p < a.cols; ++p) {
      const double av = arow[p];
      double* crow = c.row(p);
      for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace altlab
