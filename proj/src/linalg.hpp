#pragma once

#include <cstddef>
#include <vector>

namespace stpp {

// Small dense row-major matrix; sized for basis dimensions (tens, not thousands).
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Matrix identity(size_t n) {
    Matrix m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t i, size_t j) { return a_[i * cols_ + j]; }
  double operator()(size_t i, size_t j) const { return a_[i * cols_ + j]; }
  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

 private:
  size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// Cholesky factor A = L·Lᵀ of a symmetric matrix. Returns false when a pivot
// collapses (rank deficiency); bad_col then holds the offending column.
bool cholesky(const Matrix& a, Matrix& l, size_t* bad_col = nullptr);

// Solve L·Lᵀ x = b.
std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b);

// Inverse of A from its Cholesky factor.
Matrix cholesky_inverse(const Matrix& l);

double dot(const std::vector<double>& a, const std::vector<double>& b);

// xᵀ A x for symmetric A.
double quad_form(const Matrix& a, const std::vector<double>& x);

}  // namespace stpp
