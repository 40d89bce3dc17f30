#include "linalg.hpp"

#include <cmath>

#include "error.hpp"

namespace stpp {

bool cholesky(const Matrix& a, Matrix& l, size_t* bad_col) {
  const size_t n = a.rows();
  if (a.cols() != n) throw NumericError("cholesky: matrix not square");
  l = Matrix(n, n);
  double scale = 0.0;
  for (size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(a(i, i)));
  const double tol = scale > 0 ? scale * 1e-12 : 1e-300;
  for (size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) {
      if (bad_col) *bad_col = j;
      return false;
    }
    l(j, j) = std::sqrt(d);
    for (size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b) {
  const size_t n = l.rows();
  std::vector<double> y(n), x(n);
  for (size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (size_t ii = n; ii > 0; --ii) {
    size_t i = ii - 1;
    double s = y[i];
    for (size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

Matrix cholesky_inverse(const Matrix& l) {
  const size_t n = l.rows();
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    std::vector<double> col = cholesky_solve(l, e);
    for (size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  // Symmetrize against round-off.
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = inv(j, i) = v;
    }
  return inv;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double quad_form(const Matrix& a, const std::vector<double>& x) {
  double s = 0.0;
  for (size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (size_t j = 0; j < a.cols(); ++j) row += a(i, j) * x[j];
    s += x[i] * row;
  }
  return s;
}

}  // namespace stpp
