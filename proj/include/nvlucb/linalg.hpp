#pragma once

// Dense linear algebra for the bandit heads: row-major matrices, rank-1
// inverse maintenance and the Mahalanobis norm. Dimensions here are small
// (feature widths in the tens to low hundreds) so everything is plain loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nvlucb {

/// Raised when a caller breaks a documented precondition (bad dimensions,
/// non-finite input, indefinite quadratic form).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ContractViolation("Matrix: entry count " + std::to_string(data_.size()) +
                              " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n, double diag = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = diag;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> xs) noexcept {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("multiply: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto br = b.row(k);
      auto cr = c.row(i);
      for (std::size_t j = 0; j < br.size(); ++j) cr[j] += aik * br[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("max_abs_diff: dimension mismatch");
  double m = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

/// xᵀ A x. No symmetry or definiteness is assumed.
inline double quadratic_form(std::span<const double> x, const Matrix& a) {
  if (!a.square() || a.rows() != x.size())
    throw ContractViolation("quadratic_form: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    auto r = a.row(i);
    double ri = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) ri += r[j] * x[j];
    s += x[i] * ri;
  }
  return s;
}

/// Replace `a_inv` (= A⁻¹) by (A + c·u·uᵀ)⁻¹ in O(d²), then symmetrize.
inline void sherman_morrison_update_inplace(Matrix& a_inv, std::span<const double> u, double c) {
  const std::size_t d = u.size();
  if (!a_inv.square() || a_inv.rows() != d)
    throw ContractViolation("sherman_morrison_update: dimension mismatch");
  if (!(c >= 0.0) || !std::isfinite(c))
    throw ContractViolation("sherman_morrison_update: weight must be finite and >= 0");
  if (!all_finite(u) || !all_finite(a_inv.data()))
    throw ContractViolation("sherman_morrison_update: non-finite input");
  if (c == 0.0) return;

  const Vector w = matvec(a_inv, u);
  const double denom = 1.0 + c * dot(u, w);
  if (!(denom > 0.0))
    throw ContractViolation("sherman_morrison_update: a_inv is not positive definite");
  const double k = c / denom;
  for (std::size_t i = 0; i < d; ++i) {
    const double kwi = k * w[i];
    auto r = a_inv.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] -= kwi * w[j];
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (a_inv(i, j) + a_inv(j, i));
      a_inv(i, j) = avg;
      a_inv(j, i) = avg;
    }
  }
}

inline Matrix sherman_morrison_update(Matrix a_inv, std::span<const double> u, double c) {
  sherman_morrison_update_inplace(a_inv, u, c);
  return a_inv;
}

/// √(xᵀ A⁻¹ x). Round-off negatives down to -1e-12 are clamped to zero.
inline double mahalanobis_norm(std::span<const double> x, const Matrix& a_inv) {
  const double q = quadratic_form(x, a_inv);
  if (q < -1e-12) throw ContractViolation("mahalanobis_norm: negative quadratic form");
  return std::sqrt(std::max(q, 0.0));
}

/// Gauss-Jordan inversion with partial pivoting. Used to cross-check the
/// rank-1 path, never on the hot loop.
inline Matrix direct_inverse(const Matrix& a) {
  if (!a.square()) throw ContractViolation("direct_inverse: matrix is not square");
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    if (!(std::abs(work(pivot, col)) > 1e-12))
      throw SingularMatrixError("direct_inverse: singular matrix at column " + std::to_string(col));
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(pivot, j), work(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const double p = work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) /= p;
      inv(col, j) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

}  // namespace nvlucb
