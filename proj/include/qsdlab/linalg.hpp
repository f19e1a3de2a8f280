#pragma once

// Small dense linear algebra for the finite-chain oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace qsdlab {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw UsageError("matrix product: shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  // max row sum of |a_ij|
  double norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (double v : row(i)) s += std::abs(v);
      m = std::max(m, s);
    }
    return m;
  }

  // max column sum of |a_ij|
  double norm_1() const {
    std::vector<double> s(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) s[j] += std::abs((*this)(i, j));
    return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// v^T A
inline std::vector<double> left_multiply(std::span<const double> v, const Matrix& a) {
  std::vector<double> out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += vi * r[j];
  }
  return out;
}

// A v
inline std::vector<double> right_multiply(const Matrix& a, std::span<const double> v) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * v[j];
    out[i] = s;
  }
  return out;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double sum(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// exp(A) by scaling and squaring of a truncated Taylor series.
inline Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw UsageError("expm: matrix must be square");
  const std::size_t n = a.rows();
  const double nrm = a.norm_inf();
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix b = a * std::ldexp(1.0, -squarings);
  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 30; ++k) {
    term = term * b;
    term *= 1.0 / k;
    result += term;
    if (term.norm_inf() < 1e-18 * result.norm_inf()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// Solves a x = b by LU with partial pivoting. Empty result when a pivot is exactly zero.
inline std::vector<double> lu_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw UsageError("lu_solve: dimension mismatch");
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    if (a(p, c) == 0.0) return {};
    if (p != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a(p, k), a(c, k));
      std::swap(b[p], b[c]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double acc = b[c];
    for (std::size_t k = c + 1; k < n; ++k) acc -= a(c, k) * b[k];
    b[c] = acc / a(c, c);
  }
  return b;
}

enum class Side { left, right };

// v^T exp(A t) (Side::left) or exp(A t) v (Side::right), by Taylor
// sub-steps of size tau with |A| tau <= 1. `after_substep` sees the vector
// after every sub-step and may rescale it in place.
template <class AfterSubstep>
std::vector<double> expm_action(const Matrix& a, std::vector<double> v, double t, Side side, AfterSubstep&& after_substep) {
  if (t < 0.0) throw DomainError("expm_action: negative time");
  if (t == 0.0) return v;
  const double nrm = std::max(a.norm_inf(), a.norm_1());
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(nrm * t)));
  const double tau = t / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> term = v;
    std::vector<double> acc = v;
    for (int k = 1; k <= 40; ++k) {
      term = side == Side::left ? left_multiply(term, a) : right_multiply(a, term);
      const double f = tau / k;
      double tn = 0.0, an = 0.0;
      for (std::size_t i = 0; i < term.size(); ++i) {
        term[i] *= f;
        acc[i] += term[i];
        tn += std::abs(term[i]);
        an += std::abs(acc[i]);
      }
      if (tn <= 1e-17 * an) break;
    }
    v = std::move(acc);
    after_substep(v);
  }
  return v;
}

inline std::vector<double> expm_action(const Matrix& a, std::vector<double> v, double t, Side side) {
  return expm_action(a, std::move(v), t, side, [](std::vector<double>&) {});
}

}  // namespace qsdlab
