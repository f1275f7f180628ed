// SPDX-License-Identifier: MIT
#pragma once

/// \file linalg.hpp
/// \brief Dense exact linear algebra: matrices over an arbitrary element
///        type, Gaussian elimination over the scalar fields (rank, kernel,
///        solve), and Smith normal form over the integers.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfk/poly.hpp"
#include "mfk/scalar.hpp"

namespace mfk {

inline bool element_is_zero(const Rational& v) { return v == 0; }
inline bool element_is_zero(const GaussianRational& v) { return v.is_zero(); }
inline bool element_is_zero(const Integer& v) { return v == 0; }
template <class K>
bool element_is_zero(const Poly<K>& p) {
  return p.is_zero();
}

/// Row-major dense matrix over any element type with ring operations.
template <class T>
class DenseMatrix {
 public:
  DenseMatrix() : rows_(0), cols_(0) {}
  DenseMatrix(size_t rows, size_t cols, const T& fill)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static DenseMatrix identity(size_t n, const T& zero, const T& one) {
    DenseMatrix m(n, n, zero);
    for (size_t i = 0; i < n; ++i) m.at(i, i) = one;
    return m;
  }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }

  T& at(size_t i, size_t j) { return a_[i * cols_ + j]; }
  const T& at(size_t i, size_t j) const { return a_[i * cols_ + j]; }

  DenseMatrix operator-() const {
    DenseMatrix r = *this;
    for (auto& v : r.a_) v = -v;
    return r;
  }

  friend DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix r = a;
    for (size_t k = 0; k < r.a_.size(); ++k) r.a_[k] += b.a_[k];
    return r;
  }
  friend DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix r = a;
    for (size_t k = 0; k < r.a_.size(); ++k) r.a_[k] -= b.a_[k];
    return r;
  }

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.a_ == b.a_;
  }

  bool all_zero() const {
    for (const auto& v : a_)
      if (!element_is_zero(v)) return false;
    return true;
  }

  DenseMatrix transposed(const T& zero) const {
    DenseMatrix r(cols_, rows_, zero);
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = 0; j < cols_; ++j) r.at(j, i) = at(i, j);
    return r;
  }

 private:
  size_t rows_, cols_;
  std::vector<T> a_;
};

/// Matrix product with sparsity-aware inner loops.
template <class T>
DenseMatrix<T> mat_mul(const DenseMatrix<T>& a, const DenseMatrix<T>& b,
                       const T& zero) {
  DenseMatrix<T> r(a.rows(), b.cols(), zero);
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j) {
      const T& v = a.at(i, j);
      if (element_is_zero(v)) continue;
      for (size_t k = 0; k < b.cols(); ++k) {
        const T& w = b.at(j, k);
        if (element_is_zero(w)) continue;
        r.at(i, k) += v * w;
      }
    }
  return r;
}

/// Scales every entry.
template <class T, class S>
DenseMatrix<T> mat_scaled(const DenseMatrix<T>& a, const S& c) {
  DenseMatrix<T> r = a;
  for (size_t i = 0; i < r.rows(); ++i)
    for (size_t j = 0; j < r.cols(); ++j) r.at(i, j) = r.at(i, j) * c;
  return r;
}

/// Kronecker product with the left factor indexing blocks:
/// (i1*B.rows+i2, j1*B.cols+j2) = A(i1,j1) * B(i2,j2).
template <class T>
DenseMatrix<T> mat_kron(const DenseMatrix<T>& a, const DenseMatrix<T>& b,
                        const T& zero) {
  DenseMatrix<T> r(a.rows() * b.rows(), a.cols() * b.cols(), zero);
  for (size_t i1 = 0; i1 < a.rows(); ++i1)
    for (size_t j1 = 0; j1 < a.cols(); ++j1) {
      const T& v = a.at(i1, j1);
      if (element_is_zero(v)) continue;
      for (size_t i2 = 0; i2 < b.rows(); ++i2)
        for (size_t j2 = 0; j2 < b.cols(); ++j2) {
          const T& w = b.at(i2, j2);
          if (element_is_zero(w)) continue;
          r.at(i1 * b.rows() + i2, j1 * b.cols() + j2) = v * w;
        }
    }
  return r;
}

/// 2x2 block assembly [[a, b], [c, d]]; any block may be empty (0x0) only if
/// its whole band is empty.
template <class T>
DenseMatrix<T> mat_blocks2(const DenseMatrix<T>& a, const DenseMatrix<T>& b,
                           const DenseMatrix<T>& c, const DenseMatrix<T>& d,
                           const T& zero) {
  size_t r0 = a.rows() ? a.rows() : b.rows();
  size_t r1 = c.rows() ? c.rows() : d.rows();
  size_t c0 = a.cols() ? a.cols() : c.cols();
  size_t c1 = b.cols() ? b.cols() : d.cols();
  DenseMatrix<T> r(r0 + r1, c0 + c1, zero);
  auto put = [&](const DenseMatrix<T>& m, size_t di, size_t dj) {
    for (size_t i = 0; i < m.rows(); ++i)
      for (size_t j = 0; j < m.cols(); ++j) r.at(di + i, dj + j) = m.at(i, j);
  };
  if (a.rows()) put(a, 0, 0);
  if (b.rows()) put(b, 0, c0);
  if (c.rows()) put(c, r0, 0);
  if (d.rows()) put(d, r0, c0);
  return r;
}

// ---------------------------------------------------------------------------
// Exact Gaussian elimination over a scalar field
// ---------------------------------------------------------------------------

namespace detail {

// Pivot preference: units first keeps intermediate values small.
inline int pivot_weight(const Rational& v) {
  return (v == 1 || v == -1) ? 0 : 1;
}
inline int pivot_weight(const GaussianRational& v) {
  if (v.im == 0) return pivot_weight(v.re);
  if (v.re == 0) return pivot_weight(v.im);
  return 1;
}

}  // namespace detail

/// Reduces m to row echelon form in place; returns the pivot columns.
template <class K>
std::vector<size_t> row_echelon_inplace(DenseMatrix<K>& m) {
  std::vector<size_t> pivots;
  size_t row = 0;
  for (size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
    size_t best = size_t(-1);
    int best_w = 1 << 30;
    for (size_t i = row; i < m.rows(); ++i) {
      if (element_is_zero(m.at(i, col))) continue;
      int w = detail::pivot_weight(m.at(i, col));
      if (w < best_w) {
        best_w = w;
        best = i;
        if (w == 0) break;
      }
    }
    if (best == size_t(-1)) continue;
    if (best != row)
      for (size_t j = col; j < m.cols(); ++j)
        std::swap(m.at(best, j), m.at(row, j));
    K inv = scalar_traits<K>::one() / m.at(row, col);
    for (size_t j = col; j < m.cols(); ++j) m.at(row, j) = m.at(row, j) * inv;
    for (size_t i = 0; i < m.rows(); ++i) {
      if (i == row || element_is_zero(m.at(i, col))) continue;
      K factor = m.at(i, col);
      for (size_t j = col; j < m.cols(); ++j)
        m.at(i, j) = m.at(i, j) - factor * m.at(row, j);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

template <class K>
size_t rank_exact(DenseMatrix<K> m) {
  return row_echelon_inplace(m).size();
}

/// Basis of the right kernel {v : m v = 0}.
template <class K>
std::vector<std::vector<K>> kernel_basis(DenseMatrix<K> m) {
  std::vector<size_t> pivots = row_echelon_inplace(m);
  std::vector<bool> is_pivot(m.cols(), false);
  for (size_t c : pivots) is_pivot[c] = true;
  std::vector<std::vector<K>> basis;
  for (size_t free_col = 0; free_col < m.cols(); ++free_col) {
    if (is_pivot[free_col]) continue;
    std::vector<K> v(m.cols(), scalar_traits<K>::zero());
    v[free_col] = scalar_traits<K>::one();
    for (size_t r = 0; r < pivots.size(); ++r)
      v[pivots[r]] = -m.at(r, free_col);
    basis.push_back(std::move(v));
  }
  return basis;
}

/// One solution of m x = b, if any.
template <class K>
std::optional<std::vector<K>> solve_linear(const DenseMatrix<K>& m,
                                           const std::vector<K>& b) {
  DenseMatrix<K> aug(m.rows(), m.cols() + 1, scalar_traits<K>::zero());
  for (size_t i = 0; i < m.rows(); ++i) {
    for (size_t j = 0; j < m.cols(); ++j) aug.at(i, j) = m.at(i, j);
    aug.at(i, m.cols()) = b[i];
  }
  std::vector<size_t> pivots = row_echelon_inplace(aug);
  if (!pivots.empty() && pivots.back() == m.cols()) return std::nullopt;
  std::vector<K> x(m.cols(), scalar_traits<K>::zero());
  for (size_t r = 0; r < pivots.size(); ++r) x[pivots[r]] = aug.at(r, m.cols());
  return x;
}

// ---------------------------------------------------------------------------
// Graded slice problems
// ---------------------------------------------------------------------------

/// An exact linear-algebra problem assembled from one graded slice, with
/// human-readable labels (matrix unit x monomial) for every row and column.
template <class K>
struct GradedSolveProblem {
  DenseMatrix<K> matrix{0, 0, scalar_traits<K>::zero()};
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
};

template <class K>
struct GradedComponentResult {
  size_t rank = 0;
  std::vector<std::vector<K>> kernel;
};

template <class K>
GradedComponentResult<K> graded_component_rank(
    const GradedSolveProblem<K>& problem) {
  GradedComponentResult<K> r;
  DenseMatrix<K> m = problem.matrix;
  r.kernel = kernel_basis(m);
  r.rank = problem.matrix.cols() - r.kernel.size();
  return r;
}

// ---------------------------------------------------------------------------
// Smith normal form over the integers
// ---------------------------------------------------------------------------

struct SmithResult {
  /// Invariant factors d_1 | d_2 | ..., padded with zeros to min(rows, cols).
  std::vector<Integer> diag;
  /// Unimodular left transform: U * A * V = diag(d_i).
  DenseMatrix<Integer> U{0, 0, Integer(0)};
};

/// Classic Smith normal form by alternating row/column reduction.  Sizes
/// here are tiny (a handful of module classes), so no care is taken to
/// control entry growth.
inline SmithResult smith_normal_form(DenseMatrix<Integer> a) {
  using boost::multiprecision::abs;
  const size_t rows = a.rows(), cols = a.cols();
  SmithResult res;
  res.U = DenseMatrix<Integer>::identity(rows, Integer(0), Integer(1));
  size_t t = 0;
  const size_t lim = std::min(rows, cols);
  auto row_sub = [&](size_t dst, size_t src, const Integer& q) {
    for (size_t j = 0; j < cols; ++j) a.at(dst, j) -= q * a.at(src, j);
    for (size_t j = 0; j < rows; ++j) res.U.at(dst, j) -= q * res.U.at(src, j);
  };
  auto row_swap = [&](size_t r1, size_t r2) {
    for (size_t j = 0; j < cols; ++j) std::swap(a.at(r1, j), a.at(r2, j));
    for (size_t j = 0; j < rows; ++j) std::swap(res.U.at(r1, j), res.U.at(r2, j));
  };
  auto col_sub = [&](size_t dst, size_t src, const Integer& q) {
    for (size_t i = 0; i < rows; ++i) a.at(i, dst) -= q * a.at(i, src);
  };
  auto col_swap = [&](size_t c1, size_t c2) {
    for (size_t i = 0; i < rows; ++i) std::swap(a.at(i, c1), a.at(i, c2));
  };
  auto row_negate = [&](size_t r) {
    for (size_t j = 0; j < cols; ++j) a.at(r, j) = -a.at(r, j);
    for (size_t j = 0; j < rows; ++j) res.U.at(r, j) = -res.U.at(r, j);
  };
  for (; t < lim; ++t) {
    // Find the smallest nonzero entry in the remaining submatrix.
    size_t pi = size_t(-1), pj = size_t(-1);
    for (size_t i = t; i < rows; ++i)
      for (size_t j = t; j < cols; ++j) {
        if (a.at(i, j) == 0) continue;
        if (pi == size_t(-1) || abs(a.at(i, j)) < abs(a.at(pi, pj))) {
          pi = i;
          pj = j;
        }
      }
    if (pi == size_t(-1)) break;
    for (;;) {
      if (pi != t) row_swap(pi, t);
      if (pj != t) col_swap(pj, t);
      pi = pj = t;
      // Reduce column t below the pivot and row t right of the pivot.
      bool clean = true;
      for (size_t i = t + 1; i < rows; ++i) {
        if (a.at(i, t) == 0) continue;
        Integer q = a.at(i, t) / a.at(t, t);
        row_sub(i, t, q);
        if (a.at(i, t) != 0) {
          pi = i;
          pj = t;
          clean = false;
          break;
        }
      }
      if (!clean) continue;
      for (size_t j = t + 1; j < cols; ++j) {
        if (a.at(t, j) == 0) continue;
        Integer q = a.at(t, j) / a.at(t, t);
        col_sub(j, t, q);
        if (a.at(t, j) != 0) {
          pi = t;
          pj = j;
          clean = false;
          break;
        }
      }
      if (clean) break;
    }
    // Enforce divisibility d_t | (everything below-right).
    bool redo = false;
    for (size_t i = t + 1; i < rows && !redo; ++i)
      for (size_t j = t + 1; j < cols && !redo; ++j)
        if (a.at(i, j) % a.at(t, t) != 0) {
          row_sub(t, i, Integer(-1));  // add row i to row t
          redo = true;
        }
    if (redo) {
      --t;
      continue;
    }
    if (a.at(t, t) < 0) row_negate(t);
  }
  res.diag.assign(lim, Integer(0));
  for (size_t k = 0; k < t; ++k) res.diag[k] = a.at(k, k);
  return res;
}

}  // namespace mfk
