#pragma once

#include <cstddef>
#include <vector>

#include "dual.hpp"
#include "linalg.hpp"

namespace spinrs {

// Small dense matrix over a generic scalar (cplx or Dual), used where the
// same formula must be differentiated.
template <class C>
struct GMat {
  std::size_t rows = 0, cols = 0;
  std::vector<C> a;

  GMat() = default;
  GMat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, C(0.0)) {}

  static GMat identity(std::size_t n) {
    GMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = C(1.0);
    return m;
  }

  C& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const C& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  GMat adjoint() const {
    GMat m(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) m(j, i) = num::conj((*this)(i, j));
    return m;
  }

  GMat col(std::size_t j) const {
    GMat m(rows, 1);
    for (std::size_t i = 0; i < rows; ++i) m(i, 0) = (*this)(i, j);
    return m;
  }

  friend GMat operator*(const GMat& x, const GMat& y) {
    GMat m(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t k = 0; k < x.cols; ++k) {
        const C& xik = x(i, k);
        for (std::size_t j = 0; j < y.cols; ++j) m(i, j) += xik * y(k, j);
      }
    return m;
  }
  friend GMat operator+(GMat x, const GMat& y) {
    for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += y.a[i];
    return x;
  }
  friend GMat operator-(GMat x, const GMat& y) {
    for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] -= y.a[i];
    return x;
  }
};

template <class C>
GMat<C> to_gmat(const CMat& m) {
  GMat<C> g(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) g(i, j) = C(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return g;
}

template <class C>
CMat to_cmat(const GMat<C>& g) {
  CMat m(static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = num::value(g(i, j));
  return m;
}

// Upper triangular b with positive diagonal and L = b b^dagger (no checks).
template <class C>
GMat<C> cholesky_upper_g(const GMat<C>& L) {
  const std::size_t n = L.rows;
  GMat<C> b(n, n);
  for (std::size_t jj = n; jj-- > 0;) {
    C piv = num::re(L(jj, jj));
    for (std::size_t k = jj + 1; k < n; ++k) piv -= num::abs2(b(jj, k));
    b(jj, jj) = num::sqrt(piv);
    for (std::size_t i = 0; i < jj; ++i) {
      C s = L(i, jj);
      for (std::size_t k = jj + 1; k < n; ++k) s -= b(i, k) * num::conj(b(jj, k));
      b(i, jj) = s / b(jj, jj);
    }
  }
  return b;
}

// Solve b x = y for upper triangular b.
template <class C>
GMat<C> upper_solve_g(const GMat<C>& b, const GMat<C>& y) {
  const std::size_t n = b.rows;
  GMat<C> x = y;
  for (std::size_t c = 0; c < y.cols; ++c)
    for (std::size_t i = n; i-- > 0;) {
      C s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= b(i, k) * x(k, c);
      x(i, c) = s / b(i, i);
    }
  return x;
}

}  // namespace spinrs
