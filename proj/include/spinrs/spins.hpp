#pragma once

#include <cmath>
#include <vector>

#include "dual.hpp"
#include "errors.hpp"
#include "gmat.hpp"
#include "linalg.hpp"
#include "poisson.hpp"

// Zakrzewski's U(n)-covariant Poisson structure on C^n and its companions.
// Real coordinates on C^n are ordered (Re w_1, Im w_1, Re w_2, Im w_2, ...).
// A SpinBlock is an n x d matrix whose columns are the spins w^1..w^d.

namespace spinrs {

// Projections for gl(n) = u(n) + b(n), b(n) upper triangular with real diagonal.
inline CMat b_part(const CMat& X) {
  const Eigen::Index n = X.rows();
  CMat B = CMat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    B(i, i) = X(i, i).real();
    for (Eigen::Index j = i + 1; j < n; ++j) B(i, j) = X(i, j) + std::conj(X(j, i));
  }
  return B;
}

inline CMat u_part(const CMat& X) { return X - b_part(X); }

// G_j = 1 + sum_{k>=j} |w_k|^2 for j = 0..n (G_n = 1).
inline RVec G_vector(const CVec& w) {
  const Eigen::Index n = w.size();
  RVec G(n + 1);
  G(n) = 1.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) G(j) = G(j + 1) + std::norm(w(j));
  return G;
}

// Formal coordinates (w_1..w_n, conj w_1..conj w_n).
struct ZakSystem {
  std::size_t n;
  double sign_two = 2.0;  // the constant term of {w_i, conj w_i}; -2 gives the ball variant

  std::size_t size() const { return 2 * n; }
  std::size_t partner(std::size_t a) const { return a < n ? a + n : a - n; }

  template <class C>
  std::vector<C> tensor(const std::vector<C>& x) const {
    const std::size_t N = size();
    std::vector<C> P(N * N, C(0.0));
    const C I(cplx(0.0, 1.0));
    C norm2(0.0);
    std::vector<C> mod2(n);
    for (std::size_t r = 0; r < n; ++r) {
      mod2[r] = x[r] * x[r + n];
      norm2 += mod2[r];
    }
    // the ball variant flips the sign of the constant and keeps |z|^2 with +
    const C lead = sign_two > 0 ? C(2.0) + norm2 : norm2 - C(2.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l) {
        const long s = static_cast<long>(i) - static_cast<long>(l);
        C ww = I * sgn(s) * x[i] * x[l];
        C wbwb = -I * sgn(s) * x[i + n] * x[l + n];
        C wwb = I * x[i] * x[l + n];
        if (i == l) {
          C acc = lead;
          for (std::size_t r = 0; r < n; ++r) acc += sgn(static_cast<long>(r) - static_cast<long>(i)) * mod2[r];
          wwb += I * acc;
        }
        P[i * N + l] = ww;
        P[(i + n) * N + (l + n)] = wbwb;
        P[i * N + (l + n)] = wwb;
        P[(l + n) * N + i] = -wwb;
      }
    return P;
  }
};

inline std::vector<cplx> zak_coords(const CVec& w) {
  std::vector<cplx> x(static_cast<std::size_t>(2 * w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    x[static_cast<std::size_t>(i)] = w(i);
    x[static_cast<std::size_t>(i + w.size())] = std::conj(w(i));
  }
  return x;
}

inline RMat zak_tensor(const CVec& w) {
  return real_tensor(ZakSystem{static_cast<std::size_t>(w.size())}, zak_coords(w));
}

// Real gradient (interleaved coordinates) of a function with complex
// gradient eta, i.e. dH(V) = Im(eta^dagger V).
inline RVec real_gradient(const CVec& eta) {
  RVec g(2 * eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    g(2 * k) = -eta(k).imag();
    g(2 * k + 1) = eta(k).real();
  }
  return g;
}

inline CVec complex_from_real(const RVec& v) {
  CVec z(v.size() / 2);
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = cplx(v(2 * k), v(2 * k + 1));
  return z;
}

inline CVec ham_vec_field(const CVec& w, const CVec& eta) {
  CMat weta = w * eta.adjoint();
  cplx s = eta.dot(w) + w.dot(eta);  // eta^dagger w + w^dagger eta
  return u_part(weta) * w - eta - 0.5 * s * w;
}

// {F, H}(w) for real F, H with gradients xi, eta.
inline double pb1(const CVec& w, const CVec& xi, const CVec& eta) {
  CMat weta = w * eta.adjoint();
  cplx v = xi.dot(u_part(weta) * w) - 0.5 * xi.dot(w) * eta.dot(w) - 0.5 * xi.dot(w) * w.dot(eta) - xi.dot(eta);
  return v.imag();
}

template <class C>
GMat<C> moment_b_g(const std::vector<C>& w) {
  const std::size_t n = w.size();
  std::vector<C> G(n + 1, C(1.0));
  for (std::size_t j = n; j-- > 0;) G[j] = G[j + 1] + num::abs2(w[j]);
  GMat<C> b(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    b(j, j) = num::sqrt(G[j] / G[j + 1]);
    C den = num::sqrt(G[j] * G[j + 1]);
    for (std::size_t i = 0; i < j; ++i) b(i, j) = w[i] * num::conj(w[j]) / den;
  }
  return b;
}

inline CMat moment_b(const CVec& w) {
  std::vector<cplx> v(w.data(), w.data() + w.size());
  return to_cmat(moment_b_g(v));
}

// Matrix of the symplectic form in interleaved real coordinates, so that
// Omega(X, Y) = X^T Omega Y.
inline RMat symplectic_form(const CVec& w) {
  const Eigen::Index n = w.size();
  RVec G = G_vector(w);
  RMat Om = RMat::Zero(2 * n, 2 * n);
  auto wedge = [&](const RVec& a, const RVec& b, double c) { Om += c * (a * b.transpose() - b * a.transpose()); };
  for (Eigen::Index k = 0; k < n; ++k) {
    RVec ex = RVec::Unit(2 * n, 2 * k), ey = RVec::Unit(2 * n, 2 * k + 1);
    // (i/2) dw ^ dwbar = dx ^ dy
    wedge(ex, ey, 1.0 / G(k));
  }
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    RVec dG = RVec::Zero(2 * n);
    for (Eigen::Index m = k + 1; m < n; ++m) {
      dG(2 * m) = 2.0 * w(m).real();
      dG(2 * m + 1) = 2.0 * w(m).imag();
    }
    // wbar dw - w dwbar = 2i (x dy - y dx)
    RVec th = RVec::Zero(2 * n);
    th(2 * k) = -w(k).imag();
    th(2 * k + 1) = w(k).real();
    wedge(dG, th, -0.5 / (G(k) * G(k + 1)));
  }
  return Om;
}

// phi_j = (1/2) sum_alpha log(G_j(w^alpha)/G_{j+1}(w^alpha)).
inline RVec torus_phi(const CMat& W) {
  const Eigen::Index n = W.rows();
  RVec phi = RVec::Zero(n);
  for (Eigen::Index a = 0; a < W.cols(); ++a) {
    RVec G = G_vector(W.col(a));
    for (Eigen::Index j = 0; j < n; ++j) phi(j) += 0.5 * std::log1p(std::norm(W(j, a)) / G(j + 1));
  }
  return phi;
}

struct MinusVariant {
  RMat tensor;
  CMat b_minus;
};

inline MinusVariant minus_variant(const CVec& z) {
  if (!(z.squaredNorm() < 1.0 - 1e-10)) throw DomainError("minus_variant: point outside the open unit ball");
  const Eigen::Index n = z.size();
  MinusVariant out;
  out.tensor = real_tensor(ZakSystem{static_cast<std::size_t>(n), -2.0}, zak_coords(z));
  out.b_minus = cholesky_upper(CMat::Identity(n, n) - z * z.adjoint());
  return out;
}

// {F_xi(. w), F_eta(. w)}_U at g for F_xi(w) = Im(xi^dagger w).
inline double u_bracket_linear(const CMat& g, const CVec& w, const CVec& xi, const CVec& eta) {
  CMat D1p = b_part(w * xi.adjoint() * g);
  CMat D2 = b_part(g * w * eta.adjoint());
  return -(D1p * g.adjoint() * D2 * g).trace().imag();
}

}  // namespace spinrs
