#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "dual.hpp"
#include "errors.hpp"

namespace spinrs {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

inline double max_abs(const CMat& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

// Angle representative in (-pi, pi].
inline double wrap_angle(double x) {
  double y = std::remainder(x, 2.0 * kPi);
  if (y <= -kPi) y += 2.0 * kPi;
  return y;
}

inline double condition_number(const CMat& K) {
  Eigen::JacobiSVD<CMat> svd(K);
  const auto& s = svd.singularValues();
  double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

inline CMat expm(const CMat& A) { return A.exp(); }

inline CMat upper_inverse(const CMat& b) {
  return b.triangularView<Eigen::Upper>().solve(CMat::Identity(b.rows(), b.cols()));
}

// Column Gram-Schmidt: K = Q R with Q unitary, R upper triangular with
// positive diagonal (modified variant, one reorthogonalization pass).
inline void gram_schmidt_qr(const CMat& K, CMat& Q, CMat& R) {
  const Eigen::Index n = K.rows();
  Q = K;
  R = CMat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i) {
        cplx c = Q.col(i).dot(Q.col(j));
        R(i, j) += c;
        Q.col(j) -= c * Q.col(i);
      }
    double nrm = Q.col(j).norm();
    R(j, j) = nrm;
    Q.col(j) /= nrm;
  }
}

struct Iwasawa {
  CMat b_L, g_R, g_L, b_R;
};

// K = b_L g_R^{-1} = g_L b_R^{-1} with b_L, b_R upper triangular with
// positive diagonal and g_L, g_R unitary.
inline Iwasawa iwasawa_decompose(const CMat& K, double cond_bound = 1e12) {
  if (K.rows() != K.cols() || K.rows() == 0) throw SingularMatrixError("iwasawa_decompose: square nonempty matrix required");
  if (!K.allFinite()) throw SingularMatrixError("iwasawa_decompose: non-finite entries");
  if (condition_number(K) > cond_bound) throw SingularMatrixError("iwasawa_decompose: condition estimate exceeds bound");
  const Eigen::Index n = K.rows();
  Iwasawa out;
  CMat Q, R;
  // K = g_L b_R^{-1}
  gram_schmidt_qr(K, Q, R);
  out.g_L = Q;
  out.b_R = upper_inverse(R);
  // K^dagger = g_R b_L^dagger: reverse the index order so that the lower
  // triangular factor becomes upper triangular.
  Eigen::PermutationMatrix<Eigen::Dynamic> J(n);
  for (Eigen::Index i = 0; i < n; ++i) J.indices()(i) = static_cast<int>(n - 1 - i);
  CMat Kt = K.adjoint() * J;
  gram_schmidt_qr(Kt, Q, R);
  out.g_R = Q * J;
  out.b_L = (J * R * J).adjoint();
  return out;
}

inline CMat reconstruct_K(const CMat& g_R, const CMat& b_R) {
  // b_L^{-1} g_L = g_R^{-1} b_R =: M; decomposing M = beta u gives g_L = u
  Iwasawa m = iwasawa_decompose(g_R.adjoint() * b_R);
  // M = b_L(M) g_R(M)^{-1}, so u = g_R(M)^{-1}
  return m.g_R.adjoint() * upper_inverse(b_R);
}

// L = b b^dagger with b in B(n).
inline CMat cholesky_upper(const CMat& L, double rel_tol = 1e-14) {
  const Eigen::Index n = L.rows();
  CMat b = CMat::Zero(n, n);
  double scale = std::max(1e-300, L.diagonal().real().cwiseAbs().maxCoeff());
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    double piv = L(j, j).real();
    for (Eigen::Index k = j + 1; k < n; ++k) piv -= std::norm(b(j, k));
    if (!(piv > rel_tol * scale)) throw NotPositiveDefiniteError("cholesky_upper: non-positive pivot");
    b(j, j) = std::sqrt(piv);
    for (Eigen::Index i = 0; i < j; ++i) {
      cplx s = L(i, j);
      for (Eigen::Index k = j + 1; k < n; ++k) s -= b(i, k) * std::conj(b(j, k));
      b(i, j) = s / b(j, j).real();
    }
  }
  return b;
}

// Multiply each column by a phase so that its largest-modulus entry (lowest
// row index on ties) is real positive.
inline void fix_column_phases(CMat& U) {
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    Eigen::Index best = 0;
    double m = -1.0;
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
      double a = std::abs(U(r, c));
      if (a > m * (1.0 + 1e-12)) {
        m = a;
        best = r;
      }
    }
    if (m > 0.0) U.col(c) *= std::conj(U(best, c)) / m;
    U(best, c) = cplx(std::abs(U(best, c)), 0.0);
  }
}

struct HermitianEigen {
  RVec values;  // descending
  CMat U;
};

inline HermitianEigen eig_hermitian(const CMat& A) {
  double scale = std::max(1.0, max_abs(A));
  if (max_abs(A - A.adjoint()) > 1e-10 * scale) throw NotHermitianError("eig_hermitian: input not Hermitian");
  CMat H = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(H);
  const Eigen::Index n = A.rows();
  HermitianEigen out;
  out.values = es.eigenvalues().reverse();
  out.U = es.eigenvectors().rowwise().reverse();
  (void)n;
  fix_column_phases(out.U);
  return out;
}

struct UnitaryFrame {
  RVec theta;  // continuous eigenvalue phases
  CMat V;      // g = V diag(exp(i theta)) V^dagger
};

inline double min_angular_gap(const RVec& theta) {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    for (Eigen::Index j = i + 1; j < theta.size(); ++j) gap = std::min(gap, std::abs(wrap_angle(theta(i) - theta(j))));
  return gap;
}

// Raw eigen-decomposition of a unitary matrix through its complex Schur form
// (for normal matrices the Schur vectors are eigenvectors).
inline UnitaryFrame unitary_eigen_raw(const CMat& g) {
  Eigen::ComplexSchur<CMat> schur(g);
  UnitaryFrame f;
  f.V = schur.matrixU();
  const CMat& T = schur.matrixT();
  f.theta.resize(g.rows());
  for (Eigen::Index j = 0; j < g.rows(); ++j) f.theta(j) = std::arg(T(j, j));
  return f;
}

// Initial frame: phases in (-pi, pi] sorted descending, eig_hermitian column
// phase convention.
inline UnitaryFrame unitary_frame(const CMat& g, double margin = 1e-8) {
  UnitaryFrame raw = unitary_eigen_raw(g);
  const Eigen::Index n = g.rows();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return raw.theta(a) > raw.theta(b); });
  UnitaryFrame f;
  f.theta.resize(n);
  f.V.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    f.theta(k) = raw.theta(idx[static_cast<std::size_t>(k)]);
    f.V.col(k) = raw.V.col(idx[static_cast<std::size_t>(k)]);
  }
  fix_column_phases(f.V);
  if (min_angular_gap(f.theta) < margin) throw EigenCollisionError("unitary eigenvalues closer than the regularity margin");
  return f;
}

// Continue a frame from g_prev to g: order by maximal overlap, phases by
// making the overlap with the previous eigenvector real positive, angles
// unwrapped.
inline UnitaryFrame continue_frame(const UnitaryFrame& prev, const CMat& g_prev, const CMat& g, double margin = 1e-8) {
  if (max_abs(g - g_prev) >= 0.1) throw StepTooLargeError("eig_unitary_smooth: consecutive path points differ by >= 0.1");
  UnitaryFrame raw = unitary_eigen_raw(g);
  const Eigen::Index n = g.rows();
  if (min_angular_gap(raw.theta) < margin) throw EigenCollisionError("unitary eigenvalues closer than the regularity margin");
  RMat overlap = (prev.V.adjoint() * raw.V).cwiseAbs();
  UnitaryFrame f;
  f.theta.resize(n);
  f.V.resize(n, n);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = -1;
    double m = -1.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (!used[static_cast<std::size_t>(k)] && overlap(j, k) > m) {
        m = overlap(j, k);
        best = k;
      }
    used[static_cast<std::size_t>(best)] = true;
    if (m < 0.5) throw StepTooLargeError("eig_unitary_smooth: eigenframe overlap lost between steps");
    CVec v = raw.V.col(best);
    cplx o = prev.V.col(j).dot(v);
    v *= std::conj(o) / std::abs(o);
    f.V.col(j) = v;
    f.theta(j) = prev.theta(j) + wrap_angle(raw.theta(best) - prev.theta(j));
  }
  return f;
}

inline std::vector<UnitaryFrame> eig_unitary_smooth(const std::vector<CMat>& path, std::optional<UnitaryFrame> prev = std::nullopt,
                                                    std::optional<CMat> g_prev = std::nullopt, double margin = 1e-8) {
  std::vector<UnitaryFrame> out;
  out.reserve(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (k == 0 && !prev) {
      out.push_back(unitary_frame(path[0], margin));
    } else if (k == 0) {
      out.push_back(continue_frame(*prev, g_prev ? *g_prev : path[0], path[0], margin));
    } else {
      out.push_back(continue_frame(out.back(), path[k - 1], path[k], margin));
    }
  }
  return out;
}

inline CMat diag_phase(const RVec& theta) {
  CVec d(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) d(j) = std::polar(1.0, theta(j));
  return d.asDiagonal();
}

}  // namespace spinrs
