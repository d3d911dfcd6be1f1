#pragma once

#include <cmath>
#include <utility>

#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "heisenberg_double.hpp"
#include "linalg.hpp"
#include "sampling.hpp"
#include "spins.hpp"

namespace spinrs {

// A point of the extended phase space in (g_R, L, v) variables; v is n x d.
struct DressedPoint {
  CMat g_R, L, v;
  double gamma = 0.0;
};

struct DressedSpins {
  CMat v;     // v(alpha) = b_R b_1 ... b_{alpha-1} w^alpha
  CMat half;  // v^alpha = b_R^{-1} v(alpha)
};

inline DressedSpins dressed_spins(const CMat& b_R, const CMat& W) {
  const Eigen::Index n = W.rows(), d = W.cols();
  DressedSpins out{CMat(n, d), CMat(n, d)};
  CMat B = CMat::Identity(n, n);
  for (Eigen::Index a = 0; a < d; ++a) {
    out.half.col(a) = B * W.col(a);
    B = B * moment_b(W.col(a));
  }
  out.v = b_R * out.half;
  return out;
}

inline CMat primary_from_dressed(const CMat& b_R, const CMat& v) {
  const Eigen::Index n = v.rows(), d = v.cols();
  CMat W(n, d);
  CMat B = b_R;
  for (Eigen::Index a = 0; a < d; ++a) {
    W.col(a) = B.triangularView<Eigen::Upper>().solve(v.col(a));
    B = B * moment_b(W.col(a));
  }
  return W;
}

// S(W) = b(w^1) ... b(w^d).
inline CMat spin_product(const CMat& W) {
  CMat S = CMat::Identity(W.rows(), W.rows());
  for (Eigen::Index a = 0; a < W.cols(); ++a) S = S * moment_b(W.col(a));
  return S;
}

// Lambda = Lambda_L(K) Lambda_R(K) b(w^1) ... b(w^d) at K = K(g_R, b_R).
inline CMat total_moment(const CMat& g_R, const CMat& b_R, const CMat& W) {
  Iwasawa f = iwasawa_decompose(reconstruct_K(g_R, b_R));
  return f.b_L * f.b_R * spin_product(W);
}

inline CMat collective_F(const CMat& v) { return v * v.adjoint(); }

// max |e^{2 gamma} g^{-1} L g - L - F|.
inline double constraint_residual(const CMat& g_R, const CMat& L, const CMat& v, double gamma) {
  return max_abs(std::exp(2.0 * gamma) * g_R.adjoint() * L * g_R - L - collective_F(v));
}

inline double constraint_residual(const DressedPoint& p) { return constraint_residual(p.g_R, p.L, p.v, p.gamma); }

// max |Lambda Lambda^dagger - e^{2 gamma} 1|.
inline double moment_residual(const DressedPoint& p) {
  CMat b_R = cholesky_upper(p.L);
  CMat Lam = total_moment(p.g_R, b_R, primary_from_dressed(b_R, p.v));
  return max_abs(Lam * Lam.adjoint() - std::exp(2.0 * p.gamma) * CMat::Identity(p.L.rows(), p.L.cols()));
}

// I^k_{ab} = v(b)^dagger L^k v(a).
inline cplx invariants_I(const CMat& L, const CMat& v, int k, Eigen::Index a, Eigen::Index b) {
  if (k < 0) throw DomainError("invariants_I: k must be non-negative");
  CVec x = v.col(a);
  for (int m = 0; m < k; ++m) x = L * x;
  return v.col(b).dot(x);
}

inline DressedPoint act(const CMat& eta, const DressedPoint& p) {
  return {eta * p.g_R * eta.adjoint(), eta * p.L * eta.adjoint(), eta * p.v, p.gamma};
}

struct LaxSolution {
  bool accepted = false;
  CMat L;
  double min_eigenvalue = 0.0;
};

// L_ij = F_ij / (e^{2 gamma} Q_j / Q_i - 1); rejected unless positive definite.
inline LaxSolution L_from_Qv(const RVec& q, double gamma, const CMat& v) {
  const Eigen::Index n = q.size();
  CMat F = collective_F(v);
  LaxSolution out;
  out.L.resize(n, n);
  const double e2g = std::exp(2.0 * gamma);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.L(i, j) = F(i, j) / (e2g * std::polar(1.0, q(j) - q(i)) - 1.0);
  out.L = 0.5 * (out.L + out.L.adjoint());
  out.min_eigenvalue = eig_hermitian(out.L).values.minCoeff();
  const double tr = out.L.trace().real();
  out.accepted = tr > 0.0 && out.min_eigenvalue > 1e-10 * tr;
  return out;
}

inline void check_regular(const RVec& q, double margin) {
  if (q.size() > 1 && min_angular_gap(q) <= margin) throw DomainError("angles closer than the regularity margin");
}

// Unit upper triangular b_+ solving b_+ S_+ = Q^{-1} b_+ Q, by recursion on
// the distance from the diagonal.
inline CMat b_plus_solve(const RVec& q, const CMat& S_plus, double margin = 1e-6) {
  check_regular(q, margin);
  const Eigen::Index n = q.size();
  CMat b = CMat::Identity(n, n);
  for (Eigen::Index k = 1; k < n; ++k)
    for (Eigen::Index a = 0; a + k < n; ++a) {
      const Eigen::Index c = a + k;
      cplx s = S_plus(a, c);
      for (Eigen::Index m = a + 1; m < c; ++m) s += b(a, m) * S_plus(m, c);
      b(a, c) = s / (std::polar(1.0, q(c) - q(a)) - 1.0);
    }
  return b;
}

// S(W) = S_0 S_+ with S_0 diagonal and S_+ unit upper triangular.
inline std::pair<CMat, CMat> split_diagonal(const CMat& S) {
  CMat S0 = S.diagonal().asDiagonal();
  CMat Sp = S0.diagonal().cwiseInverse().asDiagonal() * S;
  return {S0, Sp};
}

inline CMat b_plus_from_W(const RVec& q, const CMat& W, double margin = 1e-6) {
  return b_plus_solve(q, split_diagonal(spin_product(W)).second, margin);
}

// Rescale row j of W (j = n..1) so that prod_alpha G_j(w^alpha) = exp(2 sum_{k>=j} Gamma_k).
inline CMat rescale_to_phi(CMat W, const RVec& Gamma) {
  const Eigen::Index n = W.rows(), d = W.cols();
  RVec tail(d);
  tail.setOnes();
  double acc = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    acc += Gamma(j);
    RVec row(d);
    for (Eigen::Index a = 0; a < d; ++a) row(a) = std::norm(W(j, a));
    if (row.sum() == 0.0) throw DomainError("rescale_to_phi: zero row");
    const double target = 2.0 * acc;
    auto f = [&](double s) {
      double v = 0.0;
      for (Eigen::Index a = 0; a < d; ++a) v += std::log(tail(a) + s * row(a));
      return v - target;
    };
    double hi = 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi), boost::math::tools::eps_tolerance<double>(52), iters);
    const double s = 0.5 * (r.first + r.second);
    W.row(j) *= std::sqrt(s);
    for (Eigen::Index a = 0; a < d; ++a) tail(a) += s * row(a);
  }
  return W;
}

struct QpW {
  RVec q, p;
  CMat W;
};

inline double phi_residual(const CMat& W, double gamma) {
  return (torus_phi(W) - RVec::Constant(W.rows(), gamma)).cwiseAbs().maxCoeff();
}

// Solve the constraint for b_R = e^p b_+(Q, W); g_R = Q.
inline DressedPoint chart_qpW(const QpW& c, double gamma, double margin = 1e-6) {
  if (phi_residual(c.W, gamma) > 1e-8) throw DomainError("chart_qpW: W is not on the level set phi(W) = gamma");
  CMat b_R = c.p.array().exp().matrix().cast<cplx>().asDiagonal() * b_plus_from_W(c.q, c.W, margin);
  DressedPoint out;
  out.g_R = diag_phase(c.q);
  out.L = b_R * b_R.adjoint();
  out.v = dressed_spins(b_R, c.W).v;
  out.gamma = gamma;
  return out;
}

inline QpW chart_inverse(const RVec& q, const CMat& L, const CMat& v, double gamma) {
  CMat b_R = cholesky_upper(L);
  QpW c{q, RVec(q.size()), primary_from_dressed(b_R, v)};
  for (Eigen::Index i = 0; i < q.size(); ++i) c.p(i) = std::log(b_R(i, i).real());
  if (phi_residual(c.W, gamma) > 1e-8) throw DomainError("chart_inverse: recovered W violates phi(W) = gamma");
  return c;
}

// Point of the gauge slice: g_R = diag(e^{i q}), L from (Q, v), sum_alpha v(alpha) > 0.
struct SlicePoint {
  RVec q;
  CMat v;
  double gamma = 0.0;

  CMat F() const { return collective_F(v); }
  CVec U() const { return v.rowwise().sum(); }
  LaxSolution lax() const { return L_from_Qv(q, gamma, v); }
  CMat L() const {
    LaxSolution s = lax();
    if (!s.accepted) throw DomainError("slice point: L(Q, v) is not positive definite");
    return s.L;
  }
  DressedPoint dressed() const { return {diag_phase(q), L(), v, gamma}; }
};

inline SlicePoint gauge_fix_plus(const RVec& q, CMat v, double gamma) {
  CVec U = v.rowwise().sum();
  const double scale = std::max(1e-300, v.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < U.size(); ++i) {
    if (std::abs(U(i)) <= 1e-14 * scale) throw DomainError("gauge_fix_plus: vanishing component of sum_alpha v(alpha)");
    v.row(i) *= std::conj(U(i)) / std::abs(U(i));
  }
  return {q, v, gamma};
}

inline SlicePoint gauge_fix_plus(const SlicePoint& s) { return gauge_fix_plus(s.q, s.v, s.gamma); }

// Bring a point with diagonalizable g_R to the slice: eta = V^dagger with g_R = V e^{i theta} V^dagger.
inline SlicePoint to_q_slice(const DressedPoint& p, double margin = 1e-6) {
  UnitaryFrame f = unitary_frame(p.g_R, margin);
  return gauge_fix_plus(f.theta, f.V.adjoint() * p.v, p.gamma);
}

// Gauge with L = diag(y), y descending, and v(1) real non-negative.
inline DressedPoint to_s_gauge(const DressedPoint& p) {
  HermitianEigen e = eig_hermitian(p.L);
  DressedPoint out = act(e.U.adjoint(), p);
  CVec tau(out.v.rows());
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    const double a = std::abs(out.v(i, 0));
    tau(i) = a > 0.0 ? std::conj(out.v(i, 0)) / a : cplx(1.0);
  }
  out = act(tau.asDiagonal(), out);
  out.L = e.values.cast<cplx>().asDiagonal();
  return out;
}

namespace detail {
inline void check_descending_positive(const RVec& y, const char* what) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y(i) > 0.0)) throw DomainError(std::string(what) + ": eigenvalues must be positive");
    if (i + 1 < y.size() && !(y(i) > y(i + 1))) throw DomainError(std::string(what) + ": eigenvalues must be strictly descending");
  }
}

// g with g^{-1} e^{2 gamma} diag(y) g = A, from the eig_hermitian frame of A.
inline CMat transport_frame(const RVec& y, const CMat& A, double gamma) {
  HermitianEigen e = eig_hermitian(A);
  const double e2g = std::exp(2.0 * gamma);
  const double scale = e2g * y.cwiseAbs().maxCoeff();
  if ((e.values - e2g * y).cwiseAbs().maxCoeff() > 1e-9 * scale) throw DomainError("spectra of the constraint sides differ");
  return e.U.adjoint();
}
}  // namespace detail

// Lemma-type normal form: L = diag(y), v(alpha) = 0 for alpha < d, v(d) > 0.
inline DressedPoint normal_form_d(const RVec& y, double gamma, Eigen::Index d) {
  if (d < 1) throw DomainError("normal_form_d: d must be positive");
  const Eigen::Index n = y.size();
  const double e2g = std::exp(2.0 * gamma);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double next = i + 1 < n ? y(i + 1) : 0.0;
    if (!(y(i) - e2g * next > 1e-10 * std::max(1.0, y(i)))) throw DomainError("normal_form_d: y_i > e^{2 gamma} y_{i+1} violated");
  }
  DressedPoint p;
  p.gamma = gamma;
  p.L = y.cast<cplx>().asDiagonal();
  p.v = CMat::Zero(n, d);
  for (Eigen::Index l = 0; l < n; ++l) {
    double m = std::expm1(2.0 * gamma) * y(l);
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != l) m *= (e2g * y(k) - y(l)) / (y(k) - y(l));
    p.v(l, d - 1) = std::sqrt(m);
  }
  CMat A = p.L + p.v.col(d - 1) * p.v.col(d - 1).adjoint();
  p.g_R = detail::transport_frame(y, A, gamma);
  return p;
}

// Coordinates of the open set where L = diag(y) and v(1) > 0 (d >= 2).
struct S1Coords {
  RVec y;
  CMat v_low;  // v(1), ..., v(d-1)
  RVec t;      // tau_j = e^{i t_j}
  RVec c;      // Gamma_j = e^{i c_j}
  RVec mu;     // spectrum of L_1 (output)
};

inline RVec bold_V(const RVec& y, const RVec& mu, double gamma) {
  const Eigen::Index n = y.size();
  const double e2g = std::exp(2.0 * gamma);
  RVec V(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    double m = e2g * y(l) - mu(l);
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != l) m *= (e2g * y(k) - mu(l)) / (mu(k) - mu(l));
    if (!(m > 0.0)) throw DomainError("bold_V: non-positive radicand");
    V(l) = std::sqrt(m);
  }
  return V;
}

inline void check_interlacing(const RVec& y, const RVec& mu, double gamma) {
  const double e2g = std::exp(2.0 * gamma);
  const Eigen::Index n = y.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo = i + 1 < n ? e2g * y(i + 1) : -std::numeric_limits<double>::infinity();
    if (!(e2g * y(i) > mu(i) && mu(i) > lo)) throw DomainError("slice_point_S1: interlacing condition violated");
  }
}

namespace detail {
inline HermitianEigen L1_frame(const RVec& y, const CMat& v_low) {
  CMat L1 = y.cast<cplx>().asDiagonal();
  L1 += v_low * v_low.adjoint();
  return eig_hermitian(L1);
}
}  // namespace detail

inline DressedPoint slice_point_S1(const S1Coords& c, double gamma, RVec* mu_out = nullptr) {
  const Eigen::Index n = c.y.size(), d = c.v_low.cols() + 1;
  if (d < 2) throw DomainError("slice_point_S1: requires d >= 2");
  detail::check_descending_positive(c.y, "slice_point_S1");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(c.v_low(i, 0).imag()) > 0.0 || c.v_low(i, 0).real() < 0.0)
      throw DomainError("slice_point_S1: v(1) must have non-negative real components");
  HermitianEigen e1 = detail::L1_frame(c.y, c.v_low);
  check_interlacing(c.y, e1.values, gamma);
  if (mu_out) *mu_out = e1.values;
  DressedPoint p;
  p.gamma = gamma;
  p.L = c.y.cast<cplx>().asDiagonal();
  p.v.resize(n, d);
  p.v.leftCols(d - 1) = c.v_low;
  RVec V = bold_V(c.y, e1.values, gamma);
  CVec u(n);
  for (Eigen::Index l = 0; l < n; ++l) u(l) = std::polar(V(l), c.t(l));
  p.v.col(d - 1) = e1.U * u;
  CMat A = e1.U * e1.values.cast<cplx>().asDiagonal() * e1.U.adjoint() + p.v.col(d - 1) * p.v.col(d - 1).adjoint();
  p.g_R = diag_phase(c.c) * detail::transport_frame(c.y, A, gamma);
  return p;
}

inline S1Coords slice_point_S1_inverse(const DressedPoint& p) {
  const Eigen::Index n = p.L.rows(), d = p.v.cols();
  if (d < 2) throw DomainError("slice_point_S1_inverse: requires d >= 2");
  const double scale = max_abs(p.L);
  if (max_abs(p.L - CMat(p.L.diagonal().asDiagonal())) > 1e-10 * scale) throw DomainError("slice_point_S1_inverse: L is not diagonal");
  S1Coords c;
  c.y = p.L.diagonal().real();
  detail::check_descending_positive(c.y, "slice_point_S1_inverse");
  c.v_low = p.v.leftCols(d - 1);
  const double vs = std::max(1e-300, c.v_low.col(0).cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(c.v_low(i, 0).imag()) > 1e-10 * vs || c.v_low(i, 0).real() < 0.0)
      throw DomainError("slice_point_S1_inverse: v(1) is not real non-negative");
  HermitianEigen e1 = detail::L1_frame(c.y, c.v_low);
  c.mu = e1.values;
  check_interlacing(c.y, c.mu, p.gamma);
  RVec V = bold_V(c.y, c.mu, p.gamma);
  CVec u = e1.U.adjoint() * p.v.col(d - 1);
  c.t.resize(n);
  for (Eigen::Index l = 0; l < n; ++l) c.t(l) = std::arg(u(l) / V(l));
  CMat A = e1.U * e1.values.cast<cplx>().asDiagonal() * e1.U.adjoint() + p.v.col(d - 1) * p.v.col(d - 1).adjoint();
  CMat D = p.g_R * detail::transport_frame(c.y, A, p.gamma).adjoint();
  c.c.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) c.c(j) = std::arg(D(j, j));
  return c;
}

// Random point of the S1 chart: y with y_i > 1.5 e^{2 gamma} y_{i+1}, small spins.
inline S1Coords random_S1_coords(Rng& r, Eigen::Index n, Eigen::Index d, double gamma) {
  if (d < 2) throw DomainError("random_S1_coords: requires d >= 2");
  const double e2g = std::exp(2.0 * gamma);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    S1Coords c;
    c.y.resize(n);
    c.y(n - 1) = std::exp(0.3 * gauss(r));
    for (Eigen::Index i = n - 2; i >= 0; --i) c.y(i) = c.y(i + 1) * e2g * uniform(r, 1.5, 2.5);
    c.v_low = random_cmat(r, n, d - 1, 0.15);
    for (Eigen::Index i = 0; i < n; ++i) c.v_low(i, 0) = uniform(r, 0.1, 0.4);
    c.v_low = c.y.cwiseSqrt().cast<cplx>().asDiagonal() * c.v_low;
    c.t = random_angles(r, n);
    c.c = random_angles(r, n);
    try {
      slice_point_S1(c, gamma, &c.mu);
      return c;
    } catch (const DomainError&) {
    }
  }
  throw DomainError("random_S1_coords: sampling failed");
}

// Random gauge-slice point by rejection on positivity of L(Q, v).
inline SlicePoint random_slice_point(Rng& r, Eigen::Index n, Eigen::Index d, double gamma, double min_gap = 0.3) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    RVec q = random_regular_angles(r, n, min_gap);
    CMat v = random_cmat(r, n, d);
    SlicePoint s = gauge_fix_plus(q, v, gamma);
    if (s.lax().accepted) return s;
  }
  throw DomainError("random_slice_point: sampling failed");
}

// Random admissible chart point: regular q, p, and W on phi(W) = gamma.
inline QpW random_qpW(Rng& r, Eigen::Index n, Eigen::Index d, double gamma, double min_gap = 0.3) {
  QpW c;
  c.q = random_regular_angles(r, n, min_gap);
  c.p.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.p(i) = 0.3 * gauss(r);
  c.W = rescale_to_phi(random_cmat(r, n, d), RVec::Constant(n, gamma));
  return c;
}

}  // namespace spinrs
