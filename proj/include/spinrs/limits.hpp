#pragma once

#include <cmath>
#include <vector>

#include "dynamics.hpp"
#include "gmat.hpp"
#include "redpoisson.hpp"
#include "reduction.hpp"
#include "spins.hpp"

namespace spinrs {

// ---------------------------------------------------------------------------
// Scaling limit to the spin Sutherland model

inline RVec gh_spin_norms(const CMat& W) { return W.rowwise().squaredNorm(); }

// Rows rescaled so that (w_j, w_j) = 2 gamma.
inline CMat gh_normalize(CMat W, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("gh_normalize: gamma must be positive");
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    const double nrm = W.row(j).squaredNorm();
    if (nrm == 0.0) throw DomainError("gh_normalize: zero spin row");
    W.row(j) *= std::sqrt(2.0 * gamma / nrm);
  }
  return W;
}

inline double gh_hamiltonian(const RVec& q, const RVec& p, const CMat& W) {
  const Eigen::Index n = q.size();
  CMat G = W * W.adjoint();
  double h = 0.5 * p.squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) h += std::norm(G(i, j)) / (32.0 * std::pow(std::sin(0.5 * (q(i) - q(j))), 2));
  return h;
}

namespace detail {

inline void check_gh_input(const RVec& q, const RVec& p, const CMat& W, double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("gh_limit_check: gamma must be non-negative");
  if (p.size() != q.size() || W.rows() != q.size()) throw DomainError("gh_limit_check: shape mismatch");
  check_regular(q, 1e-6);
  if ((gh_spin_norms(W) - RVec::Constant(q.size(), 2.0 * gamma)).cwiseAbs().maxCoeff() > 1e-10)
    throw DomainError("gh_limit_check: spins violate (w_j, w_j) = 2 gamma");
}

// Spins sqrt(eps) W moved onto the level set phi = eps gamma.
inline CMat gh_scaled_spins(const CMat& W, double eps, double gamma) {
  if (gamma == 0.0) return W;
  return rescale_to_phi(std::sqrt(eps) * W, RVec::Constant(W.rows(), eps * gamma));
}

}  // namespace detail

struct GhRow {
  double eps = 0.0;
  double lhs = 0.0;   // (tr L + tr L^{-1} - 2n) / (8 eps^2)
  double h_gh = 0.0;  // limiting Hamiltonian
  double error = 0.0;
};

inline std::vector<GhRow> gh_limit_check(const RVec& q, const RVec& p, const CMat& W, const std::vector<double>& eps_list, double gamma) {
  detail::check_gh_input(q, p, W, gamma);
  const double n = static_cast<double>(q.size());
  const double h = gh_hamiltonian(q, p, W);
  std::vector<GhRow> out;
  for (double eps : eps_list) {
    if (!(eps > 0.0)) throw DomainError("gh_limit_check: eps must be positive");
    CMat We = detail::gh_scaled_spins(W, eps, gamma);
    CMat b_R = (eps * p).array().exp().matrix().cast<cplx>().asDiagonal() * b_plus_from_W(q, We);
    CMat L = b_R * b_R.adjoint();
    CMat Linv = L.inverse();
    GhRow row;
    row.eps = eps;
    row.lhs = (L.trace().real() + Linv.trace().real() - 2.0 * n) / (8.0 * eps * eps);
    row.h_gh = h;
    row.error = std::abs(row.lhs - h);
    out.push_back(row);
  }
  return out;
}

// Slice point of the reduced system with parameter eps gamma representing
// the chart point (q, eps p, sqrt(eps) W).
inline SlicePoint gh_slice_point(const RVec& q, const RVec& p, const CMat& W, double eps, double gamma) {
  detail::check_gh_input(q, p, W, gamma);
  QpW c{q, eps * p, detail::gh_scaled_spins(W, eps, gamma)};
  DressedPoint d = chart_qpW(c, eps * gamma);
  return gauge_fix_plus(q, d.v, eps * gamma);
}

namespace detail {

template <class C>
GMat<C> slice_L_g(const ReducedSystem& sys, const std::vector<C>& x) {
  const auto n = static_cast<std::size_t>(sys.n);
  GMat<C> L(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) L(i, j) = slice_L(sys, x, static_cast<long>(i), static_cast<long>(j));
  return L;
}

// Chart spins W of a slice point, as a function of the formal coordinates.
template <class C>
GMat<C> slice_W_g(const ReducedSystem& sys, const std::vector<C>& x) {
  const auto n = static_cast<std::size_t>(sys.n), d = static_cast<std::size_t>(sys.d);
  GMat<C> B = cholesky_upper_g(slice_L_g(sys, x));
  GMat<C> W(n, d);
  for (std::size_t a = 0; a < d; ++a) {
    GMat<C> va(n, 1);
    for (std::size_t i = 0; i < n; ++i) va(i, 0) = x[sys.index({RedKind::V, static_cast<long>(i), static_cast<long>(a)})];
    GMat<C> wa = upper_solve_g(B, va);
    std::vector<C> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      W(i, a) = wa(i, 0);
      w[i] = wa(i, 0);
    }
    B = B * moment_b_g(w);
  }
  return W;
}

}  // namespace detail

// Reduced brackets of the rescaled chart functions q, p and the spin
// invariants |(w_i, w_j)|^2 (w = W / sqrt(eps)), multiplied by eps, compared
// with their values for dp ^ dq + (i/2) dw ^ dwbar.
struct GhBlockError {
  double eps = 0.0;
  double qp = 0.0;    // max |eps {q_i, p_j} - delta_ij|
  double pp = 0.0;    // max |eps {p_i, p_j}|
  double spin = 0.0;  // max |eps {Phi_ij, Phi_kl} - limit| / max |limit|
};

inline GhBlockError gh_block_check(const RVec& q, const RVec& p, const CMat& W, double eps, double gamma) {
  SlicePoint s = gh_slice_point(q, p, W, eps, gamma);
  ReducedSystem sys = reduced_system(s);
  const long n = sys.n;
  auto pfun = [&](long j) {
    return [&, j](const auto& x) {
      auto b = cholesky_upper_g(detail::slice_L_g(sys, x));
      return num::log(b(static_cast<std::size_t>(j), static_cast<std::size_t>(j))) / cplx(eps);
    };
  };
  auto qfun = [&](long j) { return [&, j](const auto& x) { return x[sys.index({RedKind::Q, j})]; }; };
  auto phifun = [&](long i, long j) {
    return [&, i, j](const auto& x) {
      auto w = detail::slice_W_g(sys, x);
      using C = std::decay_t<decltype(w(0, 0))>;
      C g = C(0.0);
      for (std::size_t a = 0; a < w.cols; ++a) g += w(static_cast<std::size_t>(i), a) * num::conj(w(static_cast<std::size_t>(j), a));
      return g * num::conj(g) / cplx(eps * eps);
    };
  };
  GhBlockError out;
  out.eps = eps;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      out.qp = std::max(out.qp, std::abs(eps * reduced_bracket(s, qfun(i), pfun(j)) - (i == j ? 1.0 : 0.0)));
      if (i < j) out.pp = std::max(out.pp, std::abs(eps * reduced_bracket(s, pfun(i), pfun(j))));
    }
  // Limit brackets from {G_ab, G_cd} = 2i (delta_ad G_cb - delta_bc G_ad), G = w w^dagger.
  CMat w = to_cmat(detail::slice_W_g(sys, sys.coords(s))) / std::sqrt(eps);
  CMat G = w * w.adjoint();
  auto gg = [&](long a, long b, long c, long d) {
    cplx r = 0.0;
    if (a == d) r += G(c, b);
    if (b == c) r -= G(a, d);
    return cplx(0.0, 2.0) * r;
  };
  double worst = 0.0, scale = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j)
      for (long k = 0; k < n; ++k)
        for (long l = k + 1; l < n; ++l) {
          cplx lim = G(j, i) * G(l, k) * gg(i, j, k, l) + G(j, i) * G(k, l) * gg(i, j, l, k) + G(i, j) * G(l, k) * gg(j, i, k, l) +
                     G(i, j) * G(k, l) * gg(j, i, l, k);
          cplx got = eps * reduced_bracket(s, phifun(i, j), phifun(k, l));
          worst = std::max(worst, std::abs(got - lim));
          scale = std::max(scale, std::abs(lim));
        }
  out.spin = scale > 0.0 ? worst / scale : worst;
  return out;
}

// ---------------------------------------------------------------------------
// d = 1 reduction to the spinless model

enum class SpinlessFactor { corrected, as_printed };

// Pair factor entering F_jj = e^{2 theta_j} prod_{i != j} factor(q_i - q_j)^{1/2}.
template <class C>
C spinless_pair_factor(const C& x, double gamma, SpinlessFactor f) {
  const C s = num::sin(x / cplx(2.0));
  const C sh2 = C(std::pow(std::sinh(gamma), 2));
  if (f == SpinlessFactor::corrected) return C(1.0) + sh2 / (s * s);
  return C(1.0) + sh2 / (C(1.0) + s * s);
}

template <class C>
C spinless_log_prefactor(const std::vector<C>& q, std::size_t j, double gamma, SpinlessFactor f) {
  C acc = C(0.0);
  for (std::size_t i = 0; i < q.size(); ++i)
    if (i != j) acc += num::log(spinless_pair_factor(q[i] - q[j], gamma, f));
  return acc / cplx(2.0);
}

template <class C>
C spinless_hamiltonian(const std::vector<C>& q, const std::vector<C>& theta, double gamma, SpinlessFactor f) {
  C h = C(0.0);
  for (std::size_t j = 0; j < q.size(); ++j) h += num::exp(cplx(2.0) * theta[j] + spinless_log_prefactor(q, j, gamma, f));
  return h;
}

struct SpinlessPoint {
  RVec q, theta;
  double gamma = 0.0;
  double H = 0.0;
};

inline SpinlessPoint spinless_map(const SlicePoint& s, SpinlessFactor f = SpinlessFactor::corrected) {
  if (s.v.cols() != 1) throw DomainError("spinless_map: requires d = 1");
  const Eigen::Index n = s.q.size();
  CMat F = s.F();
  std::vector<cplx> qc(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) qc[static_cast<std::size_t>(i)] = s.q(i);
  SpinlessPoint out{s.q, RVec(n), s.gamma, 0.0};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double Fjj = F(j, j).real();
    if (!(Fjj > 0.0)) throw DomainError("spinless_map: F_jj must be positive");
    out.theta(j) = 0.5 * (std::log(Fjj) - spinless_log_prefactor(qc, static_cast<std::size_t>(j), s.gamma, f).real());
    out.H += Fjj;
  }
  return out;
}

inline SpinlessPoint spinless_map(const GaugeState& s, SpinlessFactor f = SpinlessFactor::corrected) { return spinless_map(s.slice(), f); }

// Diagonal of F recovered from (q, theta).
inline RVec spinless_F_diagonal(const SpinlessPoint& p, SpinlessFactor f = SpinlessFactor::corrected) {
  const Eigen::Index n = p.q.size();
  std::vector<cplx> qc(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) qc[static_cast<std::size_t>(i)] = p.q(i);
  RVec out(n);
  for (Eigen::Index j = 0; j < n; ++j)
    out(j) = std::exp(2.0 * p.theta(j) + spinless_log_prefactor(qc, static_cast<std::size_t>(j), p.gamma, f).real());
  return out;
}

struct DarbouxError {
  double q_theta = 0.0;      // max |{q_i, theta_j} - delta_ij|
  double theta_theta = 0.0;  // max |{theta_i, theta_j}|
};

// Reduced brackets of (q, theta) at a d = 1 slice point.
inline DarbouxError spinless_darboux_check(const SlicePoint& s, SpinlessFactor f = SpinlessFactor::corrected) {
  if (s.v.cols() != 1) throw DomainError("spinless_darboux_check: requires d = 1");
  ReducedSystem sys = reduced_system(s);
  const long n = sys.n;
  auto theta = [&](long j) {
    return [&, j](const auto& x) {
      using C = std::decay_t<decltype(x[0])>;
      std::vector<C> q(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = x[sys.index({RedKind::Q, i})];
      return (num::log(slice_F(sys, x, j, j)) - spinless_log_prefactor(q, static_cast<std::size_t>(j), sys.gamma, f)) / cplx(2.0);
    };
  };
  DarbouxError out;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      cplx qt = reduced_bracket(s, [&](const auto& x) { return x[sys.index({RedKind::Q, i})]; }, theta(j));
      out.q_theta = std::max(out.q_theta, std::abs(qt - (i == j ? 1.0 : 0.0)));
      if (i < j) out.theta_theta = std::max(out.theta_theta, std::abs(reduced_bracket(s, theta(i), theta(j))));
    }
  return out;
}

struct SpinlessRhs {
  RVec qdot, thetadot;
};

// Hamilton equations of H_RS in the Darboux pair (q, theta).
inline SpinlessRhs spinless_rhs(const RVec& q, const RVec& theta, double gamma, SpinlessFactor f = SpinlessFactor::corrected) {
  const auto n = static_cast<std::size_t>(q.size());
  SpinlessRhs out{RVec(q.size()), RVec(q.size())};
  for (std::size_t k = 0; k < 2 * n; ++k) {
    std::vector<Dual> qd(n), td(n);
    for (std::size_t i = 0; i < n; ++i) {
      qd[i] = Dual(cplx(q(static_cast<Eigen::Index>(i))), cplx(k == i ? 1.0 : 0.0));
      td[i] = Dual(cplx(theta(static_cast<Eigen::Index>(i))), cplx(k == n + i ? 1.0 : 0.0));
    }
    const double dH = spinless_hamiltonian(qd, td, gamma, f).d.real();
    if (k < n)
      out.thetadot(static_cast<Eigen::Index>(k)) = -dH;
    else
      out.qdot(static_cast<Eigen::Index>(k - n)) = dH;
  }
  return out;
}

// Second derivative of q along the Hamiltonian flow, by differentiating
// qdot = dH/dtheta in the direction of the flow.
inline RVec spinless_acceleration(const RVec& q, const RVec& theta, double gamma, SpinlessFactor f = SpinlessFactor::corrected) {
  const auto n = static_cast<std::size_t>(q.size());
  SpinlessRhs r = spinless_rhs(q, theta, gamma, f);
  RVec out(q.size());
  for (std::size_t j = 0; j < n; ++j) {
    // d/dt qdot_j = sum_k (d qdot_j / d q_k) qdot_k + (d qdot_j / d theta_k) thetadot_k.
    std::vector<Dual> qd(n), td(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      qd[i] = Dual(cplx(q(ii)), cplx(r.qdot(ii)));
      td[i] = Dual(cplx(theta(ii)), cplx(r.thetadot(ii)));
    }
    // qdot_j = 2 exp(2 theta_j + log prefactor_j)
    Dual qdj = Dual(2.0) * num::exp(Dual(2.0) * td[j] + spinless_log_prefactor(qd, j, gamma, f));
    out(static_cast<Eigen::Index>(j)) = qdj.d.real();
  }
  return out;
}

// Max over a short RK4 trajectory of |qddot - (Newton right-hand side)|.
inline double spinless_newton_check(const SlicePoint& s, double T, double h, SpinlessFactor f = SpinlessFactor::corrected) {
  if (!(h > 0.0) || !(T >= 0.0)) throw DomainError("spinless_newton_check: need h > 0 and T >= 0");
  SpinlessPoint p = spinless_map(s, f);
  RVec q = p.q, th = p.theta;
  const double gamma = s.gamma;
  auto residual = [&](const RVec& qq, const RVec& tt) {
    SpinlessPoint cur{qq, tt, gamma, 0.0};
    RVec Fd = spinless_F_diagonal(cur, f);
    CMat F = (Fd.cwiseSqrt() * Fd.cwiseSqrt().transpose()).cast<cplx>();
    RVec target = 2.0 * newton_rhs(qq, F, gamma);
    return (spinless_acceleration(qq, tt, gamma, f) - target).cwiseAbs().maxCoeff();
  };
  double worst = residual(q, th);
  const int steps = static_cast<int>(std::ceil(T / h));
  for (int k = 0; k < steps; ++k) {
    SpinlessRhs k1 = spinless_rhs(q, th, gamma, f);
    SpinlessRhs k2 = spinless_rhs(q + 0.5 * h * k1.qdot, th + 0.5 * h * k1.thetadot, gamma, f);
    SpinlessRhs k3 = spinless_rhs(q + 0.5 * h * k2.qdot, th + 0.5 * h * k2.thetadot, gamma, f);
    SpinlessRhs k4 = spinless_rhs(q + h * k3.qdot, th + h * k3.thetadot, gamma, f);
    q += h / 6.0 * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
    th += h / 6.0 * (k1.thetadot + 2.0 * k2.thetadot + 2.0 * k3.thetadot + k4.thetadot);
    if (q.size() > 1 && min_angular_gap(q) <= kCollisionMargin) throw DomainError("spinless_newton_check: particles collided");
    worst = std::max(worst, residual(q, th));
  }
  return worst;
}

}  // namespace spinrs
