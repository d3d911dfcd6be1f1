#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "reduction.hpp"

namespace spinrs {

inline constexpr double kCollisionMargin = 1e-6;

// V(x) = cot x - cot(x - i gamma).
inline cplx potential_V(cplx x, double gamma) {
  if (std::abs(std::sin(x)) < 1e-12) throw DomainError("potential_V: pole at x in pi Z");
  return 1.0 / std::tan(x) - 1.0 / std::tan(x - cplx(0.0, gamma));
}

// Right side of the second order equation: qddot_i / 2 = sum_j |F_ij|^2 2 cot(q_ij/2) / (1 + sin^2(q_ij/2) / sinh^2 gamma).
inline RVec newton_rhs(const RVec& q, const CMat& F, double gamma) {
  const Eigen::Index n = q.size();
  const double s2 = std::pow(std::sinh(gamma), 2);
  RVec out = RVec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double x = 0.5 * (q(i) - q(j));
      const double sx = std::sin(x);
      out(i) += std::norm(F(i, j)) * 2.0 * (std::cos(x) / sx) / (1.0 + sx * sx / s2);
    }
  return out;
}

struct GaugeState {
  RVec q;
  CMat v, L;
  double gamma = 0.0;

  static GaugeState from_slice(const SlicePoint& s) { return {s.q, s.v, s.L(), s.gamma}; }
  SlicePoint slice() const { return {q, v, gamma}; }
  CMat F() const { return collective_F(v); }
  CVec U() const { return v.rowwise().sum(); }
};

namespace detail {
inline void check_collision(const RVec& q) {
  if (q.size() > 1 && min_angular_gap(q) < kCollisionMargin) throw DomainError("particle collision: angles closer than the regularity margin");
}
}  // namespace detail

// K_kl = F_kl [cot(q_kl/2) - cot(q_kl/2 + i gamma)], K_kk = 0.
inline CMat k_matrix(const RVec& q, const CMat& F, double gamma) {
  const Eigen::Index n = q.size();
  CMat K = CMat::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) {
      if (k == l) continue;
      const double x = 0.5 * (q(k) - q(l));
      K(k, l) = F(k, l) * (std::cos(x) / std::sin(x) - 1.0 / std::tan(cplx(x, gamma)));
    }
  return K;
}

// i eta_j of the gauge fixed equations (real U_j assumed).
inline CVec gauge_eta(const RVec& q, const CMat& F, const CVec& U, double gamma) {
  const Eigen::Index n = q.size();
  CVec ieta = CVec::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index l = 0; l < n; ++l) {
      if (l == j) continue;
      ieta(j) += 0.5 * (U(l) / U(j)) * (F(j, l) * potential_V(0.5 * (q(l) - q(j)), gamma) + F(l, j) * potential_V(0.5 * (q(j) - q(l)), gamma));
    }
  return ieta;
}

struct Rhs {
  RVec qdot;
  CMat vdot;
};

// qdot_j = 2 F_jj; vdot(a)_j = i eta_j v(a)_j - sum_{l != j} F_jl v(a)_l V(q_lj / 2).
inline Rhs eom_rhs(const SlicePoint& s) {
  detail::check_collision(s.q);
  const Eigen::Index n = s.q.size();
  CMat F = s.F();
  CVec ieta = gauge_eta(s.q, F, s.U(), s.gamma);
  Rhs out{2.0 * F.diagonal().real(), CMat(n, s.v.cols())};
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index a = 0; a < s.v.cols(); ++a) {
      cplx acc = ieta(j) * s.v(j, a);
      for (Eigen::Index l = 0; l < n; ++l)
        if (l != j) acc -= F(j, l) * s.v(l, a) * potential_V(0.5 * (s.q(l) - s.q(j)), s.gamma);
      out.vdot(j, a) = acc;
    }
  return out;
}

// Same right side assembled as vdot = (K + i diag(eta)) v.
inline Rhs eom_rhs_kform(const SlicePoint& s) {
  detail::check_collision(s.q);
  CMat F = s.F();
  CMat Z = k_matrix(s.q, F, s.gamma);
  Z += CMat(gauge_eta(s.q, F, s.U(), s.gamma).asDiagonal());
  return {2.0 * F.diagonal().real(), Z * s.v};
}

struct StateRhs {
  RVec qdot;
  CMat vdot, Ldot;
};

// Full vector field on (q, v, L): L evolves by Ldot = [K + i diag(eta), L].
inline StateRhs state_rhs(const GaugeState& s) {
  detail::check_collision(s.q);
  CMat F = s.F();
  CMat Z = k_matrix(s.q, F, s.gamma);
  Z += CMat(gauge_eta(s.q, F, s.U(), s.gamma).asDiagonal());
  return {2.0 * F.diagonal().real(), Z * s.v, Z * s.L - s.L * Z};
}

struct Sample {
  double t = 0.0;
  RVec q;
  CMat v, L;
  RVec trL;               // tr L^k, k = 1..n
  std::vector<cplx> I;    // I^k_{ab} for k in ks, a, b (row-major)
  double residual = 0.0;  // max |e^{2 gamma} Q^{-1} L Q - L - F|
  double qdot_sum = 0.0;
  double min_qdot = 0.0;
  double gauge_imag = 0.0;  // max_j |Im U_j|
};

struct Trajectory {
  double gamma = 0.0;
  std::vector<int> ks;
  std::vector<Sample> samples;
  bool aborted = false;
  std::string abort_reason;
};

inline Sample observe(const GaugeState& s, double t, const std::vector<int>& ks) {
  Sample o;
  o.t = t;
  o.q = s.q;
  o.v = s.v;
  o.L = s.L;
  const Eigen::Index n = s.q.size(), d = s.v.cols();
  o.trL.resize(n);
  CMat P = CMat::Identity(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    P = P * s.L;
    o.trL(k) = P.trace().real();
  }
  for (int k : ks)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) o.I.push_back(invariants_I(s.L, s.v, k, a, b));
  o.residual = constraint_residual(diag_phase(s.q), s.L, s.v, s.gamma);
  RVec qdot = 2.0 * s.F().diagonal().real();
  o.qdot_sum = qdot.sum();
  o.min_qdot = qdot.minCoeff();
  o.gauge_imag = s.U().imag().cwiseAbs().maxCoeff();
  return o;
}

inline GaugeState axpy(const GaugeState& s, double h, const StateRhs& k) {
  return {s.q + h * k.qdot, s.v + h * k.vdot, s.L + h * k.Ldot, s.gamma};
}

// Classical fourth order Runge-Kutta on (q, v, L); samples every sample_every steps.
inline Trajectory rk4_integrate(const GaugeState& s0, double h, double T, int sample_every, std::vector<int> ks = {0, 1, 2}) {
  if (!(h > 0.0) || h > 1e-2) throw DomainError("rk4_integrate: step must satisfy 0 < h <= 1e-2");
  if (!(T >= 0.0) || sample_every < 1) throw DomainError("rk4_integrate: invalid horizon or sampling interval");
  Trajectory tr;
  tr.gamma = s0.gamma;
  tr.ks = std::move(ks);
  const long steps = std::lround(T / h);
  GaugeState s = s0;
  tr.samples.push_back(observe(s, 0.0, tr.ks));
  try {
    for (long k = 1; k <= steps; ++k) {
      StateRhs k1 = state_rhs(s);
      StateRhs k2 = state_rhs(axpy(s, 0.5 * h, k1));
      StateRhs k3 = state_rhs(axpy(s, 0.5 * h, k2));
      StateRhs k4 = state_rhs(axpy(s, h, k3));
      s.q += (h / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
      s.v += (h / 6.0) * (k1.vdot + 2.0 * k2.vdot + 2.0 * k3.vdot + k4.vdot);
      s.L += (h / 6.0) * (k1.Ldot + 2.0 * k2.Ldot + 2.0 * k3.Ldot + k4.Ldot);
      for (Eigen::Index i = 0; i < s.q.size(); ++i) s.q(i) = wrap_angle(s.q(i));
      detail::check_collision(s.q);
      if (!(eig_hermitian(s.L).values.minCoeff() > 1e-10 * s.L.trace().real()))
        throw DomainError("positivity of L lost");
      if (k % sample_every == 0 || k == steps) tr.samples.push_back(observe(s, static_cast<double>(k) * h, tr.ks));
    }
  } catch (const Error& e) {
    tr.aborted = true;
    tr.abort_reason = e.what();
  }
  return tr;
}

// Flow generator D h(b_R) = i f(L) for a spectral function f.
using SpectralRate = std::function<double(double)>;

inline SpectralRate rs_rate(double gamma) {
  const double c = 2.0 * std::expm1(2.0 * gamma);
  return [c](double x) { return c * x; };
}

inline SpectralRate power_rate(int k) {
  return [k](double x) { return std::pow(x, k); };
}

// exp(t i f(L)) for Hermitian L.
inline CMat spectral_exp(const HermitianEigen& e, const SpectralRate& f, double t) {
  CVec ph(e.values.size());
  for (Eigen::Index j = 0; j < ph.size(); ++j) ph(j) = std::polar(1.0, t * f(e.values(j)));
  return e.U * ph.asDiagonal() * e.U.adjoint();
}

// Solve by diagonalizing g_R(t) = exp(t i f(L0)) Q0 along a path, at the
// requested non-negative increasing times.
inline std::vector<SlicePoint> exact_solve_times(const SlicePoint& s0, const std::vector<double>& times, const SpectralRate& f) {
  const Eigen::Index n = s0.q.size();
  CMat L0 = s0.L();
  HermitianEigen e = eig_hermitian(L0);
  double rate = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) rate = std::max(rate, std::abs(f(e.values(j))));
  const double base = rate > 0.0 ? 0.05 / rate : 1.0;
  CMat Q0 = diag_phase(s0.q);
  UnitaryFrame frame{s0.q, CMat::Identity(n, n)};
  CMat g_prev = Q0;
  double t = 0.0;
  std::vector<SlicePoint> out;
  for (double target : times) {
    if (target < t) throw DomainError("exact_solve: times must be non-negative and increasing");
    double h = base;
    while (t < target) {
      double step = std::min(h, target - t);
      CMat g = spectral_exp(e, f, t + step) * Q0;
      try {
        frame = continue_frame(frame, g_prev, g, kCollisionMargin);
      } catch (const StepTooLargeError&) {
        h *= 0.5;
        if (h < 1e-12) throw EigenCollisionError("exact_solve: eigenframe continuation failed");
        continue;
      }
      g_prev = g;
      t += step;
      h = std::min(base, 2.0 * h);
    }
    CMat eta = frame.V.adjoint();
    RVec q(n);
    for (Eigen::Index j = 0; j < n; ++j) q(j) = wrap_angle(frame.theta(j));
    out.push_back(gauge_fix_plus(q, eta * s0.v, s0.gamma));
  }
  return out;
}

inline SlicePoint exact_solve(const SlicePoint& s0, double t, const SpectralRate& f) {
  if (t < 0.0) {
    SpectralRate neg = [f](double x) { return -f(x); };
    return exact_solve_times(s0, {-t}, neg).front();
  }
  return exact_solve_times(s0, {t}, f).front();
}

inline SlicePoint exact_solve(const SlicePoint& s0, double t) { return exact_solve(s0, t, rs_rate(s0.gamma)); }

// Max over interior samples and particles of |qddot - 2 * newton_rhs| with
// central differences; samples must be uniformly spaced.
inline double newton_residual(const Trajectory& tr) {
  const auto& S = tr.samples;
  if (S.size() < 5) throw DomainError("newton_residual: at least 5 samples required");
  const double dt = S[1].t - S[0].t;
  for (std::size_t k = 1; k < S.size(); ++k)
    if (std::abs(S[k].t - S[k - 1].t - dt) > 1e-9 * dt) throw DomainError("newton_residual: samples not uniformly spaced");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < S.size(); ++k) {
    RVec rhs = 2.0 * newton_rhs(S[k].q, collective_F(S[k].v), tr.gamma);
    for (Eigen::Index i = 0; i < rhs.size(); ++i) {
      const double fwd = wrap_angle(S[k + 1].q(i) - S[k].q(i));
      const double bwd = wrap_angle(S[k].q(i) - S[k - 1].q(i));
      worst = std::max(worst, std::abs((fwd - bwd) / (dt * dt) - rhs(i)));
    }
  }
  return worst;
}

// Only Gamma rotates: Gamma_j(t) = exp(i y_j^k t) Gamma_j(0).
inline S1Coords action_angle_flow(S1Coords c, int k, double t) {
  for (Eigen::Index j = 0; j < c.y.size(); ++j) c.c(j) = wrap_angle(c.c(j) + std::pow(c.y(j), k) * t);
  return c;
}

// Deterministic S1 coordinates with moderate eigenvalues: y_n = 0.015,
// y_i = 1.6 e^{2 gamma} y_{i+1}, nonzero v(1), spread torus angles.
inline S1Coords reference_s1_coords(Eigen::Index n, Eigen::Index d, double gamma) {
  if (n < 1 || d < 2) throw DomainError("reference_s1_coords: requires n >= 1 and d >= 2");
  S1Coords c;
  c.y.resize(n);
  c.y(n - 1) = 0.015;
  for (Eigen::Index i = n - 2; i >= 0; --i) c.y(i) = 1.6 * std::exp(2.0 * gamma) * c.y(i + 1);
  c.v_low = CMat::Zero(n, d - 1);
  c.t.resize(n);
  c.c.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = std::sqrt(c.y(i));
    c.v_low(i, 0) = 0.3 * s;
    for (Eigen::Index a = 1; a < d - 1; ++a) c.v_low(i, a) = 0.1 * s * cplx(std::cos(1.0 + i + a), std::sin(2.0 * a - i));
    c.t(i) = 0.4 * static_cast<double>(i) - 0.3;
    c.c(i) = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n) + 0.2;
  }
  slice_point_S1(c, gamma, &c.mu);
  return c;
}

inline SlicePoint reference_state(Eigen::Index n, Eigen::Index d, double gamma) {
  return to_q_slice(slice_point_S1(reference_s1_coords(n, d, gamma), gamma));
}

}  // namespace spinrs
