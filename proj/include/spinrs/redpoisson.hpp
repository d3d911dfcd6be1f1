#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <vector>

#include "dual.hpp"
#include "errors.hpp"
#include "heisenberg_double.hpp"
#include "linalg.hpp"
#include "poisson.hpp"
#include "reduction.hpp"

namespace spinrs {

enum class RedKind { Q, V, Vbar };

// Coordinate of the gauge slice: q_i, v(alpha)_i or its conjugate.
struct RedCoord {
  RedKind kind;
  long i;
  long alpha = 0;
};

// Reduced Poisson structure on the gauge slice in the formal coordinates
// (q_1..q_n, v(alpha)_i, conj v(alpha)_i).
struct ReducedSystem {
  long n, d;
  double gamma;

  std::size_t size() const { return static_cast<std::size_t>(n + 2 * n * d); }
  std::size_t index(const RedCoord& c) const {
    if (c.i < 0 || c.i >= n || c.alpha < 0 || c.alpha >= d) throw IndexError("reduced coordinate index out of range");
    switch (c.kind) {
      case RedKind::Q: return static_cast<std::size_t>(c.i);
      case RedKind::V: return static_cast<std::size_t>(n + c.alpha * n + c.i);
      case RedKind::Vbar: return static_cast<std::size_t>(n + n * d + c.alpha * n + c.i);
    }
    throw IndexError("unknown reduced coordinate kind");
  }
  RedCoord coord(std::size_t a) const {
    long x = static_cast<long>(a);
    if (x < n) return {RedKind::Q, x, 0};
    x -= n;
    if (x < n * d) return {RedKind::V, x % n, x / n};
    x -= n * d;
    return {RedKind::Vbar, x % n, x / n};
  }
  std::size_t partner(std::size_t a) const {
    RedCoord c = coord(a);
    if (c.kind == RedKind::Q) return a;
    return index({c.kind == RedKind::V ? RedKind::Vbar : RedKind::V, c.i, c.alpha});
  }

  std::vector<cplx> coords(const SlicePoint& s) const {
    std::vector<cplx> x(size());
    for (long i = 0; i < n; ++i) {
      x[index({RedKind::Q, i})] = s.q(i);
      for (long a = 0; a < d; ++a) {
        x[index({RedKind::V, i, a})] = s.v(i, a);
        x[index({RedKind::Vbar, i, a})] = std::conj(s.v(i, a));
      }
    }
    return x;
  }

  // Structure functions evaluated at formal coordinates.
  template <class C>
  struct Fields {
    long n, d;
    std::vector<C> Q, v, vb, U, L, S, R;  // v, vb: alpha * n + i; L, S: i * n + j; R: (alpha * n + i) * n + j
    const C& V(long a, long i) const { return v[static_cast<std::size_t>(a * n + i)]; }
    const C& Vb(long a, long i) const { return vb[static_cast<std::size_t>(a * n + i)]; }
    const C& Lm(long i, long j) const { return L[static_cast<std::size_t>(i * n + j)]; }
    const C& Sm(long i, long j) const { return S[static_cast<std::size_t>(i * n + j)]; }
    const C& Rm(long a, long i, long j) const { return R[static_cast<std::size_t>((a * n + i) * n + j)]; }
    C coth_q(long i, long j) const { return (Q[static_cast<std::size_t>(i)] + Q[static_cast<std::size_t>(j)]) / (Q[static_cast<std::size_t>(i)] - Q[static_cast<std::size_t>(j)]); }
  };

  template <class C>
  Fields<C> fields(const std::vector<C>& x) const {
    Fields<C> f{n, d, {}, {}, {}, {}, {}, {}, {}};
    const std::size_t nn = static_cast<std::size_t>(n * n);
    f.Q.resize(static_cast<std::size_t>(n));
    f.U.assign(static_cast<std::size_t>(n), C(0.0));
    f.v.resize(static_cast<std::size_t>(n * d));
    f.vb.resize(static_cast<std::size_t>(n * d));
    for (long i = 0; i < n; ++i) f.Q[static_cast<std::size_t>(i)] = num::exp(C(cplx(0.0, 1.0)) * x[index({RedKind::Q, i})]);
    for (long a = 0; a < d; ++a)
      for (long i = 0; i < n; ++i) {
        f.v[static_cast<std::size_t>(a * n + i)] = x[index({RedKind::V, i, a})];
        f.vb[static_cast<std::size_t>(a * n + i)] = x[index({RedKind::Vbar, i, a})];
        f.U[static_cast<std::size_t>(i)] += x[index({RedKind::V, i, a})];
      }
    const double e2g = std::exp(2.0 * gamma);
    f.L.resize(nn);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        C F(0.0);
        for (long a = 0; a < d; ++a) F += f.V(a, i) * f.Vb(a, j);
        f.L[static_cast<std::size_t>(i * n + j)] = F / (C(e2g) * f.Q[static_cast<std::size_t>(j)] / f.Q[static_cast<std::size_t>(i)] - C(1.0));
      }
    std::vector<C> S0(nn);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        C s(0.0);
        for (long mu = 0; mu < d; ++mu) {
          for (long nu = 0; nu < d; ++nu) s += C(0.25 * sgn(nu - mu)) * f.V(nu, i) * f.V(mu, j);
          s -= C(0.25 + 0.5 * static_cast<double>(d - 1 - mu)) * f.V(mu, i) * f.Vb(mu, j);
        }
        S0[static_cast<std::size_t>(i * n + j)] = s - C(0.5 * static_cast<double>(d)) * f.Lm(i, j);
      }
    f.S.resize(nn);
    for (std::size_t k = 0; k < nn; ++k) f.S[k] = S0[k] - num::conj(S0[k]);
    f.R.resize(static_cast<std::size_t>(d) * nn);
    for (long a = 0; a < d; ++a)
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
          C r = f.Lm(i, j) + C(0.5) * f.V(a, i) * f.Vb(a, j);
          for (long k = 0; k < d; ++k) {
            r -= C(0.5 * sgn(k - a)) * f.V(k, i) * f.V(a, j);
            if (k < a) r += f.V(k, i) * f.Vb(k, j);
          }
          f.R[static_cast<std::size_t>((a * n + i) * n + j)] = r;
        }
    return f;
  }

  // {v(a)_i, v(c)_j}
  template <class C>
  static C vv(const Fields<C>& f, long a, long i, long c, long j) {
    const C I(cplx(0.0, 1.0));
    const C& Ui = f.U[static_cast<std::size_t>(i)];
    const C& Uj = f.U[static_cast<std::size_t>(j)];
    C out = I * C(sgn(c - a)) * f.V(a, j) * f.V(c, i) + I * (f.V(a, i) / Ui) * (f.V(c, j) / Uj) * f.Sm(i, j) +
            I * (f.V(c, j) / Uj) * f.Rm(a, i, j) - I * (f.V(a, i) / Ui) * f.Rm(c, j, i);
    if (i != j)
      out += C(0.5) * I * f.coth_q(i, j) *
             (C(2.0) * f.V(a, j) * f.V(c, i) + f.V(a, i) * f.V(c, j) - (Ui / Uj) * f.V(a, j) * f.V(c, j) - (Uj / Ui) * f.V(a, i) * f.V(c, i));
    return out;
  }

  // {v(a)_i, conj v(e)_j}
  template <class C>
  static C vvbar(const Fields<C>& f, long a, long i, long e, long j) {
    const C I(cplx(0.0, 1.0));
    const C& Ui = f.U[static_cast<std::size_t>(i)];
    const C& Uj = f.U[static_cast<std::size_t>(j)];
    C out(0.0);
    if (a == e) {
      C s = f.V(a, i) * f.Vb(e, j) + C(2.0) * f.Lm(i, j);
      for (long k = 0; k < a; ++k) s += C(2.0) * f.V(k, i) * f.Vb(k, j);
      out += I * s;
    }
    if (i != j)
      out += C(0.5) * I * f.coth_q(i, j) * (-(f.V(a, i) * f.Vb(e, j)) + (Ui / Uj) * f.V(a, j) * f.Vb(e, j) + (Uj / Ui) * f.V(a, i) * f.Vb(e, i));
    out -= I * (f.V(a, i) / Ui) * (f.Vb(e, j) / Uj) * f.Sm(i, j);
    out -= I * (f.Vb(e, j) / Uj) * f.Rm(a, i, j);
    out -= I * (f.V(a, i) / Ui) * num::conj(f.Rm(e, j, i));
    return out;
  }

  template <class C>
  C pair(const Fields<C>& f, const RedCoord& x, const RedCoord& y) const {
    using K = RedKind;
    if (x.kind == K::Q && y.kind == K::Q) return C(0.0);
    if (x.kind == K::Q) return -pair(f, y, x);
    if (y.kind == K::Q) {
      if (x.i != y.i) return C(0.0);
      return x.kind == K::V ? -f.V(x.alpha, x.i) : -f.Vb(x.alpha, x.i);
    }
    if (x.kind == K::V && y.kind == K::V) return vv(f, x.alpha, x.i, y.alpha, y.i);
    if (x.kind == K::V && y.kind == K::Vbar) return vvbar(f, x.alpha, x.i, y.alpha, y.i);
    if (x.kind == K::Vbar && y.kind == K::V) return -vvbar(f, y.alpha, y.i, x.alpha, x.i);
    return num::conj(vv(f, x.alpha, x.i, y.alpha, y.i));
  }

  template <class C>
  std::vector<C> tensor(const std::vector<C>& x) const {
    Fields<C> f = fields(x);
    const std::size_t N = size();
    std::vector<C> out(N * N);
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b) out[a * N + b] = pair(f, coord(a), coord(b));
    return out;
  }
};

inline ReducedSystem reduced_system(const SlicePoint& s) {
  return {static_cast<long>(s.q.size()), static_cast<long>(s.v.cols()), s.gamma};
}

inline void check_slice(const SlicePoint& s) {
  check_regular(s.q, 1e-6);
  if (!(s.U().real().minCoeff() > 0.0) || s.U().imag().cwiseAbs().maxCoeff() > 1e-12 * s.v.cwiseAbs().maxCoeff())
    throw DomainError("not a gauge slice point: sum_alpha v(alpha) must be real positive");
}

// Single reduced bracket {x, y}_red at a slice point.
inline cplx reduced_structure(const SlicePoint& s, const RedCoord& x, const RedCoord& y) {
  check_slice(s);
  ReducedSystem sys = reduced_system(s);
  sys.index(x);
  sys.index(y);
  return sys.pair(sys.fields(sys.coords(s)), x, y);
}

// Whole reduced tensor over the formal coordinates.
inline CMat reduced_tensor(const SlicePoint& s) {
  check_slice(s);
  ReducedSystem sys = reduced_system(s);
  return tensor_at(sys, sys.coords(s));
}

// Reduced bracket of two functions of the formal slice coordinates.
template <class F, class G>
cplx reduced_bracket(const SlicePoint& s, F&& f, G&& g) {
  check_slice(s);
  ReducedSystem sys = reduced_system(s);
  return bracket_of(sys, sys.coords(s), f, g);
}

// Hamiltonian derivative {x, H}_red for every formal coordinate x.
template <class H>
CVec reduced_vector_field(const SlicePoint& s, H&& h) {
  check_slice(s);
  ReducedSystem sys = reduced_system(s);
  auto x = sys.coords(s);
  return tensor_at(sys, x) * formal_gradient(sys, x, h);
}

// Templated evaluation functions on the slice coordinates.
template <class C>
C slice_F(const ReducedSystem& sys, const std::vector<C>& x, long i, long j) {
  C F(0.0);
  for (long a = 0; a < sys.d; ++a) F += x[sys.index({RedKind::V, i, a})] * x[sys.index({RedKind::Vbar, j, a})];
  return F;
}

template <class C>
C slice_L(const ReducedSystem& sys, const std::vector<C>& x, long i, long j) {
  const C I(cplx(0.0, 1.0));
  C Qi = num::exp(I * x[sys.index({RedKind::Q, i})]), Qj = num::exp(I * x[sys.index({RedKind::Q, j})]);
  return slice_F(sys, x, i, j) / (C(std::exp(2.0 * sys.gamma)) * Qj / Qi - C(1.0));
}

template <class C>
C slice_hamiltonian(const ReducedSystem& sys, const std::vector<C>& x) {
  C h(0.0);
  for (long k = 0; k < sys.n; ++k) h += slice_F(sys, x, k, k);
  return h;
}

// Closed form of the collective spin brackets {F_ij, F_kl}_red.
inline cplx collective_bracket(const SlicePoint& s, long i, long j, long k, long l) {
  check_slice(s);
  const long n = static_cast<long>(s.q.size());
  for (long x : {i, j, k, l})
    if (x < 0 || x >= n) throw IndexError("collective_bracket: index out of range");
  ReducedSystem sys = reduced_system(s);
  auto f = sys.fields(sys.coords(s));
  CMat F = s.F();
  CVec U = s.U();
  const cplx I(0.0, 1.0), ig(0.0, s.gamma);
  auto c = [&](long a, long b) { return a == b ? cplx(0.0) : cplx(1.0 / std::tan(0.5 * (s.q(a) - s.q(b)))); };
  auto cg = [&](long a, long b) { return 1.0 / std::tan(cplx(0.5 * (s.q(a) - s.q(b))) - ig); };
  auto Sx = [&](long a, long b) { return f.Sm(a, b) / (U(a) * U(b)); };
  cplx out = I * (Sx(i, k) - Sx(l, j) + Sx(k, j) - Sx(i, l)) * F(i, j) * F(k, l);
  out += 0.5 * (c(i, k) + c(j, l) + c(k, j) + c(l, i)) * F(i, j) * F(k, l);
  out += (c(i, k) + c(j, l) - cg(j, k) + cg(l, i)) * F(i, l) * F(k, j);
  out += 0.5 * (c(k, i) - cg(l, i)) * (U(k) / U(i)) * F(i, j) * F(i, l);
  out += 0.5 * (c(j, k) + cg(l, j)) * (U(k) / U(j)) * F(i, j) * F(j, l);
  out += 0.5 * (c(k, i) + cg(j, k)) * (U(i) / U(k)) * F(k, j) * F(k, l);
  out += 0.5 * (c(i, l) - cg(j, l)) * (U(i) / U(l)) * F(l, j) * F(k, l);
  out += 0.5 * (c(i, l) - cg(i, k)) * (U(l) / U(i)) * F(i, j) * F(k, i);
  out += 0.5 * (c(l, j) + cg(j, k)) * (U(l) / U(j)) * F(i, j) * F(k, j);
  out += 0.5 * (c(j, k) + cg(k, i)) * (U(j) / U(k)) * F(i, k) * F(k, l);
  out += 0.5 * (c(l, j) - cg(l, i)) * (U(j) / U(l)) * F(i, l) * F(k, l);
  return out;
}

// {F_ij, F_kl}_red from the reduced tensor by the Leibniz rule.
inline cplx collective_bracket_leibniz(const SlicePoint& s, long i, long j, long k, long l) {
  ReducedSystem sys = reduced_system(s);
  return reduced_bracket(
      s, [&](const auto& x) { return slice_F(sys, x, i, j); }, [&](const auto& x) { return slice_F(sys, x, k, l); });
}

// n^2 x n^2 matrices acting on C^n (x) C^n: entry ((i,k),(j,l)) is the E_ij (x) E_kl coefficient.
inline Eigen::Index tensor_index(Eigen::Index n, Eigen::Index a, Eigen::Index b) { return a * n + b; }

inline CMat kron(const CMat& A, const CMat& B) {
  const Eigen::Index n = A.rows();
  CMat K(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) = A(i, j) * B;
  return K;
}

inline CMat swap_tensor_factors(const CMat& X) {
  const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(X.rows()))));
  CMat Y(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index l = 0; l < n; ++l) Y(k * n + i, l * n + j) = X(i * n + k, j * n + l);
  return Y;
}

struct LaxStructure {
  CMat r12, s12, t12;
};

// Coefficient of i sum_a E_aa (x) E_aa in r12. The printed value 1 does not
// reproduce the Leibniz bracket; 1/2 does.
enum class LaxVariant { corrected, as_printed };

inline LaxStructure lax_structure(const SlicePoint& s, LaxVariant variant = LaxVariant::corrected) {
  check_slice(s);
  const Eigen::Index n = s.q.size();
  ReducedSystem sys = reduced_system(s);
  auto f = sys.fields(sys.coords(s));
  CVec U = s.U();
  const cplx I(0.0, 1.0);
  CVec Q(n);
  for (Eigen::Index a = 0; a < n; ++a) Q(a) = std::polar(1.0, s.q(a));
  LaxStructure out{CMat::Zero(n * n, n * n), CMat::Zero(n * n, n * n), CMat()};
  auto add = [n](CMat& M, Eigen::Index a, Eigen::Index b, Eigen::Index c, Eigen::Index e, cplx w) {
    M(tensor_index(n, a, c), tensor_index(n, b, e)) += w;  // w E_ab (x) E_ce
  };
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const cplx Sab = I * f.Sm(a, b) / (U(a) * U(b));
      add(out.r12, a, a, b, b, Sab);
      add(out.s12, a, a, b, b, -Sab);
      if (a == b) continue;
      const cplx wb = I * Q(b) / (Q(a) - Q(b)), wa = I * Q(a) / (Q(a) - Q(b));
      add(out.r12, a, a, b, b, wb);
      add(out.r12, a, a, b, a, -wb * U(b) / U(a));
      add(out.r12, a, b, b, b, -wa * U(a) / U(b));
      add(out.r12, a, b, b, a, 2.0 * wa);
      add(out.s12, a, a, a, b, wa * U(b) / U(a));
      add(out.s12, a, a, b, b, -wa);
      add(out.s12, a, b, b, b, wa * U(a) / U(b));
    }
  for (Eigen::Index a = 0; a < n; ++a) {
    add(out.r12, a, a, a, a, variant == LaxVariant::as_printed ? I : 0.5 * I);
    add(out.s12, a, a, a, a, 0.5 * I);
  }
  out.t12 = -out.s12 + swap_tensor_factors(out.s12) - out.r12;
  return out;
}

// {L_1, L_2}_red assembled by the Leibniz rule from the reduced tensor.
inline CMat lax_bracket(const SlicePoint& s) {
  check_slice(s);
  const long n = static_cast<long>(s.q.size());
  ReducedSystem sys = reduced_system(s);
  auto x = sys.coords(s);
  CMat P = tensor_at(sys, x);
  std::vector<Eigen::VectorXcd> grad;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) grad.push_back(formal_gradient(sys, x, [&](const auto& y) { return slice_L(sys, y, i, j); }));
  CMat B(n * n, n * n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long k = 0; k < n; ++k)
        for (long l = 0; l < n; ++l)
          B(i * n + k, j * n + l) = contract(grad[static_cast<std::size_t>(i * n + j)], P, grad[static_cast<std::size_t>(k * n + l)]);
  return B;
}

inline CMat lax_rhs(const SlicePoint& s, LaxVariant variant = LaxVariant::corrected) {
  const Eigen::Index n = s.q.size();
  LaxStructure r = lax_structure(s, variant);
  CMat L = s.L(), Id = CMat::Identity(n, n);
  CMat L1 = kron(L, Id), L2 = kron(Id, L);
  return r.r12 * L1 * L2 + L1 * L2 * r.t12 - L1 * swap_tensor_factors(r.s12) * L2 + L2 * r.s12 * L1;
}

inline double lax_check(const SlicePoint& s, LaxVariant variant = LaxVariant::corrected) {
  return max_abs(lax_bracket(s) - lax_rhs(s, variant));
}

// {tr L^j, tr L^k}_red via the Leibniz rule: d tr L^m = m (L^{m-1})^T.
inline cplx trace_power_bracket(const SlicePoint& s, int j, int k) {
  if (j < 1 || k < 1) throw DomainError("trace_power_bracket: powers must be positive");
  const Eigen::Index n = s.q.size();
  CMat B = lax_bracket(s), L = s.L();
  CMat Pj = CMat::Identity(n, n), Pk = CMat::Identity(n, n);
  for (int m = 1; m < j; ++m) Pj = Pj * L;
  for (int m = 1; m < k; ++m) Pk = Pk * L;
  cplx out = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index e = 0; e < n; ++e) out += static_cast<double>(j * k) * Pj(b, a) * Pk(e, c) * B(a * n + c, b * n + e);
  return out;
}

// Closed form of the algebra of the invariants I^M_{ab} = v(b)^dagger L^M v(a).
inline cplx invariant_algebra_bracket(const CMat& L, const CMat& v, int M, int N, long a, long b, long c, long e) {
  if (M < 0 || N < 0) throw DomainError("invariant_algebra_bracket: powers must be non-negative");
  const long d = static_cast<long>(v.cols());
  for (long x : {a, b, c, e})
    if (x < 0 || x >= d) throw IndexError("invariant_algebra_bracket: spin label out of range");
  auto I = [&](int k, long x, long y) { return invariants_I(L, v, k, x, y); };
  const cplx i(0.0, 1.0);
  const double dae = delta(a == e), dcb = delta(c == b);
  cplx out = 2.0 * i * dae * I(M + N + 1, c, b) - 2.0 * i * dcb * I(M + N + 1, a, e);
  out += i * (dae - dcb) * I(M, a, b) * I(N, c, e);
  for (long mu = 0; mu < a; ++mu) out += 2.0 * i * dae * I(N, c, mu) * I(M, mu, b);
  for (long la = 0; la < b; ++la) out -= 2.0 * i * dcb * I(M, a, la) * I(N, la, e);
  out += i * sgn(c - a) * I(M, c, b) * I(N, a, e);
  out -= i * sgn(e - b) * I(N, c, b) * I(M, a, e);
  for (int k = 0; k < M; ++k) out += i * (I(k, c, b) * I(M + N - k, a, e) - I(M + N - k, c, b) * I(k, a, e));
  for (int k = 0; k < N; ++k) out += i * (I(k, c, b) * I(M + N - k, a, e) - I(M + N - k, c, b) * I(k, a, e));
  return out;
}

// Templated invariants on the formal coordinates of the extended system.
template <class C>
std::vector<C> ext_matrix(const ExtendedSystem& sys, const std::vector<C>& x, ExtKind kind) {
  std::vector<C> M(static_cast<std::size_t>(sys.n * sys.n));
  for (long i = 0; i < sys.n; ++i)
    for (long j = 0; j < sys.n; ++j) M[static_cast<std::size_t>(i * sys.n + j)] = x[sys.index({kind, i, j})];
  return M;
}

template <class C>
std::vector<C> ext_apply(long n, const std::vector<C>& M, const std::vector<C>& y) {
  std::vector<C> out(static_cast<std::size_t>(n), C(0.0));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) out[static_cast<std::size_t>(i)] += M[static_cast<std::size_t>(i * n + j)] * y[static_cast<std::size_t>(j)];
  return out;
}

// v(b)^dagger A_1 ... A_m v(a) with each A a formal matrix.
template <class C>
C ext_sandwich(const ExtendedSystem& sys, const std::vector<C>& x, const std::vector<std::vector<C>>& factors, long a, long b) {
  std::vector<C> y(static_cast<std::size_t>(sys.n));
  for (long i = 0; i < sys.n; ++i) y[static_cast<std::size_t>(i)] = x[sys.index({ExtKind::V, i, a})];
  for (auto it = factors.rbegin(); it != factors.rend(); ++it) y = ext_apply(sys.n, *it, y);
  C out(0.0);
  for (long i = 0; i < sys.n; ++i) out += x[sys.index({ExtKind::Vbar, i, b})] * y[static_cast<std::size_t>(i)];
  return out;
}

template <class C>
C ext_invariant_I(const ExtendedSystem& sys, const std::vector<C>& x, int k, long a, long b) {
  return ext_sandwich(sys, x, std::vector<std::vector<C>>(static_cast<std::size_t>(k), ext_matrix(sys, x, ExtKind::L)), a, b);
}

// f^{ab}_m = v(b)^dagger g^m v(a)
template <class C>
C ext_f_spin(const ExtendedSystem& sys, const std::vector<C>& x, int m, long a, long b) {
  return ext_sandwich(sys, x, std::vector<std::vector<C>>(static_cast<std::size_t>(m), ext_matrix(sys, x, ExtKind::G)), a, b);
}

// f_m = tr g^m
template <class C>
C ext_f_trace(const ExtendedSystem& sys, const std::vector<C>& x, int m) {
  const long n = sys.n;
  std::vector<C> G = ext_matrix(sys, x, ExtKind::G), P(static_cast<std::size_t>(n * n), C(0.0));
  for (long i = 0; i < n; ++i) P[static_cast<std::size_t>(i * n + i)] = C(1.0);
  for (int k = 0; k < m; ++k) {
    std::vector<C> R(static_cast<std::size_t>(n * n), C(0.0));
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j)
        for (long l = 0; l < n; ++l) R[static_cast<std::size_t>(i * n + j)] += P[static_cast<std::size_t>(i * n + l)] * G[static_cast<std::size_t>(l * n + j)];
    P = R;
  }
  C t(0.0);
  for (long i = 0; i < n; ++i) t += P[static_cast<std::size_t>(i * n + i)];
  return t;
}

// Tensor-contracted {I^M_{ab}, I^N_{ce}} on the extended phase space.
inline cplx invariant_bracket_oracle(const CMat& g, const CMat& L, const CMat& v, int M, int N, long a, long b, long c, long e) {
  ExtendedSystem sys{static_cast<long>(L.rows()), static_cast<long>(v.cols())};
  return bracket_of(
      sys, sys.coords(g, L, v), [&](const auto& x) { return ext_invariant_I(sys, x, M, a, b); },
      [&](const auto& x) { return ext_invariant_I(sys, x, N, c, e); });
}

struct FBrackets {
  cplx ff;        // {f_M, f_N}
  cplx fspin_f;   // {f^{ab}_M, f_N}
  cplx fspin_fspin;  // {f^{ab}_M, f^{ce}_N}
};

// Closed forms of the brackets of f_m = tr g^m and f^{ab}_m = v(b)^dagger g^m v(a).
inline FBrackets unreduced_f_brackets(const CMat& g, const CMat& L, const CMat& v, int M, int N, long a, long b, long c, long e) {
  if (M < 0 || N < 0) throw DomainError("unreduced_f_brackets: powers must be non-negative");
  const long n = static_cast<long>(g.rows());
  auto gp = [&](int m) {
    CMat P = CMat::Identity(n, n);
    for (int k = 0; k < m; ++k) P = P * g;
    return P;
  };
  auto f = [&](int m, long x, long y) { return cplx(v.col(y).dot(gp(m) * v.col(x))); };
  auto phi = [&](long mu, long nu, int p, int r) { return cplx(v.col(nu).dot(gp(p) * L * gp(r) * v.col(mu))); };
  const cplx i(0.0, 1.0);
  FBrackets out;
  out.ff = 0.0;
  out.fspin_f = -2.0 * i * static_cast<double>(N) * f(M + N, a, b);
  const double dae = delta(a == e), dcb = delta(c == b);
  cplx s = 0.0;
  for (int k = 1; k <= M; ++k) s += 2.0 * i * f(k, a, e) * f(M + N - k, c, b);
  for (int k = 1; k <= N; ++k) s -= 2.0 * i * f(k, a, e) * f(M + N - k, c, b);
  s += -i * f(M, a, e) * f(N, c, b) + i * f(N, a, e) * f(M, c, b);
  s += i * sgn(c - a) * f(N, a, e) * f(M, c, b) - i * sgn(e - b) * f(M, a, e) * f(N, c, b);
  s += i * (dae - dcb) * f(M, a, b) * f(N, c, e);
  for (long mu = 0; mu < a; ++mu) s += 2.0 * i * dae * f(N, c, mu) * f(M, mu, b);
  for (long la = 0; la < b; ++la) s -= 2.0 * i * dcb * f(M, a, la) * f(N, la, e);
  s += 2.0 * i * dae * phi(c, b, M, N) - 2.0 * i * dcb * phi(a, e, N, M);
  out.fspin_fspin = s;
  return out;
}

inline FBrackets unreduced_f_oracle(const CMat& g, const CMat& L, const CMat& v, int M, int N, long a, long b, long c, long e) {
  ExtendedSystem sys{static_cast<long>(L.rows()), static_cast<long>(v.cols())};
  auto x = sys.coords(g, L, v);
  auto fM = [&](const auto& y) { return ext_f_trace(sys, y, M); };
  auto fN = [&](const auto& y) { return ext_f_trace(sys, y, N); };
  auto sM = [&](const auto& y) { return ext_f_spin(sys, y, M, a, b); };
  auto sN = [&](const auto& y) { return ext_f_spin(sys, y, N, c, e); };
  return {bracket_of(sys, x, fM, fN), bracket_of(sys, x, sM, fN), bracket_of(sys, x, sM, sN)};
}

// Flattened S1 chart coordinates: y, v(1), Re/Im v(alpha) (alpha = 2..d-1), t, c.
inline RVec s1_flatten(const S1Coords& c) {
  const Eigen::Index n = c.y.size(), d = c.v_low.cols() + 1;
  RVec x(2 * n * d);
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < n; ++j) x(r++) = c.y(j);
  for (Eigen::Index j = 0; j < n; ++j) x(r++) = c.v_low(j, 0).real();
  for (Eigen::Index a = 1; a < d - 1; ++a)
    for (Eigen::Index j = 0; j < n; ++j) {
      x(r++) = c.v_low(j, a).real();
      x(r++) = c.v_low(j, a).imag();
    }
  for (Eigen::Index j = 0; j < n; ++j) x(r++) = c.t(j);
  for (Eigen::Index j = 0; j < n; ++j) x(r++) = c.c(j);
  return x;
}

inline S1Coords s1_unflatten(const RVec& x, Eigen::Index n, Eigen::Index d) {
  S1Coords c;
  c.y.resize(n);
  c.v_low = CMat::Zero(n, d - 1);
  c.t.resize(n);
  c.c.resize(n);
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < n; ++j) c.y(j) = x(r++);
  for (Eigen::Index j = 0; j < n; ++j) c.v_low(j, 0) = x(r++);
  for (Eigen::Index a = 1; a < d - 1; ++a)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = x(r++);
      c.v_low(j, a) = cplx(re, x(r++));
    }
  for (Eigen::Index j = 0; j < n; ++j) c.t(j) = x(r++);
  for (Eigen::Index j = 0; j < n; ++j) c.c(j) = x(r++);
  return c;
}

// Integrals tr L^k, I^k_{11}, Re/Im I^k_{a1} (a = 2..d-1), Re/Im I^k_{d1}, k = 1..n.
inline RVec s1_integrals(const S1Coords& c, double gamma) {
  DressedPoint p = slice_point_S1(c, gamma);
  const Eigen::Index n = c.y.size(), d = p.v.cols();
  RVec out(2 * n * d);
  Eigen::Index r = 0;
  CMat P = CMat::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    P = P * p.L;
    out(r++) = P.trace().real();
  }
  for (int k = 1; k <= n; ++k) out(r++) = invariants_I(p.L, p.v, k, 0, 0).real();
  for (Eigen::Index a = 1; a < d - 1; ++a)
    for (int k = 1; k <= n; ++k) {
      cplx I = invariants_I(p.L, p.v, k, a, 0);
      out(r++) = I.real();
      out(r++) = I.imag();
    }
  for (int k = 1; k <= n; ++k) {
    cplx I = invariants_I(p.L, p.v, k, d - 1, 0);
    out(r++) = I.real();
    out(r++) = I.imag();
  }
  return out;
}

struct RankResult {
  long rank_full = 0, rank_ham = 0, rank_selected = 0;
  std::vector<long> selected;  // indices into the Re/Im I_{d1} block chosen greedily
  RVec singular_values;
};

inline long numeric_rank(const RMat& J, RVec* sv = nullptr) {
  Eigen::JacobiSVD<RMat> svd(J);
  RVec s = svd.singularValues();
  if (sv) *sv = s;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  long r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > 1e-7 * s(0)) ++r;
  return r;
}

// Jacobian ranks of the integrals with respect to the S1 chart coordinates.
inline RankResult jacobian_rank(const S1Coords& c0, double gamma) {
  const Eigen::Index n = c0.y.size(), d = c0.v_low.cols() + 1;
  if (d < 2) throw DomainError("jacobian_rank: requires d >= 2");
  for (Eigen::Index j = 0; j < n; ++j)
    if (!(c0.v_low(j, 0).real() > 0.0) || c0.v_low(j, 0).imag() != 0.0) throw DomainError("jacobian_rank: v(1) must be real positive on S1");
  slice_point_S1(c0, gamma);
  RVec x0 = s1_flatten(c0);
  const Eigen::Index m = x0.size();
  RMat J(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0(k)));
    RVec xp = x0, xm = x0;
    xp(k) += h;
    xm(k) -= h;
    J.col(k) = (s1_integrals(s1_unflatten(xp, n, d), gamma) - s1_integrals(s1_unflatten(xm, n, d), gamma)) / (2.0 * h);
  }
  RankResult out;
  out.rank_full = numeric_rank(J, &out.singular_values);
  out.rank_ham = numeric_rank(J.topRows(n));
  const Eigen::Index base = 2 * n * (d - 1);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < base; ++r) rows.push_back(r);
  for (long pick = 0; pick < n; ++pick) {
    long best = -1;
    double gain = -1.0;
    for (long cand = 0; cand < 2 * n; ++cand) {
      if (std::find(out.selected.begin(), out.selected.end(), cand) != out.selected.end()) continue;
      RMat S(static_cast<Eigen::Index>(rows.size()) + 1, m);
      for (std::size_t r = 0; r < rows.size(); ++r) S.row(static_cast<Eigen::Index>(r)) = J.row(rows[r]);
      S.row(static_cast<Eigen::Index>(rows.size())) = J.row(base + cand);
      Eigen::JacobiSVD<RMat> svd(S);
      const RVec& s = svd.singularValues();
      const double g = s(s.size() - 1) / s(0);
      if (g > gain) {
        gain = g;
        best = cand;
      }
    }
    out.selected.push_back(best);
    rows.push_back(base + best);
  }
  RMat S(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t r = 0; r < rows.size(); ++r) S.row(static_cast<Eigen::Index>(r)) = J.row(rows[r]);
  out.rank_selected = numeric_rank(S);
  return out;
}

}  // namespace spinrs
