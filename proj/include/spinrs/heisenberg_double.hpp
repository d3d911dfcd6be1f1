#pragma once

#include <string>
#include <vector>

#include "dual.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "poisson.hpp"

namespace spinrs {

struct DoublePoint {
  CMat g_R, b_R;
  CMat L, b_L, g_L, K;

  static DoublePoint make(const CMat& g_R, const CMat& b_R) {
    DoublePoint p;
    p.g_R = g_R;
    p.b_R = b_R;
    p.L = b_R * b_R.adjoint();
    p.K = reconstruct_K(g_R, b_R);
    Iwasawa d = iwasawa_decompose(p.K);
    p.b_L = d.b_L;
    p.g_L = d.g_L;
    return p;
  }
};

namespace detail {
inline void check_index(long i, long n) {
  if (i < 0 || i >= n) throw IndexError("matrix index out of range");
}
}  // namespace detail

// Drinfeld double brackets {K_ij, K_kl} or, with conj2, {K_ij, conj K_kl}.
inline cplx drinfeld_structure(const CMat& K, long i, long j, long k, long l, bool conj2) {
  const long n = K.rows();
  for (long x : {i, j, k, l}) detail::check_index(x, n);
  const cplx I(0.0, 1.0);
  if (!conj2) {
    return I * K(k, j) * K(i, l) * (delta(i == k) + 2.0 * delta(i > k) - delta(l == j) - 2.0 * delta(l > j));
  }
  cplx v = I * K(i, j) * std::conj(K(k, l)) * (delta(i == k) - delta(j == l));
  if (i == k)
    for (long b = i + 1; b < n; ++b) v += 2.0 * I * K(b, j) * std::conj(K(b, l));
  if (j == l)
    for (long a = 0; a < j; ++a) v -= 2.0 * I * K(i, a) * std::conj(K(k, a));
  return v;
}

enum class GbVariant { gb, g_bbar };

// Heisenberg double brackets {g_lm, b_jk}_+ or {g_lm, conj b_jk}_+ with (g, b) = (g_R, b_R).
inline cplx heis_structure_gb(const CMat& g, const CMat& b, long l, long m, long j, long k, GbVariant variant) {
  const long n = g.rows();
  for (long x : {l, m, j, k}) detail::check_index(x, n);
  const cplx I(0.0, 1.0);
  if (variant == GbVariant::gb) {
    cplx v = I * delta(j == l) * g(l, m) * b(j, k);
    if (j < l && l <= k) v += 2.0 * I * g(j, m) * b(l, k);
    return v;
  }
  cplx v = I * delta(j == l) * g(l, m) * std::conj(b(j, k));
  if (j == l)
    for (long be = j + 1; be <= k; ++be) v += 2.0 * I * g(be, m) * std::conj(b(be, k));
  return v;
}

// Coordinate functions of the extended phase space in (g, L, v) variables.
enum class ExtKind { V = 0, Vbar = 1, G = 2, Gbar = 3, L = 4 };

struct ExtCoord {
  ExtKind kind;
  long i;  // row index (for v: component index)
  long j;  // column index (for v: spin label alpha)
};

// Formal layout: g (n^2), conj g (n^2), L (n^2, conj L_kl = L_lk), v(alpha)_i (nd), conj v (nd).
struct ExtendedSystem {
  long n, d;

  std::size_t size() const { return static_cast<std::size_t>(3 * n * n + 2 * n * d); }

  std::size_t index(const ExtCoord& c) const {
    const long nn = n * n;
    switch (c.kind) {
      case ExtKind::G: return static_cast<std::size_t>(c.i * n + c.j);
      case ExtKind::Gbar: return static_cast<std::size_t>(nn + c.i * n + c.j);
      case ExtKind::L: return static_cast<std::size_t>(2 * nn + c.i * n + c.j);
      case ExtKind::V: return static_cast<std::size_t>(3 * nn + c.j * n + c.i);
      case ExtKind::Vbar: return static_cast<std::size_t>(3 * nn + n * d + c.j * n + c.i);
    }
    throw IndexError("unknown coordinate kind");
  }

  ExtCoord coord(std::size_t a) const {
    const long nn = n * n;
    long x = static_cast<long>(a);
    if (x < nn) return {ExtKind::G, x / n, x % n};
    if (x < 2 * nn) return {ExtKind::Gbar, (x - nn) / n, (x - nn) % n};
    if (x < 3 * nn) return {ExtKind::L, (x - 2 * nn) / n, (x - 2 * nn) % n};
    x -= 3 * nn;
    if (x < n * d) return {ExtKind::V, x % n, x / n};
    x -= n * d;
    return {ExtKind::Vbar, x % n, x / n};
  }

  std::size_t partner(std::size_t a) const {
    ExtCoord c = coord(a);
    switch (c.kind) {
      case ExtKind::G: return index({ExtKind::Gbar, c.i, c.j});
      case ExtKind::Gbar: return index({ExtKind::G, c.i, c.j});
      case ExtKind::L: return index({ExtKind::L, c.j, c.i});
      case ExtKind::V: return index({ExtKind::Vbar, c.i, c.j});
      case ExtKind::Vbar: return index({ExtKind::V, c.i, c.j});
    }
    return a;
  }

  // Values of the formal coordinates at (g, L, v); v is n x d.
  std::vector<cplx> coords(const CMat& g, const CMat& L, const CMat& v) const {
    std::vector<cplx> x(size());
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        x[index({ExtKind::G, i, j})] = g(i, j);
        x[index({ExtKind::Gbar, i, j})] = std::conj(g(i, j));
        x[index({ExtKind::L, i, j})] = L(i, j);
      }
    for (long a = 0; a < d; ++a)
      for (long i = 0; i < n; ++i) {
        x[index({ExtKind::V, i, a})] = v(i, a);
        x[index({ExtKind::Vbar, i, a})] = std::conj(v(i, a));
      }
    return x;
  }

  // Read access to the coordinates, optionally through complex conjugation
  // of every symbol (used to obtain conjugate brackets from the same formula).
  template <class C>
  struct View {
    const ExtendedSystem& s;
    const std::vector<C>& x;
    bool c;
    C I;
    const C& g(long i, long j) const { return x[s.index({c ? ExtKind::Gbar : ExtKind::G, i, j})]; }
    const C& gb(long i, long j) const { return x[s.index({c ? ExtKind::G : ExtKind::Gbar, i, j})]; }
    const C& L(long i, long j) const { return x[s.index({ExtKind::L, c ? j : i, c ? i : j})]; }
    const C& v(long a, long i) const { return x[s.index({c ? ExtKind::Vbar : ExtKind::V, i, a})]; }
    const C& vb(long a, long i) const { return x[s.index({c ? ExtKind::V : ExtKind::Vbar, i, a})]; }
  };

  template <class C>
  static C gg(const View<C>& w, long n, long i, long j, long k, long l) {
    (void)n;
    return w.I * w.g(k, j) * w.g(i, l) * (delta(i == k) + 2.0 * delta(i > k) - delta(l == j) - 2.0 * delta(l > j));
  }
  template <class C>
  static C ggb(const View<C>& w, long n, long i, long j, long k, long l) {
    C v = w.I * w.g(i, j) * w.gb(k, l) * (delta(i == k) - delta(j == l));
    if (i == k)
      for (long b = i + 1; b < n; ++b) v += 2.0 * w.I * w.g(b, j) * w.gb(b, l);
    if (j == l)
      for (long a = 0; a < j; ++a) v -= 2.0 * w.I * w.g(i, a) * w.gb(k, a);
    return v;
  }
  template <class C>
  static C gL(const View<C>& w, long n, long i, long j, long k, long l) {
    C v = w.I * (delta(i == k) + delta(i == l)) * w.g(i, j) * w.L(k, l);
    if (k < i) v += 2.0 * w.I * w.g(k, j) * w.L(i, l);
    if (i == l)
      for (long r = i + 1; r < n; ++r) v += 2.0 * w.I * w.L(k, r) * w.g(r, j);
    return v;
  }
  template <class C>
  static C LL(const View<C>& w, long n, long i, long j, long k, long l) {
    C v = w.I * (2.0 * delta(i > k) + delta(i == k) - 2.0 * delta(j > l) - delta(l == j)) * w.L(i, l) * w.L(k, j);
    v += w.I * (delta(i == l) - delta(j == k)) * w.L(i, j) * w.L(k, l);
    if (i == l)
      for (long r = i + 1; r < n; ++r) v += 2.0 * w.I * w.L(k, r) * w.L(r, j);
    if (j == k)
      for (long r = k + 1; r < n; ++r) v -= 2.0 * w.I * w.L(i, r) * w.L(r, l);
    return v;
  }
  // {v(a)_i, v(b)_k}
  template <class C>
  static C vv(const View<C>& w, long, long a, long i, long b, long k) {
    return w.I * static_cast<double>(sgn(b - a) - sgn(k - i)) * w.v(a, k) * w.v(b, i);
  }
  // {v(a)_i, conj v(b)_k}
  template <class C>
  static C vvb(const View<C>& w, long n, long a, long i, long b, long k) {
    C v(0.0);
    if (i == k) {
      v += w.I * w.v(a, i) * w.vb(b, k);
      for (long r = k + 1; r < n; ++r) v += 2.0 * w.I * w.v(a, r) * w.vb(b, r);
    }
    if (a == b) {
      v += w.I * w.v(a, i) * w.vb(b, k);
      for (long m = 0; m < a; ++m) v += 2.0 * w.I * w.v(m, i) * w.vb(m, k);
      v += 2.0 * w.I * w.L(i, k);
    }
    return v;
  }
  // {v(a)_i, g_kl}
  template <class C>
  static C vg(const View<C>& w, long, long a, long i, long k, long l) {
    C v = -w.I * delta(i == k) * w.v(a, i) * w.g(k, l);
    if (i < k) v -= 2.0 * w.I * w.v(a, k) * w.g(i, l);
    return v;
  }
  // {conj v(b)_i, g_kl}
  template <class C>
  static C vbg(const View<C>& w, long n, long b, long i, long k, long l) {
    C v(0.0);
    if (i == k) {
      v -= w.I * w.vb(b, i) * w.g(k, l);
      for (long r = i + 1; r < n; ++r) v -= 2.0 * w.I * w.vb(b, r) * w.g(r, l);
    }
    return v;
  }
  // {v(a)_i, L_kl}
  template <class C>
  static C vL(const View<C>& w, long n, long a, long i, long k, long l) {
    C v = -w.I * (2.0 * delta(k > i) + delta(i == k)) * w.v(a, k) * w.L(i, l);
    if (i == l) {
      v += w.I * w.v(a, i) * w.L(k, l);
      for (long r = l + 1; r < n; ++r) v += 2.0 * w.I * w.v(a, r) * w.L(k, r);
    }
    return v;
  }

  template <class C>
  C pair(const std::vector<C>& x, const ExtCoord& A, const ExtCoord& B) const {
    if (static_cast<int>(A.kind) > static_cast<int>(B.kind)) return -pair(x, B, A);
    const C I(cplx(0.0, 1.0));
    View<C> w{*this, x, false, I};
    View<C> cw{*this, x, true, -I};
    switch (A.kind) {
      case ExtKind::V:
        switch (B.kind) {
          case ExtKind::V: return vv(w, n, A.j, A.i, B.j, B.i);
          case ExtKind::Vbar: return vvb(w, n, A.j, A.i, B.j, B.i);
          case ExtKind::G: return vg(w, n, A.j, A.i, B.i, B.j);
          case ExtKind::Gbar: return vbg(cw, n, A.j, A.i, B.i, B.j);
          case ExtKind::L: return vL(w, n, A.j, A.i, B.i, B.j);
        }
        break;
      case ExtKind::Vbar:
        switch (B.kind) {
          case ExtKind::Vbar: return vv(cw, n, A.j, A.i, B.j, B.i);
          case ExtKind::G: return vbg(w, n, A.j, A.i, B.i, B.j);
          case ExtKind::Gbar: return vg(cw, n, A.j, A.i, B.i, B.j);
          case ExtKind::L: return vL(cw, n, A.j, A.i, B.j, B.i);
          default: break;
        }
        break;
      case ExtKind::G:
        switch (B.kind) {
          case ExtKind::G: return gg(w, n, A.i, A.j, B.i, B.j);
          case ExtKind::Gbar: return ggb(w, n, A.i, A.j, B.i, B.j);
          case ExtKind::L: return gL(w, n, A.i, A.j, B.i, B.j);
          default: break;
        }
        break;
      case ExtKind::Gbar:
        switch (B.kind) {
          case ExtKind::Gbar: return gg(cw, n, A.i, A.j, B.i, B.j);
          case ExtKind::L: return gL(cw, n, A.i, A.j, B.j, B.i);
          default: break;
        }
        break;
      case ExtKind::L:
        return LL(w, n, A.i, A.j, B.i, B.j);
    }
    throw IndexError("unknown coordinate pair");
  }

  template <class C>
  std::vector<C> tensor(const std::vector<C>& x) const {
    const std::size_t N = size();
    std::vector<C> P(N * N);
    for (std::size_t a = 0; a < N; ++a) {
      ExtCoord A = coord(a);
      for (std::size_t b = 0; b < N; ++b) P[a * N + b] = pair(x, A, coord(b));
    }
    return P;
  }
};

// Closed-form bracket of two coordinate functions of the extended phase space.
inline cplx extended_structure(const CMat& g, const CMat& L, const CMat& v, const ExtCoord& a, const ExtCoord& b) {
  ExtendedSystem sys{g.rows(), v.cols()};
  for (const ExtCoord* c : {&a, &b}) {
    const long rows = sys.n;
    const long cols = (c->kind == ExtKind::V || c->kind == ExtKind::Vbar) ? sys.d : sys.n;
    detail::check_index(c->i, rows);
    detail::check_index(c->j, cols);
  }
  return sys.pair(sys.coords(g, L, v), a, b);
}

inline cplx extended_structure(const DoublePoint& p, const CMat& v, const ExtCoord& a, const ExtCoord& b) {
  return extended_structure(p.g_R, p.L, v, a, b);
}

// Dressing action b -> Lambda_L(g b).
inline CMat dress(const CMat& g, const CMat& b) { return iwasawa_decompose(g * b).b_L; }

// Derivative D h_k(b_R) = i L^k of h_k = tr(L^k)/(2k).
inline CMat generator_power(const CMat& L, int k) {
  CMat Lk = CMat::Identity(L.rows(), L.cols());
  for (int m = 0; m < k; ++m) Lk = Lk * L;
  return cplx(0.0, 1.0) * Lk;
}

// Derivative of the spin RS Hamiltonian (e^{2 gamma} - 1) tr L.
inline CMat generator_rs(const CMat& L, double gamma) {
  return cplx(0.0, 2.0 * std::expm1(2.0 * gamma)) * L;
}

// Free flow on the Heisenberg double: g_R(t) = exp(t V) g_R(0), b_R and the
// primary spins fixed.
inline DoublePoint free_flow(const DoublePoint& p, const CMat& generator, double t) {
  return DoublePoint::make(expm(t * generator) * p.g_R, p.b_R);
}

struct FreeFlowResult {
  DoublePoint point;
  CMat W;
};

inline FreeFlowResult free_flow(const DoublePoint& p, const CMat& W, int k, double t) {
  if (k < 1 || k > p.L.rows()) throw DomainError("free_flow: k must satisfy 1 <= k <= n");
  return {free_flow(p, generator_power(p.L, k), t), W};
}

}  // namespace spinrs
