#pragma once

#include <cmath>
#include <complex>

namespace spinrs {

using cplx = std::complex<double>;

// Forward-mode dual number over the complex field. The derivative slot
// tracks d/dt along one real direction of the ambient space, so complex
// conjugation acts on both slots.
struct Dual {
  cplx v{};
  cplx d{};

  Dual() = default;
  Dual(double x) : v(x) {}
  Dual(cplx x) : v(x) {}
  Dual(cplx x, cplx dx) : v(x), d(dx) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
};

namespace num {

inline cplx value(const cplx& x) { return x; }
inline cplx value(const Dual& x) { return x.v; }

inline cplx conj(const cplx& x) { return std::conj(x); }
inline Dual conj(const Dual& x) { return {std::conj(x.v), std::conj(x.d)}; }

inline cplx re(const cplx& x) { return {x.real(), 0.0}; }
inline Dual re(const Dual& x) { return {cplx(x.v.real()), cplx(x.d.real())}; }

inline cplx im(const cplx& x) { return {x.imag(), 0.0}; }
inline Dual im(const Dual& x) { return {cplx(x.v.imag()), cplx(x.d.imag())}; }

inline cplx sqrt(const cplx& x) { return std::sqrt(x); }
inline Dual sqrt(const Dual& x) {
  cplx s = std::sqrt(x.v);
  return {s, x.d / (2.0 * s)};
}

inline cplx exp(const cplx& x) { return std::exp(x); }
inline Dual exp(const Dual& x) {
  cplx e = std::exp(x.v);
  return {e, e * x.d};
}

inline cplx log(const cplx& x) { return std::log(x); }
inline Dual log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }

inline cplx sin(const cplx& x) { return std::sin(x); }
inline Dual sin(const Dual& x) { return {std::sin(x.v), std::cos(x.v) * x.d}; }

inline cplx cos(const cplx& x) { return std::cos(x); }
inline Dual cos(const Dual& x) { return {std::cos(x.v), -std::sin(x.v) * x.d}; }

inline cplx cot(const cplx& x) { return std::cos(x) / std::sin(x); }
inline Dual cot(const Dual& x) {
  cplx s = std::sin(x.v);
  return {std::cos(x.v) / s, -x.d / (s * s)};
}

// |x|^2 as a scalar of the same type.
template <class C>
C abs2(const C& x) {
  return re(x * conj(x));
}

// Modulus of a nonzero number.
template <class C>
C abs(const C& x) {
  return sqrt(abs2(x));
}

}  // namespace num

inline double sgn(long x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }
inline double delta(bool c) { return c ? 1.0 : 0.0; }

}  // namespace spinrs
