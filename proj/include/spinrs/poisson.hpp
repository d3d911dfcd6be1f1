#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dual.hpp"

// Generic machinery for Poisson structures given by closed-form brackets of
// complex coordinate functions.
//
// A system exposes a list of "formal" complex coordinates x_0..x_{N-1} that is
// closed under complex conjugation: partner(a) is the index of conj(x_a)
// (partner(a) == a for real coordinates). A system provides
//
//   std::size_t size() const;
//   std::size_t partner(std::size_t a) const;
//   template <class C> std::vector<C> tensor(const std::vector<C>& x) const;
//
// where tensor returns the row-major N x N array of brackets {x_a, x_b}.
// Derivatives along real directions are taken with Dual numbers and turned
// into Wirtinger derivatives with respect to the formal coordinates, so that
// {F, G} = sum_ab dF/dx_a {x_a, x_b} dG/dx_b for any smooth F, G.

namespace spinrs {

struct RealDirection {
  std::size_t var;  // formal coordinate that is perturbed
  cplx seed;        // dx_var; the partner receives conj(seed)
};

template <class Sys>
std::vector<RealDirection> real_directions(const Sys& sys) {
  std::vector<RealDirection> dirs;
  for (std::size_t a = 0; a < sys.size(); ++a) {
    std::size_t p = sys.partner(a);
    if (p == a) {
      dirs.push_back({a, cplx(1.0, 0.0)});
    } else if (a < p) {
      dirs.push_back({a, cplx(1.0, 0.0)});
      dirs.push_back({a, cplx(0.0, 1.0)});
    }
  }
  return dirs;
}

template <class Sys>
std::vector<Dual> seeded(const Sys& sys, const std::vector<cplx>& x, const RealDirection& dir) {
  std::vector<Dual> xd(x.begin(), x.end());
  std::size_t p = sys.partner(dir.var);
  xd[dir.var].d = dir.seed;
  if (p != dir.var) xd[p].d = std::conj(dir.seed);
  return xd;
}

// Combine real-direction derivatives (ordered as real_directions) into
// derivatives with respect to the formal coordinates.
template <class Sys, class T>
std::vector<T> wirtinger(const Sys& sys, const std::vector<T>& dreal) {
  std::vector<T> out(sys.size());
  std::size_t r = 0;
  const cplx I(0.0, 1.0);
  for (std::size_t a = 0; a < sys.size(); ++a) {
    std::size_t p = sys.partner(a);
    if (p == a) {
      out[a] = dreal[r++];
    } else if (a < p) {
      const T& dre = dreal[r];
      const T& dim = dreal[r + 1];
      r += 2;
      out[a] = 0.5 * (dre - I * dim);
      out[p] = 0.5 * (dre + I * dim);
    }
  }
  return out;
}

template <class Sys, class F>
Eigen::VectorXcd formal_gradient(const Sys& sys, const std::vector<cplx>& x, F&& f) {
  auto dirs = real_directions(sys);
  std::vector<cplx> dreal;
  dreal.reserve(dirs.size());
  for (const auto& dir : dirs) dreal.push_back(f(seeded(sys, x, dir)).d);
  auto g = wirtinger(sys, dreal);
  return Eigen::Map<Eigen::VectorXcd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

template <class Sys>
Eigen::MatrixXcd tensor_at(const Sys& sys, const std::vector<cplx>& x) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  auto t = sys.template tensor<cplx>(x);
  Eigen::MatrixXcd P(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) P(a, b) = t[static_cast<std::size_t>(a * n + b)];
  return P;
}

// d/dx_e of the whole tensor, one matrix per formal coordinate e.
template <class Sys>
std::vector<Eigen::MatrixXcd> tensor_derivatives(const Sys& sys, const std::vector<cplx>& x) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  auto dirs = real_directions(sys);
  std::vector<Eigen::MatrixXcd> dreal;
  for (const auto& dir : dirs) {
    auto t = sys.template tensor<Dual>(seeded(sys, x, dir));
    Eigen::MatrixXcd D(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) D(a, b) = t[static_cast<std::size_t>(a * n + b)].d;
    dreal.push_back(D);
  }
  return wirtinger(sys, dreal);
}

inline cplx contract(const Eigen::VectorXcd& gf, const Eigen::MatrixXcd& P, const Eigen::VectorXcd& gg) {
  return (gf.transpose() * P * gg).value();
}

// {F, G} at x for scalar functions F, G of the formal coordinates.
template <class Sys, class F, class G>
cplx bracket_of(const Sys& sys, const std::vector<cplx>& x, F&& f, G&& g) {
  return contract(formal_gradient(sys, x, f), tensor_at(sys, x), formal_gradient(sys, x, g));
}

// Max over coordinate triples of |{x_a,{x_b,x_c}} + cyclic|.
template <class Sys>
double jacobiator_max(const Sys& sys, const std::vector<cplx>& x) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXcd P = tensor_at(sys, x);
  auto dP = tensor_derivatives(sys, x);
  // H[a][b][c] = sum_e P(a,e) dP_e(b,c) = {x_a, {x_b, x_c}}
  std::vector<cplx> H(static_cast<std::size_t>(n * n * n), cplx(0.0));
  auto at = [n](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
    return static_cast<std::size_t>((a * n + b) * n + c);
  };
  for (Eigen::Index e = 0; e < n; ++e) {
    const Eigen::MatrixXcd& D = dP[static_cast<std::size_t>(e)];
    if (D.cwiseAbs().maxCoeff() == 0.0) continue;
    for (Eigen::Index a = 0; a < n; ++a) {
      cplx pae = P(a, e);
      if (pae == cplx(0.0)) continue;
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index c = 0; c < n; ++c) H[at(a, b, c)] += pae * D(b, c);
    }
  }
  double worst = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index c = 0; c < n; ++c)
        worst = std::max(worst, std::abs(H[at(a, b, c)] + H[at(b, c, a)] + H[at(c, a, b)]));
  return worst;
}

// Map from formal coordinates to real ones: a real coordinate x_a stays,
// a conjugate pair (x_a, x_abar) with a < abar becomes (Re x_a, Im x_a).
template <class Sys>
Eigen::MatrixXcd real_coordinate_map(const Sys& sys) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(n, n);
  Eigen::Index r = 0;
  const cplx I(0.0, 1.0);
  for (Eigen::Index a = 0; a < n; ++a) {
    auto p = static_cast<Eigen::Index>(sys.partner(static_cast<std::size_t>(a)));
    if (p == a) {
      T(r++, a) = 1.0;
    } else if (a < p) {
      T(r, a) = 0.5;
      T(r, p) = 0.5;
      T(r + 1, a) = 0.5 / I;
      T(r + 1, p) = -0.5 / I;
      r += 2;
    }
  }
  return T;
}

// The PoissonTensor in real coordinates. The discarded imaginary part is a
// reality check; its size is reported through imag_residual when requested.
template <class Sys>
Eigen::MatrixXd real_tensor(const Sys& sys, const std::vector<cplx>& x, double* imag_residual = nullptr) {
  Eigen::MatrixXcd T = real_coordinate_map(sys);
  Eigen::MatrixXcd R = T * tensor_at(sys, x) * T.transpose();
  if (imag_residual) *imag_residual = R.imag().cwiseAbs().maxCoeff();
  return R.real();
}

inline double antisymmetry_violation(const Eigen::MatrixXcd& P) {
  return (P + P.transpose()).cwiseAbs().maxCoeff();
}

// |conj{x_a, x_b} - {x_abar, x_bbar}| over all pairs.
template <class Sys>
double reality_violation(const Sys& sys, const Eigen::MatrixXcd& P) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  double worst = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      auto pa = static_cast<Eigen::Index>(sys.partner(static_cast<std::size_t>(a)));
      auto pb = static_cast<Eigen::Index>(sys.partner(static_cast<std::size_t>(b)));
      worst = std::max(worst, std::abs(std::conj(P(a, b)) - P(pa, pb)));
    }
  return worst;
}

}  // namespace spinrs
