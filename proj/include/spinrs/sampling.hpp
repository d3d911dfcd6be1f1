#pragma once

#include <cstdint>
#include <random>

#include "linalg.hpp"

namespace spinrs {

using Rng = std::mt19937_64;

// Independent deterministic stream per (seed, index); results never depend
// on how samples are spread over threads.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

inline double uniform(Rng& r, double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); }
inline double gauss(Rng& r) { return std::normal_distribution<double>(0.0, 1.0)(r); }
inline cplx cgauss(Rng& r) {
  double x = gauss(r);
  return {x, gauss(r)};
}

inline CVec random_cvec(Rng& r, Eigen::Index n, double scale = 1.0) {
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * cgauss(r);
  return v;
}

inline CMat random_cmat(Rng& r, Eigen::Index n, Eigen::Index m, double scale = 1.0) {
  CMat A(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) A(i, j) = scale * cgauss(r);
  return A;
}

// Haar-distributed unitary.
inline CMat random_unitary(Rng& r, Eigen::Index n) {
  CMat Q, R;
  gram_schmidt_qr(random_cmat(r, n, n), Q, R);
  return Q;
}

inline CMat random_upper_positive(Rng& r, Eigen::Index n, double offdiag = 0.5) {
  CMat b = CMat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i, i) = std::exp(0.5 * gauss(r));
    for (Eigen::Index j = i + 1; j < n; ++j) b(i, j) = offdiag * cgauss(r);
  }
  return b;
}

inline CMat random_hermitian(Rng& r, Eigen::Index n) {
  CMat A = random_cmat(r, n, n);
  return 0.5 * (A + A.adjoint());
}

inline RVec random_angles(Rng& r, Eigen::Index n) {
  RVec q(n);
  for (Eigen::Index i = 0; i < n; ++i) q(i) = uniform(r, -kPi, kPi);
  return q;
}

// Angles with pairwise circular separation at least min_gap.
inline RVec random_regular_angles(Rng& r, Eigen::Index n, double min_gap = 0.3) {
  for (;;) {
    RVec q = random_angles(r, n);
    if (n < 2 || min_angular_gap(q) > min_gap) return q;
  }
}

}  // namespace spinrs
