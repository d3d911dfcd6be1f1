#include <gtest/gtest.h>

#include "spinrs/gmat.hpp"
#include "spinrs/heisenberg_double.hpp"
#include "test_support.hpp"

using namespace spinrs;

namespace {

const cplx I(0.0, 1.0);

struct ExtPoint {
  CMat g, L, v;
};

ExtPoint random_ext(Rng& r, long n, long d) {
  CMat b = random_upper_positive(r, n);
  return {random_unitary(r, n), b * b.adjoint(), random_cmat(r, n, d)};
}

// Independent oracle for the half-dressed spin brackets, v^a = b_R^{-1} v(a).
cplx half_vv(const CMat& h, long a, long i, long b, long k) {
  return -I * static_cast<double>(sgn(k - i)) * h(k, a) * h(i, b) + I * static_cast<double>(sgn(b - a)) * h(k, a) * h(i, b);
}
cplx half_vvbar(const CMat& h, long a, long i, long b, long k) {
  const long n = h.rows();
  cplx v = 0.0;
  if (i == k) {
    v += I * h(i, a) * std::conj(h(k, b));
    for (long r = k + 1; r < n; ++r) v += 2.0 * I * h(r, a) * std::conj(h(r, b));
  }
  if (a == b) {
    v += I * h(i, a) * std::conj(h(k, b));
    for (long m = 0; m < a; ++m) v += 2.0 * I * h(i, m) * std::conj(h(k, m));
  }
  if (i == k && a == b) v += 2.0 * I;
  return v;
}

// Bracket of two coordinate functions of the (g, b) parametrization assembled
// from (T18)/(T19) by the Leibniz rule: {g_lm, L_jk} with L = b b^dagger.
cplx gL_from_gb(const CMat& g, const CMat& b, long l, long m, long j, long k) {
  cplx s = 0.0;
  for (long q = 0; q < g.rows(); ++q) {
    s += heis_structure_gb(g, b, l, m, j, q, GbVariant::gb) * std::conj(b(k, q));
    s += b(j, q) * heis_structure_gb(g, b, l, m, k, q, GbVariant::g_bbar);
  }
  return s;
}

// Extended structure with the inhomogeneous L term of {v, conj v} removed.
struct Broken : ExtendedSystem {
  template <class C>
  std::vector<C> tensor(const std::vector<C>& x) const {
    auto P = ExtendedSystem::tensor(x);
    const std::size_t N = size();
    for (long a = 0; a < d; ++a)
      for (long i = 0; i < n; ++i) {
        std::size_t va = index({ExtKind::V, i, a}), vb = index({ExtKind::Vbar, i, a});
        P[va * N + vb] -= C(cplx(0.0, 2.0)) * x[index({ExtKind::L, i, i})];
        P[vb * N + va] += C(cplx(0.0, 2.0)) * x[index({ExtKind::L, i, i})];
      }
    return P;
  }
};

}  // namespace

TEST(Drinfeld, Examples) {
  CMat K1 = CMat::Constant(1, 1, cplx(0.7, 0.2));
  EXPECT_EQ(drinfeld_structure(K1, 0, 0, 0, 0, false), cplx(0.0));
  EXPECT_NEAR(std::abs(drinfeld_structure(CMat::Identity(2, 2), 0, 1, 0, 1, true)), 0.0, 1e-15);
  EXPECT_THROW(drinfeld_structure(K1, 0, 1, 0, 0, false), IndexError);
}

TEST(Drinfeld, AntisymmetryAndReality) {
  auto r = spinrs_test::rng(1);
  const long n = 2;
  for (int s = 0; s < 20; ++s) {
    CMat K = random_cmat(r, n, n);
    double worst = 0.0;
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j)
        for (long k = 0; k < n; ++k)
          for (long l = 0; l < n; ++l) {
            worst = std::max(worst, std::abs(drinfeld_structure(K, i, j, k, l, false) + drinfeld_structure(K, k, l, i, j, false)));
            // {K_ij, conj K_kl} = -{conj K_kl, K_ij} = -conj {K_kl, conj K_ij}
            worst = std::max(worst, std::abs(drinfeld_structure(K, i, j, k, l, true) + std::conj(drinfeld_structure(K, k, l, i, j, true))));
          }
    EXPECT_LT(worst, 1e-14);
  }
}

TEST(HeisGb, Examples) {
  const long n = 3;
  CMat one = CMat::Identity(n, n);
  for (long l = 0; l < n; ++l)
    for (long m = 0; m < n; ++m)
      for (long j = 0; j < n; ++j)
        for (long k = 0; k < n; ++k) {
          cplx expect = I * static_cast<double>(delta(j == l) * delta(l == m) * delta(j == k)) +
                        2.0 * I * static_cast<double>(delta(j < l && l <= k) * delta(j == m) * delta(l == k));
          EXPECT_NEAR(std::abs(heis_structure_gb(one, one, l, m, j, k, GbVariant::gb) - expect), 0.0, 1e-15);
        }
  auto r = spinrs_test::rng(2);
  CMat g = random_unitary(r, n), b = random_upper_positive(r, n);
  for (long l = 0; l < n; ++l)
    for (long m = 0; m < n; ++m) EXPECT_EQ(heis_structure_gb(g, b, l, m, 2, 1, GbVariant::gb), cplx(0.0));
  EXPECT_THROW(heis_structure_gb(g, b, 0, 0, 0, 3, GbVariant::gb), IndexError);
}

TEST(HeisGb, LeibnizMatchesExtendedGL) {
  auto r = spinrs_test::rng(3);
  for (long n = 1; n <= 4; ++n) {
    CMat g = random_unitary(r, n), b = random_upper_positive(r, n);
    CMat L = b * b.adjoint();
    CMat v = CMat::Zero(n, 1);
    double worst = 0.0;
    for (long l = 0; l < n; ++l)
      for (long m = 0; m < n; ++m)
        for (long j = 0; j < n; ++j)
          for (long k = 0; k < n; ++k) {
            cplx closed = extended_structure(g, L, v, {ExtKind::G, l, m}, {ExtKind::L, j, k});
            worst = std::max(worst, std::abs(closed - gL_from_gb(g, b, l, m, j, k)));
          }
    EXPECT_LT(worst, 1e-12) << "n=" << n;
  }
}

TEST(Extended, Examples) {
  auto r = spinrs_test::rng(4);
  ExtPoint p = random_ext(r, 3, 2);
  for (long a = 0; a < 2; ++a)
    for (long i = 0; i < 3; ++i)
      EXPECT_EQ(extended_structure(p.g, p.L, p.v, {ExtKind::V, i, a}, {ExtKind::V, i, a}), cplx(0.0));
  CMat zero = CMat::Zero(3, 2), one = CMat::Identity(3, 3);
  for (long i = 0; i < 3; ++i)
    for (long k = 0; k < 3; ++k)
      for (long l = 0; l < 3; ++l)
        EXPECT_EQ(extended_structure(p.g, one, zero, {ExtKind::V, i, 1}, {ExtKind::L, k, l}), cplx(0.0));
  EXPECT_THROW(extended_structure(p.g, p.L, p.v, {ExtKind::V, 0, 2}, {ExtKind::G, 0, 0}), IndexError);
}

TEST(Extended, LLAntisymmetryScan) {
  auto r = spinrs_test::rng(5);
  ExtPoint p = random_ext(r, 3, 1);
  double worst = 0.0;
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 3; ++j)
      for (long k = 0; k < 3; ++k)
        for (long l = 0; l < 3; ++l) {
          cplx ab = extended_structure(p.g, p.L, p.v, {ExtKind::L, i, j}, {ExtKind::L, k, l});
          cplx ba = extended_structure(p.g, p.L, p.v, {ExtKind::L, k, l}, {ExtKind::L, i, j});
          worst = std::max(worst, std::abs(ab + ba));
        }
  EXPECT_LT(worst, 1e-14);
}

TEST(Extended, AntisymmetryAndRealityRandom) {
  auto r = spinrs_test::rng(6);
  for (int s = 0; s < 200; ++s) {
    const long n = 1 + s % 4, d = 1 + (s / 4) % 3;
    ExtPoint p = random_ext(r, n, d);
    ExtendedSystem sys{n, d};
    Eigen::MatrixXcd P = tensor_at(sys, sys.coords(p.g, p.L, p.v));
    ASSERT_LT(antisymmetry_violation(P), 1e-13);
    ASSERT_LT(reality_violation(sys, P), 1e-13);
  }
}

TEST(Extended, JacobiIdentity) {
  auto r = spinrs_test::rng(7);
  ExtendedSystem sys{2, 2};
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    ExtPoint p = random_ext(r, 2, 2);
    worst = std::max(worst, jacobiator_max(sys, sys.coords(p.g, p.L, p.v)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Extended, JacobiIdentityThreeByThree) {
  auto r = spinrs_test::rng(8);
  ExtendedSystem sys{3, 2};
  for (int s = 0; s < 3; ++s) {
    ExtPoint p = random_ext(r, 3, 2);
    EXPECT_LT(jacobiator_max(sys, sys.coords(p.g, p.L, p.v)), 1e-9);
  }
}

TEST(Extended, BrokenStructureIsDetected) {
  auto r = spinrs_test::rng(9);
  ExtPoint p = random_ext(r, 2, 2);
  Broken sys{{2, 2}};
  EXPECT_GT(jacobiator_max(sys, sys.coords(p.g, p.L, p.v)), 1e-3);
}

TEST(Extended, HalfDressedTable) {
  auto r = spinrs_test::rng(10);
  for (long n = 1; n <= 3; ++n)
    for (long d = 1; d <= 3; ++d) {
      ExtPoint p = random_ext(r, n, d);
      ExtendedSystem sys{n, d};
      auto x = sys.coords(p.g, p.L, p.v);
      CMat h = cholesky_upper(p.L).triangularView<Eigen::Upper>().solve(p.v);
      auto half = [&](long a, long i, bool bar) {
        return [&sys, a, i, bar](const std::vector<Dual>& xd) {
          GMat<Dual> L(static_cast<std::size_t>(sys.n), static_cast<std::size_t>(sys.n));
          GMat<Dual> v(static_cast<std::size_t>(sys.n), 1);
          for (long k = 0; k < sys.n; ++k) {
            v(static_cast<std::size_t>(k), 0) = xd[sys.index({ExtKind::V, k, a})];
            for (long l = 0; l < sys.n; ++l)
              L(static_cast<std::size_t>(k), static_cast<std::size_t>(l)) = xd[sys.index({ExtKind::L, k, l})];
          }
          Dual hv = upper_solve_g(cholesky_upper_g(L), v)(static_cast<std::size_t>(i), 0);
          return bar ? num::conj(hv) : hv;
        };
      };
      double worst = 0.0;
      for (long a = 0; a < d; ++a)
        for (long i = 0; i < n; ++i)
          for (long b = 0; b < d; ++b)
            for (long k = 0; k < n; ++k) {
              worst = std::max(worst, std::abs(bracket_of(sys, x, half(a, i, false), half(b, k, false)) - half_vv(h, a, i, b, k)));
              worst = std::max(worst, std::abs(bracket_of(sys, x, half(a, i, false), half(b, k, true)) - half_vvbar(h, a, i, b, k)));
            }
      EXPECT_LT(worst, 1e-10) << "n=" << n << " d=" << d;
    }
}

TEST(Dress, Examples) {
  auto r = spinrs_test::rng(11);
  CMat b = random_upper_positive(r, 3), g = random_unitary(r, 3);
  EXPECT_LT(max_abs(dress(CMat::Identity(3, 3), b) - b), 1e-13);
  EXPECT_LT(max_abs(dress(g, CMat::Identity(3, 3)) - CMat::Identity(3, 3)), 1e-13);
}

TEST(Dress, ConjugationIdentity) {
  auto r = spinrs_test::rng(12);
  for (int s = 0; s < 20; ++s) {
    CMat b = random_upper_positive(r, 4), g = random_unitary(r, 4);
    CMat db = dress(g, b);
    EXPECT_LT(max_abs(db * db.adjoint() - g * b * b.adjoint() * g.adjoint()), 1e-12);
  }
}

TEST(DoublePointTest, FactorizationsAgree) {
  auto r = spinrs_test::rng(13);
  for (int s = 0; s < 20; ++s) {
    DoublePoint p = DoublePoint::make(random_unitary(r, 4), random_upper_positive(r, 4));
    EXPECT_LT(max_abs(p.K - p.b_L * p.g_R.adjoint()), 1e-11);
    EXPECT_LT(max_abs(p.K - p.g_L * upper_inverse(p.b_R)), 1e-11);
    EXPECT_GT(eig_hermitian(p.L).values.minCoeff(), 0.0);
  }
}

TEST(FreeFlow, Examples) {
  auto r = spinrs_test::rng(14);
  DoublePoint p = DoublePoint::make(random_unitary(r, 3), random_upper_positive(r, 3));
  CMat W = random_cmat(r, 3, 2);
  auto same = free_flow(p, W, 2, 0.0);
  EXPECT_LT(max_abs(same.point.g_R - p.g_R), 1e-15);
  EXPECT_LT(max_abs(same.W - W), 1e-300);
  DoublePoint q = DoublePoint::make(random_unitary(r, 3), CMat::Identity(3, 3));
  auto f = free_flow(q, W, 1, 0.7);
  EXPECT_LT(max_abs(f.point.g_R - std::exp(cplx(0.0, 0.7)) * q.g_R), 1e-14);
  EXPECT_THROW(free_flow(q, W, 4, 1.0), DomainError);
  EXPECT_THROW(free_flow(q, W, 0, 1.0), DomainError);
}

TEST(FreeFlow, PreservesInvariantsAndUnitarity) {
  auto r = spinrs_test::rng(15);
  const long n = 3, d = 2;
  DoublePoint p = DoublePoint::make(random_unitary(r, n), random_upper_positive(r, n));
  CMat v = random_cmat(r, n, d);
  auto I_km = [&](const CMat& L, int k, long a, long b) {
    CMat Lk = CMat::Identity(n, n);
    for (int m = 0; m < k; ++m) Lk = Lk * L;
    return (v.col(b).adjoint() * Lk * v.col(a)).value();
  };
  for (int k = 1; k <= n; ++k)
    for (double t : {0.5, 3.0, 10.0}) {
      auto f = free_flow(p, CMat::Zero(n, 1), k, t);
      EXPECT_LT(max_abs(f.point.g_R * f.point.g_R.adjoint() - CMat::Identity(n, n)), 1e-11);
      EXPECT_LT(max_abs(f.point.L - p.L), 1e-300);
      for (int m = 0; m <= 2; ++m)
        for (long a = 0; a < d; ++a)
          for (long b = 0; b < d; ++b) EXPECT_EQ(I_km(f.point.L, m, a, b), I_km(p.L, m, a, b));
    }
  auto h = free_flow(p, generator_rs(p.L, 0.4), 2.0);
  EXPECT_LT(max_abs(h.g_R - expm(2.0 * cplx(0.0, 2.0 * std::expm1(0.8)) * p.L) * p.g_R), 1e-10);
}
