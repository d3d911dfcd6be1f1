#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "spinrs/dynamics.hpp"
#include "test_support.hpp"

using namespace spinrs;

namespace {

cplx cot(cplx z) { return std::cos(z) / std::sin(z); }

// Unwrapped sorted phases of a unitary matrix from a generic eigensolver.
std::vector<double> sorted_phases(const CMat& g) {
  Eigen::ComplexEigenSolver<CMat> es(g);
  std::vector<double> out;
  for (Eigen::Index j = 0; j < g.rows(); ++j) out.push_back(std::arg(es.eigenvalues()(j)));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> sorted_wrapped(const RVec& q) {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < q.size(); ++j) out.push_back(wrap_angle(q(j)));
  std::sort(out.begin(), out.end());
  return out;
}

double max_rel_trL_drift(const Trajectory& tr) {
  const RVec& a = tr.samples.front().trL;
  double m = 0.0;
  for (const auto& s : tr.samples) m = std::max(m, (s.trL - a).cwiseQuotient(a).cwiseAbs().maxCoeff());
  return m;
}

// Max disagreement between the two solvers at t in {0.5, 1, 2}: angles, gauge fixed spins, L.
double solver_disagreement(const SlicePoint& s0, double h) {
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s0), h, 2.0, 1);
  EXPECT_FALSE(tr.aborted);
  double m = 0.0;
  for (double t : {0.5, 1.0, 2.0}) {
    SlicePoint ex = exact_solve(s0, t);
    const Sample& sm = tr.samples[static_cast<std::size_t>(std::lround(t / h))];
    SlicePoint rk = gauge_fix_plus(sm.q, sm.v, s0.gamma);
    for (Eigen::Index i = 0; i < s0.q.size(); ++i) m = std::max(m, std::abs(wrap_angle(ex.q(i) - rk.q(i))));
    m = std::max({m, max_abs(ex.v - rk.v), max_abs(ex.L() - sm.L)});
  }
  return m;
}

}  // namespace

TEST(Potential, ValueAtQuarterPeriod) {
  for (double g : {0.1, 0.5, 1.7}) EXPECT_LT(std::abs(potential_V(kPi / 2, g) - cplx(0.0, -std::tanh(g))), 1e-14);
}

TEST(Potential, DifferenceIdentity) {
  auto r = spinrs_test::rng(1);
  for (int k = 0; k < 100; ++k) {
    const double g = uniform(r, 0.1, 2.0);
    double x = uniform(r, -3.0, 3.0);
    if (std::abs(std::sin(x)) < 1e-3) continue;
    const double sx = std::sin(x);
    cplx rhs = 2.0 * std::cos(x) / sx / (1.0 + sx * sx / std::pow(std::sinh(g), 2));
    EXPECT_LT(std::abs(potential_V(x, g) - potential_V(-x, g) - rhs), 1e-12);
  }
}

TEST(Potential, HermiteCotangentIdentity) {
  auto r = spinrs_test::rng(2);
  for (int k = 0; k < 100; ++k) {
    cplx z(uniform(r, -3, 3), uniform(r, -1, 1)), a1(uniform(r, -3, 3), uniform(r, -1, 1)), a2(uniform(r, -3, 3), uniform(r, -1, 1));
    cplx lhs = cot(z - a1) * cot(z - a2);
    cplx rhs = -1.0 + cot(a1 - a2) * cot(z - a1) + cot(a2 - a1) * cot(z - a2);
    EXPECT_LT(std::abs(lhs - rhs), 1e-11 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Potential, PoleRejected) {
  EXPECT_THROW(potential_V(0.0, 0.5), DomainError);
  EXPECT_THROW(potential_V(kPi, 0.5), DomainError);
}

TEST(EomRhs, SingleParticle) {
  SlicePoint s{RVec::Constant(1, 0.3), CMat::Constant(1, 2, cplx(0.7, 0.0)), 0.4};
  s.v(0, 1) = cplx(0.2, 0.1);
  s = gauge_fix_plus(s);
  Rhs r = eom_rhs(s);
  EXPECT_NEAR(r.qdot(0), 2.0 * s.F()(0, 0).real(), 1e-15);
  EXPECT_LT(max_abs(r.vdot), 1e-15);
}

TEST(EomRhs, PhaseConditionPreserved) {
  auto r = spinrs_test::rng(3);
  for (int k = 0; k < 100; ++k) {
    SlicePoint s = random_slice_point(r, 2 + k % 3, 1 + k % 3, uniform(r, 0.2, 1.2));
    Rhs d = eom_rhs(s);
    CVec dU = d.vdot.rowwise().sum();
    EXPECT_LT(dU.imag().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EomRhs, MatchesKForm) {
  auto r = spinrs_test::rng(4);
  for (int k = 0; k < 50; ++k) {
    SlicePoint s = random_slice_point(r, 2 + k % 3, 2, uniform(r, 0.2, 1.2));
    Rhs a = eom_rhs(s), b = eom_rhs_kform(s);
    EXPECT_LT(max_abs(a.vdot - b.vdot), 1e-12);
    EXPECT_LT((a.qdot - b.qdot).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(EomRhs, KMatrixIsAntiHermitian) {
  auto r = spinrs_test::rng(5);
  SlicePoint s = random_slice_point(r, 4, 2, 0.6);
  CMat K = k_matrix(s.q, s.F(), s.gamma);
  EXPECT_LT(max_abs(K + K.adjoint()), 1e-13);
}

TEST(EomRhs, SecondOrderEquationFromFirstOrder) {
  // qddot_i / 2 = dF_ii/dt with Fdot = Z F - F Z from vdot = Z v.
  auto r = spinrs_test::rng(6);
  for (int k = 0; k < 20; ++k) {
    SlicePoint s = random_slice_point(r, 3, 2, 0.7);
    Rhs d = eom_rhs(s);
    CMat Fdot = d.vdot * s.v.adjoint() + s.v * d.vdot.adjoint();
    RVec rhs = newton_rhs(s.q, s.F(), s.gamma);
    EXPECT_LT((Fdot.diagonal().real() - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EomRhs, CollisionRejected) {
  SlicePoint s{RVec::Zero(2), CMat::Ones(2, 1), 0.5};
  s.q(1) = 1e-8;
  EXPECT_THROW(eom_rhs(s), DomainError);
}

TEST(Rk4, SingleParticleLinear) {
  SlicePoint s{RVec::Constant(1, 0.2), CMat::Constant(1, 2, cplx(0.5, 0.0)), 0.3};
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s), 1e-2, 3.0, 10);
  ASSERT_FALSE(tr.aborted);
  const double w = 2.0 * s.F()(0, 0).real();
  for (const auto& x : tr.samples) EXPECT_LT(std::abs(wrap_angle(x.q(0) - 0.2 - w * x.t)), 1e-12);
}

TEST(Rk4, RejectsLargeStep) {
  auto r = spinrs_test::rng(7);
  SlicePoint s = random_slice_point(r, 2, 2, 0.5);
  EXPECT_THROW(rk4_integrate(GaugeState::from_slice(s), 0.05, 1.0, 1), DomainError);
}

TEST(Rk4, ConservationOnReferenceRun) {
  SlicePoint s0 = reference_state(3, 2, 0.5);
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s0), 1e-3, 5.0, 10);
  ASSERT_FALSE(tr.aborted);
  EXPECT_LT(max_rel_trL_drift(tr), 1e-7);
  const Sample& a = tr.samples.front();
  for (const auto& x : tr.samples) {
    EXPECT_LT(x.residual, 1e-7);
    EXPECT_LT(x.gauge_imag, 1e-8);
    EXPECT_GE(x.min_qdot, 0.0);
    EXPECT_LT(std::abs(x.qdot_sum - a.qdot_sum), 1e-8);
  }
  // Hamiltonian: sum qdot = 2 (e^{2 gamma} - 1) tr L.
  EXPECT_NEAR(a.qdot_sum, 2.0 * std::expm1(1.0) * a.trL(0), 1e-12);
}

TEST(Rk4, FourthOrderConvergence) {
  SlicePoint s0 = reference_state(3, 2, 0.5);
  const double e1 = solver_disagreement(s0, 1e-2), e2 = solver_disagreement(s0, 5e-3);
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Rk4, AgreesWithExactSolver) {
  SlicePoint s0 = reference_state(3, 2, 0.5);
  EXPECT_LT(solver_disagreement(s0, 1e-3), 1e-6);
  auto r = spinrs_test::rng(8);
  SlicePoint s1 = random_slice_point(r, 2, 3, 0.4);
  EXPECT_LT(solver_disagreement(s1, 1e-3), 1e-6);
}

TEST(ExactSolve, ZeroTimeIsIdentity) {
  auto r = spinrs_test::rng(9);
  SlicePoint s0 = random_slice_point(r, 3, 2, 0.5);
  SlicePoint s = exact_solve(s0, 0.0);
  EXPECT_LT((s.q - s0.q).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(max_abs(s.v - s0.v), 1e-14);
}

TEST(ExactSolve, PhasesMatchDirectEigensolve) {
  auto r = spinrs_test::rng(10);
  for (int k = 0; k < 5; ++k) {
    SlicePoint s0 = random_slice_point(r, 3, 2, 0.5);
    CMat L0 = s0.L();
    for (double t : {0.3, 1.1}) {
      CMat g = expm(cplx(0.0, 2.0 * std::expm1(2.0 * s0.gamma) * t) * L0) * diag_phase(s0.q);
      std::vector<double> direct = sorted_phases(g);
      std::vector<double> solved;
      try {
        solved = sorted_wrapped(exact_solve(s0, t).q);
      } catch (const EigenCollisionError&) {
        continue;
      }
      for (std::size_t j = 0; j < direct.size(); ++j) EXPECT_LT(std::abs(wrap_angle(direct[j] - solved[j])), 1e-10);
    }
  }
}

TEST(ExactSolve, InvariantsConstant) {
  auto r = spinrs_test::rng(11);
  SlicePoint s0 = random_slice_point(r, 3, 2, 0.6);
  CMat L0 = s0.L();
  for (double t : {0.4, 1.5}) {
    SlicePoint s = exact_solve(s0, t);
    CMat L = s.L();
    for (int k = 0; k <= 2; ++k)
      for (Eigen::Index a = 0; a < 2; ++a)
        for (Eigen::Index b = 0; b < 2; ++b)
          EXPECT_LT(std::abs(invariants_I(L, s.v, k, a, b) - invariants_I(L0, s0.v, k, a, b)), 1e-10);
    EXPECT_LT(constraint_residual(s.dressed()), 1e-10);
  }
}

TEST(ExactSolve, NegativeTimeInvertsForward) {
  auto r = spinrs_test::rng(12);
  SlicePoint s0 = random_slice_point(r, 3, 2, 0.5);
  SlicePoint back = exact_solve(exact_solve(s0, 0.7), -0.7);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(std::abs(wrap_angle(back.q(i) - s0.q(i))), 1e-10);
  EXPECT_LT(max_abs(back.v - s0.v), 1e-10);
}

TEST(Newton, SingleParticleZero) {
  SlicePoint s{RVec::Constant(1, 0.2), CMat::Constant(1, 2, cplx(0.5, 0.0)), 0.3};
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s), 1e-2, 0.1, 1);
  EXPECT_LT(newton_residual(tr), 1e-9);
}

TEST(Newton, DecoupledPairHasNoAcceleration) {
  CMat v = CMat::Zero(2, 2);
  v(0, 0) = 0.6;
  v(1, 1) = 0.4;
  SlicePoint s{RVec(2), v, 0.5};
  s.q << 1.0, -1.0;
  EXPECT_LT(newton_rhs(s.q, s.F(), s.gamma).cwiseAbs().maxCoeff(), 1e-15);
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s), 1e-2, 0.2, 1);
  EXPECT_LT(newton_residual(tr), 1e-9);
}

TEST(Newton, ReferenceRun) {
  Trajectory tr = rk4_integrate(GaugeState::from_slice(reference_state(3, 2, 0.5)), 1e-3, 5.0, 1);
  EXPECT_LT(newton_residual(tr), 1e-6);
}

TEST(Newton, TooFewSamples) {
  SlicePoint s{RVec::Constant(1, 0.2), CMat::Constant(1, 2, cplx(0.5, 0.0)), 0.3};
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s), 1e-2, 0.02, 1);
  EXPECT_THROW(newton_residual(tr), DomainError);
}

TEST(ActionAngle, TrivialCases) {
  S1Coords c;
  c.y = RVec::Constant(1, 0.8);
  c.c = RVec::Constant(1, 0.3);
  EXPECT_DOUBLE_EQ(action_angle_flow(c, 1, 0.0).c(0), 0.3);
  EXPECT_NEAR(action_angle_flow(c, 1, 1.5).c(0), 0.3 + 0.8 * 1.5, 1e-15);
}

TEST(ActionAngle, ExactSolveMatchesLinearFlow) {
  const double gamma = 0.5;
  for (int k : {1, 2}) {
    S1Coords c0 = reference_s1_coords(3, 2, gamma);
    SlicePoint s0 = to_q_slice(slice_point_S1(c0, gamma));
    for (double t : {0.25, 0.5, 1.0}) {
      SlicePoint s = exact_solve(s0, t, power_rate(k));
      S1Coords c = slice_point_S1_inverse(to_s_gauge(s.dressed()));
      S1Coords expect = action_angle_flow(c0, k, t);
      for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(wrap_angle(c.c(j) - expect.c(j))), 1e-8) << "k=" << k << " t=" << t;
      EXPECT_LT((c.y - c0.y).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT(max_abs(c.v_low - c0.v_low), 1e-9);
      for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(wrap_angle(c.t(j) - c0.t(j))), 1e-9);
    }
  }
}
