#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "spinrs/dynamics.hpp"
#include "spinrs/limits.hpp"
#include "spinrs/redpoisson.hpp"
#include "spinrs/reduction.hpp"
#include "spinrs/spins.hpp"
#include "test_support.hpp"

using namespace spinrs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c, double d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

const double kGamma = 0.5;

const Trajectory& reference_run() {
  static const Trajectory tr = rk4_integrate(GaugeState::from_slice(reference_state(3, 2, kGamma)), 1e-3, 5.0, 1);
  return tr;
}

Outcome constraint_preservation() {
  const Trajectory& tr = reference_run();
  if (tr.aborted) return {false, "aborted: " + tr.abort_reason};
  double worst = 0.0;
  for (const Sample& s : tr.samples) worst = std::max(worst, s.residual);
  return {worst < 1e-7, fmt("max residual %.2e over %.0f samples", worst, static_cast<double>(tr.samples.size()))};
}

Outcome conservation() {
  const Trajectory& tr = reference_run();
  if (tr.aborted) return {false, "aborted: " + tr.abort_reason};
  const Sample& a = tr.samples.front();
  double tr_drift = 0.0, i_drift = 0.0, h_drift = 0.0, min_qdot = a.min_qdot;
  for (const Sample& s : tr.samples) {
    for (Eigen::Index k = 0; k < 3; ++k) tr_drift = std::max(tr_drift, std::abs(s.trL(k) - a.trL(k)) / std::abs(a.trL(k)));
    for (std::size_t m = 0; m < s.I.size(); ++m) {
      const double scale = std::abs(a.I[m]);
      i_drift = std::max({i_drift, std::abs(s.I[m].real() - a.I[m].real()) / scale, std::abs(s.I[m].imag() - a.I[m].imag()) / scale});
    }
    h_drift = std::max(h_drift, std::abs(s.qdot_sum - a.qdot_sum));
    min_qdot = std::min(min_qdot, s.min_qdot);
  }
  const bool ok = tr_drift < 1e-7 && i_drift < 1e-7 && h_drift < 1e-8 && min_qdot >= 0.0;
  return {ok, fmt("tr L^k drift %.2e, I drift %.2e, sum qdot drift %.2e, min qdot %.3f", tr_drift, i_drift, h_drift, min_qdot)};
}

// Max disagreement of the two solvers at t in {0.5, 1, 2}.
double solver_gap(const SlicePoint& s0, double h) {
  Trajectory tr = rk4_integrate(GaugeState::from_slice(s0), h, 2.0, 1);
  if (tr.aborted) return INFINITY;
  double m = 0.0;
  for (double t : {0.5, 1.0, 2.0}) {
    SlicePoint ex = exact_solve(s0, t);
    const Sample& rk = tr.samples[static_cast<std::size_t>(std::lround(t / h))];
    SlicePoint aligned = gauge_fix_plus(rk.q, rk.v, s0.gamma);
    CMat Lex = ex.L();
    const long d = static_cast<long>(s0.v.cols());
    for (Eigen::Index i = 0; i < s0.q.size(); ++i) m = std::max(m, std::abs(wrap_angle(ex.q(i) - aligned.q(i))));
    m = std::max(m, max_abs(ex.v - aligned.v));
    CMat Pe = CMat::Identity(Lex.rows(), Lex.cols()), Pr = Pe;
    for (int k = 1; k <= s0.q.size(); ++k) {
      Pe = Pe * Lex;
      Pr = Pr * rk.L;
      m = std::max(m, std::abs(Pe.trace() - Pr.trace()));
    }
    CMat La = aligned.L();
    for (int k = 0; k <= 2; ++k)
      for (long a = 0; a < d; ++a)
        for (long b = 0; b < d; ++b) {
          m = std::max(m, std::abs(std::abs(invariants_I(Lex, ex.v, k, a, b)) - std::abs(invariants_I(rk.L, rk.v, k, a, b))));
          m = std::max(m, std::abs(invariants_I(Lex, ex.v, k, a, b) - invariants_I(La, aligned.v, k, a, b)));
        }
  }
  return m;
}

Outcome solver_cross_validation() {
  SlicePoint s0 = reference_state(3, 2, kGamma);
  const double fine = solver_gap(s0, 1e-3);
  const double e1 = solver_gap(s0, 1e-2), e2 = solver_gap(s0, 5e-3);
  const double ratio = e1 / e2;
  return {fine < 1e-6 && ratio > 12.0 && ratio < 20.0, fmt("gap(h=1e-3) %.2e; gap(1e-2)/gap(5e-3) = %.2e/%.2e = %.1f", fine, e1, e2, ratio)};
}

Outcome zakrzewski() {
  auto r = spinrs_test::rng(104);
  double jac = 0.0, bb = 0.0, omp = 0.0, cov = 0.0;
  for (int s = 0; s < 100; ++s) {
    const int n = 1 + s % 4;
    CVec w = random_cvec(r, n);
    jac = std::max(jac, jacobiator_max(ZakSystem{static_cast<std::size_t>(n)}, zak_coords(w)));
    CMat b = moment_b(w);
    bb = std::max(bb, max_abs(b * b.adjoint() - CMat::Identity(n, n) - w * w.adjoint()));
    omp = std::max(omp, (symplectic_form(w) * zak_tensor(w) - RMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff());
    CMat g = random_unitary(r, n);
    CVec xi = random_cvec(r, n), eta = random_cvec(r, n);
    cov = std::max(cov, std::abs(pb1(g * w, xi, eta) - pb1(w, g.adjoint() * xi, g.adjoint() * eta) - u_bracket_linear(g, w, xi, eta)));
  }
  const bool ok = jac < 1e-8 && bb < 1e-13 && omp < 1e-10 && cov < 1e-10;
  return {ok, fmt("jacobiator %.2e, b b^+ - 1 - w w^+ %.2e, Omega P - 1 %.2e, covariance %.2e", jac, bb, omp, cov)};
}

Outcome reduced_flow() {
  auto r = spinrs_test::rng(105);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const long n = 2 + k % 2;
    SlicePoint s = random_slice_point(r, n, 2, uniform(r, 0.2, 1.5));
    ReducedSystem sys = reduced_system(s);
    CVec X = reduced_vector_field(s, [&](const auto& y) { return slice_hamiltonian(sys, y); });
    Rhs e = eom_rhs(s);
    for (long i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(X(static_cast<Eigen::Index>(sys.index({RedKind::Q, i}))) - e.qdot(i)));
      for (long a = 0; a < 2; ++a) worst = std::max(worst, std::abs(X(static_cast<Eigen::Index>(sys.index({RedKind::V, i, a}))) - e.vdot(i, a)));
    }
  }
  return {worst < 1e-10, fmt("max |X_H - eom| %.2e over 100 points", worst)};
}

Outcome lax_structure_criterion() {
  auto r = spinrs_test::rng(106);
  double lax = 0.0, inv = 0.0;
  for (int k = 0; k < 50; ++k) {
    SlicePoint s = random_slice_point(r, 2 + k % 3, 2, uniform(r, 0.5, 1.5));
    lax = std::max(lax, lax_check(s));
    for (int j = 1; j <= 3; ++j)
      for (int m = 1; m <= 3; ++m) inv = std::max(inv, std::abs(trace_power_bracket(s, j, m)));
  }
  return {lax < 1e-9 && inv < 1e-9, fmt("r-matrix residual %.2e, max |{tr L^j, tr L^k}| %.2e", lax, inv)};
}

Outcome invariant_algebra() {
  auto r = spinrs_test::rng(107);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    DressedPoint p = act(random_unitary(r, 2), random_slice_point(r, 2, 2, uniform(r, 0.3, 1.0)).dressed());
    for (int M = 0; M <= 2; ++M)
      for (int N = 0; N <= 2; ++N)
        for (long a = 0; a < 2; ++a)
          for (long b = 0; b < 2; ++b)
            for (long c = 0; c < 2; ++c)
              for (long e = 0; e < 2; ++e)
                worst = std::max(worst, std::abs(invariant_algebra_bracket(p.L, p.v, M, N, a, b, c, e) - invariant_bracket_oracle(p.g_R, p.L, p.v, M, N, a, b, c, e)));
  }
  return {worst < 1e-9, fmt("max |closed form - tensor| %.2e", worst)};
}

Outcome degenerate_integrability() {
  auto r = spinrs_test::rng(108);
  int bad = 0, total = 0;
  std::string detail;
  for (auto [n, d] : std::vector<std::pair<long, long>>{{1, 2}, {2, 2}, {3, 2}, {2, 3}}) {
    int ok = 0;
    for (int k = 0; k < 20; ++k) {
      RankResult res = jacobian_rank(random_S1_coords(r, n, d, kGamma), kGamma);
      ++total;
      if (res.rank_full == 2 * n * d - n && res.rank_ham == n)
        ++ok;
      else
        ++bad;
    }
    detail += fmt("(%.0f,%.0f): %.0f/20 ", static_cast<double>(n), static_cast<double>(d), static_cast<double>(ok));
  }
  return {bad == 0, detail + "points with ranks (2nd - n, n)"};
}

Outcome normal_forms() {
  auto r = spinrs_test::rng(109);
  double nf = 0.0, s1 = 0.0, round = 0.0;
  for (int s = 0; s < 20; ++s) {
    const long n = 1 + s % 4, d = 2 + s % 2;
    RVec y(n);
    y(n - 1) = uniform(r, 0.5, 2.0);
    for (long i = n - 2; i >= 0; --i) y(i) = y(i + 1) * std::exp(2 * kGamma) * uniform(r, 1.1, 2.0);
    DressedPoint p = normal_form_d(y, kGamma, d);
    nf = std::max({nf, constraint_residual(p), moment_residual(p)});
    S1Coords c = random_S1_coords(r, 2 + s % 2, d, kGamma);
    DressedPoint q = slice_point_S1(c, kGamma);
    s1 = std::max({s1, constraint_residual(q), moment_residual(q)});
    S1Coords back = slice_point_S1_inverse(q);
    round = std::max({round, (back.y - c.y).cwiseAbs().maxCoeff(), (back.mu - c.mu).cwiseAbs().maxCoeff(), max_abs(back.v_low - c.v_low)});
    for (Eigen::Index j = 0; j < c.y.size(); ++j)
      round = std::max({round, std::abs(wrap_angle(back.t(j) - c.t(j))), std::abs(wrap_angle(back.c(j) - c.c(j)))});
  }
  return {nf < 1e-10 && s1 < 1e-10 && round < 1e-9, fmt("normal form residual %.2e, S1 residual %.2e, round trip %.2e", nf, s1, round)};
}

Outcome action_angle() {
  double worst = 0.0;
  for (int k : {1, 2}) {
    S1Coords c0 = reference_s1_coords(3, 2, kGamma);
    SlicePoint s0 = to_q_slice(slice_point_S1(c0, kGamma));
    for (int m = 1; m <= 10; ++m) {
      const double t = 0.1 * m;
      S1Coords c = slice_point_S1_inverse(to_s_gauge(exact_solve(s0, t, power_rate(k)).dressed()));
      for (Eigen::Index j = 0; j < 3; ++j) worst = std::max(worst, std::abs(wrap_angle(c.c(j) - c0.c(j) - std::pow(c0.y(j), k) * t)));
    }
  }
  return {worst < 1e-8, fmt("max angle error %.2e", worst)};
}

Outcome limits_criterion() {
  auto r = spinrs_test::rng(111);
  QpW c = random_qpW(r, 3, 2, kGamma);
  CMat W = gh_normalize(c.W, kGamma);
  auto rows = gh_limit_check(c.q, c.p, W, {1e-2, 1e-3}, kGamma);
  const double ratio = rows[0].error / rows[1].error;
  double darboux = 0.0, newton = 0.0;
  for (int k = 0; k < 6; ++k) {
    SlicePoint s = random_slice_point(r, 2 + k % 3, 1, uniform(r, 0.3, 1.2));
    DarbouxError e = spinless_darboux_check(s);
    darboux = std::max({darboux, e.q_theta, e.theta_theta});
    newton = std::max(newton, spinless_newton_check(s, 0.2, 1e-3));
  }
  const bool ok = ratio >= 5.0 && ratio <= 20.0 && darboux < 1e-8 && newton < 1e-7;
  return {ok, fmt("scaling-limit error ratio %.1f, Darboux %.2e, Newton %.2e", ratio, darboux, newton)};
}

Outcome newton_residual_criterion() {
  const Trajectory& tr = reference_run();
  if (tr.aborted) return {false, "aborted: " + tr.abort_reason};
  const double res = newton_residual(tr);
  return {res < 1e-6, fmt("max |qddot - rhs| %.2e", res)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"constraint preservation", constraint_preservation},
      {"conservation", conservation},
      {"solver cross-validation", solver_cross_validation},
      {"Zakrzewski structure", zakrzewski},
      {"reduced bracket generates the flow", reduced_flow},
      {"Lax structure", lax_structure_criterion},
      {"invariant algebra", invariant_algebra},
      {"degenerate integrability", degenerate_integrability},
      {"normal forms", normal_forms},
      {"action-angle", action_angle},
      {"limits", limits_criterion},
      {"Newton residual", newton_residual_criterion},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
