#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "spinrs/dynamics.hpp"
#include "spinrs/heisenberg_double.hpp"
#include "spinrs/limits.hpp"
#include "spinrs/redpoisson.hpp"
#include "spinrs/reduction.hpp"
#include "spinrs/sampling.hpp"
#include "spinrs/spins.hpp"

namespace spinrs_cli {

using json = nlohmann::ordered_json;
using namespace spinrs;

namespace {

// ---------------------------------------------------------------------------
// Output helpers

double round3(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return std::strtod(buf, nullptr);
}

json jnum(double x) {
  if (!std::isfinite(x)) return json{{"value", nullptr}, {"raw", std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf")}};
  return json{{"value", round3(x)}, {"raw", x}};
}

std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPINRS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("SPINRS_THREADS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

// Runs job(i) for i < count on a capped number of threads; results are
// stored by index so the output does not depend on scheduling.
template <class R>
std::vector<R> parallel_map(long count, const std::function<R(long)>& job) {
  std::vector<R> out(static_cast<std::size_t>(std::max(0L, count)));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < count; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const unsigned nt = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max(1L, count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Config config_from(const Options& o) {
  Config c = o.config ? load_config(*o.config) : default_config();
  if (o.seed) c.seed = *o.seed;
  return c;
}

json config_json(const Config& c) {
  json pairs = json::array();
  for (const auto& [a, b] : c.pairs) pairs.push_back({a + 1, b + 1});
  return json{{"n", c.n},           {"d", c.d},          {"gamma", c.gamma}, {"mode", to_string(c.mode)}, {"random", c.random},
              {"h", c.h},           {"T", c.T},          {"sample_every", c.sample_every}, {"solver", to_string(c.solver)},
              {"k", c.ks},          {"pairs", pairs},    {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// simulate

SlicePoint initial_state(const Config& c) {
  Rng r = make_rng(c.seed, 0);
  switch (c.mode) {
    case InitialMode::s1_coords: {
      S1Coords s = c.random ? random_S1_coords(r, c.n, c.d, c.gamma) : reference_s1_coords(c.n, c.d, c.gamma);
      return to_q_slice(slice_point_S1(s, c.gamma));
    }
    case InitialMode::normal_form: {
      RVec y = reference_s1_coords(c.n, c.d, c.gamma).y;
      if (!c.y.empty()) y = Eigen::Map<const RVec>(c.y.data(), c.n);
      return to_q_slice(normal_form_d(y, c.gamma, c.d));
    }
    case InitialMode::qpW: return to_q_slice(chart_qpW(random_qpW(r, c.n, c.d, c.gamma), c.gamma));
    case InitialMode::explicit_state: {
      RVec q = Eigen::Map<const RVec>(c.q.data(), c.n);
      CMat v(c.n, c.d);
      for (long i = 0; i < c.n; ++i)
        for (long a = 0; a < c.d; ++a) {
          const std::size_t m = static_cast<std::size_t>(i * c.d + a);
          v(i, a) = cplx(c.v_re[m], c.v_im.empty() ? 0.0 : c.v_im[m]);
        }
      check_regular(q, kCollisionMargin);
      SlicePoint s = gauge_fix_plus(q, v, c.gamma);
      if (!s.lax().accepted) throw ConfigError("explicit initial state: L(Q, v) is not positive definite");
      return s;
    }
  }
  throw ConfigError("unknown initial mode");
}

std::vector<std::pair<long, long>> observed_pairs(const Config& c) {
  if (!c.pairs.empty()) return c.pairs;
  std::vector<std::pair<long, long>> all;
  for (long a = 0; a < c.d; ++a)
    for (long b = 0; b < c.d; ++b) all.emplace_back(a, b);
  return all;
}

std::size_t I_index(const Config& c, std::size_t ki, long a, long b) { return (ki * static_cast<std::size_t>(c.d) + static_cast<std::size_t>(a)) * static_cast<std::size_t>(c.d) + static_cast<std::size_t>(b); }

void write_csv(const std::filesystem::path& path, const Config& c, const std::vector<Sample>& samples) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  const auto pairs = observed_pairs(c);
  f << "t";
  for (long i = 1; i <= c.n; ++i) f << ",q_" << i;
  for (long a = 1; a <= c.d; ++a)
    for (long i = 1; i <= c.n; ++i) f << ",re_v" << a << "_" << i << ",im_v" << a << "_" << i;
  for (long k = 1; k <= c.n; ++k) f << ",trL_" << k;
  for (int k : c.ks)
    for (const auto& [a, b] : pairs) f << ",re_I" << k << "_" << a + 1 << b + 1 << ",im_I" << k << "_" << a + 1 << b + 1;
  f << ",constraint_residual\n";
  for (const Sample& s : samples) {
    f << csv_num(s.t);
    for (long i = 0; i < c.n; ++i) f << ',' << csv_num(s.q(i));
    for (long a = 0; a < c.d; ++a)
      for (long i = 0; i < c.n; ++i) f << ',' << csv_num(s.v(i, a).real()) << ',' << csv_num(s.v(i, a).imag());
    for (long k = 0; k < c.n; ++k) f << ',' << csv_num(s.trL(k));
    for (std::size_t ki = 0; ki < c.ks.size(); ++ki)
      for (const auto& [a, b] : pairs) {
        const cplx x = s.I[I_index(c, ki, a, b)];
        f << ',' << csv_num(x.real()) << ',' << csv_num(x.imag());
      }
    f << ',' << csv_num(s.residual) << '\n';
  }
}

json drift_summary(const std::vector<Sample>& samples) {
  if (samples.empty()) return json::object();
  const Sample& a = samples.front();
  double tr = 0.0, inv = 0.0, h = 0.0, res = 0.0, minq = a.min_qdot;
  for (const Sample& s : samples) {
    for (Eigen::Index k = 0; k < a.trL.size(); ++k) tr = std::max(tr, std::abs(s.trL(k) - a.trL(k)) / std::max(1e-300, std::abs(a.trL(k))));
    for (std::size_t m = 0; m < a.I.size(); ++m) inv = std::max(inv, std::abs(s.I[m] - a.I[m]) / std::max(1e-300, std::abs(a.I[m])));
    h = std::max(h, std::abs(s.qdot_sum - a.qdot_sum));
    res = std::max(res, s.residual);
    minq = std::min(minq, s.min_qdot);
  }
  return json{{"max_rel_drift_trL", jnum(tr)}, {"max_rel_drift_I", jnum(inv)}, {"max_drift_sum_qdot", jnum(h)},
              {"max_constraint_residual", jnum(res)}, {"min_qdot", jnum(minq)}};
}

std::vector<Sample> exact_samples(const SlicePoint& s0, const Config& c) {
  std::vector<double> times;
  const double dt = c.h * c.sample_every;
  const long steps = static_cast<long>(std::floor(c.T / dt + 1e-9));
  for (long k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * dt);
  std::vector<Sample> out;
  std::vector<SlicePoint> states = exact_solve_times(s0, times, rs_rate(c.gamma));
  for (std::size_t k = 0; k < times.size(); ++k) out.push_back(observe(GaugeState::from_slice(states[k]), times[k], c.ks));
  return out;
}

json agreement_table(const std::vector<Sample>& rk, const std::vector<Sample>& ex) {
  json rows = json::array();
  const std::size_t m = std::min(rk.size(), ex.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double dq = 0.0, dtr = 0.0, dI = 0.0;
    for (Eigen::Index i = 0; i < rk[k].q.size(); ++i) dq = std::max(dq, std::abs(wrap_angle(rk[k].q(i) - ex[k].q(i))));
    dtr = (rk[k].trL - ex[k].trL).cwiseAbs().maxCoeff();
    for (std::size_t j = 0; j < rk[k].I.size(); ++j) dI = std::max(dI, std::abs(rk[k].I[j] - ex[k].I[j]));
    worst = std::max({worst, dq, dtr, dI});
    rows.push_back(json{{"t", rk[k].t}, {"q", jnum(dq)}, {"trL", jnum(dtr)}, {"I", jnum(dI)}});
  }
  return json{{"max", jnum(worst)}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// verify

struct Property {
  std::string name;
  double threshold = 0.0;  // pass iff max violation < threshold
};

struct Suite {
  std::vector<Property> properties;
  std::function<std::vector<double>(long, Rng&)> sample;
};

long pick(const Config& c, bool pinned, long fixed, long varying) { return pinned ? fixed : varying; }

Suite zakrzewski_suite(const Config& c, bool pinned) {
  return {{{"jacobiator", 1e-8}, {"b b^dagger - 1 - w w^dagger", 1e-13}, {"Omega P - 1", 1e-10}, {"covariance identity", 1e-10},
           {"antisymmetry", 1e-13}, {"reality", 1e-13}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 1 + i % 4);
            CVec w = random_cvec(r, n);
            ZakSystem sys{static_cast<std::size_t>(n)};
            auto x = zak_coords(w);
            Eigen::MatrixXcd P = tensor_at(sys, x);
            CMat b = moment_b(w);
            CMat g = random_unitary(r, n);
            CVec xi = random_cvec(r, n), eta = random_cvec(r, n);
            return std::vector<double>{
                jacobiator_max(sys, x), max_abs(b * b.adjoint() - CMat::Identity(n, n) - w * w.adjoint()),
                (symplectic_form(w) * zak_tensor(w) - RMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff(),
                std::abs(pb1(g * w, xi, eta) - pb1(w, g.adjoint() * xi, g.adjoint() * eta) - u_bracket_linear(g, w, xi, eta)),
                antisymmetry_violation(P), reality_violation(sys, P)};
          }};
}

Suite double_suite(const Config& c, bool pinned) {
  return {{{"Drinfeld antisymmetry", 1e-13}, {"extended antisymmetry", 1e-12}, {"extended reality", 1e-12}, {"extended jacobiator (n = d = 2)", 1e-9},
           {"Iwasawa round trip", 1e-11}, {"free flow unitarity at t = 10", 1e-11}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 1 + i % 3), d = pick(c, pinned, c.d, 1 + i % 2);
            CMat K = random_cmat(r, n, n);
            double drin = 0.0;
            for (long a = 0; a < n; ++a)
              for (long b = 0; b < n; ++b)
                for (long e = 0; e < n; ++e)
                  for (long f = 0; f < n; ++f)
                    drin = std::max(drin, std::abs(drinfeld_structure(K, a, b, e, f, false) + drinfeld_structure(K, e, f, a, b, false)));
            CMat g = random_unitary(r, n), bR = random_upper_positive(r, n);
            CMat L = bR * bR.adjoint(), v = random_cmat(r, n, d);
            ExtendedSystem sys{n, d};
            Eigen::MatrixXcd P = tensor_at(sys, sys.coords(g, L, v));
            const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
            CMat g2 = random_unitary(r, 2), b2 = random_upper_positive(r, 2);
            ExtendedSystem sys2{2, 2};
            const double jac = jacobiator_max(sys2, sys2.coords(g2, b2 * b2.adjoint(), random_cmat(r, 2, 2)));
            Iwasawa iw = iwasawa_decompose(K);
            const double round = std::max(max_abs(iw.b_L * iw.g_R.adjoint() - K), max_abs(iw.g_L * iw.b_R.inverse() - K)) / std::max(1.0, max_abs(K));
            DoublePoint p = DoublePoint::make(g, bR);
            auto f = free_flow(p, CMat::Zero(n, 1), 1 + static_cast<int>(i % n), 10.0);
            const double unit = max_abs(f.point.g_R * f.point.g_R.adjoint() - CMat::Identity(n, n));
            return std::vector<double>{drin, antisymmetry_violation(P) / scale, reality_violation(sys, P) / scale, jac, round, unit};
          }};
}

Suite reduction_suite(const Config& c, bool pinned) {
  return {{{"chart constraint residual (relative)", 1e-10}, {"chart moment residual (relative)", 1e-10}, {"chart round trip", 1e-9},
           {"S1 constraint residual (relative)", 1e-10}, {"S1 round trip", 1e-9}, {"gauge fix idempotence and invariants", 1e-12}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 1 + i % 3), d = pick(c, pinned, c.d, 2 + i % 2);
            const double gamma = pinned ? c.gamma : uniform(r, 0.2, 0.8);
            QpW cw = random_qpW(r, n, d, gamma);
            DressedPoint p = chart_qpW(cw, gamma);
            const double sc = std::max(1.0, max_abs(p.L));
            QpW back = chart_inverse(cw.q, p.L, p.v, gamma);
            const double chart_rt = std::max({(back.p - cw.p).cwiseAbs().maxCoeff(), max_abs(back.W - cw.W)});
            S1Coords s1 = random_S1_coords(r, n, d, gamma);
            DressedPoint q = slice_point_S1(s1, gamma);
            const double sq = std::max(1.0, max_abs(q.L));
            S1Coords b1 = slice_point_S1_inverse(q);
            double s1_rt = std::max({(b1.y - s1.y).cwiseAbs().maxCoeff(), max_abs(b1.v_low - s1.v_low)});
            for (Eigen::Index j = 0; j < n; ++j) s1_rt = std::max({s1_rt, std::abs(wrap_angle(b1.t(j) - s1.t(j))), std::abs(wrap_angle(b1.c(j) - s1.c(j)))});
            SlicePoint s = to_q_slice(p);
            SlicePoint s2 = gauge_fix_plus(s);
            double gf = max_abs(s2.v - s.v);
            for (int k = 0; k <= 2; ++k)
              for (long a = 0; a < d; ++a)
                for (long b = 0; b < d; ++b) gf = std::max(gf, std::abs(invariants_I(s.L(), s.v, k, a, b) - invariants_I(p.L, p.v, k, a, b)) / std::pow(sc, k + 1));
            return std::vector<double>{constraint_residual(p) / sc, moment_residual(p) / sc, chart_rt, constraint_residual(q) / sq, moment_residual(q) / sq, s1_rt, gf};
          }};
}

Suite reduced_bracket_suite(const Config& c, bool pinned) {
  return {{{"antisymmetry (relative)", 1e-13}, {"reality (relative)", 1e-13}, {"flow of sum F_kk vs equations of motion", 1e-10},
           {"Im U is a Casimir (relative)", 1e-12}, {"jacobiator (n = d = 2)", 1e-8}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 2 + i % 2), d = pick(c, pinned, c.d, 2);
            const double gamma = pinned ? c.gamma : uniform(r, 0.2, 1.5);
            SlicePoint s = random_slice_point(r, n, d, gamma);
            ReducedSystem sys = reduced_system(s);
            auto x = sys.coords(s);
            CMat P = reduced_tensor(s);
            const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
            CVec X = reduced_vector_field(s, [&](const auto& y) { return slice_hamiltonian(sys, y); });
            Rhs e = eom_rhs(s);
            double flow = 0.0;
            for (long j = 0; j < n; ++j) {
              flow = std::max(flow, std::abs(X(static_cast<Eigen::Index>(sys.index({RedKind::Q, j}))) - e.qdot(j)));
              for (long a = 0; a < d; ++a) flow = std::max(flow, std::abs(X(static_cast<Eigen::Index>(sys.index({RedKind::V, j, a}))) - e.vdot(j, a)));
            }
            double cas = 0.0;
            for (long j = 0; j < n; ++j) {
              CVec g = formal_gradient(sys, x, [&](const auto& y) {
                auto u = num::im(y[sys.index({RedKind::V, j, 0})]);
                for (long a = 1; a < d; ++a) u += num::im(y[sys.index({RedKind::V, j, a})]);
                return u;
              });
              cas = std::max(cas, (P * g).cwiseAbs().maxCoeff() / scale);
            }
            SlicePoint s2 = random_slice_point(r, 2, 2, gamma);
            ReducedSystem sys2 = reduced_system(s2);
            return std::vector<double>{antisymmetry_violation(P) / scale, reality_violation(sys, P) / scale, flow, cas, jacobiator_max(sys2, sys2.coords(s2))};
          }};
}

// Rescales v so that tr L = n; brackets are homogeneous in v, so this fixes the size of L.
SlicePoint unit_trace(SlicePoint s) {
  s.v *= std::sqrt(static_cast<double>(s.q.size()) / s.L().trace().real());
  return s;
}

Suite lax_suite(const Config& c, bool pinned) {
  return {{{"r-matrix form residual", 1e-9}, {"{tr L^j, tr L^k} for j, k <= 3", 1e-9}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 2 + i % 3), d = pick(c, pinned, c.d, 2);
            const double gamma = pinned ? c.gamma : uniform(r, 0.5, 1.5);
            SlicePoint s = unit_trace(random_slice_point(r, n, d, gamma));
            double inv = 0.0;
            for (int j = 1; j <= 3; ++j)
              for (int k = 1; k <= 3; ++k) inv = std::max(inv, std::abs(trace_power_bracket(s, j, k)));
            return std::vector<double>{lax_check(s), inv};
          }};
}

Suite invariant_algebra_suite(const Config& c, bool pinned) {
  return {{{"closed form vs tensor, M, N <= 2", 1e-9}, {"f-brackets closed form vs tensor", 1e-9}},
          [c, pinned](long, Rng& r) {
            const long n = pick(c, pinned, c.n, 2), d = pick(c, pinned, c.d, 2);
            const double gamma = pinned ? c.gamma : uniform(r, 0.3, 1.0);
            DressedPoint p = act(random_unitary(r, n), unit_trace(random_slice_point(r, n, d, gamma)).dressed());
            double alg = 0.0, fb = 0.0;
            for (int M = 0; M <= 2; ++M)
              for (int N = 0; N <= 2; ++N)
                for (long a = 0; a < d; ++a)
                  for (long b = 0; b < d; ++b)
                    for (long cc = 0; cc < d; ++cc)
                      for (long e = 0; e < d; ++e) {
                        alg = std::max(alg, std::abs(invariant_algebra_bracket(p.L, p.v, M, N, a, b, cc, e) - invariant_bracket_oracle(p.g_R, p.L, p.v, M, N, a, b, cc, e)));
                        if (M >= 1 && N >= 1) {
                          FBrackets x = unreduced_f_brackets(p.g_R, p.L, p.v, M, N, a, b, cc, e);
                          FBrackets y = unreduced_f_oracle(p.g_R, p.L, p.v, M, N, a, b, cc, e);
                          fb = std::max({fb, std::abs(y.ff), std::abs(x.fspin_f - y.fspin_f), std::abs(x.fspin_fspin - y.fspin_fspin)});
                        }
                      }
            return std::vector<double>{alg, fb};
          }};
}

Suite limits_suite(const Config& c, bool pinned) {
  // The scaling-limit ratio must lie in [5, 20]; it is reported as |log10(ratio) - 1| < log10(2).
  return {{{"scaling-limit error ratio eps = 1e-2 / 1e-3: |log10(ratio) - 1|", std::log10(2.0)}, {"spin constraint (w_j, w_j) = 2 gamma", 1e-10},
           {"eps {q_i, p_j} - delta_ij at eps = 1e-3", 1e-12}, {"Darboux {q_i, theta_j} - delta_ij", 1e-8}, {"Darboux {theta_i, theta_j}", 1e-8},
           {"Newton equation from H_RS (d = 1)", 1e-7}},
          [c, pinned](long i, Rng& r) {
            const long n = pick(c, pinned, c.n, 2 + i % 3), d = pick(c, pinned, c.d, 1 + i % 3);
            const double gamma = pinned ? c.gamma : uniform(r, 0.3, 1.0);
            QpW cw = random_qpW(r, n, d, gamma);
            CMat W = gh_normalize(cw.W, gamma);
            auto rows = gh_limit_check(cw.q, cw.p, W, {1e-2, 1e-3}, gamma);
            const double ratio = std::abs(std::log10(rows[0].error / rows[1].error) - 1.0);
            const double norm = (gh_spin_norms(W) - RVec::Constant(n, 2.0 * gamma)).cwiseAbs().maxCoeff();
            const double qp = gh_block_check(cw.q, cw.p, W, 1e-3, gamma).qp;
            SlicePoint s = random_slice_point(r, n, 1, gamma);
            DarbouxError de = spinless_darboux_check(s);
            return std::vector<double>{ratio, norm, qp, de.q_theta, de.theta_theta, spinless_newton_check(s, 0.2, 1e-3)};
          }};
}

Suite make_suite(const std::string& name, const Config& c, bool pinned) {
  if (name == "zakrzewski") return zakrzewski_suite(c, pinned);
  if (name == "double") return double_suite(c, pinned);
  if (name == "reduction") return reduction_suite(c, pinned);
  if (name == "reduced-bracket") return reduced_bracket_suite(c, pinned);
  if (name == "lax") return lax_suite(c, pinned);
  if (name == "invariant-algebra") return invariant_algebra_suite(c, pinned);
  if (name == "limits") return limits_suite(c, pinned);
  throw ConfigError("unknown suite '" + name + "'; expected one of zakrzewski, double, reduction, reduced-bracket, lax, invariant-algebra, limits");
}

}  // namespace

// ---------------------------------------------------------------------------

int run_simulate(const Options& o) {
  Config c = config_from(o);
  SlicePoint s0;
  try {
    s0 = initial_state(c);
  } catch (const spinrs::Error& e) {
    throw ConfigError(std::string("cannot build the initial state: ") + e.what());
  }
  auto dir = prepare_out(o.out);
  json summary{{"command", "simulate"}, {"config", config_json(c)}};
  int code = kOk;
  std::vector<Sample> rk, ex;
  if (c.solver != Solver::exact) {
    Trajectory tr = rk4_integrate(GaugeState::from_slice(s0), c.h, c.T, c.sample_every, c.ks);
    rk = tr.samples;
    write_csv(dir / "trajectory.csv", c, rk);
    summary["rk4"] = drift_summary(rk);
    summary["rk4"]["samples"] = rk.size();
    if (tr.aborted) {
      summary["abort_reason"] = tr.abort_reason;
      code = kDynamicalAbort;
    }
  }
  if (c.solver != Solver::rk4 && code == kOk) {
    try {
      ex = exact_samples(s0, c);
    } catch (const spinrs::Error& e) {
      summary["abort_reason"] = std::string("exact solver: ") + e.what();
      code = kDynamicalAbort;
    }
    if (code == kOk) {
      write_csv(dir / (c.solver == Solver::exact ? "trajectory.csv" : "trajectory_exact.csv"), c, ex);
      summary["exact"] = drift_summary(ex);
      summary["exact"]["samples"] = ex.size();
    }
  }
  if (c.solver == Solver::both && code == kOk) summary["agreement"] = agreement_table(rk, ex);
  summary["aborted"] = code == kDynamicalAbort;
  summary["exit_code"] = code;
  write_json(dir / "summary.json", summary);
  std::cout << "simulate: " << (code == kOk ? "ok" : "aborted") << ", output in " << dir.string() << '\n';
  return code;
}

int run_verify(const Options& o) {
  Config c = config_from(o);
  const bool pinned = o.config.has_value();
  const std::string name = o.suite.empty() ? std::string("zakrzewski") : o.suite;
  Suite suite = make_suite(name, c, pinned);
  const long samples = o.samples.value_or(20);
  if (samples < 0) throw ConfigError("--samples must be non-negative");
  auto results = parallel_map<std::vector<double>>(samples, [&](long i) {
    Rng r = make_rng(c.seed, static_cast<std::uint64_t>(i));
    return suite.sample(i, r);
  });
  json props = json::array();
  bool all = true;
  if (samples > 0)
    for (std::size_t p = 0; p < suite.properties.size(); ++p) {
      double worst = 0.0;
      for (const auto& row : results) worst = std::max(worst, std::isfinite(row[p]) ? row[p] : INFINITY);
      const bool pass = worst < suite.properties[p].threshold;
      all = all && pass;
      props.push_back(json{{"property", suite.properties[p].name}, {"max_violation", jnum(worst)}, {"threshold", suite.properties[p].threshold}, {"pass", pass}});
    }
  json report{{"command", "verify"}, {"suite", name}, {"seed", c.seed}, {"samples", samples}, {"pinned_system", pinned}, {"properties", props}, {"pass", all}};
  if (pinned) report["system"] = json{{"n", c.n}, {"d", c.d}, {"gamma", c.gamma}};
  auto dir = prepare_out(o.out);
  write_json(dir / ("verify_" + name + ".json"), report);
  std::cout << "verify " << name << ": " << (all ? "PASS" : "FAIL") << " (" << samples << " samples)\n";
  return all ? kOk : kVerificationFailure;
}

int run_rank(const Options& o) {
  Config c = config_from(o);
  if (!o.config) {
    c.n = 2;
    c.d = 2;
  }
  if (c.d < 2) throw ConfigError("rank requires d >= 2");
  const long trials = o.samples.value_or(20);
  if (trials < 0) throw ConfigError("--samples must be non-negative");
  std::vector<RankResult> res;
  try {
    res = parallel_map<RankResult>(trials, [&](long i) {
      Rng r = make_rng(c.seed, static_cast<std::uint64_t>(i));
      return jacobian_rank(random_S1_coords(r, c.n, c.d, c.gamma), c.gamma);
    });
  } catch (const spinrs::DomainError& e) {
    throw ConfigError(std::string("rank: ") + e.what());
  }
  const long expect_full = 2 * c.n * c.d - c.n, expect_ham = c.n;
  std::map<long, long> hist_full, hist_ham;
  bool all = true;
  for (const auto& r : res) {
    ++hist_full[r.rank_full];
    ++hist_ham[r.rank_ham];
    all = all && r.rank_full == expect_full && r.rank_ham == expect_ham;
  }
  auto to_json = [](const std::map<long, long>& h) {
    json j = json::object();
    for (const auto& [k, v] : h) j[std::to_string(k)] = v;
    return j;
  };
  json report{{"command", "rank"}, {"n", c.n}, {"d", c.d}, {"gamma", c.gamma}, {"seed", c.seed}, {"trials", trials},
              {"expected", {{"rank_full", expect_full}, {"rank_ham", expect_ham}}},
              {"histogram", {{"rank_full", to_json(hist_full)}, {"rank_ham", to_json(hist_ham)}}}, {"pass", all}};
  auto dir = prepare_out(o.out);
  write_json(dir / "rank.json", report);
  std::cout << "rank (" << c.n << "," << c.d << "): " << (all ? "PASS" : "FAIL") << '\n';
  return all ? kOk : kVerificationFailure;
}

int run_normal_form(const Options& o) {
  Config c = config_from(o);
  if (c.d < 2) throw ConfigError("normal-form requires d >= 2");
  RVec y = reference_s1_coords(c.n, c.d, c.gamma).y;
  if (!c.y.empty()) y = Eigen::Map<const RVec>(c.y.data(), c.n);
  DressedPoint p;
  try {
    p = normal_form_d(y, c.gamma, c.d);
  } catch (const spinrs::DomainError& e) {
    throw ConfigError(std::string("normal-form: ") + e.what());
  }
  CVec vd = p.v.col(c.d - 1);
  RVec ev = eig_hermitian(p.L + vd * vd.adjoint()).values;
  const double scale = std::max(1.0, max_abs(p.L));
  const double res = constraint_residual(p) / scale, mom = moment_residual(p) / scale;
  const double spec = (ev - std::exp(2.0 * c.gamma) * y).cwiseAbs().maxCoeff() / std::max(1.0, ev.cwiseAbs().maxCoeff());
  const bool pass = res < 1e-10 && mom < 1e-10 && spec < 1e-10;
  json L = json::array(), v = json::array();
  for (long i = 0; i < c.n; ++i) {
    json row = json::array(), vrow = json::array();
    for (long j = 0; j < c.n; ++j) row.push_back({p.L(i, j).real(), p.L(i, j).imag()});
    for (long a = 0; a < c.d; ++a) vrow.push_back({p.v(i, a).real(), p.v(i, a).imag()});
    L.push_back(row);
    v.push_back(vrow);
  }
  json report{{"command", "normal-form"}, {"n", c.n}, {"d", c.d}, {"gamma", c.gamma}, {"y", std::vector<double>(y.data(), y.data() + y.size())},
              {"L", L}, {"v", v}, {"constraint_residual", jnum(res)}, {"moment_residual", jnum(mom)}, {"spectrum_error", jnum(spec)}, {"pass", pass}};
  auto dir = prepare_out(o.out);
  write_json(dir / "normal_form.json", report);
  std::cout << "normal-form: " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kVerificationFailure;
}

int run_limits(const Options& o) {
  Config c = config_from(o);
  Rng r = make_rng(c.seed, 0);
  QpW cw = random_qpW(r, c.n, c.d, c.gamma);
  CMat W = gh_normalize(cw.W, c.gamma);
  const std::vector<double> eps = {1e-1, 1e-2, 1e-3, 1e-4};
  auto rows = gh_limit_check(cw.q, cw.p, W, eps, c.gamma);
  json table = json::array();
  for (const auto& row : rows) table.push_back(json{{"eps", row.eps}, {"lhs", jnum(row.lhs)}, {"h_gh", jnum(row.h_gh)}, {"error", jnum(row.error)}});
  const double ratio = rows[1].error / rows[2].error;
  json blocks = json::array();
  for (double e : {1e-1, 1e-2, 1e-3}) {
    GhBlockError b = gh_block_check(cw.q, cw.p, W, e, c.gamma);
    blocks.push_back(json{{"eps", e}, {"qp", jnum(b.qp)}, {"pp", jnum(b.pp)}, {"spin_relative", jnum(b.spin)}});
  }
  SlicePoint s = random_slice_point(r, c.n, 1, c.gamma);
  DarbouxError de = spinless_darboux_check(s);
  const double newton = spinless_newton_check(s, 0.2, 1e-3);
  DarbouxError dp = spinless_darboux_check(s, SpinlessFactor::as_printed);
  const bool pass = ratio >= 5.0 && ratio <= 20.0 && de.q_theta < 1e-8 && de.theta_theta < 1e-8 && newton < 1e-7;
  json report{{"command", "limits"}, {"n", c.n}, {"d", c.d}, {"gamma", c.gamma}, {"seed", c.seed},
              {"scaling_limit", {{"table", table}, {"ratio_1e-2_over_1e-3", jnum(ratio)}, {"poisson_blocks", blocks}}},
              {"spinless",
               {{"darboux_q_theta", jnum(de.q_theta)}, {"darboux_theta_theta", jnum(de.theta_theta)}, {"newton", jnum(newton)},
                {"printed_factor_theta_theta", jnum(dp.theta_theta)}}},
              {"pass", pass}};
  auto dir = prepare_out(o.out);
  write_json(dir / "limits.json", report);
  std::cout << "limits: " << (pass ? "PASS" : "FAIL") << " (ratio " << round3(ratio) << ")\n";
  return pass ? kOk : kVerificationFailure;
}

}  // namespace spinrs_cli
