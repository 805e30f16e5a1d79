#pragma once

// Accelerated prox-linear methods.  Each step linearizes at an extrapolated
// point y_k and takes two prox-linear solves: a plain one for the iterate
// x_k and a two-center one (prox center v_{k-1}, scaling a_k) for the
// momentum sequence v_k.  Variants: exact solves, inexact solves certified
// by dual stationarity residuals or by function gaps, and a backtracking
// line search on the step parameter when mu is unknown.
//
// Record convention here: record k (1-based) stores F(x_k), the value at
// the fresh iterate, and the prox-gradient norm measured at y_k.

#include <cmath>
#include <utility>

#include "proxlin/core.hpp"
#include "proxlin/prox_linear.hpp"
#include "proxlin/subproblem.hpp"

namespace proxlin {

struct AcceleratedConfig {
  double mu_tilde = 0;  // must exceed the problem's mu
  int max_outer = 100;
  ErrorSchedule eps_schedule;    // x-step tolerances, inexact variants only
  ErrorSchedule delta_schedule;  // v-step tolerances
  long inner_budget = detail::kDefaultDualBudget;
  double exact_tol_scale = 1e-12;
  bool record_true_G = false;  // recompute a high-accuracy |G_{1/mu_tilde}(y_k)|
  double true_G_tol = 1e-9;
};

namespace detail {

inline void check_mu_tilde(const CompositeProblem& p, double mu_tilde) {
  if (!(mu_tilde > p.mu))
    fail(ErrorCode::InvalidMuTilde, "acceleration needs mu_tilde > mu");
}

struct AccelState {
  Vector x, v;
  double F_x;
};

}  // namespace detail

// Exact accelerated prox-linear.  The recorded norm mu_tilde * |y_k - x_k|
// equals |G_{1/mu_tilde}(y_k)| up to the solver tolerance.
inline Trace run_accelerated(const CompositeProblem& p, const Vector& x0, const Vector& v0,
                             const AcceleratedConfig& cfg) {
  detail::check_mu_tilde(p, cfg.mu_tilde);
  const double mt = cfg.mu_tilde;
  Trace tr;
  tr.stats["mu_tilde"] = mt;
  Vector x = x0, v = v0;
  tr.stats["F0"] = objective_value(p, x);
  Vector warm_x, warm_v;
  for (int k = 1; k <= cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double a = 2.0 / (k + 1);
    Vector y = a * v + (1 - a) * x;

    LinearizedModel mx = make_model(p, y, 1 / mt);
    SubproblemSolution sx = solve_exact(mx, cfg.exact_tol_scale, cfg.inner_budget,
                                        warm_x.size() ? &warm_x : nullptr);
    warm_x = sx.w;

    LinearizedModel mv = make_two_center_model(p, y, v, a, 1 / (mt * a));
    SubproblemSolution sv = solve_exact(mv, cfg.exact_tol_scale, cfg.inner_budget,
                                        warm_v.size() ? &warm_v : nullptr);
    warm_v = sv.w;

    IterateRecord rec;
    rec.k = k;
    rec.prox_grad_norm = mt * (y - sx.x_plus).norm();
    if (cfg.record_true_G) rec.prox_grad_norm_true = rec.prox_grad_norm;
    rec.step_norm = (x - sx.x_plus).norm();
    rec.inner_iters = sx.inner_iters + sv.inner_iters;
    x = sx.x_plus;
    v = sv.x_plus;
    rec.F_val = objective_value(p, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  tr.x_final = x;
  tr.F_final = tr.records.empty() ? objective_value(p, x) : tr.records.back().F_val;
  return tr;
}

// Inexact variant certified by dual stationarity: the x-step returns the
// exact minimizer of a zeta-shifted model with |zeta_k| <= eps_k, and the
// v-step the exact minimizer of a xi-shifted two-center model with
// |xi_k| <= delta_k.  Records carry the achieved residual norms.
inline Trace run_accelerated_inexact_stationary(const CompositeProblem& p, const Vector& x0,
                                                const Vector& v0, const AcceleratedConfig& cfg) {
  detail::check_mu_tilde(p, cfg.mu_tilde);
  const double mt = cfg.mu_tilde;
  Trace tr;
  tr.stats["mu_tilde"] = mt;
  Vector x = x0, v = v0;
  tr.stats["F0"] = objective_value(p, x);
  Vector warm_x, warm_v;
  for (int k = 1; k <= cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double a = 2.0 / (k + 1);
    Vector y = a * v + (1 - a) * x;

    LinearizedModel mx = make_model(p, y, 1 / mt);
    SubproblemSolution sx = solve_dual_stationary(mx, cfg.eps_schedule.eps(k), cfg.inner_budget,
                                                  warm_x.size() ? &warm_x : nullptr);
    warm_x = sx.w;

    LinearizedModel mv = make_two_center_model(p, y, v, a, 1 / (mt * a));
    SubproblemSolution sv = solve_dual_stationary(mv, cfg.delta_schedule.eps(k), cfg.inner_budget,
                                                  warm_v.size() ? &warm_v : nullptr);
    warm_v = sv.w;

    IterateRecord rec;
    rec.k = k;
    rec.eps_k = sx.zeta_norm;
    rec.delta_k = sv.zeta_norm;
    double stepn = mt * (y - sx.x_plus).norm();
    rec.prox_grad_norm = std::sqrt(8 * p.L() * mt * sx.zeta_norm + 2 * stepn * stepn);
    if (cfg.record_true_G)
      rec.prox_grad_norm_true = prox_gradient_norm(p, y, 1 / mt, cfg.true_G_tol);
    rec.step_norm = (x - sx.x_plus).norm();
    rec.inner_iters = sx.inner_iters + sv.inner_iters;
    x = sx.x_plus;
    v = sv.x_plus;
    rec.F_val = objective_value(p, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  tr.x_final = x;
  tr.F_final = tr.records.empty() ? objective_value(p, x) : tr.records.back().F_val;
  return tr;
}

// Inexact variant certified by function gaps: the x-step is an
// eps_k-approximate model minimizer and the v-step a delta_k-approximate
// two-center minimizer.  Records carry the requested tolerances.
inline Trace run_accelerated_inexact_gap(const CompositeProblem& p, const Vector& x0,
                                         const Vector& v0, const AcceleratedConfig& cfg) {
  detail::check_mu_tilde(p, cfg.mu_tilde);
  const double mt = cfg.mu_tilde;
  Trace tr;
  tr.stats["mu_tilde"] = mt;
  Vector x = x0, v = v0;
  tr.stats["F0"] = objective_value(p, x);
  Vector warm_x, warm_v;
  for (int k = 1; k <= cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double a = 2.0 / (k + 1);
    Vector y = a * v + (1 - a) * x;

    LinearizedModel mx = make_model(p, y, 1 / mt);
    SubproblemSolution sx = solve_function_gap(mx, cfg.eps_schedule.eps(k), cfg.inner_budget,
                                               warm_x.size() ? &warm_x : nullptr);
    warm_x = sx.w;

    LinearizedModel mv = make_two_center_model(p, y, v, a, 1 / (mt * a));
    SubproblemSolution sv = solve_function_gap(mv, cfg.delta_schedule.eps(k), cfg.inner_budget,
                                               warm_v.size() ? &warm_v : nullptr);
    warm_v = sv.w;

    IterateRecord rec;
    rec.k = k;
    rec.eps_k = cfg.eps_schedule.eps(k);
    rec.delta_k = cfg.delta_schedule.eps(k);
    double stepn = mt * (y - sx.x_plus).norm();
    rec.prox_grad_norm = std::sqrt(4 * mt * rec.eps_k + 2 * stepn * stepn);
    if (cfg.record_true_G)
      rec.prox_grad_norm_true = prox_gradient_norm(p, y, 1 / mt, cfg.true_G_tol);
    rec.step_norm = (x - sx.x_plus).norm();
    rec.inner_iters = sx.inner_iters + sv.inner_iters;
    x = sx.x_plus;
    v = sv.x_plus;
    rec.F_val = objective_value(p, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  tr.x_final = x;
  tr.F_final = tr.records.empty() ? objective_value(p, x) : tr.records.back().F_val;
  return tr;
}

struct BacktrackingConfig {
  double t0 = 1.0;
  double eta = 0.5;    // step shrink factor, in (0,1)
  double alpha = 0.5;  // prox parameter fraction, in (0,1)
  int max_outer = 100;
  long inner_budget = detail::kDefaultDualBudget;
  double exact_tol_scale = 1e-12;
};

// Backtracking accelerated prox-linear for unknown mu.  Each step shrinks t
// until the true objective at S_{alpha t}(y) is matched by the looser model
// with quadratic 1/(2t); then mu_tilde_k = 1/(alpha t_k).  t never grows, so
// mu_tilde_k is nondecreasing and capped by max{1/(alpha t0), mu/(alpha
// eta)}.  The recorded norm is |G_{1/mu_tilde_k}(y_k)| = mu_tilde_k |y_k -
// x_k|; per-step line-search trial counts land in series["trials"], along
// with series["t_k"] and series["mu_tilde_k"].
inline Trace run_accelerated_backtracking(const CompositeProblem& p, const Vector& x0,
                                          const Vector& v0, const BacktrackingConfig& cfg) {
  require(cfg.t0 > 0 && cfg.eta > 0 && cfg.eta < 1 && cfg.alpha > 0 && cfg.alpha < 1,
          "backtracking needs t0 > 0 and eta, alpha in (0,1)");
  Trace tr;
  Vector x = x0, v = v0;
  tr.stats["F0"] = objective_value(p, x);
  double t = cfg.t0;
  Vector warm_x, warm_v;
  for (int k = 1; k <= cfg.max_outer; ++k) {
    long long t0ns = detail::now_ns();
    double a = 2.0 / (k + 1);
    Vector y = a * v + (1 - a) * x;

    SubproblemSolution sx;
    long trials = 0;
    for (;;) {
      ++trials;
      LinearizedModel mx = make_model(p, y, cfg.alpha * t);
      sx = solve_exact(mx, cfg.exact_tol_scale, cfg.inner_budget,
                       warm_x.size() ? &warm_x : nullptr);
      warm_x = sx.w;
      double Fz = objective_value(p, sx.x_plus);
      double model_t = model_partial_value(mx, sx.x_plus) +
                       (sx.x_plus - y).squaredNorm() / (2 * t);
      if (Fz <= model_t + 1e-12 * (1 + std::abs(Fz))) break;
      t *= cfg.eta;
    }
    double mt = 1 / (cfg.alpha * t);

    LinearizedModel mv = make_two_center_model(p, y, v, a, 1 / (mt * a));
    SubproblemSolution sv = solve_exact(mv, cfg.exact_tol_scale, cfg.inner_budget,
                                        warm_v.size() ? &warm_v : nullptr);
    warm_v = sv.w;

    IterateRecord rec;
    rec.k = k;
    rec.prox_grad_norm = mt * (y - sx.x_plus).norm();
    rec.step_norm = (x - sx.x_plus).norm();
    rec.inner_iters = sx.inner_iters + sv.inner_iters;
    x = sx.x_plus;
    v = sv.x_plus;
    rec.F_val = objective_value(p, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0ns;
    tr.records.push_back(rec);
    tr.series["trials"].push_back(static_cast<double>(trials));
    tr.series["t_k"].push_back(t);
    tr.series["mu_tilde_k"].push_back(mt);
  }
  tr.x_final = x;
  tr.F_final = tr.records.empty() ? objective_value(p, x) : tr.records.back().F_val;
  return tr;
}

}  // namespace proxlin
