#pragma once

// Smoothing and budget-driven drivers.  Replacing h by its Moreau envelope
// h_nu keeps the same Lipschitz constant, gains a 1/nu-Lipschitz gradient,
// and changes every value by at most L^2 nu / 2; prox-gradient norms of the
// smoothed and original problems then differ by at most sqrt(L^2 nu / (2t)).
// Choosing nu = eps^2 / (2 L^3 beta) and driving the smoothed norm below
// eps/2 therefore certifies |G_{1/mu}| <= eps on the original problem.

#include <cmath>
#include <utility>

#include "proxlin/core.hpp"
#include "proxlin/prox_linear.hpp"
#include "proxlin/prox_toolbox.hpp"
#include "proxlin/subproblem.hpp"

namespace proxlin {

// Same g and c, h replaced by its envelope.  The oracle tally is shared so
// driver-level cost accounting spans both problems.
inline CompositeProblem make_smoothed(const CompositeProblem& p, double nu) {
  require(nu > 0, "smoothing level must be positive");
  CompositeProblem out = p;
  out.h = envelope_function(p.h, nu);
  out.h.lipschitz = p.h.lipschitz;  // envelope never increases the constant
  return out;
}

struct SmoothingPlan {
  double eps_target = 0;
  double nu = 0;
  double t = 0;
  double smoothed_target = 0;  // drive the smoothed norm below this

  static SmoothingPlan make(const CompositeProblem& p, double eps) {
    require(eps > 0, "target accuracy must be positive");
    require(p.mu > 0 && p.L() > 0 && p.beta() > 0,
            "smoothing recipe needs positive curvature constants");
    SmoothingPlan plan;
    plan.eps_target = eps;
    double L = p.L();
    plan.nu = eps * eps / (2 * L * L * L * p.beta());
    plan.t = 1.0 / p.mu;
    plan.smoothed_target = eps / 2;
    return plan;
  }

  // the guaranteed additive offset between smoothed and true norms
  double norm_offset(const CompositeProblem& p) const {
    double L = p.L();
    return std::sqrt(L * L * nu / (2 * t));
  }
};

// Runs inexact prox-linear steps on the smoothed problem until its true
// prox-gradient norm reaches the plan target, then certifies the original.
// Records, per iterate: the smoothed norm and (as the surrogate) the
// smoothed norm plus the envelope offset, an upper bound on |G_t|.
inline std::pair<Vector, Trace> run_smoothed_driver(const CompositeProblem& p, const Vector& x0,
                                                    const SmoothingPlan& plan,
                                                    int max_outer = 100000) {
  CompositeProblem ps = make_smoothed(p, plan.nu);
  const double t = plan.t;
  const double offset = plan.norm_offset(p);
  Trace tr;
  tr.stats["t"] = t;
  tr.stats["nu"] = plan.nu;
  tr.stats["norm_offset"] = offset;

  Vector x = x0;
  double F = objective_value(ps, x);
  tr.stats["F0"] = F;
  Vector warm, warm_norm;
  ErrorSchedule sched = ErrorSchedule::inverse_square(1.0 / std::max(p.L(), 1e-12));
  const double norm_tol = plan.smoothed_target / 100;

  int k = 0;
  for (; k < max_outer; ++k) {
    long long t0 = detail::now_ns();
    double g_nu = prox_gradient_norm(ps, x, t, norm_tol, &warm_norm);

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.prox_grad_norm = g_nu + offset;  // certified bound on the true norm
    rec.prox_grad_norm_true = g_nu;      // smoothed norm, high accuracy

    if (g_nu <= plan.smoothed_target - norm_tol) {
      rec.counters = *p.tally;
      rec.wall_ns = detail::now_ns() - t0;
      tr.records.push_back(rec);
      break;
    }

    double eps_k = sched.eps(k + 1);
    LinearizedModel model = make_model(ps, x, t);
    SubproblemSolution sol =
        solve_function_gap(model, eps_k, detail::kDefaultDualBudget, warm.size() ? &warm : nullptr);
    warm = sol.w;
    rec.eps_k = eps_k;
    rec.step_norm = (x - sol.x_plus).norm();
    rec.inner_iters = sol.inner_iters;
    x = sol.x_plus;
    F = objective_value(ps, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  if (k >= max_outer)
    fail(ErrorCode::BudgetExhausted, "smoothed driver did not reach its target");

  double g_true = prox_gradient_norm(p, x, t, plan.eps_target / 100);
  tr.stats["final_true_norm"] = g_true;
  tr.stats["final_smoothed_norm"] =
      tr.records.empty() ? 0 : *tr.records.back().prox_grad_norm_true;
  tr.x_final = x;
  tr.F_final = objective_value(p, x);
  return {x, tr};
}

// Fixed-budget planning: given a total budget T of inner iterations and a
// tolerance-sum allowance q, choose the outer count and the per-step inner
// count so that every subproblem is solved to gap q/(N+1) a priori and the
// whole run fits inside T.
struct BudgetPlan {
  double q = 0;
  long T = 0;
  long N = 0;               // outer steps = N + 1
  long per_step_inner = 0;
  double eps_each = 0;

  static BudgetPlan make(double L, double beta, double opnorm, double q, long T) {
    require(L > 0 && beta > 0 && opnorm > 0, "budget plan needs positive constants");
    require(q > 0 && T > 0, "budget plan needs positive q and T");
    double s = std::sqrt(2 * beta * q / L);
    double Tmin = 4 * std::pow(1.5, 1.5) * opnorm / s;
    if (static_cast<double>(T) < Tmin)
      fail(ErrorCode::BudgetTooSmall, "iteration budget below the planning threshold");
    BudgetPlan plan;
    plan.q = q;
    plan.T = T;
    plan.N = static_cast<long>(std::ceil(std::pow(static_cast<double>(T) * s / (4 * opnorm), 2.0 / 3.0))) - 2;
    if (plan.N < 0) plan.N = 0;
    plan.per_step_inner = static_cast<long>(
        std::ceil(4 * opnorm * std::sqrt(L * static_cast<double>(plan.N + 1) / (2 * beta * q))));
    plan.eps_each = q / static_cast<double>(plan.N + 1);
    // arithmetic identity behind the plan; cheap to keep as a hard check
    if ((plan.N + 1) * plan.per_step_inner > T)
      fail(ErrorCode::BudgetTooSmall, "planned work exceeds the budget");
    return plan;
  }

  static BudgetPlan make(const CompositeProblem& p, double q, long T) {
    require(p.c.opnorm_bound > 0, "budget planning needs a global operator-norm bound");
    return make(p.L(), p.beta(), p.c.opnorm_bound, q, T);
  }
};

// Runs N+1 prox-linear steps at t = 1/mu, each subproblem handled by the
// optimal method on the dual for exactly per_step_inner iterations, whose
// a-priori certificate keeps each model gap at or below q/(N+1).
inline std::pair<Vector, Trace> run_budgeted_driver(const CompositeProblem& p, const Vector& x0,
                                                    const BudgetPlan& plan) {
  require(p.mu > 0, "budgeted driver needs mu > 0");
  require(plan.N + 1 >= 1 && plan.per_step_inner >= 1, "degenerate budget plan");
  const double t = 1.0 / p.mu;
  Trace tr;
  tr.stats["t"] = t;
  tr.stats["eps_each"] = plan.eps_each;
  Vector x = x0;
  double F = objective_value(p, x);
  tr.stats["F0"] = F;
  long spent = 0;
  for (long k = 0; k <= plan.N; ++k) {
    long long t0 = detail::now_ns();
    LinearizedModel model = make_model(p, x, t);
    OptimalMethodResult res = optimal_method_run(make_dual(model), plan.per_step_inner);
    spent += res.iters;
    if (res.certified_gap > plan.eps_each * (1 + 1e-9))
      fail(ErrorCode::CertificateMissing, "per-step certificate misses the planned gap");

    IterateRecord rec;
    rec.k = static_cast<int>(k);
    rec.F_val = F;
    rec.eps_k = plan.eps_each;
    rec.step_norm = (x - res.v_primal).norm();
    double stepn = rec.step_norm / t;
    rec.prox_grad_norm = std::sqrt(4 * plan.eps_each / t + 2 * stepn * stepn);
    rec.inner_iters = res.iters;
    x = res.v_primal;
    F = objective_value(p, x);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  if (spent > plan.T) fail(ErrorCode::BudgetExhausted, "spent more than the planned budget");
  tr.stats["inner_spent"] = static_cast<double>(spent);
  tr.x_final = x;
  tr.F_final = F;
  return {x, tr};
}

}  // namespace proxlin
