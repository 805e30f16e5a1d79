#pragma once

// Outer prox-linear iterations in four flavors: exact subproblem solves,
// inexact solves controlled by a function-gap schedule, inexact solves
// controlled by a dual stationarity residual, and the coupled driver that
// hands each subproblem to a linearly convergent subscheme for a computed
// number of inner passes.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <tuple>
#include <utility>

#include "proxlin/core.hpp"
#include "proxlin/subproblem.hpp"

namespace proxlin {

struct ErrorSchedule {
  enum class Rule { Zero, PowerLaw, InverseSquare };
  Rule rule = Rule::Zero;
  double eps0 = 0;
  double q = 0;
  double scale = 0;

  // tolerance for the k-th subproblem, k >= 1
  double eps(int k) const {
    switch (rule) {
      case Rule::Zero: return 0.0;
      case Rule::PowerLaw: return eps0 / std::pow(static_cast<double>(k), q);
      case Rule::InverseSquare: return scale / (static_cast<double>(k) * k);
    }
    return 0.0;
  }

  static ErrorSchedule zero() { return {}; }
  static ErrorSchedule power_law(double eps0, double q) {
    require(eps0 > 0 && q > 0, "power-law schedule needs positive parameters");
    return {Rule::PowerLaw, eps0, q, 0};
  }
  static ErrorSchedule inverse_square(double scale) {
    require(scale > 0, "inverse-square schedule needs a positive scale");
    return {Rule::InverseSquare, 0, 0, scale};
  }
};

struct ProxLinearConfig {
  std::optional<double> t;        // default: 1/mu, or 1 when mu = 0
  int max_outer = 100;
  double grad_tol = 0;            // stop once the recorded norm falls below; 0 disables
  ErrorSchedule schedule;         // inexact runs only
  long inner_budget = 8'000'000;
  double exact_tol_scale = 1e-12;
  bool record_true_G = false;     // recompute a high-accuracy |G_t| at every iterate
  double true_G_tol = 1e-9;
  bool enforce_descent = true;    // applies when t <= 1/mu so the model is an upper bound
};

inline double default_step(const CompositeProblem& p) {
  return p.mu > 0 ? 1.0 / p.mu : 1.0;
}

namespace detail {

inline long long now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline bool upper_model_regime(const CompositeProblem& p, double t) {
  return p.mu <= 0 || t <= (1.0 + 1e-12) / p.mu;
}

inline void check_descent(bool enabled, bool upper_regime, double F0, double F1,
                          double allowance) {
  if (!enabled || !upper_regime) return;
  double slack = 1e-9 * (1 + std::abs(F0));
  if (F1 > F0 + allowance + slack)
    fail(ErrorCode::StepIncreasedObjective,
         "objective rose beyond the certified allowance");
}

}  // namespace detail

// Exact prox-linear: x_{k+1} = argmin of the model at x_k.  The recorded
// prox-gradient norm |x_k - x_{k+1}| / t is exact up to the solver tolerance.
inline Trace run_prox_linear(const CompositeProblem& p, const Vector& x0,
                             const ProxLinearConfig& cfg = {}) {
  const double t = cfg.t.value_or(default_step(p));
  const bool upper = detail::upper_model_regime(p, t);
  Trace tr;
  tr.stats["t"] = t;
  Vector x = x0;
  double F = objective_value(p, x);
  tr.stats["F0"] = F;
  Vector warm;
  for (int k = 0; k < cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    LinearizedModel model = make_model(p, x, t);
    SubproblemSolution sol = solve_exact(model, cfg.exact_tol_scale, cfg.inner_budget,
                                         warm.size() ? &warm : nullptr);
    warm = sol.w;
    double F1 = objective_value(p, sol.x_plus);
    detail::check_descent(cfg.enforce_descent, upper, F, F1, sol.gap);

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.step_norm = (x - sol.x_plus).norm();
    rec.prox_grad_norm = rec.step_norm / t;
    if (cfg.record_true_G) rec.prox_grad_norm_true = rec.prox_grad_norm;
    rec.inner_iters = sol.inner_iters;
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);

    x = sol.x_plus;
    F = F1;
    if (cfg.grad_tol > 0 && rec.prox_grad_norm <= cfg.grad_tol) break;
  }
  tr.x_final = x;
  tr.F_final = F;
  return tr;
}

// Inexact prox-linear with a function-gap schedule: the k-th subproblem is
// solved to model gap eps_k, and the recorded norm is the certified
// surrogate sqrt(4 eps_k / t + 2 |step/t|^2), an upper bound on |G_t(x_k)|.
inline Trace run_inexact_function_gap(const CompositeProblem& p, const Vector& x0,
                                      const ProxLinearConfig& cfg) {
  const double t = cfg.t.value_or(default_step(p));
  const bool upper = detail::upper_model_regime(p, t);
  Trace tr;
  tr.stats["t"] = t;
  Vector x = x0;
  double F = objective_value(p, x);
  tr.stats["F0"] = F;
  double sum_eps = 0;
  Vector warm, warm_true;
  for (int k = 0; k < cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double eps_k = cfg.schedule.eps(k + 1);
    LinearizedModel model = make_model(p, x, t);
    SubproblemSolution sol = solve_function_gap(model, eps_k, cfg.inner_budget,
                                                warm.size() ? &warm : nullptr);
    warm = sol.w;
    sum_eps += eps_k;

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.eps_k = eps_k;
    rec.step_norm = (x - sol.x_plus).norm();
    double stepn = rec.step_norm / t;
    rec.prox_grad_norm = std::sqrt(4 * eps_k / t + 2 * stepn * stepn);
    if (cfg.record_true_G) {
      // same model, tightened further from the warm dual point
      double eps_true = std::max(cfg.true_G_tol * cfg.true_G_tol * t / 2,
                                 4e-15 * (1 + std::abs(F)));
      warm_true = sol.w;
      SubproblemSolution tight =
          solve_function_gap(model, eps_true, cfg.inner_budget, &warm_true);
      rec.prox_grad_norm_true = (x - tight.x_plus).norm() / t;
    }
    rec.inner_iters = sol.inner_iters;

    double F1 = objective_value(p, sol.x_plus);
    detail::check_descent(cfg.enforce_descent, upper, F, F1, eps_k);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);

    x = sol.x_plus;
    F = F1;
    if (cfg.grad_tol > 0 && rec.prox_grad_norm <= cfg.grad_tol) break;
  }
  tr.stats["sum_eps"] = sum_eps;
  tr.x_final = x;
  tr.F_final = F;
  return tr;
}

// Inexact prox-linear certified by dual stationarity: the k-th subproblem
// returns a point that exactly minimizes a zeta_k-shifted model with
// |zeta_k| <= eps_k.  Surrogate norm: sqrt(8 L |zeta| / t + 2 |step/t|^2).
inline Trace run_inexact_dual_stationary(const CompositeProblem& p, const Vector& x0,
                                         const ProxLinearConfig& cfg) {
  const double t = cfg.t.value_or(default_step(p));
  const bool upper = detail::upper_model_regime(p, t);
  const double L = p.L();
  Trace tr;
  tr.stats["t"] = t;
  Vector x = x0;
  double F = objective_value(p, x);
  tr.stats["F0"] = F;
  double sum_eps = 0;
  Vector warm, warm_true;
  for (int k = 0; k < cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double eps_k = cfg.schedule.eps(k + 1);
    LinearizedModel model = make_model(p, x, t);
    SubproblemSolution sol = solve_dual_stationary(model, eps_k, cfg.inner_budget,
                                                   warm.size() ? &warm : nullptr);
    warm = sol.w;
    sum_eps += sol.zeta_norm;

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.eps_k = sol.zeta_norm;
    rec.step_norm = (x - sol.x_plus).norm();
    double stepn = rec.step_norm / t;
    rec.prox_grad_norm = std::sqrt(8 * L * sol.zeta_norm / t + 2 * stepn * stepn);
    if (cfg.record_true_G) {
      double eps_true = std::max(cfg.true_G_tol * cfg.true_G_tol * t / 2,
                                 4e-15 * (1 + std::abs(F)));
      warm_true = sol.w;
      SubproblemSolution tight =
          solve_function_gap(model, eps_true, cfg.inner_budget, &warm_true);
      rec.prox_grad_norm_true = (x - tight.x_plus).norm() / t;
    }
    rec.inner_iters = sol.inner_iters;

    double F1 = objective_value(p, sol.x_plus);
    detail::check_descent(cfg.enforce_descent, upper, F, F1, 2 * L * sol.zeta_norm);
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);

    x = sol.x_plus;
    F = F1;
    if (cfg.grad_tol > 0 && rec.prox_grad_norm <= cfg.grad_tol) break;
  }
  tr.stats["sum_eps"] = sum_eps;
  tr.x_final = x;
  tr.F_final = F;
  return tr;
}

// A subscheme that contracts the model gap linearly from a squared-distance
// start: E[model(z_i) - model_min] <= gamma (1 - tau)^i |z_0 - z_*|^2.
struct LinearlyConvergentSubscheme {
  std::function<Vector(const LinearizedModel&, const Vector&, long)> run;
  std::function<std::pair<double, double>(const LinearizedModel&)> constants;  // (gamma, tau)
};

// A subscheme whose guarantee is relative to the initial function gap:
// E[model(z_i) - min] <= gamma_f (1 - tau)^i (model(z_0) - min), for a model
// that splits as an L_f-smooth term plus a prox term.
struct FunctionalRateSubscheme {
  std::function<Vector(const LinearizedModel&, const Vector&, long)> run;
  std::function<std::tuple<double, double, double>(const LinearizedModel&)>
      constants;  // (gamma_f, tau, L_f)
  std::function<Vector(const LinearizedModel&, const Vector&)> prox_gradient_step;
};

// Prepend one prox-gradient step: the descent lemma converts the functional
// rate into a squared-distance rate with constants (gamma_f L_f / 2, tau).
inline LinearlyConvergentSubscheme with_descent_start(FunctionalRateSubscheme s) {
  auto sh = std::make_shared<FunctionalRateSubscheme>(std::move(s));
  LinearlyConvergentSubscheme out;
  out.run = [sh](const LinearizedModel& m, const Vector& z0, long iters) {
    Vector z = sh->prox_gradient_step(m, z0);
    return sh->run(m, z, iters);
  };
  out.constants = [sh](const LinearizedModel& m) {
    auto [gamma_f, tau, L_f] = sh->constants(m);
    return std::make_pair(gamma_f * L_f / 2, tau);
  };
  return out;
}

// Coupled driver: each outer step runs the subscheme for
//   T_k = ceil(log(4 t gamma_k) / tau_k)   (at least one pass)
// which caps the expected suboptimality at |x_k - x_k^*|^2 / (4t).
inline Trace run_coupled(const CompositeProblem& p, const Vector& x0,
                         const LinearlyConvergentSubscheme& sub, const ProxLinearConfig& cfg) {
  const double t = cfg.t.value_or(default_step(p));
  Trace tr;
  tr.stats["t"] = t;
  Vector x = x0;
  double F = objective_value(p, x);
  tr.stats["F0"] = F;
  long total_inner = 0;
  for (int k = 0; k < cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    LinearizedModel model = make_model(p, x, t);
    auto [gamma, tau] = sub.constants(model);
    if (!(gamma > 0) || !(tau > 0) || tau > 1)
      fail(ErrorCode::InvalidRateConstants, "subscheme constants outside (0,1]");
    long T = 1;
    if (4 * t * gamma > 1) T = std::max<long>(1, static_cast<long>(std::ceil(std::log(4 * t * gamma) / tau)));
    Vector x1 = sub.run(model, x, T);
    total_inner += T;

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.step_norm = (x - x1).norm();
    rec.prox_grad_norm = rec.step_norm / t;
    rec.inner_iters = T;
    rec.counters = *p.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);

    x = x1;
    F = objective_value(p, x);
    if (cfg.grad_tol > 0 && rec.prox_grad_norm <= cfg.grad_tol) break;
  }
  tr.stats["total_inner_passes"] = static_cast<double>(total_inner);
  tr.x_final = x;
  tr.F_final = F;
  return tr;
}

}  // namespace proxlin
