#pragma once

// Accelerated gradient method for additive composite problems
//   minimize  f(x) + p(x),   f smooth with L_f-Lipschitz gradient,
//                            p prox-friendly, alpha-strongly convex (alpha >= 0).
// Estimate-sequence form: the running lower model is
//   psi_j(z) = |z - x0|^2/2 + sum_i a_i [f(x_i) + <grad f(x_i), z - x_i> + p(z)],
// so its minimizer is one prox of p with parameter theta_j.  Each iteration
// costs exactly two gradient and two prox evaluations; the small-residual
// variant adds a third prox that manufactures an explicit subgradient of
// f + p, usable as a stopping certificate.

#include <cmath>
#include <utility>
#include <vector>

#include "proxlin/core.hpp"

namespace proxlin {

struct AdditiveCompositeInstance {
  std::function<double(const Vector&)> f_value;
  std::function<Vector(const Vector&)> f_grad;
  double L_f = 0;
  ProxFunction p;

  double value(const Vector& x) const { return f_value(x) + p.value(x); }
};

struct FgmRecord {
  int j = 0;
  double objective = 0;  // (f + p)(x_j)
};

struct FgmResult {
  Vector x;
  std::vector<FgmRecord> trace;
  long iters = 0;
  double residual_bound = 0;  // 2 L_f |x - xhat| at exit, small-residual mode only
  Vector x_hat;               // prox-gradient point carrying the certificate
};

namespace detail {

struct FgmState {
  double theta = 0;
  Vector acc;  // sum_i a_i grad f(x_i)
  Vector x, v, x0;

  explicit FgmState(const Vector& start)
      : acc(Vector::Zero(start.size())), x(start), v(start), x0(start) {}

  // one accelerated step; returns the new iterate's gradient so callers can
  // reuse it without a third evaluation
  Vector advance(const AdditiveCompositeInstance& inst) {
    const double alpha = inst.p.strong_convexity;
    double C = 2 * (1 + alpha * theta) / inst.L_f;
    double a = 0.5 * (C + std::sqrt(C * C + 4 * C * theta));
    double theta1 = theta + a;
    Vector y = (theta * x + a * v) / theta1;
    Vector gy = inst.f_grad(y);
    x = inst.p.prox(1.0 / inst.L_f, y - gy / inst.L_f);
    Vector gx = inst.f_grad(x);
    acc += a * gx;
    theta = theta1;
    v = inst.p.prox(theta, x0 - acc);
    return gx;
  }
};

}  // namespace detail

// Runs n_iters accelerated steps, recording the objective at every iterate.
inline FgmResult fgm_run(const AdditiveCompositeInstance& inst, const Vector& x0, int n_iters) {
  require(inst.L_f > 0, "fgm needs a positive smoothness constant");
  require(static_cast<bool>(inst.f_grad) && static_cast<bool>(inst.p.prox), "fgm needs oracles");
  detail::FgmState st(x0);
  FgmResult out;
  out.trace.push_back({0, inst.value(x0)});
  for (int j = 1; j <= n_iters; ++j) {
    st.advance(inst);
    out.trace.push_back({j, inst.value(st.x)});
  }
  out.x = st.x;
  out.iters = n_iters;
  return out;
}

// Small-residual variant: after each step, a prox-gradient probe at x gives
// xhat with dist(0, d(f+p)(xhat)) <= 2 L_f |x - xhat|; stop when that bound
// reaches eps.  Probe cost: one extra prox, no extra gradient.
inline FgmResult fgm_run_small_residual(const AdditiveCompositeInstance& inst, const Vector& x0,
                                        double eps, long max_iters) {
  require(inst.L_f > 0, "fgm needs a positive smoothness constant");
  require(eps > 0, "residual target must be positive");
  detail::FgmState st(x0);
  FgmResult out;

  Vector g = inst.f_grad(x0);
  Vector xhat = inst.p.prox(1.0 / inst.L_f, x0 - g / inst.L_f);
  double bound = 2 * inst.L_f * (st.x - xhat).norm();
  long j = 0;
  while (bound > eps) {
    if (j >= max_iters) fail(ErrorCode::BudgetExhausted, "small-residual fgm hit its budget");
    g = st.advance(inst);  // gradient at the fresh iterate, reused by the probe
    xhat = inst.p.prox(1.0 / inst.L_f, st.x - g / inst.L_f);
    bound = 2 * inst.L_f * (st.x - xhat).norm();
    ++j;
  }
  out.x = st.x;
  out.x_hat = xhat;
  out.residual_bound = bound;
  out.iters = j;
  return out;
}

// Explicit subgradient of f + p at the prox-gradient point xhat of x:
//   v = L_f (x - xhat) - grad f(x) + grad f(xhat),  |v| <= 2 L_f |x - xhat|.
inline Vector prox_gradient_subgradient(const AdditiveCompositeInstance& inst, const Vector& x,
                                        const Vector& xhat) {
  return inst.L_f * (x - xhat) - inst.f_grad(x) + inst.f_grad(xhat);
}

}  // namespace proxlin
