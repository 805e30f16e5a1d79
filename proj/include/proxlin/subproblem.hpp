#pragma once

// Linearized proximal subproblems and their solvers.  The model at center
// (y, v) with curvature parameter t is
//
//   minimize_z  g(z) + hscale * h(u0 + alpha * J_y (z - v)) + |z - v|^2 / (2t)
//
// with u0 = c(y), J_y = grad c(y).  The plain model has y = v, alpha =
// hscale = 1; the two-center variant used by the accelerated methods has
// hscale = 1/alpha.  Solvers work on the Fenchel dual
//
//   phi(w) = q(w) + (hscale h)*(w),   q(w) = G*(-A^T w) - <b, w>,
//
// whose smooth part has gradient alpha * J (v - xbar(w)) - u0 with
// xbar(w) = prox_{tg}(v - t alpha J^T w); every dual point certifies a
// primal candidate through xbar, and the Fenchel gap at (w, xbar(w)) is an
// exact optimality certificate.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>

#include "proxlin/core.hpp"
#include "proxlin/prox_toolbox.hpp"

namespace proxlin {

struct LinearizedModel {
  const CompositeProblem* prob = nullptr;
  Vector y;   // linearization point
  Vector v;   // prox center
  Vector u0;  // c(y)
  double alpha = 1.0;
  double hscale = 1.0;
  double t = 0.0;
  double opn = 0.0;  // operator norm of grad c(y) (estimate or bound)
  double ell = 0.0;  // Lipschitz constant of the dual smooth part
};

inline double model_strong_convexity(const CompositeProblem& p, double t) {
  return 1.0 / t + p.g.strong_convexity;
}

inline LinearizedModel make_model(const CompositeProblem& p, const Vector& y, double t) {
  require(t > 0, "model parameter t must be positive");
  LinearizedModel m;
  m.prob = &p;
  m.y = y;
  m.v = y;
  m.u0 = eval_c(p, y);
  m.t = t;
  m.opn = opnorm_at(p, y);
  m.ell = (m.alpha * m.opn) * (m.alpha * m.opn) / model_strong_convexity(p, t);
  return m;
}

inline LinearizedModel make_two_center_model(const CompositeProblem& p, const Vector& y,
                                             const Vector& v, double alpha, double t) {
  require(t > 0 && alpha > 0 && alpha <= 1, "two-center model needs t>0, alpha in (0,1]");
  LinearizedModel m;
  m.prob = &p;
  m.y = y;
  m.v = v;
  m.u0 = eval_c(p, y);
  m.alpha = alpha;
  m.hscale = 1.0 / alpha;
  m.t = t;
  m.opn = opnorm_at(p, y);
  m.ell = (alpha * m.opn) * (alpha * m.opn) / model_strong_convexity(p, t);
  return m;
}

// same model with the h-argument displaced by zeta
inline LinearizedModel shifted_model(LinearizedModel m, const Vector& zeta) {
  m.u0 += zeta;
  return m;
}

inline Vector model_arg(const LinearizedModel& m, const Vector& z) {
  Vector d = z - m.v;
  if (d.isZero(0.0)) return m.u0;
  return m.u0 + m.alpha * jac_vec(*m.prob, m.y, d);
}

// g(z) + hscale h(arg); the model without its quadratic
inline double model_partial_value(const LinearizedModel& m, const Vector& z) {
  return m.prob->g.value(z) + m.hscale * m.prob->h.value(model_arg(m, z));
}

inline double model_value(const LinearizedModel& m, const Vector& z) {
  return model_partial_value(m, z) + (z - m.v).squaredNorm() / (2 * m.t);
}

// ---- dual primitives ---------------------------------------------------

inline Vector primal_from_dual(const LinearizedModel& m, const Vector& w) {
  return prox_g(*m.prob, m.t, m.v - (m.t * m.alpha) * jac_tvec(*m.prob, m.y, w));
}

struct QGrad {
  Vector grad;  // gradient of the dual smooth part at w
  Vector xbar;  // certified primal candidate
};

inline QGrad q_gradient(const LinearizedModel& m, const Vector& w) {
  QGrad out;
  out.xbar = primal_from_dual(m, w);
  out.grad = m.alpha * jac_vec(*m.prob, m.y, m.v - out.xbar) - m.u0;
  return out;
}

// prox of the scaled conjugate: prox_{s (hscale h)*}(omega), with the exact
// conjugate value at the output point via Fenchel-Young equality
struct DualPoint {
  Vector w;
  double hstar = 0;  // (hscale h)*(w), exact
  Vector u;          // the primal witness attaining it
};

inline DualPoint dual_prox(const LinearizedModel& m, double s, const Vector& omega) {
  DualPoint d;
  d.u = prox_h(*m.prob, m.hscale / s, omega / s);
  d.w = omega - s * d.u;
  d.hstar = d.w.dot(d.u) - m.hscale * m.prob->h.value(d.u);
  return d;
}

// Fenchel gap at (w, xbar(w)) given the smooth gradient there; nonnegative,
// and an upper bound on the primal model gap of xbar
inline double fenchel_gap(const LinearizedModel& m, const Vector& w, double hstar_w,
                          const Vector& q_grad_at_w) {
  Vector ubar = -q_grad_at_w;  // u0 + alpha J (xbar - v)
  double gap = m.hscale * m.prob->h.value(ubar) + hstar_w - w.dot(ubar);
  return std::max(gap, 0.0);
}

struct SubproblemSolution {
  Vector x_plus;
  enum class Kind { ExactWithinTol, FunctionGap, DualStationary } kind = Kind::FunctionGap;
  double gap = 0;        // certified model gap (Exact/FunctionGap)
  Vector zeta;           // certified dual subgradient (DualStationary)
  double zeta_norm = 0;
  long inner_iters = 0;
  Vector w;              // dual point, reusable as a warm start
};

namespace detail {

constexpr long kDefaultDualBudget = 8'000'000;

// Degenerate case: a vanishing Jacobian decouples the model, so one prox
// of g solves it exactly.
inline std::optional<SubproblemSolution> try_zero_jacobian(const LinearizedModel& m) {
  if (m.opn != 0.0) return std::nullopt;
  SubproblemSolution sol;
  sol.x_plus = prox_g(*m.prob, m.t, m.v);
  sol.kind = SubproblemSolution::Kind::ExactWithinTol;
  sol.gap = 0;
  sol.w = dual_prox(m, 1.0, Vector(Vector::Zero(m.prob->c.dim_out))).w;
  sol.zeta = Vector::Zero(m.prob->c.dim_out);
  return sol;
}

// Closed-form solve when h is affine: the model collapses to one prox of g.
inline std::optional<SubproblemSolution> try_affine_h(const LinearizedModel& m) {
  const ProxFunction& h = m.prob->h;
  if (!h.affine_slope) return std::nullopt;
  const Vector& slope = *h.affine_slope;
  Vector dir = jac_tvec(*m.prob, m.y, slope);
  SubproblemSolution sol;
  sol.x_plus = prox_g(*m.prob, m.t, m.v - (m.t * m.hscale * m.alpha) * dir);
  sol.kind = SubproblemSolution::Kind::ExactWithinTol;
  sol.gap = 0;
  sol.w = m.hscale * slope;
  sol.zeta = Vector::Zero(slope.size());
  return sol;
}

// Box-constrained QP engine: applies when h = w_abs * |.|_1 (possibly
// scaled) and g is zero or a simple quadratic.  The dual is then
//   min  (c2/2) w' K w - <u_hat0, w>   over |w|_inf <= R
// with K = J J^T, solved by projected Newton steps on the free face.
struct BoxQpSetup {
  Matrix Jd;
  Matrix K;
  Vector xhat0, uhat0;
  double c2 = 0, teff = 0, R = 0;
};

inline bool boxqp_applicable(const LinearizedModel& m) {
  const ProxFunction& g = m.prob->g;
  return m.prob->h.sep_abs_weight.has_value() && (g.is_zero || g.quadratic.has_value());
}

inline BoxQpSetup boxqp_setup(const LinearizedModel& m) {
  const CompositeProblem& p = *m.prob;
  const Eigen::Index dim = p.c.dim_in, mm = p.c.dim_out;
  BoxQpSetup s;
  s.Jd.resize(mm, dim);
  if (dim <= mm) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      Vector e = Vector::Zero(dim);
      e[i] = 1;
      s.Jd.col(i) = jac_vec(p, m.y, e);
    }
  } else {
    for (Eigen::Index i = 0; i < mm; ++i) {
      Vector e = Vector::Zero(mm);
      e[i] = 1;
      s.Jd.row(i) = jac_tvec(p, m.y, e).transpose();
    }
  }
  s.K = s.Jd * s.Jd.transpose();
  double qw = p.g.is_zero ? 0.0 : p.g.quadratic->weight;
  Vector qc = p.g.is_zero ? Vector(Vector::Zero(dim)) : p.g.quadratic->center;
  s.teff = m.t / (1.0 + m.t * qw);
  s.xhat0 = s.teff * (qw * qc + m.v / m.t);
  s.c2 = s.teff * m.alpha * m.alpha;
  s.R = m.hscale * *p.h.sep_abs_weight;
  s.uhat0 = m.u0 + m.alpha * (s.Jd * (s.xhat0 - m.v));
  return s;
}

inline std::optional<SubproblemSolution> try_boxqp(const LinearizedModel& m, double gap_target,
                                                   const Vector* warm) {
  if (!boxqp_applicable(m)) return std::nullopt;
  BoxQpSetup s = boxqp_setup(m);
  const Eigen::Index mm = s.K.rows();
  const double R = s.R;

  Vector w = (warm && warm->size() == mm) ? warm->cwiseMax(-R).cwiseMin(R)
                                          : Vector(Vector::Zero(mm));
  auto psi = [&](const Vector& u) { return 0.5 * s.c2 * u.dot(s.K * u) - s.uhat0.dot(u); };
  double gersh = s.c2 * s.K.cwiseAbs().rowwise().sum().maxCoeff() + 1e-300;
  double gap = std::numeric_limits<double>::infinity();
  long it = 0;

  if (mm == 1) {
    double k = s.K(0, 0) * s.c2;
    double wopt = (k > 0) ? s.uhat0[0] / k : (s.uhat0[0] > 0 ? R : -R);
    w[0] = std::clamp(wopt, -R, R);
    Vector grad = s.c2 * (s.K * w) - s.uhat0;
    gap = std::max(R * grad.lpNorm<1>() + w.dot(grad), 0.0);
    // ubar = -grad; gap = R|ubar|_1 - <w, ubar>
  } else {
    const double act_tol = 1e-12 * (1 + R);
    for (; it < 400; ++it) {
      Vector grad = s.c2 * (s.K * w) - s.uhat0;
      Vector ubar = -grad;
      gap = std::max(R * ubar.lpNorm<1>() - w.dot(ubar), 0.0);
      if (gap <= gap_target) break;

      std::vector<Eigen::Index> free;
      free.reserve(mm);
      for (Eigen::Index i = 0; i < mm; ++i) {
        bool pinned = (w[i] >= R - act_tol && grad[i] <= 0) ||
                      (w[i] <= -R + act_tol && grad[i] >= 0);
        if (!pinned) free.push_back(i);
      }
      Vector dir = Vector::Zero(mm);
      if (!free.empty()) {
        Matrix Kff(free.size(), free.size());
        Vector gf(free.size());
        for (size_t a = 0; a < free.size(); ++a) {
          gf[a] = grad[free[a]];
          for (size_t b = 0; b < free.size(); ++b) Kff(a, b) = s.c2 * s.K(free[a], free[b]);
        }
        Kff.diagonal().array() += 1e-13 * (1 + Kff.diagonal().maxCoeff());
        Vector df = Kff.ldlt().solve(-gf);
        for (size_t a = 0; a < free.size(); ++a) dir[free[a]] = df[a];
      }
      if (free.empty() || dir.dot(grad) >= 0) dir = -grad;

      double base = psi(w), step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        Vector wn = (w + step * dir).cwiseMax(-R).cwiseMin(R);
        if (psi(wn) <= base + 1e-4 * grad.dot(wn - w)) {
          w = wn;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) w = (w - (1.0 / gersh) * grad).cwiseMax(-R).cwiseMin(R);
    }
  }
  if (gap > gap_target) return std::nullopt;  // let the general engine take over

  SubproblemSolution sol;
  sol.x_plus = s.xhat0 - (s.teff * m.alpha) * (s.Jd.transpose() * w);
  sol.kind = SubproblemSolution::Kind::FunctionGap;
  sol.gap = gap;
  sol.w = w;
  sol.inner_iters = it;
  return sol;
}

// Accelerated gradient on the dual (estimate-sequence form).  Strong
// convexity of (hscale h)* kicks in automatically when h is smooth.  Every
// iterate is a conjugate-prox output, so its Fenchel gap certificate is
// exact; stop on either the gap or the stationarity residual zeta.
struct DualStop {
  double gap_target = -1;
  double zeta_target = -1;
};

inline SubproblemSolution dual_fgm(const LinearizedModel& m, DualStop stop, long budget,
                                   const Vector* warm) {
  const ProxFunction& h = m.prob->h;
  const double l = std::max(m.ell, 1e-300);
  const double alpha_sc =
      (h.grad_lipschitz && *h.grad_lipschitz > 0) ? 1.0 / (m.hscale * *h.grad_lipschitz) : 0.0;

  const Eigen::Index mm = m.prob->c.dim_out;
  Vector w0 = (warm && warm->size() == mm) ? *warm : Vector(Vector::Zero(mm));
  w0 = dual_prox(m, 1.0, w0).w;  // land inside dom (hscale h)*

  double theta = 0;
  Vector acc = Vector::Zero(mm);  // accumulated a_j * grad q(x_j)
  Vector xd = w0, vd = w0;

  for (long j = 0; j < budget; ++j) {
    double C = 2 * (1 + alpha_sc * theta) / l;
    double a = 0.5 * (C + std::sqrt(C * C + 4 * C * theta));
    double theta1 = theta + a;
    Vector yd = (theta * xd + a * vd) / theta1;

    QGrad gy = q_gradient(m, yd);
    DualPoint cand = dual_prox(m, 1.0 / l, yd - gy.grad / l);
    QGrad gc = q_gradient(m, cand.w);

    double gap = fenchel_gap(m, cand.w, cand.hstar, gc.grad);
    if (stop.gap_target >= 0 && gap <= stop.gap_target) {
      SubproblemSolution sol;
      sol.x_plus = gc.xbar;
      sol.kind = SubproblemSolution::Kind::FunctionGap;
      sol.gap = gap;
      sol.w = cand.w;
      sol.inner_iters = j + 1;
      return sol;
    }
    if (stop.zeta_target >= 0) {
      // one more conjugate-prox step from cand.w gives a point w2 with an
      // explicit subgradient of the dual objective:
      //   zeta = l (w - w2) + grad q(w2) - grad q(w)  in  d phi(w2)
      DualPoint probe = dual_prox(m, 1.0 / l, cand.w - gc.grad / l);
      QGrad gp = q_gradient(m, probe.w);
      Vector zeta = l * (cand.w - probe.w) + gp.grad - gc.grad;
      double zn = zeta.norm();
      if (zn <= stop.zeta_target) {
        SubproblemSolution sol;
        sol.x_plus = gp.xbar;  // exact minimizer of the zeta-shifted model
        sol.kind = SubproblemSolution::Kind::DualStationary;
        sol.zeta = zeta;
        sol.zeta_norm = zn;
        sol.gap = fenchel_gap(m, probe.w, probe.hstar, gp.grad);
        sol.w = probe.w;
        sol.inner_iters = j + 1;
        return sol;
      }
    }

    acc += a * gc.grad;
    theta = theta1;
    vd = dual_prox(m, theta, w0 - acc).w;
    xd = cand.w;
  }
  fail(ErrorCode::DualBudgetExhausted, "dual solver ran out of iterations");
}

}  // namespace detail

inline double exact_solve_tol(const LinearizedModel& m, double scale = 1e-12) {
  return scale * (1 + std::abs(model_partial_value(m, m.v)));
}

inline SubproblemSolution solve_function_gap(const LinearizedModel& m, double eps,
                                             long budget = detail::kDefaultDualBudget,
                                             const Vector* warm = nullptr) {
  require(eps >= 0, "gap target must be nonnegative");
  if (auto sol = detail::try_affine_h(m)) return *sol;
  if (auto sol = detail::try_zero_jacobian(m)) return *sol;
  if (auto sol = detail::try_boxqp(m, eps, warm)) return *sol;
  return detail::dual_fgm(m, detail::DualStop{eps, -1}, budget, warm);
}

inline SubproblemSolution solve_exact(const LinearizedModel& m,
                                      double tol_scale = 1e-12,
                                      long budget = detail::kDefaultDualBudget,
                                      const Vector* warm = nullptr) {
  SubproblemSolution sol = solve_function_gap(m, exact_solve_tol(m, tol_scale), budget, warm);
  sol.kind = SubproblemSolution::Kind::ExactWithinTol;
  return sol;
}

inline SubproblemSolution solve_dual_stationary(const LinearizedModel& m, double eps_zeta,
                                                long budget = detail::kDefaultDualBudget,
                                                const Vector* warm = nullptr) {
  require(eps_zeta >= 0, "stationarity target must be nonnegative");
  auto sol = detail::try_affine_h(m);
  if (!sol) sol = detail::try_zero_jacobian(m);
  if (sol) {
    sol->kind = SubproblemSolution::Kind::DualStationary;
    sol->zeta = Vector::Zero(m.prob->c.dim_out);
    sol->zeta_norm = 0;
    return *sol;
  }
  return detail::dual_fgm(m, detail::DualStop{-1, eps_zeta}, budget, warm);
}

// G_t(y) = (y - S_t(y)) / t for a plain model
inline Vector prox_gradient(const LinearizedModel& m, double tol_scale = 1e-12) {
  SubproblemSolution sol = solve_exact(m, tol_scale);
  return (m.v - sol.x_plus) / m.t;
}

// High-accuracy |G_t(x)|; the requested accuracy is converted into a model
// gap through strong convexity, floored near machine precision.  The warm
// pointer is read and updated for cheap chains of nearby evaluations.
inline double prox_gradient_norm(const CompositeProblem& p, const Vector& x, double t,
                                 double g_tol = 1e-10, Vector* warm_io = nullptr) {
  LinearizedModel m = make_model(p, x, t);
  double eps = std::max(g_tol * g_tol * t / 2, 4e-15 * (1 + std::abs(model_partial_value(m, x))));
  SubproblemSolution sol =
      solve_function_gap(m, eps, detail::kDefaultDualBudget, warm_io);
  if (warm_io) *warm_io = sol.w;
  return (x - sol.x_plus).norm() / t;
}

// ---- diagnostics on the dual itself -------------------------------------

struct DualModel {
  LinearizedModel model;
};

inline DualModel make_dual(LinearizedModel m) { return DualModel{std::move(m)}; }

// Value and smooth-part gradient of the dual objective at w.  The conjugate
// value is evaluated through a tiny conjugate-prox probe, which doubles as a
// domain check: points visibly outside dom (hscale h)* are rejected.
inline std::pair<double, Vector> dual_objective_and_gradient(const DualModel& dm,
                                                             const Vector& w) {
  const LinearizedModel& m = dm.model;
  double sigma = 1e-9 * (1 + w.norm());
  DualPoint dp = dual_prox(m, sigma, w);
  if ((dp.w - w).norm() > 1e-5 * (1 + w.norm()))
    fail(ErrorCode::OutsideDualDomain, "dual objective queried outside its domain");
  QGrad qg = q_gradient(m, w);
  Vector ubar = -qg.grad;
  double G_val = m.prob->g.value(qg.xbar) + (qg.xbar - m.v).squaredNorm() / (2 * m.t);
  double q_val = -w.dot(ubar) - G_val;
  return {q_val + dp.hstar, qg.grad};
}

// Auslender-Teboulle-type optimal method on the dual, run for a fixed
// budget; returns the running primal average, whose model gap is certified
// a priori at 8 l Lh^2 / (budget+1)^2 with Lh the Lipschitz constant of
// hscale * h.
struct OptimalMethodResult {
  Vector v_primal;
  Vector w_dual;
  double certified_gap = 0;
  long iters = 0;
};

inline OptimalMethodResult optimal_method_run(const DualModel& dm, long budget) {
  const LinearizedModel& m = dm.model;
  require(budget >= 1, "optimal method needs at least one iteration");
  const double l = std::max(m.ell, 1e-300);
  const Eigen::Index mm = m.prob->c.dim_out;

  double a = 1.0;
  Vector z = dual_prox(m, 1.0, Vector(Vector::Zero(mm))).w;
  Vector w = z;
  Vector v_avg = Vector::Zero(m.prob->c.dim_in);

  for (long j = 0; j < budget; ++j) {
    Vector yd = (1 - a) * w + a * z;
    QGrad gy = q_gradient(m, yd);
    v_avg = (1 - a) * v_avg + a * gy.xbar;
    double s = 1.0 / (a * l);
    DualPoint zp = dual_prox(m, s, z - s * gy.grad);
    w = (1 - a) * w + a * zp.w;
    z = zp.w;
    double a2 = a * a;
    a = 0.5 * (std::sqrt(a2 * a2 + 4 * a2) - a2);
  }

  OptimalMethodResult out;
  out.v_primal = v_avg;
  out.w_dual = w;
  double Lh = m.hscale * m.prob->h.lipschitz.value_or(0.0);
  out.certified_gap = 8.0 * l * Lh * Lh / static_cast<double>((budget + 1) * (budget + 1));
  out.iters = budget;
  return out;
}

}  // namespace proxlin
