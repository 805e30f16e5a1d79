#pragma once
// Stationarity verification layer.  Everything here answers one question:
// given a point the solver produced, how do we *certify* what it claims?
// The workhorse is a high-accuracy prox of the full composite, from which
// the envelope gradient and perturbation certificates follow.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "proxlin/core.hpp"
#include "proxlin/rng.hpp"
#include "proxlin/subproblem.hpp"

namespace proxlin {

namespace detail {

// g plus the penalty |z - x|^2 / (2 nu).  Structural hints are rebuilt so
// the box-QP engine stays available: zero/affine/quadratic g all collapse
// to a quadratic once the penalty is added.
inline ProxFunction shifted_g(const ProxFunction& g, const Vector& x, double nu) {
  ProxFunction out;
  const ProxFunction base = g;
  const Vector xc = x;
  out.value = [base, xc, nu](const Vector& z) {
    return base.value(z) + (z - xc).squaredNorm() / (2 * nu);
  };
  // min_z base(z) + |z-xc|^2/(2nu) + |z-u|^2/(2tau) merges the quadratics
  out.prox = [base, xc, nu](double tau, const Vector& u) {
    return base.prox(tau * nu / (tau + nu), (tau * xc + nu * u) / (tau + nu));
  };
  out.strong_convexity = base.strong_convexity + 1.0 / nu;
  out.domain_diameter = base.domain_diameter;
  if (base.is_zero) {
    out.quadratic = ProxFunction::Quadratic{1.0 / nu, xc};
  } else if (base.affine_slope) {
    out.quadratic = ProxFunction::Quadratic{1.0 / nu, xc - nu * *base.affine_slope};
  } else if (base.quadratic) {
    double w = base.quadratic->weight + 1.0 / nu;
    out.quadratic = ProxFunction::Quadratic{
        w, Vector((base.quadratic->weight * base.quadratic->center + xc / nu) / w)};
  }
  return out;
}

}  // namespace detail

struct ProxPointResult {
  Vector x_hat;
  double dist_bound = 0;     // certified |x_hat - prox_{nu F}(x)|
  double phi_gap_bound = 0;  // certified gap on the penalized objective
  int outer_iters = 0;
  long inner_iters = 0;
};

// High-accuracy prox_{nu F}(x) for nu < 1/mu.  Runs linearized steps on the
// penalized objective phi = F + |. - x|^2/(2 nu), which is s-strongly convex
// with s = 1/nu - mu (+ any strong convexity of g).  With step 1/(mu + 1/nu)
// the model is an upper bound, and a step of norm D from z certifies
//   phi(z+) - inf phi  <=  D^2 ((1/t' + mu)^2/(2s) + mu) + inner_gap,
// which strong convexity converts into a distance bound.
inline ProxPointResult composite_prox_point(const CompositeProblem& p, const Vector& x,
                                            double nu, double dist_tol, int max_outer = 4000,
                                            long inner_budget = detail::kDefaultDualBudget) {
  require(nu > 0 && dist_tol > 0, "prox point needs positive nu and dist_tol");
  require(p.mu * nu < 1.0, "prox of the composite needs nu < 1/mu");

  CompositeProblem pen = p;
  pen.g = detail::shifted_g(p.g, x, nu);

  const double mu = p.mu;
  const double s = 1.0 / nu - mu + p.g.strong_convexity;
  const double tp = 1.0 / (mu + 1.0 / nu);
  const double coeff = (2 * mu + 1.0 / nu) * (2 * mu + 1.0 / nu) / (2 * s) + mu;
  const double gap_target = s * dist_tol * dist_tol / 2;
  // near the fixpoint the certificate bottoms out at roughly this multiple
  // of the inner gap (solver jitter + the step-norm inflation), so targets
  // below the double-precision gap floor are raised to what is achievable
  const double sigma = 1.0 / tp + pen.g.strong_convexity;
  const double ratio = 4 * coeff / sigma + 4 * coeff * tp + 1;

  ProxPointResult res;
  Vector z = x, warm;
  for (int k = 0; k < max_outer; ++k) {
    LinearizedModel model = make_model(pen, z, tp);
    double floor = 4e-15 * (1 + std::abs(model_partial_value(model, z)));
    double target = std::max(gap_target, 4 * ratio * floor);
    double inner_gap = std::max(target / (4 * ratio), floor);
    SubproblemSolution sol =
        solve_function_gap(model, inner_gap, inner_budget, warm.size() ? &warm : nullptr);
    warm = sol.w;
    res.inner_iters += sol.inner_iters;
    ++res.outer_iters;

    // inexact inner solve perturbs the step norm by at most sqrt(2 gap t')
    double step = (sol.x_plus - z).norm() + std::sqrt(2 * inner_gap * tp);
    z = sol.x_plus;
    res.phi_gap_bound = step * step * coeff + inner_gap;
    if (res.phi_gap_bound <= target) {
      res.x_hat = z;
      res.dist_bound = std::sqrt(2 * res.phi_gap_bound / s);
      return res;
    }
  }
  fail(ErrorCode::BudgetExhausted, "composite prox point did not certify the distance target");
}

// Two-sided comparison of |G_t(x)| against the envelope gradient at the
// matched parameter t/(1 + t mu).  The envelope gradient is recovered from a
// certified prox point; its accuracy is tightened until the certification
// error is negligible at the requested relative slack.
struct SandwichReport {
  double g_norm = 0;
  double env_norm = 0;  // |grad of the envelope at parameter t/(1+t mu)|
  double env_err = 0;   // certified absolute error on env_norm
  double lo_const = 0, hi_const = 0;
  bool lower_ok = false, upper_ok = false;
  bool ok() const { return lower_ok && upper_ok; }
};

inline SandwichReport check_sandwich(const CompositeProblem& p, const Vector& x, double t,
                                     double rel_slack = 1e-5) {
  require(t > 0, "sandwich check needs t > 0");
  const double mu = p.mu;
  const double lam = t / (1 + t * mu);

  SandwichReport rep;
  rep.lo_const = 1.0 / ((1 + mu * t) * (1 + std::sqrt(mu * t)));
  rep.hi_const = (1 + 2 * t * mu) / (1 + t * mu) * (std::sqrt(t * mu / (1 + t * mu)) + 1);
  rep.g_norm = prox_gradient_norm(p, x, t);

  // coarse pass fixes the scale, fine pass certifies at the needed accuracy
  double dtol = 1e-4 * lam * (1 + rep.g_norm);
  for (int pass = 0; pass < 2; ++pass) {
    ProxPointResult pr = composite_prox_point(p, x, lam, dtol);
    rep.env_norm = (x - pr.x_hat).norm() / lam;
    rep.env_err = pr.dist_bound / lam;
    double scale = std::max(rep.env_norm, rep.g_norm);
    double want = 0.02 * rel_slack * lam * std::max(scale, 1e-12);
    if (dtol <= want) break;
    dtol = want;
  }
  rep.lower_ok =
      rep.lo_const * (rep.env_norm - rep.env_err) <= rep.g_norm * (1 + rel_slack) + 1e-15;
  rep.upper_ok =
      rep.g_norm <= rep.hi_const * (rep.env_norm + rep.env_err) * (1 + rel_slack) + 1e-15;
  return rep;
}

// Perturbation certificate at step 1/mu: the (uncomputable in general) point
// x_hat = prox_{F/(2mu)}(x) is computed here to certified accuracy, and the
// three advertised properties are checked against |G_{1/mu}(x)|:
//   |x_hat - x|  <= (2/mu) |G|,   F(x_hat) <= F(x),
//   2 mu (x - x_hat) is a subgradient at x_hat, of norm <= 4 |G|.
struct StationarityCertificate {
  Vector x_hat;
  Vector witness;  // 2 mu (x - x_hat)
  double g_norm = 0;
  double dist_x = 0;
  double witness_norm = 0;
  double F_x = 0, F_hat = 0;
  double dist_bound = 0;
  bool near_ok = false;
  bool descent_ok = false;
  bool witness_ok = false;
  bool ok() const { return near_ok && descent_ok && witness_ok; }
};

inline StationarityCertificate near_stationarity_certificate(const CompositeProblem& p,
                                                             const Vector& x,
                                                             double dist_tol = 0) {
  require(p.mu > 0, "certificate needs positive curvature mu");
  const double mu = p.mu;
  const double nu = 1 / (2 * mu);

  StationarityCertificate cert;
  cert.F_x = objective_value(p, x);
  cert.g_norm = prox_gradient_norm(p, x, 1 / mu);
  if (dist_tol <= 0) {
    // stay above the float floor of the gap certificate, but track |G| down
    double floor = 3e-7 * std::sqrt((1 + std::abs(cert.F_x)) / mu);
    dist_tol = std::max(floor, 1e-4 * (2 / mu) * cert.g_norm);
  }

  ProxPointResult pr = composite_prox_point(p, x, nu, dist_tol);
  cert.x_hat = pr.x_hat;
  cert.dist_bound = pr.dist_bound;
  cert.F_hat = objective_value(p, cert.x_hat);
  cert.dist_x = (x - cert.x_hat).norm();
  cert.witness = 2 * mu * (x - cert.x_hat);
  cert.witness_norm = cert.witness.norm();

  double tiny = 1e-12 * (1 + cert.dist_x);
  cert.near_ok = cert.dist_x <= (2 / mu) * cert.g_norm + pr.dist_bound + tiny;
  // F(x_hat) <= F(x) + phi-gap: the exact prox point descends, and the gap
  // bound absorbs the inexactness of ours
  cert.descent_ok = cert.F_hat <= cert.F_x + pr.phi_gap_bound + 1e-12 * (1 + std::abs(cert.F_x));
  cert.witness_ok =
      cert.witness_norm <= 4 * cert.g_norm + 2 * mu * pr.dist_bound + 2 * mu * tiny;
  return cert;
}

// --- sampled inequality probes ---

struct ProbeReport {
  double worst_margin = std::numeric_limits<double>::infinity();  // min(rhs - lhs)
  int violations = 0;
  int samples = 0;
};

// |F(z) - F(z;y)| <= (mu/2) |z-y|^2 at random pairs, and the one-sided
// refinement F(z;y) <= F(z) + (r/2) |z-y|^2 when the instance declares r.
inline ProbeReport model_error_probe(const CompositeProblem& p, const Vector& center,
                                     double radius, int samples, uint64_t seed,
                                     double rel_slack = 1e-9) {
  ProbeReport rep;
  Rng rng(mix64(seed, 0xe10de1));
  for (int i = 0; i < samples; ++i) {
    Vector y = center, z = center;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      y[j] += radius * rng.gaussian();
      z[j] += radius * rng.gaussian();
    }
    LinearizedModel m = make_model(p, y, 1.0);
    double model = model_partial_value(m, z);
    double truth = objective_value(p, z);
    double d2 = (z - y).squaredNorm();
    double slack = rel_slack * (1 + std::abs(truth) + std::abs(model));

    double margin = (p.mu / 2) * d2 + slack - std::abs(truth - model);
    double margin_r = truth + (p.r / 2) * d2 + slack - model;
    rep.worst_margin = std::min({rep.worst_margin, margin, margin_r});
    if (margin < 0 || margin_r < 0) ++rep.violations;
    ++rep.samples;
  }
  return rep;
}

// approximate secant inequality of weak convexity, with modulus p.rho:
// F(a x + (1-a) y) <= a F(x) + (1-a) F(y) + rho a (1-a) |x-y|^2
inline ProbeReport weak_convexity_probe(const CompositeProblem& p, const Vector& center,
                                        double radius, int samples, uint64_t seed,
                                        double rel_slack = 1e-9) {
  ProbeReport rep;
  Rng rng(mix64(seed, 0x5eca17));
  for (int i = 0; i < samples; ++i) {
    Vector x = center, y = center;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      x[j] += radius * rng.gaussian();
      y[j] += radius * rng.gaussian();
    }
    double a = rng.uniform();
    Vector mid = a * x + (1 - a) * y;
    double lhs = objective_value(p, mid);
    double rhs = a * objective_value(p, x) + (1 - a) * objective_value(p, y) +
                 p.rho * a * (1 - a) * (x - y).squaredNorm();
    double margin = rhs + rel_slack * (1 + std::abs(lhs) + std::abs(rhs)) - lhs;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < 0) ++rep.violations;
    ++rep.samples;
  }
  return rep;
}

// Penalization principle for an eps-minimizer x of f: the prox displacement
// obeys |x - prox_{lam f}(x)|/lam <= sqrt(2 eps/lam), improving to
// sqrt(eps / (lam (1 + lam alpha/2))) under alpha-strong convexity.
struct PenalizationReport {
  double lhs = 0;
  double rhs_plain = 0;
  double rhs_strong = 0;
  bool ok_plain = false;
  bool ok_strong = false;
  bool ok() const { return ok_plain && ok_strong; }
};

inline PenalizationReport quadratic_penalization_check(const ProxFunction& f, const Vector& x,
                                                       double lambda, double f_inf,
                                                       double rel_slack = 1e-9) {
  require(lambda > 0, "penalization check needs lambda > 0");
  double eps = f.value(x) - f_inf;
  require(eps >= 0, "f_inf is not a lower bound at the probe point");
  PenalizationReport rep;
  rep.lhs = (x - f.prox(lambda, x)).norm() / lambda;
  rep.rhs_plain = std::sqrt(2 * eps / lambda);
  rep.rhs_strong = std::sqrt(eps / (lambda * (1 + lambda * f.strong_convexity / 2)));
  double slack = rel_slack * (1 + rep.lhs);
  rep.ok_plain = rep.lhs <= rep.rhs_plain + slack;
  rep.ok_strong = rep.lhs <= rep.rhs_strong + slack;
  return rep;
}

// The full model objective z -> model_value(m, z) packaged as a prox-friendly
// function: the added quadratic merges with the model's own, so the prox is
// one more subproblem solve at a shrunken parameter.  The model keeps a
// pointer to its problem, which must outlive the returned function.
inline ProxFunction model_objective_function(LinearizedModel m, double tol_scale = 1e-12) {
  ProxFunction f;
  f.strong_convexity = model_strong_convexity(*m.prob, m.t);
  f.value = [m](const Vector& z) { return model_value(m, z); };
  f.prox = [m, tol_scale](double tau, const Vector& w) {
    double tt = m.t * tau / (m.t + tau);
    Vector vt = tt * (m.v / m.t + w / tau);
    // re-anchoring the prox center moves the h-argument; push the difference
    // into the constant term so arg(z) is unchanged
    LinearizedModel merged = shifted_model(m, m.alpha * jac_vec(*m.prob, m.y, vt - m.v));
    merged.v = vt;
    merged.t = tt;
    merged.ell = (merged.alpha * merged.opn) * (merged.alpha * merged.opn) /
                 model_strong_convexity(*merged.prob, tt);
    return solve_exact(merged, tol_scale).x_plus;
  };
  return f;
}

// --- trace audits ---

// Per-step sufficient decrease and the telescoped efficiency bound, read off
// a trace of the exact method (records carry F(x_j) and |G_t(x_j)|).
struct TraceAuditReport {
  bool descent_ok = true;
  bool efficiency_ok = true;
  int first_bad_step = -1;
  double worst_descent_margin = std::numeric_limits<double>::infinity();
};

inline TraceAuditReport audit_exact_descent(const Trace& tr, double t, double rel_slack = 1e-9) {
  TraceAuditReport rep;
  const auto& rs = tr.records;
  const size_t n = rs.size();
  double best_g2 = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < n; ++j) {
    double F_next = (j + 1 < n) ? rs[j + 1].F_val : tr.F_final;
    double g2 = rs[j].prox_grad_norm * rs[j].prox_grad_norm;
    double slack = rel_slack * (1 + std::abs(rs[j].F_val));
    double margin = (rs[j].F_val - F_next) - (t / 2) * g2;
    rep.worst_descent_margin = std::min(rep.worst_descent_margin, margin + slack);
    if (margin + slack < 0 && rep.descent_ok) {
      rep.descent_ok = false;
      rep.first_bad_step = static_cast<int>(j);
    }
    best_g2 = std::min(best_g2, g2);
    // prefix bound with F(x_N) standing in for the unknown infimum
    double N = static_cast<double>(j + 1);
    double rhs = 2 * (rs[0].F_val - F_next) / (t * N);
    if (best_g2 > rhs + rel_slack * (1 + std::abs(rhs)) && rep.efficiency_ok) {
      rep.efficiency_ok = false;
      if (rep.first_bad_step < 0) rep.first_bad_step = static_cast<int>(j);
    }
  }
  return rep;
}

}  // namespace proxlin
