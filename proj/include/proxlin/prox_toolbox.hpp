#pragma once

// Library of prox-friendly convex functions and the Moreau-envelope
// calculus built on top of them.  Every prox here is exact (closed form
// or a finite algorithm), which is what makes the dual subproblem
// machinery trustworthy.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "proxlin/core.hpp"

namespace proxlin {

inline ProxFunction zero_function() {
  ProxFunction f;
  f.value = [](const Vector&) { return 0.0; };
  f.prox = [](double, const Vector& x) { return x; };
  f.lipschitz = 0.0;
  f.grad_lipschitz = 0.0;
  f.grad = [](const Vector& x) { return Vector(Vector::Zero(x.size())); };
  f.is_zero = true;
  f.affine_slope = std::nullopt;
  return f;
}

// weight * sum_i |z_i|; dim only feeds the Lipschitz constant
inline ProxFunction l1_norm(Eigen::Index dim, double weight = 1.0) {
  require(weight >= 0, "l1 weight must be nonnegative");
  ProxFunction f;
  f.value = [weight](const Vector& z) { return weight * z.lpNorm<1>(); };
  f.prox = [weight](double t, const Vector& x) {
    double s = t * weight;
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      out[i] = (x[i] > s) ? x[i] - s : (x[i] < -s ? x[i] + s : 0.0);
    return out;
  };
  f.lipschitz = weight * std::sqrt(static_cast<double>(dim));
  f.sep_abs_weight = weight;
  return f;
}

inline ProxFunction l2_norm(double weight = 1.0) {
  require(weight >= 0, "l2 weight must be nonnegative");
  ProxFunction f;
  f.value = [weight](const Vector& z) { return weight * z.norm(); };
  f.prox = [weight](double t, const Vector& x) {
    double n = x.norm(), s = t * weight;
    if (n <= s) return Vector(Vector::Zero(x.size()));
    return Vector(x * (1.0 - s / n));
  };
  f.lipschitz = weight;
  return f;
}

// (weight/2) |z - center|^2
inline ProxFunction squared_l2(double weight, Vector center) {
  require(weight > 0, "quadratic weight must be positive");
  ProxFunction f;
  Vector c = std::move(center);
  f.value = [weight, c](const Vector& z) { return 0.5 * weight * (z - c).squaredNorm(); };
  f.prox = [weight, c](double t, const Vector& x) {
    return Vector((x + (t * weight) * c) / (1.0 + t * weight));
  };
  f.grad = [weight, c](const Vector& z) { return Vector(weight * (z - c)); };
  f.grad_lipschitz = weight;
  f.strong_convexity = weight;
  f.quadratic = ProxFunction::Quadratic{weight, c};
  return f;
}

inline ProxFunction box_indicator(Vector lo, Vector hi) {
  require(lo.size() == hi.size() && (hi - lo).minCoeff() >= 0, "box bounds out of order");
  ProxFunction f;
  Vector l = std::move(lo), h = std::move(hi);
  f.value = [l, h](const Vector& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (z[i] < l[i] - 1e-12 || z[i] > h[i] + 1e-12)
        return std::numeric_limits<double>::infinity();
    return 0.0;
  };
  f.prox = [l, h](double, const Vector& x) {
    return Vector(x.cwiseMax(l).cwiseMin(h));
  };
  f.domain_diameter = (h - l).norm();
  return f;
}

inline ProxFunction nonneg_indicator() {
  ProxFunction f;
  f.value = [](const Vector& z) {
    return z.minCoeff() < -1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  f.prox = [](double, const Vector& x) { return Vector(x.cwiseMax(0.0)); };
  return f;
}

// <slope, z>; prox is a shift, and linear h makes the whole linearized
// subproblem collapse to a single prox of g
inline ProxFunction linear_functional(Vector slope) {
  ProxFunction f;
  Vector s = std::move(slope);
  f.value = [s](const Vector& z) { return s.dot(z); };
  f.prox = [s](double t, const Vector& x) { return Vector(x - t * s); };
  f.lipschitz = s.norm();
  f.grad = [s](const Vector&) { return s; };
  f.grad_lipschitz = 0.0;
  f.affine_slope = s;
  return f;
}

inline ProxFunction identity_scalar() {
  Vector one(1);
  one[0] = 1.0;
  return linear_functional(one);
}

// Euclidean projection onto the probability simplex {w >= 0, sum w = 1}
inline Vector project_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0, tau = 0;
  int rho = 0;
  for (size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    double t = (1.0 - cum) / static_cast<double>(j + 1);
    if (u[j] + t > 0) { rho = static_cast<int>(j + 1); tau = t; }
  }
  (void)rho;
  return (v.array() + tau).cwiseMax(0.0).matrix();
}

// max_i z_i; prox via Moreau decomposition against the simplex
inline ProxFunction max_of_coordinates() {
  ProxFunction f;
  f.value = [](const Vector& z) { return z.maxCoeff(); };
  f.prox = [](double t, const Vector& x) {
    return Vector(x - t * project_simplex(x / t));
  };
  f.lipschitz = 1.0;
  return f;
}

// weight * dist(z, nonnegative orthant)
inline ProxFunction dist_to_nonneg(double weight = 1.0) {
  require(weight >= 0, "distance weight must be nonnegative");
  ProxFunction f;
  f.value = [weight](const Vector& z) { return weight * z.cwiseMin(0.0).norm(); };
  f.prox = [weight](double t, const Vector& x) {
    Vector neg = x.cwiseMin(0.0);
    double d = neg.norm(), s = t * weight;
    if (d == 0) return x;
    double shrink = std::min(s / d, 1.0);
    return Vector(x - shrink * neg);
  };
  f.lipschitz = weight;
  return f;
}

// s * f for s > 0; prox_{t(sf)} = prox_{(ts)f}
inline ProxFunction scale_function(ProxFunction f, double s) {
  require(s > 0, "scale must be positive");
  ProxFunction out;
  auto base = std::make_shared<ProxFunction>(std::move(f));
  out.value = [base, s](const Vector& z) { return s * base->value(z); };
  out.prox = [base, s](double t, const Vector& x) { return base->prox(t * s, x); };
  if (base->lipschitz) out.lipschitz = s * *base->lipschitz;
  if (base->grad_lipschitz) out.grad_lipschitz = s * *base->grad_lipschitz;
  if (base->grad) {
    auto g = base->grad;
    out.grad = [g, s](const Vector& z) { return Vector(s * g(z)); };
  }
  out.strong_convexity = s * base->strong_convexity;
  out.domain_diameter = base->domain_diameter;
  out.convex = base->convex;
  out.is_zero = base->is_zero;
  if (base->affine_slope) out.affine_slope = Vector(s * *base->affine_slope);
  if (base->sep_abs_weight) out.sep_abs_weight = s * *base->sep_abs_weight;
  if (base->quadratic)
    out.quadratic = ProxFunction::Quadratic{s * base->quadratic->weight, base->quadratic->center};
  return out;
}

// f(z) = sum_k f_k(z_k) over a partition of the coordinates
inline ProxFunction separable_concat(std::vector<std::pair<ProxFunction, Eigen::Index>> parts) {
  require(!parts.empty(), "empty concat");
  auto ps = std::make_shared<std::vector<std::pair<ProxFunction, Eigen::Index>>>(std::move(parts));
  ProxFunction out;
  out.value = [ps](const Vector& z) {
    double v = 0;
    Eigen::Index off = 0;
    for (const auto& [f, n] : *ps) { v += f.value(z.segment(off, n)); off += n; }
    return v;
  };
  out.prox = [ps](double t, const Vector& x) {
    Vector out_v(x.size());
    Eigen::Index off = 0;
    for (const auto& [f, n] : *ps) { out_v.segment(off, n) = f.prox(t, x.segment(off, n)); off += n; }
    return out_v;
  };
  double lip2 = 0, glip = 0, sc = std::numeric_limits<double>::infinity();
  bool have_lip = true, have_glip = true, have_grad = true;
  for (const auto& [f, n] : *ps) {
    (void)n;
    if (f.lipschitz) lip2 += *f.lipschitz * *f.lipschitz; else have_lip = false;
    if (f.grad_lipschitz) glip = std::max(glip, *f.grad_lipschitz); else have_glip = false;
    if (!f.grad) have_grad = false;
    sc = std::min(sc, f.strong_convexity);
  }
  if (have_lip) out.lipschitz = std::sqrt(lip2);
  if (have_glip) out.grad_lipschitz = glip;
  out.strong_convexity = std::isfinite(sc) ? sc : 0.0;
  if (have_grad) {
    out.grad = [ps](const Vector& z) {
      Vector g(z.size());
      Eigen::Index off = 0;
      for (const auto& [f, n] : *ps) { g.segment(off, n) = f.grad(z.segment(off, n)); off += n; }
      return g;
    };
  }
  return out;
}

// ---- Moreau envelope calculus ----------------------------------------

inline void check_envelope_base(const ProxFunction& f, double nu) {
  require(nu > 0, "envelope parameter must be positive");
  require(static_cast<bool>(f.prox), "envelope needs a prox");
  if (!f.convex) fail(ErrorCode::NonConvexBase, "envelope calculus needs a convex base");
}

// f_nu(x) = min_z f(z) + |z-x|^2/(2 nu); one prox call
inline double envelope_value(const ProxFunction& f, double nu, const Vector& x) {
  check_envelope_base(f, nu);
  Vector p = f.prox(nu, x);
  return f.value(p) + (x - p).squaredNorm() / (2 * nu);
}

// grad f_nu(x) = (x - prox_{nu f}(x)) / nu, exact
inline Vector envelope_gradient(const ProxFunction& f, double nu, const Vector& x) {
  check_envelope_base(f, nu);
  return (x - f.prox(nu, x)) / nu;
}

// prox of the conjugate via Moreau decomposition:
// prox_{t h*}(w) = w - t prox_{h/t}(w/t)
inline Vector prox_conjugate(const ProxFunction& h, double t, const Vector& w) {
  require(t > 0, "conjugate prox stepsize must be positive");
  return w - t * h.prox(1.0 / t, w / t);
}

// prox of the envelope in terms of the base prox:
// prox_{t h_nu}(x) = (nu x + t prox_{(t+nu) h}(x)) / (t + nu)
inline Vector prox_of_envelope(const ProxFunction& h, double nu, double t, const Vector& x) {
  check_envelope_base(h, nu);
  require(t > 0, "prox stepsize must be positive");
  return (nu * x + t * h.prox(t + nu, x)) / (t + nu);
}

// The envelope packaged as a ProxFunction of its own: smooth (gradient
// Lipschitz 1/nu), same Lipschitz constant as the base, exact prox.
inline ProxFunction envelope_function(ProxFunction base, double nu) {
  check_envelope_base(base, nu);
  auto b = std::make_shared<ProxFunction>(std::move(base));
  ProxFunction f;
  f.value = [b, nu](const Vector& x) { return envelope_value(*b, nu, x); };
  f.prox = [b, nu](double t, const Vector& x) { return prox_of_envelope(*b, nu, t, x); };
  f.grad = [b, nu](const Vector& x) { return envelope_gradient(*b, nu, x); };
  f.grad_lipschitz = 1.0 / nu;
  f.lipschitz = b->lipschitz;
  if (b->strong_convexity > 0)
    f.strong_convexity = b->strong_convexity / (1.0 + nu * b->strong_convexity);
  return f;
}

// Huber penalty = weight * (envelope of the l1 norm at level kappa);
// a single implementation, no separate closed form to drift out of sync
inline ProxFunction huber(Eigen::Index dim, double kappa, double weight = 1.0) {
  require(kappa > 0, "huber kappa must be positive");
  ProxFunction f = envelope_function(l1_norm(dim, 1.0), kappa);
  if (weight != 1.0) f = scale_function(std::move(f), weight);
  return f;
}

}  // namespace proxlin
