#pragma once

// Finite-sum composite problems
//   F(x) = g(x) + (1/m) sum_i h_i(c_i(x))
// with scalar penalties h_i and scalar component maps c_i.  The aggregate
// view stacks the components into one R^m-valued map; per-coordinate
// constants convert as lip(h) = L/sqrt(m), beta_agg = beta sqrt(m), so
// mu = L beta either way.  Subproblems become convex finite sums
//   (1/m) sum_i h_i(u0_i + <row_i, z - v>) + g(z) + |z - v|^2 / (2t)
// and are handled by Prox-SVRG over the fixed rows row_i = grad c_i(y).

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "proxlin/core.hpp"
#include "proxlin/prox_linear.hpp"
#include "proxlin/prox_toolbox.hpp"
#include "proxlin/subproblem.hpp"

namespace proxlin {

// Scalar penalty with a raw-double interface so inner loops stay cheap.
struct ScalarPenalty {
  std::function<double(double)> value;
  std::function<double(double, double)> prox;  // prox(t, x)
  std::optional<double> lipschitz;
  std::optional<double> grad_lipschitz;        // set when deriv exists and is Lipschitz
  std::function<double(double)> deriv;
  std::optional<double> sep_abs_weight;        // value(x) = w |x|
  bool convex = true;
};

inline ScalarPenalty scalar_abs(double weight = 1.0) {
  ScalarPenalty s;
  s.value = [weight](double x) { return weight * std::abs(x); };
  s.prox = [weight](double t, double x) {
    double tw = t * weight;
    return x > tw ? x - tw : (x < -tw ? x + tw : 0.0);
  };
  s.lipschitz = weight;
  s.sep_abs_weight = weight;
  return s;
}

inline ScalarPenalty scalar_identity() {
  ScalarPenalty s;
  s.value = [](double x) { return x; };
  s.prox = [](double t, double x) { return x - t; };
  s.deriv = [](double) { return 1.0; };
  s.lipschitz = 1.0;
  s.grad_lipschitz = 0.0;
  return s;
}

// m (h/m)_nu: the component-level smoothing that makes the aggregate equal
// the Moreau envelope of the aggregate at the same nu.
inline ScalarPenalty scalar_smoothed(const ScalarPenalty& h, double m, double nu) {
  require(nu > 0 && m >= 1, "scalar smoothing needs nu>0 and m>=1");
  require(h.convex, "envelope calculus needs a convex base");
  ScalarPenalty s;
  auto base = std::make_shared<ScalarPenalty>(h);
  s.value = [base, m, nu](double x) {
    double y = base->prox(nu / m, x);
    return base->value(y) + m * (y - x) * (y - x) / (2 * nu);
  };
  s.deriv = [base, m, nu](double x) { return m * (x - base->prox(nu / m, x)) / nu; };
  s.prox = [base, m, nu](double t, double x) {
    // prox of t * m * (h/m)_nu via the prox-of-envelope identity
    double tm = t * m;
    return (nu * x + tm * base->prox((tm + nu) / m, x)) / (tm + nu);
  };
  s.lipschitz = h.lipschitz;
  s.grad_lipschitz = m / nu;
  return s;
}

struct FiniteSumProblem {
  ProxFunction g;
  std::vector<ScalarPenalty> comps;  // h_i
  SmoothMap c;                       // stacked components, dim_out = comps.size()
  double comp_beta = 0;              // Lipschitz constant of each x -> grad c_i(x)
  std::optional<double> diameter_M;
  std::shared_ptr<OracleCounters> tally = std::make_shared<OracleCounters>();

  Eigen::Index m() const { return static_cast<Eigen::Index>(comps.size()); }
  Eigen::Index dim() const { return c.dim_in; }

  double comp_lipschitz() const {
    double L = 0;
    for (const auto& h : comps) L = std::max(L, h.lipschitz.value_or(0.0));
    return L;
  }
  // max_i lip(h_i'), empty when some component is nonsmooth
  std::optional<double> comp_grad_lipschitz() const {
    double out = 0;
    for (const auto& h : comps) {
      if (!h.grad_lipschitz) return std::nullopt;
      out = std::max(out, *h.grad_lipschitz);
    }
    return out;
  }
};

inline FiniteSumProblem smoothed_finite_sum(const FiniteSumProblem& fs, double nu) {
  FiniteSumProblem out = fs;
  double m = static_cast<double>(fs.m());
  for (auto& h : out.comps) h = scalar_smoothed(h, m, nu);
  return out;
}

// Aggregate h(z) = (1/m) sum_i h_i(z_i) as one prox-friendly function; its
// prox splits coordinate-wise into prox_{(t/m) h_i}.
inline ProxFunction aggregate_penalty(std::vector<ScalarPenalty> comps) {
  require(!comps.empty(), "aggregate of an empty family");
  auto sh = std::make_shared<std::vector<ScalarPenalty>>(std::move(comps));
  const double m = static_cast<double>(sh->size());
  ProxFunction h;
  h.value = [sh, m](const Vector& z) {
    double s = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) s += (*sh)[static_cast<size_t>(i)].value(z[i]);
    return s / m;
  };
  h.prox = [sh, m](double t, const Vector& z) {
    Vector out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      out[i] = (*sh)[static_cast<size_t>(i)].prox(t / m, z[i]);
    return out;
  };
  double lip2 = 0;
  bool smooth = true, abs_like = true;
  double glip = 0, w0 = (*sh)[0].sep_abs_weight.value_or(-1);
  for (const auto& hi : *sh) {
    lip2 += hi.lipschitz.value_or(0.0) * hi.lipschitz.value_or(0.0);
    if (hi.grad_lipschitz) glip = std::max(glip, *hi.grad_lipschitz); else smooth = false;
    if (!hi.sep_abs_weight || *hi.sep_abs_weight != w0) abs_like = false;
  }
  h.lipschitz = std::sqrt(lip2) / m;
  if (smooth) {
    h.grad_lipschitz = glip / m;
    h.grad = [sh, m](const Vector& z) {
      Vector out(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i)
        out[i] = (*sh)[static_cast<size_t>(i)].deriv(z[i]) / m;
      return out;
    };
  }
  if (abs_like && w0 >= 0) h.sep_abs_weight = w0 / m;
  return h;
}

inline CompositeProblem as_composite(const FiniteSumProblem& fs) {
  require(fs.c.dim_out == fs.m(), "component count must match the stacked map");
  CompositeProblem p = make_problem(fs.g, aggregate_penalty(fs.comps), fs.c, fs.diameter_M);
  p.tally = fs.tally;
  return p;
}

// ---- Prox-SVRG on a linearized subproblem --------------------------------

// Frozen view of one subproblem: rows of grad c(y), the offsets, and the
// prox of p(z) = g(z) + |z - v|^2/(2t).
struct FiniteSumModelView {
  const FiniteSumProblem* fs = nullptr;
  Matrix rows;   // m x d, row i = grad c_i(y)
  Vector u0;     // c(y)
  Vector v;
  double t = 0;
  double ell = 0;       // max_i lip(h_i') |row_i|^2, smoothness of each f_i
  double alpha_sc = 0;  // 1/t + strong convexity of g

  double arg(Eigen::Index i, const Vector& z) const { return u0[i] + rows.row(i).dot(z - v); }

  double comp_deriv(Eigen::Index i, double s) const {
    return fs->comps[static_cast<size_t>(i)].deriv(s);
  }

  // gradient of f_i(z) = h_i(u0_i + <row_i, z-v>), for tests and full passes
  Vector comp_grad(Eigen::Index i, const Vector& z) const {
    return comp_deriv(i, arg(i, z)) * rows.row(i).transpose();
  }

  Vector full_gradient(const Vector& z) const {
    const Eigen::Index mm = rows.rows();
    Vector d(mm);
    Vector shifted = u0 + rows * (z - v);
    for (Eigen::Index i = 0; i < mm; ++i) d[i] = comp_deriv(i, shifted[i]);
    return rows.transpose() * d / static_cast<double>(mm);
  }

  Vector prox_p(double eta, const Vector& u) const {
    double s = eta * t / (eta + t);
    return fs->g.prox(s, (eta * v + t * u) / (eta + t));
  }

  double smooth_value(const Vector& z) const {
    const Eigen::Index mm = rows.rows();
    Vector shifted = u0 + rows * (z - v);
    double s = 0;
    for (Eigen::Index i = 0; i < mm; ++i)
      s += fs->comps[static_cast<size_t>(i)].value(shifted[i]);
    return s / static_cast<double>(mm);
  }

  double model_value(const Vector& z) const {
    return smooth_value(z) + fs->g.value(z) + (z - v).squaredNorm() / (2 * t);
  }
};

inline FiniteSumModelView make_view(const FiniteSumProblem& fs, const LinearizedModel& m) {
  require(m.alpha == 1.0 && m.hscale == 1.0, "finite-sum view needs a plain model");
  require(m.prob->c.dim_out == fs.m(), "model and finite sum disagree on m");
  auto glip = fs.comp_grad_lipschitz();
  require(glip.has_value(), "incremental solves need smooth components");
  FiniteSumModelView view;
  view.fs = &fs;
  const Eigen::Index mm = fs.m(), d = fs.dim();
  view.rows.resize(mm, d);
  for (Eigen::Index i = 0; i < mm; ++i) {
    Vector e = Vector::Zero(mm);
    e[i] = 1;
    view.rows.row(i) = jac_tvec(*m.prob, m.y, e).transpose();
  }
  view.u0 = m.u0;
  view.v = m.v;
  view.t = m.t;
  view.ell = *glip * view.rows.rowwise().squaredNorm().maxCoeff();
  view.alpha_sc = 1.0 / m.t + fs.g.strong_convexity;
  return view;
}

// The variance-reduced inner gradient v_j = vtilde + grad f_i(z) - grad
// f_i(ztilde); averaging over i recovers the full gradient exactly.
inline Vector svrg_inner_gradient(const FiniteSumModelView& view, Eigen::Index i,
                                  const Vector& z, const Vector& ztilde,
                                  const Vector& vtilde) {
  double di = view.comp_deriv(i, view.arg(i, z)) - view.comp_deriv(i, view.arg(i, ztilde));
  return vtilde + di * view.rows.row(i).transpose();
}

struct SvrgConfig {
  double eta = 0;
  long J = 0;
  uint64_t seed = 1;

  // the textbook parameters: eta = 1/(10 ell) and J = ceil(100 kappa)
  static SvrgConfig standard(double ell, double alpha, uint64_t seed = 1) {
    require(ell > 0 && alpha > 0, "svrg needs positive ell and alpha");
    SvrgConfig cfg;
    cfg.eta = 1.0 / (10 * ell);
    cfg.J = static_cast<long>(std::ceil(100 * ell / alpha));
    cfg.seed = seed;
    return cfg;
  }
};

struct SvrgStats {
  long comp_grads = 0;  // individual component-gradient evaluations
  long epochs = 0;
};

// One run of Prox-SVRG: each epoch takes a full gradient pass at the anchor
// and J randomized corrected steps, and outputs the average of the epoch's
// iterates.  Epoch indices feed a counter-mode generator, so runs are
// reproducible and distinct epochs are independent.
inline Vector prox_svrg_run(const FiniteSumModelView& view, const Vector& z0, long epochs,
                            const SvrgConfig& cfg, SvrgStats* stats = nullptr) {
  require(cfg.eta > 0 && cfg.J >= 1, "svrg config not initialized");
  const Eigen::Index mm = view.rows.rows();
  Vector xt = z0;           // epoch anchor
  Vector anchor_arg(mm), anchor_deriv(mm);
  for (long s = 1; s <= epochs; ++s) {
    anchor_arg = view.u0 + view.rows * (xt - view.v);
    double inv_m = 1.0 / static_cast<double>(mm);
    for (Eigen::Index i = 0; i < mm; ++i) anchor_deriv[i] = view.comp_deriv(i, anchor_arg[i]);
    Vector vt = view.rows.transpose() * anchor_deriv * inv_m;
    if (stats) stats->comp_grads += mm;

    Vector x = xt, sum = Vector::Zero(xt.size());
    for (long j = 1; j <= cfg.J; ++j) {
      auto i = static_cast<Eigen::Index>(
          mix64(cfg.seed, static_cast<uint64_t>(s), static_cast<uint64_t>(j)) %
          static_cast<uint64_t>(mm));
      double aj = view.u0[i] + view.rows.row(i).dot(x - view.v);
      double di = view.comp_deriv(i, aj) - anchor_deriv[i];
      Vector vj = vt + di * view.rows.row(i).transpose();
      x = view.prox_p(cfg.eta, x - cfg.eta * vj);
      sum += x;
      if (stats) stats->comp_grads += 2;
    }
    xt = sum / static_cast<double>(cfg.J);
    if (stats) ++stats->epochs;
  }
  return xt;
}

// Prox-SVRG as a functional-rate subscheme: with the textbook parameters the
// expected gap contracts by 0.9 per epoch.  Wrap with with_descent_start to
// use it inside run_coupled.  The finite sum must outlive the subscheme, and
// models handed to it must be plain models over its aggregate.
inline FunctionalRateSubscheme svrg_subscheme(const FiniteSumProblem& fs, uint64_t seed = 1) {
  const FiniteSumProblem* p = &fs;
  FunctionalRateSubscheme sub;
  sub.run = [p, seed](const LinearizedModel& m, const Vector& z0, long iters) {
    FiniteSumModelView view = make_view(*p, m);
    return prox_svrg_run(view, z0, iters, SvrgConfig::standard(view.ell, view.alpha_sc, seed));
  };
  sub.constants = [p](const LinearizedModel& m) {
    FiniteSumModelView view = make_view(*p, m);
    return std::make_tuple(1.0, 0.1, view.ell);
  };
  sub.prox_gradient_step = [p](const LinearizedModel& m, const Vector& z0) {
    FiniteSumModelView view = make_view(*p, m);
    return view.prox_p(1.0 / view.ell, z0 - view.full_gradient(z0) / view.ell);
  };
  return sub;
}

// ---- smoothed finite-sum driver -------------------------------------------

struct FiniteSumDriverConfig {
  int max_outer = 400;
  uint64_t seed = 1;
  long J_cap = 100'000;      // inner steps per epoch are theory-capped at this
  long epoch_cap = 200'000;  // per subproblem
  double norm_check_tol_factor = 100;  // smoothed-norm accuracy = target / this
};

// Smoothed incremental driver: replaces each h_i by m (h_i/m)_nu with
//   nu = m eps^2 / (2 L^3 beta)    (per-component L and beta),
// runs prox-linear steps at t = 1/mu whose subproblems are solved by
// Prox-SVRG epochs until a prox-gradient certificate on the model clears the
// step tolerance, and stops once the smoothed norm falls to eps/2, which
// certifies |G_{1/mu}| <= eps for the original problem.
inline std::pair<Vector, Trace> run_finite_sum_driver(const FiniteSumProblem& fs, const Vector& x0,
                                                      double eps,
                                                      const FiniteSumDriverConfig& cfg = {}) {
  require(eps > 0, "target accuracy must be positive");
  const double m = static_cast<double>(fs.m());
  const double L = fs.comp_lipschitz();
  const double beta = fs.comp_beta;
  require(L > 0 && beta > 0, "driver needs positive per-component constants");
  const double nu = m * eps * eps / (2 * L * L * L * beta);

  FiniteSumProblem fss = smoothed_finite_sum(fs, nu);
  CompositeProblem ps = as_composite(fss);
  require(ps.mu > 0, "driver needs positive aggregate curvature");
  const double t = 1.0 / ps.mu;
  const double target = eps / 2;
  const double norm_tol = target / cfg.norm_check_tol_factor;

  Trace tr;
  tr.stats["t"] = t;
  tr.stats["nu"] = nu;
  Vector x = x0;
  double F = objective_value(ps, x);
  tr.stats["F0"] = F;
  Vector warm_norm;
  SvrgStats svrg_stats;

  int k = 0;
  for (; k < cfg.max_outer; ++k) {
    long long t0 = detail::now_ns();
    double g_nu = prox_gradient_norm(ps, x, t, norm_tol, &warm_norm);

    IterateRecord rec;
    rec.k = k;
    rec.F_val = F;
    rec.prox_grad_norm_true = g_nu;
    rec.prox_grad_norm = g_nu + target;  // bound on the unsmoothed norm

    if (g_nu <= target - norm_tol) {
      rec.counters = *fs.tally;
      rec.wall_ns = detail::now_ns() - t0;
      tr.records.push_back(rec);
      break;
    }

    LinearizedModel model = make_model(ps, x, t);
    FiniteSumModelView view = make_view(fss, model);
    SvrgConfig scfg = SvrgConfig::standard(view.ell, view.alpha_sc,
                                           mix64(cfg.seed, static_cast<uint64_t>(k)));
    scfg.J = std::min(scfg.J, cfg.J_cap);

    // epoch-adaptive solve: after each epoch, one prox-gradient probe gives
    // an explicit model subgradient of norm <= 2 ell |z - z'|, so strong
    // convexity certifies the gap; stop once it clears the step tolerance
    double eps_k = std::max(t * target * target / 16,
                            4e-15 * (1 + std::abs(model_partial_value(model, x))));
    Vector z = x;
    double gap_cert = std::numeric_limits<double>::infinity();
    long epochs = 0;
    while (true) {
      Vector zp = view.prox_p(1.0 / view.ell, z - view.full_gradient(z) / view.ell);
      svrg_stats.comp_grads += 2 * fs.m();
      gap_cert = 2 * view.ell * view.ell * (z - zp).squaredNorm() / view.alpha_sc;
      z = zp;
      if (gap_cert <= eps_k) break;
      if (epochs >= cfg.epoch_cap)
        fail(ErrorCode::BudgetExhausted, "subproblem epochs exhausted");
      z = prox_svrg_run(view, z, 1, scfg, &svrg_stats);
      ++epochs;
    }

    rec.eps_k = gap_cert;
    rec.step_norm = (x - z).norm();
    rec.inner_iters = epochs;
    x = z;
    F = objective_value(ps, x);
    rec.counters = *fs.tally;
    rec.wall_ns = detail::now_ns() - t0;
    tr.records.push_back(rec);
  }
  if (k >= cfg.max_outer)
    fail(ErrorCode::BudgetExhausted, "finite-sum driver did not reach its target");

  CompositeProblem orig = as_composite(fs);
  tr.stats["final_smoothed_norm"] =
      tr.records.empty() ? 0.0 : *tr.records.back().prox_grad_norm_true;
  tr.stats["final_true_norm"] = prox_gradient_norm(orig, x, t, eps / 100);
  tr.stats["component_grads"] = static_cast<double>(svrg_stats.comp_grads);
  tr.stats["svrg_epochs"] = static_cast<double>(svrg_stats.epochs);
  tr.x_final = x;
  tr.F_final = objective_value(orig, x);
  return {x, tr};
}

}  // namespace proxlin
