#pragma once

// Problem data model: prox-friendly convex pieces, smooth maps with
// Jacobian-vector products, and the composite problem
//   F(x) = g(x) + h(c(x))
// together with oracle counters and per-iterate trace records.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxlin/rng.hpp"

namespace proxlin {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  NonFiniteValue,
  BudgetExhausted,
  StepIncreasedObjective,
  CertificateMissing,
  DualBudgetExhausted,
  InvalidRateConstants,
  InvalidMuTilde,
  DimensionMismatch,
  OutsideDualDomain,
  NonConvexBase,
  BudgetTooSmall,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::StepIncreasedObjective: return "StepIncreasedObjective";
    case ErrorCode::CertificateMissing: return "CertificateMissing";
    case ErrorCode::DualBudgetExhausted: return "DualBudgetExhausted";
    case ErrorCode::InvalidRateConstants: return "InvalidRateConstants";
    case ErrorCode::InvalidMuTilde: return "InvalidMuTilde";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutsideDualDomain: return "OutsideDualDomain";
    case ErrorCode::NonConvexBase: return "NonConvexBase";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
  }
  return "Unknown";
}

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw SolverError(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, what);
}

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) fail(ErrorCode::NonFiniteValue, what);
}

struct OracleCounters {
  long n_c_eval = 0;
  long n_jvp = 0;
  long n_vjp = 0;
  long n_prox_h = 0;
  long n_prox_g = 0;

  void reset() { *this = OracleCounters{}; }
  long total() const { return n_c_eval + n_jvp + n_vjp + n_prox_h + n_prox_g; }
};

// Closed convex function given by value and scaled prox:
//   prox(t, x) = argmin_z  value(z) + |z - x|^2 / (2t).
// Optional metadata feeds step sizes and rate constants; the structural
// hints below let subproblem solvers pick specialized engines.
struct ProxFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(double, const Vector&)> prox;

  // set when finite: lip |f(x)-f(y)| <= lipschitz * |x-y|
  std::optional<double> lipschitz;
  double strong_convexity = 0.0;
  // set when differentiable with Lipschitz gradient
  std::optional<double> grad_lipschitz;
  std::function<Vector(const Vector&)> grad;  // exact gradient when smooth
  // diameter of the domain, when bounded
  std::optional<double> domain_diameter;
  // builders always produce convex functions; envelope calculus refuses
  // anything a caller marks otherwise
  bool convex = true;

  // structural hints
  bool is_zero = false;
  std::optional<Vector> affine_slope;   // value(z) = <slope, z> (+ const)
  std::optional<double> sep_abs_weight; // value(z) = w * sum_i |z_i|
  struct Quadratic {
    double weight = 0;  // value(z) = (weight/2) |z - center|^2
    Vector center;
  };
  std::optional<Quadratic> quadratic;
};

// Smooth map c : R^dim_in -> R^dim_out with Jacobian-vector products.
//   jvp(x, v) = grad_c(x) * v,  vjp(x, w) = grad_c(x)^T * w.
struct SmoothMap {
  Eigen::Index dim_in = 0;
  Eigen::Index dim_out = 0;
  std::function<Vector(const Vector&)> eval;
  std::function<Vector(const Vector&, const Vector&)> jvp;
  std::function<Vector(const Vector&, const Vector&)> vjp;

  double beta = 0.0;          // Lipschitz constant of x -> grad_c(x) in operator norm
  double opnorm_bound = 0.0;  // bound on |grad_c(x)|_op over the relevant region
  // when true, solvers refresh the operator norm at the current point
  // instead of trusting opnorm_bound globally
  bool per_point_opnorm = false;
};

// Power iteration on grad_c(x)^T grad_c(x); cheap local operator-norm
// estimate used when per_point_opnorm is set.
inline double opnorm_local(const SmoothMap& c, const Vector& x,
                           int iters = 50, uint64_t seed = 12345) {
  Rng rng(mix64(seed, static_cast<uint64_t>(x.size())));
  Vector v(c.dim_in);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
  double nv = v.norm();
  if (nv == 0) v.setOnes(); else v /= nv;
  double sigma = 0;
  for (int i = 0; i < iters; ++i) {
    Vector u = c.jvp(x, v);
    sigma = u.norm();
    if (sigma == 0) return 0;
    v = c.vjp(x, u / sigma);
    double n = v.norm();
    if (n == 0) return sigma;
    v /= n;
  }
  return sigma;
}

// F(x) = g(x) + h(c(x)); mu = lip(h) * lip(grad_c) controls every step size.
struct CompositeProblem {
  ProxFunction g;
  ProxFunction h;
  SmoothMap c;
  double mu = 0.0;

  std::optional<double> diameter_M;  // diam(dom g), when bounded
  // curvature metadata: model error |F(z) - F(z;y)| <= (mu/2)|z-y|^2 always
  // holds; rho (weak convexity of h o c) and r (one-sided model bound) may
  // be smaller for structured instances, e.g. both 0 when c is affine.
  double rho = 0.0;
  double r = 0.0;

  std::shared_ptr<OracleCounters> tally = std::make_shared<OracleCounters>();

  double L() const { return h.lipschitz.value_or(0.0); }
  double beta() const { return c.beta; }

  CompositeProblem with_fresh_tally() const {
    CompositeProblem p = *this;
    p.tally = std::make_shared<OracleCounters>();
    return p;
  }
};

inline CompositeProblem make_problem(ProxFunction g, ProxFunction h, SmoothMap c,
                                     std::optional<double> diameter_M = {}) {
  require(static_cast<bool>(c.eval) && static_cast<bool>(c.jvp) && static_cast<bool>(c.vjp),
          "smooth map needs eval/jvp/vjp");
  require(static_cast<bool>(h.prox) && static_cast<bool>(h.value), "h needs value and prox");
  require(static_cast<bool>(g.prox) && static_cast<bool>(g.value), "g needs value and prox");
  require(h.lipschitz.has_value(), "h needs a Lipschitz constant");
  CompositeProblem p;
  p.g = std::move(g);
  p.h = std::move(h);
  p.c = std::move(c);
  p.mu = p.h.lipschitz.value() * p.c.beta;
  p.diameter_M = diameter_M ? diameter_M : p.g.domain_diameter;
  p.rho = p.r = p.mu;
  return p;
}

// instrumented oracle access; all solver code goes through these
inline Vector eval_c(const CompositeProblem& p, const Vector& x) {
  if (x.size() != p.c.dim_in) fail(ErrorCode::DimensionMismatch, "eval_c input");
  ++p.tally->n_c_eval;
  Vector out = p.c.eval(x);
  require_finite(out, "c(x)");
  return out;
}

inline Vector jac_vec(const CompositeProblem& p, const Vector& x, const Vector& v) {
  if (v.size() != p.c.dim_in) fail(ErrorCode::DimensionMismatch, "jvp direction");
  ++p.tally->n_jvp;
  return p.c.jvp(x, v);
}

inline Vector jac_tvec(const CompositeProblem& p, const Vector& x, const Vector& w) {
  if (w.size() != p.c.dim_out) fail(ErrorCode::DimensionMismatch, "vjp direction");
  ++p.tally->n_vjp;
  return p.c.vjp(x, w);
}

inline Vector prox_g(const CompositeProblem& p, double t, const Vector& x) {
  require(t > 0, "prox stepsize must be positive");
  ++p.tally->n_prox_g;
  return p.g.prox(t, x);
}

inline Vector prox_h(const CompositeProblem& p, double t, const Vector& x) {
  require(t > 0, "prox stepsize must be positive");
  ++p.tally->n_prox_h;
  return p.h.prox(t, x);
}

inline double objective_value(const CompositeProblem& p, const Vector& x) {
  double v = p.g.value(x) + p.h.value(eval_c(p, x));
  require_finite(v, "F(x)");
  return v;
}

// operator-norm bound at a point, honoring per_point_opnorm
inline double opnorm_at(const CompositeProblem& p, const Vector& x) {
  if (p.c.per_point_opnorm) {
    // power iteration is a lower estimate; pad it, but never exceed the
    // declared global bound when one is available
    double local = 1.02 * opnorm_local(p.c, x);
    if (p.c.opnorm_bound > 0) return std::min(local, p.c.opnorm_bound);
    return local;
  }
  return p.c.opnorm_bound;
}

struct IterateRecord {
  int k = 0;
  double F_val = 0;
  double prox_grad_norm = 0;                   // surrogate where the exact one is unavailable
  std::optional<double> prox_grad_norm_true;   // high-accuracy recomputation, when requested
  double step_norm = 0;
  double eps_k = 0;
  double delta_k = 0;
  long inner_iters = 0;
  OracleCounters counters;                     // cumulative snapshot
  long long wall_ns = 0;
};

struct Trace {
  std::vector<IterateRecord> records;
  Vector x_final;
  double F_final = 0;
  std::map<std::string, double> stats;                 // scalar summaries
  std::map<std::string, std::vector<double>> series;   // per-iterate extras
};

// Spot check that jvp/vjp agree with finite differences of eval; returns the
// worst relative error over n random directions.
inline double finite_diff_jacobian_check(const SmoothMap& c, const Vector& x,
                                         int n_dirs = 4, uint64_t seed = 7,
                                         double step = 1e-6) {
  Rng rng(seed);
  double worst = 0;
  for (int k = 0; k < n_dirs; ++k) {
    Vector v(c.dim_in), w(c.dim_out);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.gaussian();
    v.normalize();
    w.normalize();
    Vector fd = (c.eval(x + step * v) - c.eval(x - step * v)) / (2 * step);
    Vector jv = c.jvp(x, v);
    worst = std::max(worst, (fd - jv).norm() / (1 + jv.norm()));
    // <w, Jv> must match <J^T w, v>
    double a = w.dot(jv), b = c.vjp(x, w).dot(v);
    worst = std::max(worst, std::abs(a - b) / (1 + std::abs(a)));
  }
  return worst;
}

}  // namespace proxlin
