#pragma once
// Instance zoo.  Each builder returns a problem with certified curvature
// constants (no heuristics: operator norms by SVD, Hessian norms by
// eigensolve) plus, where the construction plants one, the optimal value
// and a reference point.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxlin/core.hpp"
#include "proxlin/finite_sum.hpp"
#include "proxlin/prox_toolbox.hpp"
#include "proxlin/rng.hpp"

namespace proxlin {

struct Instance {
  std::string name;
  CompositeProblem problem;
  Vector x0;
  std::optional<double> known_inf;
  std::optional<Vector> reference;  // planted solution, when one exists
  std::optional<FiniteSumProblem> finite_sum;
};

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = rng.gaussian();
  return A;
}

inline Vector gaussian_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

inline double opnorm_exact(const Matrix& A) {
  return Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
}

}  // namespace detail

// Robust phase retrieval: residuals (a_i' x)^2 - b_i under the scaled l1
// penalty (1/m) sum |.|, planted so the optimal value is zero.  Built as a
// finite sum; .problem is its aggregate form.
inline Instance make_phase_retrieval(Eigen::Index d = 5, Eigen::Index m = 10,
                                     uint64_t seed = 7) {
  require(d >= 1 && m >= 1, "phase retrieval needs d, m >= 1");
  Rng rng(mix64(seed, 0x9a5e, static_cast<uint64_t>(d * 1000 + m)));
  Matrix A = detail::gaussian_matrix(m, d, rng);
  Vector x_nat = detail::gaussian_vector(d, rng);
  x_nat /= x_nat.norm();
  Vector b = (A * x_nat).array().square();

  double row_max = 0;
  for (Eigen::Index i = 0; i < m; ++i) row_max = std::max(row_max, A.row(i).norm());
  double sigma = detail::opnorm_exact(A);

  SmoothMap c;
  c.dim_in = d;
  c.dim_out = m;
  c.eval = [A, b](const Vector& x) { return Vector((A * x).array().square().matrix() - b); };
  c.jvp = [A](const Vector& x, const Vector& v) {
    return Vector(2 * (A * x).cwiseProduct(A * v));
  };
  c.vjp = [A](const Vector& x, const Vector& w) {
    return Vector(A.transpose() * (2 * (A * x).cwiseProduct(w)));
  };
  // J(x) - J(y) = 2 diag(A(x-y)) A, so the row-max/opnorm product is exact
  c.beta = 2 * row_max * sigma;
  c.per_point_opnorm = true;

  FiniteSumProblem fs;
  fs.g = zero_function();
  fs.comps.assign(static_cast<size_t>(m), scalar_abs(1.0));
  fs.c = std::move(c);
  fs.comp_beta = 2 * row_max * row_max;

  Instance inst;
  inst.name = "phase_retrieval";
  inst.x0 = x_nat + 0.3 * detail::gaussian_vector(d, rng) / std::sqrt(double(d));
  double region = 4 * std::max(1.0, inst.x0.norm());
  fs.c.opnorm_bound = 2 * region * row_max * sigma;
  inst.problem = as_composite(fs);
  inst.known_inf = 0.0;
  inst.reference = x_nat;
  inst.finite_sum = std::move(fs);
  return inst;
}

// f(x) = |x^2 - 1|: the univariate example where the prox-gradient norm
// vanishes along iterates while the raw subgradients stay bounded away
// from zero.
inline Instance make_abs_quadratic() {
  SmoothMap c;
  c.dim_in = 1;
  c.dim_out = 1;
  c.eval = [](const Vector& x) {
    Vector z(1);
    z[0] = x[0] * x[0] - 1;
    return z;
  };
  c.jvp = [](const Vector& x, const Vector& v) { return Vector(2 * x[0] * v); };
  c.vjp = [](const Vector& x, const Vector& w) { return Vector(2 * x[0] * w); };
  c.beta = 2;
  c.opnorm_bound = 8;  // |x| <= 4 covers every sublevel set we touch
  c.per_point_opnorm = true;

  Instance inst;
  inst.name = "abs_quadratic";
  inst.problem = make_problem(zero_function(), l1_norm(1, 1.0), std::move(c));
  inst.x0 = Vector::Constant(1, 2.0);
  inst.known_inf = 0.0;
  inst.reference = Vector::Constant(1, 1.0);
  return inst;
}

// Nonlinear least squares over a box: m quadratic residuals vanishing at a
// planted interior point, measured in the Euclidean norm.
inline Instance make_nls_box(Eigen::Index d = 4, Eigen::Index m = 6, uint64_t seed = 11) {
  require(d >= 1 && m >= 1, "nls_box needs d, m >= 1");
  Rng rng(mix64(seed, 0xb0c5, static_cast<uint64_t>(d * 1000 + m)));
  Vector x_nat = detail::gaussian_vector(d, rng);
  auto Qs = std::make_shared<std::vector<Matrix>>();
  Matrix qlin = detail::gaussian_matrix(m, d, rng) / std::sqrt(double(d));
  double beta2 = 0;
  std::vector<double> qnorm(static_cast<size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    Matrix G = detail::gaussian_matrix(d, d, rng);
    Matrix Q = (G + G.transpose()) / (2 * std::sqrt(double(d)));
    double n = Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().cwiseAbs().maxCoeff();
    qnorm[static_cast<size_t>(i)] = n;
    beta2 += n * n;
    Qs->push_back(std::move(Q));
  }

  SmoothMap c;
  c.dim_in = d;
  c.dim_out = m;
  c.eval = [Qs, qlin, x_nat](const Vector& x) {
    Vector dx = x - x_nat, z(qlin.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z[i] = 0.5 * dx.dot((*Qs)[static_cast<size_t>(i)] * dx) + qlin.row(i).dot(dx);
    return z;
  };
  c.jvp = [Qs, qlin, x_nat](const Vector& x, const Vector& v) {
    Vector dx = x - x_nat, z(qlin.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z[i] = ((*Qs)[static_cast<size_t>(i)] * dx + qlin.row(i).transpose()).dot(v);
    return z;
  };
  c.vjp = [Qs, qlin, x_nat](const Vector& x, const Vector& w) {
    Vector dx = x - x_nat, out = Vector::Zero(dx.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      out += w[i] * ((*Qs)[static_cast<size_t>(i)] * dx + qlin.row(i).transpose());
    return out;
  };
  c.beta = std::sqrt(beta2);
  double r_box = std::sqrt(double(d));  // unit box around x_nat
  double op2 = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double row = qnorm[static_cast<size_t>(i)] * r_box + qlin.row(i).norm();
    op2 += row * row;
  }
  c.opnorm_bound = std::sqrt(op2);
  c.per_point_opnorm = true;  // the box-wide bound is loose near the solution

  Vector lo = x_nat.array() - 1, hi = x_nat.array() + 1;
  Instance inst;
  inst.name = "nls_box";
  inst.problem = make_problem(box_indicator(lo, hi), l2_norm(), std::move(c));
  Vector x0 = x_nat + 0.5 * detail::gaussian_vector(d, rng);
  inst.x0 = x0.cwiseMax(lo).cwiseMin(hi);
  inst.known_inf = 0.0;
  inst.reference = x_nat;
  return inst;
}

// Least absolute deviations on a consistent system: c affine, so the model
// is exact and the composite is genuinely convex (mu = rho = r = 0).
inline Instance make_lad(Eigen::Index d = 4, Eigen::Index m = 11, uint64_t seed = 5) {
  require(d >= 1 && m >= 1, "lad needs d, m >= 1");
  Rng rng(mix64(seed, 0x1ad, static_cast<uint64_t>(d * 1000 + m)));
  Matrix A = detail::gaussian_matrix(m, d, rng);
  Vector x_nat = detail::gaussian_vector(d, rng);
  Vector b = A * x_nat;

  SmoothMap c;
  c.dim_in = d;
  c.dim_out = m;
  c.eval = [A, b](const Vector& x) { return Vector(A * x - b); };
  c.jvp = [A](const Vector&, const Vector& v) { return Vector(A * v); };
  c.vjp = [A](const Vector&, const Vector& w) { return Vector(A.transpose() * w); };
  c.beta = 0;
  c.opnorm_bound = detail::opnorm_exact(A);

  Instance inst;
  inst.name = "lad";
  inst.problem =
      make_problem(zero_function(), l1_norm(m, 1.0 / static_cast<double>(m)), std::move(c));
  inst.x0 = detail::gaussian_vector(d, rng);
  inst.known_inf = 0.0;
  inst.reference = x_nat;
  return inst;
}

// l1-regularized least squares written compositionally: the smooth part
// enters through a scalar map and the identity penalty, so linearized steps
// coincide with proximal gradient steps.
inline Instance make_additive_composite(Eigen::Index d = 6, uint64_t seed = 13) {
  require(d >= 1, "additive composite needs d >= 1");
  Rng rng(mix64(seed, 0xadd, static_cast<uint64_t>(d)));
  Eigen::Index rows = 2 * d;
  Matrix B = detail::gaussian_matrix(rows, d, rng) / std::sqrt(double(d));
  Vector x_nat = detail::gaussian_vector(d, rng);
  for (Eigen::Index i = 0; i < d; i += 2) x_nat[i] = 0;
  Vector y = B * x_nat + 0.05 * detail::gaussian_vector(rows, rng);

  SmoothMap c;
  c.dim_in = d;
  c.dim_out = 1;
  c.eval = [B, y](const Vector& x) {
    Vector z(1);
    z[0] = 0.5 * (B * x - y).squaredNorm();
    return z;
  };
  c.jvp = [B, y](const Vector& x, const Vector& v) {
    Vector z(1);
    z[0] = (B * x - y).dot(B * v);
    return z;
  };
  c.vjp = [B, y](const Vector& x, const Vector& w) {
    return Vector(w[0] * (B.transpose() * (B * x - y)));
  };
  double sig = detail::opnorm_exact(B);
  c.beta = sig * sig;
  double region = 4 * (1 + x_nat.norm());
  c.opnorm_bound = sig * sig * region + (B.transpose() * y).norm();
  c.per_point_opnorm = true;

  Instance inst;
  inst.name = "additive_composite";
  inst.problem = make_problem(l1_norm(d, 0.1), identity_scalar(), std::move(c));
  inst.x0 = Vector::Zero(d);
  return inst;
}

// Penalty form of min |x|^2 subject to x_1 >= 1: the weight 4 exceeds the
// multiplier 2 at the solution (1, 0), so the penalty is exact and the
// optimal value is 1.
inline Instance make_exact_penalty() {
  SmoothMap c;
  c.dim_in = 2;
  c.dim_out = 2;
  c.eval = [](const Vector& x) {
    Vector z(2);
    z[0] = x.squaredNorm();
    z[1] = x[0] - 1;
    return z;
  };
  c.jvp = [](const Vector& x, const Vector& v) {
    Vector z(2);
    z[0] = 2 * x.dot(v);
    z[1] = v[0];
    return z;
  };
  c.vjp = [](const Vector& x, const Vector& w) {
    Vector out = 2 * w[0] * x;
    out[0] += w[1];
    return out;
  };
  c.beta = 2;
  c.opnorm_bound = std::sqrt(4.0 * 16 + 1);  // |x| <= 4 region
  c.per_point_opnorm = true;

  ProxFunction h = separable_concat({{identity_scalar(), 1}, {dist_to_nonneg(4.0), 1}});

  Instance inst;
  inst.name = "exact_penalty";
  inst.problem = make_problem(zero_function(), std::move(h), std::move(c));
  inst.x0 = Vector(2);
  inst.x0 << -1.0, 1.5;
  inst.known_inf = 1.0;
  inst.reference = Vector(2);
  *inst.reference << 1.0, 0.0;
  return inst;
}

inline std::vector<std::string> instance_names() {
  return {"phase_retrieval", "abs_quadratic", "nls_box",
          "lad",             "additive_composite", "exact_penalty"};
}

// name-based factory; d/m <= 0 and seed == 0 pick per-instance defaults
inline Instance make_instance(const std::string& name, Eigen::Index d = -1, Eigen::Index m = -1,
                              uint64_t seed = 0) {
  if (name == "phase_retrieval")
    return make_phase_retrieval(d > 0 ? d : 5, m > 0 ? m : 10, seed ? seed : 7);
  if (name == "abs_quadratic") return make_abs_quadratic();
  if (name == "nls_box") return make_nls_box(d > 0 ? d : 4, m > 0 ? m : 6, seed ? seed : 11);
  if (name == "lad") return make_lad(d > 0 ? d : 4, m > 0 ? m : 11, seed ? seed : 5);
  if (name == "additive_composite")
    return make_additive_composite(d > 0 ? d : 6, seed ? seed : 13);
  if (name == "exact_penalty") return make_exact_penalty();
  fail(ErrorCode::DimensionMismatch, "unknown instance: " + name);
}

inline std::vector<Instance> make_zoo() {
  std::vector<Instance> out;
  for (const auto& n : instance_names()) out.push_back(make_instance(n));
  return out;
}

}  // namespace proxlin
