#pragma once

// Independent reference computations used by the tests: brute-force
// minimizers, finite differences, dense Jacobians.  Nothing in here calls
// into the library under test; keep it that way so the tests stay honest.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Fn1 = std::function<double(double)>;
using FnN = std::function<double(const Vector&)>;

// Golden-section search on [lo, hi]; assumes unimodality on the bracket.
inline double golden_min(const Fn1& f, double lo, double hi, int iters = 200) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - gr * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + gr * (b - a); fd = f(d);
    }
  }
  return (a + b) / 2;
}

// Grid scan + golden refinement around the best cell.  Handles multimodal
// f as long as the grid is fine enough to land in the right basin.
inline double grid_min_1d(const Fn1& f, double lo, double hi, int cells = 4000) {
  double best_x = lo, best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= cells; ++i) {
    double x = lo + (hi - lo) * i / cells;
    double v = f(x);
    if (v < best_f) { best_f = v; best_x = x; }
  }
  double h = (hi - lo) / cells;
  return golden_min(f, best_x - 2 * h, best_x + 2 * h);
}

inline double grid_min_value_1d(const Fn1& f, double lo, double hi, int cells = 4000) {
  return f(grid_min_1d(f, lo, hi, cells));
}

// 2-d brute force: coarse grid, then coordinate-wise golden refinement.
inline Vector grid_min_2d(const FnN& f, const Vector& lo, const Vector& hi,
                          int cells = 400, int refine_rounds = 60) {
  Vector best(2);
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= cells; ++i)
    for (int j = 0; j <= cells; ++j) {
      Vector x(2);
      x << lo[0] + (hi[0] - lo[0]) * i / cells, lo[1] + (hi[1] - lo[1]) * j / cells;
      double v = f(x);
      if (v < best_f) { best_f = v; best = x; }
    }
  double h0 = (hi[0] - lo[0]) / cells, h1 = (hi[1] - lo[1]) / cells;
  Vector x = best;
  double w0 = 2 * h0, w1 = 2 * h1;
  for (int r = 0; r < refine_rounds; ++r) {
    x[0] = golden_min([&](double s) { Vector y = x; y[0] = s; return f(y); }, x[0] - w0, x[0] + w0, 80);
    x[1] = golden_min([&](double s) { Vector y = x; y[1] = s; return f(y); }, x[1] - w1, x[1] + w1, 80);
    w0 *= 0.7; w1 *= 0.7;
  }
  return x;
}

// Central finite-difference gradient.
inline Vector fd_gradient(const FnN& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h; xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

// Central finite-difference directional derivative of a vector map.
inline Vector fd_map_dir(const std::function<Vector(const Vector&)>& c,
                         const Vector& x, const Vector& v, double h = 1e-6) {
  return (c(x + h * v) - c(x - h * v)) / (2 * h);
}

// Dense Jacobian of a map by central differences.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& c,
                          const Vector& x, double h = 1e-6) {
  Vector c0 = c(x);
  Matrix J(c0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector e = Vector::Zero(x.size());
    e[i] = 1.0;
    J.col(i) = fd_map_dir(c, x, e, h);
  }
  return J;
}

// Dense Jacobian assembled from a user jvp (trusted only as plumbing; its
// agreement with fd_jacobian is itself one of the tests).
inline Matrix dense_jacobian(const std::function<Vector(const Vector&, const Vector&)>& jvp,
                             const Vector& x, Eigen::Index m) {
  Matrix J(m, x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector e = Vector::Zero(x.size());
    e[i] = 1.0;
    J.col(i) = jvp(x, e);
  }
  return J;
}

inline double opnorm_svd(const Matrix& J) {
  return J.jacobiSvd().singularValues()(0);
}

// Exact reference for small least-absolute-deviations problems:
// min_x |Ax - b|_1 has a minimizer interpolating d rows (A generic, m >= d),
// so enumerating all row subsets of size d is an exact oracle.
inline std::pair<Vector, double> lad_brute_force(const Matrix& A, const Vector& b) {
  const Eigen::Index m = A.rows(), d = A.cols();
  std::vector<int> idx(d);
  Vector best_x = Vector::Zero(d);
  double best_f = (A * best_x - b).lpNorm<1>();
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == d) {
      Matrix As(d, d);
      Vector bs(d);
      for (int i = 0; i < d; ++i) { As.row(i) = A.row(idx[i]); bs[i] = b[idx[i]]; }
      Eigen::FullPivLU<Matrix> lu(As);
      if (!lu.isInvertible()) return;
      Vector x = lu.solve(bs);
      double f = (A * x - b).lpNorm<1>();
      if (f < best_f) { best_f = f; best_x = x; }
      return;
    }
    for (int i = start; i < m; ++i) { idx[k] = i; rec(i + 1, k + 1); }
  };
  rec(0, 0);
  return {best_x, best_f};
}

// Cyclic coordinate descent for quadratic + l1: min 0.5 x'Qx + q'x + lam|x|_1.
// Independent reference for the additive-composite instance.
inline Vector coordinate_descent_l1(const Matrix& Q, const Vector& q, double lam,
                                    Vector x, int sweeps = 20000) {
  const Eigen::Index d = x.size();
  for (int s = 0; s < sweeps; ++s) {
    double change = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      double qi = Q.row(i).dot(x) - Q(i, i) * x[i] + q[i];
      double old = x[i];
      double u = -qi / Q(i, i), thr = lam / Q(i, i);
      x[i] = (u > thr) ? u - thr : (u < -thr ? u + thr : 0.0);
      change = std::max(change, std::abs(x[i] - old));
    }
    if (change < 1e-15) break;
  }
  return x;
}

}  // namespace oracle
