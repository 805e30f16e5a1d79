// Prox operators against brute-force minimization, and the Moreau envelope
// calculus: value sandwich, gradient formula, prox-of-envelope identity,
// conjugate prox.

#include <catch2/catch_amalgamated.hpp>

#include "proxlin/prox_toolbox.hpp"
#include "proxlin/rng.hpp"

#include "oracles.hpp"

using namespace proxlin;

namespace {

Vector random_vec(Rng& rng, Eigen::Index n, double scale = 2.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.gaussian();
  return v;
}

// reference prox by per-coordinate golden search (separable f only)
double prox_1d(const std::function<double(double)>& f, double t, double x) {
  return oracle::golden_min([&](double y) { return f(y) + (y - x) * (y - x) / (2 * t); },
                            x - 50, x + 50, 300);
}

}  // namespace

TEST_CASE("l1 prox matches per-coordinate search", "[toolbox]") {
  Rng rng(11);
  ProxFunction f = l1_norm(4, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    double t = 0.05 + 3 * rng.uniform();
    Vector x = random_vec(rng, 4);
    Vector p = f.prox(t, x);
    for (Eigen::Index i = 0; i < 4; ++i) {
      double ref = prox_1d([](double y) { return 0.7 * std::abs(y); }, t, x[i]);
      CHECK(std::abs(p[i] - ref) < 1e-9);
    }
  }
}

TEST_CASE("l2 prox is the block soft threshold", "[toolbox]") {
  Rng rng(12);
  ProxFunction f = l2_norm(1.3);
  for (int trial = 0; trial < 20; ++trial) {
    double t = 0.05 + 2 * rng.uniform();
    Vector x = random_vec(rng, 3);
    Vector p = f.prox(t, x);
    // optimality: p + t * 1.3 * p/|p| = x when p != 0, else |x| <= t * 1.3
    if (p.norm() > 1e-12) {
      Vector res = p + (t * 1.3 / p.norm()) * p - x;
      CHECK(res.norm() < 1e-10 * (1 + x.norm()));
    } else {
      CHECK(x.norm() <= t * 1.3 + 1e-12);
    }
    // never beaten by a nearby competitor
    double obj = 1.3 * p.norm() + (p - x).squaredNorm() / (2 * t);
    for (int c = 0; c < 10; ++c) {
      Vector z = p + random_vec(rng, 3, 0.3);
      double alt = 1.3 * z.norm() + (z - x).squaredNorm() / (2 * t);
      CHECK(obj <= alt + 1e-12);
    }
  }
}

TEST_CASE("box indicator prox clamps", "[toolbox]") {
  Vector lo(3), hi(3);
  lo << -1, 0, 2;
  hi << 1, 0.5, 3;
  ProxFunction f = box_indicator(lo, hi);
  Vector x(3);
  x << -4, 0.2, 9;
  Vector p = f.prox(0.7, x);
  CHECK(p[0] == -1.0);
  CHECK(p[1] == 0.2);
  CHECK(p[2] == 3.0);
  CHECK(f.value(p) == 0.0);
  CHECK(std::isinf(f.value(x)));
  CHECK(f.domain_diameter.has_value());
  CHECK(*f.domain_diameter == Catch::Approx((hi - lo).norm()));
}

TEST_CASE("simplex projection lands on the simplex and is closest", "[toolbox]") {
  Rng rng(13);
  ProxFunction f = project_simplex(5);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = random_vec(rng, 5);
    Vector p = f.prox(1.0, x);
    CHECK(p.minCoeff() >= -1e-12);
    CHECK(p.sum() == Catch::Approx(1.0).margin(1e-10));
    for (int c = 0; c < 20; ++c) {
      Vector z = random_vec(rng, 5, 1.0).cwiseAbs();
      z /= z.sum();
      CHECK((p - x).squaredNorm() <= (z - x).squaredNorm() + 1e-10);
    }
  }
}

TEST_CASE("dist-to-nonneg value and prox", "[toolbox]") {
  Rng rng(14);
  ProxFunction f = dist_to_nonneg(2.5);
  Vector x(2);
  x << -1.4, 0.8;
  Vector neg = x.cwiseMin(0.0);
  CHECK(f.value(x) == Catch::Approx(2.5 * neg.norm()));
  for (int trial = 0; trial < 12; ++trial) {
    double t = 0.1 + rng.uniform();
    Vector y = random_vec(rng, 2);
    Vector p = f.prox(t, y);
    Vector lo(2), hi(2);
    lo << y[0] - 6, y[1] - 6;
    hi << y[0] + 6, y[1] + 6;
    Vector ref = oracle::grid_min_2d(
        [&](const Vector& z) {
          return 2.5 * z.cwiseMin(0.0).norm() + (z - y).squaredNorm() / (2 * t);
        },
        lo, hi, 240);
    CHECK((p - ref).norm() < 2e-6);
  }
}

TEST_CASE("max of coordinates prox by direct search", "[toolbox]") {
  Rng rng(15);
  ProxFunction f = max_of_coordinates();
  for (int trial = 0; trial < 10; ++trial) {
    double t = 0.2 + rng.uniform();
    Vector y = random_vec(rng, 2);
    Vector p = f.prox(t, y);
    Vector lo = y.array() - 5, hi = y.array() + 5;
    Vector ref = oracle::grid_min_2d(
        [&](const Vector& z) { return z.maxCoeff() + (z - y).squaredNorm() / (2 * t); },
        lo, hi, 240);
    CHECK((p - ref).norm() < 2e-6);
  }
}

TEST_CASE("separable concatenation splits values and proxes", "[toolbox]") {
  ProxFunction f = separable_concat({{identity_scalar(), 1}, {l1_norm(2, 0.5), 2}});
  Vector z(3);
  z << 0.4, -1.0, 2.0;
  CHECK(f.value(z) == Catch::Approx(0.4 + 0.5 * 3.0));
  Vector p = f.prox(0.3, z);
  Vector p1 = identity_scalar().prox(0.3, z.head(1));
  Vector p2 = l1_norm(2, 0.5).prox(0.3, z.tail(2));
  CHECK(p.head(1) == p1);
  CHECK(p.tail(2) == p2);
  REQUIRE(f.lipschitz.has_value());
  double l1l = *l1_norm(2, 0.5).lipschitz;
  CHECK(*f.lipschitz == Catch::Approx(std::sqrt(1.0 + l1l * l1l)));
}

TEST_CASE("scaled function rescales value and prox consistently", "[toolbox]") {
  Rng rng(16);
  ProxFunction base = l2_norm(1.0);
  ProxFunction f = scale_function(base, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = random_vec(rng, 3);
    CHECK(f.value(x) == Catch::Approx(3.0 * base.value(x)));
    double t = 0.1 + rng.uniform();
    CHECK((f.prox(t, x) - base.prox(3.0 * t, x)).norm() < 1e-14);
  }
}

TEST_CASE("envelope value sandwich and Lipschitz bounds", "[toolbox][envelope]") {
  Rng rng(17);
  for (double nu : {0.05, 0.4, 2.0}) {
    for (const ProxFunction& h : {l1_norm(4, 1.0), l2_norm(1.0), max_of_coordinates()}) {
      REQUIRE(h.lipschitz.has_value());
      const double L = *h.lipschitz;
      Vector prev_x, prev_g;
      for (int trial = 0; trial < 30; ++trial) {
        Vector x = random_vec(rng, 4);
        double env = envelope_value(h, nu, x);
        double raw = h.value(x);
        CHECK(env <= raw + 1e-12);
        CHECK(raw - env <= L * L * nu / 2 + 1e-12);
        Vector g = envelope_gradient(h, nu, x);
        CHECK(g.norm() <= L + 1e-10);
        if (prev_x.size()) {
          // gradient is (1/nu)-Lipschitz, envelope is L-Lipschitz
          CHECK((g - prev_g).norm() <= (x - prev_x).norm() / nu + 1e-10);
          double dv = std::abs(env - envelope_value(h, nu, prev_x));
          CHECK(dv <= L * (x - prev_x).norm() + 1e-10);
        }
        prev_x = x;
        prev_g = g;
      }
    }
  }
}

TEST_CASE("envelope gradient matches finite differences", "[toolbox][envelope]") {
  Rng rng(18);
  ProxFunction h = l1_norm(3, 1.0);
  double nu = 0.3;
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = random_vec(rng, 3);
    Vector g = envelope_gradient(h, nu, x);
    Vector fd = oracle::fd_gradient([&](const Vector& z) { return envelope_value(h, nu, z); }, x);
    CHECK((g - fd).norm() < 1e-5 * (1 + g.norm()));
  }
}

TEST_CASE("prox of envelope equals the two-term combination", "[toolbox][envelope]") {
  Rng rng(19);
  ProxFunction h = l1_norm(3, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    double nu = 0.1 + rng.uniform();
    double t = 0.1 + 2 * rng.uniform();
    Vector x = random_vec(rng, 3);
    Vector p = prox_of_envelope(h, nu, t, x);
    // independent reference: minimize h_nu(y) + |y-x|^2/(2t) coordinatewise
    for (Eigen::Index i = 0; i < 3; ++i) {
      double ref = prox_1d(
          [&](double y) {
            double pr = (std::abs(y) > nu) ? (y > 0 ? y - nu : y + nu) : 0.0;
            return std::abs(pr) + (pr - y) * (pr - y) / (2 * nu);
          },
          t, x[i]);
      CHECK(std::abs(p[i] - ref) < 1e-9);
    }
  }
}

TEST_CASE("envelope_function exposes consistent oracles", "[toolbox][envelope]") {
  Rng rng(20);
  ProxFunction h = l2_norm(1.0);
  double nu = 0.25;
  ProxFunction henv = envelope_function(h, nu);
  CHECK(henv.grad_lipschitz.has_value());
  CHECK(*henv.grad_lipschitz == Catch::Approx(1.0 / nu));
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = random_vec(rng, 3);
    CHECK(henv.value(x) == Catch::Approx(envelope_value(h, nu, x)));
    CHECK((henv.grad(x) - envelope_gradient(h, nu, x)).norm() < 1e-14);
    double t = 0.2 + rng.uniform();
    CHECK((henv.prox(t, x) - prox_of_envelope(h, nu, t, x)).norm() < 1e-14);
  }
}

TEST_CASE("conjugate prox by Moreau decomposition", "[toolbox]") {
  Rng rng(21);
  // l1 conjugate is the box indicator, so prox_{t h*} is a clamp
  ProxFunction h = l1_norm(3, 0.8);
  for (int trial = 0; trial < 15; ++trial) {
    double t = 0.2 + 2 * rng.uniform();
    Vector w = random_vec(rng, 3);
    Vector p = prox_conjugate(h, t, w);
    Vector ref = w.cwiseMax(-0.8).cwiseMin(0.8);
    CHECK((p - ref).norm() < 1e-12);
  }
}

TEST_CASE("huber equals the scaled l1 envelope", "[toolbox]") {
  Rng rng(22);
  ProxFunction f = huber(3, 0.4, 1.7);
  ProxFunction l1 = l1_norm(3, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = random_vec(rng, 3);
    CHECK(f.value(x) == Catch::Approx(1.7 * envelope_value(l1, 0.4, x)));
  }
}

TEST_CASE("quadratic builder carries its structural hint", "[toolbox]") {
  Vector c(2);
  c << 1.0, -2.0;
  ProxFunction f = squared_l2(3.0, c);
  REQUIRE(f.quadratic.has_value());
  CHECK(f.quadratic->weight == 3.0);
  CHECK(f.strong_convexity == 3.0);
  Vector x(2);
  x << 4.0, 4.0;
  // prox solves (1 + t w) z = x + t w c
  Vector p = f.prox(0.5, x);
  CHECK(((1 + 0.5 * 3.0) * p - (x + 0.5 * 3.0 * c)).norm() < 1e-14);
}
