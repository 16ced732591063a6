#include <doctest.h>

#include <cmath>
#include <random>

#include "molo/kernels.hpp"

using namespace molo;

namespace {

// Polar-coordinate oracle around the in-plane projection of x: Gauss in the
// angle on many pieces per edge, geometrically graded Gauss along each ray.
void polar_oracle(const TriangleGeom& T, const Vec3& x, int p, double* pot, Vec3* grad,
                  int pieces = 48) {
  const int nm = num_monomials(p);
  for (int k = 0; k < nm; ++k) {
    pot[k] = 0;
    grad[k].setZero();
  }
  const Vec3 r = x - T.v[0];
  const Vec2 x0(r.dot(T.t1), r.dot(T.t2));
  const auto ga = gauss_legendre<double>(20);
  const auto gr = graded_segment_rule<double>(true, false, 30, 0.25, 16);
  double m[kMaxMonomials];
  for (int e = 0; e < 3; ++e) {
    const Vec2 P = T.q[e] - x0, Q = T.q[(e + 1) % 3] - x0, E = Q - P;
    const double th1 = std::atan2(P[1], P[0]);
    double dth = std::atan2(Q[1], Q[0]) - th1;
    if (dth > M_PI) dth -= 2 * M_PI;
    if (dth < -M_PI) dth += 2 * M_PI;
    if (std::abs(dth) < 1e-15) continue;
    for (int pc = 0; pc < pieces; ++pc)
      for (int i = 0; i < ga.size(); ++i) {
        const double th = th1 + dth * (pc + ga.points(0, i)) / pieces;
        const double wth = dth / pieces * ga.weights[i];
        const Vec2 om(std::cos(th), std::sin(th));
        const double rho = (P[0] * E[1] - P[1] * E[0]) / (om[0] * E[1] - om[1] * E[0]);
        for (int j = 0; j < gr.size(); ++j) {
          const double s = rho * gr.points(0, j);
          const Vec2 y2 = x0 + s * om;
          const Vec2 ref = T.to_ref * y2;
          const Vec3 d = x - (T.v[0] + y2[0] * T.t1 + y2[1] * T.t2);
          const double R = d.norm();
          const double w = wth * rho * gr.weights[j] * s / (4 * M_PI);
          eval_monomials(p, ref[0], ref[1], m);
          for (int k = 0; k < nm; ++k) {
            pot[k] += w * m[k] / R;
            grad[k] -= w * m[k] / (R * R * R) * d;
          }
        }
      }
  }
}

double max_rel(const double* a, const double* b, int n) {
  double s = 0, e = 0;
  for (int k = 0; k < n; ++k) s = std::max(s, std::abs(b[k]));
  for (int k = 0; k < n; ++k) e = std::max(e, std::abs(a[k] - b[k]));
  return e / s;
}

double max_rel(const Vec3* a, const Vec3* b, int n) {
  double s = 0, e = 0;
  for (int k = 0; k < n; ++k) s = std::max(s, b[k].norm());
  for (int k = 0; k < n; ++k) e = std::max(e, (a[k] - b[k]).norm());
  return e / s;
}

}  // namespace

TEST_CASE("gauss rules") {
  auto g1 = gauss_rule_segment(1);
  CHECK(g1.points(0, 0) == doctest::Approx(0.5));
  CHECK(g1.weights[0] == doctest::Approx(1.0));
  auto g2 = gauss_rule_segment(2);
  CHECK(g2.integrate([](auto p) { return p[0] * p[0]; }) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK_THROWS(gauss_rule_segment(0));
  CHECK_THROWS(gauss_rule_segment(65));
  for (int n = 1; n <= 64; n += 7) {
    auto g = gauss_rule_segment(n);
    CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.weights.minCoeff() > 0);
    const int d = 2 * n - 1;
    CHECK(g.integrate([&](auto p) { return std::pow(p[0], d); }) ==
          doctest::Approx(1.0 / (d + 1)).epsilon(1e-13));
  }
  for (int n = 1; n <= 8; ++n) {
    auto t = gauss_rule_triangle(n);
    CHECK(t.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(t.weights.minCoeff() > 0);
    // int xi^a eta^b = a! b! / (a + b + 2)!
    for (int a = 0; a <= 2 * n - 1; ++a) {
      int b = 2 * n - 1 - a;
      double exact = std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
      CHECK(t.integrate([&](auto p) { return std::pow(p[0], a) * std::pow(p[1], b); }) ==
            doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("graded composite rule") {
  auto smooth = [](auto p) { return std::exp(p[0] - 0.5 * p[1]) * std::cos(p[1]); };
  auto plain = gauss_rule_triangle(20);
  auto gr = graded_composite_rule<double>(Vec2(0.2, 0.3), 6, 0.25, 8);
  CHECK(gr.integrate(smooth) == doctest::Approx(plain.integrate(smooth)).epsilon(1e-12));
  CHECK(gr.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gr.weights.minCoeff() > 0);
  CHECK(gr.size() <= 11 * 6 * 64);

  // L = 1 at a corner: plain collapsed rules on the two angular pieces
  auto one = graded_composite_rule<double>(Vec2(0, 0), 1, 0.25, 5);
  CHECK(one.size() == 2 * 25);
  CHECK(one.integrate([](auto p) { return p[0] * p[0] * p[1]; }) ==
        doctest::Approx(1.0 / 60).epsilon(1e-14));

  CHECK_THROWS(graded_composite_rule<double>(Vec2(0, 0), 4, 1.0, 4));
  CHECK_THROWS(graded_composite_rule<double>(Vec2(0, 0), 0, 0.5, 4));

  // |y|^(-1/2) on the reference triangle; the radial integral is
  // (2/3) rho(th)^(3/2) with rho = 1 / (cos th + sin th), smooth in th
  auto g = gauss_legendre<double>(60);
  double exact = 0;
  for (int i = 0; i < g.size(); ++i) {
    double th = 0.5 * M_PI * g.points(0, i);
    exact += 0.5 * M_PI * g.weights[i] * (2.0 / 3.0) *
             std::pow(1.0 / (std::cos(th) + std::sin(th)), 1.5);
  }
  auto sing = graded_composite_rule<double>(Vec2(0, 0), 10, 0.25, 8);
  double v = sing.integrate([](auto p) { return 1.0 / std::sqrt(std::hypot(p[0], p[1])); });
  CHECK(std::abs(v - exact) / exact < 1e-8);
}

TEST_CASE("graded segment rule") {
  auto r = graded_segment_rule<double>(true, true, 18, 0.2, 16);
  CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  double v = r.integrate([](auto p) { return std::log(p[0]) + std::log(1 - p[0]); });
  CHECK(std::abs(v + 2.0) < 1e-10);
}

TEST_CASE("triangle kernel: far field and scaling") {
  auto T = make_triangle(Vec3(0, 0, 0), Vec3(0.3, 0, 0), Vec3(0.1, 0.2, 0.05));
  Vec3 c = (T.v[0] + T.v[1] + T.v[2]) / 3;
  for (double dist : {5.0, 20.0, 100.0}) {
    Vec3 x = c + dist * Vec3(0.3, -0.5, 0.8).normalized();
    double v = slp_triangle_analytic(x, T, 0, 0);
    double approx = T.area / (4 * M_PI * dist);
    CHECK(std::abs(v - approx) / approx < T.diam * T.diam / (dist * dist));
  }
  const double s = 3.7;
  auto Ts = make_triangle(s * T.v[0], s * T.v[1], s * T.v[2]);
  Vec3 x(0.05, 0.04, 0.01);
  CHECK(slp_triangle_analytic(s * x, Ts, 0, 0) ==
        doctest::Approx(s * slp_triangle_analytic(x, T, 0, 0)).epsilon(1e-13));
  CHECK_THROWS_AS(make_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)), GeometryError);
}

TEST_CASE("triangle kernel: unit right triangle at a vertex") {
  auto T = make_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
  auto rule = graded_composite_rule<double>(Vec2(0, 0), 30, 0.2, 20);
  double pot[kMaxMonomials], ref[kMaxMonomials];
  slp_triangle_moments(T, Vec3(0, 0, 0), 2, pot, nullptr);
  slp_triangle_moments_rule(T, Vec3(0, 0, 0), 2, rule, ref, nullptr);
  for (int k = 0; k < 6; ++k) CHECK(pot[k] == doctest::Approx(ref[k]).epsilon(1e-10));
  // closed form for the constant: int over the triangle of 1/r = sqrt(2) asinh(1)
  CHECK(pot[0] == doctest::Approx(std::sqrt(2.0) * std::asinh(1.0) / (4 * M_PI)).epsilon(1e-13));
}

TEST_CASE("triangle kernel: oracle equivalence on random pairs") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst_p = 0, worst_g = 0;
  for (int trial = 0; trial < 24; ++trial) {
    Vec3 a(U(rng), U(rng), U(rng)), b(U(rng), U(rng), U(rng)), c(U(rng), U(rng), U(rng));
    auto T = make_triangle(a, b, c);
    double xi = 0.5 + 0.8 * U(rng), eta = 0.3 + 0.8 * U(rng);
    double h = trial % 3 == 0 ? 0.3 * U(rng) : std::pow(10.0, -3.5 + 2.5 * U(rng));
    Vec3 x = ref_to_world(T, xi, eta) + h * T.n;
    double p1[kMaxMonomials], p2[kMaxMonomials];
    Vec3 g1[kMaxMonomials], g2[kMaxMonomials];
    slp_triangle_moments(T, x, 3, p1, g1);
    polar_oracle(T, x, 3, p2, g2);
    worst_p = std::max(worst_p, max_rel(p1, p2, 10));
    worst_g = std::max(worst_g, max_rel(g1, g2, 10));
  }
  CHECK(worst_p < 1e-8);
  CHECK(worst_g < 1e-8);
}

TEST_CASE("triangle kernel: continuity across the plane and coplanar normal derivative") {
  auto T = make_triangle(Vec3(0, 0, 0), Vec3(1, 0.1, 0), Vec3(0.2, 0.9, 0.1));
  Vec3 x0 = ref_to_world(T, 0.3, 0.25);
  double p0[kMaxMonomials], pp[kMaxMonomials], pm[kMaxMonomials];
  Vec3 g0[kMaxMonomials], gp[kMaxMonomials], gm[kMaxMonomials];
  slp_triangle_moments(T, x0, 2, p0, g0);
  slp_triangle_moments(T, x0 + 1e-9 * T.n, 2, pp, gp);
  slp_triangle_moments(T, x0 - 1e-9 * T.n, 2, pm, gm);
  for (int k = 0; k < 6; ++k) {
    CHECK(std::isfinite(p0[k]));
    CHECK(pp[k] == doctest::Approx(p0[k]).epsilon(1e-7));
    CHECK(pm[k] == doctest::Approx(p0[k]).epsilon(1e-7));
    CHECK(std::abs(g0[k].dot(T.n)) < 1e-15);
  }
  // normal jump of the gradient equals the density at x0
  double m[kMaxMonomials];
  eval_monomials(2, 0.3, 0.25, m);
  for (int k = 0; k < 6; ++k)
    CHECK((gm[k] - gp[k]).dot(T.n) == doctest::Approx(m[k]).epsilon(1e-6));
  // coplanar point outside the triangle
  Vec3 xo = ref_to_world(T, 1.2, 0.4);
  slp_triangle_moments(T, xo, 2, p0, g0);
  for (int k = 0; k < 6; ++k) CHECK(std::abs(g0[k].dot(T.n)) < 1e-15);
}

TEST_CASE("segment kernel") {
  auto s = make_segment(Vec2(0, 0), Vec2(1, 0));
  double v = slp_segment_analytic_2d(Vec2(0.5, 0), s, 0);
  CHECK(v == doctest::Approx((1 + std::log(2.0)) / (2 * M_PI)).epsilon(1e-14));

  // log|x - y| vanishes where |x - y| = 1
  auto s2 = make_segment(Vec2(-1e-3, 0), Vec2(1e-3, 0));
  CHECK(std::abs(slp_segment_analytic_2d(Vec2(0, 1), s2, 0)) < 1e-9);

  for (double d : {10.0, 100.0}) {
    double far = slp_segment_analytic_2d(Vec2(0.5, d), s, 0);
    CHECK(far == doctest::Approx(-std::log(d) / (2 * M_PI)).epsilon(1.0 / (d * d)));
  }
  CHECK_THROWS_AS(make_segment(Vec2(1, 1), Vec2(1, 1)), GeometryError);

  // graded quadrature oracle at random points, all degrees, both routes
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 40; ++trial) {
    auto seg = make_segment(Vec2(U(rng), U(rng)), Vec2(U(rng), U(rng)));
    double t = 0.5 + 0.7 * U(rng);
    double h = trial % 4 == 0 ? 0.0 : std::pow(10.0, -4 + 3.5 * (0.5 + 0.5 * U(rng)));
    if (trial % 5 == 1) h = 3.0;
    Vec2 x = seg.a + t * (seg.b - seg.a) + h * seg.out;
    double tc = std::clamp(t, 0.0, 1.0);
    auto left = graded_segment_rule<double>(true, false, 40, 0.2, 16);
    for (int deg = 0; deg <= 3; ++deg) {
      double ref = 0;
      for (int side = 0; side < 2; ++side) {
        double lo = tc, len = side == 0 ? tc : 1 - tc;
        for (int q = 0; q < left.size(); ++q) {
          double u = side == 0 ? lo - len * left.points(0, q) : lo + len * left.points(0, q);
          Vec2 y = seg.a + u * (seg.b - seg.a);
          double tl = 2 * u - 1;
          ref += len * left.weights[q] * seg.len * std::pow(tl, deg) * (-std::log((x - y).norm())) /
                 (2 * M_PI);
        }
      }
      double val = slp_segment_analytic_2d(x, seg, deg);
      CHECK(std::abs(val - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("segment gradient: exterior limit and Gauss branch") {
  auto s = make_segment(Vec2(0, 0), Vec2(2, 0));
  double pot[4];
  Vec2 g0[4], gh[4];
  slp_segment_moments(s, Vec2(0.7, 0), 3, pot, g0);
  slp_segment_moments(s, Vec2(0.7, 0) + 1e-10 * s.out, 3, pot, gh);
  for (int k = 0; k <= 3; ++k) CHECK((g0[k] - gh[k]).norm() < 1e-8);
  // -(1/2pi) d/dn log on the exterior side gives +1/2 of the density for the constant
  CHECK(g0[0].dot(s.out) == doctest::Approx(-0.5).epsilon(1e-12));

  double pa[4], pb[4];
  Vec2 ga[4], gb[4];
  Vec2 x(1.0, 1.1);  // both evaluations use the same point; compare to a fine rule
  slp_segment_moments(s, x, 3, pa, ga);
  auto r = gauss_rule_segment(64);
  for (int k = 0; k <= 3; ++k) {
    pb[k] = 0;
    gb[k].setZero();
  }
  for (int q = 0; q < r.size(); ++q) {
    double t = 2 * r.points(0, q) - 1, P[4];
    legendre(3, t, P);
    Vec2 y = s.c + t * s.tau;
    Vec2 d = x - y;
    for (int k = 0; k <= 3; ++k) {
      pb[k] += 2 * r.weights[q] * P[k] * (-std::log(d.norm())) / (2 * M_PI);
      gb[k] += 2 * r.weights[q] * P[k] * (-d / d.squaredNorm()) / (2 * M_PI);
    }
  }
  for (int k = 0; k <= 3; ++k) {
    CHECK(pa[k] == doctest::Approx(pb[k]).epsilon(1e-12));
    CHECK((ga[k] - gb[k]).norm() < 1e-12);
  }
}
