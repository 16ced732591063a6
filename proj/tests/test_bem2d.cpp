#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "molo/bem2d.hpp"
#include "molo/errors.hpp"

using namespace molo;
using namespace molo::bem2d;

namespace {

double log_norm(const Vec2& x) { return std::log(x.norm()); }

Mat2 log_hessian(const Vec2& x) {
  const double r2 = x.squaredNorm();
  return (Mat2::Identity() * r2 - 2 * x * x.transpose()) / (r2 * r2);
}

std::vector<double> h_errors(int p, int n0, int levels, std::vector<double>* dofs = nullptr) {
  std::vector<Boundary> b;
  for (int i = 0, n = n0; i < levels; ++i, n *= 2) b.push_back(square(n));
  std::vector<Solution> s;
  for (const auto& bd : b) s.push_back(solve_dirichlet_2d(bd, p, log_norm));
  std::vector<double> gaps;
  for (size_t i = 1; i < s.size(); ++i) gaps.push_back(energy_gap(s[i - 1], s[i]));
  if (dofs)
    for (const auto& bd : b) dofs->push_back(bd.num_elements() * (p + 1));
  return energy_errors_from_gaps(gaps);
}

}  // namespace

TEST_CASE("square and polygon boundaries") {
  auto b = square(3);
  CHECK(b.num_elements() == 12);
  double len = 0.0;
  for (int e = 0; e < b.num_elements(); ++e) {
    len += b.length(e);
    // exterior normal points away from the centre
    CHECK(b.normal(e).dot(0.5 * (b.start(e) + b.end(e))) > 0.0);
  }
  CHECK(len == doctest::Approx(4.0).epsilon(1e-14));
  auto g = square(4, 3.0);
  CHECK(g.length(0) < g.length(1));
  CHECK_THROWS_AS(square(3, 2.0), Error);
  CHECK_THROWS_AS(square(0), Error);
  CHECK_THROWS_AS(regular_polygon(2, 1.0), Error);
  CHECK(corner_grading(0) == doctest::Approx(2.25));
}

TEST_CASE("2D single layer matrix is symmetric positive definite") {
  for (int p : {0, 2, 5}) {
    auto b = square(4);
    Eigen::MatrixXd V = assemble_slp(b, p);
    CHECK((V - V.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
  CHECK_THROWS_AS(assemble_slp(square(2), kMaxDegree + 1), Error);
}

TEST_CASE("numeric near-field moments agree with the analytic ones") {
  // Legendre bases are hierarchical: the degree-3 block of the degree-4
  // matrix is the degree-3 matrix, computed by the other near-field path
  for (int n : {2, 5}) {
    auto b = square(n);
    Eigen::MatrixXd V3 = assemble_slp(b, 3), V4 = assemble_slp(b, 4);
    const int ne = b.num_elements();
    double diff = 0.0;
    for (int i = 0; i < ne; ++i)
      for (int j = 0; j < ne; ++j)
        diff = std::max(diff, (V4.block(5 * i, 5 * j, 4, 4) - V3.block(4 * i, 4 * j, 4, 4))
                                  .cwiseAbs()
                                  .maxCoeff());
    CHECK(diff < 1e-10 * V3.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("zero data gives zero density") {
  auto b = square(3);
  auto s = solve_dirichlet_2d(b, 2, [](const Vec2&) { return 0.0; });
  CHECK(s.mu.coeffs.norm() == 0.0);
  CHECK(s.energy == 0.0);
}

TEST_CASE("constant data on a circle gives a constant density") {
  // V 1 = -R ln R on the circle of radius R
  const double R = 0.5;
  auto b = regular_polygon(256, R);
  auto s = solve_dirichlet_2d(b, 0, [](const Vec2&) { return 1.0; });
  const double mu = -1.0 / (R * std::log(R));
  CHECK(s.mu.coeffs.maxCoeff() - s.mu.coeffs.minCoeff() < 1e-10);
  CHECK(s.mu.coeffs.mean() == doctest::Approx(mu).epsilon(1e-3));
  auto s1 = solve_dirichlet_2d(b, 1, [](const Vec2&) { return 1.0; });
  for (int e = 0; e < b.num_elements(); ++e) CHECK(std::abs(s1.mu.coeffs[2 * e + 1]) < 1e-10);
}

TEST_CASE("polygon potential matches the data on the boundary") {
  auto b = square(16);
  auto s = solve_dirichlet_2d(b, 2, log_norm);
  const Vec2 x(0.5, 1.0 / 3);
  CHECK(potential(s.mu, x) == doctest::Approx(log_norm(x)).epsilon(1e-5));
  // exterior: V mu = ln|x| for u harmonic outside and matching at infinity
  const Vec2 y(1.3, -0.7);
  CHECK(potential(s.mu, y) == doctest::Approx(log_norm(y)).epsilon(1e-5));
  const Vec2 g = gradient(s.mu, y);
  CHECK((g - y / y.squaredNorm()).norm() < 1e-5);
}

TEST_CASE("prolongation reproduces coarse densities") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ud(-1, 1);
  auto bc = square(2), bf = square(6);
  Density c{&bc, 2, Eigen::VectorXd::NullaryExpr(bc.num_elements() * 3, [&] { return ud(rng); })};
  auto f = prolong(c, bf, 3, 4);
  CHECK(f.p == 4);
  for (int e = 0; e < bc.num_elements(); ++e)
    for (double s : {0.1, 0.5, 0.77}) {
      const int child = static_cast<int>(s * 3);
      CHECK(f.value(3 * e + child, s * 3 - child) == doctest::Approx(c.value(e, s)).epsilon(1e-13));
    }
  CHECK_THROWS_AS(prolong(c, square(5), 3, 2), Error);
  CHECK_THROWS_AS(prolong(c, bf, 3, 1), Error);
}

TEST_CASE("energies increase and gaps equal energy differences") {
  std::vector<Boundary> b{square(2), square(4), square(8)};
  std::vector<Solution> s;
  for (const auto& bd : b) s.push_back(solve_dirichlet_2d(bd, 1, log_norm));
  for (size_t i = 1; i < s.size(); ++i) {
    CHECK(s[i].energy > s[i - 1].energy);
    CHECK(energy_gap(s[i - 1], s[i]) ==
          doctest::Approx(s[i].energy - s[i - 1].energy).epsilon(1e-8));
  }
  // p-refinement on a fixed mesh is nested as well
  auto s2 = solve_dirichlet_2d(b[1], 2, log_norm);
  CHECK(energy_gap(s[1], s2) == doctest::Approx(s2.energy - s[1].energy).epsilon(1e-6));
}

TEST_CASE("energy extrapolation") {
  // geometric energies E_i = 1 - q^i: the limit is 1
  const double q = 0.25;
  std::vector<double> E, gaps;
  for (int i = 0; i < 5; ++i) E.push_back(1 - std::pow(q, i));
  for (int i = 1; i < 5; ++i) gaps.push_back(E[i] - E[i - 1]);
  auto a = energy_errors(E), b = energy_errors_from_gaps(gaps);
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i] == doctest::Approx(std::sqrt(std::pow(q, i))).epsilon(1e-12));
    CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(energy_errors({1.0, 2.0}), Error);
  CHECK_THROWS_AS(energy_errors({1.0, 2.0, 1.5}), Error);
  CHECK_THROWS_AS(energy_errors_from_gaps({1e-3, -1e-4}), Error);
  CHECK_THROWS_AS(energy_errors_from_gaps({1e-3, 2e-3}), Error);
}

TEST_CASE("rates") {
  auto r = rates({1.0, 0.25}, {10.0, 40.0});
  CHECK(r[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(rates({1.0}, {1.0}), Error);
  CHECK_THROWS_AS(rates({1.0, 0.0}, {1.0, 2.0}), Error);
}

TEST_CASE("h-version energy rates are p + 3/2") {
  for (int p = 0; p <= 3; ++p) {
    std::vector<double> dofs;
    auto e = h_errors(p, 2, 6, &dofs);
    e.pop_back();
    dofs.pop_back();
    auto r = rates(e, dofs);
    CAPTURE(p);
    for (size_t i = r.size() - 2; i < r.size(); ++i) CHECK(std::abs(r[i] - (p + 1.5)) < 0.2);
  }
}

TEST_CASE("p-version on a fixed mesh decreases until the floor") {
  auto b = square(5);
  std::vector<Solution> s;
  for (int p = 0; p <= 7; ++p) s.push_back(solve_dirichlet_2d(b, p, log_norm));
  std::vector<double> gaps;
  for (size_t i = 1; i < s.size(); ++i) gaps.push_back(energy_gap(s[i - 1], s[i]));
  // gaps shrink faster than geometrically at first
  for (int i = 0; i < 5; ++i) CHECK(gaps[i + 1] < 0.05 * gaps[i]);
}

TEST_CASE("2D Hessian at (1/2, 1/3)") {
  const Vec2 x(0.5, 1.0 / 3);
  double prev = 1e300;
  for (int n : {4, 8, 16, 32}) {
    auto b = square(n);
    auto s = solve_dirichlet_2d(b, 2, log_norm);
    auto [e, t] = locate(b, x);
    const Mat2 H = hessian_fd(s.mu, e, t);
    const double err = (H - log_hessian(x)).norm();
    CHECK(err < prev);
    CHECK(std::abs(H.trace()) < 1e-4 * H.norm());
    CHECK(std::abs(H(0, 1) - H(1, 0)) < 1e-4 * H.norm());
    prev = err;
  }
  CHECK(prev < 2e-3);
}

TEST_CASE("surface gradient is the exterior limit") {
  auto b = square(8);
  auto s = solve_dirichlet_2d(b, 2, log_norm);
  auto [e, t] = locate(b, Vec2(0.5, 1.0 / 3));
  const Vec2 x = b.start(e) + t * (b.end(e) - b.start(e));
  const Vec2 g0 = surface_gradient(s.mu, e, t);
  const Vec2 g1 = gradient(s.mu, x + 1e-7 * b.normal(e));
  CHECK((g0 - g1).norm() < 1e-5);
  // the interior side differs by the jump mu n
  const Vec2 g2 = gradient(s.mu, x - 1e-7 * b.normal(e));
  CHECK((g1 - g2 + s.mu.value(e, t) * b.normal(e)).norm() < 1e-5);
  CHECK_THROWS_AS(surface_gradient(s.mu, e, 0.0), GeometryError);
  CHECK_THROWS_AS(hessian_fd(s.mu, e, 1e-7), FdGeometryError);
}

TEST_CASE("locate on the polygon") {
  auto b = square(4);
  auto [e, s] = locate(b, Vec2(0.5, 0.1));
  CHECK(b.start(e).x() == 0.5);
  CHECK((b.start(e) + s * (b.end(e) - b.start(e)) - Vec2(0.5, 0.1)).norm() < 1e-14);
  CHECK_THROWS_AS(locate(b, Vec2(0.5, 0.0)), GeometryError);
  CHECK_THROWS_AS(locate(b, Vec2(0.2, 0.1)), GeometryError);
}
