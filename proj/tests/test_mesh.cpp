#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "molo/mesh.hpp"

using namespace molo;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("icosphere counts") {
  CHECK(build_icosphere(0).num_triangles() == 20);
  CHECK(build_icosphere(0).num_vertices() == 12);
  CHECK(build_icosphere(2).num_triangles() == 320);
  CHECK(build_icosphere(3).num_triangles() == 1280);
  for (int n = 0; n <= 5; ++n) {
    auto m = build_icosphere(n);
    CHECK(m.num_vertices() == 10 * (1 << (2 * n)) + 2);
    CHECK(m.num_triangles() == 20 * (1 << (2 * n)));
    CHECK(is_edge_manifold(m));
    CHECK(m.level == n);
  }
  CHECK_THROWS_AS(build_icosphere(8), CapacityError);
  CHECK_THROWS_AS(build_icosphere(3, 2), CapacityError);
}

TEST_CASE("icosphere geometry") {
  auto m = build_icosphere(3);
  for (int i = 0; i < m.num_vertices(); ++i) {
    CHECK(std::abs(m.vertices.col(i).norm() - 1.0) < 1e-14);
    CHECK(std::abs(m.reference.col(i).norm() - 1.0) < 1e-14);
  }
  for (int t = 0; t < m.num_triangles(); ++t) {
    auto g = facet_geometry(m, t);
    CHECK(g.area > 0);
    CHECK(std::abs(g.normal.norm() - 1.0) < 1e-14);
    CHECK(g.normal.dot(g.midpoint) > 0);
  }
  CHECK(total_area(build_icosphere(0)) < 4 * M_PI);
  CHECK(total_area(m) < 4 * M_PI);
  CHECK(total_area(m) > total_area(build_icosphere(2)));
}

TEST_CASE("icosphere is deterministic") {
  auto a = build_icosphere(2), b = build_icosphere(2);
  CHECK(a.vertices == b.vertices);
  CHECK(a.triangles == b.triangles);
}

TEST_CASE("facet area closed forms") {
  TriangleMesh m;
  m.vertices.resize(3, 3);
  m.vertices << 0, 1, 0.5, 0, 0, std::sqrt(3.0) / 2, 0, 0, 0;
  m.reference = m.vertices;
  m.triangles.resize(3, 1);
  m.triangles << 0, 1, 2;
  CHECK(facet_geometry(m, 0).area == doctest::Approx(std::sqrt(3.0) / 4).epsilon(1e-15));
  CHECK(facet_geometry(m, 0).normal.z() == doctest::Approx(1.0));

  auto s = build_icosphere(1);
  TriangleMesh s2 = s;
  s2.vertices *= 2.5;
  for (int t = 0; t < s.num_triangles(); ++t)
    CHECK(facet_geometry(s2, t).area == doctest::Approx(6.25 * facet_geometry(s, t).area));

  m.vertices.col(2) = Vec3(2, 0, 0);
  CHECK_THROWS_AS(facet_geometry(m, 0), GeometryError);
}

TEST_CASE("update_surface") {
  auto m = build_icosphere(2);
  SurfaceField zero = SurfaceField::Zero(3, m.num_vertices());
  CHECK(update_surface(m, zero, 0.7).vertices == m.vertices);

  auto r = update_surface(m, m.vertices, 0.1);
  for (int i = 0; i < r.num_vertices(); ++i)
    CHECK(r.vertices.col(i).norm() == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(r.reference == m.reference);
  CHECK(r.triangles == m.triangles);

  std::mt19937 rng(7);
  std::normal_distribution<double> N(0, 1);
  SurfaceField f(3, m.num_vertices()), g(3, m.num_vertices());
  for (int i = 0; i < f.size(); ++i) {
    f.data()[i] = 1e-3 * N(rng);
    g.data()[i] = 1e-3 * N(rng);
  }
  auto j = update_surface(m, f, 1.0);
  CHECK(j.num_vertices() == m.num_vertices());
  CHECK(is_edge_manifold(j));

  const double a = 0.7, b = -1.3;
  SurfaceField ab = a * f + b * g;
  auto lhs = update_surface(m, ab, 1.0);
  auto rhs = update_surface(update_surface(m, f, a), g, b);
  CHECK((lhs.vertices - rhs.vertices).cwiseAbs().maxCoeff() < 1e-15);

  SurfaceField inv = SurfaceField::Zero(3, m.num_vertices());
  inv.col(0) = 0.8 * m.vertices.col(0).cross(Vec3(0.3, 0.2, 0.9)).normalized();
  CHECK_THROWS_AS(update_surface(m, inv, 1.0), NumericalAbort);
  SurfaceField collapse = -m.vertices;
  CHECK_THROWS_AS(update_surface(m, collapse, 1.0), NumericalAbort);
  CHECK_THROWS_AS(update_surface(m, SurfaceField::Zero(3, 5), 1.0), GeometryError);
}

TEST_CASE("mesh round trip") {
  auto m = build_icosphere(2);
  m.vertices *= 1.0 + 1.0 / 3.0;
  auto path = tmp_path("molo_roundtrip.mesh");
  export_mesh(m, path);
  auto r = import_mesh(path);
  CHECK(r.vertices == m.vertices);
  CHECK(r.reference == m.reference);
  CHECK(r.triangles == m.triangles);
  CHECK(r.num_triangles() == 320);
  CHECK(r.level == 2);
  std::filesystem::remove(path);
}

TEST_CASE("mesh import errors") {
  auto path = tmp_path("molo_bad.mesh");
  {
    std::ofstream f(path);
    f << "molodensky-mesh v1 3 1\n0 0 0 0 0 1\n1 0 0 1 0 0\n0 1 0 0 1 0\n0 1 7\n";
  }
  try {
    import_mesh(path);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":5") != std::string::npos);
  }
  {
    std::ofstream f(path);
    f << "molodensky-mesh v1 3 1\n0 0 0 0 0 1\n1 0 x 1 0 0\n";
  }
  CHECK_THROWS_AS(import_mesh(path), ParseError);
  {
    std::ofstream f(path);
    f << "not-a-mesh\n";
  }
  CHECK_THROWS_AS(import_mesh(path), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(import_mesh(path), ParseError);
}

TEST_CASE("icosahedral symmetry permutes vertices") {
  auto rots = icosahedral_rotations();
  CHECK(rots.size() == 60);
  for (int n = 0; n <= 3; ++n) {
    auto m = build_icosphere(n);
    for (size_t k = 0; k < rots.size(); k += 7) {
      auto perm = vertex_permutation(m, rots[k]);
      std::vector<int> seen(m.num_vertices(), 0);
      for (int i : perm) ++seen[i];
      for (int s : seen) CHECK(s == 1);
      auto tp = triangle_permutation(m, perm);
      CHECK(tp.size() == static_cast<size_t>(m.num_triangles()));
    }
  }
  Mat3 r = Eigen::AngleAxisd(0.1, Vec3::UnitZ()).toRotationMatrix();
  CHECK_THROWS(vertex_permutation(build_icosphere(1), r));
}

TEST_CASE("cube mesh") {
  for (int n = 0; n <= 2; ++n) {
    auto c = build_cube(n);
    CHECK(c.num_triangles() == 12 * (1 << (2 * n)));
    CHECK(is_edge_manifold(c));
    CHECK(total_area(c) == doctest::Approx(24.0));
    for (int t = 0; t < c.num_triangles(); ++t) {
      auto g = facet_geometry(c, t);
      CHECK(g.normal.dot(g.midpoint) > 0);
    }
  }
}

TEST_CASE("winding number") {
  auto m = build_icosphere(2);
  CHECK(winding_number(m, Vec3(0.1, 0.2, 0.1)) == doctest::Approx(1.0));
  CHECK(winding_number(m, Vec3(2, 0, 0.3)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("locate points on the surface") {
  auto c = build_cube(2);
  const Vec3 x(1, 1.0 / 3, 1.0 / 3);
  auto q = locate(c, x);
  REQUIRE(q.t >= 0);
  const Vec3 a = c.corner(q.t, 0), b = c.corner(q.t, 1), d = c.corner(q.t, 2);
  CHECK((a + q.xi * (b - a) + q.eta * (d - a) - x).norm() < 1e-14);
  CHECK(q.xi > 0.0);
  CHECK(q.eta > 0.0);
  CHECK(q.xi + q.eta < 1.0);
  CHECK_THROWS_AS(locate(c, Vec3(1, 0, 0)), GeometryError);
  CHECK_THROWS_AS(locate(c, Vec3(1.2, 0.1, 0.3)), GeometryError);
}
