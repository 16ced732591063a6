#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>

#include "molo/mesh.hpp"
#include "molo/quadrature.hpp"

namespace molo {

using Vec2 = Eigen::Vector2d;

inline constexpr int kMaxDegree = 3;
inline constexpr int kMaxMonomials = (kMaxDegree + 1) * (kMaxDegree + 2) / 2;

inline int num_monomials(int p) { return (p + 1) * (p + 2) / 2; }

// Monomial k of the triangle basis is xi^a eta^b with degree d = a + b; the
// ordering runs over d and then b = 0..d.
struct MonomialIndex {
  int a, b;
};
MonomialIndex monomial(int k);
int monomial_id(int a, int b);

enum class KernelId { newton3d, log2d, adlp3d };

// Flat triangle with reference map y = v0 + xi (v1 - v0) + eta (v2 - v0).
struct TriangleGeom {
  std::array<Vec3, 3> v;
  Vec3 e1, e2, n, t1, t2;
  double area = 0, diam = 0;
  std::array<Vec2, 3> q;           // in-plane coordinates, origin v0
  Eigen::Matrix2d to_ref;          // in-plane offset -> (xi, eta)
  std::array<Vec2, 3> edge_dir;    // unit, counter-clockwise
  std::array<Vec2, 3> edge_out;    // unit outward in-plane normal
};

TriangleGeom make_triangle(const Vec3& a, const Vec3& b, const Vec3& c);
TriangleGeom make_triangle(const TriangleMesh& mesh, int t);

Vec3 ref_to_world(const TriangleGeom& T, double xi, double eta);

// Values of all monomials of degree <= p at (xi, eta).
void eval_monomials(int p, double xi, double eta, double* out);

struct AngularRule {
  double piece = 1.0;  // maximal length of a sinh-parameter piece
  int order = 8;       // Gauss points per piece
};

// Integrals over T of every monomial of degree <= p against 1/(4 pi |x - y|)
// (pot) and its x-gradient (grad), evaluated in closed form radially and by
// sinh-transformed Gauss quadrature in the angle. Points within
// 1e-13 * diam of the plane are treated as lying in it; the gradient then
// is the principal value (no normal jump term). grad may be null.
void slp_triangle_moments(const TriangleGeom& T, const Vec3& x, int p, double* pot, Vec3* grad,
                          const AngularRule& rule = {});

// Same integrals by a plain quadrature rule on the reference triangle.
void slp_triangle_moments_rule(const TriangleGeom& T, const Vec3& x, int p,
                               const TriangleRule<double>& rule, double* pot, Vec3* grad);

// Single monomial xi^a eta^b, a + b <= 3.
double slp_triangle_analytic(const Vec3& x, const TriangleGeom& T, int a, int b);

// --- 2D -------------------------------------------------------------------

struct SegmentGeom {
  Vec2 a, b, c, tau, out;  // out = outward normal for counter-clockwise polygons
  double len = 0;
};

SegmentGeom make_segment(const Vec2& a, const Vec2& b);

// Legendre polynomials P_0..P_p at t.
void legendre(int p, double t, double* out);

// Integrals of P_k(t), t in [-1,1] the local coordinate (y = c + t len/2 tau),
// against -(1/2 pi) log|x - y| ds_y and its x-gradient. Points on the segment
// get the exterior-side limit of the gradient (the side of `out`).
void slp_segment_moments(const SegmentGeom& s, const Vec2& x, int p, double* pot, Vec2* grad);

// Integral of t^degree (degree <= 3) against -(1/2 pi) log|x - y|.
double slp_segment_analytic_2d(const Vec2& x, const SegmentGeom& s, int degree);

}  // namespace molo
