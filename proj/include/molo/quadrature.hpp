#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "molo/errors.hpp"

namespace molo {

// Points on the reference element: [0,1] for segments (Dim = 1), the triangle
// (0,0),(1,0),(0,1) for Dim = 2.
template <typename Scalar, int Dim>
struct QuadRule {
  Eigen::Matrix<Scalar, Dim, Eigen::Dynamic> points;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  int size() const { return static_cast<int>(weights.size()); }

  template <typename F>
  auto integrate(F&& f) const {
    auto s = f(points.col(0)) * weights[0];
    for (int i = 1; i < size(); ++i) s += f(points.col(i)) * weights[i];
    return s;
  }
};

template <typename Scalar>
using SegmentRule = QuadRule<Scalar, 1>;
template <typename Scalar>
using TriangleRule = QuadRule<Scalar, 2>;

// n-point Gauss-Legendre rule on [0,1].
template <typename Scalar = double>
SegmentRule<Scalar> gauss_legendre(int n) {
  if (n < 1 || n > 256) throw Error("Gauss-Legendre order out of range");
  SegmentRule<Scalar> r;
  r.points.resize(1, n);
  r.weights.resize(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar x = std::cos(pi * (i + Scalar(0.75)) / (n + Scalar(0.5)));
    Scalar dp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) { p1 = x; p0 = 1; }
      dp = n * (x * p1 - p0) / (x * x - 1);
      Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 4 * std::numeric_limits<Scalar>::epsilon()) {
        // one more evaluation for the derivative at the converged root
        Scalar q0 = 1, q1 = x;
        for (int k = 2; k <= n; ++k) {
          Scalar q2 = ((2 * k - 1) * x * q1 - (k - 1) * q0) / k;
          q0 = q1;
          q1 = q2;
        }
        if (n == 1) { q1 = x; q0 = 1; }
        dp = n * (x * q1 - q0) / (x * x - 1);
        break;
      }
    }
    Scalar w = 2 / ((1 - x * x) * dp * dp);
    r.points(0, i) = (1 - x) / 2;
    r.points(0, n - 1 - i) = (1 + x) / 2;
    r.weights[i] = w / 2;
    r.weights[n - 1 - i] = w / 2;
  }
  return r;
}

// Same rule for [0,1] segments; the order validation of the public entry point.
template <typename Scalar = double>
SegmentRule<Scalar> gauss_rule_segment(int n) {
  if (n < 1 || n > 64) throw Error("gauss rule order must lie in [1,64]");
  return gauss_legendre<Scalar>(n);
}

// Collapsed tensor rule on the reference triangle, exact for degree 2n-1.
template <typename Scalar = double>
TriangleRule<Scalar> gauss_rule_triangle(int n) {
  if (n < 1 || n > 64) throw Error("gauss rule order must lie in [1,64]");
  auto gu = gauss_legendre<Scalar>(n + 1);
  auto gv = gauss_legendre<Scalar>(n);
  TriangleRule<Scalar> r;
  r.points.resize(2, gu.size() * gv.size());
  r.weights.resize(gu.size() * gv.size());
  int k = 0;
  for (int i = 0; i < gu.size(); ++i)
    for (int j = 0; j < gv.size(); ++j, ++k) {
      Scalar u = gu.points(0, i), v = gv.points(0, j);
      r.points(0, k) = u;
      r.points(1, k) = (1 - u) * v;
      r.weights[k] = gu.weights[i] * gv.weights[j] * (1 - u);
    }
  return r;
}

namespace detail {

// Breakpoints 0 = s_0 < ... < s_L = 1 graded geometrically toward 0.
template <typename Scalar>
std::vector<Scalar> graded_breaks(int levels, Scalar sigma) {
  std::vector<Scalar> b(levels + 1);
  b[0] = 0;
  for (int i = 1; i <= levels; ++i) b[i] = std::pow(sigma, Scalar(levels - i));
  return b;
}

// Appends the Duffy-type rule of the sub-triangle (apex, a, b), graded in the
// radial variable toward the apex (toward_apex) or toward the base edge.
template <typename Scalar>
void append_subtriangle(std::vector<Eigen::Matrix<Scalar, 2, 1>>& pts, std::vector<Scalar>& wts,
                        const Eigen::Matrix<Scalar, 2, 1>& apex,
                        const Eigen::Matrix<Scalar, 2, 1>& a,
                        const Eigen::Matrix<Scalar, 2, 1>& b, int levels, Scalar sigma, int n,
                        bool toward_apex) {
  Eigen::Matrix<Scalar, 2, 1> ea = a - apex, eb = b - apex;
  Scalar jac = std::abs(ea[0] * eb[1] - ea[1] * eb[0]);  // 2 * area
  if (!(jac > 0)) return;
  auto g = gauss_legendre<Scalar>(n);
  auto br = graded_breaks<Scalar>(levels, sigma);
  for (int l = 0; l < levels; ++l) {
    Scalar lo = br[l], hi = br[l + 1];
    if (!toward_apex) {
      Scalar lo2 = 1 - hi, hi2 = 1 - lo;
      lo = lo2;
      hi = hi2;
    }
    for (int i = 0; i < n; ++i) {
      Scalar s = lo + (hi - lo) * g.points(0, i);
      Scalar ws = (hi - lo) * g.weights[i];
      for (int j = 0; j < n; ++j) {
        Scalar t = g.points(0, j);
        pts.push_back(apex + s * ((1 - t) * ea + t * eb));
        wts.push_back(jac * s * ws * g.weights[j]);
      }
    }
  }
}

// Sub-triangle (apex, a, b) graded toward the base edge in the radial
// variable; within each radial cell the variable along the base is graded
// toward both base corners with min(distance level, corner_levels) levels.
template <typename Scalar>
void append_base_graded(std::vector<Eigen::Matrix<Scalar, 2, 1>>& pts, std::vector<Scalar>& wts,
                        const Eigen::Matrix<Scalar, 2, 1>& apex,
                        const Eigen::Matrix<Scalar, 2, 1>& a,
                        const Eigen::Matrix<Scalar, 2, 1>& b, int levels, Scalar sigma, int n,
                        int corner_levels) {
  Eigen::Matrix<Scalar, 2, 1> ea = a - apex, eb = b - apex;
  Scalar jac = std::abs(ea[0] * eb[1] - ea[1] * eb[0]);
  if (!(jac > 0)) return;
  auto g = gauss_legendre<Scalar>(n);
  auto br = graded_breaks<Scalar>(levels, sigma);
  for (int l = 0; l < levels; ++l) {
    const Scalar lo = 1 - br[l + 1], hi = 1 - br[l];
    const int m = std::min(levels - l, corner_levels);
    std::vector<Scalar> tb;
    if (m < 1) {
      tb = {Scalar(0), Scalar(1)};
    } else {
      auto cb = graded_breaks<Scalar>(m, sigma);
      for (int i = 0; i <= m; ++i) tb.push_back(cb[i] / 2);
      for (int i = m - 1; i >= 0; --i) tb.push_back(1 - cb[i] / 2);
    }
    for (size_t c = 0; c + 1 < tb.size(); ++c) {
      const Scalar tlo = tb[c], thi = tb[c + 1];
      for (int i = 0; i < n; ++i) {
        Scalar s = lo + (hi - lo) * g.points(0, i);
        Scalar ws = (hi - lo) * g.weights[i];
        for (int j = 0; j < n; ++j) {
          Scalar t = tlo + (thi - tlo) * g.points(0, j);
          pts.push_back(apex + s * ((1 - t) * ea + t * eb));
          wts.push_back(jac * s * ws * (thi - tlo) * g.weights[j]);
        }
      }
    }
  }
}

template <typename Scalar>
TriangleRule<Scalar> pack(const std::vector<Eigen::Matrix<Scalar, 2, 1>>& pts,
                          const std::vector<Scalar>& wts) {
  TriangleRule<Scalar> r;
  r.points.resize(2, pts.size());
  r.weights.resize(wts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    r.points.col(i) = pts[i];
    r.weights[i] = wts[i];
  }
  return r;
}

}  // namespace detail

// Composite rule on the reference triangle graded geometrically toward the
// target point: sub-triangles with apex at the target, radial variable split
// at sigma^(L-1), ..., sigma, n x n Gauss points per cell.
template <typename Scalar = double>
TriangleRule<Scalar> graded_composite_rule(const Eigen::Matrix<Scalar, 2, 1>& target, int levels,
                                           Scalar sigma, int n) {
  if (!(sigma > 0 && sigma < 1)) throw Error("grading factor must lie in (0,1)");
  if (levels < 1 || n < 1) throw Error("graded rule needs levels >= 1 and order >= 1");
  using P = Eigen::Matrix<Scalar, 2, 1>;
  const P v[3] = {P(0, 0), P(1, 0), P(0, 1)};
  std::vector<P> pts;
  std::vector<Scalar> wts;
  // bases are split so that no sub-triangle spans more than pi/4 at the target
  for (int e = 0; e < 3; ++e) {
    const P a = v[e] - target, b = v[(e + 1) % 3] - target;
    const Scalar ang = std::atan2(std::abs(a[0] * b[1] - a[1] * b[0]), a.dot(b));
    const int pieces = std::max(1, static_cast<int>(std::ceil(ang / (std::numbers::pi_v<Scalar> / 4))));
    for (int k = 0; k < pieces; ++k) {
      const P p0 = v[e] + (v[(e + 1) % 3] - v[e]) * (Scalar(k) / pieces);
      const P p1 = v[e] + (v[(e + 1) % 3] - v[e]) * (Scalar(k + 1) / pieces);
      detail::append_subtriangle<Scalar>(pts, wts, target, p0, p1, levels, sigma, n, true);
    }
  }
  return detail::pack(pts, wts);
}

// Rule graded toward the flagged edges of the reference triangle (edge e
// joins corner e and corner e+1): sub-triangles from the centroid, graded
// toward the base on flagged edges and plain on the others.
template <typename Scalar = double>
TriangleRule<Scalar> edge_graded_rule(const std::array<bool, 3>& edges, int levels, Scalar sigma,
                                      int n, int corner_levels = 0) {
  using P = Eigen::Matrix<Scalar, 2, 1>;
  const P v[3] = {P(0, 0), P(1, 0), P(0, 1)};
  const P c(Scalar(1) / 3, Scalar(1) / 3);
  std::vector<P> pts;
  std::vector<Scalar> wts;
  for (int e = 0; e < 3; ++e) {
    if (edges[e])
      detail::append_base_graded<Scalar>(pts, wts, c, v[e], v[(e + 1) % 3], levels, sigma, n,
                                         corner_levels);
    else
      detail::append_subtriangle<Scalar>(pts, wts, c, v[e], v[(e + 1) % 3], 1, sigma, n, false);
  }
  return detail::pack(pts, wts);
}

// Single Duffy patch from the vertex opposite edge e, graded toward edge e
// and its two corners.
template <typename Scalar = double>
TriangleRule<Scalar> edge_singular_rule(int e, int levels, Scalar sigma, int n, int corner_levels) {
  if (e < 0 || e > 2) throw Error("edge index must lie in [0,2]");
  using P = Eigen::Matrix<Scalar, 2, 1>;
  const P v[3] = {P(0, 0), P(1, 0), P(0, 1)};
  std::vector<P> pts;
  std::vector<Scalar> wts;
  detail::append_base_graded<Scalar>(pts, wts, v[(e + 2) % 3], v[e], v[(e + 1) % 3], levels, sigma,
                                     n, corner_levels);
  return detail::pack(pts, wts);
}

// Rule on [0,1] graded toward 0, toward 1, or both ends.
template <typename Scalar = double>
SegmentRule<Scalar> graded_segment_rule(bool at_zero, bool at_one, int levels, Scalar sigma,
                                        int n) {
  auto g = gauss_legendre<Scalar>(n);
  std::vector<Scalar> p, w;
  auto emit = [&](Scalar lo, Scalar hi) {
    for (int i = 0; i < n; ++i) {
      p.push_back(lo + (hi - lo) * g.points(0, i));
      w.push_back((hi - lo) * g.weights[i]);
    }
  };
  auto half = [&](Scalar a, Scalar b, bool graded_at_a) {
    // integrate over [a,b], graded toward a if requested
    if (!graded_at_a) { emit(a, b); return; }
    auto br = detail::graded_breaks<Scalar>(levels, sigma);
    for (int l = 0; l < levels; ++l) emit(a + (b - a) * br[l], a + (b - a) * br[l + 1]);
  };
  if (at_zero && at_one) {
    half(Scalar(0), Scalar(0.5), true);
    std::vector<Scalar> p2, w2;
    size_t start = p.size();
    half(Scalar(0), Scalar(0.5), true);
    for (size_t i = start; i < p.size(); ++i) p[i] = 1 - p[i];
  } else if (at_one) {
    size_t start = p.size();
    half(Scalar(0), Scalar(1), true);
    for (size_t i = start; i < p.size(); ++i) p[i] = 1 - p[i];
  } else {
    half(Scalar(0), Scalar(1), at_zero);
  }
  SegmentRule<Scalar> r;
  r.points.resize(1, p.size());
  r.weights.resize(w.size());
  for (size_t i = 0; i < p.size(); ++i) {
    r.points(0, i) = p[i];
    r.weights[i] = w[i];
  }
  return r;
}

// Default number of grading levels for mesh width h.
inline int default_grading_levels(double h) {
  return std::max(4, static_cast<int>(std::ceil(std::abs(std::log2(h)))) + 4);
}

}  // namespace molo
