#include "molo/field_eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

namespace molo {

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);
constexpr int kCoarseOrder = 4;

void sample_facets(const DGDensity& mu, int order, Points3& pts, Eigen::VectorXd& w, int& nq) {
  const auto& space = *mu.space;
  const auto r = gauss_rule_triangle<double>(order);
  nq = r.size();
  const int nt = space.mesh.num_triangles();
  pts.resize(3, nt * nq);
  w.resize(nt * nq);
  for (int t = 0; t < nt; ++t) {
    const auto& T = space.geom[t];
    for (int k = 0; k < nq; ++k) {
      const double xi = r.points(0, k), eta = r.points(1, k);
      pts.col(t * nq + k) = ref_to_world(T, xi, eta);
      w[t * nq + k] = 2.0 * T.area * r.weights[k] * mu.value(t, xi, eta);
    }
  }
}

}  // namespace

LayerEvaluator::LayerEvaluator(const DGDensity& mu, const EvalOptions& opt) : mu_(mu), opt_(opt) {
  if (!mu.space) throw StateError("density without space");
  if (mu.coeffs.size() != mu.space->dim()) throw StateError("density length does not match space");
  const auto& space = *mu.space;
  const int nt = space.mesh.num_triangles();
  centroid_.resize(nt);
  diam_.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& T = space.geom[t];
    centroid_[t] = (T.v[0] + T.v[1] + T.v[2]) / 3.0;
    diam_[t] = T.diam;
  }
  sample_facets(mu, opt.far_order, far_pts_, far_w_, nq_);
  sample_facets(mu, kCoarseOrder, coarse_pts_, far_w_coarse_, nq_coarse_);
}

void LayerEvaluator::potential_and_gradient(const Vec3& x, double& u, Vec3& g) const {
  const auto& space = *mu_.space;
  const int nt = space.mesh.num_triangles(), nl = space.local_dim();
  double pot[kMaxMonomials];
  Vec3 grad[kMaxMonomials];
  u = 0.0;
  g.setZero();
  for (int t = 0; t < nt; ++t) {
    const double ratio = (x - centroid_[t]).norm() / diam_[t];
    if (ratio >= opt_.far_ratio) {
      const bool coarse = ratio >= 4 * opt_.far_ratio;
      const Points3& P = coarse ? coarse_pts_ : far_pts_;
      const Eigen::VectorXd& W = coarse ? far_w_coarse_ : far_w_;
      const int nq = coarse ? nq_coarse_ : nq_;
      for (int k = t * nq; k < (t + 1) * nq; ++k) {
        const Vec3 d = x - P.col(k);
        const double r2 = d.squaredNorm(), r = std::sqrt(r2);
        u += kInv4Pi * W[k] / r;
        g -= (kInv4Pi * W[k] / (r2 * r)) * d;
      }
    } else {
      slp_triangle_moments(space.geom[t], x, space.p, pot, grad, opt_.angular);
      for (int a = 0; a < nl; ++a) {
        u += mu_.coeffs[t * nl + a] * pot[a];
        g += mu_.coeffs[t * nl + a] * grad[a];
      }
    }
  }
}

double LayerEvaluator::potential(const Vec3& x) const {
  const auto& space = *mu_.space;
  const int nt = space.mesh.num_triangles(), nl = space.local_dim();
  double pot[kMaxMonomials];
  double u = 0.0;
  for (int t = 0; t < nt; ++t) {
    const double ratio = (x - centroid_[t]).norm() / diam_[t];
    if (ratio >= opt_.far_ratio) {
      const bool coarse = ratio >= 4 * opt_.far_ratio;
      const Points3& P = coarse ? coarse_pts_ : far_pts_;
      const Eigen::VectorXd& W = coarse ? far_w_coarse_ : far_w_;
      const int nq = coarse ? nq_coarse_ : nq_;
      for (int k = t * nq; k < (t + 1) * nq; ++k) u += kInv4Pi * W[k] / (x - P.col(k)).norm();
    } else {
      slp_triangle_moments(space.geom[t], x, space.p, pot, nullptr, opt_.angular);
      for (int a = 0; a < nl; ++a) u += mu_.coeffs[t * nl + a] * pot[a];
    }
  }
  return u;
}

Vec3 LayerEvaluator::gradient(const Vec3& x) const {
  double u;
  Vec3 g;
  potential_and_gradient(x, u, g);
  return g;
}

Vec3 LayerEvaluator::surface_gradient(int t, double xi, double eta) const {
  const auto& space = *mu_.space;
  if (t < 0 || t >= space.mesh.num_triangles()) throw GeometryError("facet index out of range");
  if (std::min({xi, eta, 1.0 - xi - eta}) <= 1e-10)
    throw GeometryError("surface gradient requested on a facet edge (ambiguous trace)");
  const auto& T = space.geom[t];
  return gradient(ref_to_world(T, xi, eta)) - 0.5 * mu_.value(t, xi, eta) * T.n;
}

double eval_potential(const DGDensity& mu, const Vec3& x, const EvalOptions& opt) {
  return LayerEvaluator(mu, opt).potential(x);
}

double eval_gradient_on_surface(const DGDensity& mu, int t, double xi, double eta, const Vec3& e,
                                const EvalOptions& opt) {
  return e.dot(LayerEvaluator(mu, opt).surface_gradient(t, xi, eta));
}

HessianResult eval_hessian_fd(const LayerEvaluator& ev, int t, double xi, double eta,
                              double delta_n, double delta_t) {
  const auto& space = *ev.density().space;
  const auto& T = space.geom[t];
  const Vec3 x = ref_to_world(T, xi, eta);
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& v : T.v) dmin = std::min(dmin, (x - v).norm());
  HessianResult res;
  res.delta_n = std::min(delta_n, 0.5 * dmin);
  res.delta_t = std::min(delta_t, 0.5 * dmin);
  auto ref_of = [&](const Vec3& y) {
    const Vec3 r = y - T.v[0];
    return Eigen::Vector2d(T.to_ref * Eigen::Vector2d(r.dot(T.t1), r.dot(T.t2)));
  };
  for (const Vec3& dir : {T.t1, T.t2})
    for (double s : {-1.0, 1.0}) {
      const auto rp = ref_of(x + s * res.delta_t * dir);
      if (std::min({rp[0], rp[1], 1.0 - rp[0] - rp[1]}) <= 1e-10)
        throw FdGeometryError("tangential difference leaves facet " + std::to_string(t));
    }
  for (int k = 1; k <= 2; ++k)
    if (winding_number(space.mesh, x + k * res.delta_n * T.n) > 0.5)
      throw FdGeometryError("normal offset falls inside the surface at facet " + std::to_string(t));
  auto on_surface = [&](const Vec3& y) {
    const auto rp = ref_of(y);
    return ev.surface_gradient(t, rp[0], rp[1]);
  };
  const double dt = res.delta_t, dn = res.delta_n;
  Mat3 D;
  D.col(0) = (on_surface(x + dt * T.t1) - on_surface(x - dt * T.t1)) / (2 * dt);
  D.col(1) = (on_surface(x + dt * T.t2) - on_surface(x - dt * T.t2)) / (2 * dt);
  D.col(2) = (4 * ev.gradient(x + dn * T.n) - 3 * ev.surface_gradient(t, xi, eta) -
              ev.gradient(x + 2 * dn * T.n)) / (2 * dn);
  Mat3 F;
  F << T.t1, T.t2, T.n;
  res.H = D * F.transpose();
  return res;
}

HessianResult eval_hessian_fd(const DGDensity& mu, int t, double xi, double eta, double delta_n,
                              double delta_t) {
  return eval_hessian_fd(LayerEvaluator(mu), t, xi, eta, delta_n, delta_t);
}

namespace {

struct Monomial {
  int e[3];
};

std::vector<Monomial> monomials(int degree) {
  std::vector<Monomial> m;
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a)
      for (int b = d - a; b >= 0; --b) m.push_back({{a, b, d - a - b}});
  return m;
}

// Columns span the harmonic polynomials of the given degree in monomial
// coefficients.
const Eigen::MatrixXd& harmonic_basis(int degree) {
  static std::map<int, Eigen::MatrixXd> cache;
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;
  const auto m = monomials(degree);
  const int n = static_cast<int>(m.size());
  std::map<std::array<int, 3>, int> index;
  for (int i = 0; i < n; ++i) index[{m[i].e[0], m[i].e[1], m[i].e[2]}] = i;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      const int ek = m[i].e[k];
      if (ek < 2) continue;
      std::array<int, 3> e{m[i].e[0], m[i].e[1], m[i].e[2]};
      e[k] -= 2;
      lap(index.at(e), i) += ek * (ek - 1);
    }
  return cache.emplace(degree, Eigen::FullPivLU<Eigen::MatrixXd>(lap).kernel()).first->second;
}

}  // namespace

ExteriorLimit exterior_limit(const LayerEvaluator& ev, const Vec3& x, const Vec3& n, double scale,
                             const HarmonicFit& fit, const Vec3& tangent) {
  if (fit.degree < 2 || !(fit.near > 0) || !(fit.far > fit.near) || !(scale > 0))
    throw Error("invalid harmonic fit parameters");
  const auto& mesh = ev.density().space->mesh;
  Vec3 t1 = tangent - tangent.dot(n) * n;
  t1 = t1.norm() > 1e-12 * tangent.norm() && tangent.norm() > 0 ? t1.normalized() : n.unitOrthogonal();
  const Vec3 t2 = n.cross(t1);
  std::vector<Vec3> pts;
  constexpr int kShells = 5;
  for (int j = 0; j < kShells; ++j) {
    const double d = fit.near + (fit.far - fit.near) * j / (kShells - 1);
    pts.push_back(d * n);
    for (double tilt : {0.35, 0.7})
      for (int k = 0; k < 6; ++k) {
        const double phi = std::numbers::pi * k / 3 + (tilt > 0.5 ? std::numbers::pi / 6 : 0.0);
        pts.push_back(d * (std::cos(tilt) * n +
                           std::sin(tilt) * (std::cos(phi) * t1 + std::sin(phi) * t2)));
      }
  }
  const auto m = monomials(fit.degree);
  const Eigen::MatrixXd& B = harmonic_basis(fit.degree);
  Eigen::MatrixXd A(pts.size(), m.size());
  Eigen::VectorXd b(pts.size());
  for (size_t q = 0; q < pts.size(); ++q) {
    const Vec3 y = x + scale * pts[q];
    if (q <= 12 && winding_number(mesh, y) > 0.5)
      throw FdGeometryError("exterior sample falls inside the surface");
    b[q] = ev.potential(y);
    for (size_t c = 0; c < m.size(); ++c)
      A(q, c) = std::pow(pts[q][0], m[c].e[0]) * std::pow(pts[q][1], m[c].e[1]) *
                std::pow(pts[q][2], m[c].e[2]);
  }
  const Eigen::VectorXd co = B * (A * B).colPivHouseholderQr().solve(b);
  ExteriorLimit out;
  for (size_t c = 0; c < m.size(); ++c) {
    const int* e = m[c].e;
    const int d = e[0] + e[1] + e[2];
    if (d == 0) out.u = co[c];
    if (d == 1) out.g[e[0] ? 0 : e[1] ? 1 : 2] = co[c];
    if (d == 2) {
      int i = -1, j = -1;
      for (int k = 0; k < 3; ++k)
        for (int r = 0; r < e[k]; ++r) (i < 0 ? i : j) = k;
      const double v = i == j ? 2 * co[c] : co[c];
      out.H(i, j) = v;
      out.H(j, i) = v;
    }
  }
  out.g /= scale;
  out.H /= scale * scale;
  return out;
}

MarussiReport check_marussi(const std::vector<Mat3>& H, double threshold) {
  MarussiReport r;
  r.abs_det.reserve(H.size());
  r.min_abs_det = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < H.size(); ++i) {
    const double d = std::abs(H[i].determinant());
    r.abs_det.push_back(d);
    r.min_abs_det = std::min(r.min_abs_det, d);
    if (!(d >= threshold)) r.flagged.push_back(static_cast<int>(i));
  }
  return r;
}

}  // namespace molo
