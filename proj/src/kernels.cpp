#include "molo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace molo {

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);
constexpr double kInv2Pi = 1.0 / (2.0 * std::numbers::pi);

struct GaussCache {
  std::array<SegmentRule<double>, 65> rules;
  GaussCache() {
    for (int n = 1; n <= 64; ++n) rules[n] = gauss_legendre<double>(n);
  }
};

const SegmentRule<double>& gauss01(int n) {
  static const GaussCache cache;
  return cache.rules[std::clamp(n, 1, 64)];
}

}  // namespace

MonomialIndex monomial(int k) {
  int d = 0;
  while ((d + 1) * (d + 2) / 2 <= k) ++d;
  int b = k - d * (d + 1) / 2;
  return {d - b, b};
}

int monomial_id(int a, int b) {
  int d = a + b;
  return d * (d + 1) / 2 + b;
}

TriangleGeom make_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriangleGeom T;
  T.v = {a, b, c};
  T.e1 = b - a;
  T.e2 = c - a;
  Vec3 cr = T.e1.cross(T.e2);
  double twice = cr.norm();
  if (!(twice > 0.0)) throw GeometryError("degenerate triangle");
  T.area = 0.5 * twice;
  T.n = cr / twice;
  T.t1 = T.e1.normalized();
  T.t2 = T.n.cross(T.t1);
  T.diam = std::max({T.e1.norm(), T.e2.norm(), (c - b).norm()});
  for (int i = 0; i < 3; ++i) T.q[i] = Vec2((T.v[i] - a).dot(T.t1), (T.v[i] - a).dot(T.t2));
  Eigen::Matrix2d m;
  m << T.q[1], T.q[2];
  T.to_ref = m.inverse();
  for (int e = 0; e < 3; ++e) {
    Vec2 d = T.q[(e + 1) % 3] - T.q[e];
    T.edge_dir[e] = d.normalized();
    T.edge_out[e] = Vec2(T.edge_dir[e][1], -T.edge_dir[e][0]);
  }
  return T;
}

TriangleGeom make_triangle(const TriangleMesh& mesh, int t) {
  return make_triangle(mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2));
}

Vec3 ref_to_world(const TriangleGeom& T, double xi, double eta) {
  return T.v[0] + xi * T.e1 + eta * T.e2;
}

void eval_monomials(int p, double xi, double eta, double* out) {
  double px[kMaxDegree + 1], py[kMaxDegree + 1];
  px[0] = py[0] = 1.0;
  for (int i = 1; i <= p; ++i) {
    px[i] = px[i - 1] * xi;
    py[i] = py[i - 1] * eta;
  }
  int k = 0;
  for (int d = 0; d <= p; ++d)
    for (int b = 0; b <= d; ++b) out[k++] = px[d - b] * py[b];
}

void slp_triangle_moments(const TriangleGeom& T, const Vec3& x, int p, double* pot, Vec3* grad,
                          const AngularRule& rule) {
  if (p < 0 || p > kMaxDegree) throw Error("monomial degree out of range");
  const int nm = num_monomials(p);
  const Vec3 r = x - T.v[0];
  double z = r.dot(T.n);
  if (std::abs(z) <= 1e-13 * T.diam) z = 0.0;
  const double a = std::abs(z), a2 = a * a;
  const Vec2 x0(r.dot(T.t1), r.dot(T.t2));
  const Vec2 ref0 = T.to_ref * x0;

  double sp[kMaxMonomials] = {}, sn[kMaxMonomials] = {};
  Vec2 st[kMaxMonomials];
  for (int k = 0; k < nm; ++k) st[k].setZero();

  // Q[m] = int_0^rho rho^m / R, T[m] = int_0^rho rho^m / R^3, R = sqrt(rho^2 + a^2).
  double Q[kMaxDegree + 3], Tm[kMaxDegree + 4], zT[kMaxDegree + 3];
  double cxi[kMaxDegree + 1][kMaxDegree + 1], ceta[kMaxDegree + 1][kMaxDegree + 1];
  const auto& g = gauss01(rule.order);

  for (int e = 0; e < 3; ++e) {
    const Vec2 P = T.q[e] - x0, Qv = T.q[(e + 1) % 3] - x0;
    const Vec2& tau = T.edge_dir[e];
    const Vec2& nu = T.edge_out[e];
    const double d = P.dot(nu);
    if (std::abs(d) <= 1e-14 * T.diam) continue;
    const double ad = std::abs(d), sg = d > 0 ? 1.0 : -1.0;
    const double v1 = std::asinh(P.dot(tau) / ad), v2 = std::asinh(Qv.dot(tau) / ad);
    const int pieces = std::max(1, static_cast<int>(std::ceil((v2 - v1) / rule.piece)));
    const double hv = (v2 - v1) / pieces;
    for (int pc = 0; pc < pieces; ++pc) {
      for (int iq = 0; iq < g.size(); ++iq) {
        const double v = v1 + hv * (pc + g.points(0, iq));
        const double ch = std::cosh(v), sh = std::sinh(v);
        const double w = sg * hv * g.weights[iq] / ch;
        const double rho = ad * ch;
        const Vec2 om = (sg * nu + sh * tau) / ch;

        if (a == 0.0) {
          Q[0] = std::log(2.0 * rho);
          double rp = rho;
          for (int m = 1; m <= p + 1; ++m, rp *= rho) Q[m] = rp / m;
          zT[1] = 0.0;
          Tm[2] = Q[0] - 1.0;
          for (int m = 3; m <= p + 2; ++m) Tm[m] = Q[m - 2];
          for (int m = 2; m <= p + 1; ++m) zT[m] = 0.0;
        } else {
          const double R = std::sqrt(rho * rho + a2);
          Q[0] = std::asinh(rho / a);
          Q[1] = rho * rho / (R + a);
          double rp = rho;  // rho^(m-1)
          for (int m = 2; m <= p + 1; ++m) {
            Q[m] = (rp * R - (m - 1) * a2 * Q[m - 2]) / m;
            rp *= rho;
          }
          const double s1 = rho * rho / (R * (R + a));  // a * T_1
          zT[1] = (z > 0 ? 1.0 : -1.0) * s1;
          const double a2T1 = a * s1;
          Tm[2] = Q[0] - rho / R;
          if (p + 2 >= 3) Tm[3] = Q[1] - a2T1;
          for (int m = 4; m <= p + 2; ++m) Tm[m] = Q[m - 2] - a2 * Tm[m - 2];
          for (int m = 2; m <= p + 1; ++m) zT[m] = z * Tm[m];
        }

        // (xi0 + rho lxi)^i and (eta0 + rho leta)^j as polynomials in rho
        const double lxi = T.to_ref.row(0).dot(om), leta = T.to_ref.row(1).dot(om);
        cxi[0][0] = ceta[0][0] = 1.0;
        for (int i = 1; i <= p; ++i) {
          for (int j = 0; j <= i; ++j) {
            double c0 = j < i ? cxi[i - 1][j] * ref0[0] : 0.0;
            double c1 = j > 0 ? cxi[i - 1][j - 1] * lxi : 0.0;
            cxi[i][j] = c0 + c1;
            double e0 = j < i ? ceta[i - 1][j] * ref0[1] : 0.0;
            double e1 = j > 0 ? ceta[i - 1][j - 1] * leta : 0.0;
            ceta[i][j] = e0 + e1;
          }
        }
        for (int k = 0; k < nm; ++k) {
          const auto [ia, ib] = monomial(k);
          double vp = 0.0, vn = 0.0, vt = 0.0;
          for (int i = 0; i <= ia; ++i)
            for (int j = 0; j <= ib; ++j) {
              const double c = cxi[ia][i] * ceta[ib][j];
              const int q = i + j;
              vp += c * Q[q + 1];
              if (grad) {
                vn += c * zT[q + 1];
                vt += c * Tm[q + 2];
              }
            }
          sp[k] += w * vp;
          if (grad) {
            sn[k] += w * vn;
            st[k] += (w * vt) * om;
          }
        }
      }
    }
  }
  for (int k = 0; k < nm; ++k) {
    pot[k] = kInv4Pi * sp[k];
    if (grad) grad[k] = kInv4Pi * (-sn[k] * T.n + st[k][0] * T.t1 + st[k][1] * T.t2);
  }
}

void slp_triangle_moments_rule(const TriangleGeom& T, const Vec3& x, int p,
                               const TriangleRule<double>& rule, double* pot, Vec3* grad) {
  const int nm = num_monomials(p);
  double m[kMaxMonomials];
  for (int k = 0; k < nm; ++k) {
    pot[k] = 0.0;
    if (grad) grad[k].setZero();
  }
  const double jac = 2.0 * T.area;
  for (int q = 0; q < rule.size(); ++q) {
    const double xi = rule.points(0, q), eta = rule.points(1, q);
    const Vec3 y = ref_to_world(T, xi, eta);
    const Vec3 d = x - y;
    const double r2 = d.squaredNorm(), r = std::sqrt(r2);
    const double w = jac * rule.weights[q] * kInv4Pi;
    eval_monomials(p, xi, eta, m);
    const double k0 = w / r;
    for (int k = 0; k < nm; ++k) pot[k] += k0 * m[k];
    if (grad) {
      const Vec3 gk = -(w / (r2 * r)) * d;
      for (int k = 0; k < nm; ++k) grad[k] += m[k] * gk;
    }
  }
}

double slp_triangle_analytic(const Vec3& x, const TriangleGeom& T, int a, int b) {
  if (a < 0 || b < 0 || a + b > kMaxDegree) throw Error("monomial degree out of range");
  double pot[kMaxMonomials];
  slp_triangle_moments(T, x, a + b, pot, nullptr);
  return pot[monomial_id(a, b)];
}

// --- 2D -------------------------------------------------------------------

SegmentGeom make_segment(const Vec2& a, const Vec2& b) {
  SegmentGeom s;
  s.a = a;
  s.b = b;
  s.c = 0.5 * (a + b);
  s.len = (b - a).norm();
  if (!(s.len > 0.0)) throw GeometryError("degenerate segment");
  s.tau = (b - a) / s.len;
  s.out = Vec2(s.tau[1], -s.tau[0]);
  return s;
}

void legendre(int p, double t, double* out) {
  out[0] = 1.0;
  if (p >= 1) out[1] = t;
  for (int k = 1; k < p; ++k) out[k + 1] = ((2 * k + 1) * t * out[k] - k * out[k - 1]) / (k + 1);
}

void slp_segment_moments(const SegmentGeom& s, const Vec2& x, int p, double* pot, Vec2* grad) {
  using C = std::complex<double>;
  const double hl = 0.5 * s.len;
  const Vec2 r = x - s.c;
  double zr = r.dot(s.tau) / hl;
  double zi = -r.dot(s.out) / hl;  // interior (left) side has positive imaginary part
  if (std::abs(zi) < 1e-14) zi = -0.0;
  const C z(zr, zi);
  const C sq = std::sqrt(z - 1.0) * std::sqrt(z + 1.0);
  const double rho = std::abs(z + sq);
  const double rho_thr = std::max(1.3, std::pow(10.0, 3.0 / (2 * p + 3)));
  const C tau(s.tau[0], s.tau[1]);

  if (rho < rho_thr) {
    if (std::abs(z - 1.0) == 0.0 || std::abs(z + 1.0) == 0.0)
      throw GeometryError("evaluation point at a segment endpoint");
    std::vector<C> Q(p + 2);
    const C lp = std::log(z + 1.0), lm = std::log(z - 1.0);
    Q[0] = 0.5 * (lp - lm);
    Q[1] = z * Q[0] - 1.0;
    for (int k = 1; k <= p; ++k) Q[k + 1] = (double(2 * k + 1) * z * Q[k] - double(k) * Q[k - 1]) / double(k + 1);
    for (int k = 0; k <= p; ++k) {
      C J = k == 0 ? (z + 1.0) * lp - (z - 1.0) * lm - 2.0
                   : 2.0 * (Q[k + 1] - Q[k - 1]) / double(2 * k + 1);
      double mk = k == 0 ? 2.0 : 0.0;
      pot[k] = -hl * kInv2Pi * (std::log(hl) * mk + J.real());
      if (grad) {
        C gr = -kInv2Pi * std::conj(2.0 * Q[k]) * tau;
        grad[k] = Vec2(gr.real(), gr.imag());
      }
    }
    return;
  }
  const int n = std::min(64, static_cast<int>(std::ceil(19.6 / std::log(rho))) + p / 2 + 2);
  const auto& g = gauss01(n);
  double P[64];
  for (int k = 0; k <= p; ++k) {
    pot[k] = 0.0;
    if (grad) grad[k].setZero();
  }
  for (int q = 0; q < g.size(); ++q) {
    const double t = 2.0 * g.points(0, q) - 1.0;
    const double w = 2.0 * g.weights[q] * hl;
    const Vec2 y = s.c + t * hl * s.tau;
    const Vec2 d = x - y;
    const double r2 = d.squaredNorm();
    legendre(p, t, P);
    const double lg = -kInv2Pi * 0.5 * std::log(r2) * w;
    const Vec2 gk = -kInv2Pi * w / r2 * d;
    for (int k = 0; k <= p; ++k) {
      pot[k] += P[k] * lg;
      if (grad) grad[k] += P[k] * gk;
    }
  }
}

double slp_segment_analytic_2d(const Vec2& x, const SegmentGeom& s, int degree) {
  if (degree < 0 || degree > 3) throw Error("monomial degree out of range");
  double pot[4];
  slp_segment_moments(s, x, 3, pot, nullptr);
  // t^d in the Legendre basis
  switch (degree) {
    case 0: return pot[0];
    case 1: return pot[1];
    case 2: return (2.0 * pot[2] + pot[0]) / 3.0;
    default: return (2.0 * pot[3] + 3.0 * pot[1]) / 5.0;
  }
}

}  // namespace molo
