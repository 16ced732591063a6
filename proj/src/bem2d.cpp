#include "molo/bem2d.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "molo/errors.hpp"
#include "molo/quadrature.hpp"

namespace molo::bem2d {

namespace {

constexpr double kInvTwoPi = 0.5 / std::numbers::pi;
constexpr int kFarOrder = 16;
constexpr int kGradedOrder = 12;
constexpr double kSigma = 0.15;
constexpr int kAnalyticDegree = 3;

// Monomial coefficients of P_k(2s - 1): row k.
Eigen::MatrixXd legendre_coefficients(int p) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p + 1, p + 1);
  C(0, 0) = 1.0;
  if (p >= 1) {
    C(1, 0) = -1.0;
    C(1, 1) = 2.0;
  }
  for (int k = 2; k <= p; ++k) {
    // k P_k = (2k - 1)(2s - 1) P_{k-1} - (k - 1) P_{k-2}
    for (int j = 0; j <= k - 1; ++j) {
      C(k, j) -= (2 * k - 1) * C(k - 1, j);
      C(k, j + 1) += 2 * (2 * k - 1) * C(k - 1, j);
    }
    C.row(k) -= (k - 1) * C.row(k - 2);
    C.row(k) /= k;
  }
  return C;
}

double legendre(int k, double s) {
  const double x = 2 * s - 1;
  double p0 = 1.0, p1 = x;
  if (k == 0) return p0;
  for (int j = 2; j <= k; ++j) {
    const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Moments over s in [0, 1] for the point with element coordinates (a, b):
// P_k = int s^k log((s-a)^2 + b^2), Q_k = int s^k (s-a) / ((s-a)^2 + b^2),
// R_k = int s^k b / ((s-a)^2 + b^2); b = 0 gives principal values.
struct Moments {
  double P[4], Q[4], R[4];
};

Moments moments(double a, double b, int p, bool need_log, bool need_grad) {
  const double t0 = -a, t1 = 1 - a, b2 = b * b;
  const int jmax = p + 3;
  double J[8];        // J_j = int t^j / (t^2 + b^2), j >= 1
  double bJ[8];       // b J_j
  double tp0[9], tp1[9];
  tp0[0] = tp1[0] = 1.0;
  for (int j = 1; j <= jmax + 1; ++j) {
    tp0[j] = tp0[j - 1] * t0;
    tp1[j] = tp1[j - 1] * t1;
  }
  bJ[0] = b == 0.0 ? 0.0 : std::atan(t1 / b) - std::atan(t0 / b);
  J[0] = 0.0;
  const double r0 = t0 * t0 + b2, r1 = t1 * t1 + b2;
  J[1] = 0.5 * std::log(r1 / r0);
  bJ[1] = b * J[1];
  for (int j = 2; j <= jmax; ++j) {
    const double poly = (tp1[j - 1] - tp0[j - 1]) / (j - 1);
    J[j] = b2 == 0.0 ? poly : poly - (j == 2 ? b * bJ[0] : b2 * J[j - 2]);
    bJ[j] = b * J[j];
  }
  double lt[5] = {};
  if (need_log) {
    const double l0 = r0 > 0 ? std::log(r0) : 0.0, l1 = r1 > 0 ? std::log(r1) : 0.0;
    for (int j = 0; j <= p; ++j)
      lt[j] = (tp1[j + 1] * l1 - tp0[j + 1] * l0) / (j + 1) - 2.0 / (j + 1) * J[j + 2];
  }
  Moments m{};
  for (int k = 0; k <= p; ++k) {
    double binom = 1.0, apow;
    for (int j = 0; j <= k; ++j) {
      if (j > 0) binom = binom * (k - j + 1) / j;
      apow = std::pow(a, k - j);
      const double c = binom * apow;
      if (need_log) m.P[k] += c * lt[j];
      if (need_grad) {
        m.Q[k] += c * J[j + 1];
        m.R[k] += c * bJ[j];
      }
    }
  }
  return m;
}

struct Local {
  double a, b, L;
  Vec2 e, nu;
};

// Element coordinates of the point base + off; base - start(el) is a
// difference of nearby nodes and exact near corners.
Local local_coords(const Boundary& bd, int el, const Vec2& base, const Vec2& off) {
  Local l;
  const Vec2 d = bd.end(el) - bd.start(el);
  l.L = d.norm();
  l.e = d / l.L;
  l.nu = bd.normal(el);
  const Vec2 r = (base - bd.start(el)) + off;
  l.a = r.dot(l.e) / l.L;
  l.b = r.dot(l.nu) / l.L;
  return l;
}

double distance_in(const Local& l) {
  const double a = std::clamp(l.a, 0.0, 1.0);
  return l.L * std::hypot(l.a - a, l.b);
}

double segment_distance(const Vec2& x, const Vec2& A, const Vec2& B) {
  const Vec2 d = B - A;
  const double s = std::clamp((x - A).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (x - A - s * d).norm();
}

const SegmentRule<double>& far_rule(int p = 0) {
  static std::map<int, SegmentRule<double>> cache;
  const int n = kFarOrder + std::max(0, p - kAnalyticDegree);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

// Rule on [0, 1] graded toward 0; cached by (levels, order).
const SegmentRule<double>& graded_rule(int levels, int order) {
  static std::map<std::pair<int, int>, SegmentRule<double>> cache;
  auto it = cache.find({levels, order});
  if (it == cache.end())
    it = cache.emplace(std::make_pair(levels, order),
                       graded_segment_rule<double>(true, false, levels, kSigma, order)).first;
  return it->second;
}

// int_el log|x - y| P_k(2s - 1) ds_y, k = 0..p, for x = base + off.
void log_moments(const Boundary& bd, int el, const Vec2& base, const Vec2& off, int p, double* out) {
  const Local l = local_coords(bd, el, base, off);
  std::fill(out, out + p + 1, 0.0);
  // dx = a - s, passed exactly near the foot point
  auto add = [&](double s, double dx, double w) {
    const double lg = w * l.L * std::log(l.L * std::hypot(dx, l.b));
    const double x = 2 * s - 1;
    double p0 = 1.0, p1 = x;
    out[0] += lg;
    if (p >= 1) out[1] += lg * x;
    for (int k = 2; k <= p; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
      out[k] += lg * p2;
    }
  };
  if (distance_in(l) >= l.L) {
    const auto& g = far_rule(p);
    for (int q = 0; q < g.size(); ++q) add(g.points(0, q), l.a - g.points(0, q), g.weights[q]);
    return;
  }
  if (p <= kAnalyticDegree) {
    const Moments m = moments(l.a, l.b, p, true, false);
    const double logL = std::log(l.L);
    double F[kAnalyticDegree + 1];
    for (int k = 0; k <= p; ++k) F[k] = l.L * (logL / (k + 1) + 0.5 * m.P[k]);
    const Eigen::MatrixXd C = legendre_coefficients(p);
    for (int k = 0; k <= p; ++k)
      for (int j = 0; j <= k; ++j) out[k] += C(k, j) * F[j];
    return;
  }
  // graded toward the foot point of x on the element's line
  const double c = std::clamp(l.a, 0.0, 1.0);
  const double gap = std::hypot(l.a - c, l.b);
  const int order = p + 8;
  for (int side = 0; side < 2; ++side) {
    const double len = side == 0 ? c : 1.0 - c;
    if (len <= 0.0) continue;
    const int levels =
        gap > 0.0 ? std::clamp(static_cast<int>(std::ceil(std::log(gap / len) / std::log(kSigma))) + 3, 2, 24)
                  : 24;
    const auto& r = graded_rule(levels, order);
    for (int q = 0; q < r.size(); ++q) {
      const double t = r.points(0, q) * len;
      add(side == 0 ? c - t : c + t, (l.a - c) + (side == 0 ? t : -t), r.weights[q] * len);
    }
  }
}

// int_el grad_x log|x - y| s^k ds_y (principal value on the element's line).
void grad_moments(const Boundary& bd, int el, const Vec2& base, const Vec2& off, int p, Vec2* out) {
  const Local l = local_coords(bd, el, base, off);
  if (distance_in(l) < l.L) {
    const Moments m = moments(l.a, l.b, p, false, true);
    for (int k = 0; k <= p; ++k) out[k] = -m.Q[k] * l.e + m.R[k] * l.nu;
    return;
  }
  std::fill(out, out + p + 1, Vec2::Zero());
  const auto& g = far_rule();
  for (int q = 0; q < g.size(); ++q) {
    const double s = g.points(0, q);
    const Vec2 r = l.L * ((l.a - s) * l.e + l.b * l.nu);
    const Vec2 w = g.weights[q] * l.L * r / r.squaredNorm();
    double sk = 1.0;
    for (int k = 0; k <= p; ++k, sk *= s) out[k] += w * sk;
  }
}

// Outer rule on element i for the source element j, graded toward the
// closest point when the two are close.
SegmentRule<double> outer_rule(const Boundary& bd, int i, int j, int p) {
  const int n = bd.num_elements();
  const Vec2 A = bd.start(i), B = bd.end(i), C = bd.start(j), D = bd.end(j);
  const double Li = (B - A).norm(), Lj = (D - C).norm();
  if (i == j) return graded_segment_rule<double>(true, true, 30, kSigma, kGradedOrder);
  if ((i + 1) % n == j) return graded_segment_rule<double>(false, true, 30, kSigma, kGradedOrder);
  if ((j + 1) % n == i) return graded_segment_rule<double>(true, false, 30, kSigma, kGradedOrder);
  const double dA = segment_distance(A, C, D), dB = segment_distance(B, C, D);
  const double dC = segment_distance(C, A, B), dD = segment_distance(D, A, B);
  const double d = std::min({dA, dB, dC, dD});
  if (d >= std::max(Li, Lj)) return far_rule(p);
  double s;
  if (d == dA) s = 0.0;
  else if (d == dB) s = 1.0;
  else {
    const Vec2 P = d == dC ? C : D;
    s = std::clamp((P - A).dot(B - A) / (Li * Li), 0.0, 1.0);
  }
  const int levels = std::clamp(static_cast<int>(std::ceil(std::log(std::max(d, 1e-300) / Li) /
                                                           std::log(kSigma))) + 4,
                                4, 30);
  if (s <= 0.0 || s >= 1.0) return graded_segment_rule<double>(s <= 0.0, s >= 1.0, levels, kSigma, kGradedOrder);
  auto left = graded_segment_rule<double>(false, true, levels, kSigma, kGradedOrder);
  auto right = graded_segment_rule<double>(true, false, levels, kSigma, kGradedOrder);
  SegmentRule<double> r;
  r.points.resize(1, left.size() + right.size());
  r.weights.resize(left.size() + right.size());
  for (int q = 0; q < left.size(); ++q) {
    r.points(0, q) = s * left.points(0, q);
    r.weights[q] = s * left.weights[q];
  }
  for (int q = 0; q < right.size(); ++q) {
    r.points(0, left.size() + q) = s + (1 - s) * right.points(0, q);
    r.weights[left.size() + q] = (1 - s) * right.weights[q];
  }
  return r;
}

}  // namespace

Vec2 Boundary::normal(int e) const {
  const Vec2 d = (end(e) - start(e)).normalized();
  return Vec2(d.y(), -d.x());
}

Boundary square(int n, double beta) {
  if (n < 1 || !(beta >= 1.0)) throw Error("square needs n >= 1 and beta >= 1");
  if (beta > 1.0 && n % 2) throw Error("graded square needs an even number of elements per side");
  std::vector<double> t(n + 1);
  for (int j = 0; j <= n; ++j) {
    if (beta == 1.0) {
      t[j] = static_cast<double>(j) / n;
    } else {
      const int m = n / 2;
      t[j] = j <= m ? 0.5 * std::pow(static_cast<double>(j) / m, beta)
                    : 1.0 - 0.5 * std::pow(static_cast<double>(n - j) / m, beta);
    }
  }
  const Vec2 corners[4] = {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}};
  Boundary b;
  for (int c = 0; c < 4; ++c)
    for (int j = 0; j < n; ++j) b.nodes.push_back(corners[c] + t[j] * (corners[(c + 1) % 4] - corners[c]));
  return b;
}

Boundary regular_polygon(int n, double r) {
  if (n < 3 || !(r > 0)) throw Error("polygon needs n >= 3 and r > 0");
  Boundary b;
  for (int j = 0; j < n; ++j) {
    const double phi = 2 * std::numbers::pi * j / n;
    b.nodes.emplace_back(r * std::cos(phi), r * std::sin(phi));
  }
  return b;
}

double corner_grading(int p) { return 1.5 * (p + 1.5); }

double Density::value(int e, double s) const {
  double v = 0.0;
  for (int k = 0; k <= p; ++k) v += coeffs[e * (p + 1) + k] * legendre(k, s);
  return v;
}

Eigen::MatrixXd assemble_slp(const Boundary& bd, int p) {
  if (p < 0 || p > kMaxDegree) throw Error("2D density degree out of range");
  const int n = bd.num_elements(), nl = p + 1;
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n * nl, n * nl);
  double F[kMaxDegree + 1];
  for (int i = 0; i < n; ++i) {
    const Vec2 A = bd.start(i), B = bd.end(i);
    const double Li = bd.length(i);
    for (int j = 0; j < n; ++j) {
      const auto rule = outer_rule(bd, i, j, p);
      auto blk = V.block(i * nl, j * nl, nl, nl);
      for (int q = 0; q < rule.size(); ++q) {
        const double s = rule.points(0, q);
        log_moments(bd, j, A, s * (B - A), p, F);
        for (int a = 0; a <= p; ++a) {
          const double w = -kInvTwoPi * rule.weights[q] * Li * legendre(a, s);
          for (int c = 0; c <= p; ++c) blk(a, c) += w * F[c];
        }
      }
    }
  }
  return 0.5 * (V + V.transpose());
}

Eigen::VectorXd load_vector(const Boundary& bd, int p, const std::function<double(const Vec2&)>& f) {
  const int nl = p + 1;
  const auto& g = far_rule(2 * p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(bd.num_elements() * nl);
  for (int e = 0; e < bd.num_elements(); ++e)
    for (int q = 0; q < g.size(); ++q) {
      const double s = g.points(0, q);
      const double w = g.weights[q] * bd.length(e) * f(bd.start(e) + s * (bd.end(e) - bd.start(e)));
      for (int k = 0; k <= p; ++k) out[e * nl + k] += w * legendre(k, s);
    }
  return out;
}

Solution solve_dirichlet_2d(const Boundary& bd, int p, const std::function<double(const Vec2&)>& f) {
  const Eigen::MatrixXd V = assemble_slp(bd, p);
  const Eigen::VectorXd rhs = load_vector(bd, p, f);
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success)
    throw SolverError("2D single layer matrix is not positive definite (capacity near or above 1)");
  Solution s;
  s.mu = {&bd, p, llt.solve(rhs)};
  s.energy = s.mu.coeffs.dot(rhs);
  s.V = V;
  return s;
}

Density prolong(const Density& coarse, const Boundary& fine, int factor, int p) {
  const Boundary& bc = *coarse.boundary;
  if (factor < 1 || fine.num_elements() != factor * bc.num_elements())
    throw Error("fine boundary does not refine the coarse one");
  if (p < coarse.p) throw Error("prolongation cannot lower the degree");
  const int nl = p + 1;
  const auto g = gauss_legendre(nl);
  Density out{&fine, p, Eigen::VectorXd::Zero(fine.num_elements() * nl)};
  for (int e = 0; e < bc.num_elements(); ++e)
    for (int c = 0; c < factor; ++c)
      for (int q = 0; q < nl; ++q) {
        const double s = g.points(0, q);
        const double v = coarse.value(e, (c + s) / factor);
        for (int k = 0; k <= p; ++k)
          out.coeffs[(factor * e + c) * nl + k] += (2 * k + 1) * g.weights[q] * v * legendre(k, s);
      }
  return out;
}

double energy_gap(const Solution& coarse, const Solution& fine) {
  if (fine.V.rows() != fine.mu.coeffs.size()) throw Error("fine solution carries no matrix");
  const int nc = coarse.mu.boundary->num_elements(), nf = fine.mu.boundary->num_elements();
  if (nf % nc) throw Error("fine boundary does not refine the coarse one");
  const Eigen::VectorXd d =
      fine.mu.coeffs - prolong(coarse.mu, *fine.mu.boundary, nf / nc, fine.mu.p).coeffs;
  return d.dot(fine.V * d);
}

std::vector<double> energy_errors_from_gaps(const std::vector<double>& gaps) {
  const size_t n = gaps.size();
  if (n < 2) throw Error("energy extrapolation needs three levels");
  for (double g : gaps)
    if (!(g > 0)) throw Error("energies do not increase under refinement");
  const double r = gaps[n - 1] / gaps[n - 2];
  if (!(r < 1)) throw Error("energy gaps do not contract");
  std::vector<double> err(n + 1);
  double tail = gaps[n - 1] * r / (1 - r);
  err[n] = std::sqrt(tail);
  for (size_t i = n; i-- > 0;) {
    tail += gaps[i];
    err[i] = std::sqrt(tail);
  }
  return err;
}

std::vector<double> energy_errors(const std::vector<double>& E) {
  const size_t n = E.size();
  if (n < 3) throw Error("energy extrapolation needs three levels");
  for (size_t i = 1; i < n; ++i)
    if (!(E[i] > E[i - 1])) throw Error("energies do not increase under refinement");
  const double d1 = E[n - 2] - E[n - 3], d2 = E[n - 1] - E[n - 2];
  const double limit = E[n - 1] + d2 * d2 / (d1 - d2);
  std::vector<double> err(n);
  for (size_t i = 0; i < n; ++i) err[i] = std::sqrt(std::max(0.0, limit - E[i]));
  return err;
}

std::vector<double> rates(const std::vector<double>& e, const std::vector<double>& n) {
  if (e.size() != n.size() || e.size() < 2) throw Error("rates need two or more matching levels");
  std::vector<double> r;
  for (size_t i = 0; i + 1 < e.size(); ++i) {
    if (!(e[i] > 0) || !(e[i + 1] > 0)) throw Error("rates need positive errors");
    r.push_back(std::log(e[i] / e[i + 1]) / std::log(n[i + 1] / n[i]));
  }
  return r;
}

double potential(const Density& mu, const Vec2& x) {
  const Boundary& bd = *mu.boundary;
  const int nl = mu.p + 1;
  double F[kMaxDegree + 1], u = 0.0;
  for (int e = 0; e < bd.num_elements(); ++e) {
    log_moments(bd, e, x, Vec2::Zero(), mu.p, F);
    for (int k = 0; k <= mu.p; ++k) u += mu.coeffs[e * nl + k] * F[k];
  }
  return -kInvTwoPi * u;
}

namespace {

Vec2 gradient_at(const Density& mu, const Vec2& base, const Vec2& off) {
  const Boundary& bd = *mu.boundary;
  const int nl = mu.p + 1;
  if (mu.p > kAnalyticDegree) throw Error("2D gradients support degrees 0..3");
  const Eigen::MatrixXd C = legendre_coefficients(mu.p);
  Vec2 G[kAnalyticDegree + 1], g = Vec2::Zero();
  for (int e = 0; e < bd.num_elements(); ++e) {
    grad_moments(bd, e, base, off, mu.p, G);
    const Eigen::VectorXd c = C.transpose() * mu.coeffs.segment(e * nl, nl);
    for (int k = 0; k <= mu.p; ++k) g += c[k] * G[k];
  }
  return -kInvTwoPi * g;
}

}  // namespace

Vec2 gradient(const Density& mu, const Vec2& x) { return gradient_at(mu, x, Vec2::Zero()); }

Vec2 surface_gradient(const Density& mu, int e, double s) {
  if (!(s > 0.0 && s < 1.0)) throw GeometryError("surface gradient needs a point inside the element");
  const Boundary& bd = *mu.boundary;
  return gradient_at(mu, bd.start(e), s * (bd.end(e) - bd.start(e))) - 0.5 * mu.value(e, s) * bd.normal(e);
}

Mat2 hessian_fd(const Density& mu, int e, double s, double dn, double dt) {
  const Boundary& bd = *mu.boundary;
  const double L = bd.length(e);
  const double ds = dt / L;
  if (!(s - ds > 0.0 && s + ds < 1.0))
    throw FdGeometryError("tangential stencil leaves the element");
  const Vec2 A = bd.start(e), off = s * (bd.end(e) - A);
  const Vec2 n = bd.normal(e), t = (bd.end(e) - A) / L;
  Mat2 D;
  D.col(0) = (surface_gradient(mu, e, s + ds) - surface_gradient(mu, e, s - ds)) / (2 * dt);
  D.col(1) = (4 * gradient_at(mu, A, off + dn * n) - 3 * surface_gradient(mu, e, s) -
              gradient_at(mu, A, off + 2 * dn * n)) /
             (2 * dn);
  Mat2 F;
  F << t, n;
  return D * F.transpose();
}

std::pair<int, double> locate(const Boundary& bd, const Vec2& x, double tol) {
  for (int e = 0; e < bd.num_elements(); ++e) {
    const Vec2 A = bd.start(e), d = bd.end(e) - A;
    const double s = (x - A).dot(d) / d.squaredNorm();
    if (s < -tol || s > 1 + tol) continue;
    if ((x - A - s * d).norm() > tol * d.norm()) continue;
    if (s <= tol || s >= 1 - tol) throw GeometryError("point coincides with a boundary node");
    return {e, s};
  }
  throw GeometryError("point is not on the boundary");
}

}  // namespace molo::bem2d
