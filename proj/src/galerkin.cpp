#include "molo/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <set>

#include "molo/field_eval.hpp"

namespace molo {

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);

// Quadrature data of one facet: world points, weights (including the
// Jacobian) and monomial values.
struct FacetRule {
  Points3 x;
  Eigen::VectorXd w;
  Eigen::MatrixXd m;  // nq x nloc, already multiplied by w
};

FacetRule facet_rule(const TriangleGeom& T, int p, const TriangleRule<double>& r) {
  FacetRule f;
  const int nq = r.size(), nl = num_monomials(p);
  f.x.resize(3, nq);
  f.w.resize(nq);
  f.m.resize(nq, nl);
  double mono[kMaxMonomials];
  for (int q = 0; q < nq; ++q) {
    const double xi = r.points(0, q), eta = r.points(1, q);
    f.x.col(q) = ref_to_world(T, xi, eta);
    f.w[q] = 2.0 * T.area * r.weights[q];
    eval_monomials(p, xi, eta, mono);
    for (int a = 0; a < nl; ++a) f.m(q, a) = f.w[q] * mono[a];
  }
  return f;
}

int shared_vertices(const TriangleMesh& m, int a, int b, int& corner_a, int& edge_a) {
  int count = 0;
  bool in[3] = {false, false, false};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (m.triangles(i, a) == m.triangles(j, b)) {
        in[i] = true;
        ++count;
      }
  corner_a = edge_a = -1;
  if (count == 1)
    for (int i = 0; i < 3; ++i)
      if (in[i]) corner_a = i;
  if (count == 2)
    for (int e = 0; e < 3; ++e)
      if (in[e] && in[(e + 1) % 3]) edge_a = e;
  return count;
}

const Eigen::Vector2d kCorner[3] = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                    Eigen::Vector2d(0, 1)};

}  // namespace

QuadratureOptions precise_quadrature() {
  QuadratureOptions q;
  q.near_ratio = 3.0;
  q.far_digits = 14.0;
  q.near_order = 12;
  q.singular_levels = 14;
  q.corner_levels = 6;
  q.singular_order = 8;
  q.load_order = 10;
  q.angular = AngularRule{};
  return q;
}

int far_rule_order(double ratio, double digits) {
  const int n = static_cast<int>(std::ceil(digits / (2.0 * std::log10(2.0 * ratio))));
  return std::clamp(n, 2, 16);
}

std::shared_ptr<const DGSpace> make_space(const TriangleMesh& mesh, int p) {
  if (p < 0 || p > kMaxDegree) throw Error("polynomial degree must lie in [0,3]");
  auto s = std::make_shared<DGSpace>();
  s->mesh = mesh;
  s->p = p;
  s->geom.reserve(mesh.num_triangles());
  check_nondegenerate(mesh);
  for (int t = 0; t < mesh.num_triangles(); ++t) s->geom.push_back(make_triangle(mesh, t));
  return s;
}

double DGDensity::value(int t, double xi, double eta) const {
  double m[kMaxMonomials];
  const int nl = space->local_dim();
  eval_monomials(space->p, xi, eta, m);
  double v = 0.0;
  for (int a = 0; a < nl; ++a) v += coeffs[t * nl + a] * m[a];
  return v;
}

Eigen::VectorXd load_vector(const DGSpace& space, const SurfaceFunction& f,
                            const QuadratureOptions& q) {
  const int nl = space.local_dim();
  const auto r = gauss_rule_triangle<double>(q.load_order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.dim());
  double m[kMaxMonomials];
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const auto& T = space.geom[t];
    for (int k = 0; k < r.size(); ++k) {
      const double xi = r.points(0, k), eta = r.points(1, k);
      const double fw = 2.0 * T.area * r.weights[k] * f(t, xi, eta, ref_to_world(T, xi, eta));
      eval_monomials(space.p, xi, eta, m);
      for (int a = 0; a < nl; ++a) b[t * nl + a] += fw * m[a];
    }
  }
  return b;
}

Eigen::MatrixXd local_mass(const DGSpace& space, int t) {
  const int nl = space.local_dim();
  Eigen::MatrixXd M(nl, nl);
  auto fact = [](int n) { return std::tgamma(n + 1.0); };
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nl; ++j) {
      auto [a1, b1] = monomial(i);
      auto [a2, b2] = monomial(j);
      const int a = a1 + a2, b = b1 + b2;
      M(i, j) = 2.0 * space.geom[t].area * fact(a) * fact(b) / fact(a + b + 2);
    }
  return M;
}

DGDensity l2_project(std::shared_ptr<const DGSpace> space, const SurfaceFunction& f,
                     const QuadratureOptions& q) {
  const int nl = space->local_dim();
  Eigen::VectorXd b = load_vector(*space, f, q);
  DGDensity mu{space, Eigen::VectorXd(space->dim())};
  for (int t = 0; t < space->mesh.num_triangles(); ++t)
    mu.coeffs.segment(t * nl, nl) = local_mass(*space, t).ldlt().solve(b.segment(t * nl, nl));
  return mu;
}

double l2_norm(const DGDensity& mu, const SurfaceFunction* minus, const QuadratureOptions& q) {
  const auto& space = *mu.space;
  const auto r = gauss_rule_triangle<double>(q.load_order);
  double s = 0.0;
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const auto& T = space.geom[t];
    for (int k = 0; k < r.size(); ++k) {
      const double xi = r.points(0, k), eta = r.points(1, k);
      double v = mu.value(t, xi, eta);
      if (minus) v -= (*minus)(t, xi, eta, ref_to_world(T, xi, eta));
      s += 2.0 * T.area * r.weights[k] * v * v;
    }
  }
  return std::sqrt(s);
}

LayerMatrices assemble_layers(const DGSpace& space, const FacetField* h,
                              const QuadratureOptions& q) {
  const auto& mesh = space.mesh;
  const int nt = mesh.num_triangles(), nl = space.local_dim(), p = space.p;
  if (h && (h->rows() != 3 || h->cols() != nt)) throw GeometryError("h does not live on mesh");
  if (h)
    for (int t = 0; t < nt; ++t)
      if (!(h->col(t).norm() > 0.0)) throw GeometryError("zero direction field on facet " + std::to_string(t));

  LayerMatrices out;
  out.V.setZero(space.dim(), space.dim());
  if (h) out.K.setZero(space.dim(), space.dim());

  const auto rule_near = gauss_rule_triangle<double>(q.near_order);
  std::vector<Vec3> cen(nt);
  for (int t = 0; t < nt; ++t)
    cen[t] = (space.geom[t].v[0] + space.geom[t].v[1] + space.geom[t].v[2]) / 3.0;
  // Gauss data per facet for every order in use, built lazily.
  std::vector<std::vector<FacetRule>> far_rules(17);
  auto far_data = [&](int order) -> const std::vector<FacetRule>& {
    auto& v = far_rules[order];
    if (v.empty()) {
      const auto r = gauss_rule_triangle<double>(order);
      v.reserve(nt);
      for (int t = 0; t < nt; ++t) v.push_back(facet_rule(space.geom[t], p, r));
    }
    return v;
  };
  const auto self_rule = edge_graded_rule<double>({true, true, true}, q.singular_levels, q.sigma,
                                                  q.singular_order, q.corner_levels);
  std::array<TriangleRule<double>, 3> edge_rules, vertex_rules;
  for (int e = 0; e < 3; ++e) {
    edge_rules[e] = edge_singular_rule<double>(e, q.singular_levels, q.sigma, q.singular_order,
                                               q.corner_levels);
    vertex_rules[e] = graded_composite_rule<double>(kCorner[e], q.singular_levels, q.sigma,
                                                    q.singular_order);
  }

  // Gauss x Gauss block for both orders of a well-separated pair.
  auto far_pair = [&](const FacetRule& A, const FacetRule& B, int ta, int tb) {
    const int na = A.x.cols(), nb = B.x.cols();
    Eigen::MatrixXd G(na, nb), Ga, Gb;
    if (h) {
      Ga.resize(na, nb);
      Gb.resize(na, nb);
    }
    const Vec3 ha = h ? Vec3(h->col(ta)) : Vec3::Zero(), hb = h ? Vec3(h->col(tb)) : Vec3::Zero();
    for (int j = 0; j < nb; ++j)
      for (int i = 0; i < na; ++i) {
        const Vec3 d = A.x.col(i) - B.x.col(j);
        const double r2 = d.squaredNorm(), r = std::sqrt(r2);
        G(i, j) = kInv4Pi / r;
        if (h) {
          const double c = kInv4Pi / (r2 * r);
          Ga(i, j) = -c * ha.dot(d);  // h_a . grad_x at x in A
          Gb(i, j) = c * hb.dot(d);   // h_b . grad_x at x in B, d = x_A - x_B
        }
      }
    out.V.block(ta * nl, tb * nl, nl, nl).noalias() = A.m.transpose() * G * B.m;
    out.V.block(tb * nl, ta * nl, nl, nl) = out.V.block(ta * nl, tb * nl, nl, nl).transpose();
    if (h) {
      out.K.block(ta * nl, tb * nl, nl, nl).noalias() = A.m.transpose() * Ga * B.m;
      out.K.block(tb * nl, ta * nl, nl, nl).noalias() = B.m.transpose() * Gb.transpose() * A.m;
    }
  };

  // Outer rule on facet k, analytic inner integral over facet j.
  double pot[kMaxMonomials], mono[kMaxMonomials];
  Vec3 grad[kMaxMonomials];
  auto near_pair = [&](int k, int j, const TriangleRule<double>& r) {
    const auto& Tk = space.geom[k];
    const auto& Tj = space.geom[j];
    const Vec3 hk = h ? Vec3(h->col(k)) : Vec3::Zero();
    for (int iq = 0; iq < r.size(); ++iq) {
      const double xi = r.points(0, iq), eta = r.points(1, iq);
      const double w = 2.0 * Tk.area * r.weights[iq];
      const Vec3 x = ref_to_world(Tk, xi, eta);
      slp_triangle_moments(Tj, x, p, pot, h ? grad : nullptr, q.angular);
      eval_monomials(p, xi, eta, mono);
      for (int a = 0; a < nl; ++a) {
        const double wa = w * mono[a];
        for (int b = 0; b < nl; ++b) {
          out.V(k * nl + a, j * nl + b) += wa * pot[b];
          if (h) out.K(k * nl + a, j * nl + b) += wa * hk.dot(grad[b]);
        }
      }
    }
  };

  for (int k = 0; k < nt; ++k) {
    for (int j = k; j < nt; ++j) {
      const double diam = std::max(space.geom[k].diam, space.geom[j].diam);
      const double ratio = (cen[k] - cen[j]).norm() / diam;
      int corner = -1, edge = -1;
      const int shared = j == k ? 3 : shared_vertices(mesh, k, j, corner, edge);
      if (shared == 0 && ratio >= q.near_ratio) {
        const auto& fr = far_data(far_rule_order(ratio, q.far_digits));
        far_pair(fr[k], fr[j], k, j);
      } else if (shared == 0) {
        near_pair(k, j, rule_near);
        near_pair(j, k, rule_near);
      } else if (shared == 3) {
        near_pair(k, k, self_rule);
      } else if (shared == 2) {
        int cj, ej;
        shared_vertices(mesh, j, k, cj, ej);
        near_pair(k, j, edge_rules[edge]);
        near_pair(j, k, edge_rules[ej]);
      } else {
        int cj, ej;
        shared_vertices(mesh, j, k, cj, ej);
        near_pair(k, j, vertex_rules[corner]);
        near_pair(j, k, vertex_rules[cj]);
      }
    }
  }
  return out;
}

Eigen::MatrixXd assemble_slp(const DGSpace& space, const QuadratureOptions& q) {
  return assemble_layers(space, nullptr, q).V;
}

Eigen::MatrixXd robin_from_layers(const DGSpace& space, const LayerMatrices& layers,
                                  const FacetField& h) {
  const int nl = space.local_dim();
  Eigen::MatrixXd S = layers.V + layers.K;
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const double hn = h.col(t).dot(space.geom[t].n);
    S.block(t * nl, t * nl, nl, nl) -= 0.5 * hn * local_mass(space, t);
  }
  return S;
}

Eigen::MatrixXd assemble_robin_operator(const DGSpace& space, const FacetField& h,
                                        const QuadratureOptions& q) {
  return robin_from_layers(space, assemble_layers(space, &h, q), h);
}

Vec3 decay_field(const Vec3& x) {
  const double r = x.norm();
  if (!(r > 0.0)) throw GeometryError("decay field evaluated at the origin");
  return x / (r * r * r);
}

Eigen::Matrix<double, 3, Eigen::Dynamic> assemble_constraints(const DGSpace& space,
                                                              const QuadratureOptions& q) {
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const auto& T = space.geom[t];
    const Vec3 r = -T.v[0];
    if (std::abs(r.dot(T.n)) > 1e-12 * T.diam) continue;
    const Eigen::Vector2d xi = T.to_ref * Eigen::Vector2d(r.dot(T.t1), r.dot(T.t2));
    if (std::min({xi[0], xi[1], 1.0 - xi[0] - xi[1]}) >= -1e-12)
      throw GeometryError("surface passes through the origin at facet " + std::to_string(t));
  }
  Eigen::Matrix<double, 3, Eigen::Dynamic> L(3, space.dim());
  for (int k = 0; k < 3; ++k) {
    SurfaceFunction f = [k](int, double, double, const Vec3& x) { return decay_field(x)[k]; };
    L.row(k) = load_vector(space, f, q).transpose();
  }
  return L;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> slp_decay_columns(const DGSpace& space,
                                                           const Eigen::MatrixXd& V,
                                                           const QuadratureOptions& q) {
  auto sp = std::shared_ptr<const DGSpace>(&space, [](const DGSpace*) {});
  Eigen::Matrix<double, Eigen::Dynamic, 3> C(space.dim(), 3);
  for (int k = 0; k < 3; ++k) {
    SurfaceFunction f = [k](int, double, double, const Vec3& x) { return decay_field(x)[k]; };
    C.col(k) = V * l2_project(sp, f, q).coeffs;
  }
  return C;
}

namespace {

SaddleSolution solve_blocks(const Eigen::MatrixXd& S, const Eigen::Matrix<double, Eigen::Dynamic, 3>& St,
                            const Eigen::Matrix<double, 3, Eigen::Dynamic>& L,
                            const Eigen::VectorXd& rhs, const std::string& name) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n || St.rows() != n || L.cols() != n || rhs.size() != n + 3)
    throw SolverError(name + ": inconsistent block dimensions");
  Eigen::MatrixXd A(n + 3, n + 3);
  A.topLeftCorner(n, n) = S;
  A.topRightCorner(n, 3) = St;
  A.bottomLeftCorner(3, n) = L;
  A.bottomRightCorner(3, 3).setZero();
  // Row scaling of the constraint block keeps the estimate meaningful.
  const double smax = S.cwiseAbs().maxCoeff();
  const double s = smax / std::max(1e-300, L.cwiseAbs().maxCoeff());
  const double c = smax / std::max(1e-300, St.cwiseAbs().maxCoeff());
  A.bottomRows(3) *= s;
  A.rightCols(3) *= c;
  Eigen::VectorXd b = rhs;
  b.tail(3) *= s;
  Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu(A);
  SaddleSolution out;
  out.rcond = lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0 ? lu.rcond() : 0.0;
  if (!(out.rcond * kMaxCondition >= 1.0))
    throw SolverError(name + ": condition estimate " + std::to_string(1.0 / out.rcond) +
                      " exceeds limit");
  Eigen::VectorXd x = lu.solve(b);
  out.mu = x.head(n);
  out.a = c * x.tail(3);
  return out;
}

}  // namespace

SaddleSolution solve_saddle(const SaddleSystem& sys) {
  return solve_blocks(sys.S, sys.St, sys.L, sys.rhs, sys.name);
}

SurfaceOperators assemble_surface(std::shared_ptr<const DGSpace> space, const FacetField& h,
                                  const QuadratureOptions& q) {
  SurfaceOperators ops;
  ops.space = space;
  ops.h = h;
  ops.layers = assemble_layers(*space, &h, q);
  ops.robin = robin_from_layers(*space, ops.layers, h);
  ops.layers.K = Eigen::MatrixXd();
  ops.Lambda = assemble_constraints(*space, q);
  ops.VA = slp_decay_columns(*space, ops.layers.V, q);
  return ops;
}

namespace {

SolveResult finish(const SurfaceOperators& ops, const SaddleSolution& s) {
  return {DGDensity{ops.space, s.mu}, s.a, s.rcond};
}

}  // namespace

SolveResult solve_robin(const SurfaceOperators& ops, const SurfaceFunction& f,
                        const QuadratureOptions& q) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ops.space->dim() + 3);
  rhs.head(ops.space->dim()) = load_vector(*ops.space, f, q);
  return finish(ops, solve_blocks(ops.robin, ops.Lambda.transpose(), ops.Lambda, rhs,
                                  "robin saddle system"));
}

SolveResult solve_dirichlet(const SurfaceOperators& ops, const SurfaceFunction& w,
                            const QuadratureOptions& q) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ops.space->dim() + 3);
  rhs.head(ops.space->dim()) = load_vector(*ops.space, w, q);
  return finish(ops, solve_blocks(ops.layers.V, ops.VA, ops.Lambda, rhs, "dirichlet saddle system"));
}

SolveResult solve_robin(std::shared_ptr<const DGSpace> space, const FacetField& h,
                        const SurfaceFunction& f, const QuadratureOptions& q) {
  SurfaceOperators ops;
  ops.space = space;
  ops.h = h;
  ops.layers = assemble_layers(*space, &h, q);
  ops.robin = robin_from_layers(*space, ops.layers, h);
  ops.layers.K = Eigen::MatrixXd();
  ops.Lambda = assemble_constraints(*space, q);
  return solve_robin(ops, f, q);
}

SolveResult solve_dirichlet(std::shared_ptr<const DGSpace> space, const SurfaceFunction& w,
                            const QuadratureOptions& q) {
  SurfaceOperators ops;
  ops.space = space;
  ops.layers = assemble_layers(*space, nullptr, q);
  ops.Lambda = assemble_constraints(*space, q);
  ops.VA = slp_decay_columns(*space, ops.layers.V, q);
  return solve_dirichlet(ops, w, q);
}

SurfaceFunction build_rhs_robin(const TriangleMesh& mesh, const SurfaceField& Wdot,
                                const SurfaceField& Gdot, const FacetField& h) {
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  if (Wdot.rows() != 1 || Wdot.cols() != nv || Gdot.rows() != 3 || Gdot.cols() != nv ||
      h.rows() != 3 || h.cols() != nt)
    throw GeometryError("right-hand side fields do not live on mesh");
  return [tri = mesh.triangles, Wdot, Gdot, h](int t, double xi, double eta, const Vec3&) {
    const int a = tri(0, t), b = tri(1, t), c = tri(2, t);
    const double l0 = 1.0 - xi - eta;
    const double w = l0 * Wdot(0, a) + xi * Wdot(0, b) + eta * Wdot(0, c);
    const Vec3 g = l0 * Gdot.col(a) + xi * Gdot.col(b) + eta * Gdot.col(c);
    return w + g.dot(h.col(t));
  };
}

SurfaceFunction accumulate_w(const std::vector<HistoryEntry>& history,
                             const std::function<double(const Vec3&)>& v0,
                             const TriangleMesh& phi0, const TriangleMesh& current) {
  if (phi0.num_triangles() != current.num_triangles())
    throw StateError("history surfaces do not share the reference triangulation");
  struct Term {
    LayerEvaluator ev;
    HistoryEntry entry;
  };
  auto terms = std::make_shared<std::vector<Term>>();
  for (const auto& e : history) {
    if (!e.mu.space) throw StateError("missing history entry");
    if (e.mu.space->mesh.num_triangles() != current.num_triangles())
      throw StateError("history surfaces do not share the reference triangulation");
    terms->push_back({LayerEvaluator(e.mu), e});
  }
  auto g0 = std::make_shared<std::vector<TriangleGeom>>();
  for (int t = 0; t < phi0.num_triangles(); ++t) g0->push_back(make_triangle(phi0, t));
  return [terms, g0, v0](int t, double xi, double eta, const Vec3&) {
    double w = v0(ref_to_world((*g0)[t], xi, eta));
    const std::array<double, 3> key{static_cast<double>(t), xi, eta};
    for (const auto& term : *terms) {
      auto& cache = *term.entry.trace;
      auto it = cache.find(key);
      if (it == cache.end()) {
        const auto& Ti = term.ev.density().space->geom[t];
        it = cache.emplace(key, term.ev.potential(ref_to_world(Ti, xi, eta))).first;
      }
      w += term.entry.delta * it->second;
    }
    return w;
  };
}

void dump_matrix(const Eigen::MatrixXd& A, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << "molo-matrix v1 " << A.rows() << " " << A.cols() << "\n";
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A;
  os.write(reinterpret_cast<const char*>(R.data()), sizeof(double) * R.size());
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  std::string magic, ver;
  long rows = -1, cols = -1;
  is >> magic >> ver >> rows >> cols;
  if (magic != "molo-matrix" || ver != "v1" || rows < 0 || cols < 0)
    throw ParseError(path + ":1: bad matrix header");
  is.get();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(rows, cols);
  is.read(reinterpret_cast<char*>(R.data()), sizeof(double) * R.size());
  if (is.gcount() != static_cast<std::streamsize>(sizeof(double) * R.size()))
    throw ParseError(path + ": truncated payload");
  return R;
}

}  // namespace molo
