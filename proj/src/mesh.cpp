#include "molo/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace molo {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

TriangleMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  const double raw[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  const int faces[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10},
                            {0, 10, 11}, {1, 5, 9}, {5, 11, 4},  {11, 10, 2},
                            {10, 7, 6}, {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                            {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},
                            {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  TriangleMesh m;
  m.vertices.resize(3, 12);
  for (int i = 0; i < 12; ++i)
    m.vertices.col(i) = Vec3(raw[i][0], raw[i][1], raw[i][2]).normalized();
  m.triangles.resize(3, 20);
  for (int f = 0; f < 20; ++f)
    for (int c = 0; c < 3; ++c) m.triangles(c, f) = faces[f][c];
  m.reference = m.vertices;
  m.level = 0;
  return m;
}

}  // namespace

TriangleMesh refine(const TriangleMesh& mesh, bool project) {
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  std::vector<Vec3> pos, ref;
  pos.reserve(nv + 3 * nt / 2);
  ref.reserve(nv + 3 * nt / 2);
  for (int i = 0; i < nv; ++i) {
    pos.push_back(mesh.vertices.col(i));
    ref.push_back(mesh.reference.col(i));
  }
  std::unordered_map<std::uint64_t, int> mids;
  auto mid = [&](int a, int b) {
    auto key = edge_key(a, b);
    auto it = mids.find(key);
    if (it != mids.end()) return it->second;
    Vec3 p = 0.5 * (pos[a] + pos[b]);
    Vec3 r = (ref[a] + ref[b]).normalized();
    if (project) p.normalize();
    pos.push_back(p);
    ref.push_back(r);
    int id = static_cast<int>(pos.size()) - 1;
    mids.emplace(key, id);
    return id;
  };
  TriangleMesh out;
  out.triangles.resize(3, 4 * nt);
  for (int t = 0; t < nt; ++t) {
    int a = mesh.triangles(0, t), b = mesh.triangles(1, t), c = mesh.triangles(2, t);
    int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    out.triangles.col(4 * t + 0) << a, ab, ca;
    out.triangles.col(4 * t + 1) << b, bc, ab;
    out.triangles.col(4 * t + 2) << c, ca, bc;
    out.triangles.col(4 * t + 3) << ab, bc, ca;
  }
  out.vertices.resize(3, pos.size());
  out.reference.resize(3, ref.size());
  for (size_t i = 0; i < pos.size(); ++i) {
    out.vertices.col(i) = pos[i];
    out.reference.col(i) = ref[i];
  }
  out.level = mesh.level + 1;
  return out;
}

TriangleMesh build_icosphere(int level, int max_level) {
  if (level < 0) throw CapacityError("icosphere level must be nonnegative");
  if (level > max_level)
    throw CapacityError("icosphere level " + std::to_string(level) +
                        " exceeds maximum " + std::to_string(max_level));
  TriangleMesh m = icosahedron();
  for (int l = 0; l < level; ++l) m = refine(m, true);
  return m;
}

TriangleMesh build_cube(int level) {
  if (level < 0 || level > 6) throw CapacityError("cube level out of range");
  TriangleMesh m;
  m.vertices.resize(3, 8);
  for (int i = 0; i < 8; ++i)
    m.vertices.col(i) = Vec3((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
  // Quads listed counter-clockwise seen from outside, split along the
  // diagonal through their second and fourth corner.
  const int quads[6][4] = {{1, 3, 7, 5}, {0, 4, 6, 2}, {2, 6, 7, 3},
                           {0, 1, 5, 4}, {4, 5, 7, 6}, {0, 2, 3, 1}};
  m.triangles.resize(3, 12);
  for (int f = 0; f < 6; ++f) {
    const int* q = quads[f];
    m.triangles.col(2 * f) << q[0], q[1], q[3];
    m.triangles.col(2 * f + 1) << q[1], q[2], q[3];
  }
  m.reference = m.vertices.colwise().normalized();
  m.level = 0;
  for (int l = 0; l < level; ++l) m = refine(m, false);
  m.level = level;
  return m;
}

FacetGeometry facet_geometry(const TriangleMesh& mesh, int t) {
  if (t < 0 || t >= mesh.num_triangles())
    throw GeometryError("facet index out of range");
  const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
  Vec3 cr = (b - a).cross(c - a);
  double twice = cr.norm();
  if (!(twice > 0.0)) throw GeometryError("degenerate facet " + std::to_string(t));
  return {0.5 * twice, cr / twice, (a + b + c) / 3.0};
}

SurfacePoint locate(const TriangleMesh& mesh, const Vec3& x, double tol) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = mesh.corner(t, 0), e1 = mesh.corner(t, 1) - a, e2 = mesh.corner(t, 2) - a;
    const Vec3 n = e1.cross(e2);
    const double scale = std::sqrt(n.norm());
    if (std::abs((x - a).dot(n.normalized())) > tol * scale) continue;
    Eigen::Matrix<double, 3, 2> E;
    E << e1, e2;
    const Eigen::Vector2d c = E.colPivHouseholderQr().solve(x - a);
    const double l0 = 1.0 - c.x() - c.y();
    if (c.minCoeff() < -tol || l0 < -tol) continue;
    if (c.minCoeff() <= tol || l0 <= tol) throw GeometryError("point lies on a facet edge");
    return {t, c.x(), c.y()};
  }
  throw GeometryError("point is not on the surface");
}

double total_area(const TriangleMesh& mesh) {
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
    s += 0.5 * (b - a).cross(c - a).norm();
  }
  return s;
}

double mean_facet_area(const TriangleMesh& mesh) {
  return total_area(mesh) / mesh.num_triangles();
}

void check_nondegenerate(const TriangleMesh& mesh) {
  const double thr = 1e-12 * mean_facet_area(mesh);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
    if (!(0.5 * (b - a).cross(c - a).norm() >= thr))
      throw GeometryError("degenerate facet " + std::to_string(t));
  }
}

TriangleMesh update_surface(const TriangleMesh& mesh,
                            const SurfaceField& increment, double step) {
  if (increment.rows() != 3 || increment.cols() != mesh.num_vertices())
    throw GeometryError("increment does not live on mesh");
  TriangleMesh out = mesh;
  out.vertices = mesh.vertices + step * increment;
  const double thr = 1e-12 * mean_facet_area(out);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = out.corner(t, 0), b = out.corner(t, 1), c = out.corner(t, 2);
    Vec3 cr = (b - a).cross(c - a);
    if (!(0.5 * cr.norm() >= thr))
      throw NumericalAbort("surface update degenerates facet " + std::to_string(t));
    const Vec3 a0 = mesh.corner(t, 0), b0 = mesh.corner(t, 1), c0 = mesh.corner(t, 2);
    if (cr.dot((b0 - a0).cross(c0 - a0)) <= 0.0)
      throw NumericalAbort("surface update inverts facet " + std::to_string(t));
  }
  return out;
}

bool is_edge_manifold(const TriangleMesh& mesh) {
  // Every undirected edge appears exactly twice, once in each direction.
  std::unordered_map<std::uint64_t, int> count;
  std::unordered_map<std::uint64_t, int> dir;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int c = 0; c < 3; ++c) {
      int a = mesh.triangles(c, t), b = mesh.triangles((c + 1) % 3, t);
      if (a == b) return false;
      auto k = edge_key(a, b);
      ++count[k];
      dir[k] += a < b ? 1 : -1;
    }
  for (auto& [k, n] : count)
    if (n != 2 || dir[k] != 0) return false;
  return true;
}

std::vector<std::vector<int>> vertex_facets(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> ring(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int c = 0; c < 3; ++c) ring[mesh.triangles(c, t)].push_back(t);
  return ring;
}

Points3 vertex_normals(const TriangleMesh& mesh) {
  Points3 n = Points3::Zero(3, mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
    Vec3 cr = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) n.col(mesh.triangles(k, t)) += cr;
  }
  return n.colwise().normalized();
}

Eigen::VectorXd vertex_edge_scale(const TriangleMesh& mesh) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(mesh.num_vertices());
  Eigen::VectorXd n = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int c = 0; c < 3; ++c) {
      int a = mesh.triangles(c, t), b = mesh.triangles((c + 1) % 3, t);
      double l = (mesh.vertices.col(a) - mesh.vertices.col(b)).norm();
      s[a] += l; s[b] += l;
      n[a] += 1; n[b] += 1;
    }
  return s.cwiseQuotient(n);
}

SurfaceField facet_to_nodes(const TriangleMesh& mesh, const FacetField& f) {
  if (f.cols() != mesh.num_triangles()) throw GeometryError("facet field size mismatch");
  SurfaceField out = SurfaceField::Zero(f.rows(), mesh.num_vertices());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double a = facet_geometry(mesh, t).area;
    for (int c = 0; c < 3; ++c) {
      out.col(mesh.triangles(c, t)) += a * f.col(t);
      w[mesh.triangles(c, t)] += a;
    }
  }
  for (int i = 0; i < mesh.num_vertices(); ++i) out.col(i) /= w[i];
  return out;
}

void export_mesh(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << "molodensky-mesh v1 " << mesh.num_vertices() << ' ' << mesh.num_triangles() << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    os << mesh.vertices(0, i) << ' ' << mesh.vertices(1, i) << ' ' << mesh.vertices(2, i) << ' '
       << mesh.reference(0, i) << ' ' << mesh.reference(1, i) << ' ' << mesh.reference(2, i)
       << '\n';
  }
  for (int t = 0; t < mesh.num_triangles(); ++t)
    os << mesh.triangles(0, t) << ' ' << mesh.triangles(1, t) << ' ' << mesh.triangles(2, t)
       << '\n';
}

TriangleMesh import_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path);
  int line_no = 0;
  std::string line;
  auto fail = [&](const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next = [&]() {
    if (!std::getline(is, line)) { ++line_no; fail("unexpected end of file"); }
    ++line_no;
    return std::istringstream(line);
  };
  auto ss = next();
  std::string magic, ver;
  long nv = -1, nt = -1;
  ss >> magic >> ver >> nv >> nt;
  if (!ss || magic != "molodensky-mesh" || ver != "v1" || nv < 3 || nt < 1)
    fail("bad header");
  TriangleMesh m;
  m.vertices.resize(3, nv);
  m.reference.resize(3, nv);
  m.triangles.resize(3, nt);
  for (long i = 0; i < nv; ++i) {
    auto s = next();
    double v[6];
    for (double& x : v) s >> x;
    if (!s) fail("expected 6 coordinates");
    std::string extra;
    if (s >> extra) fail("trailing data");
    m.vertices.col(i) << v[0], v[1], v[2];
    m.reference.col(i) << v[3], v[4], v[5];
  }
  for (long t = 0; t < nt; ++t) {
    auto s = next();
    long a, b, c;
    s >> a >> b >> c;
    if (!s) fail("expected 3 indices");
    for (long k : {a, b, c})
      if (k < 0 || k >= nv) fail("vertex index " + std::to_string(k) + " out of range");
    std::string extra;
    if (s >> extra) fail("trailing data");
    m.triangles.col(t) << int(a), int(b), int(c);
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) fail("trailing content");
  }
  // level is not stored; infer it for icosphere-sized meshes
  m.level = 0;
  for (int l = 0; l <= kMaxIcosphereLevel; ++l)
    if (nt == 20L << (2 * l)) m.level = l;
  return m;
}

std::vector<Mat3> icosahedral_rotations() {
  TriangleMesh ico = icosahedron();
  // neighbours of vertex 0 and of every vertex
  std::vector<std::vector<int>> nb(12);
  for (int t = 0; t < 20; ++t)
    for (int c = 0; c < 3; ++c) {
      int a = ico.triangles(c, t), b = ico.triangles((c + 1) % 3, t);
      if (std::find(nb[a].begin(), nb[a].end(), b) == nb[a].end()) nb[a].push_back(b);
      if (std::find(nb[b].begin(), nb[b].end(), a) == nb[b].end()) nb[b].push_back(a);
    }
  auto frame = [](const Vec3& p, const Vec3& q) {
    Vec3 e0 = p.normalized();
    Vec3 e1 = (q - q.dot(e0) * e0).normalized();
    Mat3 F;
    F << e0, e1, e0.cross(e1);
    return F;
  };
  const Mat3 F0 = frame(ico.vertices.col(0), ico.vertices.col(nb[0][0]));
  std::vector<Mat3> out;
  for (int v = 0; v < 12; ++v)
    for (int w : nb[v]) {
      Mat3 R = frame(ico.vertices.col(v), ico.vertices.col(w)) * F0.transpose();
      // keep only maps of the vertex set onto itself
      bool ok = true;
      for (int i = 0; i < 12 && ok; ++i) {
        Vec3 y = R * ico.vertices.col(i);
        double best = std::numeric_limits<double>::max();
        for (int j = 0; j < 12; ++j) best = std::min(best, (ico.vertices.col(j) - y).norm());
        ok = best < 1e-12;
      }
      if (ok) out.push_back(R);
    }
  return out;
}

std::vector<int> vertex_permutation(const TriangleMesh& mesh, const Mat3& R, double tol) {
  const int nv = mesh.num_vertices();
  auto key = [tol](const Vec3& x) {
    return std::array<long long, 3>{std::llround(x[0] / (10 * tol)),
                                    std::llround(x[1] / (10 * tol)),
                                    std::llround(x[2] / (10 * tol))};
  };
  std::map<std::array<long long, 3>, std::vector<int>> grid;
  for (int i = 0; i < nv; ++i) grid[key(mesh.vertices.col(i))].push_back(i);
  std::vector<int> perm(nv, -1);
  for (int i = 0; i < nv; ++i) {
    Vec3 y = R * mesh.vertices.col(i);
    auto k = key(y);
    int found = -1;
    for (long long dx = -1; dx <= 1 && found < 0; ++dx)
      for (long long dy = -1; dy <= 1 && found < 0; ++dy)
        for (long long dz = -1; dz <= 1 && found < 0; ++dz) {
          auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid.end()) continue;
          for (int j : it->second)
            if ((mesh.vertices.col(j) - y).norm() < tol) { found = j; break; }
        }
    if (found < 0) throw GeometryError("rotation is not a mesh symmetry");
    perm[i] = found;
  }
  return perm;
}

std::vector<int> triangle_permutation(const TriangleMesh& mesh, const std::vector<int>& vperm) {
  std::map<std::array<int, 3>, int> index;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    std::array<int, 3> k{mesh.triangles(0, t), mesh.triangles(1, t), mesh.triangles(2, t)};
    std::sort(k.begin(), k.end());
    index[k] = t;
  }
  std::vector<int> out(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    std::array<int, 3> k{vperm[mesh.triangles(0, t)], vperm[mesh.triangles(1, t)],
                         vperm[mesh.triangles(2, t)]};
    std::sort(k.begin(), k.end());
    auto it = index.find(k);
    if (it == index.end()) throw GeometryError("permutation does not map triangles");
    out[t] = it->second;
  }
  return out;
}

double winding_number(const TriangleMesh& mesh, const Vec3& x) {
  double omega = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Vec3 a = mesh.corner(t, 0) - x, b = mesh.corner(t, 1) - x, c = mesh.corner(t, 2) - x;
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    double num = a.dot(b.cross(c));
    double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    omega += 2.0 * std::atan2(num, den);
  }
  return omega / (4.0 * std::numbers::pi);
}

}  // namespace molo
