#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "molo/errors.hpp"

namespace molo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points3 = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Triangles = Eigen::Matrix<int, 3, Eigen::Dynamic>;

// Closed oriented triangulation. Vertex i of every surface phi_m corresponds
// to reference vertex i on the unit sphere.
struct TriangleMesh {
  Points3 vertices;
  Triangles triangles;
  Points3 reference;
  int level = 0;

  int num_vertices() const { return static_cast<int>(vertices.cols()); }
  int num_triangles() const { return static_cast<int>(triangles.cols()); }
  Vec3 corner(int t, int c) const { return vertices.col(triangles(c, t)); }
};

// Nodal fields store one column per vertex (arity rows), facet fields one
// column per triangle.
using SurfaceField = Eigen::MatrixXd;
using FacetField = Eigen::MatrixXd;

struct FacetGeometry {
  double area;
  Vec3 normal;
  Vec3 midpoint;
};

inline constexpr int kMaxIcosphereLevel = 7;

TriangleMesh build_icosphere(int level, int max_level = kMaxIcosphereLevel);

// Cube [-1,1]^3 with two triangles per face, refined `level` times by 4-to-1
// midpoint splits (no projection).
TriangleMesh build_cube(int level);

// One 4-to-1 midpoint split. Midpoints are projected to the unit sphere
// only when `project` is set.
TriangleMesh refine(const TriangleMesh& mesh, bool project);

FacetGeometry facet_geometry(const TriangleMesh& mesh, int t);
double mean_facet_area(const TriangleMesh& mesh);
double total_area(const TriangleMesh& mesh);

// Checks degenerate facets against 1e-12 times the mean area.
void check_nondegenerate(const TriangleMesh& mesh);

TriangleMesh update_surface(const TriangleMesh& mesh,
                            const SurfaceField& increment, double step);

bool is_edge_manifold(const TriangleMesh& mesh);

// Vertex ring data used for facet-to-node averaging.
std::vector<std::vector<int>> vertex_facets(const TriangleMesh& mesh);

// Area-weighted vertex normals.
Points3 vertex_normals(const TriangleMesh& mesh);

// Average of adjacent edge lengths per vertex.
Eigen::VectorXd vertex_edge_scale(const TriangleMesh& mesh);

// Area-weighted average of facet values onto nodes.
SurfaceField facet_to_nodes(const TriangleMesh& mesh, const FacetField& f);

void export_mesh(const TriangleMesh& mesh, const std::string& path);
TriangleMesh import_mesh(const std::string& path);

// The 60 rotations of the icosahedral group.
std::vector<Mat3> icosahedral_rotations();

// perm[i] = index of the vertex at R * x_i. Throws if R is not a symmetry.
std::vector<int> vertex_permutation(const TriangleMesh& mesh, const Mat3& R,
                                    double tol = 1e-9);

// perm[t] = index of the triangle mapped onto by R (vertex sets compared).
std::vector<int> triangle_permutation(const TriangleMesh& mesh,
                                      const std::vector<int>& vperm);

// Facet and reference coordinates (xi, eta) of a point on the surface;
// throws when x lies off the surface or within tol of a facet edge.
struct SurfacePoint {
  int t = -1;
  double xi = 0.0, eta = 0.0;
};
SurfacePoint locate(const TriangleMesh& mesh, const Vec3& x, double tol = 1e-9);

// Generalized winding number (solid angle / 4 pi); ~1 inside, ~0 outside.
double winding_number(const TriangleMesh& mesh, const Vec3& x);

}  // namespace molo
