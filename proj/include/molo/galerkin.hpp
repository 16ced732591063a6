#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "molo/kernels.hpp"
#include "molo/mesh.hpp"

namespace molo {

struct QuadratureOptions {
  double near_ratio = 2.0;   // centroid distance / diameter below which the inner integral is analytic
  double far_digits = 10.0;  // target digits of the Gauss x Gauss rule beyond near_ratio
  int near_order = 8;        // outer rule of non-touching near pairs
  int singular_levels = 8;   // graded outer rules of touching pairs
  int corner_levels = 3;     // grading toward the corners of a shared edge
  double sigma = 0.25;
  int singular_order = 5;
  int load_order = 6;        // right-hand sides, constraints, projections
  AngularRule angular{2.0, 10};
};

// Settings for reference computations and tight invariant checks.
QuadratureOptions precise_quadrature();

// Triangle rule order for Gauss x Gauss at centroid distance / diameter `ratio`.
int far_rule_order(double ratio, double digits);

// Discontinuous piecewise polynomials of degree p in per-triangle monomials
// of the reference coordinates.
struct DGSpace {
  TriangleMesh mesh;
  int p = 2;
  std::vector<TriangleGeom> geom;

  int local_dim() const { return num_monomials(p); }
  int dim() const { return mesh.num_triangles() * local_dim(); }
};

std::shared_ptr<const DGSpace> make_space(const TriangleMesh& mesh, int p);

struct DGDensity {
  std::shared_ptr<const DGSpace> space;
  Eigen::VectorXd coeffs;

  double value(int t, double xi, double eta) const;
};

// f(t, xi, eta, x): a function on the surface sampled at reference
// coordinates of facet t (x the corresponding surface point).
using SurfaceFunction = std::function<double(int, double, double, const Vec3&)>;

// <f, b_k> for every basis function.
Eigen::VectorXd load_vector(const DGSpace& space, const SurfaceFunction& f,
                            const QuadratureOptions& q = {});

// Block-diagonal Gram matrix of the local monomials on facet t.
Eigen::MatrixXd local_mass(const DGSpace& space, int t);

DGDensity l2_project(std::shared_ptr<const DGSpace> space, const SurfaceFunction& f,
                     const QuadratureOptions& q = {});

double l2_norm(const DGDensity& mu, const SurfaceFunction* minus = nullptr,
               const QuadratureOptions& q = {});

struct LayerMatrices {
  Eigen::MatrixXd V;  // <V b_j, b_k>, row k, column j
  Eigen::MatrixXd K;  // <h . grad V b_j, b_k> (principal value), empty without h
};

// One pass over all ordered element pairs; K'(h) only when h is given.
LayerMatrices assemble_layers(const DGSpace& space, const FacetField* h,
                              const QuadratureOptions& q = {});

Eigen::MatrixXd assemble_slp(const DGSpace& space, const QuadratureOptions& q = {});

// V - 1/2 (h . n) M + K'(h), the exterior trace of u + h . grad u.
Eigen::MatrixXd robin_from_layers(const DGSpace& space, const LayerMatrices& layers,
                                  const FacetField& h);
Eigen::MatrixXd assemble_robin_operator(const DGSpace& space, const FacetField& h,
                                        const QuadratureOptions& q = {});

// A_k(x) = x_k / |x|^3.
Vec3 decay_field(const Vec3& x);

// Lambda (3 x N): <b_j, A_k>.
Eigen::Matrix<double, 3, Eigen::Dynamic> assemble_constraints(const DGSpace& space,
                                                              const QuadratureOptions& q = {});

// Galerkin columns V A_j: V applied to the L2 projection of A_j.
Eigen::Matrix<double, Eigen::Dynamic, 3> slp_decay_columns(const DGSpace& space,
                                                           const Eigen::MatrixXd& V,
                                                           const QuadratureOptions& q = {});

struct SaddleSystem {
  Eigen::MatrixXd S;
  Eigen::Matrix<double, Eigen::Dynamic, 3> St;
  Eigen::Matrix<double, 3, Eigen::Dynamic> L;
  Eigen::VectorXd rhs;
  bool symmetric = false;
  std::string name = "saddle";
};

struct SaddleSolution {
  Eigen::VectorXd mu;
  Vec3 a = Vec3::Zero();
  double rcond = 0.0;
};

inline constexpr double kMaxCondition = 1e12;

// Dense LU with partial pivoting; throws SolverError when the one-norm
// condition estimate exceeds kMaxCondition.
SaddleSolution solve_saddle(const SaddleSystem& sys);

struct SolveResult {
  DGDensity mu;
  Vec3 a = Vec3::Zero();
  double rcond = 0.0;
};

// Operators assembled once per surface and reused by both solves; layers.K
// is released once folded into robin.
struct SurfaceOperators {
  std::shared_ptr<const DGSpace> space;
  LayerMatrices layers;
  Eigen::MatrixXd robin;
  Eigen::Matrix<double, 3, Eigen::Dynamic> Lambda;
  Eigen::Matrix<double, Eigen::Dynamic, 3> VA;
  FacetField h;
};

SurfaceOperators assemble_surface(std::shared_ptr<const DGSpace> space, const FacetField& h,
                                  const QuadratureOptions& q = {});

SolveResult solve_robin(const SurfaceOperators& ops, const SurfaceFunction& f,
                        const QuadratureOptions& q = {});
SolveResult solve_dirichlet(const SurfaceOperators& ops, const SurfaceFunction& w,
                            const QuadratureOptions& q = {});

// Convenience forms assembling everything from scratch.
SolveResult solve_robin(std::shared_ptr<const DGSpace> space, const FacetField& h,
                        const SurfaceFunction& f, const QuadratureOptions& q = {});
SolveResult solve_dirichlet(std::shared_ptr<const DGSpace> space, const SurfaceFunction& w,
                            const QuadratureOptions& q = {});

// f = W' + G' . h with W', G' nodal (piecewise linear) and h per facet.
SurfaceFunction build_rhs_robin(const TriangleMesh& mesh, const SurfaceField& Wdot,
                                const SurfaceField& Gdot, const FacetField& h);

struct HistoryEntry {
  DGDensity mu;
  double delta = 0.0;
  // (V mu)(phi(xi)) by (facet, xi, eta); shared between copies
  std::shared_ptr<std::map<std::array<double, 3>, double>> trace =
      std::make_shared<std::map<std::array<double, 3>, double>>();
};

// w(xi) = v0(phi_0(xi)) + sum_i delta_i (V_i mu_i)(phi_i(xi)); points are
// matched across surfaces by facet index and reference coordinates.
SurfaceFunction accumulate_w(const std::vector<HistoryEntry>& history,
                             const std::function<double(const Vec3&)>& v0,
                             const TriangleMesh& phi0, const TriangleMesh& current);

// Binary dump: ASCII header line "molo-matrix v1 <rows> <cols>\n" followed by
// rows * cols little-endian doubles in row-major order.
void dump_matrix(const Eigen::MatrixXd& A, const std::string& path);
Eigen::MatrixXd load_matrix(const std::string& path);

}  // namespace molo
