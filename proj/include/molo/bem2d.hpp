#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace molo::bem2d {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Closed counter-clockwise polygon split into straight elements.
struct Boundary {
  std::vector<Vec2> nodes;  // element i runs from nodes[i] to nodes[i + 1 mod n]

  int num_elements() const { return static_cast<int>(nodes.size()); }
  Vec2 start(int e) const { return nodes[e]; }
  Vec2 end(int e) const { return nodes[(e + 1) % nodes.size()]; }
  double length(int e) const { return (end(e) - start(e)).norm(); }
  // Exterior normal of a counter-clockwise polygon.
  Vec2 normal(int e) const;
};

// Square [-1/2, 1/2]^2 with n elements per side, uniform or graded toward the
// corners with nodes (j / m)^beta (beta = 1: uniform).
Boundary square(int n, double beta = 1.0);
// Regular polygon inscribed in the circle of radius r.
Boundary regular_polygon(int n, double r);

// Grading exponent realizing the rate p + 3/2 for the corner singularity of
// the exterior of a square.
double corner_grading(int p);

constexpr int kMaxDegree = 16;

// Discontinuous degree-p densities in Legendre polynomials P_k(2s - 1) of the
// element coordinate s in [0, 1].
struct Density {
  const Boundary* boundary = nullptr;
  int p = 0;
  Eigen::VectorXd coeffs;

  double value(int e, double s) const;
};

// <V phi_j, phi_i> with V mu(x) = -1/(2 pi) int log|x - y| mu(y) ds_y;
// degrees up to kMaxDegree, gradients and Hessians up to 3.
Eigen::MatrixXd assemble_slp(const Boundary& b, int p);
Eigen::VectorXd load_vector(const Boundary& b, int p, const std::function<double(const Vec2&)>& f);

struct Solution {
  Density mu;
  double energy = 0.0;  // <V mu_h, mu_h> = <f, mu_h>
  Eigen::MatrixXd V;
};

// Galerkin solution of V mu = f; throws SolverError when V is not positive
// definite (logarithmic capacity of the boundary near 1).
Solution solve_dirichlet_2d(const Boundary& b, int p, const std::function<double(const Vec2&)>& f);

// Energy errors sqrt(E - E_i) with E the Aitken limit of the last three
// energies; throws Error for fewer than three or non-increasing energies.
std::vector<double> energy_errors(const std::vector<double>& energies);

// Coarse density as a degree-p density on a boundary whose element e splits
// into elements factor * e .. factor * e + factor - 1 (p >= coarse.p).
Density prolong(const Density& coarse, const Boundary& fine, int factor, int p);

// ||mu_fine - mu_coarse||_V^2 = E_fine - E_coarse for nested Galerkin
// solutions (h- or p-refined), without the cancellation of the energy
// difference.
double energy_gap(const Solution& coarse, const Solution& fine);

// Errors sqrt(E - E_i) from the gaps E_{i+1} - E_i, the tail beyond the last
// level summed geometrically (the same limit as Aitken on the energies).
std::vector<double> energy_errors_from_gaps(const std::vector<double>& gaps);

// ln(e_i / e_{i+1}) / ln(n_{i+1} / n_i).
std::vector<double> rates(const std::vector<double>& errors, const std::vector<double>& sizes);

double potential(const Density& mu, const Vec2& x);
// Off-boundary gradient; points on an element get the principal value.
Vec2 gradient(const Density& mu, const Vec2& x);
// Exterior trace of the gradient at element coordinate s of element e.
Vec2 surface_gradient(const Density& mu, int e, double s);

// One-sided second-order differences along the exterior normal and central
// differences along the element, as in the 3D evaluator.
Mat2 hessian_fd(const Density& mu, int e, double s, double delta_n = 1e-4, double delta_t = 1e-5);

// Element and coordinate of a boundary point; throws when x is off the
// boundary or at a node.
std::pair<int, double> locate(const Boundary& b, const Vec2& x, double tol = 1e-12);

}  // namespace molo::bem2d
