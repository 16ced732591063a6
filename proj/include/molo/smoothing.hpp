#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "molo/mesh.hpp"

namespace molo {

struct LaplaceBeltrami {
  Eigen::MatrixXd stiffness;  // cotangent weights, rows sum to zero
  Eigen::MatrixXd mass;       // consistent P1 mass
};

LaplaceBeltrami assemble_laplace_beltrami(const TriangleMesh& mesh);

// Generalized eigenpairs stiffness psi = lambda mass psi, ascending, with
// mass-orthonormal eigenvectors.
struct LBSpectrum {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd psi;   // nv x modes
  Eigen::MatrixXd mass;  // nv x nv
  int num_vertices() const { return static_cast<int>(psi.rows()); }
  int num_modes() const { return static_cast<int>(psi.cols()); }
};

// modes <= 0 keeps the full spectrum.
LBSpectrum compute_spectrum(const LaplaceBeltrami& lb, int modes = 0);
LBSpectrum compute_spectrum(const TriangleMesh& mesh, int modes = 0);

struct SmootherParams {
  double theta = 1.0;
  int k = 1;
};

// exp(-lambda^k / theta^(2k)).
double smoothing_multiplier(double lambda, const SmootherParams& s);

// Mass-weighted modal coefficients of each row of the field (arity x nv);
// result is modes x arity.
Eigen::MatrixXd modal_coefficients(const LBSpectrum& spec, const SurfaceField& f);

SurfaceField smooth(const SurfaceField& f, const SmootherParams& s, const LBSpectrum& spec);

// Applies an arbitrary spectral multiplier.
template <typename Mult>
SurfaceField apply_multiplier(const SurfaceField& f, const LBSpectrum& spec, Mult&& m) {
  Eigen::MatrixXd c = modal_coefficients(spec, f);
  for (int i = 0; i < spec.num_modes(); ++i) c.row(i) *= m(spec.lambda[i]);
  return (spec.psi * c).transpose();
}

// Discrete spectral Sobolev norm: sum_i (1 + lambda_i)^s c_i^2.
double spectral_norm(const LBSpectrum& spec, const Eigen::VectorXd& coeffs, double s);

struct PropertyRow {
  std::string property;  // "i", "ii", "iii'", "iv"
  int k = 1;
  double a = 0, b = 0, theta = 0;
  double C = 0;          // smallest admissible constant over all trial fields
  double C_noise = 0;    // same ratio for the random trial fields only
};

struct PropertyReport {
  std::vector<PropertyRow> rows;
  double semigroup_error = 0;  // max |S_a S_b u - S_c u| / |u|
  double constant_error = 0;   // max |S u - u| for u constant
  bool contraction = true;
  bool monotone = true;
};

// Checks the smoothing properties on every eigenmode and `random_fields`
// white-noise coefficient fields for all admissible (a, b) in the grid:
// b <= a for (i), a <= b for (ii), 0 <= a - b < 2k for (iii'), a - b < 2k for (iv).
PropertyReport smoothing_property_report(const LBSpectrum& spec, int k,
                                         const std::vector<double>& thetas,
                                         const std::vector<double>& orders,
                                         int random_fields, unsigned seed);

void write_property_csv(const PropertyReport& r, const std::string& path);

}  // namespace molo
