#pragma once

#include <Eigen/Dense>

#include <vector>

#include "molo/galerkin.hpp"

namespace molo {

struct EvalOptions {
  double far_ratio = 4.0;  // Gauss quadrature beyond this distance / diameter
  int far_order = 6;
  AngularRule angular;
};

// Evaluates u = V mu and grad u for one density; caches per-facet data.
class LayerEvaluator {
 public:
  explicit LayerEvaluator(const DGDensity& mu, const EvalOptions& opt = {});

  double potential(const Vec3& x) const;
  // Off-surface gradient; points in the plane of a facet get the principal
  // value of that facet's contribution.
  Vec3 gradient(const Vec3& x) const;
  void potential_and_gradient(const Vec3& x, double& u, Vec3& g) const;

  // Exterior trace of grad u at reference point (xi, eta) of facet t, which
  // must lie strictly inside the facet: -1/2 mu n + p.v. grad V mu.
  Vec3 surface_gradient(int t, double xi, double eta) const;

  const DGDensity& density() const { return mu_; }

 private:
  DGDensity mu_;
  EvalOptions opt_;
  std::vector<Vec3> centroid_;
  std::vector<double> diam_;
  Points3 far_pts_;               // Gauss points, facet-major
  Eigen::VectorXd far_w_, far_w_coarse_;
  Points3 coarse_pts_;
  int nq_ = 0, nq_coarse_ = 0;
};

double eval_potential(const DGDensity& mu, const Vec3& x, const EvalOptions& opt = {});

// e . grad u on the exterior side at a point strictly inside facet t.
double eval_gradient_on_surface(const DGDensity& mu, int t, double xi, double eta,
                                const Vec3& e, const EvalOptions& opt = {});

struct HessianResult {
  Mat3 H = Mat3::Zero();
  double delta_n = 0.0, delta_t = 0.0;
};

// H_ij = d_j (d_i u) from one-sided second-order differences of the surface
// gradient along the normal and central differences along the facet.
HessianResult eval_hessian_fd(const LayerEvaluator& ev, int t, double xi, double eta,
                              double delta_n = 1e-4, double delta_t = 1e-5);
HessianResult eval_hessian_fd(const DGDensity& mu, int t, double xi, double eta,
                              double delta_n = 1e-4, double delta_t = 1e-5);

// Same differences for any gradient field w.
template <typename GradFn>
Mat3 hessian_from_gradient(GradFn&& w, const Vec3& x, const Vec3& n, const Vec3& t1,
                           const Vec3& t2, double dn, double dt) {
  Mat3 D;
  D.col(0) = (w(x + dt * t1) - w(x - dt * t1)) / (2 * dt);
  D.col(1) = (w(x + dt * t2) - w(x - dt * t2)) / (2 * dt);
  D.col(2) = (4 * w(x + dn * n) - 3 * w(x) - w(x + 2 * dn * n)) / (2 * dn);
  Mat3 F;
  F << t1, t2, n;
  return D * F.transpose();
}

// Value, gradient and Hessian of u = V mu at the surface point x, continued
// from the exterior: least-squares fit of a harmonic polynomial to potential
// samples in a cone around n at distances [near, far] * scale.
struct HarmonicFit {
  int degree = 5;
  double near = 0.5, far = 2.0;
};

struct ExteriorLimit {
  double u = 0.0;
  Vec3 g = Vec3::Zero();
  Mat3 H = Mat3::Zero();
};

// The cone is oriented by `tangent` (projected onto the plane of n); zero
// picks an arbitrary orthogonal direction.
ExteriorLimit exterior_limit(const LayerEvaluator& ev, const Vec3& x, const Vec3& n, double scale,
                             const HarmonicFit& fit = {}, const Vec3& tangent = Vec3::Zero());

struct MarussiReport {
  std::vector<double> abs_det;
  double min_abs_det = 0.0;
  std::vector<int> flagged;
};

inline constexpr double kMarussiThreshold = 1e-6;

MarussiReport check_marussi(const std::vector<Mat3>& H, double threshold = kMarussiThreshold);

}  // namespace molo
