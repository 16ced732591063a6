#include "molo/smoothing.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "molo/errors.hpp"

namespace molo {

LaplaceBeltrami assemble_laplace_beltrami(const TriangleMesh& mesh) {
  const int nv = mesh.num_vertices();
  LaplaceBeltrami lb;
  lb.stiffness.setZero(nv, nv);
  lb.mass.setZero(nv, nv);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    int id[3];
    Vec3 x[3];
    for (int a = 0; a < 3; ++a) {
      id[a] = mesh.triangles(a, t);
      x[a] = mesh.vertices.col(id[a]);
    }
    const double area2 = (x[1] - x[0]).cross(x[2] - x[0]).norm();
    const double scale = std::max({(x[1] - x[0]).squaredNorm(), (x[2] - x[1]).squaredNorm(),
                                   (x[0] - x[2]).squaredNorm()});
    if (!(area2 > 1e-12 * scale)) throw GeometryError("degenerate facet " + std::to_string(t));
    for (int a = 0; a < 3; ++a) {
      // the angle at vertex a faces edge (b, c)
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      const double cot = (x[b] - x[a]).dot(x[c] - x[a]) / area2;
      const double w = 0.5 * cot;
      lb.stiffness(id[b], id[c]) -= w;
      lb.stiffness(id[c], id[b]) -= w;
      lb.stiffness(id[b], id[b]) += w;
      lb.stiffness(id[c], id[c]) += w;
    }
    const double area = 0.5 * area2;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) lb.mass(id[a], id[b]) += area / (a == b ? 6.0 : 12.0);
  }
  return lb;
}

LBSpectrum compute_spectrum(const LaplaceBeltrami& lb, int modes) {
  const int nv = static_cast<int>(lb.mass.rows());
  if (modes > nv) throw Error("more modes requested than vertices");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(lb.stiffness, lb.mass);
  if (es.info() != Eigen::Success) throw SolverError("generalized eigensolver failed");
  const int m = modes <= 0 ? nv : modes;
  LBSpectrum s;
  s.lambda = es.eigenvalues().head(m).cwiseMax(0.0);
  s.psi = es.eigenvectors().leftCols(m);
  s.mass = lb.mass;
  return s;
}

LBSpectrum compute_spectrum(const TriangleMesh& mesh, int modes) {
  return compute_spectrum(assemble_laplace_beltrami(mesh), modes);
}

double smoothing_multiplier(double lambda, const SmootherParams& s) {
  if (!(s.theta > 0)) throw Error("smoothing parameter must be positive");
  if (s.k < 1) throw Error("smoother order must be at least 1");
  return std::exp(-std::pow(lambda, s.k) * std::pow(s.theta, -2.0 * s.k));
}

Eigen::MatrixXd modal_coefficients(const LBSpectrum& spec, const SurfaceField& f) {
  if (f.cols() != spec.num_vertices()) throw GeometryError("field does not live on the spectrum's mesh");
  return spec.psi.transpose() * (spec.mass * f.transpose());
}

SurfaceField smooth(const SurfaceField& f, const SmootherParams& s, const LBSpectrum& spec) {
  smoothing_multiplier(0.0, s);
  return apply_multiplier(f, spec, [&](double l) { return smoothing_multiplier(l, s); });
}

double spectral_norm(const LBSpectrum& spec, const Eigen::VectorXd& coeffs, double s) {
  double acc = 0.0;
  for (int i = 0; i < coeffs.size(); ++i) acc += std::pow(1.0 + spec.lambda[i], s) * coeffs[i] * coeffs[i];
  return std::sqrt(acc);
}

PropertyReport smoothing_property_report(const LBSpectrum& spec, int k,
                                         const std::vector<double>& thetas,
                                         const std::vector<double>& orders, int random_fields,
                                         unsigned seed) {
  const int n = spec.num_modes();
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Eigen::VectorXd> noise(random_fields, Eigen::VectorXd(n));
  for (auto& c : noise)
    for (int i = 0; i < n; ++i) c[i] = nd(rng);

  PropertyReport rep;
  // each property is a multiplier m(lambda) and a theta exponent
  struct Prop {
    const char* name;
    std::function<bool(double, double)> admissible;
    std::function<double(double, double)> mult;
    std::function<double(double, double)> power;
  };
  const std::vector<Prop> props = {
      {"i", [](double a, double b) { return b <= a; },
       [k](double l, double th) { return smoothing_multiplier(l, {th, k}); },
       [](double, double) { return 0.0; }},
      {"ii", [](double a, double b) { return a <= b; },
       [k](double l, double th) { return smoothing_multiplier(l, {th, k}); },
       [](double a, double b) { return b - a; }},
      {"iii'", [k](double a, double b) { return a - b >= 0 && a - b < 2 * k; },
       [k](double l, double th) { return 1.0 - smoothing_multiplier(l, {th, k}); },
       [](double a, double b) { return b - a; }},
      {"iv", [k](double a, double b) { return a - b < 2 * k; },
       [k](double l, double th) {
         const double t = std::pow(l, k) * std::pow(th, -2.0 * k);
         return 2.0 * k / th * t * std::exp(-t);
       },
       [](double a, double b) { return b - a - 1; }},
  };
  for (const auto& P : props)
    for (double a : orders)
      for (double b : orders) {
        if (!P.admissible(a, b)) continue;
        for (double th : thetas) {
          PropertyRow row{P.name, k, a, b, th, 0.0, 0.0};
          const double scale = std::pow(th, P.power(a, b));
          for (int i = 0; i < n; ++i) {
            const double r = std::abs(P.mult(spec.lambda[i], th)) *
                             std::pow(1.0 + spec.lambda[i], 0.5 * (b - a)) / scale;
            row.C = std::max(row.C, r);
          }
          for (const auto& c : noise) {
            Eigen::VectorXd out(n);
            for (int i = 0; i < n; ++i) out[i] = P.mult(spec.lambda[i], th) * c[i];
            const double r = spectral_norm(spec, out, b) / (scale * spectral_norm(spec, c, a));
            row.C_noise = std::max(row.C_noise, r);
            row.C = std::max(row.C, r);
          }
          rep.rows.push_back(row);
        }
      }

  // semigroup, constants, contraction and monotonicity on the nodal level
  const int nv = spec.num_vertices();
  SurfaceField u(1, nv);
  for (int i = 0; i < nv; ++i) u(0, i) = nd(rng);
  auto mass_norm = [&](const SurfaceField& f) {
    return std::sqrt((f * spec.mass * f.transpose())(0, 0));
  };
  const SurfaceField one = SurfaceField::Ones(1, nv);
  for (double ta : thetas)
    for (double tb : thetas) {
      const double tc = std::pow(std::pow(ta, -2.0 * k) + std::pow(tb, -2.0 * k), -0.5 / k);
      const SurfaceField two = smooth(smooth(u, {ta, k}, spec), {tb, k}, spec);
      rep.semigroup_error =
          std::max(rep.semigroup_error, mass_norm(two - smooth(u, {tc, k}, spec)) / mass_norm(u));
    }
  for (double th : thetas) {
    rep.constant_error =
        std::max(rep.constant_error, (smooth(one, {th, k}, spec) - one).cwiseAbs().maxCoeff());
    if (mass_norm(smooth(u, {th, k}, spec)) > mass_norm(u) * (1 + 1e-12)) rep.contraction = false;
  }
  for (int i = 0; i < spec.num_modes(); ++i) {
    if (spec.lambda[i] <= 0.0) continue;
    for (size_t j = 1; j < thetas.size(); ++j) {
      const double lo = std::min(thetas[j - 1], thetas[j]), hi = std::max(thetas[j - 1], thetas[j]);
      const double mlo = smoothing_multiplier(spec.lambda[i], {lo, k});
      const double mhi = smoothing_multiplier(spec.lambda[i], {hi, k});
      if (lo < hi && mlo > 0.0 && mhi < 1.0 && !(mlo < mhi))
        rep.monotone = false;
    }
  }
  return rep;
}

void write_property_csv(const PropertyReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << "property,k,a,b,theta,C,C_noise\n";
  os.precision(17);
  for (const auto& row : r.rows)
    os << row.property << ',' << row.k << ',' << row.a << ',' << row.b << ',' << row.theta << ','
       << row.C << ',' << row.C_noise << '\n';
}

}  // namespace molo
