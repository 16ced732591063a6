#include <doctest.h>

#include <cmath>
#include <random>

#include "molo/errors.hpp"
#include "molo/nash_hormander.hpp"

using namespace molo;

namespace {

const LBSpectrum& spectrum2() {
  static const LBSpectrum s = reference_spectrum(build_icosphere(2));
  return s;
}

SurfaceField random_field(int rows, int nv, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  SurfaceField f(rows, nv);
  for (int i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
  return f;
}

// Unit sphere start, gravity data of the sphere of radius 1.1.
struct Model {
  MolodenskyData data;
  InitialGuess init;
};

Model sphere_model(int level) {
  auto mesh = build_icosphere(level);
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  Model m;
  m.data = {SurfaceField::Constant(1, nv, 1 / 1.1), -mesh.reference / 1.21};
  m.init.phi = mesh;
  m.init.W0 = SurfaceField::Ones(1, nv);
  m.init.G0 = -mesh.reference;
  m.init.h0.resize(3, nt);
  for (int t = 0; t < nt; ++t)
    m.init.h0.col(t) = (mesh.corner(t, 0) + mesh.corner(t, 1) + mesh.corner(t, 2)) / 6.0;
  m.init.v0 = [](const Vec3& x) { return 1 / x.norm(); };
  return m;
}

}  // namespace

TEST_CASE("theta schedule") {
  ScheduleParams s{2.6, 6.0};
  CHECK(theta_at(s, 0) == 2.6);
  CHECK(theta_at(s, 1) == doctest::Approx(std::pow(std::pow(2.6, 6) + 1, 1.0 / 6)).epsilon(1e-15));
  CHECK(delta_at(s, 0) == doctest::Approx(std::pow(std::pow(2.6, 6) + 1, 1.0 / 6) - 2.6).epsilon(1e-13));
  for (int m = 0; m < 200; ++m) {
    CHECK(theta_at(s, m + 1) > theta_at(s, m));
    CHECK(delta_at(s, m + 1) < delta_at(s, m));
    CHECK(delta_at(s, m) > 0.0);
  }
  // Delta_m theta_m^(kappa - 1) -> 1 / kappa
  for (int m : {10000, 100000}) {
    const double v = delta_at(s, m) * std::pow(theta_at(s, m), s.kappa - 1);
    CHECK(v == doctest::Approx(1 / s.kappa).epsilon(1e-2));
  }
  CHECK(theta_at({2.6, 1e6}, 5) == doctest::Approx(2.6).epsilon(1e-6));
  CHECK_THROWS_AS(theta_at({1.0, 6.0}, 0), ConfigError);
  CHECK_THROWS_AS(theta_at({2.6, 0.5}, 0), ConfigError);
  CHECK_THROWS_AS(theta_at(s, -1), Error);
}

TEST_CASE("smoothed W increments") {
  const auto& spec = spectrum2();
  const int nv = spec.num_vertices();
  ScheduleParams s{2.6, 6.0};
  const SurfaceField W0 = random_field(1, nv, 1);
  for (int m = 0; m < 3; ++m)
    CHECK(smoothed_increment_W(W0, W0, m, 0, s, 1, spec).cwiseAbs().maxCoeff() == 0.0);
  const SurfaceField W = W0.array() + 0.3;
  const SurfaceField w0 = smoothed_increment_W(W, W0, 0, 0, s, 1, spec);
  CHECK((w0.array() - 0.3 / delta_at(s, 0)).abs().maxCoeff() < 1e-10 / delta_at(s, 0));
  for (int m = 1; m < 3; ++m)
    CHECK(smoothed_increment_W(W, W0, m, 0, s, 1, spec).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(smoothed_increment_W(W, W0, 0, 1, s, 1, spec), StateError);
}

TEST_CASE("smoothed W increment of a single mode") {
  // spectral oracle: the increment of psi_i is the multiplier difference
  const auto& spec = spectrum2();
  ScheduleParams s{2.6, 6.0};
  for (int i : {1, 5, 20}) {
    const SurfaceField d = spec.psi.col(i).transpose();
    const SurfaceField W0 = SurfaceField::Zero(1, d.cols());
    for (int m : {0, 4}) {
      const double lam = spec.lambda[i];
      double mult = std::exp(-lam / std::pow(theta_at(s, m), 2));
      if (m > 0) mult -= std::exp(-lam / std::pow(theta_at(s, m - 1), 2));
      mult /= delta_at(s, m);
      const SurfaceField got = smoothed_increment_W(d, W0, m, 0, s, 1, spec);
      CHECK((got - mult * d).cwiseAbs().maxCoeff() < 1e-9 * (std::abs(mult) + 1e-3));
    }
  }
}

TEST_CASE("smoothed G increments") {
  const auto& spec = spectrum2();
  const int nv = spec.num_vertices();
  ScheduleParams s{2.6, 6.0};
  const SurfaceField G0 = random_field(3, nv, 2);
  auto a = start_accumulator(G0);
  CHECK(smoothed_increment_G(G0, a, s, 1, spec).cwiseAbs().maxCoeff() == 0.0);
  const Vec3 off(0.1, -0.2, 0.05);
  const SurfaceField G = G0.colwise() + off;
  const SurfaceField g0 = smoothed_increment_G(G, a, s, 1, spec);
  for (int i = 0; i < nv; ++i) CHECK((g0.col(i) - off / delta_at(s, 0)).norm() < 1e-9);
  CHECK_THROWS_AS(advance_accumulator(a, SurfaceField::Zero(3, nv + 1), 0.1, G), StateError);
}

TEST_CASE("accumulator identity") {
  // sum_{j <= m} Delta_j Gdot_j telescopes to S_theta_m(G - G_m + acc_m)
  const auto& spec = spectrum2();
  const int nv = spec.num_vertices();
  ScheduleParams s{2.6, 6.0};
  const SurfaceField G = random_field(3, nv, 3);
  auto a = start_accumulator(random_field(3, nv, 4));
  for (int m = 0; m < 6; ++m) {
    const SurfaceField gd = smoothed_increment_G(G, a, s, 1, spec);
    const SurfaceField expect = smooth(G - a.G_cur + a.acc, {theta_at(s, m), 1}, spec);
    advance_accumulator(a, gd, delta_at(s, m), random_field(3, nv, 10 + m));
    CHECK((a.acc - expect).cwiseAbs().maxCoeff() < 1e-12 * (1 + expect.cwiseAbs().maxCoeff()));
    CHECK(a.m == m + 1);
  }
}

TEST_CASE("nodal norm") {
  // (1 / #nodes) sqrt(sum |f_i|^2)
  CHECK(nodal_norm(SurfaceField::Constant(1, 4, 2.0)) == doctest::Approx(1.0));
  CHECK(nodal_norm(SurfaceField::Constant(3, 9, 1.0)) == doctest::Approx(std::sqrt(27.0) / 9));
  CHECK_THROWS_AS(nodal_norm(SurfaceField(1, 0)), Error);
}

TEST_CASE("run stops on tolerance and iteration count") {
  auto m = sphere_model(0);
  IterationOptions o;
  o.tol = std::numeric_limits<double>::infinity();
  auto r = run_nash_hormander(m.data, m.init, o);
  CHECK(r.trace.size() == 1);
  CHECK(r.converged);
  CHECK(r.trace[0].step == -1);

  o.tol = 0.0;
  o.max_iter = 0;
  CHECK(run_nash_hormander(m.data, m.init, o).trace.size() == 1);

  auto bad = m.init;
  bad.G0.resize(3, 1);
  CHECK_THROWS_AS(run_nash_hormander(m.data, bad, o), ConfigError);
  o.restart_rho = 0.5;
  CHECK_THROWS_AS(run_nash_hormander(m.data, m.init, o), ConfigError);
}

TEST_CASE("runs append one state per step and a final restart does nothing") {
  auto m = sphere_model(0);
  IterationOptions o;
  o.max_iter = 2;
  int calls = 0;
  auto plain = run_nash_hormander(m.data, m.init, o, [&](const StepRecord&) { ++calls; });
  REQUIRE_FALSE(plain.aborted);
  CHECK(plain.trace.size() == 3);
  CHECK(calls == 3);
  o.restart_period = 2;
  auto restarted = run_nash_hormander(m.data, m.init, o);
  REQUIRE(restarted.trace.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(restarted.trace[i].restart == 0);
    CHECK((restarted.trace[i].phi.vertices - plain.trace[i].phi.vertices).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(plain.trace[1].theta == theta_at(o.schedule, 0));
}

TEST_CASE("restart continues the schedule") {
  auto m = sphere_model(0);
  IterationOptions o;
  o.max_iter = 2;
  o.restart_period = 1;
  auto r = run_nash_hormander(m.data, m.init, o);
  REQUIRE(r.trace.size() == 3);
  CHECK(r.trace[2].restart == 1);
  CHECK(r.trace[2].theta == doctest::Approx(theta_at(o.schedule, 1)).epsilon(1e-14));
  o.restart_rho = 2.0;
  auto r2 = run_nash_hormander(m.data, m.init, o);
  CHECK(r2.trace[2].theta == doctest::Approx(2 * theta_at(o.schedule, 1)).epsilon(1e-14));
}

TEST_CASE("exact data leave the surface in place") {
  auto m = sphere_model(0);
  m.data = {m.init.W0, m.init.G0};
  IterationOptions o;
  o.max_iter = 1;
  auto r = run_nash_hormander(m.data, m.init, o);
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[0].stop == 0.0);
  CHECK((r.trace[1].phi.vertices - m.init.phi.vertices).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.trace[1].phidot.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Marussi violations abort with a snapshot") {
  auto m = sphere_model(0);
  IterationOptions o;
  o.max_iter = 3;
  o.marussi = 1e6;
  auto r = run_nash_hormander(m.data, m.init, o);
  CHECK(r.aborted);
  CHECK(r.abort_reason.find("Marussi") != std::string::npos);
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[1].phi.num_vertices() == m.init.phi.num_vertices());
}

TEST_CASE("icosahedral rotations commute with the iteration") {
  auto m = sphere_model(0);
  const int nv = m.init.phi.num_vertices();
  // break the radial symmetry of the data
  m.data.G += 0.01 * random_field(3, nv, 7);
  m.data.W += 0.01 * random_field(1, nv, 8);
  const Mat3 R = icosahedral_rotations()[7];
  // the rotated sphere is the same mesh with permuted vertices
  Model c = m;
  c.init.phi.vertices = R * m.init.phi.vertices;
  c.init.phi.reference = R * m.init.phi.reference;
  const auto vp = vertex_permutation(m.init.phi, R);
  for (int i = 0; i < nv; ++i)
    CHECK((c.init.phi.vertices.col(i) - m.init.phi.vertices.col(vp[i])).norm() < 1e-14);
  c.data.G = R * m.data.G;
  c.init.G0 = R * m.init.G0;
  c.init.h0 = R * m.init.h0;
  IterationOptions o;
  o.max_iter = 2;
  auto a = run_nash_hormander(m.data, m.init, o), b = run_nash_hormander(c.data, c.init, o);
  REQUIRE(a.trace.size() == 3);
  REQUIRE(b.trace.size() == 3);
  for (int s = 1; s <= 2; ++s) {
    CHECK((b.trace[s].phi.vertices - R * a.trace[s].phi.vertices).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.trace[s].G - R * a.trace[s].G).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.trace[s].W - a.trace[s].W).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.trace[s].phi.vertices - a.trace[s].phi.vertices).cwiseAbs().maxCoeff() > 1e-3);
  }
}

namespace {

// The iteration restricted to concentric spheres: every field is a degree-0
// or degree-1 harmonic, so each step reduces to scalar formulas. Returns the
// radii r_1, r_2, ... and the gravity magnitudes |G_1|, |G_2|, ...
struct Radial {
  std::vector<double> r, G;
};

Radial radial_iteration(const ScheduleParams& s, double R, int steps) {
  auto mult = [&](int m) { return std::exp(-2 / std::pow(theta_at(s, m), 2)); };
  const double Gd = -1 / (R * R);
  std::vector<double> Gm{-1.0}, acc{0.0};
  double r = 1.0, eta = 0.5, W = 1.0;
  Radial out;
  for (int m = 0; m < steps; ++m) {
    const double d = delta_at(s, m);
    const double w = m == 0 ? (1 / R - 1) / d : 0.0;
    const double g = m == 0 ? mult(0) * (Gd - Gm[0]) / d
                            : (mult(m) * (Gd - Gm[m] + acc[m]) - mult(m - 1) * (Gd - Gm[m - 1] + acc[m - 1])) / d;
    // u = c / |x| with u + eta du/dr = w + g eta on |x| = r
    const double c = (w + g * eta) * r * r / (r - eta);
    W += d * c / r;
    const double a = r * W;  // v = a / |x|
    Gm.push_back(-a / (r * r));
    acc.push_back(acc[m] + d * g);
    eta = r / 2;
    r += d * (g + c / (r * r)) * r * r * r / (2 * a);
    out.r.push_back(r);
    out.G.push_back(-Gm.back());
  }
  return out;
}

}  // namespace

TEST_CASE("first step follows the iteration on concentric spheres") {
  const Radial rad = radial_iteration({2.6, 6}, 1.1, 3);
  CHECK(rad.r[0] == doctest::Approx(1.0403).epsilon(1e-4));
  CHECK(rad.r[2] > 1.1);  // the continuous iteration overshoots the target
  auto m = sphere_model(1);
  IterationOptions o;
  o.max_iter = 1;
  const auto run = run_nash_hormander(m.data, m.init, o);
  REQUIRE(run.trace.size() == 2);
  const Eigen::VectorXd radii = run.trace[1].phi.vertices.colwise().norm().transpose();
  CHECK(std::abs(radii.mean() - rad.r[0]) < 0.01);
  CHECK(radii.maxCoeff() - radii.minCoeff() < 0.02);
}
