#pragma once

#include <functional>
#include <string>
#include <vector>

#include "molo/field_eval.hpp"
#include "molo/galerkin.hpp"
#include "molo/smoothing.hpp"

namespace molo {

struct ScheduleParams {
  double theta0 = 2.6;
  double kappa = 6.0;
};

// theta_m = (theta0^kappa + m)^(1/kappa).
double theta_at(const ScheduleParams& s, int m);
// Delta_m = theta_{m+1} - theta_m.
double delta_at(const ScheduleParams& s, int m);

// Given gravity data on the reference sphere: W (1 x nv) and G (3 x nv).
struct MolodenskyData {
  SurfaceField W, G;
};

// Starting point of a (re)started iteration.
struct InitialGuess {
  TriangleMesh phi;             // phi_0, vertices matched to the reference
  SurfaceField W0, G0;          // nodal
  FacetField h0;                // 3 x triangles
  std::function<double(const Vec3&)> v0;  // harmonic potential with v0 o phi_0 = W0
};

// First step of a leg (m == m0): S_theta_m((W - W0) / Delta_m); later steps:
// the difference of successive smoothings of W - W0 divided by Delta_m.
SurfaceField smoothed_increment_W(const SurfaceField& W, const SurfaceField& W0, int m, int m0,
                                  const ScheduleParams& s, int k, const LBSpectrum& spec);

// Running sums of past G increments of one leg; acc = sum_{j<m} Delta_j Gdot_j.
struct GAccumulator {
  SurfaceField acc, acc_prev;
  SurfaceField G_cur, G_prev;  // G_m, G_{m-1}
  int m0 = 0;                  // schedule index of the leg's first step
  int m = 0;                   // schedule index of the next step
};

GAccumulator start_accumulator(const SurfaceField& G0, int m0 = 0);

// Gdot_m from S_theta_m(G - G_m + acc_m) - S_theta_{m-1}(G - G_{m-1} + acc_{m-1}),
// the first term of a leg being S_theta_m0(G - G_0) alone, divided by Delta_m.
SurfaceField smoothed_increment_G(const SurfaceField& G, const GAccumulator& a,
                                  const ScheduleParams& s, int k, const LBSpectrum& spec);

// Records Gdot_m and the next gravity vector G_{m+1}.
void advance_accumulator(GAccumulator& a, const SurfaceField& Gdot, double delta,
                         const SurfaceField& G_next);

struct IterationOptions {
  ScheduleParams schedule;
  int smoother_k = 1;
  int p = 2;
  int max_iter = 10;
  double tol = 0.0;
  int restart_period = 0;       // 0: no restarts
  double restart_rho = 1.0;     // next leg starts at theta0 = rho * theta_k; 1 continues the schedule
  double marussi = kMarussiThreshold;
  HarmonicFit fit;
  QuadratureOptions quad;
  EvalOptions eval;
};

// Diagnostics of one state; step = -1 for the initial state.
struct StepRecord {
  int step = -1;
  int restart = 0;
  double theta = 0.0, delta = 0.0;
  double stop = 0.0;          // ||g o phi - G|| + ||v o phi - W||
  double min_det = 0.0;
  double seconds = 0.0;
  Vec3 a_robin = Vec3::Zero(), a_dirichlet = Vec3::Zero();
  TriangleMesh phi;           // phi_{m+1}
  SurfaceField G;             // G_{m+1} = g_m o phi_m
  SurfaceField W;             // v_m o phi_m
  SurfaceField phidot;        // 3 x nv
};

struct RunResult {
  std::vector<StepRecord> trace;
  bool converged = false;
  bool aborted = false;
  std::string abort_reason;
};

// Nodal value, gradient and Hessian of a single layer at the vertices of
// its surface, continued from the exterior.
struct NodalField {
  SurfaceField u, g, H;  // 1, 3, 9 rows; H column-major per vertex
};
NodalField nodal_field(const LayerEvaluator& ev, const HarmonicFit& fit = {});

// The same at facet centroids.
NodalField centroid_field(const LayerEvaluator& ev, const HarmonicFit& fit = {});

// Discrete norm (1 / #nodes) sqrt(sum_i |f_i|^2) used by the stopping rule.
double nodal_norm(const SurfaceField& f);

RunResult run_nash_hormander(const MolodenskyData& data, const InitialGuess& init,
                             const IterationOptions& opt,
                             const std::function<void(const StepRecord&)>& on_step = {});

// Spectrum of the reference sphere the data live on.
LBSpectrum reference_spectrum(const TriangleMesh& mesh);

}  // namespace molo
