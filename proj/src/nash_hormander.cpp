#include "molo/nash_hormander.hpp"

#include <chrono>
#include <cmath>

#include "molo/errors.hpp"

namespace molo {

double theta_at(const ScheduleParams& s, int m) {
  if (!(s.theta0 > 1) || !(s.kappa >= 1)) throw ConfigError("schedule needs theta0 > 1 and kappa >= 1");
  if (m < 0) throw Error("negative step index");
  // (theta0^kappa + m)^(1/kappa) without overflow for large kappa
  return s.theta0 * std::exp(std::log1p(m * std::exp(-s.kappa * std::log(s.theta0))) / s.kappa);
}

double delta_at(const ScheduleParams& s, int m) { return theta_at(s, m + 1) - theta_at(s, m); }

SurfaceField smoothed_increment_W(const SurfaceField& W, const SurfaceField& W0, int m, int m0,
                                  const ScheduleParams& s, int k, const LBSpectrum& spec) {
  if (m < m0) throw StateError("step precedes the start of its leg");
  const SurfaceField d = W - W0;
  const double delta = delta_at(s, m);
  if (m == m0) return smooth(d, {theta_at(s, m), k}, spec) / delta;
  return (smooth(d, {theta_at(s, m), k}, spec) - smooth(d, {theta_at(s, m - 1), k}, spec)) / delta;
}

GAccumulator start_accumulator(const SurfaceField& G0, int m0) {
  GAccumulator a;
  a.acc = SurfaceField::Zero(G0.rows(), G0.cols());
  a.acc_prev = a.acc;
  a.G_cur = G0;
  a.G_prev = G0;
  a.m0 = a.m = m0;
  return a;
}

SurfaceField smoothed_increment_G(const SurfaceField& G, const GAccumulator& a,
                                  const ScheduleParams& s, int k, const LBSpectrum& spec) {
  const int m = a.m;
  SurfaceField out = smooth(G - a.G_cur + a.acc, {theta_at(s, m), k}, spec);
  if (m > a.m0) out -= smooth(G - a.G_prev + a.acc_prev, {theta_at(s, m - 1), k}, spec);
  return out / delta_at(s, m);
}

void advance_accumulator(GAccumulator& a, const SurfaceField& Gdot, double delta,
                         const SurfaceField& G_next) {
  if (Gdot.rows() != a.acc.rows() || Gdot.cols() != a.acc.cols() || G_next.cols() != a.acc.cols())
    throw StateError("accumulator and increment shapes differ");
  a.acc_prev = a.acc;
  a.acc += delta * Gdot;
  a.G_prev = a.G_cur;
  a.G_cur = G_next;
  ++a.m;
}

namespace {

NodalField sample(const LayerEvaluator& ev, const Points3& x, const Points3& n, const Points3& tan,
                  const Eigen::VectorXd& scale, const HarmonicFit& fit) {
  const int np = static_cast<int>(x.cols());
  NodalField f{SurfaceField(1, np), SurfaceField(3, np), SurfaceField(9, np)};
  for (int i = 0; i < np; ++i) {
    const ExteriorLimit e = exterior_limit(ev, x.col(i), n.col(i), scale[i], fit, tan.col(i));
    f.u(0, i) = e.u;
    f.g.col(i) = e.g;
    f.H.col(i) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(e.H.data());
  }
  return f;
}

Mat3 hessian_at(const NodalField& f, int i) { return Eigen::Map<const Mat3>(f.H.col(i).data()); }

}  // namespace

NodalField nodal_field(const LayerEvaluator& ev, const HarmonicFit& fit) {
  const auto& mesh = ev.density().space->mesh;
  // fit cones are oriented by the mesh so that they rotate with it
  Points3 tan = Points3::Zero(3, mesh.num_vertices());
  Eigen::VectorXi done = Eigen::VectorXi::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int c = 0; c < 3; ++c) {
      const int v = mesh.triangles(c, t);
      if (done[v]) continue;
      done[v] = 1;
      tan.col(v) = mesh.vertices.col(mesh.triangles((c + 1) % 3, t)) - mesh.vertices.col(v);
    }
  return sample(ev, mesh.vertices, vertex_normals(mesh), tan, vertex_edge_scale(mesh), fit);
}

NodalField centroid_field(const LayerEvaluator& ev, const HarmonicFit& fit) {
  const auto& mesh = ev.density().space->mesh;
  const int nt = mesh.num_triangles();
  Points3 c(3, nt), n(3, nt), tan(3, nt);
  Eigen::VectorXd scale(nt);
  for (int t = 0; t < nt; ++t) {
    const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), d = mesh.corner(t, 2);
    c.col(t) = (a + b + d) / 3.0;
    n.col(t) = (b - a).cross(d - a).normalized();
    tan.col(t) = b - a;
    scale[t] = ((b - a).norm() + (d - b).norm() + (a - d).norm()) / 3.0;
  }
  return sample(ev, c, n, tan, scale, fit);
}

double nodal_norm(const SurfaceField& f) {
  if (f.cols() == 0) throw Error("empty field");
  return f.norm() / static_cast<double>(f.cols());
}

LBSpectrum reference_spectrum(const TriangleMesh& mesh) {
  TriangleMesh ref = mesh;
  ref.vertices = mesh.reference;
  return compute_spectrum(ref);
}

RunResult run_nash_hormander(const MolodenskyData& data, const InitialGuess& init,
                             const IterationOptions& opt,
                             const std::function<void(const StepRecord&)>& on_step) {
  const int nv = init.phi.num_vertices(), nt = init.phi.num_triangles();
  if (data.W.rows() != 1 || data.W.cols() != nv || data.G.rows() != 3 || data.G.cols() != nv)
    throw ConfigError("gravity data do not live on the initial surface");
  if (init.W0.rows() != 1 || init.W0.cols() != nv || init.G0.rows() != 3 || init.G0.cols() != nv ||
      init.h0.rows() != 3 || init.h0.cols() != nt || !init.v0)
    throw ConfigError("initial guess is incomplete");
  if (opt.max_iter < 0 || opt.restart_period < 0 || opt.smoother_k < 1 || !(opt.restart_rho >= 1))
    throw ConfigError("invalid iteration options");
  theta_at(opt.schedule, 0);

  const LBSpectrum spec = reference_spectrum(init.phi);
  RunResult res;
  StepRecord first;
  first.theta = theta_at(opt.schedule, 0);
  first.delta = delta_at(opt.schedule, 0);
  first.phi = init.phi;
  first.G = init.G0;
  first.W = init.W0;
  first.stop = nodal_norm(init.G0 - data.G) + nodal_norm(init.W0 - data.W);
  res.trace.push_back(first);
  if (on_step) on_step(first);
  if (first.stop < opt.tol) {
    res.converged = true;
    return res;
  }

  InitialGuess leg = init;
  TriangleMesh mesh = init.phi;
  FacetField h = init.h0;
  GAccumulator acc = start_accumulator(init.G0, 0);
  std::vector<HistoryEntry> history;
  ScheduleParams sched = opt.schedule;  // of the current leg, indexed from its start
  int restart = 0, leg_start = 0;
  for (int m = 0; m < opt.max_iter; ++m) {
    const auto t0 = std::chrono::steady_clock::now();
    const int j = m - leg_start;
    StepRecord rec;
    rec.step = m;
    rec.restart = restart;
    rec.theta = theta_at(sched, j);
    rec.delta = delta_at(sched, j);
    try {
      const SurfaceField Wdot = smoothed_increment_W(data.W, leg.W0, j, 0, sched, opt.smoother_k, spec);
      const SurfaceField Gdot = smoothed_increment_G(data.G, acc, sched, opt.smoother_k, spec);

      const auto space = make_space(mesh, opt.p);
      const SurfaceOperators ops = assemble_surface(space, h, opt.quad);
      const SolveResult u = solve_robin(ops, build_rhs_robin(mesh, Wdot, Gdot, h), opt.quad);
      history.push_back({u.mu, rec.delta});
      const SolveResult v = solve_dirichlet(ops, accumulate_w(history, leg.v0, leg.phi, mesh), opt.quad);
      rec.a_robin = u.a;
      rec.a_dirichlet = v.a;

      const LayerEvaluator ev_u(u.mu, opt.eval), ev_v(v.mu, opt.eval);
      const NodalField gu = nodal_field(ev_u, opt.fit);
      const NodalField gv = nodal_field(ev_v, opt.fit);
      const NodalField cv = centroid_field(ev_v, opt.fit);

      std::vector<Mat3> hs;
      for (int i = 0; i < nv; ++i) hs.push_back(hessian_at(gv, i));
      for (int t = 0; t < nt; ++t) hs.push_back(hessian_at(cv, t));
      const MarussiReport mr = check_marussi(hs, opt.marussi);
      rec.min_det = mr.min_abs_det;
      if (!mr.flagged.empty())
        throw NumericalAbort("Marussi condition violated: |det grad g| = " +
                             std::to_string(mr.min_abs_det) + " at step " + std::to_string(m));

      rec.phidot.resize(3, nv);
      for (int i = 0; i < nv; ++i)
        rec.phidot.col(i) = hessian_at(gv, i).inverse() * (Gdot.col(i) - gu.g.col(i));
      TriangleMesh next = update_surface(mesh, rec.phidot, rec.delta);
      FacetField h_next(3, nt);
      for (int t = 0; t < nt; ++t) h_next.col(t) = -(hessian_at(cv, t).inverse() * cv.g.col(t));

      rec.G = gv.g;
      rec.W = gv.u;
      rec.stop = nodal_norm(gv.g - data.G) + nodal_norm(gv.u - data.W);
      advance_accumulator(acc, Gdot, rec.delta, gv.g);
      mesh = std::move(next);
      h = std::move(h_next);
      rec.phi = mesh;

      if (opt.restart_period > 0 && (m + 1) % opt.restart_period == 0 && m + 1 < opt.max_iter) {
        // the last exterior potential seeds the next leg
        auto ev = std::make_shared<const LayerEvaluator>(v.mu, opt.eval);
        leg.v0 = [ev](const Vec3& x) { return ev->potential(x); };
        leg.phi = mesh;
        leg.W0.resize(1, nv);
        for (int i = 0; i < nv; ++i) leg.W0(0, i) = ev->potential(mesh.vertices.col(i));
        leg.G0 = gv.g;
        leg.h0 = h;
        acc = start_accumulator(gv.g, 0);
        sched.theta0 = opt.restart_rho * theta_at(sched, j + 1);
        leg_start = m + 1;
        history.clear();
        ++restart;
      }
    } catch (const NumericalAbort& e) {
      res.aborted = true;
      res.abort_reason = e.what();
    } catch (const SolverError& e) {
      res.aborted = true;
      res.abort_reason = e.what();
    } catch (const GeometryError& e) {
      res.aborted = true;
      res.abort_reason = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.aborted) {
      rec.phi = mesh;
      res.trace.push_back(rec);
      if (on_step) on_step(rec);
      return res;
    }
    res.trace.push_back(rec);
    if (on_step) on_step(rec);
    if (rec.stop < opt.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace molo
