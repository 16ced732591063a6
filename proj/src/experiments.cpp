#include "molo/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "molo/bem2d.hpp"
#include "molo/errors.hpp"

namespace molo {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return x;
}

long to_int(const std::string& key, const std::string& v) {
  long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return x;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

const std::set<std::string> kExperiments{"model_problem", "model_problem_restarted", "bench2d",
                                         "bench3d_cube", "bench_sphere_linearized", "smoother_report"};

void validate(const ExperimentConfig& c) {
  require(kExperiments.count(c.experiment) == 1, "unknown experiment '" + c.experiment + "'");
  require(c.level >= 0 && c.level <= 5, "level must lie in 0..5");
  for (int l : c.levels) require(l >= 0 && l <= 7, "levels must lie in 0..7");
  require(c.p >= 0 && c.p <= 3, "p must lie in 0..3");
  require(c.p_max >= 1 && c.p_max <= bem2d::kMaxDegree, "p_max out of range");
  require(c.theta0 > 1, "theta0 must exceed 1");
  require(c.kappa >= 1, "kappa must be at least 1");
  require(c.k >= 1 && c.k <= 8, "k must lie in 1..8");
  require(c.tol >= 0, "tol must be non-negative");
  require(c.max_iter >= 0 && c.max_iter <= 1000, "max_iter must lie in 0..1000");
  require(c.restart_period >= 0, "restart_period must be non-negative");
  require(c.restart_rho >= 1, "restart_rho must be at least 1");
  require(c.radius > 0, "radius must be positive");
  require(!c.output.empty(), "output must be set");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
    if (key == "experiment") c.experiment = v;
    else if (key == "level") c.level = static_cast<int>(to_int(key, v));
    else if (key == "levels") {
      c.levels.clear();
      std::istringstream ls(v);
      std::string item;
      while (std::getline(ls, item, ',')) c.levels.push_back(static_cast<int>(to_int(key, trim(item))));
    }
    else if (key == "p") c.p = static_cast<int>(to_int(key, v));
    else if (key == "p_max") c.p_max = static_cast<int>(to_int(key, v));
    else if (key == "theta0") c.theta0 = to_double(key, v);
    else if (key == "kappa") c.kappa = to_double(key, v);
    else if (key == "k") c.k = static_cast<int>(to_int(key, v));
    else if (key == "tol") c.tol = to_double(key, v);
    else if (key == "max_iter") c.max_iter = static_cast<int>(to_int(key, v));
    else if (key == "restart_period") c.restart_period = static_cast<int>(to_int(key, v));
    else if (key == "restart_rho") c.restart_rho = to_double(key, v);
    else if (key == "radius") c.radius = to_double(key, v);
    else if (key == "output") c.output = v;
    else if (key == "seed") {
      const long s = to_int(key, v);
      require(s >= 0 && s <= 0xffffffffL, "seed must fit 32 bits");
      c.seed = static_cast<unsigned>(s);
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment = " << c.experiment << '\n' << "level = " << c.level << '\n';
  if (!c.levels.empty()) {
    os << "levels = ";
    for (size_t i = 0; i < c.levels.size(); ++i) os << (i ? "," : "") << c.levels[i];
    os << '\n';
  }
  os << "p = " << c.p << '\n'
     << "p_max = " << c.p_max << '\n'
     << "theta0 = " << format_double(c.theta0) << '\n'
     << "kappa = " << format_double(c.kappa) << '\n'
     << "k = " << c.k << '\n'
     << "tol = " << format_double(c.tol) << '\n'
     << "max_iter = " << c.max_iter << '\n'
     << "restart_period = " << c.restart_period << '\n'
     << "restart_rho = " << format_double(c.restart_rho) << '\n'
     << "radius = " << format_double(c.radius) << '\n'
     << "output = " << c.output << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

ModelProblem model_problem(int level, double radius) {
  if (!(radius > 0)) throw ConfigError("radius must be positive");
  auto mesh = build_icosphere(level);
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  ModelProblem m;
  m.radius = radius;
  m.data.W = SurfaceField::Constant(1, nv, 1 / radius);
  m.data.G = -mesh.reference / (radius * radius);
  m.init.phi = mesh;
  m.init.W0 = SurfaceField::Ones(1, nv);
  m.init.G0 = -mesh.reference;
  m.init.h0.resize(3, nt);
  for (int t = 0; t < nt; ++t)
    m.init.h0.col(t) = (mesh.corner(t, 0) + mesh.corner(t, 1) + mesh.corner(t, 2)) / 6.0;
  m.init.v0 = [](const Vec3& x) { return 1 / x.norm(); };
  return m;
}

double l2_surface_error(const TriangleMesh& mesh, double R) {
  const int n = mesh.num_vertices();
  if (n == 0) throw Error("empty mesh");
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::pow(mesh.vertices.col(i).norm() - R, 2);
  return std::sqrt(s) / n;
}

double l2_g_error(const SurfaceField& Gm, const SurfaceField& G) {
  if (Gm.rows() != G.rows() || Gm.cols() != G.cols()) throw Error("gravity fields differ in shape");
  return nodal_norm(Gm - G);
}

Points3 exterior_points(int level, double r) { return r * build_icosphere(level).vertices; }

double pointwise_exterior_error(const std::function<double(const Vec3&)>& uh,
                                const std::function<double(const Vec3&)>& u, const Points3& pts,
                                const TriangleMesh* surface) {
  const int M = static_cast<int>(pts.cols());
  if (M == 0) throw Error("no exterior points");
  double s = 0.0;
  for (int i = 0; i < M; ++i) {
    if (surface && winding_number(*surface, pts.col(i)) > 0.5)
      throw GeometryError("exterior point " + std::to_string(i) + " lies inside the surface");
    s += std::pow(uh(pts.col(i)) - u(pts.col(i)), 2);
  }
  return std::sqrt(s) / M;
}

std::vector<double> eoc(const std::vector<double>& e, const std::vector<double>& dofs) {
  if (e.size() != dofs.size() || e.size() < 2) throw Error("eoc needs two or more matching levels");
  std::vector<double> r;
  for (size_t i = 0; i + 1 < e.size(); ++i) {
    if (!(e[i] > 0) || !(e[i + 1] > 0)) throw Error("eoc needs positive errors");
    if (!(dofs[i + 1] > dofs[i]) || !(dofs[i] > 0)) throw Error("eoc needs increasing DOF counts");
    r.push_back(std::log(e[i] / e[i + 1]) / std::log(dofs[i + 1] / dofs[i]));
  }
  return r;
}

RadialStep radial_step(const TriangleMesh& before, const TriangleMesh& after) {
  const int n = before.num_vertices();
  if (n == 0 || after.num_vertices() != n) throw Error("surfaces differ in vertex count");
  RadialStep r{1e300, -1e300, 0.0};
  for (int i = 0; i < n; ++i) {
    const double d = after.vertices.col(i).norm() - before.vertices.col(i).norm();
    r.min = std::min(r.min, d);
    r.max = std::max(r.max, d);
    r.mean += d / n;
  }
  return r;
}

int north_vertex(const TriangleMesh& mesh) {
  int best = 0;
  for (int i = 1; i < mesh.num_vertices(); ++i)
    if (mesh.reference(2, i) > mesh.reference(2, best)) best = i;
  return best;
}

LinearizedSphere linearized_sphere(int level, const ScheduleParams& s, int k, double radius) {
  const ModelProblem m = model_problem(level, radius);
  const LBSpectrum spec = reference_spectrum(m.init.phi);
  const SurfaceField Wd = smoothed_increment_W(m.data.W, m.init.W0, 0, 0, s, k, spec);
  const SurfaceField Gd = smoothed_increment_G(m.data.G, start_accumulator(m.init.G0), s, k, spec);
  LinearizedSphere L;
  L.mesh = m.init.phi;
  L.h = m.init.h0;
  L.f = build_rhs_robin(L.mesh, Wd, Gd, L.h);
  // continuous data: degree-1 harmonics carry the multiplier exp(-2^k / theta^2k)
  const double mult = std::exp(-std::pow(2.0, k) / std::pow(s.theta0, 2 * k));
  const double f = ((1 / radius - 1) + mult * (1 - 1 / (radius * radius)) / 2) / delta_at(s, 0);
  L.c = 2 * f;  // u + x/2 . grad u = c/2 on the unit sphere
  return L;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path), columns_(header.size()) {
  if (!os_) throw Error("cannot write " + path);
  for (size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
  os_ << '\n';
  os_.flush();
}

CsvWriter& CsvWriter::operator<<(double v) {
  row_.push_back(format_double(v));
  return *this;
}

CsvWriter& CsvWriter::operator<<(int v) {
  row_.push_back(std::to_string(v));
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  row_.push_back(v);
  return *this;
}

void CsvWriter::end_row() {
  if (row_.size() != columns_) throw Error("csv row has the wrong number of cells");
  for (size_t i = 0; i < row_.size(); ++i) os_ << (i ? "," : "") << row_[i];
  os_ << '\n';
  os_.flush();
  row_.clear();
}

std::vector<double> CsvTable::column(const std::string& name) const {
  size_t j = 0;
  while (j < header.size() && header[j] != name) ++j;
  if (j == header.size()) throw ParseError("no column '" + name + "'");
  std::vector<double> out;
  for (const auto& r : rows) {
    if (j >= r.size() || r[j].empty()) continue;
    out.push_back(to_double(name, r[j]));
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read " + path);
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::istringstream ls(l);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(trim(c));
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(is, line)) throw ParseError(path + " is empty");
  t.header = split(trim(line));
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    t.rows.push_back(split(trim(line)));
    if (t.rows.back().size() != t.header.size())
      throw ParseError(path + ": row " + std::to_string(t.rows.size()) + " has the wrong number of cells");
  }
  return t;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Out {
  fs::path dir;
  ExperimentResult* res;
  std::string file(const std::string& name) {
    res->files.push_back((dir / name).string());
    return (dir / name).string();
  }
};

void run_model(const ExperimentConfig& c, Out& out, ExperimentResult& res,
               const std::function<void(const std::string&)>& log) {
  const ModelProblem mp = model_problem(c.level, c.radius);
  IterationOptions o;
  o.schedule = {c.theta0, c.kappa};
  o.smoother_k = c.k;
  o.p = c.p;
  o.max_iter = c.max_iter;
  o.tol = c.tol;
  o.restart_period = c.restart_period;
  if (c.experiment == "model_problem_restarted" && o.restart_period == 0) o.restart_period = 1;
  o.restart_rho = c.restart_rho;

  fs::create_directories(out.dir / "meshes");
  CsvWriter trace(out.file("trace.csv"),
                  {"step", "restart", "theta", "delta", "phi_error", "g_error", "stop", "min_det",
                   "north_height", "radial_min", "radial_max", "radial_spread"});
  CsvWriter timing(out.file("timing.csv"), {"step", "seconds"});
  const int north = north_vertex(mp.init.phi);
  TriangleMesh prev = mp.init.phi;
  auto on_step = [&](const StepRecord& r) {
    trace << r.step << r.restart << r.theta << r.delta << l2_surface_error(r.phi, c.radius);
    if (r.G.cols())
      trace << l2_g_error(r.G, mp.data.G) << r.stop;
    else
      trace << std::string() << std::string();
    trace << r.min_det << r.phi.vertices(2, north);
    if (r.step >= 0 && r.G.cols()) {
      const RadialStep s = radial_step(prev, r.phi);
      trace << s.min << s.max << s.spread();
    } else {
      trace << std::string() << std::string() << std::string();
    }
    trace.end_row();
    timing << r.step << r.seconds;
    timing.end_row();
    char name[32];
    std::snprintf(name, sizeof name, "step_%03d.mesh", r.step + 1);
    export_mesh(r.phi, (out.dir / "meshes" / name).string());
    prev = r.phi;
    if (log)
      log("step " + std::to_string(r.step) + ": phi error " + format_double(l2_surface_error(r.phi, c.radius)) +
          ", north " + format_double(r.phi.vertices(2, north)) + ", " + format_double(r.seconds) + " s");
  };
  const RunResult rr = run_nash_hormander(mp.data, mp.init, o, on_step);
  res.aborted = rr.aborted;
  res.message = rr.aborted ? rr.abort_reason : rr.converged ? "converged" : "iteration limit reached";
}

void run_bench2d(const ExperimentConfig& c, Out& out, const std::function<void(const std::string&)>& log) {
  using namespace bem2d;
  const auto f = [](const Vec2& x) { return std::log(x.norm()); };
  std::vector<int> levels = c.levels.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6} : c.levels;
  require(levels.size() >= 3, "bench2d needs three or more levels");

  CsvWriter h(out.file("bench2d_h.csv"), {"p", "n", "dof", "energy", "gap", "error", "eoc"});
  for (int p = 0; p <= 3; ++p) {
    std::vector<Boundary> b;
    for (int l : levels) b.push_back(square(1 << l));
    std::vector<Solution> s;
    for (const auto& bd : b) s.push_back(solve_dirichlet_2d(bd, p, f));
    std::vector<double> gaps, dofs;
    for (size_t i = 1; i < s.size(); ++i) gaps.push_back(energy_gap(s[i - 1], s[i]));
    for (const auto& bd : b) dofs.push_back(bd.num_elements() * (p + 1));
    const auto e = energy_errors_from_gaps(gaps);
    // the finest error is the extrapolated tail alone and carries no rate
    const auto r = eoc(std::vector<double>(e.begin(), e.end() - 1),
                       std::vector<double>(dofs.begin(), dofs.end() - 1));
    for (size_t i = 0; i < b.size(); ++i) {
      h << p << (1 << levels[i]) << static_cast<int>(dofs[i]) << s[i].energy
        << (i ? format_double(gaps[i - 1]) : std::string()) << e[i]
        << (i >= 1 && i - 1 < r.size() ? format_double(r[i - 1]) : std::string());
      h.end_row();
    }
    if (log) log("bench2d h-version p = " + std::to_string(p) + " done");
  }

  CsvWriter pv(out.file("bench2d_p.csv"), {"p", "n", "dof", "energy", "gap", "error"});
  {
    const Boundary b = square(5);  // h = 0.2
    std::vector<Solution> s;
    for (int p = 0; p <= c.p_max; ++p) s.push_back(solve_dirichlet_2d(b, p, f));
    std::vector<double> gaps;
    for (size_t i = 1; i < s.size(); ++i) gaps.push_back(energy_gap(s[i - 1], s[i]));
    // errors sum the remaining gaps; beyond the round-off floor they stop carrying
    // information, so no tail is added
    std::vector<double> err(s.size(), 0.0);
    double tail = 0.0;
    for (size_t i = s.size() - 1; i-- > 0;) {
      tail += std::max(gaps[i], 0.0);
      err[i] = std::sqrt(tail);
    }
    for (size_t i = 0; i < s.size(); ++i) {
      pv << static_cast<int>(i) << 5 << b.num_elements() * static_cast<int>(i + 1) << s[i].energy
         << (i ? format_double(gaps[i - 1]) : std::string())
         << (i + 1 < s.size() ? format_double(err[i]) : std::string());
      pv.end_row();
    }
    if (log) log("bench2d p-version done");
  }

  CsvWriter hs(out.file("hessian2d.csv"), {"p", "n", "dof", "error", "trace", "norm"});
  const Vec2 x(0.5, 1.0 / 3);
  const double r2 = x.squaredNorm();
  const Mat2 H = (Mat2::Identity() * r2 - 2 * x * x.transpose()) / (r2 * r2);
  for (int n : {4, 8, 16, 32, 64}) {
    const Boundary b = square(n);
    const Solution s = solve_dirichlet_2d(b, c.p, f);
    const auto [e, t] = locate(b, x);
    const Mat2 Hh = hessian_fd(s.mu, e, t);
    hs << c.p << n << b.num_elements() * (c.p + 1) << (Hh - H).norm() << Hh.trace() << Hh.norm();
    hs.end_row();
  }
}

void run_bench3d(const ExperimentConfig& c, Out& out, const std::function<void(const std::string&)>& log) {
  std::vector<int> levels = c.levels.empty() ? std::vector<int>{0, 1, 2, 3} : c.levels;
  CsvWriter hs(out.file("hessian3d.csv"), {"level", "dof", "error", "trace", "norm"});
  CsvWriter timing(out.file("timing.csv"), {"level", "seconds"});
  const Vec3 x(1, 1.0 / 3, 1.0 / 3);
  const double r = x.norm();
  const Mat3 H = (3 * x * x.transpose() - r * r * Mat3::Identity()) / std::pow(r, 5);
  for (int l : levels) {
    const auto t0 = Clock::now();
    auto sp = make_space(build_cube(l), c.p);
    const Eigen::MatrixXd V = assemble_slp(*sp);
    const Eigen::VectorXd b = load_vector(*sp, [](int, double, double, const Vec3& y) { return 1 / y.norm(); });
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw SolverError("cube single layer matrix is not positive definite");
    const DGDensity mu{sp, llt.solve(b)};
    const SurfacePoint q = locate(sp->mesh, x);
    const Mat3 Hh = eval_hessian_fd(mu, q.t, q.xi, q.eta).H;
    hs << l << sp->dim() << (Hh - H).norm() << Hh.trace() << Hh.norm();
    hs.end_row();
    timing << l << seconds_since(t0);
    timing.end_row();
    if (log) log("cube level " + std::to_string(l) + ": error " + format_double((Hh - H).norm()));
  }
}

void run_linearized(const ExperimentConfig& c, Out& out, std::vector<std::string>& report,
                    const std::function<void(const std::string&)>& log) {
  std::vector<int> levels = c.levels.empty() ? std::vector<int>{0, 1, 2, 3} : c.levels;
  const Points3 pts = exterior_points(5, 2.0);
  report.push_back("exterior_points = level-5 icosphere vertices at radius 2 (M = " +
                   std::to_string(pts.cols()) + ")");
  report.push_back("reference = continuous solution c / |x| of the iteration-0 problem");
  CsvWriter tab(out.file("linearized_sphere.csv"), {"iteration", "level", "dof", "error", "eoc"});
  CsvWriter timing(out.file("timing.csv"), {"level", "seconds"});
  std::vector<double> errs, dofs;
  for (int l : levels) {
    const auto t0 = Clock::now();
    const LinearizedSphere L = linearized_sphere(l, {c.theta0, c.kappa}, c.k, c.radius);
    const auto sp = make_space(L.mesh, c.p);
    const SolveResult u = solve_robin(sp, L.h, L.f);
    const LayerEvaluator ev(u.mu);
    const double cc = L.c;
    const double e = pointwise_exterior_error([&](const Vec3& y) { return ev.potential(y); },
                                              [cc](const Vec3& y) { return cc / y.norm(); }, pts, &L.mesh);
    errs.push_back(e);
    dofs.push_back(sp->dim());
    const auto r = errs.size() > 1 ? eoc(errs, dofs) : std::vector<double>{};
    tab << 0 << l << sp->dim() << e << (r.empty() ? std::string() : format_double(r.back()));
    tab.end_row();
    timing << l << seconds_since(t0);
    timing.end_row();
    if (log) log("sphere level " + std::to_string(l) + ": error " + format_double(e));
  }
}

void run_smoother(const ExperimentConfig& c, Out& out, std::vector<std::string>& report) {
  const LBSpectrum spec = compute_spectrum(build_icosphere(c.level));
  const PropertyReport rep = smoothing_property_report(spec, c.k, {2, 4, 8, 16}, {0, 1, 2, 3, 4}, 8, c.seed);
  write_property_csv(rep, out.file("smoother.csv"));
  report.push_back("semigroup_error = " + format_double(rep.semigroup_error));
  report.push_back("constant_error = " + format_double(rep.constant_error));
  report.push_back(std::string("contraction = ") + (rep.contraction ? "yes" : "no"));
  report.push_back(std::string("monotone = ") + (rep.monotone ? "yes" : "no"));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c,
                                const std::function<void(const std::string&)>& log) {
  validate(c);
  ExperimentResult res;
  Out out{fs::path(c.output), &res};
  fs::create_directories(out.dir);
  {
    std::ofstream cfg(out.file("config.txt"));
    cfg << format_config(c);
  }
  std::vector<std::string> report{"experiment = " + c.experiment};
  try {
    if (c.experiment == "model_problem" || c.experiment == "model_problem_restarted")
      run_model(c, out, res, log);
    else if (c.experiment == "bench2d")
      run_bench2d(c, out, log);
    else if (c.experiment == "bench3d_cube")
      run_bench3d(c, out, log);
    else if (c.experiment == "bench_sphere_linearized")
      run_linearized(c, out, report, log);
    else
      run_smoother(c, out, report);
  } catch (const NumericalAbort& e) {
    res.aborted = true;
    res.message = e.what();
  } catch (const SolverError& e) {
    res.aborted = true;
    res.message = e.what();
  }
  report.push_back(std::string("status = ") + (res.aborted ? "aborted" : "ok"));
  if (!res.message.empty()) report.push_back("message = " + res.message);
  std::ofstream rep(out.file("report.txt"));
  for (const auto& l : report) rep << l << '\n';
  return res;
}

}  // namespace molo
