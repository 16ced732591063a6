#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "molo/nash_hormander.hpp"

namespace molo {

struct ExperimentConfig {
  // model_problem, model_problem_restarted, bench2d, bench3d_cube,
  // bench_sphere_linearized, smoother_report
  std::string experiment;
  int level = 2;
  std::vector<int> levels;  // benchmark refinement levels; empty: experiment default
  int p = 2;
  int p_max = 8;            // p-version of bench2d
  double theta0 = 2.6;
  double kappa = 6.0;
  int k = 1;
  double tol = 0.0;
  int max_iter = 10;
  int restart_period = 0;
  double restart_rho = 1.0;
  double radius = 1.1;      // target sphere of the model problem
  std::string output = "out";
  unsigned seed = 1;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys, malformed
// values and out-of-range parameters throw ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Inverse of parse_config.
std::string format_config(const ExperimentConfig& c);

// Model problem of a spherical earth: unit sphere start, Newton potential
// data of the sphere of radius R, h0 = x / 2.
struct ModelProblem {
  MolodenskyData data;
  InitialGuess init;
  double radius = 1.1;
};
ModelProblem model_problem(int level, double radius = 1.1);

// (1 / #nodes) [sum_i (|x_i| - R)^2]^(1/2)
double l2_surface_error(const TriangleMesh& mesh, double R);
// (1 / #nodes) [sum_i |G_m(x_i) - G(x_i)|^2]^(1/2)
double l2_g_error(const SurfaceField& Gm, const SurfaceField& G);

// Vertices of the icosphere of the given level scaled to radius r.
Points3 exterior_points(int level = 5, double r = 2.0);

// (1 / M) [sum_i |u_h(x_i) - u(x_i)|^2]^(1/2); points inside `surface`
// (when given) throw GeometryError.
double pointwise_exterior_error(const std::function<double(const Vec3&)>& uh,
                                const std::function<double(const Vec3&)>& u, const Points3& pts,
                                const TriangleMesh* surface = nullptr);

// ln(e_i / e_{i+1}) / ln(dof_{i+1} / dof_i)
std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& dofs);

// Radial step statistics between two surfaces on the same vertices.
struct RadialStep {
  double min = 0, max = 0, mean = 0;
  double spread() const { return (max - min) / std::abs(mean); }
};
RadialStep radial_step(const TriangleMesh& before, const TriangleMesh& after);

// Index of the vertex whose reference point is closest to the north pole.
int north_vertex(const TriangleMesh& mesh);

// Iteration-0 Robin problem of the model: right-hand side from the smoothed
// data on the level-`level` icosphere, and the solution of the continuous
// problem u = c / |x| for comparison.
struct LinearizedSphere {
  TriangleMesh mesh;
  FacetField h;
  SurfaceFunction f;
  double c = 0.0;
};
LinearizedSphere linearized_sphere(int level, const ScheduleParams& s, int k = 1, double radius = 1.1);

// Comma-separated file with a header row; doubles carry 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(int v);
  CsvWriter& operator<<(const std::string& v);
  void end_row();

 private:
  std::ofstream os_;
  std::vector<std::string> row_;
  size_t columns_;
};

std::string format_double(double v);

// Columns of a CSV file by header name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<double> column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

struct ExperimentResult {
  bool aborted = false;
  std::string message;
  std::vector<std::string> files;
};

// Runs the configured experiment and writes its CSV files, mesh snapshots
// and report into c.output. Timings go to timing.csv so that all other files
// are reproducible byte for byte.
ExperimentResult run_experiment(const ExperimentConfig& c,
                                const std::function<void(const std::string&)>& log = {});

}  // namespace molo
