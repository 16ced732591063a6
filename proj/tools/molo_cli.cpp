#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

#include "molo/errors.hpp"
#include "molo/experiments.hpp"

using namespace molo;

namespace {

int run(const std::string& path, const std::set<std::string>& allowed) {
  const ExperimentConfig c = load_config(path);
  if (!allowed.count(c.experiment)) throw ConfigError("experiment '" + c.experiment + "' does not belong to this command");
  const ExperimentResult r = run_experiment(c, [](const std::string& s) { std::cerr << s << '\n'; });
  for (const auto& f : r.files) std::cout << f << '\n';
  if (r.aborted) {
    std::cerr << "aborted: " << r.message << '\n';
    return 2;
  }
  return 0;
}

int print_eoc(const std::string& path, const std::string& err_col, const std::string& dof_col) {
  const CsvTable t = read_csv(path);
  const auto e = t.column(err_col), d = t.column(dof_col);
  const auto r = eoc(e, d);
  std::printf("%s,%s,eoc\n", dof_col.c_str(), err_col.c_str());
  for (size_t i = 0; i < e.size(); ++i)
    std::printf("%s,%s,%s\n", format_double(d[i]).c_str(), format_double(e[i]).c_str(),
                i ? format_double(r[i - 1]).c_str() : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smoothed Nash-Hormander iteration for the Molodensky problem"};
  app.require_subcommand(1);
  std::string config, csv, err_col = "error", dof_col = "dof";
  auto* solve = app.add_subcommand("solve", "model problem, optionally restarted");
  solve->add_option("config", config)->required();
  auto* b2 = app.add_subcommand("bench2d", "2D square benchmark");
  b2->add_option("config", config)->required();
  auto* b3 = app.add_subcommand("bench3d", "3D cube Hessian or linearized sphere benchmark");
  b3->add_option("config", config)->required();
  auto* sm = app.add_subcommand("smoother-report", "smoothing property constants");
  sm->add_option("config", config)->required();
  auto* ec = app.add_subcommand("eoc", "orders of convergence of an error column");
  ec->add_option("csv", csv)->required();
  ec->add_option("--error", err_col, "error column");
  ec->add_option("--dof", dof_col, "DOF column");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (*solve) return run(config, {"model_problem", "model_problem_restarted"});
    if (*b2) return run(config, {"bench2d"});
    if (*b3) return run(config, {"bench3d_cube", "bench_sphere_linearized"});
    if (*sm) return run(config, {"smoother_report"});
    return print_eoc(csv, err_col, dof_col);
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
