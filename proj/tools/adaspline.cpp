#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adaspline/adapt.hpp"
#include "adaspline/asymptotics.hpp"
#include "adaspline/io.hpp"
#include "adaspline/kernels.hpp"
#include "adaspline/numeric.hpp"
#include "adaspline/sim.hpp"
#include "adaspline/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adaspline {
namespace {

// Usage problems detected after CLI11 parsing (bad values, missing inputs).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitArgs {
  std::string input, penalty, criterion = "gcv", lambda = "auto", out, grid_out;
  int m = 2;
  std::size_t grid = 201;
  bool rescale = false;
};

struct AdaptArgs {
  std::string input, out, grid_out;
  int m = 2;
  std::vector<std::size_t> S{0, 2, 4, 8};
  std::vector<double> gamma{1.0, 2.0, 4.0};
  std::size_t density_grid = 100;
  bool rescale = false;
};

struct SimArgs {
  std::string scenario, methods = "ss,eqk,adss", out, bands, median, replicates_out;
  std::size_t replicates = 100;
  std::optional<std::uint64_t> seed;
  int adss_m = 1;
};

struct KernelArgs {
  int m = 2;
  double beta = 10.0;
  std::size_t grid = 101;
  std::string out, l_out, penalty;
  double l_range = 10.0;
};

struct VerifyArgs {
  int m = 2;
  std::size_t n = 500;
  double lambda = 1e-5, t0 = 0.5;
  std::string out, penalty;
};

std::string default_grid_path(const std::string& out) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "_grid.csv")).string();
}

PiecewisePenalty load_penalty(const std::string& path) {
  return path.empty() ? PiecewisePenalty::uniform() : read_penalty(path);
}

int run_fit(const FitArgs& a) {
  const Criterion criterion = [&] {
    try {
      return parse_criterion(a.criterion);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  std::optional<double> fixed;
  if (a.lambda != "auto") {
    try {
      std::size_t used = 0;
      fixed = std::stod(a.lambda, &used);
      if (used != a.lambda.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("--lambda must be 'auto' or a number, got '" + a.lambda + "'");
    }
  }
  const DesignFile file = read_design(a.input, a.rescale);
  const PiecewisePenalty penalty = load_penalty(a.penalty);
  auto gram = std::make_shared<const GramContext>(gram_matrix(file.design.t, penalty, a.m));
  const double lambda = fixed ? *fixed : select_lambda(LambdaProfile(file.design, *gram), criterion);
  const SplineFit f = fit(file.design, gram, lambda);

  const std::string grid_path = a.grid_out.empty() ? default_grid_path(a.out) : a.grid_out;
  const json config = {{"command", "fit"},      {"input", a.input},   {"m", a.m},
                       {"lambda", a.lambda},    {"penalty", a.penalty}, {"criterion", to_string(criterion)},
                       {"out", a.out},          {"grid_out", grid_path}, {"grid_size", a.grid},
                       {"rescale", a.rescale}};
  json result = to_json(f);
  result["lambda_selected"] = !fixed.has_value();
  result["rescale"] = {{"applied", file.rescaled}, {"t_min", file.t_min}, {"t_max", file.t_max}};
  result["grid_csv"] = grid_path;
  write_json(a.out, with_metadata(result, config));

  CsvWriter csv(grid_path, config, {"t", "fhat"});
  for (double t : linspace(0.0, 1.0, a.grid)) csv.row(std::vector<double>{t, predict(f, t)});
  csv.close();
  const auto rep = check_optimality(f);
  std::printf("lambda=%s hat_trace=%s optimality=%s\n", format_double(lambda).c_str(),
              format_double(f.hat_trace).c_str(), rep.passed ? "pass" : "FAIL");
  return rep.passed ? 0 : 1;
}

int run_adapt(const AdaptArgs& a) {
  AdaptConfig cfg;
  cfg.m = a.m;
  cfg.S_grid = a.S;
  cfg.gamma_grid = a.gamma;
  cfg.density_grid_size = a.density_grid;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const DesignFile file = read_design(a.input, a.rescale);
  const AdaptResult res = adapt_fit(file.design, cfg);

  const std::string grid_path = a.grid_out.empty() ? default_grid_path(a.out) : a.grid_out;
  const json config = {{"command", "adapt-fit"}, {"input", a.input}, {"m", a.m},         {"S", a.S},
                       {"gamma", a.gamma},       {"density_grid", a.density_grid},       {"out", a.out},
                       {"grid_out", grid_path},  {"rescale", a.rescale}};
  json result = {{"selected", {{"S", res.selected_S}, {"gamma", res.selected_gamma}}},
                 {"penalty", to_json(res.penalty)},
                 {"lambda", res.fit.lambda},
                 {"gaic_table", to_json(res.gaic_table)},
                 {"optimality", to_json(res.optimality)},
                 {"variance", {{"bandwidth", res.variance.bandwidth}, {"pilot_lambda", res.variance.pilot_lambda},
                               {"floor", res.variance.floor}}},
                 {"f2m_lambda", res.f2m.lambda},
                 {"fit", to_json(res.fit)},
                 {"rescale", {{"applied", file.rescaled}, {"t_min", file.t_min}, {"t_max", file.t_max}}},
                 {"grid_csv", grid_path}};
  write_json(a.out, with_metadata(result, config));

  CsvWriter csv(grid_path, config, {"t", "fhat", "sigma2hat", "f2mhat", "rho"});
  for (std::size_t k = 0; k < res.variance.grid.size(); ++k) {
    const double t = res.variance.grid[k];
    csv.row(std::vector<double>{t, predict(res.fit, t), res.variance.values[k],
                                interpolate_linear(res.f2m.grid, res.f2m.values, t), res.penalty(t)});
  }
  csv.close();
  std::printf("selected S=%zu gamma=%s lambda=%s\n", res.selected_S, format_double(res.selected_gamma).c_str(),
              format_double(res.fit.lambda).c_str());
  return 0;
}

int run_simulate(const SimArgs& a) {
  if (!a.seed) throw UsageError("simulate requires --seed");
  std::vector<Method> methods;
  ScenarioSpec spec;
  try {
    methods = parse_methods(a.methods);
    spec = make_scenario(a.scenario, a.replicates, *a.seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  BenchmarkConfig cfg;
  cfg.adapt.m = a.adss_m;
  const BenchmarkRun run = run_benchmark(spec, methods, cfg);

  const json config = {{"command", "simulate"}, {"scenario", a.scenario}, {"n", spec.n},
                       {"sigma", spec.sigma},   {"replicates", a.replicates}, {"seed", *a.seed},
                       {"methods", a.methods},  {"adss_m", a.adss_m},         {"ss_m", cfg.ss_m},
                       {"eqk_m", cfg.eqk_m},    {"S", cfg.adapt.S_grid},      {"gamma", cfg.adapt.gamma_grid}};

  std::vector<std::string> header{"method", "ise_mean", "ise_sd"};
  for (double p : kPaePoints) {
    const std::string tag = "pae" + std::to_string(static_cast<int>(std::lround(p * 10)));
    header.push_back(tag + "_mean");
    header.push_back(tag + "_sd");
  }
  header.push_back("succeeded");
  header.push_back("failed");
  CsvWriter table(a.out, config, header);
  for (const auto& row : run.table) {
    std::vector<std::string> cells{to_string(row.method), format_double(row.ise.mean), format_double(row.ise.sd)};
    for (const auto& s : row.pae) {
      cells.push_back(format_double(s.mean));
      cells.push_back(format_double(s.sd));
    }
    cells.push_back(std::to_string(row.succeeded));
    cells.push_back(std::to_string(row.failures));
    table.row(cells);
  }
  table.close();

  if (!a.bands.empty()) {
    std::vector<std::string> h{"t", "f0"};
    std::vector<std::vector<std::vector<double>>> bands;
    for (const auto& res : run.results) {
      const std::string name = to_string(res.method);
      h.insert(h.end(), {name + "_q025", name + "_q975", name + "_median"});
      bands.push_back(quantile_bands(res, {0.025, 0.975, 0.5}));
    }
    CsvWriter csv(a.bands, config, h);
    for (std::size_t k = 0; k < run.band_grid.size(); ++k) {
      std::vector<double> row{run.band_grid[k], spec.f0(run.band_grid[k])};
      for (const auto& b : bands) row.insert(row.end(), {b[0][k], b[1][k], b[2][k]});
      csv.row(row);
    }
    csv.close();
  }

  if (!a.median.empty()) {
    CsvWriter csv(a.median, config, {"method", "replicate", "t", "y", "f0", "fhat"});
    for (const auto& res : run.results) {
      const std::size_t rep = median_replicate(res);
      const Design design = gen_scenario(spec, rep);
      const SplineFit f = fit_method(res.method, design, cfg);
      for (std::size_t i = 0; i < design.size(); ++i) {
        csv.row(std::vector<std::string>{to_string(res.method), std::to_string(rep), format_double(design.t[i]),
                                         format_double(design.y[i]), format_double(spec.f0(design.t[i])),
                                         format_double(f.fitted(static_cast<Eigen::Index>(i)))});
      }
    }
    csv.close();
  }

  if (!a.replicates_out.empty()) {
    CsvWriter csv(a.replicates_out, config,
                  {"method", "replicate", "ok", "ise", "pae2", "pae4", "pae6", "pae8", "lambda", "S", "gamma", "error"});
    for (const auto& res : run.results) {
      for (const auto& r : res.replicates) {
        csv.row(std::vector<std::string>{to_string(res.method), std::to_string(r.replicate), r.ok ? "1" : "0",
                                         format_double(r.ise), format_double(r.pae[0]), format_double(r.pae[1]),
                                         format_double(r.pae[2]), format_double(r.pae[3]), format_double(r.lambda),
                                         std::to_string(r.selected_S), format_double(r.selected_gamma),
                                         "\"" + r.error + "\""});
      }
    }
    csv.close();
  }

  for (const auto& row : run.table) {
    std::printf("%-5s ISE %.5f (%.5f)  failed %zu\n", to_string(row.method).c_str(), row.ise.mean, row.ise.sd,
                row.failures);
  }
  return 0;
}

int run_kernel_table(const KernelArgs& a) {
  if (a.m < 1 || a.m > kMaxKernelOrder) throw UsageError("--m must be in 1..4");
  if (!(a.beta > 0.0)) throw UsageError("--beta must be positive");
  if (a.grid < 2) throw UsageError("--grid must be at least 2");
  const PiecewisePenalty penalty = load_penalty(a.penalty);
  const json config = {{"command", "kernel-table"}, {"m", a.m}, {"beta", a.beta}, {"grid", a.grid},
                       {"penalty", a.penalty},      {"out", a.out}, {"l_out", a.l_out}, {"l_range", a.l_range}};
  const auto grid = linspace(0.0, 1.0, a.grid);
  const WarpFunction wf = warp(penalty, [](double) { return 1.0; }, a.m);
  CsvWriter csv(a.out, config, {"t", "s", "J"});
  for (double t : grid) {
    for (double s : grid) csv.row(std::vector<double>{t, s, eval_J(t, s, a.beta, wf, a.m)});
  }
  csv.close();
  if (!a.l_out.empty()) {
    CsvWriter lcsv(a.l_out, config, {"t", "L"});
    for (double u : linspace(-a.l_range, a.l_range, 2 * a.grid + 1)) lcsv.row(std::vector<double>{u, eval_L(a.m, u)});
    lcsv.comment("L0 = " + format_double(kernel_L0(a.m)));
    lcsv.close();
  }
  return 0;
}

int run_verify_kernel(const VerifyArgs& a) {
  if (a.m < 1 || a.m > kMaxKernelOrder) throw UsageError("--m must be in 1..4");
  if (a.n < 2 * static_cast<std::size_t>(a.m)) throw UsageError("--n too small for the order");
  std::vector<double> t(a.n);
  for (std::size_t i = 0; i < a.n; ++i) t[i] = static_cast<double>(i + 1) / static_cast<double>(a.n);
  const Design design = Design::make(t, std::vector<double>(a.n, 0.0));
  const KernelCheck check = verify_equivalent_kernel(design, a.lambda, load_penalty(a.penalty), a.m, a.t0);
  const json config = {{"command", "verify-kernel"}, {"m", a.m}, {"n", a.n}, {"lambda", a.lambda},
                       {"t0", a.t0},                  {"penalty", a.penalty}, {"out", a.out}};
  CsvWriter csv(a.out, config, {"t", "hat_weight", "kernel_weight"});
  csv.comment("row = " + std::to_string(check.row) + ", beta = " + format_double(check.beta) +
              ", discrepancy = " + format_double(check.discrepancy) +
              (check.regime_warning ? ", warning: beta < 5, asymptotic regime not reached" : ""));
  for (std::size_t i = 0; i < check.t.size(); ++i) {
    csv.row(std::vector<double>{check.t[i], check.hat_weight[i], check.kernel_weight[i]});
  }
  csv.close();
  std::printf("beta=%s discrepancy=%s%s\n", format_double(check.beta).c_str(), format_double(check.discrepancy).c_str(),
              check.regime_warning ? " (warning: beta < 5)" : "");
  return 0;
}

}  // namespace
}  // namespace adaspline

int main(int argc, char** argv) {
  using namespace adaspline;
  CLI::App app{"Spatially adaptive smoothing splines"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a smoothing spline with a given or uniform penalty");
  fit_cmd->add_option("--input", fa.input, "CSV with columns t,y[,w]")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--m", fa.m, "Penalty order")->check(CLI::Range(1, 4));
  fit_cmd->add_option("--lambda", fa.lambda, "Smoothing parameter or 'auto'");
  fit_cmd->add_option("--penalty", fa.penalty, "Penalty JSON {knots, values, gamma}")->check(CLI::ExistingFile);
  fit_cmd->add_option("--criterion", fa.criterion, "gcv or gml");
  fit_cmd->add_option("--out", fa.out, "Result JSON")->required();
  fit_cmd->add_option("--grid-out", fa.grid_out, "Prediction grid CSV");
  fit_cmd->add_option("--grid-size", fa.grid, "Prediction grid points")->check(CLI::Range(2, 1000000));
  fit_cmd->add_flag("--rescale", fa.rescale, "Map abscissae min-max onto [0,1]");

  AdaptArgs aa;
  auto* adapt_cmd = app.add_subcommand("adapt-fit", "Adaptive penalty selected by GAIC");
  adapt_cmd->add_option("--input", aa.input, "CSV with columns t,y[,w]")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--m", aa.m, "Penalty order")->check(CLI::Range(1, 4));
  adapt_cmd->add_option("--S", aa.S, "Candidate knot counts")->delimiter(',');
  adapt_cmd->add_option("--gamma", aa.gamma, "Candidate powers")->delimiter(',');
  adapt_cmd->add_option("--density-grid", aa.density_grid, "Knot candidate grid size");
  adapt_cmd->add_option("--out", aa.out, "Result JSON")->required();
  adapt_cmd->add_option("--grid-out", aa.grid_out, "Curves CSV");
  adapt_cmd->add_flag("--rescale", aa.rescale, "Map abscissae min-max onto [0,1]");

  SimArgs sa;
  std::uint64_t seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo benchmark");
  sim_cmd->add_option("--scenario", sa.scenario, "heaviside or mexican_hat")->required();
  sim_cmd->add_option("--replicates", sa.replicates, "Number of replicates")->check(CLI::Range(1, 1000000));
  auto* seed_opt = sim_cmd->add_option("--seed", seed, "Root seed")->required();
  sim_cmd->add_option("--methods", sa.methods, "Comma list of ss, eqk, adss");
  sim_cmd->add_option("--adss-m", sa.adss_m, "Penalty order of the adaptive method")->check(CLI::Range(1, 4));
  sim_cmd->add_option("--out", sa.out, "Summary table CSV")->required();
  sim_cmd->add_option("--bands", sa.bands, "Pointwise quantile bands CSV");
  sim_cmd->add_option("--median", sa.median, "Median-replicate fits CSV");
  sim_cmd->add_option("--replicates-out", sa.replicates_out, "Per-replicate results CSV");

  KernelArgs ka;
  auto* kt_cmd = app.add_subcommand("kernel-table", "Tabulate J(t,s) and L(t)");
  kt_cmd->add_option("--m", ka.m, "Order");
  kt_cmd->add_option("--beta", ka.beta, "Bandwidth parameter");
  kt_cmd->add_option("--grid", ka.grid, "Grid points on [0,1]");
  kt_cmd->add_option("--penalty", ka.penalty, "Penalty JSON")->check(CLI::ExistingFile);
  kt_cmd->add_option("--out", ka.out, "J table CSV")->required();
  kt_cmd->add_option("--l-out", ka.l_out, "L table CSV");
  kt_cmd->add_option("--l-range", ka.l_range, "Half-width of the L table");

  VerifyArgs va;
  auto* vk_cmd = app.add_subcommand("verify-kernel", "Compare a hat-matrix row with the equivalent kernel");
  vk_cmd->add_option("--m", va.m, "Order");
  vk_cmd->add_option("--n", va.n, "Equispaced design size");
  vk_cmd->add_option("--lambda", va.lambda, "Smoothing parameter")->check(CLI::PositiveNumber);
  vk_cmd->add_option("--t0", va.t0, "Evaluation point")->check(CLI::Range(0.0, 1.0));
  vk_cmd->add_option("--penalty", va.penalty, "Penalty JSON")->check(CLI::ExistingFile);
  vk_cmd->add_option("--out", va.out, "Weights CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) sa.seed = seed;

  try {
    if (*fit_cmd) return run_fit(fa);
    if (*adapt_cmd) return run_adapt(aa);
    if (*sim_cmd) return run_simulate(sa);
    if (*kt_cmd) return run_kernel_table(ka);
    if (*vk_cmd) return run_verify_kernel(va);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
