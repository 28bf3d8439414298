#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adaspline/adapt.hpp"
#include "adaspline/solver.hpp"

namespace adaspline {

using Truth = std::function<double(double)>;

double heaviside_truth(double t);    // 5 * I[t >= 0.5]
double mexican_hat_truth(double t);  // -1 + 1.5 t + 0.2 phi_{0.02}(t - 0.6)

struct ScenarioSpec {
  std::string name = "custom";
  std::size_t n = 200;
  double sigma = 1.0;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  Truth f0;

  void validate() const;
};

// "heaviside" (sigma 0.7) or "mexican_hat" (sigma 0.25), n = 200.
ScenarioSpec make_scenario(const std::string& name, std::size_t replicates, std::uint64_t seed);

// Gaussian noise stream for one replicate: a Mersenne Twister seeded from
// (seed, replicate) only, so data never depend on execution order.
std::vector<double> replicate_noise(std::uint64_t seed, std::size_t replicate, std::size_t count);

// t_i = i/n (i = 1..n), y_i = f0(t_i) + sigma * eps_i.
Design gen_scenario(const ScenarioSpec& spec, std::size_t replicate);

// Composite Simpson of (predict - f0)^2 on grid_size equispaced points.
double ise(const SplineFit& fit, const Truth& f0, std::size_t grid_size = 1001);
double ise(std::span<const double> fitted_on_grid, const Truth& f0);
double pae(const SplineFit& fit, const Truth& f0, double t);

enum class Method { SS, EQK, ADSS };

std::vector<Method> parse_methods(const std::string& list);
std::string to_string(Method m);

inline constexpr std::array<double, 4> kPaePoints{0.2, 0.4, 0.6, 0.8};

struct BenchmarkConfig {
  AdaptConfig adapt{.m = 1};  // ADSS
  int ss_m = 2;
  int eqk_m = 2;
  std::vector<double> eqk_log10_grid{-2.0, -1.0, 0.0, 1.0, 2.0};
  int eqk_sweeps = 2;
  std::size_t band_grid_size = 201;
  std::size_t ise_grid_size = 1001;
  unsigned threads = 0;  // 0: default_thread_count()
};

// Uniform penalty, GCV lambda.
SplineFit fit_ss(const Design& design, int m);
// Knots at k/6, segment values by coordinate descent over log10 contrasts with GCV.
SplineFit fit_eqk(const Design& design, const BenchmarkConfig& config);
SplineFit fit_method(Method method, const Design& design, const BenchmarkConfig& config);

struct ReplicateResult {
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  double ise = 0.0;
  std::array<double, 4> pae{};
  double lambda = 0.0;
  std::size_t selected_S = 0;
  double selected_gamma = 1.0;
  std::vector<double> curve;  // fitted values on the band grid
};

struct MethodResults {
  Method method = Method::SS;
  std::vector<ReplicateResult> replicates;
  std::size_t failures = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct BenchmarkRow {
  Method method = Method::SS;
  MetricSummary ise;
  std::array<MetricSummary, 4> pae;
  std::size_t succeeded = 0;
  std::size_t failures = 0;
};

struct BenchmarkRun {
  ScenarioSpec spec;
  BenchmarkConfig config;
  std::vector<double> band_grid;
  std::vector<MethodResults> results;
  std::vector<BenchmarkRow> table;
};

// Every method sees the same replicate data. Replicates run in parallel and are
// reduced in index order. Throws if more than 5% of any method's replicates fail.
BenchmarkRun run_benchmark(const ScenarioSpec& spec, const std::vector<Method>& methods,
                           const BenchmarkConfig& config = {});

BenchmarkRow summarize(const MethodResults& results);

// Replicate holding the ceil(R/2)-th smallest ISE; ties go to the lower index.
std::size_t median_replicate(const MethodResults& results);

// Pointwise empirical quantiles (type 7) of the replicate curves; one curve per prob.
std::vector<std::vector<double>> quantile_bands(const MethodResults& results, const std::vector<double>& probs);

}  // namespace adaspline
