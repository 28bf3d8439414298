#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaspline/penalty.hpp"
#include "adaspline/solver.hpp"

namespace adaspline {

struct AdaptConfig {
  std::vector<std::size_t> S_grid{0, 2, 4, 8};
  std::vector<double> gamma_grid{1.0, 2.0, 4.0};
  std::size_t density_grid_size = 100;
  int m = 2;
  std::size_t curve_grid_size = 201;
  Criterion f2m_criterion = Criterion::GCV;
  unsigned threads = 0;  // 0: default_thread_count()

  void validate() const;
};

// Failure inside adapt_fit, tagged with the pipeline stage that raised it.
class AdaptStageError : public std::runtime_error {
 public:
  AdaptStageError(std::string stage, const std::string& what)
      : std::runtime_error("adapt_fit [" + stage + "]: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct KnotSelection {
  std::vector<double> knots;
  std::vector<double> scores;  // score of every candidate s_k, k = 1..grid_size-1
  bool degenerate = false;     // responses constant: no density to compare
};

// Candidate knots s_k = k/grid_size. Each is scored by the L1 distance between
// the kernel-estimated conditional densities of y at s_k and s_{k+1}; the S
// best are kept subject to a minimum separation of 2/grid_size.
KnotSelection select_knots(const Design& design, std::size_t S, std::size_t grid_size);

struct VarianceEstimate {
  std::vector<double> grid;
  std::vector<double> values;     // sigma^2 on grid, floored
  std::vector<double> at_design;  // sigma^2 at the abscissae, floored
  double bandwidth = 0.0;
  double pilot_lambda = 0.0;
  double floor = 0.0;
};

// Local-linear smooth of squared residuals from a uniform-penalty GCV pilot fit.
VarianceEstimate estimate_variance(const Design& design, std::optional<double> bandwidth = std::nullopt, int m = 2,
                                   std::size_t grid_size = 201);

struct CurveEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  double lambda = 0.0;
};

// f^(2m) from a weighted order-2m spline fit, differentiated analytically.
// The grid holds the midpoints of a grid_size-point grid, away from the kinks
// of an equispaced design.
CurveEstimate estimate_f2m(const Design& design, int m, std::size_t grid_size = 201,
                           Criterion criterion = Criterion::GCV);

// Design density on the grid; exactly 1 for an equispaced design.
std::vector<double> estimate_design_density(std::span<const double> t, std::span<const double> grid);
bool is_equispaced(std::span<const double> t);

struct SegmentIntegrals {
  double bias = 0.0;      // A_j = int r^2 (f^(2m))^2
  double variance = 0.0;  // B_j = int r^{1 - 1/(2m)}
};

// Segment integrals on [lo, hi] by nonuniform Simpson over the grid nodes
// inside the segment plus the interpolated endpoints.
SegmentIntegrals segment_integrals(double lo, double hi, std::span<const double> grid, std::span<const double> r,
                                   std::span<const double> f2m, int m);

// Segment-wise minimizer of rho^2 A_j + rho^{-1/(2m)} L0 B_j, with A_j floored
// so that flat segments get a large but finite value.
PiecewisePenalty optimal_rho(const std::vector<double>& knots, std::span<const double> grid,
                             std::span<const double> r, std::span<const double> f2m, int m, double L0);

// (rho_j / geomean(rho))^gamma.
PiecewisePenalty power_up(const PiecewisePenalty& penalty, double gamma);

// -2 log restricted likelihood implied by the GML score at the fit's lambda, plus 2S.
double gaic(const SplineFit& fit, std::size_t S);
double gaic(const LambdaProfile& profile, double lambda, std::size_t S);

struct GaicEntry {
  std::size_t S = 0;
  double gamma = 1.0;
  std::size_t knots_found = 0;
  double lambda = 0.0;
  double score = 0.0;
};

struct AdaptResult {
  PiecewisePenalty penalty;
  SplineFit fit;
  VarianceEstimate variance;
  CurveEstimate f2m;
  std::vector<double> r_curve;  // on f2m.grid
  std::vector<GaicEntry> gaic_table;  // sorted by (S, gamma)
  std::size_t selected_S = 0;
  double selected_gamma = 1.0;
  OptimalityReport optimality;
};

// Full pipeline: variance -> weights, f^(2m), then for every (S, gamma):
// knots, optimal rho, power-up, GCV lambda, fit, GAIC. Returns the GAIC
// minimizer (ties toward smaller S, then smaller gamma).
AdaptResult adapt_fit(const Design& design, const AdaptConfig& config = {});

}  // namespace adaspline
