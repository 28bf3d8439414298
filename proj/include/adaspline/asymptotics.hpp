#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "adaspline/penalty.hpp"
#include "adaspline/solver.hpp"

namespace adaspline {

using RealFunction = std::function<double(double)>;

// True regression function plus the quantities the asymptotic formulas need.
// Empty derivative evaluators are replaced by central finite differences.
struct TruthSpec {
  RealFunction f0;
  RealFunction f0_m;   // f0^(m), optional
  RealFunction f0_2m;  // f0^(2m), optional
  RealFunction sigma = [](double) { return 1.0; };
  RealFunction q = [](double) { return 1.0; };

  void validate() const;
  double r(double t) const;  // sigma^2 / q
};

struct AsymptoticsReport {
  double t = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  double beta = 0.0;  // lambda^{-1/(2m)}
};

// Central difference of order k with step h (nodes t + (k/2 - j) h).
double central_difference(const RealFunction& f, double t, int order, double h);

// f0^(2m)(t), analytic when available, otherwise by finite differences.
double truth_derivative_2m(const TruthSpec& truth, double t, int m);

// lambda (-1)^{m-1} r(t) {rho f0^(m)}^(m)(t); rho is constant near t.
double asymptotic_bias(double t, double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth, int m);

// L0 r^{1-1/(2m)} rho^{-1/(2m)} / (n lambda^{1/(2m)}).
double asymptotic_variance(double t, std::size_t n, double lambda, const PiecewisePenalty& penalty,
                           const TruthSpec& truth, int m);

AsymptoticsReport asymptotic_report(double t, std::size_t n, double lambda, const PiecewisePenalty& penalty,
                                    const TruthSpec& truth, int m);

// Integrated pointwise bias^2 + variance, skipping 1e-3 around each knot.
double imse(double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth, std::size_t n, int m);

// Sum over segments of int r^2 (rho_j f0^(2m))^2 + L0 r^{1-1/(2m)} rho_j^{-1/(2m)}.
double pi_functional(const PiecewisePenalty& penalty, const TruthSpec& truth, int m);

struct KernelCheck {
  std::size_t row = 0;  // design index nearest t0
  double center = 0.0;  // t of that row
  double beta = 0.0;
  bool regime_warning = false;  // beta < 5
  std::vector<double> t;
  std::vector<double> hat_weight;
  std::vector<double> kernel_weight;  // J(center, t_i) / (n q(t_i))
  double discrepancy = 0.0;           // |hat - kernel| / |kernel|
};

// Compares a hat-matrix row with the leading-order spatially varying kernel.
// r(s) = sigma^2(s)/q(s) with sigma^2 = 1/w interpolated from the design.
KernelCheck verify_equivalent_kernel(const Design& design, double lambda, const PiecewisePenalty& penalty, int m,
                                     double t0, const RealFunction& q = {});

// Root of the weight-normalized second moment of a weight vector about `center`.
double kernel_width(std::span<const double> t, std::span<const double> weights, double center);

struct EmpiricalBiasVariance {
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double bias_standard_error = 0.0;
  std::size_t replicates = 0;
};

// Monte Carlo over fresh noise on the design t_i = i/n with weights 1/sigma^2.
// The penalized system is factorized once and reused for every replicate.
EmpiricalBiasVariance empirical_bias_variance(const TruthSpec& truth, const PiecewisePenalty& penalty, int m,
                                              double lambda, std::size_t n, std::size_t replicates,
                                              std::uint64_t seed, double t0);

}  // namespace adaspline
