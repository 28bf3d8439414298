#pragma once

#include <functional>
#include <vector>

#include "adaspline/penalty.hpp"

namespace adaspline {

inline constexpr int kMaxKernelOrder = 4;

// Interior equivalent kernel L(|t|) of an order-m smoothing spline, i.e. the
// inverse Fourier transform of 1/(1 + w^{2m}). Closed forms exist for m = 1..4;
// anything else throws std::out_of_range.
double eval_L(int m, double t);

// L0 = integral of L^2 over the real line, computed once per order.
double kernel_L0(int m);

// Integral of t^k L(|t|) over [-half_width, half_width].
// Throws std::domain_error when half_width leaves an (analytically bounded)
// tail above 1e-12, since the truncated value would not be the full moment.
double kernel_moment(int m, int k, double half_width);

// Upper bound on the integral of |t^k L(|t|)| over |t| > half_width.
double kernel_moment_tail_bound(int m, int k, double half_width);

// Smallest integer half-width >= min_width whose tail bound is <= tol.
double kernel_moment_window(int m, int k, double min_width = 40.0, double tol = 1e-12);

// Leading-order warp Q(t) = int_0^t {r(s) rho(s)}^{-1/(2m)} ds tabulated on a grid.
// The O(1/beta) correction is dropped.
struct WarpFunction {
  std::vector<double> grid;
  std::vector<double> values;
  std::function<double(double)> r;
  PiecewisePenalty penalty;
  int m = 2;

  double operator()(double t) const;
  // Q'(t) taken as the local integrand value.
  double derivative(double t) const;
};

// Builds Q on `grid` (default: 2001 equispaced points on [0,1]) by composite
// Simpson, split at penalty knots so each panel has a constant rho.
WarpFunction warp(const PiecewisePenalty& rho, std::function<double(double)> r, int m,
                  std::vector<double> grid = {});

// Leading-order spatially varying kernel J(t,s) = beta Q'(s) L(beta |Q(t) - Q(s)|).
double eval_J(double t, double s, double beta, const WarpFunction& warp_fn, int m);

}  // namespace adaspline
