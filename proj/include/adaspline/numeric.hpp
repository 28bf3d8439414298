#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace adaspline {

// Composite Simpson on an equispaced grid. Falls back to a trapezoid on the
// last interval when the number of intervals is odd.
double simpson(std::span<const double> values, double step);

// Simpson's rule for arbitrary (strictly increasing) abscissae, applied to
// consecutive interval pairs; a trailing single interval uses the three-point
// formula through the last three nodes.
double simpson_nonuniform(std::span<const double> x, std::span<const double> f);

std::vector<double> linspace(double lo, double hi, std::size_t count);
std::vector<double> logspace(double lo, double hi, std::size_t count);

// Piecewise-linear interpolation on a sorted grid, clamped at the ends.
double interpolate_linear(std::span<const double> grid, std::span<const double> values, double x);

double median(std::vector<double> values);
double sample_mean(std::span<const double> values);
double sample_sd(std::span<const double> values);

// Quantile by linear interpolation of order statistics (Hyndman–Fan type 7).
double quantile(std::vector<double> values, double prob);

// Runs body(i) for i in [0, count) on up to `threads` workers. Every index is
// processed exactly once; callers write to pre-sized per-index slots so the
// result does not depend on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

// Thread cap from ADASPLINE_THREADS, else hardware concurrency (at least 1).
unsigned default_thread_count();

}  // namespace adaspline
