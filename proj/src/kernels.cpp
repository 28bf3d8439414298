#include "adaspline/kernels.hpp"

#include <array>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

#include "adaspline/numeric.hpp"

namespace adaspline {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

void require_order(int m) {
  if (m < 1 || m > kMaxKernelOrder) {
    throw std::out_of_range("equivalent kernel: order m=" + std::to_string(m) + " outside 1..4");
  }
}

// |L(t)| <= envelope * exp(-rate * |t|)
struct Envelope {
  double envelope;
  double rate;
};

Envelope kernel_envelope(int m) {
  const double c8 = std::cos(kPi / 8.0), s8 = std::sin(kPi / 8.0);
  switch (m) {
    case 1: return {0.5, 1.0};
    case 2: return {0.5, 1.0 / std::sqrt(2.0)};
    case 3: return {(2.0 + std::sqrt(3.0)) / 6.0, 0.5};
    default: return {(c8 + s8) / 2.0, s8};
  }
}

// Integral of f over [a, b] in unit-width Gauss–Kronrod panels.
template <class F>
double panel_integral(F&& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  const auto panels = static_cast<int>(std::ceil(b - a));
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p;
    const double hi = std::min(b, lo + 1.0);
    total += gauss_kronrod<double, 61>::integrate(f, lo, hi, 8, 1e-14);
  }
  return total;
}

double compute_L0(int m) {
  const Envelope env = kernel_envelope(m);
  // tail of L^2 beyond W is below env^2 exp(-2 rate W) / rate
  double width = 40.0;
  while (env.envelope * env.envelope * std::exp(-2.0 * env.rate * width) / env.rate > 1e-18) width += 1.0;
  auto sq = [m](double t) {
    const double v = eval_L(m, t);
    return v * v;
  };
  return panel_integral(sq, -width, 0.0) + panel_integral(sq, 0.0, width);
}

}  // namespace

double eval_L(int m, double t) {
  require_order(m);
  const double a = std::abs(t);
  switch (m) {
    case 1:
      return 0.5 * std::exp(-a);
    case 2: {
      const double u = a / std::sqrt(2.0);
      return std::exp(-u) * (std::cos(u) + std::sin(u)) / (2.0 * std::sqrt(2.0));
    }
    case 3: {
      const double r3 = std::sqrt(3.0);
      return std::exp(-a) / 6.0 +
             std::exp(-0.5 * a) * (std::cos(0.5 * r3 * a) / 6.0 + r3 / 6.0 * std::sin(0.5 * r3 * a));
    }
    default: {
      // exact forms of the rounded 0.9239, 0.3827, 0.2310, 0.0957
      const double c8 = std::cos(kPi / 8.0), s8 = std::sin(kPi / 8.0);
      return std::exp(-c8 * a) * (0.25 * c8 * std::cos(s8 * a) + 0.25 * s8 * std::sin(s8 * a)) +
             std::exp(-s8 * a) * (0.25 * s8 * std::cos(c8 * a) + 0.25 * c8 * std::sin(c8 * a));
    }
  }
}

double kernel_L0(int m) {
  require_order(m);
  static const std::array<double, kMaxKernelOrder> cache = [] {
    std::array<double, kMaxKernelOrder> v{};
    for (int order = 1; order <= kMaxKernelOrder; ++order) v[order - 1] = compute_L0(order);
    return v;
  }();
  return cache[m - 1];
}

double kernel_moment_tail_bound(int m, int k, double half_width) {
  require_order(m);
  if (k < 0) throw std::invalid_argument("kernel_moment: moment index must be >= 0");
  const Envelope env = kernel_envelope(m);
  // int_W^inf t^k e^{-bt} dt = k! e^{-bW} sum_j W^j / (j! b^{k-j+1})
  double sum = 0.0;
  double term = 1.0 / std::pow(env.rate, k + 1);  // j = 0
  for (int j = 0; j <= k; ++j) {
    sum += term;
    term *= half_width * env.rate / (j + 1);
  }
  return 2.0 * env.envelope * std::tgamma(k + 1.0) * std::exp(-env.rate * half_width) * sum;
}

double kernel_moment_window(int m, int k, double min_width, double tol) {
  double width = std::ceil(min_width);
  while (kernel_moment_tail_bound(m, k, width) > tol) width += 1.0;
  return width;
}

double kernel_moment(int m, int k, double half_width) {
  require_order(m);
  if (k < 0) throw std::invalid_argument("kernel_moment: moment index must be >= 0");
  const double tail = kernel_moment_tail_bound(m, k, half_width);
  if (tail > 1e-12) {
    throw std::domain_error("kernel_moment: half_width " + std::to_string(half_width) + " leaves a tail of up to " +
                            std::to_string(tail) + " for m=" + std::to_string(m) + ", k=" + std::to_string(k) +
                            "; need at least " + std::to_string(kernel_moment_window(m, k, half_width)));
  }
  auto integrand = [m, k](double t) { return std::pow(t, k) * eval_L(m, t); };
  return panel_integral(integrand, -half_width, 0.0) + panel_integral(integrand, 0.0, half_width);
}

double WarpFunction::operator()(double t) const { return interpolate_linear(grid, values, t); }

double WarpFunction::derivative(double t) const {
  return std::pow(r(t) * penalty(t), -1.0 / (2.0 * m));
}

WarpFunction warp(const PiecewisePenalty& rho, std::function<double(double)> r, int m, std::vector<double> grid) {
  if (m < 1) throw std::invalid_argument("warp: order must be >= 1");
  if (grid.empty()) grid = linspace(0.0, 1.0, 2001);
  if (grid.front() != 0.0) throw std::invalid_argument("warp: grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]) || grid[i] > 1.0) {
      throw std::invalid_argument("warp: grid must be strictly increasing within [0,1]");
    }
  }
  const double power = -1.0 / (2.0 * m);
  auto integrand = [&](double s, double rho_value) {
    const double rv = r(s);
    if (!(rv > 0.0)) throw std::domain_error("warp: r must be strictly positive (r(" + std::to_string(s) + ") <= 0)");
    return std::pow(rv * rho_value, power);
  };

  WarpFunction out;
  out.values.assign(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    // split [g_{i-1}, g_i] at interior penalty knots; rho is constant on each piece
    std::vector<double> cuts{grid[i - 1]};
    for (double k : rho.knots()) {
      if (k > grid[i - 1] && k < grid[i]) cuts.push_back(k);
    }
    cuts.push_back(grid[i]);
    double acc = 0.0;
    for (std::size_t p = 1; p < cuts.size(); ++p) {
      const double a = cuts[p - 1], b = cuts[p], mid = 0.5 * (a + b);
      const double rho_value = rho(mid);
      acc += (b - a) / 6.0 * (integrand(a, rho_value) + 4.0 * integrand(mid, rho_value) + integrand(b, rho_value));
    }
    out.values[i] = out.values[i - 1] + acc;
  }
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    if (!(out.values[i] > out.values[i - 1])) throw std::domain_error("warp: Q is not strictly increasing");
  }
  out.grid = std::move(grid);
  out.r = std::move(r);
  out.penalty = rho;
  out.m = m;
  return out;
}

double eval_J(double t, double s, double beta, const WarpFunction& warp_fn, int m) {
  if (!(beta > 0.0)) throw std::invalid_argument("eval_J: beta must be positive");
  if (t < 0.0 || t > 1.0 || s < 0.0 || s > 1.0) throw std::invalid_argument("eval_J: t and s must lie in [0,1]");
  if (m != warp_fn.m) throw std::invalid_argument("eval_J: warp was built for a different order");
  return beta * warp_fn.derivative(s) * eval_L(m, beta * std::abs(warp_fn(t) - warp_fn(s)));
}

}  // namespace adaspline
