#include "adaspline/rkhs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adaspline {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

// int_{v0}^{v1} v^alpha (v + delta)^beta dv with delta >= 0; every term is nonnegative.
double power_product_integral(int alpha, int beta, double delta, double v0, double v1) {
  double total = 0.0;
  for (int j = 0; j <= beta; ++j) {
    const int p = alpha + j + 1;
    total += binomial(beta, j) * ipow(delta, beta - j) * (ipow(v1, p) - ipow(v0, p)) / p;
  }
  return total;
}

// int_0^{min(s,t)} rho(u)^{-1} (s-u)^ps (t-u)^pt du, split over penalty segments.
double segment_sum(double s, double t, int ps, int pt, const PiecewisePenalty& penalty) {
  const double a = std::min(s, t);
  if (a <= 0.0) return 0.0;
  const double delta = std::abs(s - t);
  // substitute v = a - u; the factor belonging to min(s,t) becomes v^power
  const int alpha = (t <= s) ? pt : ps;
  const int beta = (t <= s) ? ps : pt;
  double total = 0.0;
  for (std::size_t j = 0; j < penalty.segment_count(); ++j) {
    const double lo = penalty.segment_lower(j);
    if (lo >= a) break;
    const double hi = std::min(penalty.segment_upper(j), a);
    total += power_product_integral(alpha, beta, delta, a - hi, a - lo) / penalty.values()[j];
  }
  return total;
}

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

}  // namespace

std::vector<double> null_basis(int m, double t) {
  std::vector<double> phi(static_cast<std::size_t>(m));
  double term = 1.0;
  for (int j = 0; j < m; ++j) {
    phi[j] = term;
    term *= t / (j + 1);
  }
  return phi;
}

double k_rho(double s, double t, const PiecewisePenalty& penalty, int m) {
  if (m < 1) throw std::invalid_argument("k_rho: order must be >= 1");
  check_unit(s, "k_rho: s");
  check_unit(t, "k_rho: t");
  const double norm = factorial(m - 1) * factorial(m - 1);
  return segment_sum(s, t, m - 1, m - 1, penalty) / norm;
}

double k_rho_deriv(double s, double t, const PiecewisePenalty& penalty, int m, int order) {
  if (m < 1) throw std::invalid_argument("k_rho_deriv: order must be >= 1");
  if (order < 0) throw std::invalid_argument("k_rho_deriv: derivative order must be >= 0");
  check_unit(s, "k_rho_deriv: s");
  check_unit(t, "k_rho_deriv: t");
  if (order < m) {
    const int pt = m - 1 - order;
    return segment_sum(s, t, m - 1, pt, penalty) / (factorial(m - 1) * factorial(pt));
  }
  if (order < 2 * m) {
    // d^m/dt^m K = G(s,t) / rho(t); further derivatives act on (s-t)_+^{m-1}
    const int p = 2 * m - 1 - order;
    if (t >= s) return 0.0;
    const double sign = ((order - m) % 2 == 0) ? 1.0 : -1.0;
    return sign * ipow(s - t, p) / factorial(p) / penalty(t);
  }
  const auto& knots = penalty.knots();
  if (t == s || std::find(knots.begin(), knots.end(), t) != knots.end()) {
    throw std::invalid_argument("k_rho_deriv: derivative of order " + std::to_string(order) +
                                " >= 2m is undefined at a kink (t=" + std::to_string(t) + ")");
  }
  return 0.0;
}

GramContext gram_matrix(std::span<const double> abscissae, const PiecewisePenalty& penalty, int m) {
  if (m < 1) throw std::invalid_argument("gram_matrix: order must be >= 1");
  const auto n = static_cast<Eigen::Index>(abscissae.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    check_unit(abscissae[i], "gram_matrix: abscissa");
    if (i > 0 && !(abscissae[i] > abscissae[i - 1])) {
      if (abscissae[i] == abscissae[i - 1]) {
        throw std::invalid_argument("gram_matrix: duplicate abscissa " + std::to_string(abscissae[i]) + " at positions " +
                                    std::to_string(i - 1) + " and " + std::to_string(i) +
                                    "; pre-bin (average) duplicate design points first");
      }
      throw std::invalid_argument("gram_matrix: abscissae must be sorted ascending");
    }
  }
  GramContext ctx;
  ctx.abscissae.assign(abscissae.begin(), abscissae.end());
  ctx.penalty = penalty;
  ctx.m = m;
  ctx.gram.resize(n, n);
  ctx.null_basis.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = k_rho(abscissae[i], abscissae[j], penalty, m);
      ctx.gram(i, j) = v;
      ctx.gram(j, i) = v;
    }
    const auto phi = null_basis(m, abscissae[i]);
    for (int j = 0; j < m; ++j) ctx.null_basis(i, j) = phi[j];
  }
  return ctx;
}

}  // namespace adaspline
