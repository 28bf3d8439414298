#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "adaspline/penalty.hpp"

namespace adaspline {

// Null-space basis (1, t, t^2/2!, ..., t^{m-1}/(m-1)!).
std::vector<double> null_basis(int m, double t);

// Reproducing kernel of {f : f^(j)(0) = 0, j < m} under <f,g> = int rho f^(m) g^(m):
//
//   K(s,t) = int_0^1 rho(u)^{-1} G(s,u) G(t,u) du,  G(x,u) = (x-u)_+^{m-1} / (m-1)!
//
// The integrand is a polynomial in u on every rho-segment, so the value is an
// exact sum of segment antiderivatives.
double k_rho(double s, double t, const PiecewisePenalty& penalty, int m);

// d^order/dt^order K(s,t). Piecewise polynomial in t with breaks at s and at
// the penalty knots; for order >= 2m it vanishes between breaks and throws
// std::invalid_argument at a break.
double k_rho_deriv(double s, double t, const PiecewisePenalty& penalty, int m, int order);

// Kernel sections and null-space basis evaluated at the design abscissae.
// Immutable once built.
struct GramContext {
  std::vector<double> abscissae;
  PiecewisePenalty penalty;
  int m = 2;
  Eigen::MatrixXd gram;        // n x n, K(t_i, t_j)
  Eigen::MatrixXd null_basis;  // n x m, phi_j(t_i)
};

// Throws std::invalid_argument on unsorted/duplicate abscissae or values outside [0,1].
GramContext gram_matrix(std::span<const double> abscissae, const PiecewisePenalty& penalty, int m);

}  // namespace adaspline
