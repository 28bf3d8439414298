#include "adaspline/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "adaspline/kernels.hpp"
#include "adaspline/numeric.hpp"
#include "adaspline/rkhs.hpp"
#include "adaspline/sim.hpp"

namespace adaspline {

namespace {

constexpr double kBaseStep = 1e-4;
constexpr double kKnotGap = 1e-3;

// Step for an order-k difference: 1e-4, widened for high orders where
// rounding error (eps / h^k) would otherwise dominate.
double difference_step(int order) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::max(kBaseStep, std::pow(eps, 1.0 / (order + 2)));
}

void require_smooth_point(double t, const PiecewisePenalty& penalty, double reach) {
  for (double k : penalty.knots()) {
    if (std::abs(t - k) <= reach) {
      throw std::invalid_argument("asymptotics: t = " + std::to_string(t) + " is at a penalty knot (" +
                                  std::to_string(k) + "); rho is not differentiable there");
    }
  }
}

void require_interior(double t) {
  if (!(t >= 0.05 && t <= 0.95)) {
    throw std::invalid_argument("asymptotics: t must be at least 0.05 from the endpoints");
  }
}

void check_order(int m) {
  if (m < 1 || m > kMaxKernelOrder) throw std::out_of_range("asymptotics: m must be in 1..4");
}

double bias_at(double t, double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth, int m) {
  const double sign = (m - 1) % 2 == 0 ? 1.0 : -1.0;
  return lambda * sign * truth.r(t) * penalty(t) * truth_derivative_2m(truth, t, m);
}

double variance_at(double t, std::size_t n, double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth,
                   int m) {
  const double inv = 1.0 / (2.0 * m);
  return kernel_L0(m) * std::pow(truth.r(t), 1.0 - inv) * std::pow(penalty(t), -inv) /
         (static_cast<double>(n) * std::pow(lambda, inv));
}

// Simpson over [lo, hi] with an odd node count proportional to the length.
template <class F>
double integrate_piece(double lo, double hi, F&& f) {
  if (!(hi > lo)) return 0.0;
  std::size_t count = std::max<std::size_t>(21, static_cast<std::size_t>(std::ceil((hi - lo) * 2000.0)));
  if (count % 2 == 0) ++count;
  const auto x = linspace(lo, hi, count);
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = f(x[i]);
  return simpson(v, (hi - lo) / static_cast<double>(count - 1));
}

template <class F>
double integrate_segments(const PiecewisePenalty& penalty, F&& f) {
  double total = 0.0;
  for (std::size_t j = 0; j < penalty.segment_count(); ++j) {
    const double lo = penalty.segment_lower(j) + (j == 0 ? 0.0 : kKnotGap);
    const double hi = penalty.segment_upper(j) - (j + 1 == penalty.segment_count() ? 0.0 : kKnotGap);
    total += integrate_piece(lo, hi, f);
  }
  return total;
}

}  // namespace

void TruthSpec::validate() const {
  if (!f0) throw std::invalid_argument("truth: missing f0");
  if (!sigma || !q) throw std::invalid_argument("truth: missing sigma or q");
  const auto grid = linspace(0.0, 1.0, 2001);
  std::vector<double> dens(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    dens[k] = q(grid[k]);
    if (!(dens[k] > 0.0)) throw std::invalid_argument("truth: design density must be positive on [0,1]");
  }
  const double mass = simpson(dens, grid[1] - grid[0]);
  if (std::abs(mass - 1.0) > 1e-6) {
    throw std::invalid_argument("truth: design density integrates to " + std::to_string(mass) + ", not 1");
  }
}

double TruthSpec::r(double t) const {
  const double s = sigma(t);
  const double dens = q(t);
  if (!(dens > 0.0)) throw std::domain_error("truth: design density must be positive");
  return s * s / dens;
}

double central_difference(const RealFunction& f, double t, int order, double h) {
  if (order == 0) return f(t);
  double acc = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= order; ++j) {
    const double sign = j % 2 == 0 ? 1.0 : -1.0;
    acc += sign * binom * f(t + (0.5 * order - j) * h);
    binom = binom * (order - j) / (j + 1);
  }
  return acc / std::pow(h, order);
}

double truth_derivative_2m(const TruthSpec& truth, double t, int m) {
  if (truth.f0_2m) return truth.f0_2m(t);
  if (truth.f0_m) return central_difference(truth.f0_m, t, m, difference_step(m));
  return central_difference(truth.f0, t, 2 * m, difference_step(2 * m));
}

double asymptotic_bias(double t, double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth, int m) {
  check_order(m);
  truth.validate();
  require_interior(t);
  require_smooth_point(t, penalty, m * difference_step(2 * m));
  return bias_at(t, lambda, penalty, truth, m);
}

double asymptotic_variance(double t, std::size_t n, double lambda, const PiecewisePenalty& penalty,
                           const TruthSpec& truth, int m) {
  check_order(m);
  truth.validate();
  require_interior(t);
  require_smooth_point(t, penalty, 0.0);
  if (n == 0 || !(lambda > 0.0)) throw std::invalid_argument("asymptotic_variance: need n > 0 and lambda > 0");
  return variance_at(t, n, lambda, penalty, truth, m);
}

AsymptoticsReport asymptotic_report(double t, std::size_t n, double lambda, const PiecewisePenalty& penalty,
                                    const TruthSpec& truth, int m) {
  AsymptoticsReport rep;
  rep.t = t;
  rep.bias = asymptotic_bias(t, lambda, penalty, truth, m);
  rep.variance = asymptotic_variance(t, n, lambda, penalty, truth, m);
  rep.mse = rep.bias * rep.bias + rep.variance;
  rep.beta = std::pow(lambda, -1.0 / (2.0 * m));
  return rep;
}

double imse(double lambda, const PiecewisePenalty& penalty, const TruthSpec& truth, std::size_t n, int m) {
  check_order(m);
  truth.validate();
  if (n == 0 || !(lambda > 0.0)) throw std::invalid_argument("imse: need n > 0 and lambda > 0");
  return integrate_segments(penalty, [&](double t) {
    const double b = bias_at(t, lambda, penalty, truth, m);
    return b * b + variance_at(t, n, lambda, penalty, truth, m);
  });
}

double pi_functional(const PiecewisePenalty& penalty, const TruthSpec& truth, int m) {
  check_order(m);
  truth.validate();
  const double L0 = kernel_L0(m);
  const double inv = 1.0 / (2.0 * m);
  return integrate_segments(penalty, [&](double t) {
    const double r = truth.r(t);
    const double rho = penalty(t);
    const double d = rho * truth_derivative_2m(truth, t, m);
    return r * r * d * d + L0 * std::pow(r, 1.0 - inv) * std::pow(rho, -inv);
  });
}

double kernel_width(std::span<const double> t, std::span<const double> weights, double center) {
  double s0 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s0 += weights[i];
    s2 += weights[i] * (t[i] - center) * (t[i] - center);
  }
  if (!(s0 > 0.0) || !(s2 >= 0.0)) throw std::domain_error("kernel_width: weights have no positive mass");
  return std::sqrt(s2 / s0);
}

KernelCheck verify_equivalent_kernel(const Design& design, double lambda, const PiecewisePenalty& penalty, int m,
                                     double t0, const RealFunction& q) {
  check_order(m);
  design.validate();
  if (!(t0 > 0.0 && t0 < 1.0)) throw std::invalid_argument("verify_equivalent_kernel: t0 must be interior");
  KernelCheck out;
  const auto& t = design.t;
  const auto nearest = std::min_element(t.begin(), t.end(), [&](double a, double b) {
    return std::abs(a - t0) < std::abs(b - t0);
  });
  out.row = static_cast<std::size_t>(nearest - t.begin());
  out.center = *nearest;
  out.beta = std::pow(lambda, -1.0 / (2.0 * m));
  out.regime_warning = out.beta < 5.0;

  auto gram = std::make_shared<const GramContext>(gram_matrix(t, penalty, m));
  const PenalizedSystem system(design, gram, lambda);
  const Eigen::VectorXd row = system.hat_row(static_cast<Eigen::Index>(out.row));

  std::vector<double> sigma2(design.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i) sigma2[i] = 1.0 / design.w[i];
  const RealFunction density = q ? q : RealFunction([](double) { return 1.0; });
  auto r = [t = design.t, sigma2, density](double s) {
    return interpolate_linear(t, sigma2, s) / density(s);
  };
  const WarpFunction wf = warp(penalty, r, m);
  const double n = static_cast<double>(design.size());
  out.t = t;
  out.hat_weight.resize(t.size());
  out.kernel_weight.resize(t.size());
  double diff2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    out.hat_weight[i] = row(static_cast<Eigen::Index>(i));
    out.kernel_weight[i] = eval_J(out.center, t[i], out.beta, wf, m) / (n * density(t[i]));
    diff2 += std::pow(out.hat_weight[i] - out.kernel_weight[i], 2);
    ref2 += out.kernel_weight[i] * out.kernel_weight[i];
  }
  out.discrepancy = std::sqrt(diff2 / ref2);
  return out;
}

EmpiricalBiasVariance empirical_bias_variance(const TruthSpec& truth, const PiecewisePenalty& penalty, int m,
                                              double lambda, std::size_t n, std::size_t replicates,
                                              std::uint64_t seed, double t0) {
  truth.validate();
  if (replicates < 100) throw std::invalid_argument("empirical_bias_variance: need at least 100 replicates");
  if (!(t0 >= 0.0 && t0 <= 1.0)) throw std::invalid_argument("empirical_bias_variance: t0 outside [0,1]");
  std::vector<double> t(n), sd(n), w(n), mean(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    sd[i] = truth.sigma(t[i]);
    if (!(sd[i] > 0.0)) throw std::domain_error("empirical_bias_variance: sigma must be positive");
    w[i] = 1.0 / (sd[i] * sd[i]);
    mean[i] = truth.f0(t[i]);
  }
  const Design base = Design::make(t, mean, w);
  auto gram = std::make_shared<const GramContext>(gram_matrix(t, penalty, m));
  const PenalizedSystem system(base, gram, lambda);

  // f_hat(t0) = k0'c + phi0'd is linear in y
  Eigen::VectorXd k0(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) k0(static_cast<Eigen::Index>(i)) = k_rho(t[i], t0, penalty, m);
  const auto phi = null_basis(m, t0);
  const Eigen::Map<const Eigen::VectorXd> phi0(phi.data(), m);

  std::vector<double> values(replicates);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    const auto eps = replicate_noise(seed, rep, n);
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = mean[i] + sd[i] * eps[i];
    const auto coef = system.solve(y);
    values[rep] = k0.dot(coef.c) + phi0.dot(coef.d);
  }
  EmpiricalBiasVariance out;
  out.replicates = replicates;
  out.mean = sample_mean(values);
  out.bias = out.mean - truth.f0(t0);
  const double s = sample_sd(values);
  out.variance = s * s;
  out.bias_standard_error = s / std::sqrt(static_cast<double>(replicates));
  return out;
}

}  // namespace adaspline
