#include "adaspline/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

#include "adaspline/kernels.hpp"
#include "adaspline/numeric.hpp"

namespace adaspline {

namespace {

double gauss(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

double rule_of_thumb(std::span<const double> x) {
  return 1.06 * sample_sd(x) * std::pow(static_cast<double>(x.size()), -0.2);
}

// Local-linear regression of v on t at x with a Gaussian kernel.
double local_linear(std::span<const double> t, std::span<const double> v, double x, double h) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = t[i] - x;
    const double k = gauss(d / h);
    s0 += k;
    s1 += k * d;
    s2 += k * d * d;
    t0 += k * v[i];
    t1 += k * d * v[i];
  }
  const double det = s0 * s2 - s1 * s1;
  if (det <= 1e-12 * s0 * s2 || s0 <= 0.0) return s0 > 0.0 ? t0 / s0 : 0.0;
  return (s2 * t0 - s1 * t1) / det;
}

template <class F>
auto staged(const char* stage, F&& body) {
  try {
    return body();
  } catch (const AdaptStageError&) {
    throw;
  } catch (const std::exception& e) {
    throw AdaptStageError(stage, e.what());
  }
}

}  // namespace

void AdaptConfig::validate() const {
  if (S_grid.empty() || gamma_grid.empty()) throw std::invalid_argument("adapt: S and gamma grids must be nonempty");
  for (double g : gamma_grid) {
    if (!(g >= 1.0) || !std::isfinite(g)) throw std::invalid_argument("adapt: gamma values must be >= 1");
  }
  for (std::size_t s : S_grid) {
    if (s >= density_grid_size) throw std::invalid_argument("adapt: S must be below the density grid size");
  }
  if (m < 1 || m > kMaxKernelOrder) throw std::invalid_argument("adapt: m must be in 1..4");
  if (curve_grid_size < 11) throw std::invalid_argument("adapt: curve grid too coarse");
}

KnotSelection select_knots(const Design& design, std::size_t S, std::size_t grid_size) {
  design.validate();
  if (S >= grid_size) throw std::invalid_argument("select_knots: S must be smaller than grid_size");
  if (design.size() < 10) throw std::invalid_argument("select_knots: need at least 10 observations");
  KnotSelection out;
  if (S == 0) return out;
  const auto& t = design.t;
  const auto& y = design.y;
  const double ht = rule_of_thumb(t);
  const double hy = rule_of_thumb(y);
  if (!(hy > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  constexpr std::size_t kYPoints = 256;
  const auto ygrid = linspace(*ylo - 4.0 * hy, *yhi + 4.0 * hy, kYPoints);
  const double ystep = ygrid[1] - ygrid[0];
  const std::size_t n = t.size();
  Eigen::MatrixXd ky(n, kYPoints);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kYPoints; ++j) ky(i, j) = gauss((ygrid[j] - y[i]) / hy) / hy;
  }
  auto conditional = [&](double s) {
    Eigen::VectorXd a(n);
    for (std::size_t i = 0; i < n; ++i) a(i) = gauss((s - t[i]) / ht);
    const double total = a.sum();
    if (total <= 0.0) throw std::domain_error("select_knots: no design mass near candidate knot");
    return Eigen::VectorXd(ky.transpose() * (a / total));
  };

  std::vector<Eigen::VectorXd> dens(grid_size + 1);
  for (std::size_t k = 1; k <= grid_size; ++k) dens[k] = conditional(static_cast<double>(k) / grid_size);
  out.scores.assign(grid_size - 1, 0.0);
  for (std::size_t k = 1; k < grid_size; ++k) {
    const Eigen::VectorXd diff = (dens[k] - dens[k + 1]).cwiseAbs();
    out.scores[k - 1] = simpson(std::span<const double>(diff.data(), kYPoints), ystep);
  }

  std::vector<std::size_t> order(out.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  std::vector<std::size_t> chosen;
  for (std::size_t idx : order) {
    if (chosen.size() == S) break;
    const bool clear = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
      return (idx > c ? idx - c : c - idx) >= 2;
    });
    if (clear) chosen.push_back(idx);
  }
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t idx : chosen) out.knots.push_back(static_cast<double>(idx + 1) / grid_size);
  return out;
}

VarianceEstimate estimate_variance(const Design& design, std::optional<double> bandwidth, int m,
                                   std::size_t grid_size) {
  design.validate();
  if (design.size() < 20) throw std::invalid_argument("estimate_variance: need at least 20 observations");
  VarianceEstimate out;
  const Design pilot = Design::make(design.t, design.y);
  const auto gram = std::make_shared<const GramContext>(gram_matrix(pilot.t, PiecewisePenalty::uniform(), m));
  out.pilot_lambda = select_lambda(LambdaProfile(pilot, *gram), Criterion::GCV);
  const PenalizedSystem system(pilot, gram, out.pilot_lambda);
  const auto coef = system.solve(Eigen::Map<const Eigen::VectorXd>(pilot.y.data(), static_cast<Eigen::Index>(pilot.y.size())));
  const Eigen::VectorXd fitted = gram->gram * coef.c + gram->null_basis * coef.d;
  // E[e_i^2] = sigma^2 sum_j (I - A)_ij^2 under locally constant variance, so
  // each squared residual is divided by that row norm to undo the shrinkage.
  const Eigen::MatrixXd resid_op =
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(design.size()), static_cast<Eigen::Index>(design.size())) -
      system.hat_matrix();

  std::vector<double> sq(design.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double r = design.y[i] - fitted(row);
    sq[i] = r * r / std::max(resid_op.row(row).squaredNorm(), 1e-3);
  }
  out.bandwidth = bandwidth.value_or(rule_of_thumb(design.t));
  if (!(out.bandwidth > 0.0)) throw std::invalid_argument("estimate_variance: bandwidth must be positive");
  out.grid = linspace(0.0, 1.0, grid_size);
  out.values.resize(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k) out.values[k] = local_linear(design.t, sq, out.grid[k], out.bandwidth);
  out.at_design.resize(design.size());
  for (std::size_t i = 0; i < design.size(); ++i) out.at_design[i] = local_linear(design.t, sq, design.t[i], out.bandwidth);

  out.floor = std::max(1e-8, 1e-4 * median(out.values));
  for (double& v : out.values) v = std::max(v, out.floor);
  for (double& v : out.at_design) v = std::max(v, out.floor);
  return out;
}

CurveEstimate estimate_f2m(const Design& design, int m, std::size_t grid_size, Criterion criterion) {
  design.validate();
  const int p = 2 * m;
  if (design.size() < static_cast<std::size_t>(2 * p)) {
    throw std::invalid_argument("estimate_f2m: need at least 4m observations for the order-2m pilot");
  }
  CurveEstimate out;
  const auto gram = std::make_shared<const GramContext>(gram_matrix(design.t, PiecewisePenalty::uniform(), p));
  // higher-order pilots put the GCV optimum far below the default grid
  LambdaGrid grid;
  grid.lo = std::min(grid.lo, std::pow(10.0, -4.0 * p));
  grid.points = static_cast<std::size_t>(std::lround(5.0 * std::log10(grid.hi / grid.lo)));
  out.lambda = select_lambda(LambdaProfile(design, *gram), criterion, grid);
  const SplineFit f = fit(design, gram, out.lambda);
  out.grid.resize(grid_size - 1);
  out.values.resize(grid_size - 1);
  const double h = 1.0 / static_cast<double>(grid_size - 1);
  for (std::size_t k = 0; k + 1 < grid_size; ++k) {
    out.grid[k] = (static_cast<double>(k) + 0.5) * h;
    out.values[k] = predict_derivative(f, out.grid[k], p);
  }
  return out;
}

bool is_equispaced(std::span<const double> t) {
  if (t.size() < 3) return true;
  const double mean_gap = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - mean_gap) > 0.1 * mean_gap) return false;
  }
  return true;
}

std::vector<double> estimate_design_density(std::span<const double> t, std::span<const double> grid) {
  std::vector<double> q(grid.size(), 1.0);
  if (is_equispaced(t)) return q;
  const double h = rule_of_thumb(t);
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double acc = 0.0;
    for (double ti : t) acc += gauss((grid[k] - ti) / h);
    q[k] = std::max(acc / (n * h), 1e-8);
  }
  return q;
}

SegmentIntegrals segment_integrals(double lo, double hi, std::span<const double> grid, std::span<const double> r,
                                   std::span<const double> f2m, int m) {
  if (!(hi > lo)) throw std::invalid_argument("segment_integrals: empty segment");
  std::vector<double> x{lo};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double spacing = k + 1 < grid.size() ? grid[k + 1] - grid[k] : grid[k] - grid[k - 1];
    // nodes hugging an endpoint would give wildly uneven Simpson panels
    if (grid[k] > lo + 0.49 * spacing && grid[k] < hi - 0.49 * spacing) x.push_back(grid[k]);
  }
  if (x.size() < 2) {
    throw std::invalid_argument("segment_integrals: no curve grid point inside segment (" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]; use a finer grid");
  }
  x.push_back(hi);
  std::vector<double> a(x.size()), b(x.size());
  const double expo = 1.0 - 1.0 / (2.0 * m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double rv = interpolate_linear(grid, r, x[i]);
    const double fv = interpolate_linear(grid, f2m, x[i]);
    a[i] = rv * rv * fv * fv;
    b[i] = std::pow(rv, expo);
  }
  return {simpson_nonuniform(x, a), simpson_nonuniform(x, b)};
}

PiecewisePenalty optimal_rho(const std::vector<double>& knots, std::span<const double> grid, std::span<const double> r,
                             std::span<const double> f2m, int m, double L0) {
  if (grid.size() != r.size() || grid.size() != f2m.size() || grid.size() < 2) {
    throw std::invalid_argument("optimal_rho: curve sizes do not match the grid");
  }
  if (!std::is_sorted(knots.begin(), knots.end())) throw std::invalid_argument("optimal_rho: knots must be sorted");
  for (double v : r) {
    if (!(v > 0.0)) throw std::invalid_argument("optimal_rho: r must be positive");
  }
  std::vector<double> integrand(grid.size());
  double peak = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    integrand[k] = r[k] * r[k] * f2m[k] * f2m[k];
    peak = std::max(peak, integrand[k]);
  }
  const double level = std::max({1e-8 * median(integrand), 1e-12 * peak, std::numeric_limits<double>::min()});
  const double power = 2.0 * m / (4.0 * m + 1.0);
  std::vector<double> values;
  for (std::size_t j = 0; j <= knots.size(); ++j) {
    const double lo = j == 0 ? 0.0 : knots[j - 1];
    const double hi = j == knots.size() ? 1.0 : knots[j];
    const auto seg = segment_integrals(lo, hi, grid, r, f2m, m);
    const double denom = std::max(seg.bias, level * (hi - lo));
    values.push_back(std::pow(L0 * seg.variance / (4.0 * m * denom), power));
  }
  return PiecewisePenalty(knots, std::move(values));
}

PiecewisePenalty power_up(const PiecewisePenalty& penalty, double gamma) {
  if (!(gamma >= 1.0)) throw std::invalid_argument("power_up: gamma must be >= 1");
  const auto& v = penalty.values();
  double log_mean = 0.0;
  for (double x : v) log_mean += std::log(x) / static_cast<double>(v.size());
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::exp(gamma * (std::log(v[j]) - log_mean));
  return PiecewisePenalty(penalty.knots(), std::move(out), gamma);
}

double gaic(const LambdaProfile& profile, double lambda, std::size_t S) {
  return gml_neg2_loglik(profile.gml(lambda), profile.n(), profile.m()) + 2.0 * static_cast<double>(S);
}

double gaic(const SplineFit& f, std::size_t S) { return gaic(LambdaProfile(f.design, *f.gram), f.lambda, S); }

AdaptResult adapt_fit(const Design& design, const AdaptConfig& config) {
  config.validate();
  design.validate();
  const int m = config.m;
  if (design.size() < static_cast<std::size_t>(4 * m)) throw std::invalid_argument("adapt_fit: need n >= 4m");

  AdaptResult out;
  out.variance = staged("variance", [&] { return estimate_variance(design, std::nullopt, m, config.curve_grid_size); });
  std::vector<double> w(design.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / out.variance.at_design[i];
  const double wmean = sample_mean(w);
  for (double& x : w) x /= wmean;
  const Design weighted = Design::make(design.t, design.y, w);

  out.f2m = staged("f2m", [&] { return estimate_f2m(weighted, m, config.curve_grid_size, config.f2m_criterion); });
  const auto q = estimate_design_density(design.t, out.f2m.grid);
  out.r_curve.resize(out.f2m.grid.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    out.r_curve[k] = interpolate_linear(out.variance.grid, out.variance.values, out.f2m.grid[k]) / q[k];
  }

  struct Base {
    std::size_t S;
    std::size_t found;
    PiecewisePenalty penalty;
  };
  std::vector<Base> bases;
  for (std::size_t S : config.S_grid) {
    const auto knots = staged("knots", [&] { return select_knots(weighted, S, config.density_grid_size); });
    PiecewisePenalty base = knots.knots.empty()
                                ? PiecewisePenalty::uniform()
                                : staged("rho", [&] {
                                    return optimal_rho(knots.knots, out.f2m.grid, out.r_curve, out.f2m.values, m,
                                                       kernel_L0(m));
                                  });
    bases.push_back({S, knots.knots.size(), std::move(base)});
  }

  struct Cell {
    GaicEntry entry;
    PiecewisePenalty penalty;
    std::shared_ptr<const GramContext> gram;
  };
  std::vector<Cell> cells;
  for (const auto& b : bases) {
    for (double g : config.gamma_grid) cells.push_back({{b.S, g, b.found, 0.0, 0.0}, power_up(b.penalty, g), nullptr});
  }
  const unsigned threads = config.threads == 0 ? default_thread_count() : config.threads;
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    auto& cell = cells[i];
    cell.gram = std::make_shared<const GramContext>(gram_matrix(weighted.t, cell.penalty, m));
    const LambdaProfile profile(weighted, *cell.gram);
    cell.entry.lambda = select_lambda(profile, Criterion::GCV);
    cell.entry.score = gaic(profile, cell.entry.lambda, cell.entry.S);
  });

  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = cells[a].entry;
    const auto& y = cells[b].entry;
    return x.S != y.S ? x.S < y.S : x.gamma < y.gamma;
  });
  std::size_t best = order.front();
  for (std::size_t idx : order) {
    out.gaic_table.push_back(cells[idx].entry);
    if (cells[idx].entry.score < cells[best].entry.score) best = idx;
  }
  out.selected_S = cells[best].entry.S;
  out.selected_gamma = cells[best].entry.gamma;
  out.penalty = cells[best].penalty;
  out.fit = staged("fit", [&] { return fit(weighted, cells[best].gram, cells[best].entry.lambda); });
  out.optimality = check_optimality(out.fit);
  if (!out.optimality.passed) {
    throw AdaptStageError("fit", "selected fit fails the null-space moment conditions (max |M_k| = " +
                                     std::to_string(out.optimality.max_abs) + ")");
  }
  return out;
}

}  // namespace adaspline
