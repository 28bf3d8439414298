#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "adaspline/numeric.hpp"
#include "adaspline/solver.hpp"

using namespace adaspline;

namespace {

std::vector<double> equispaced(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return t;
}

Design noisy_design(std::size_t n, std::uint64_t seed, double sigma, const std::function<double(double)>& f,
                    bool weighted = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  auto t = equispaced(n);
  std::vector<double> y(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = weighted ? sigma * (0.5 + t[i]) : sigma;
    y[i] = f(t[i]) + s * z(gen);
    if (weighted) w[i] = 1.0 / (s * s);
  }
  return Design::make(t, y, w);
}

double sine(double t) { return std::sin(2.0 * std::numbers::pi * t); }

// Weighted least squares on (1, t, ..., t^{m-1}), solved independently of the library.
Eigen::VectorXd weighted_poly_fit(const Design& d, int m) {
  const auto n = static_cast<Eigen::Index>(d.size());
  Eigen::MatrixXd X(n, m);
  Eigen::VectorXd y(n), sw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) X(i, j) = std::pow(d.t[i], j);
    y(i) = d.y[i];
    sw(i) = std::sqrt(d.w[i]);
  }
  const Eigen::VectorXd beta = (sw.asDiagonal() * X).colPivHouseholderQr().solve(sw.asDiagonal() * y);
  return X * beta;
}

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Fixtures shared by the optimality and consistency checks.
struct Fixture {
  std::string name;
  Design design;
  PiecewisePenalty penalty;
  int m;
  double lambda;
};

std::vector<Fixture> fixtures() {
  PiecewisePenalty two({0.5}, {1.0, 16.0});
  PiecewisePenalty three({0.2, 0.7}, {3.0, 0.1, 1.0});
  return {
      {"sine_m2", noisy_design(200, 1, 0.3, sine), PiecewisePenalty::uniform(), 2, 1e-5},
      {"sine_m1_two_segment", noisy_design(120, 2, 0.3, sine), two, 1, 1e-3},
      {"weighted_m2", noisy_design(150, 3, 0.2, sine, true), three, 2, 1e-6},
      {"line_m3", noisy_design(80, 4, 0.1, [](double t) { return 2.0 - t; }), three, 3, 1e-4},
      {"scaled_m2", noisy_design(60, 5, 50.0, [](double t) { return 1000.0 * t * t; }), two, 2, 1e-3},
  };
}

}  // namespace

TEST(Design, ValidationRules) {
  EXPECT_NO_THROW(Design::make({0.1, 0.2}, {1.0, 2.0}));
  EXPECT_EQ(Design::make({0.1, 0.2}, {1.0, 2.0}).w, (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(Design::make({0.2, 0.1}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Design::make({0.1, 0.1}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Design::make({0.1, 0.2}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Design::make({0.1, 0.2}, {1.0, 2.0}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(Design::make({-0.1, 0.2}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Fit, HandSolvedTwoPointSystem) {
  // m=1, K = [[.25,.25],[.25,.75]], eta = n lambda = 1: c = (-0.4, 0.4), d = 0.4.
  const Design d = Design::make({0.25, 0.75}, {0.0, 1.0});
  const SplineFit f = fit(d, PiecewisePenalty::uniform(), 1, 0.5);
  EXPECT_NEAR(f.c(0), -0.4, 1e-9);
  EXPECT_NEAR(f.c(1), 0.4, 1e-9);
  EXPECT_NEAR(f.d(0), 0.4, 1e-9);
  EXPECT_NEAR(f.fitted(0), 0.4, 1e-9);
  EXPECT_NEAR(f.fitted(1), 0.6, 1e-9);
  // Beyond the last knot an order-1 spline is flat.
  EXPECT_NEAR(predict(f, 1.0), 0.6, 1e-9);
  EXPECT_NEAR(predict(f, 0.0), 0.4, 1e-9);
}

TEST(Fit, PolynomialLimitForLargeLambda) {
  for (int m = 1; m <= 3; ++m) {
    const Design d = noisy_design(100, 10 + m, 0.5, sine, m == 2);
    const SplineFit f = fit(d, PiecewisePenalty({0.3}, {2.0, 0.5}), m, 1e12);
    const Eigen::VectorXd poly = weighted_poly_fit(d, m);
    EXPECT_LE((f.fitted - poly).cwiseAbs().maxCoeff(), 1e-5) << m;
    EXPECT_NEAR(f.hat_trace, m, 1e-3);
  }
}

TEST(Fit, InterpolationLimitForTinyLambda) {
  // Order-1 noisy data and order-2 smooth data; see the ledger for why a
  // noisy order-2 fixture cannot meet this bound under the required jitter.
  const Design noisy = noisy_design(200, 21, 0.7, sine);
  const Design smooth = noisy_design(200, 22, 0.0, [](double t) { return std::exp(t) + sine(t); });
  const Design small = noisy_design(30, 23, 0.3, sine);
  for (const auto& [design, m] : {std::pair{noisy, 1}, std::pair{smooth, 2}, std::pair{small, 2}}) {
    const SplineFit f = fit(design, PiecewisePenalty::uniform(), m, 1e-12);
    const auto [lo, hi] = std::minmax_element(design.y.begin(), design.y.end());
    EXPECT_LE((f.fitted - as_vector(design.y)).cwiseAbs().maxCoeff(), 1e-4 * (*hi - *lo)) << m;
  }
}

TEST(Fit, OnlyProductOfLambdaAndPenaltyMatters) {
  for (const auto& fx : fixtures()) {
    const double c = 7.3;
    const SplineFit a = fit(fx.design, fx.penalty, fx.m, fx.lambda);
    const SplineFit b = fit(fx.design, fx.penalty.scaled(c), fx.m, fx.lambda / c);
    const double scale = std::max(1.0, a.fitted.cwiseAbs().maxCoeff());
    EXPECT_LE((a.fitted - b.fitted).cwiseAbs().maxCoeff(), 1e-8 * scale) << fx.name;
  }
}

TEST(Fit, InvariantsOnFixtures) {
  for (const auto& fx : fixtures()) {
    const SplineFit f = fit(fx.design, fx.penalty, fx.m, fx.lambda);
    const double tc = (f.gram->null_basis.transpose() * f.c).norm();
    EXPECT_LE(tc, 1e-8 * std::max(1.0, f.c.norm())) << fx.name;
    EXPECT_GE(f.hat_trace, fx.m - 1e-8) << fx.name;
    EXPECT_LE(f.hat_trace, static_cast<double>(fx.design.size()) + 1e-8) << fx.name;
    const auto at_design = predict(f, fx.design.t);
    EXPECT_LE((as_vector(at_design) - f.fitted).cwiseAbs().maxCoeff(),
              1e-10 * std::max(1.0, f.fitted.cwiseAbs().maxCoeff()))
        << fx.name;
    const OptimalityReport rep = check_optimality(f);
    EXPECT_TRUE(rep.passed) << fx.name << " max |M_k| = " << rep.max_abs << " tol " << rep.tolerance;
    EXPECT_EQ(rep.moments.size(), static_cast<std::size_t>(fx.m));
  }
}

TEST(Fit, ObjectiveBelowPolynomialStart) {
  for (const auto& fx : fixtures()) {
    const SplineFit f = fit(fx.design, fx.penalty, fx.m, fx.lambda);
    const Eigen::VectorXd poly = weighted_poly_fit(fx.design, fx.m);
    double rss = 0.0;
    for (std::size_t i = 0; i < fx.design.size(); ++i) {
      rss += fx.design.w[i] * std::pow(fx.design.y[i] - poly(static_cast<Eigen::Index>(i)), 2);
    }
    EXPECT_LE(objective(f), rss / static_cast<double>(fx.design.size()) * (1 + 1e-10)) << fx.name;
  }
}

TEST(Fit, ObjectiveNonIncreasingAsLambdaDecreases) {
  const Design d = noisy_design(100, 31, 0.4, sine);
  double previous = std::numeric_limits<double>::infinity();
  auto grid = logspace(1e-7, 1.0, 15);
  std::reverse(grid.begin(), grid.end());
  for (double lambda : grid) {
    const double obj = objective(fit(d, PiecewisePenalty({0.6}, {1.0, 5.0}), 2, lambda));
    EXPECT_LE(obj, previous * (1 + 1e-9)) << lambda;
    previous = obj;
  }
}

TEST(Fit, ObjectiveMatchesDirectEvaluation) {
  // Penalty of f = sum c_i K(t_i,.) equals c'Kc, so the objective is
  // (1/n) sum w r^2 + lambda c'Kc.
  const auto all = fixtures();
  const auto& fx = all[1];
  const SplineFit f = fit(fx.design, fx.penalty, fx.m, fx.lambda);
  const Eigen::VectorXd r = as_vector(fx.design.y) - f.fitted;
  double rss = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) rss += fx.design.w[static_cast<std::size_t>(i)] * r(i) * r(i);
  const double direct = rss / static_cast<double>(r.size()) + fx.lambda * f.c.dot(f.gram->gram * f.c);
  EXPECT_NEAR(objective(f), direct, 1e-10 * direct);
}

TEST(Fit, PerturbedCoefficientsFailOptimality) {
  const auto all = fixtures();
  const auto& fx = all[0];
  SplineFit f = fit(fx.design, fx.penalty, fx.m, fx.lambda);
  f.c *= 1.01;
  f.d *= 1.01;
  f.fitted = as_vector(predict(f, fx.design.t));
  EXPECT_FALSE(check_optimality(f).passed);
}

TEST(Fit, DomainErrors) {
  const Design d = noisy_design(20, 1, 0.1, sine);
  EXPECT_THROW(fit(d, PiecewisePenalty::uniform(), 2, 0.0), std::domain_error);
  EXPECT_THROW(fit(d, PiecewisePenalty::uniform(), 2, -1.0), std::domain_error);
  const SplineFit f = fit(d, PiecewisePenalty::uniform(), 2, 1e-3);
  EXPECT_THROW(predict(f, 1.01), std::out_of_range);
  EXPECT_THROW(predict(f, -0.01), std::out_of_range);
}

TEST(HatMatrix, ReproducesFittedValues) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  for (const auto& fx : fixtures()) {
    const Eigen::MatrixXd A = hat_matrix(fx.design, fx.penalty, fx.m, fx.lambda);
    for (int rep = 0; rep < 10; ++rep) {
      Design d = fx.design;
      for (double& y : d.y) y = z(gen);
      const SplineFit f = fit(d, fx.penalty, fx.m, fx.lambda);
      EXPECT_LE((A * as_vector(d.y) - f.fitted).cwiseAbs().maxCoeff(), 1e-8) << fx.name;
    }
    EXPECT_NEAR(A.trace(), fit(fx.design, fx.penalty, fx.m, fx.lambda).hat_trace, 1e-8);
  }
}

TEST(HatMatrix, EigenvaluesInUnitIntervalForUniformWeights) {
  const Design d = noisy_design(40, 12, 0.3, sine);
  for (double lambda : {1e-8, 1e-4, 1.0}) {
    const Eigen::MatrixXd A = hat_matrix(d, PiecewisePenalty({0.5}, {1.0, 9.0}), 2, lambda);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    for (const auto& ev : es.eigenvalues()) {
      EXPECT_NEAR(ev.imag(), 0.0, 1e-8);
      EXPECT_GE(ev.real(), -1e-8);
      EXPECT_LE(ev.real(), 1.0 + 1e-8);
    }
  }
}

TEST(Criteria, NullSpaceResponseGivesZeroNumerator) {
  const auto t = equispaced(30);
  std::vector<double> y;
  for (double x : t) y.push_back(3.0 - 2.0 * x);
  const Design d = Design::make(t, y);
  for (double lambda : {1e-6, 1e-2, 1.0}) {
    EXPECT_NEAR(gcv(d, PiecewisePenalty::uniform(), 2, lambda), 0.0, 1e-12);
    EXPECT_NEAR(gml(d, PiecewisePenalty::uniform(), 2, lambda), 0.0, 1e-12);
  }
}

TEST(Criteria, InvariantUnderLambdaPenaltyRescaling) {
  const auto all = fixtures();
  const auto& fx = all[1];
  const double c = 7.3;
  for (double lambda : {1e-5, 1e-3, 1e-1}) {
    const double g1 = gcv(fx.design, fx.penalty, fx.m, lambda);
    const double g2 = gcv(fx.design, fx.penalty.scaled(c), fx.m, lambda / c);
    EXPECT_NEAR(g1, g2, 1e-8 * g1);
    const double m1 = gml(fx.design, fx.penalty, fx.m, lambda);
    const double m2 = gml(fx.design, fx.penalty.scaled(c), fx.m, lambda / c);
    EXPECT_NEAR(m1, m2, 1e-8 * m1);
  }
}

TEST(Criteria, SpectralProfileAgreesWithExplicitHatMatrix) {
  for (const auto& fx : fixtures()) {
    const auto gram = gram_matrix(fx.design.t, fx.penalty, fx.m);
    const LambdaProfile profile(fx.design, gram);
    for (double lambda : {1e-7, 1e-4, 1e-1}) {
      const double g = gcv(fx.design, fx.penalty, fx.m, lambda);
      const double l = gml(fx.design, fx.penalty, fx.m, lambda);
      EXPECT_NEAR(profile.gcv(lambda), g, 1e-7 * g) << fx.name << " " << lambda;
      EXPECT_NEAR(profile.gml(lambda), l, 1e-7 * l) << fx.name << " " << lambda;
      const double tr = static_cast<double>(fx.design.size()) - fit(fx.design, fx.penalty, fx.m, lambda).hat_trace;
      EXPECT_NEAR(profile.residual_trace(lambda), tr, 1e-7 * tr);
    }
  }
}

TEST(Criteria, GcvArgminInteriorForNoisyLine) {
  const Design d = noisy_design(20, 77, 0.3, [](double t) { return 1.0 + 2.0 * t + 0.8 * sine(t); });
  const auto grid = logspace(1e-8, 1.0, 40);
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double g = gcv(d, PiecewisePenalty::uniform(), 2, grid[k]);
    if (g < best_value) best_value = g, best = k;
  }
  EXPECT_GT(best, 0u);
  EXPECT_LT(best, grid.size() - 1);
}

TEST(Criteria, GcvAndGmlArgminsClose) {
  const Design d = noisy_design(20, 3, 0.3, sine);
  const auto grid = logspace(1e-8, 1.0, 40);
  auto argmin = [&](auto crit) {
    std::size_t best = 0;
    double bv = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double v = crit(grid[k]);
      if (v < bv) bv = v, best = k;
    }
    return static_cast<long>(best);
  };
  const long a = argmin([&](double l) { return gcv(d, PiecewisePenalty::uniform(), 2, l); });
  const long b = argmin([&](double l) { return gml(d, PiecewisePenalty::uniform(), 2, l); });
  EXPECT_LE(std::labs(a - b), 1) << "gcv index " << a << ", gml index " << b;
}

TEST(Criteria, DegenerateTraceThrows) {
  // n == m leaves no residual degrees of freedom.
  const Design d = Design::make({0.2, 0.8}, {1.0, 3.0});
  EXPECT_THROW(gcv(d, PiecewisePenalty::uniform(), 2, 1e-3), DegenerateFitError);
}

TEST(SelectLambda, ConstantCriterionTiesToSmallest) {
  LambdaGrid grid;
  EXPECT_DOUBLE_EQ(minimize_on_log_grid([](double) { return 1.0; }, grid), grid.lo);
}

TEST(SelectLambda, RecoversKnownMinimum) {
  LambdaGrid grid;
  const double target = 3.7e-4;
  const double got = minimize_on_log_grid([&](double l) { return std::pow(std::log(l / target), 2); }, grid);
  EXPECT_NEAR(std::log(got), std::log(target), 1e-3);
}

TEST(SelectLambda, DegenerateEvaluationsSkippedOrFatal) {
  LambdaGrid grid;
  const double got = minimize_on_log_grid(
      [](double l) {
        if (l < 1e-4) throw DegenerateFitError("degenerate");
        return l;
      },
      grid);
  EXPECT_GE(got, 1e-4);
  EXPECT_LT(got, 1e-3);
  EXPECT_THROW(minimize_on_log_grid([](double) { return std::nan(""); }, grid), std::runtime_error);
}

TEST(SelectLambda, NoiselessPolynomialPicksLargestLambda) {
  const auto t = equispaced(40);
  std::vector<double> y;
  for (double x : t) y.push_back(0.5 - 3.0 * x);
  const Design d = Design::make(t, y);
  LambdaGrid grid;
  // Residuals vanish for every lambda, so the criterion only sees rounding.
  const auto gram = gram_matrix(d.t, PiecewisePenalty::uniform(), 2);
  const LambdaProfile profile(d, gram);
  for (double l : logspace(grid.lo, grid.hi, 5)) EXPECT_LT(profile.gcv(l), 1e-20);
  EXPECT_TRUE(profile.null_space_response());
  EXPECT_EQ(select_lambda(profile, Criterion::GCV, grid), grid.hi);
  EXPECT_EQ(select_lambda(profile, Criterion::GML, grid), grid.hi);
}

TEST(SelectLambda, CriterionNamesRoundTrip) {
  EXPECT_EQ(parse_criterion("gcv"), Criterion::GCV);
  EXPECT_EQ(parse_criterion("GML"), Criterion::GML);
  EXPECT_EQ(to_string(Criterion::GML), "gml");
  EXPECT_THROW(parse_criterion("aic"), std::invalid_argument);
}

TEST(Optimality, WeightedDesignStillSatisfiesMoments) {
  const Design d = noisy_design(150, 41, 0.2, sine, true);
  const double lambda = select_lambda(d, PiecewisePenalty::uniform(), 2, Criterion::GCV);
  const SplineFit f = fit(d, PiecewisePenalty::uniform(), 2, lambda);
  const OptimalityReport rep = check_optimality(f);
  EXPECT_TRUE(rep.passed) << rep.max_abs;
  // Independent recomputation of M_k.
  for (int k = 0; k < 2; ++k) {
    double mk = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      mk += d.w[i] * (f.fitted(static_cast<Eigen::Index>(i)) - d.y[i]) * std::pow(d.t[i], k);
    }
    EXPECT_NEAR(rep.moments[static_cast<std::size_t>(k)], mk / static_cast<double>(d.size()), 1e-12);
  }
}
