#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "adaspline/numeric.hpp"
#include "adaspline/sim.hpp"

using namespace adaspline;

namespace {

ScenarioSpec custom(Truth f0, double sigma, std::size_t reps, std::uint64_t seed, std::size_t n = 100) {
  ScenarioSpec s;
  s.name = "custom";
  s.f0 = std::move(f0);
  s.sigma = sigma;
  s.replicates = reps;
  s.seed = seed;
  s.n = n;
  return s;
}

MethodResults fake_results(const std::vector<double>& ises) {
  MethodResults r;
  for (std::size_t i = 0; i < ises.size(); ++i) {
    ReplicateResult x;
    x.replicate = i;
    x.ok = true;
    x.ise = ises[i];
    x.curve = {ises[i], 2 * ises[i]};
    r.replicates.push_back(x);
  }
  return r;
}

}  // namespace

TEST(Truths, BenchmarkFunctions) {
  EXPECT_EQ(heaviside_truth(0.4999), 0.0);
  EXPECT_EQ(heaviside_truth(0.5), 5.0);
  // -1 + 1.5*0.6 + 0.2 / (0.02 sqrt(2 pi)).
  const double peak = -0.1 + 0.2 / (0.02 * std::sqrt(2 * std::numbers::pi));
  EXPECT_NEAR(mexican_hat_truth(0.6), peak, 1e-12);
  EXPECT_NEAR(peak, 3.88942, 1e-5);
  EXPECT_NEAR(mexican_hat_truth(0.0), -1.0, 1e-12);
}

TEST(Scenario, NamedScenariosAndValidation) {
  const auto h = make_scenario("heaviside", 10, 1);
  EXPECT_EQ(h.n, 200u);
  EXPECT_EQ(h.sigma, 0.7);
  EXPECT_EQ(make_scenario("mexican_hat", 10, 1).sigma, 0.25);
  EXPECT_THROW(make_scenario("doppler", 10, 1), std::invalid_argument);
  EXPECT_THROW(make_scenario("heaviside", 0, 1), std::invalid_argument);
  EXPECT_THROW(custom([](double) { return 0.0; }, -1.0, 1, 1).validate(), std::invalid_argument);
  EXPECT_THROW(custom([](double) { return 0.0; }, 1.0, 1, 1, 5).validate(), std::invalid_argument);
}

TEST(Scenario, NoiselessDataEqualsTruth) {
  const auto s = custom(mexican_hat_truth, 0.0, 3, 9, 200);
  const Design d = gen_scenario(s, 2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_DOUBLE_EQ(d.t[i], static_cast<double>(i + 1) / 200.0);
    EXPECT_EQ(d.y[i], mexican_hat_truth(d.t[i]));
  }
  EXPECT_THROW(gen_scenario(s, 3), std::out_of_range);
}

TEST(Scenario, HeavisideNoiseCentredOnTruth) {
  const auto s = make_scenario("heaviside", 400, 77);
  // y at t = 0.75 (index 149) across replicates has mean 5 and sd 0.7.
  std::vector<double> y;
  for (std::size_t r = 0; r < s.replicates; ++r) y.push_back(gen_scenario(s, r).y[149]);
  EXPECT_NEAR(sample_mean(y), 5.0, 3 * 0.7 / std::sqrt(400.0));
  EXPECT_NEAR(sample_sd(y), 0.7, 0.1);
}

TEST(Scenario, NoiseStreamsKeyedBySeedAndReplicate) {
  const auto a = replicate_noise(5, 3, 50);
  EXPECT_EQ(a, replicate_noise(5, 3, 50));
  EXPECT_NE(a, replicate_noise(5, 4, 50));
  EXPECT_NE(a, replicate_noise(6, 3, 50));
  // Prefix-stable: a longer draw begins with the shorter one.
  const auto longer = replicate_noise(5, 3, 80);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), longer.begin()));
  // Order independence of generation.
  const auto s = make_scenario("heaviside", 5, 1);
  const Design late = gen_scenario(s, 4);
  (void)gen_scenario(s, 0);
  EXPECT_EQ(late, gen_scenario(s, 4));
}

TEST(Metrics, IseOnGridMatchesAnalyticIntegrals) {
  const auto grid = linspace(0.0, 1.0, 1001);
  auto f0 = [](double t) { return std::sin(3 * t); };
  std::vector<double> same, plus_one, plus_t;
  for (double t : grid) {
    same.push_back(f0(t));
    plus_one.push_back(f0(t) + 1.0);
    plus_t.push_back(f0(t) + t);
  }
  EXPECT_NEAR(ise(same, f0), 0.0, 1e-15);
  EXPECT_NEAR(ise(plus_one, f0), 1.0, 1e-12);
  EXPECT_NEAR(ise(plus_t, f0), 1.0 / 3.0, 1e-12);
}

TEST(Metrics, IseAndPaeOfFittedLine) {
  // A huge lambda reproduces the exact line y = t.
  std::vector<double> t, y;
  for (int i = 1; i <= 20; ++i) {
    t.push_back(i / 20.0);
    y.push_back(i / 20.0);
  }
  const SplineFit f = fit(Design::make(t, y), PiecewisePenalty::uniform(), 2, 1e12);
  EXPECT_NEAR(ise(f, [](double x) { return x; }), 0.0, 1e-12);
  EXPECT_NEAR(ise(f, [](double) { return 0.0; }), 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(pae(f, [](double x) { return x; }, 0.4), 0.0, 1e-9);
  EXPECT_NEAR(pae(f, [](double x) { return x - 0.3; }, 0.4), 0.3, 1e-9);
  EXPECT_THROW(ise(f, [](double x) { return x; }, 50), std::invalid_argument);
}

TEST(Methods, ParseAndName) {
  const auto m = parse_methods("ss,eqk,adss");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0], Method::SS);
  EXPECT_EQ(m[2], Method::ADSS);
  EXPECT_EQ(to_string(Method::EQK), "EQK");
  EXPECT_EQ(parse_methods("ADSS").front(), Method::ADSS);
  EXPECT_THROW(parse_methods("ss,loco"), std::invalid_argument);
  EXPECT_THROW(parse_methods(""), std::invalid_argument);
  EXPECT_THROW(parse_methods("ss,SS"), std::invalid_argument);
}

TEST(Methods, EqualKnotComparatorUsesSixSegments) {
  const auto s = make_scenario("heaviside", 1, 3);
  const SplineFit f = fit_eqk(gen_scenario(s, 0), BenchmarkConfig{});
  ASSERT_EQ(f.penalty.knots().size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(f.penalty.knots()[k], (k + 1) / 6.0, 1e-15);
  EXPECT_TRUE(check_optimality(f).passed);
}

TEST(Benchmark, NoiselessSingleReplicateIsNearlyExact) {
  const auto s = custom([](double t) { return std::sin(2 * std::numbers::pi * t) + t; }, 0.0, 1, 1, 200);
  const auto run = run_benchmark(s, parse_methods("ss,eqk,adss"));
  for (const auto& row : run.table) {
    EXPECT_EQ(row.succeeded, 1u);
    EXPECT_LE(row.ise.mean, 1e-3) << to_string(row.method);
  }
}

TEST(Benchmark, IseScalesQuadraticallyWithResponse) {
  const double c = 3.0;
  auto f = [](double t) { return std::cos(4 * t); };
  const auto a = run_benchmark(custom(f, 0.3, 4, 21), {Method::SS});
  const auto b = run_benchmark(custom([&](double t) { return c * f(t); }, 0.3 * c, 4, 21), {Method::SS});
  EXPECT_NEAR(b.table[0].ise.mean, c * c * a.table[0].ise.mean, 1e-8 * b.table[0].ise.mean);
}

TEST(Benchmark, DeterministicAcrossThreadCounts) {
  const auto s = make_scenario("mexican_hat", 4, 8);
  BenchmarkConfig one, many;
  one.threads = 1;
  many.threads = 3;
  const auto a = run_benchmark(s, parse_methods("ss,adss"), one);
  const auto b = run_benchmark(s, parse_methods("ss,adss"), many);
  for (std::size_t k = 0; k < a.results.size(); ++k) {
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_EQ(a.results[k].replicates[r].ise, b.results[k].replicates[r].ise);
      EXPECT_EQ(a.results[k].replicates[r].curve, b.results[k].replicates[r].curve);
    }
    EXPECT_EQ(a.table[k].ise.mean, b.table[k].ise.mean);
    EXPECT_EQ(a.table[k].ise.sd, b.table[k].ise.sd);
  }
}

TEST(Benchmark, SummaryStatisticsFromReplicates) {
  const auto run = run_benchmark(make_scenario("heaviside", 5, 2), {Method::SS});
  std::vector<double> ises, pae4;
  for (const auto& r : run.results[0].replicates) {
    ises.push_back(r.ise);
    pae4.push_back(r.pae[1]);
    EXPECT_GE(r.ise, 0.0);
  }
  EXPECT_DOUBLE_EQ(run.table[0].ise.mean, sample_mean(ises));
  EXPECT_DOUBLE_EQ(run.table[0].ise.sd, sample_sd(ises));
  EXPECT_DOUBLE_EQ(run.table[0].pae[1].mean, sample_mean(pae4));
  EXPECT_EQ(run.table[0].succeeded, 5u);
  EXPECT_EQ(run.table[0].failures, 0u);
}

TEST(MedianReplicate, RankRule) {
  EXPECT_EQ(median_replicate(fake_results({0.7})), 0u);
  EXPECT_EQ(median_replicate(fake_results({0.2, 0.2, 0.2, 0.2})), 0u);
  std::vector<double> ises;
  for (int i = 0; i < 100; ++i) ises.push_back(std::fmod(37.0 * i, 101.0));
  const std::size_t idx = median_replicate(fake_results(ises));
  auto sorted = ises;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(ises[idx], sorted[49]);
  MethodResults none;
  EXPECT_THROW(median_replicate(none), std::invalid_argument);
}

TEST(QuantileBands, SingleCurveAndMedian) {
  const auto one = fake_results({0.4});
  const auto b = quantile_bands(one, {0.025, 0.975});
  EXPECT_EQ(b[0], one.replicates[0].curve);
  EXPECT_EQ(b[1], one.replicates[0].curve);
  const auto three = fake_results({1.0, 3.0, 2.0});
  EXPECT_EQ(quantile_bands(three, {0.5})[0], (std::vector<double>{2.0, 4.0}));
  EXPECT_THROW(quantile_bands(three, {1.0}), std::invalid_argument);
}

TEST(QuantileBands, BracketLinearTruth) {
  auto line = [](double t) { return 1.0 - t; };
  const auto run = run_benchmark(custom(line, 0.3, 60, 5), {Method::SS});
  const auto bands = quantile_bands(run.results[0], {0.025, 0.975});
  std::size_t covered = 0;
  for (std::size_t k = 0; k < run.band_grid.size(); ++k) {
    const double f = line(run.band_grid[k]);
    if (bands[0][k] <= f && f <= bands[1][k]) ++covered;
  }
  EXPECT_GE(static_cast<double>(covered), 0.9 * static_cast<double>(run.band_grid.size()));
}
