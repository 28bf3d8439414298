#include "adaspline/sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "adaspline/numeric.hpp"

namespace adaspline {

double heaviside_truth(double t) { return t >= 0.5 ? 5.0 : 0.0; }

double mexican_hat_truth(double t) {
  constexpr double s = 0.02;
  const double u = (t - 0.6) / s;
  return -1.0 + 1.5 * t + 0.2 * std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * std::numbers::pi));
}

void ScenarioSpec::validate() const {
  if (n < 10) throw std::invalid_argument("scenario: n must be at least 10");
  if (replicates < 1) throw std::invalid_argument("scenario: need at least one replicate");
  if (!(sigma >= 0.0)) throw std::invalid_argument("scenario: sigma must be nonnegative");
  if (!f0) throw std::invalid_argument("scenario: missing truth function");
}

ScenarioSpec make_scenario(const std::string& name, std::size_t replicates, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.name = name;
  spec.replicates = replicates;
  spec.seed = seed;
  if (name == "heaviside") {
    spec.sigma = 0.7;
    spec.f0 = heaviside_truth;
  } else if (name == "mexican_hat") {
    spec.sigma = 0.25;
    spec.f0 = mexican_hat_truth;
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "' (expected heaviside or mexican_hat)");
  }
  spec.validate();
  return spec;
}

std::vector<double> replicate_noise(std::uint64_t seed, std::size_t replicate, std::size_t count) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  std::mt19937_64 engine(seq);
  std::normal_distribution<double> normal;
  std::vector<double> out(count);
  for (double& e : out) e = normal(engine);
  return out;
}

Design gen_scenario(const ScenarioSpec& spec, std::size_t replicate) {
  spec.validate();
  if (replicate >= spec.replicates) throw std::out_of_range("gen_scenario: replicate index out of range");
  const auto eps = replicate_noise(spec.seed, replicate, spec.n);
  std::vector<double> t(spec.n), y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    t[i] = static_cast<double>(i + 1) / static_cast<double>(spec.n);
    y[i] = spec.f0(t[i]) + spec.sigma * eps[i];
  }
  return Design::make(std::move(t), std::move(y));
}

double ise(std::span<const double> fitted_on_grid, const Truth& f0) {
  const std::size_t g = fitted_on_grid.size();
  if (g < 2) throw std::invalid_argument("ise: grid too small");
  std::vector<double> sq(g);
  for (std::size_t k = 0; k < g; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(g - 1);
    const double e = fitted_on_grid[k] - f0(t);
    sq[k] = e * e;
  }
  return simpson(sq, 1.0 / static_cast<double>(g - 1));
}

double ise(const SplineFit& fit, const Truth& f0, std::size_t grid_size) {
  if (grid_size < 101) throw std::invalid_argument("ise: grid_size must be at least 101");
  const auto grid = linspace(0.0, 1.0, grid_size);
  return ise(predict(fit, grid), f0);
}

double pae(const SplineFit& fit, const Truth& f0, double t) { return std::abs(predict(fit, t) - f0(t)); }

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::transform(item.begin(), item.end(), item.begin(), [](unsigned char c) { return std::tolower(c); });
    if (item == "ss") {
      out.push_back(Method::SS);
    } else if (item == "eqk") {
      out.push_back(Method::EQK);
    } else if (item == "adss") {
      out.push_back(Method::ADSS);
    } else {
      throw std::invalid_argument("unknown method '" + item + "' (expected ss, eqk or adss)");
    }
  }
  if (out.empty()) throw std::invalid_argument("method list is empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(i), out[i]) != out.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw std::invalid_argument("method '" + to_string(out[i]) + "' listed twice");
    }
  }
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::SS: return "SS";
    case Method::EQK: return "EQK";
    case Method::ADSS: return "ADSS";
  }
  return "?";
}

SplineFit fit_ss(const Design& design, int m) {
  auto gram = std::make_shared<const GramContext>(gram_matrix(design.t, PiecewisePenalty::uniform(), m));
  const double lambda = select_lambda(LambdaProfile(design, *gram), Criterion::GCV);
  return fit(design, gram, lambda);
}

SplineFit fit_eqk(const Design& design, const BenchmarkConfig& config) {
  const std::vector<double> knots{1.0 / 6, 2.0 / 6, 3.0 / 6, 4.0 / 6, 5.0 / 6};
  std::vector<double> logs(knots.size() + 1, 0.0);
  struct Eval {
    double score;
    double lambda;
    std::shared_ptr<const GramContext> gram;
  };
  auto evaluate = [&](const std::vector<double>& lv) {
    std::vector<double> values(lv.size());
    for (std::size_t j = 0; j < lv.size(); ++j) values[j] = std::pow(10.0, lv[j]);
    auto gram = std::make_shared<const GramContext>(gram_matrix(design.t, PiecewisePenalty(knots, values), config.eqk_m));
    const LambdaProfile profile(design, *gram);
    const double lambda = select_lambda(profile, Criterion::GCV);
    return Eval{profile.gcv(lambda), lambda, std::move(gram)};
  };
  Eval best = evaluate(logs);
  for (int sweep = 0; sweep < config.eqk_sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t j = 0; j < logs.size(); ++j) {
      for (double v : config.eqk_log10_grid) {
        if (v == logs[j]) continue;
        auto trial = logs;
        trial[j] = v;
        Eval e = evaluate(trial);
        if (e.score < best.score) {
          best = std::move(e);
          logs = std::move(trial);
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  return fit(design, best.gram, best.lambda);
}

SplineFit fit_method(Method method, const Design& design, const BenchmarkConfig& config) {
  switch (method) {
    case Method::SS: return fit_ss(design, config.ss_m);
    case Method::EQK: return fit_eqk(design, config);
    case Method::ADSS: {
      AdaptConfig ac = config.adapt;
      ac.threads = 1;  // replicates already run in parallel
      return adapt_fit(design, ac).fit;
    }
  }
  throw std::invalid_argument("fit_method: unknown method");
}

BenchmarkRow summarize(const MethodResults& results) {
  BenchmarkRow row;
  row.method = results.method;
  row.failures = results.failures;
  std::vector<double> ises;
  std::array<std::vector<double>, 4> paes;
  for (const auto& r : results.replicates) {
    if (!r.ok) continue;
    ises.push_back(r.ise);
    for (std::size_t k = 0; k < 4; ++k) paes[k].push_back(r.pae[k]);
  }
  row.succeeded = ises.size();
  auto summary = [](const std::vector<double>& v) {
    MetricSummary s;
    if (v.empty()) return s;
    s.mean = sample_mean(v);
    s.sd = v.size() > 1 ? sample_sd(v) : 0.0;
    return s;
  };
  row.ise = summary(ises);
  for (std::size_t k = 0; k < 4; ++k) row.pae[k] = summary(paes[k]);
  return row;
}

BenchmarkRun run_benchmark(const ScenarioSpec& spec, const std::vector<Method>& methods,
                           const BenchmarkConfig& config) {
  spec.validate();
  if (methods.empty()) throw std::invalid_argument("run_benchmark: no methods requested");
  BenchmarkRun run;
  run.spec = spec;
  run.config = config;
  run.band_grid = linspace(0.0, 1.0, config.band_grid_size);
  run.results.resize(methods.size());
  for (std::size_t k = 0; k < methods.size(); ++k) {
    run.results[k].method = methods[k];
    run.results[k].replicates.resize(spec.replicates);
  }
  const unsigned threads = config.threads == 0 ? default_thread_count() : config.threads;
  parallel_for(spec.replicates, threads, [&](std::size_t rep) {
    const Design design = gen_scenario(spec, rep);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      auto& slot = run.results[k].replicates[rep];
      slot.replicate = rep;
      try {
        SplineFit f;
        if (methods[k] == Method::ADSS) {
          AdaptConfig ac = config.adapt;
          ac.threads = 1;
          auto res = adapt_fit(design, ac);
          slot.selected_S = res.selected_S;
          slot.selected_gamma = res.selected_gamma;
          f = std::move(res.fit);
        } else {
          f = fit_method(methods[k], design, config);
        }
        slot.lambda = f.lambda;
        slot.ise = ise(f, spec.f0, config.ise_grid_size);
        for (std::size_t p = 0; p < kPaePoints.size(); ++p) slot.pae[p] = pae(f, spec.f0, kPaePoints[p]);
        slot.curve = predict(f, run.band_grid);
        slot.ok = true;
      } catch (const std::exception& e) {
        slot.ok = false;
        slot.error = e.what();
      }
    }
  });
  for (auto& res : run.results) {
    res.failures = static_cast<std::size_t>(
        std::count_if(res.replicates.begin(), res.replicates.end(), [](const auto& r) { return !r.ok; }));
    if (static_cast<double>(res.failures) > 0.05 * static_cast<double>(spec.replicates)) {
      const auto first = std::find_if(res.replicates.begin(), res.replicates.end(), [](const auto& r) { return !r.ok; });
      throw std::runtime_error("run_benchmark: " + to_string(res.method) + " failed on " +
                               std::to_string(res.failures) + " of " + std::to_string(spec.replicates) +
                               " replicates (first: replicate " + std::to_string(first->replicate) + ": " +
                               first->error + ")");
    }
    run.table.push_back(summarize(res));
  }
  return run;
}

std::size_t median_replicate(const MethodResults& results) {
  std::vector<const ReplicateResult*> ok;
  for (const auto& r : results.replicates) {
    if (r.ok) ok.push_back(&r);
  }
  if (ok.empty()) throw std::invalid_argument("median_replicate: no successful replicates");
  std::stable_sort(ok.begin(), ok.end(), [](const ReplicateResult* a, const ReplicateResult* b) {
    return a->ise != b->ise ? a->ise < b->ise : a->replicate < b->replicate;
  });
  // Among replicates tied with the rank-ceil(R/2) value the lowest index wins.
  const double target = ok[(ok.size() + 1) / 2 - 1]->ise;
  const auto first = std::find_if(ok.begin(), ok.end(), [&](const ReplicateResult* r) { return r->ise == target; });
  return (*first)->replicate;
}

std::vector<std::vector<double>> quantile_bands(const MethodResults& results, const std::vector<double>& probs) {
  std::vector<const std::vector<double>*> curves;
  for (const auto& r : results.replicates) {
    if (r.ok) curves.push_back(&r.curve);
  }
  if (curves.empty()) throw std::invalid_argument("quantile_bands: no successful replicates");
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile_bands: probabilities must lie in (0,1)");
  }
  const std::size_t g = curves.front()->size();
  std::vector<std::vector<double>> bands(probs.size(), std::vector<double>(g));
  std::vector<double> column(curves.size());
  for (std::size_t k = 0; k < g; ++k) {
    for (std::size_t r = 0; r < curves.size(); ++r) column[r] = (*curves[r])[k];
    for (std::size_t p = 0; p < probs.size(); ++p) bands[p][k] = quantile(column, probs[p]);
  }
  return bands;
}

}  // namespace adaspline
