#pragma once

#include <cstddef>
#include <vector>

namespace adaspline {

// Piecewise-constant roughness penalty rho(t) on [0,1].
//
// Interior knots tau_1 < ... < tau_S split [0,1] into S+1 segments; segment j
// is (tau_{j-1}, tau_j] with tau_0 = 0 and tau_{S+1} = 1, except that t = 0
// belongs to the first segment. `gamma` records the power applied by
// power_up (1 for an un-powered penalty).
class PiecewisePenalty {
 public:
  PiecewisePenalty();
  PiecewisePenalty(std::vector<double> knots, std::vector<double> values, double gamma = 1.0);

  static PiecewisePenalty uniform(double value = 1.0);

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double gamma() const { return gamma_; }
  std::size_t segment_count() const { return values_.size(); }
  bool is_uniform() const;

  std::size_t segment_index(double t) const;
  double operator()(double t) const { return values_[segment_index(t)]; }

  double segment_lower(std::size_t j) const { return j == 0 ? 0.0 : knots_[j - 1]; }
  double segment_upper(std::size_t j) const { return j == knots_.size() ? 1.0 : knots_[j]; }

  PiecewisePenalty scaled(double factor) const;

  bool operator==(const PiecewisePenalty&) const = default;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double gamma_ = 1.0;
};

}  // namespace adaspline
