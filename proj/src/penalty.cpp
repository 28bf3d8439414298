#include "adaspline/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adaspline {

PiecewisePenalty::PiecewisePenalty() : PiecewisePenalty({}, {1.0}, 1.0) {}

PiecewisePenalty::PiecewisePenalty(std::vector<double> knots, std::vector<double> values, double gamma)
    : knots_(std::move(knots)), values_(std::move(values)), gamma_(gamma) {
  if (values_.size() != knots_.size() + 1) {
    throw std::invalid_argument("penalty: need exactly one more segment value than interior knots (got " +
                                std::to_string(knots_.size()) + " knots, " + std::to_string(values_.size()) +
                                " values)");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!(knots_[i] > 0.0 && knots_[i] < 1.0)) {
      throw std::invalid_argument("penalty: knots must lie strictly inside (0,1)");
    }
    if (i > 0 && !(knots_[i] > knots_[i - 1])) {
      throw std::invalid_argument("penalty: knots must be strictly increasing");
    }
  }
  for (double v : values_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("penalty: segment values must be positive and finite");
  }
  if (!(gamma_ >= 1.0)) throw std::invalid_argument("penalty: gamma must be >= 1");
}

PiecewisePenalty PiecewisePenalty::uniform(double value) { return PiecewisePenalty({}, {value}, 1.0); }

bool PiecewisePenalty::is_uniform() const {
  return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
}

std::size_t PiecewisePenalty::segment_index(double t) const {
  // number of knots strictly below t, so a knot itself closes the segment on its left
  return static_cast<std::size_t>(std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
}

PiecewisePenalty PiecewisePenalty::scaled(double factor) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= factor;
  return PiecewisePenalty(knots_, std::move(v), gamma_);
}

}  // namespace adaspline
