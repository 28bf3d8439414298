#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaspline/penalty.hpp"
#include "adaspline/rkhs.hpp"

namespace adaspline {

// Regression sample: strictly increasing abscissae in [0,1], responses and
// positive weights (inverse noise variances, default 1).
struct Design {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> w;

  static Design make(std::vector<double> t, std::vector<double> y, std::vector<double> w = {});
  std::size_t size() const { return t.size(); }
  void validate() const;
  bool operator==(const Design&) const = default;
};

// Raised when the augmented system cannot be factorized reliably.
class ConditioningError : public std::runtime_error {
 public:
  ConditioningError(const std::string& what, double min_pivot) : std::runtime_error(what), min_pivot_(min_pivot) {}
  double min_pivot() const { return min_pivot_; }

 private:
  double min_pivot_;
};

// Raised when trace(I - A) vanishes and GCV/GML are undefined.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Diagonal jitter added at factorization time: 1e-10 * trace(K) / n.
double gram_jitter(const GramContext& gram);

// Factorized augmented system
//
//   (K + eta W^{-1}) c + T d = y,   T' c = 0,   eta = n lambda + jitter,
//
// via a symmetric block factorization: Cholesky of M = K + eta W^{-1}, then
// Cholesky of the Schur complement T' M^{-1} T. One factorization serves any
// number of right-hand sides.
class PenalizedSystem {
 public:
  PenalizedSystem(const Design& design, std::shared_ptr<const GramContext> gram, double lambda);

  struct Coefficients {
    Eigen::VectorXd c;
    Eigen::VectorXd d;
  };
  Coefficients solve(const Eigen::VectorXd& y) const;

  // C = block of the inverse mapping y to c, so that I - A = eta W^{-1} C.
  Eigen::MatrixXd influence() const;
  Eigen::VectorXd influence_column(Eigen::Index i) const;

  Eigen::MatrixXd hat_matrix() const;
  Eigen::VectorXd hat_row(Eigen::Index i) const;
  double hat_trace() const;

  double lambda() const { return lambda_; }
  double eta() const { return eta_; }
  double jitter() const { return jitter_; }
  double min_pivot() const { return min_pivot_; }
  const GramContext& gram() const { return *gram_; }
  std::shared_ptr<const GramContext> gram_ptr() const { return gram_; }

 private:
  std::shared_ptr<const GramContext> gram_;
  Eigen::VectorXd weights_;
  double lambda_;
  double jitter_;
  double eta_;
  double min_pivot_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> m_factor_;
  Eigen::LLT<Eigen::MatrixXd> schur_factor_;
  Eigen::MatrixXd minv_t_;  // M^{-1} T
};

struct SplineFit {
  Design design;
  std::shared_ptr<const GramContext> gram;
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  double lambda = 0.0;
  double jitter = 0.0;
  int m = 2;
  PiecewisePenalty penalty;
  Eigen::VectorXd fitted;
  double hat_trace = 0.0;
};

SplineFit fit(const Design& design, const PiecewisePenalty& penalty, int m, double lambda);
SplineFit fit(const Design& design, std::shared_ptr<const GramContext> gram, double lambda);

// Evaluates the representer expansion; abscissae outside [0,1] throw std::out_of_range.
std::vector<double> predict(const SplineFit& fit, std::span<const double> tnew);
double predict(const SplineFit& fit, double t);
double predict_derivative(const SplineFit& fit, double t, int order);

// (1/n) sum w (y - f)^2 + lambda int rho (f^(m))^2 evaluated at the fit.
double objective(const SplineFit& fit);

Eigen::MatrixXd hat_matrix(const Design& design, const PiecewisePenalty& penalty, int m, double lambda);

// Weighted GCV: n |W^{1/2}(I-A)y|^2 / tr(I-A)^2, computed from the explicit hat matrix.
double gcv(const Design& design, const PiecewisePenalty& penalty, int m, double lambda);

// Weighted GML: y'W(I-A)y / det+(W^{1/2}(I-A)W^{-1/2})^{1/(n-m)}, from the explicit hat matrix.
double gml(const Design& design, const PiecewisePenalty& penalty, int m, double lambda);

// -2 log restricted likelihood implied by a GML score (profiled over the scale).
double gml_neg2_loglik(double gml_score, std::size_t n, int m);

// Spectral form of the criteria for one (design, penalty). After a single
// eigendecomposition of the projected kernel every lambda costs O(n).
class LambdaProfile {
 public:
  LambdaProfile(const Design& design, const GramContext& gram);

  double gcv(double lambda) const;
  double gml(double lambda) const;
  double residual_trace(double lambda) const;  // tr(I - A)
  std::size_t n() const { return n_; }
  int m() const { return m_; }
  // True when the responses lie in the polynomial null space up to rounding.
  bool null_space_response() const { return null_space_response_; }

 private:
  std::size_t n_;
  int m_;
  double jitter_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd projected_;  // rotated, weighted response
  bool null_space_response_ = false;
};

enum class Criterion { GCV, GML };

Criterion parse_criterion(const std::string& name);
std::string to_string(Criterion c);

struct LambdaGrid {
  double lo = 1e-8;
  double hi = 1.0;
  std::size_t points = 40;
  int refine_iterations = 20;
};

// Log-grid search followed by golden-section refinement around the best point.
// Ties go to the smaller lambda. Evaluations that throw or return a non-finite
// value count as degenerate; if all are degenerate this throws.
double minimize_on_log_grid(const std::function<double(double)>& criterion, const LambdaGrid& grid);

// Responses inside the null space make every lambda equivalent; the largest
// grid value is returned for them.
double select_lambda(const LambdaProfile& profile, Criterion criterion, const LambdaGrid& grid = {});
double select_lambda(const Design& design, const PiecewisePenalty& penalty, int m, Criterion criterion,
                     const LambdaGrid& grid = {});

struct OptimalityReport {
  std::vector<double> moments;  // M_k = (1/n) sum w_i (fitted_i - y_i) t_i^k
  double scale = 1.0;
  double tolerance = 0.0;
  double max_abs = 0.0;
  bool passed = false;
};

// Null-space moment conditions that any minimizer satisfies. Passes iff
// max |M_k| <= 1e-6 * scale, scale = mean(w) * max|y| (1 if y == 0).
OptimalityReport check_optimality(const SplineFit& fit);

}  // namespace adaspline
