#include "adaspline/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "adaspline/numeric.hpp"

namespace adaspline {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void check_gram_matches(const Design& design, const GramContext& gram) {
  if (gram.abscissae != design.t) throw std::invalid_argument("fit: Gram context was built for different abscissae");
  if (design.size() < static_cast<std::size_t>(gram.m)) {
    throw std::invalid_argument("fit: need at least m design points (n=" + std::to_string(design.size()) +
                                ", m=" + std::to_string(gram.m) + ")");
  }
}

double min_max_pivot_ratio(const Eigen::LLT<Eigen::MatrixXd>& factor, double& min_pivot) {
  const Eigen::VectorXd piv = factor.matrixLLT().diagonal().array().square();
  min_pivot = piv.minCoeff();
  return min_pivot / piv.maxCoeff();
}

constexpr double kPivotRatioFloor = 1e-15;

}  // namespace

Design Design::make(std::vector<double> t, std::vector<double> y, std::vector<double> w) {
  Design d;
  if (w.empty()) w.assign(t.size(), 1.0);
  d.t = std::move(t);
  d.y = std::move(y);
  d.w = std::move(w);
  d.validate();
  return d;
}

void Design::validate() const {
  if (t.size() != y.size() || t.size() != w.size()) {
    throw std::invalid_argument("design: t, y and w must have equal length");
  }
  if (t.empty()) throw std::invalid_argument("design: empty sample");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw std::invalid_argument("design: abscissae must lie in [0,1]");
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw std::invalid_argument("design: abscissae must be strictly increasing (duplicate or unsorted at index " +
                                  std::to_string(i) + ")");
    }
    if (!std::isfinite(y[i])) throw std::invalid_argument("design: responses must be finite");
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) throw std::invalid_argument("design: weights must be positive");
  }
}

double gram_jitter(const GramContext& gram) {
  const auto n = gram.gram.rows();
  return n == 0 ? 0.0 : 1e-10 * gram.gram.trace() / static_cast<double>(n);
}

PenalizedSystem::PenalizedSystem(const Design& design, std::shared_ptr<const GramContext> gram, double lambda)
    : gram_(std::move(gram)), weights_(as_vector(design.w)), lambda_(lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("fit: lambda must be positive and finite");
  check_gram_matches(design, *gram_);
  const auto n = static_cast<double>(design.size());
  jitter_ = gram_jitter(*gram_);
  // the jitter enters like the data-fit term, so the solution is an exact
  // minimizer for the effective smoothing parameter lambda + jitter / n
  eta_ = n * lambda_ + jitter_;

  Eigen::MatrixXd m = gram_->gram;
  m.diagonal().array() += eta_ / weights_.array();
  m_factor_.compute(m);
  if (m_factor_.info() != Eigen::Success) {
    throw ConditioningError("fit: Cholesky factorization of K + n*lambda*W^-1 failed", 0.0);
  }
  double min_m = 0.0;
  const double ratio_m = min_max_pivot_ratio(m_factor_, min_m);

  const Eigen::MatrixXd& t = gram_->null_basis;
  minv_t_ = m_factor_.solve(t);
  const Eigen::MatrixXd schur = t.transpose() * minv_t_;
  schur_factor_.compute(schur);
  double min_s = 0.0;
  const double ratio_s = schur_factor_.info() == Eigen::Success ? min_max_pivot_ratio(schur_factor_, min_s) : 0.0;
  min_pivot_ = std::min(min_m, min_s);
  if (schur_factor_.info() != Eigen::Success || ratio_m < kPivotRatioFloor || ratio_s < kPivotRatioFloor) {
    std::ostringstream msg;
    msg << "fit: augmented system is singular after jitter (minimum pivot " << min_pivot_
        << "); check for rank-deficient null-space basis or extreme lambda";
    throw ConditioningError(msg.str(), min_pivot_);
  }
}

PenalizedSystem::Coefficients PenalizedSystem::solve(const Eigen::VectorXd& y) const {
  const Eigen::VectorXd z = m_factor_.solve(y);
  Coefficients out;
  out.d = schur_factor_.solve(gram_->null_basis.transpose() * z);
  out.c = z - minv_t_ * out.d;
  return out;
}

Eigen::MatrixXd PenalizedSystem::influence() const {
  const auto n = gram_->gram.rows();
  const Eigen::MatrixXd minv = m_factor_.solve(Eigen::MatrixXd::Identity(n, n));
  return minv - minv_t_ * schur_factor_.solve(minv_t_.transpose());
}

Eigen::VectorXd PenalizedSystem::influence_column(Eigen::Index i) const {
  const auto n = gram_->gram.rows();
  const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
  return m_factor_.solve(e) - minv_t_ * schur_factor_.solve(minv_t_.row(i).transpose());
}

Eigen::MatrixXd PenalizedSystem::hat_matrix() const {
  Eigen::MatrixXd a = -eta_ * (weights_.cwiseInverse().asDiagonal() * influence());
  a.diagonal().array() += 1.0;
  return a;
}

Eigen::VectorXd PenalizedSystem::hat_row(Eigen::Index i) const {
  Eigen::VectorXd row = -(eta_ / weights_(i)) * influence_column(i);
  row(i) += 1.0;
  return row;
}

double PenalizedSystem::hat_trace() const {
  const auto n = gram_->gram.rows();
  const Eigen::MatrixXd linv = m_factor_.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd minv_diag = linv.colwise().squaredNorm().transpose();
  const Eigen::MatrixXd g = schur_factor_.solve(minv_t_.transpose()).transpose();  // M^-1 T S^-1
  const Eigen::VectorXd correction = (g.array() * minv_t_.array()).rowwise().sum();
  const Eigen::VectorXd c_diag = minv_diag - correction;
  return static_cast<double>(n) - eta_ * (c_diag.array() / weights_.array()).sum();
}

SplineFit fit(const Design& design, std::shared_ptr<const GramContext> gram, double lambda) {
  design.validate();
  const PenalizedSystem system(design, gram, lambda);
  const auto coef = system.solve(as_vector(design.y));
  SplineFit out;
  out.design = design;
  out.gram = gram;
  out.c = coef.c;
  out.d = coef.d;
  out.lambda = lambda;
  out.jitter = system.jitter();
  out.m = gram->m;
  out.penalty = gram->penalty;
  out.fitted = gram->gram * coef.c + gram->null_basis * coef.d;
  out.hat_trace = system.hat_trace();
  return out;
}

SplineFit fit(const Design& design, const PiecewisePenalty& penalty, int m, double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("fit: lambda must be positive");
  design.validate();
  auto gram = std::make_shared<const GramContext>(gram_matrix(design.t, penalty, m));
  return fit(design, std::move(gram), lambda);
}

double predict(const SplineFit& f, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::out_of_range("predict: abscissa " + std::to_string(t) + " outside [0,1] (no extrapolation)");
  }
  double value = 0.0;
  const auto& ts = f.design.t;
  for (std::size_t i = 0; i < ts.size(); ++i) value += f.c(static_cast<Eigen::Index>(i)) * k_rho(ts[i], t, f.penalty, f.m);
  const auto phi = null_basis(f.m, t);
  for (int j = 0; j < f.m; ++j) value += f.d(j) * phi[j];
  return value;
}

std::vector<double> predict(const SplineFit& f, std::span<const double> tnew) {
  std::vector<double> out(tnew.size());
  for (std::size_t i = 0; i < tnew.size(); ++i) out[i] = predict(f, tnew[i]);
  return out;
}

double predict_derivative(const SplineFit& f, double t, int order) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("predict_derivative: abscissa outside [0,1]");
  double value = 0.0;
  const auto& ts = f.design.t;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    value += f.c(static_cast<Eigen::Index>(i)) * k_rho_deriv(ts[i], t, f.penalty, f.m, order);
  }
  // phi_j^(order)(t) = t^{j-order}/(j-order)!
  const auto phi = null_basis(f.m, t);
  for (int j = order; j < f.m; ++j) value += f.d(j) * phi[j - order];
  return value;
}

double objective(const SplineFit& f) {
  const auto n = static_cast<double>(f.design.size());
  double fit_term = 0.0;
  for (std::size_t i = 0; i < f.design.size(); ++i) {
    const double r = f.design.y[i] - f.fitted(static_cast<Eigen::Index>(i));
    fit_term += f.design.w[i] * r * r;
  }
  return fit_term / n + f.lambda * f.c.dot(f.gram->gram * f.c);
}

Eigen::MatrixXd hat_matrix(const Design& design, const PiecewisePenalty& penalty, int m, double lambda) {
  design.validate();
  auto gram = std::make_shared<const GramContext>(gram_matrix(design.t, penalty, m));
  return PenalizedSystem(design, gram, lambda).hat_matrix();
}

double gcv(const Design& design, const PiecewisePenalty& penalty, int m, double lambda) {
  const Eigen::MatrixXd a = hat_matrix(design, penalty, m, lambda);
  const auto y = as_vector(design.y);
  const auto w = as_vector(design.w);
  const Eigen::VectorXd resid = y - a * y;
  const double tr = static_cast<double>(design.size()) - a.trace();
  if (tr <= 1e-10) throw DegenerateFitError("gcv: trace(I - A) vanishes");
  return static_cast<double>(design.size()) * (w.array() * resid.array().square()).sum() / (tr * tr);
}

double gml(const Design& design, const PiecewisePenalty& penalty, int m, double lambda) {
  const Eigen::MatrixXd a = hat_matrix(design, penalty, m, lambda);
  const auto n = static_cast<Eigen::Index>(design.size());
  if (n <= m) throw DegenerateFitError("gml: need n > m");
  const auto y = as_vector(design.y);
  const Eigen::VectorXd sw = as_vector(design.w).cwiseSqrt();
  const Eigen::VectorXd resid = y - a * y;
  const double numerator = (as_vector(design.w).array() * y.array() * resid.array()).sum();
  Eigen::MatrixXd s = -a;
  s.diagonal().array() += 1.0;
  s = sw.asDiagonal() * s * sw.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues();
  double logdet = 0.0;
  for (Eigen::Index i = m; i < n; ++i) {
    if (!(ev(i) > 0.0)) throw DegenerateFitError("gml: nonpositive eigenvalue in det+");
    logdet += std::log(ev(i));
  }
  if (!(numerator > 0.0)) return 0.0;
  return numerator / std::exp(logdet / static_cast<double>(n - m));
}

double gml_neg2_loglik(double gml_score, std::size_t n, int m) {
  const double dof = static_cast<double>(n) - m;
  return dof * (std::log(2.0 * std::numbers::pi * gml_score / dof) + 1.0);
}

LambdaProfile::LambdaProfile(const Design& design, const GramContext& gram)
    : n_(design.size()), m_(gram.m), jitter_(gram_jitter(gram)) {
  design.validate();
  check_gram_matches(design, gram);
  const auto n = static_cast<Eigen::Index>(n_);
  if (n <= m_) throw DegenerateFitError("lambda profile: need n > m");
  const Eigen::VectorXd sw = as_vector(design.w).cwiseSqrt();
  const Eigen::MatrixXd kw = sw.asDiagonal() * gram.gram * sw.asDiagonal();
  const Eigen::MatrixXd tw = sw.asDiagonal() * gram.null_basis;
  const Eigen::VectorXd yw = sw.cwiseProduct(as_vector(design.y));

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(tw);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const auto q2 = q.rightCols(n - m_);
  const Eigen::MatrixXd b = q2.transpose() * kw * q2;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (b + b.transpose()));
  eigenvalues_ = es.eigenvalues().cwiseMax(0.0);
  projected_ = es.eigenvectors().transpose() * (q2.transpose() * yw);
  // Responses reproduced by the null space up to rounding: every lambda gives
  // the same fit, and the criteria only see rounding noise.
  null_space_response_ = projected_.norm() <= 1e3 * std::numeric_limits<double>::epsilon() * yw.norm();
}

double LambdaProfile::residual_trace(double lambda) const {
  const double eta = static_cast<double>(n_) * lambda + jitter_;
  return (eta / (eigenvalues_.array() + eta)).sum();
}

double LambdaProfile::gcv(double lambda) const {
  const double eta = static_cast<double>(n_) * lambda + jitter_;
  const Eigen::ArrayXd r = eta / (eigenvalues_.array() + eta);
  const double tr = r.sum();
  if (tr <= 1e-10) throw DegenerateFitError("gcv: trace(I - A) vanishes");
  return static_cast<double>(n_) * (r.square() * projected_.array().square()).sum() / (tr * tr);
}

double LambdaProfile::gml(double lambda) const {
  const double eta = static_cast<double>(n_) * lambda + jitter_;
  const Eigen::ArrayXd r = eta / (eigenvalues_.array() + eta);
  if (r.sum() <= 1e-10) throw DegenerateFitError("gml: trace(I - A) vanishes");
  const double numerator = (r * projected_.array().square()).sum();
  const double logdet = r.log().sum();
  return numerator / std::exp(logdet / static_cast<double>(n_ - m_));
}

Criterion parse_criterion(const std::string& name) {
  if (name == "gcv" || name == "GCV") return Criterion::GCV;
  if (name == "gml" || name == "GML") return Criterion::GML;
  throw std::invalid_argument("unknown criterion '" + name + "' (expected gcv or gml)");
}

std::string to_string(Criterion c) { return c == Criterion::GCV ? "gcv" : "gml"; }

double minimize_on_log_grid(const std::function<double(double)>& criterion, const LambdaGrid& grid) {
  if (grid.points == 0) throw std::invalid_argument("select_lambda: empty lambda grid");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto safe = [&](double lambda) {
    try {
      const double v = criterion(lambda);
      return std::isfinite(v) ? v : kInf;
    } catch (const DegenerateFitError&) {
      return kInf;
    } catch (const ConditioningError&) {
      return kInf;
    }
  };
  const auto lambdas = logspace(grid.lo, grid.hi, grid.points);
  std::size_t best = 0;
  double best_value = kInf;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double v = safe(lambdas[i]);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  if (best_value == kInf) throw DegenerateFitError("select_lambda: every grid evaluation was degenerate");
  if (lambdas.size() < 2 || grid.refine_iterations <= 0) return lambdas[best];

  double a = std::log(lambdas[best == 0 ? 0 : best - 1]);
  double b = std::log(lambdas[std::min(best + 1, lambdas.size() - 1)]);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = safe(std::exp(x1)), f2 = safe(std::exp(x2));
  double refined = 0.0, refined_value = kInf;
  auto consider = [&](double x, double f) {
    if (f < refined_value || (f == refined_value && x < refined)) {
      refined_value = f;
      refined = x;
    }
  };
  consider(x1, f1);
  consider(x2, f2);
  for (int it = 0; it < grid.refine_iterations; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = safe(std::exp(x1));
      consider(x1, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = safe(std::exp(x2));
      consider(x2, f2);
    }
  }
  return refined_value < best_value ? std::exp(refined) : lambdas[best];
}

double select_lambda(const LambdaProfile& profile, Criterion criterion, const LambdaGrid& grid) {
  if (profile.null_space_response()) return grid.hi;
  if (criterion == Criterion::GCV) {
    return minimize_on_log_grid([&](double l) { return profile.gcv(l); }, grid);
  }
  return minimize_on_log_grid([&](double l) { return profile.gml(l); }, grid);
}

double select_lambda(const Design& design, const PiecewisePenalty& penalty, int m, Criterion criterion,
                     const LambdaGrid& grid) {
  const GramContext gram = gram_matrix(design.t, penalty, m);
  return select_lambda(LambdaProfile(design, gram), criterion, grid);
}

OptimalityReport check_optimality(const SplineFit& f) {
  OptimalityReport rep;
  const auto& d = f.design;
  const auto n = static_cast<double>(d.size());
  double max_y = 0.0, mean_w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    max_y = std::max(max_y, std::abs(d.y[i]));
    mean_w += d.w[i] / n;
  }
  rep.scale = max_y > 0.0 ? mean_w * max_y : 1.0;
  rep.tolerance = 1e-6 * rep.scale;
  rep.moments.assign(static_cast<std::size_t>(f.m), 0.0);
  for (int k = 0; k < f.m; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      acc += d.w[i] * (f.fitted(static_cast<Eigen::Index>(i)) - d.y[i]) * std::pow(d.t[i], k);
    }
    rep.moments[k] = acc / n;
    rep.max_abs = std::max(rep.max_abs, std::abs(rep.moments[k]));
  }
  rep.passed = rep.max_abs <= rep.tolerance;
  return rep;
}

}  // namespace adaspline
