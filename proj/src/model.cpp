#include "misspec/model.hpp"

#include "misspec/optim.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>

namespace misspec {

namespace {
constexpr double kLogSqrtTwoPi = 0.91893853320467274178;
}

bool Box::contains(const Vector& z) const {
  if (z.size() != lower.size()) return false;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    if (!(z(j) >= lower(j) && z(j) <= upper(j))) return false;
  }
  return true;
}

Box ParametricFamily::support() const {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(data_dim(), -inf), Vector::Constant(data_dim(), inf)};
}

void ParametricFamily::check_point(const Vector& theta, const Vector& z) const {
  if (theta.size() != param_dim()) {
    throw DomainError(name() + ": parameter has dimension " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(param_dim()));
  }
  if (z.size() != data_dim()) {
    throw DomainError(name() + ": point has dimension " + std::to_string(z.size()) + ", expected " +
                      std::to_string(data_dim()));
  }
  if (!z.allFinite() || !support().contains(z)) throw DomainError(name() + ": point outside support");
}

void ParametricFamily::check_data(const Matrix& data) const {
  if (data.rows() < 1) throw DataError(name() + ": need at least one observation");
  if (data.cols() != data_dim()) {
    throw DataError(name() + ": data has " + std::to_string(data.cols()) + " columns, expected " +
                    std::to_string(data_dim()));
  }
  if (!data.allFinite()) throw DataError(name() + ": data contains non-finite values");
}

Matrix ParametricFamily::fisher_information(const Vector& theta) const {
  const int p = param_dim();
  Matrix info = Matrix::Zero(p, p);
  for_each_node(theta, QuadratureSpec{}, [&](const Vector& z, double w) {
    const Vector s = score(theta, z);
    info.noalias() += w * s * s.transpose();
  });
  if (!info.allFinite()) throw NumericError(name() + ": Fisher information quadrature is not finite");
  return info;
}

Vector ParametricFamily::mle_fit(const Matrix& data) const {
  check_data(data);
  return numeric_mle(*this, data, Vector::Zero(param_dim()));
}

double ParametricFamily::marginal_pdf(const Vector&, int, double) const {
  throw DomainError(name() + ": marginals are not available for dependent components");
}
double ParametricFamily::marginal_cdf(const Vector&, int, double) const {
  throw DomainError(name() + ": marginals are not available for dependent components");
}
double ParametricFamily::marginal_quantile(const Vector&, int, double) const {
  throw DomainError(name() + ": marginals are not available for dependent components");
}

// ---------------------------------------------------------------------------

GaussianScaledMeanFamily::GaussianScaledMeanFamily(int data_dim) : dim_(data_dim) {
  if (data_dim < 1) throw DomainError("gaussian_scaled_mean: data dimension must be positive");
  scales_ = Vector::LinSpaced(data_dim, 1.0, static_cast<double>(data_dim));
}

double GaussianScaledMeanFamily::log_density(const Vector& theta, const Vector& z) const {
  check_point(theta, z);
  const Vector r = z - scales_ * theta(0);
  return -0.5 * r.squaredNorm() - dim_ * kLogSqrtTwoPi;
}

Vector GaussianScaledMeanFamily::score(const Vector& theta, const Vector& z) const {
  check_point(theta, z);
  return scalar_param(scales_.dot(z - scales_ * theta(0)));
}

Matrix GaussianScaledMeanFamily::fisher_information(const Vector& theta) const {
  if (theta.size() != 1) throw DomainError("gaussian_scaled_mean: parameter must be scalar");
  return Matrix::Constant(1, 1, scales_.squaredNorm());
}

Vector GaussianScaledMeanFamily::mle_fit(const Matrix& data) const {
  check_data(data);
  const Vector column_means = data.colwise().mean().transpose();
  return scalar_param(scales_.dot(column_means) / scales_.squaredNorm());
}

Matrix GaussianScaledMeanFamily::sample(const Vector& theta, std::size_t n, RandomEngine& rng) const {
  if (theta.size() != 1) throw DomainError("gaussian_scaled_mean: parameter must be scalar");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(n), dim_);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < dim_; ++j) out(i, j) = scales_(j) * theta(0) + normal(rng);
  }
  return out;
}

void GaussianScaledMeanFamily::for_each_node(const Vector& theta, const QuadratureSpec& spec,
                                             const NodeVisitor& visit) const {
  gaussian_product_for_each(marginal_mean(theta), marginal_sd(theta), spec, visit);
}

Vector GaussianScaledMeanFamily::marginal_mean(const Vector& theta) const {
  if (theta.size() != 1) throw DomainError("gaussian_scaled_mean: parameter must be scalar");
  return scales_ * theta(0);
}

Vector GaussianScaledMeanFamily::marginal_sd(const Vector&) const { return Vector::Ones(dim_); }

double GaussianScaledMeanFamily::marginal_pdf(const Vector& theta, int axis, double x) const {
  const double r = x - scales_(axis) * theta(0);
  return std::exp(-0.5 * r * r - kLogSqrtTwoPi);
}

double GaussianScaledMeanFamily::marginal_cdf(const Vector& theta, int axis, double x) const {
  return 0.5 * std::erfc(-(x - scales_(axis) * theta(0)) / std::sqrt(2.0));
}

double GaussianScaledMeanFamily::marginal_quantile(const Vector& theta, int axis, double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  return scales_(axis) * theta(0) + boost::math::quantile(boost::math::normal(), p);
}

// ---------------------------------------------------------------------------

FamilyPoint::FamilyPoint(FamilyPtr family, Vector theta) : family_(std::move(family)), theta_(std::move(theta)) {
  if (!family_) throw DomainError("FamilyPoint requires a family");
  if (theta_.size() != family_->param_dim()) throw DomainError("FamilyPoint: parameter dimension mismatch");
}

double mean_log_likelihood(const ParametricFamily& family, const Vector& theta, const Matrix& data) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) total += family.log_density(theta, data.row(i).transpose());
  return total / static_cast<double>(data.rows());
}

namespace {

Vector mean_score(const ParametricFamily& family, const Vector& theta, const Matrix& data) {
  Vector g = Vector::Zero(family.param_dim());
  for (Eigen::Index i = 0; i < data.rows(); ++i) g += family.score(theta, data.row(i).transpose());
  return g / static_cast<double>(data.rows());
}

}  // namespace

Vector numeric_mle(const ParametricFamily& family, const Matrix& data, const Vector& start,
                   double initial_step) {
  family.check_data(data);
  const int p = family.param_dim();
  if (start.size() != p) throw DomainError("numeric_mle: start has wrong dimension");
  auto neg_ll = [&](const Vector& th) {
    const double v = -mean_log_likelihood(family, th, data);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  if (p == 1) {
    auto f = [&](double x) { return neg_ll(scalar_param(x)); };
    double step = initial_step;
    double mid = start(0);
    double fmid = f(mid);
    // expand until [mid - step, mid + step] brackets a minimum
    for (int k = 0; k < 200; ++k) {
      const double fl = f(mid - step);
      const double fr = f(mid + step);
      if (fl >= fmid && fr >= fmid) break;
      if (fl < fr) {
        mid -= step;
        fmid = fl;
      } else {
        mid += step;
        fmid = fr;
      }
      step *= 2.0;
      if (k == 199) throw SolverError("numeric_mle: could not bracket the maximizer");
    }
    const ScalarMinimum m = golden_section(f, mid - step, mid + step, 1e-13 * (1.0 + std::abs(mid)));
    // the log-likelihood is flat at its maximizer; polish on the score instead
    auto g = [&](double x) { return mean_score(family, scalar_param(x), data)(0); };
    const double h = 1e-6 * (1.0 + std::abs(m.x));
    const double lo = m.x - h, hi = m.x + h;
    const double glo = g(lo), ghi = g(hi);
    if (glo > 0.0 && ghi < 0.0) {
      boost::uintmax_t iterations = 100;
      const auto root = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                          boost::math::tools::eps_tolerance<double>(52), iterations);
      return scalar_param(0.5 * (root.first + root.second));
    }
    return scalar_param(m.x);
  }

  // damped Newton on the score equation with a finite-difference Jacobian
  Vector theta = start;
  for (int it = 0; it < 200; ++it) {
    const Vector g = mean_score(family, theta, data);
    if (g.norm() < 1e-10) return theta;
    Matrix jac(p, p);
    for (int k = 0; k < p; ++k) {
      const double h = 1e-6 * (1.0 + std::abs(theta(k)));
      Vector tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      jac.col(k) = (mean_score(family, tp, data) - mean_score(family, tm, data)) / (2.0 * h);
    }
    Vector step = jac.ldlt().solve(-g);
    if (!step.allFinite()) step = g;
    const double f0 = neg_ll(theta);
    double damping = 1.0;
    while (damping > 1e-12 && neg_ll(theta + damping * step) > f0) damping *= 0.5;
    theta += damping * step;
  }
  throw SolverError("numeric_mle: Newton iteration did not converge");
}

}  // namespace misspec
