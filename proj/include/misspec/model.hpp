#pragma once

#include "misspec/errors.hpp"
#include "misspec/quadrature.hpp"
#include "misspec/random.hpp"

#include <memory>
#include <string>

namespace misspec {

/// A probability law on R^{d_z} that can be integrated against.
///
/// Every expectation in the library goes through `for_each_node`, which
/// visits a weighted point set whose weights already include the density.
class Distribution {
public:
  virtual ~Distribution() = default;
  virtual int dim() const = 0;
  virtual void for_each_node(const QuadratureSpec& spec, const NodeVisitor& visit) const = 0;
};

/// E[f(z)] for a scalar- or Eigen-valued integrand. `zero` fixes the result shape.
template <class T, class F>
T expect(const Distribution& dist, const QuadratureSpec& spec, T zero, F&& f) {
  T acc = zero;
  dist.for_each_node(spec, [&](const Vector& z, double w) {
    if (w != 0.0) acc += w * f(z);
  });
  return acc;
}

template <class F>
double expect_scalar(const Distribution& dist, const QuadratureSpec& spec, F&& f) {
  return expect(dist, spec, 0.0, std::forward<F>(f));
}

/// Axis-aligned box; infinite bounds allowed.
struct Box {
  Vector lower;
  Vector upper;

  bool contains(const Vector& z) const;
};

/// Parametric family {P_theta}.
class ParametricFamily {
public:
  virtual ~ParametricFamily() = default;

  virtual std::string name() const = 0;
  virtual int param_dim() const = 0;
  virtual int data_dim() const = 0;
  virtual Box support() const;

  virtual double log_density(const Vector& theta, const Vector& z) const = 0;
  double density(const Vector& theta, const Vector& z) const { return std::exp(log_density(theta, z)); }
  /// Gradient of log_density in theta.
  virtual Vector score(const Vector& theta, const Vector& z) const = 0;
  /// E_theta[s s^T]; the base implementation integrates numerically.
  virtual Matrix fisher_information(const Vector& theta) const;
  /// Maximizer of the average log-likelihood. Base implementation is numeric.
  virtual Vector mle_fit(const Matrix& data) const;
  /// n i.i.d. draws, one per row.
  virtual Matrix sample(const Vector& theta, std::size_t n, RandomEngine& rng) const = 0;

  /// Quadrature nodes for E_theta[.].
  virtual void for_each_node(const Vector& theta, const QuadratureSpec& spec,
                             const NodeVisitor& visit) const = 0;
  virtual Vector marginal_mean(const Vector& theta) const = 0;
  virtual Vector marginal_sd(const Vector& theta) const = 0;

  /// True when the components of z are independent under every P_theta, in
  /// which case the marginal_* members are available.
  virtual bool independent_components() const { return false; }
  virtual double marginal_pdf(const Vector& theta, int axis, double x) const;
  virtual double marginal_cdf(const Vector& theta, int axis, double x) const;
  virtual double marginal_quantile(const Vector& theta, int axis, double p) const;

  /// Domain checks shared by implementations.
  void check_point(const Vector& theta, const Vector& z) const;
  void check_data(const Matrix& data) const;
};

using FamilyPtr = std::shared_ptr<const ParametricFamily>;

/// Component j (1-based) distributed as N(j * theta, 1), independent; theta scalar.
class GaussianScaledMeanFamily final : public ParametricFamily {
public:
  explicit GaussianScaledMeanFamily(int data_dim);

  std::string name() const override { return "gaussian_scaled_mean"; }
  int param_dim() const override { return 1; }
  int data_dim() const override { return dim_; }

  double log_density(const Vector& theta, const Vector& z) const override;
  Vector score(const Vector& theta, const Vector& z) const override;
  Matrix fisher_information(const Vector& theta) const override;
  /// Closed form theta = sum_j j * mean(z_j) / sum_j j^2.
  Vector mle_fit(const Matrix& data) const override;
  Matrix sample(const Vector& theta, std::size_t n, RandomEngine& rng) const override;

  void for_each_node(const Vector& theta, const QuadratureSpec& spec,
                     const NodeVisitor& visit) const override;
  Vector marginal_mean(const Vector& theta) const override;
  Vector marginal_sd(const Vector& theta) const override;

  bool independent_components() const override { return true; }
  double marginal_pdf(const Vector& theta, int axis, double x) const override;
  double marginal_cdf(const Vector& theta, int axis, double x) const override;
  double marginal_quantile(const Vector& theta, int axis, double p) const override;

  /// Scale factors (1, 2, ..., d_z).
  const Vector& scales() const { return scales_; }

private:
  int dim_;
  Vector scales_;
};

/// P_theta viewed as a Distribution.
class FamilyPoint final : public Distribution {
public:
  FamilyPoint(FamilyPtr family, Vector theta);

  int dim() const override { return family_->data_dim(); }
  void for_each_node(const QuadratureSpec& spec, const NodeVisitor& visit) const override {
    family_->for_each_node(theta_, spec, visit);
  }
  const ParametricFamily& family() const { return *family_; }
  const Vector& theta() const { return theta_; }

private:
  FamilyPtr family_;
  Vector theta_;
};

/// Numeric maximizer of the average log-likelihood: golden-section when
/// d_theta = 1, damped Newton on the score equation otherwise.
Vector numeric_mle(const ParametricFamily& family, const Matrix& data, const Vector& start,
                   double initial_step = 1.0);

/// Average log-likelihood (1/n) sum_i log p_theta(z_i).
double mean_log_likelihood(const ParametricFamily& family, const Vector& theta, const Matrix& data);

/// Scalar theta as a length-1 vector.
inline Vector scalar_param(double theta) { return Vector::Constant(1, theta); }

}  // namespace misspec
