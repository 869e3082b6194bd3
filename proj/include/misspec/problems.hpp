#pragma once

#include "misspec/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace misspec {

/// Stochastic program min_w E[c(w, z)] over an open box.
class DecisionProblem {
public:
  virtual ~DecisionProblem() = default;

  virtual std::string name() const = 0;
  virtual int decision_dim() const = 0;
  virtual int data_dim() const = 0;

  virtual double cost(const Vector& w, const Vector& z) const = 0;
  /// Gradient in w; defined almost everywhere, fixed convention at kinks.
  virtual Vector grad_cost(const Vector& w, const Vector& z) const = 0;
  /// (1/n) sum_i c(w, z_i).
  virtual double empirical_cost(const Vector& w, const Matrix& data) const;

  /// Axis-aligned locations in z where c(w, .) or its gradient jumps.
  virtual std::vector<std::vector<double>> kinks(const Vector& w) const;

  /// argmin_w E_{P_theta}[c(w, z)]. Base implementation minimizes numerically.
  virtual Vector oracle_solution(const ParametricFamily& family, const Vector& theta) const;
  /// argmin_w E_dist[c(w, z)]. Base implementation is coordinate descent.
  virtual Vector distribution_minimizer(const Distribution& dist, const QuadratureSpec& spec) const;
  /// argmin_w (1/n) sum_i c(w, z_i) (smallest minimizer where not unique).
  virtual Vector empirical_minimizer(const Matrix& data) const = 0;
  /// Hessian of E_{P_theta}[c(w, z)] in w, when a closed form exists.
  virtual std::optional<Matrix> analytic_hessian(const ParametricFamily& family, const Vector& theta,
                                                 const Vector& w) const;
};

/// c(w, z) = a^T (w - z)^+ + d^T (z - w)^+.
class NewsvendorProblem final : public DecisionProblem {
public:
  NewsvendorProblem(Vector holding, Vector backlog);

  std::string name() const override { return "newsvendor"; }
  int decision_dim() const override { return static_cast<int>(holding_.size()); }
  int data_dim() const override { return static_cast<int>(holding_.size()); }

  double cost(const Vector& w, const Vector& z) const override;
  /// Component j: a_j if z_j <= w_j, otherwise -d_j.
  Vector grad_cost(const Vector& w, const Vector& z) const override;
  double empirical_cost(const Vector& w, const Matrix& data) const override;
  std::vector<std::vector<double>> kinks(const Vector& w) const override;

  Vector oracle_solution(const ParametricFamily& family, const Vector& theta) const override;
  /// Per-component quantile of the marginal of `dist` at the critical ratio.
  Vector distribution_minimizer(const Distribution& dist, const QuadratureSpec& spec) const override;
  /// Order statistic ceil(n q_j) of each column.
  Vector empirical_minimizer(const Matrix& data) const override;
  std::optional<Matrix> analytic_hessian(const ParametricFamily& family, const Vector& theta,
                                         const Vector& w) const override;

  const Vector& holding() const { return holding_; }
  const Vector& backlog() const { return backlog_; }
  /// q_j = d_j / (a_j + d_j).
  Vector critical_ratios() const;

private:
  Vector holding_;
  Vector backlog_;
};

using ProblemPtr = std::shared_ptr<const DecisionProblem>;

/// E_dist[c(w, z)] with the problem's kinks split out of the quadrature.
double expected_cost(const DecisionProblem& problem, const Distribution& dist, const Vector& w,
                     const QuadratureSpec& spec = {});

/// Coordinate descent with golden-section line searches on expected_cost.
Vector coordinate_descent_minimizer(const DecisionProblem& problem, const Distribution& dist,
                                    const Vector& start, const QuadratureSpec& spec = {},
                                    double tol = 1e-9);

/// Central finite-difference Hessian of expected_cost, step 1e-4 (1 + |w_k|).
Matrix finite_difference_hessian(const DecisionProblem& problem, const Distribution& dist, const Vector& w,
                                 const QuadratureSpec& spec = {});

/// Hessian blocks of v(w, theta) at (w_{theta0}, theta0).
struct SensitivityMatrices {
  Matrix V;      // d_w x d_w
  Matrix Sigma;  // d_w x d_theta
  Matrix I;      // d_theta x d_theta, Fisher information
  Matrix Phi;    // d_theta x d_theta, Sigma^T V^{-1} Sigma
  Vector w0;
  Vector theta0;
  /// -Sigma^T V^{-1}, the gradient of theta -> w_theta at theta0 (d_theta x d_w).
  Matrix oracle_gradient;
  /// Same gradient from central differences of oracle_solution.
  Matrix oracle_gradient_fd;
  bool analytic_V = false;
};

struct SensitivityOptions {
  int start_nodes = 64;
  int max_nodes = 1024;
  double rtol = 1e-10;
  double theta_step = 1e-5;
};

SensitivityMatrices sensitivity_matrices(const DecisionProblem& problem, FamilyPtr family, const Vector& theta0,
                                         const SensitivityOptions& options = {});

}  // namespace misspec
