#pragma once

#include "misspec/estimators.hpp"
#include "misspec/perturbation.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace misspec {

/// Integration settings for bias and variance integrals: start at `start_nodes`
/// per axis and double until the relative change is below `rtol`.
struct AsymptoticQuadrature {
  int start_nodes = 128;
  int max_nodes = 2048;
  double rtol = 1e-8;
};

/// IF^SAA, IF^IEO and IF^ETO at (w_{theta0}, theta0).
class InfluenceFunctionSet {
public:
  InfluenceFunctionSet(ProblemPtr problem, FamilyPtr family, SensitivityMatrices matrices);

  Vector operator()(Method method, const Vector& z) const;
  /// -V^{-1} grad_w c(w0, z)
  Vector saa(const Vector& z) const;
  /// V^{-1} Sigma Phi^{-1} grad_theta c(w0, z), grad_theta c from the chain rule.
  Vector ieo(const Vector& z) const;
  /// -V^{-1} Sigma I^{-1} s_{theta0}(z)
  Vector eto(const Vector& z) const;

  /// grad_theta c(w_theta, z) at theta0, i.e. -Sigma^T V^{-1} grad_w c(w0, z).
  Vector theta_gradient(const Vector& z) const;

  const SensitivityMatrices& matrices() const { return m_; }
  const DecisionProblem& problem() const { return *problem_; }
  const ParametricFamily& family() const { return *family_; }
  const FamilyPtr& family_ptr() const { return family_; }
  int decision_dim() const { return static_cast<int>(m_.w0.size()); }
  /// Kinks of the integrands at w0.
  QuadratureSpec quadrature(int nodes) const;

private:
  ProblemPtr problem_;
  FamilyPtr family_;
  SensitivityMatrices m_;
  Eigen::LDLT<Matrix> V_;
  Eigen::LDLT<Matrix> Phi_;
  Eigen::LDLT<Matrix> I_;
};

/// Convenience: sensitivity matrices and influence functions in one step.
InfluenceFunctionSet make_influence_functions(ProblemPtr problem, FamilyPtr family, const Vector& theta0,
                                              const SensitivityOptions& options = {});

/// P = Sigma (Sigma^T V^{-1} Sigma)^{-1} Sigma^T V^{-1} and the score projection T.
struct ProjectionMatrices {
  Matrix P;
  /// (T f)(z) = E_{theta0}[f s^T] I^{-1} s(z). `apply_T(f, spec)` integrates
  /// E[f s^T] with `spec` and returns z -> (T f)(z).
  std::function<std::function<Vector(const Vector&)>(const std::function<Vector(const Vector&)>&,
                                                     const QuadratureSpec&)>
      apply_T;
};

ProjectionMatrices projection_matrices(const InfluenceFunctionSet& ifs);

/// E_{theta0}[u (IF^m - IF^SAA)]; exactly zero for SAA.
Vector bias_vector(const InfluenceFunctionSet& ifs, const Direction& u, Method method,
                   const AsymptoticQuadrature& quad = {});

/// 1/2 b^T V b.
double limit_regret(const SensitivityMatrices& m, const Vector& bias);

/// sqrt(b^T V b).
double v_norm(const SensitivityMatrices& m, const Vector& bias);

/// Var_{theta0}(IF^m(z)).
Matrix variance_matrix(const InfluenceFunctionSet& ifs, Method method, const AsymptoticQuadrature& quad = {});

/// E_{theta0}[u IF^m], the first-order drift of the method's population target.
Vector directional_drift(const InfluenceFunctionSet& ifs, const Direction& u, Method method,
                         const AsymptoticQuadrature& quad = {});

enum class Verdict { Holds, Tied, Violated };
std::string to_string(Verdict verdict);

/// Result of comparing lhs <= rhs (scalars) or lhs <= rhs in the PSD order.
struct OrderingCheck {
  std::string name;
  std::string statement;
  Verdict verdict = Verdict::Holds;
  /// rhs - lhs for scalars; min eigenvalue of rhs - lhs for matrices.
  double margin = 0.0;
};

OrderingCheck compare_scalars(std::string name, std::string statement, double lhs, double rhs,
                              double tol = 1e-8);
OrderingCheck compare_psd(std::string name, std::string statement, const Matrix& lhs, const Matrix& rhs,
                          double tol = 1e-8);

struct MethodAsymptotics {
  Method method = Method::SAA;
  /// E[u (IF^m - IF^SAA)], independent of the regime.
  Vector direction_bias;
  /// Limit bias in the given regime: direction_bias, or zero when mild.
  Vector bias;
  double bias_v_norm = 0.0;
  /// 1/2 ||bias||_V^2 in the regime.
  double limit_regret = 0.0;
  Matrix variance;
  /// 1/2 tr(V Var(IF^m)): limit of n * E[regret] when mild.
  double variance_regret = 0.0;
  /// Balanced regime: E[G^m] = 1/2 tr(V Var) + 1/2 b^T V b. NaN otherwise.
  double expected_balanced_regret = 0.0;
};

struct AsymptoticReport {
  std::string direction;
  double alpha = 0.5;
  Regime regime = Regime::Balanced;
  SensitivityMatrices matrices;
  std::array<MethodAsymptotics, 3> methods;  // SAA, IEO, ETO
  std::vector<OrderingCheck> checks;

  const MethodAsymptotics& at(Method m) const;
};

AsymptoticReport asymptotic_report(const InfluenceFunctionSet& ifs, const Direction& u, double alpha,
                                   const AsymptoticQuadrature& quad = {});

/// argmin_theta -E_dist[log p_theta(z)] (scalar theta), the KL projection of dist onto the family.
Vector kl_projection(const ParametricFamily& family, const Distribution& dist, const Vector& start,
                     const QuadratureSpec& spec = {});

/// argmin_theta E_dist[c(w_theta, z)] (scalar theta).
Vector ieo_population_optimum(const DecisionProblem& problem, const ParametricFamily& family,
                              const Distribution& dist, const Vector& start, const QuadratureSpec& spec = {});

}  // namespace misspec
