#include "misspec/asymptotics.hpp"

#include "misspec/optim.hpp"

#include <cmath>
#include <limits>

namespace misspec {

namespace {

constexpr std::size_t index_of(Method m) {
  switch (m) {
    case Method::SAA: return 0;
    case Method::IEO: return 1;
    case Method::ETO: return 2;
  }
  return 0;
}

/// Golden section after expanding [start - half, start + half] until the minimum is interior.
template <class F>
double scalar_argmin(F&& f, double start, double half, double tol) {
  double center = start;
  for (int k = 0; k < 60; ++k) {
    const ScalarMinimum m = golden_section(f, center - half, center + half, tol);
    if (std::abs(m.x - center) < 0.9 * half) return m.x;
    center = m.x;
    half *= 2.0;
  }
  throw SolverError("scalar minimization did not find an interior minimum");
}

}  // namespace

InfluenceFunctionSet::InfluenceFunctionSet(ProblemPtr problem, FamilyPtr family, SensitivityMatrices matrices)
    : problem_(std::move(problem)), family_(std::move(family)), m_(std::move(matrices)) {
  if (!problem_ || !family_) throw DomainError("influence functions need a problem and a family");
  V_.compute(m_.V);
  Phi_.compute(m_.Phi);
  I_.compute(m_.I);
  if (V_.info() != Eigen::Success || !V_.isPositive()) throw AssumptionError("V is not invertible");
  if (Phi_.info() != Eigen::Success || std::abs(Phi_.vectorD().minCoeff()) < 1e-14 * m_.Phi.norm()) {
    throw AssumptionError("Sigma^T V^{-1} Sigma is singular");
  }
  if (I_.info() != Eigen::Success || !I_.isPositive()) throw AssumptionError("Fisher information is singular");
}

QuadratureSpec InfluenceFunctionSet::quadrature(int nodes) const {
  QuadratureSpec spec;
  spec.nodes = nodes;
  spec.breakpoints = problem_->kinks(m_.w0);
  return spec;
}

Vector InfluenceFunctionSet::saa(const Vector& z) const { return -V_.solve(problem_->grad_cost(m_.w0, z)); }

Vector InfluenceFunctionSet::theta_gradient(const Vector& z) const {
  return m_.oracle_gradient * problem_->grad_cost(m_.w0, z);
}

Vector InfluenceFunctionSet::ieo(const Vector& z) const {
  return V_.solve(m_.Sigma * Phi_.solve(theta_gradient(z)));
}

Vector InfluenceFunctionSet::eto(const Vector& z) const {
  return -V_.solve(m_.Sigma * I_.solve(family_->score(m_.theta0, z)));
}

Vector InfluenceFunctionSet::operator()(Method method, const Vector& z) const {
  switch (method) {
    case Method::SAA: return saa(z);
    case Method::IEO: return ieo(z);
    case Method::ETO: return eto(z);
  }
  throw DomainError("unknown method");
}

InfluenceFunctionSet make_influence_functions(ProblemPtr problem, FamilyPtr family, const Vector& theta0,
                                              const SensitivityOptions& options) {
  SensitivityMatrices m = sensitivity_matrices(*problem, family, theta0, options);
  return InfluenceFunctionSet(std::move(problem), std::move(family), std::move(m));
}

ProjectionMatrices projection_matrices(const InfluenceFunctionSet& ifs) {
  const SensitivityMatrices& m = ifs.matrices();
  const Eigen::LDLT<Matrix> vsolve(m.V);
  const Matrix VinvSigma = vsolve.solve(m.Sigma);
  const Matrix Phi = m.Sigma.transpose() * VinvSigma;
  const Eigen::FullPivLU<Matrix> lu(Phi);
  if (!lu.isInvertible()) throw AssumptionError("Sigma^T V^{-1} Sigma is singular");
  ProjectionMatrices out;
  // Sigma^T V^{-1} = (V^{-1} Sigma)^T since V is symmetric
  out.P = m.Sigma * lu.solve(VinvSigma.transpose());

  FamilyPtr family = ifs.family_ptr();
  const Vector theta0 = m.theta0;
  const Matrix info = m.I;
  const int dw = ifs.decision_dim();
  out.apply_T = [family, theta0, info, dw](const std::function<Vector(const Vector&)>& f,
                                           const QuadratureSpec& spec) {
    const FamilyPoint base(family, theta0);
    const Matrix cross = expect(base, spec, Matrix(Matrix::Zero(dw, family->param_dim())), [&](const Vector& z) {
      return Matrix(f(z) * family->score(theta0, z).transpose());
    });
    const Matrix gain = info.ldlt().solve(cross.transpose()).transpose();
    return std::function<Vector(const Vector&)>(
        [family, theta0, gain](const Vector& z) -> Vector { return gain * family->score(theta0, z); });
  };
  return out;
}

Vector directional_drift(const InfluenceFunctionSet& ifs, const Direction& u, Method method,
                         const AsymptoticQuadrature& quad) {
  const FamilyPoint base(ifs.family_ptr(), ifs.matrices().theta0);
  const int dw = ifs.decision_dim();
  return refine_until_stable(
      [&](int nodes) {
        return expect(base, ifs.quadrature(nodes), Vector(Vector::Zero(dw)),
                      [&](const Vector& z) { return Vector(u(z) * ifs(method, z)); });
      },
      quad.start_nodes, quad.rtol, quad.max_nodes);
}

Vector bias_vector(const InfluenceFunctionSet& ifs, const Direction& u, Method method,
                   const AsymptoticQuadrature& quad) {
  const int dw = ifs.decision_dim();
  if (method == Method::SAA) return Vector::Zero(dw);
  const FamilyPoint base(ifs.family_ptr(), ifs.matrices().theta0);
  const Vector b = refine_until_stable(
      [&](int nodes) {
        return expect(base, ifs.quadrature(nodes), Vector(Vector::Zero(dw)),
                      [&](const Vector& z) { return Vector(u(z) * (ifs(method, z) - ifs.saa(z))); });
      },
      quad.start_nodes, quad.rtol, quad.max_nodes);
  if (!b.allFinite()) throw NumericError("bias quadrature is not finite");
  return b;
}

double limit_regret(const SensitivityMatrices& m, const Vector& bias) { return 0.5 * bias.dot(m.V * bias); }

double v_norm(const SensitivityMatrices& m, const Vector& bias) {
  return std::sqrt(std::max(0.0, bias.dot(m.V * bias)));
}

Matrix variance_matrix(const InfluenceFunctionSet& ifs, Method method, const AsymptoticQuadrature& quad) {
  const int dw = ifs.decision_dim();
  const FamilyPoint base(ifs.family_ptr(), ifs.matrices().theta0);
  // columns 0..dw-1: E[IF IF^T]; column dw: E[IF]
  const Matrix moments = refine_until_stable(
      [&](int nodes) {
        return expect(base, ifs.quadrature(nodes), Matrix(Matrix::Zero(dw, dw + 1)), [&](const Vector& z) {
          const Vector f = ifs(method, z);
          Matrix out(dw, dw + 1);
          out.leftCols(dw) = f * f.transpose();
          out.col(dw) = f;
          return out;
        });
      },
      quad.start_nodes, quad.rtol, quad.max_nodes);
  const Vector mean = moments.col(dw);
  Matrix var = moments.leftCols(dw) - mean * mean.transpose();
  return 0.5 * (var + var.transpose());
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Holds: return "holds";
    case Verdict::Tied: return "tied";
    case Verdict::Violated: return "violated";
  }
  return "?";
}

OrderingCheck compare_scalars(std::string name, std::string statement, double lhs, double rhs, double tol) {
  OrderingCheck c{std::move(name), std::move(statement), Verdict::Holds, rhs - lhs};
  if (std::abs(c.margin) <= tol) {
    c.verdict = Verdict::Tied;
  } else if (c.margin < 0.0) {
    c.verdict = Verdict::Violated;
  }
  return c;
}

OrderingCheck compare_psd(std::string name, std::string statement, const Matrix& lhs, const Matrix& rhs,
                          double tol) {
  const Matrix diff = 0.5 * ((rhs - lhs) + (rhs - lhs).transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(diff);
  OrderingCheck c{std::move(name), std::move(statement), Verdict::Holds, eig.eigenvalues().minCoeff()};
  if (diff.cwiseAbs().maxCoeff() <= tol) {
    c.verdict = Verdict::Tied;
  } else if (c.margin < -tol) {
    c.verdict = Verdict::Violated;
  }
  return c;
}

const MethodAsymptotics& AsymptoticReport::at(Method m) const { return methods[index_of(m)]; }

AsymptoticReport asymptotic_report(const InfluenceFunctionSet& ifs, const Direction& u, double alpha,
                                   const AsymptoticQuadrature& quad) {
  AsymptoticReport r;
  r.direction = u.label();
  r.alpha = alpha;
  r.regime = classify_regime(alpha);
  r.matrices = ifs.matrices();
  const Matrix& V = r.matrices.V;
  for (Method m : kAllMethods) {
    MethodAsymptotics& a = r.methods[index_of(m)];
    a.method = m;
    a.direction_bias = bias_vector(ifs, u, m, quad);
    a.bias = r.regime == Regime::Mild ? Vector(Vector::Zero(a.direction_bias.size())) : a.direction_bias;
    a.bias_v_norm = v_norm(r.matrices, a.bias);
    a.limit_regret = limit_regret(r.matrices, a.bias);
    a.variance = variance_matrix(ifs, m, quad);
    a.variance_regret = 0.5 * (V * a.variance).trace();
    a.expected_balanced_regret = r.regime == Regime::Balanced ? a.variance_regret + a.limit_regret
                                                              : std::numeric_limits<double>::quiet_NaN();
  }
  const MethodAsymptotics& saa = r.at(Method::SAA);
  const MethodAsymptotics& ieo = r.at(Method::IEO);
  const MethodAsymptotics& eto = r.at(Method::ETO);

  r.checks.push_back(compare_psd("variance_ieo_saa", "Var(IF^IEO) <= Var(IF^SAA)", ieo.variance, saa.variance));
  r.checks.push_back(compare_psd("variance_eto_ieo", "Var(IF^ETO) <= Var(IF^IEO)", eto.variance, ieo.variance));
  r.checks.push_back(compare_scalars("bias_ieo_eto", "||b^IEO||_V <= ||b^ETO||_V",
                                     v_norm(r.matrices, ieo.direction_bias), v_norm(r.matrices, eto.direction_bias),
                                     1e-10));
  switch (r.regime) {
    case Regime::Severe:
      r.checks.push_back(compare_scalars("regret_saa_ieo", "R^SAA <= R^IEO", saa.limit_regret, ieo.limit_regret));
      r.checks.push_back(compare_scalars("regret_ieo_eto", "R^IEO <= R^ETO", ieo.limit_regret, eto.limit_regret));
      break;
    case Regime::Mild:
      r.checks.push_back(compare_scalars("regret_eto_ieo", "tr(V Var^ETO) <= tr(V Var^IEO)", eto.variance_regret,
                                         ieo.variance_regret));
      r.checks.push_back(compare_scalars("regret_ieo_saa", "tr(V Var^IEO) <= tr(V Var^SAA)", ieo.variance_regret,
                                         saa.variance_regret));
      break;
    case Regime::Balanced:
      break;
  }
  return r;
}

Vector kl_projection(const ParametricFamily& family, const Distribution& dist, const Vector& start,
                     const QuadratureSpec& spec) {
  if (family.param_dim() != 1) throw DomainError("kl_projection is implemented for a scalar parameter only");
  auto f = [&](double th) {
    const Vector theta = scalar_param(th);
    return -expect_scalar(dist, spec, [&](const Vector& z) { return family.log_density(theta, z); });
  };
  const double half = 4.0 / std::sqrt(family.fisher_information(start)(0, 0));
  return scalar_param(scalar_argmin(f, start(0), half, 1e-12 * (1.0 + std::abs(start(0)))));
}

Vector ieo_population_optimum(const DecisionProblem& problem, const ParametricFamily& family,
                              const Distribution& dist, const Vector& start, const QuadratureSpec& spec) {
  if (family.param_dim() != 1) throw DomainError("ieo_population_optimum needs a scalar parameter");
  auto f = [&](double th) { return expected_cost(problem, dist, problem.oracle_solution(family, scalar_param(th)), spec); };
  const double half = 4.0 / std::sqrt(family.fisher_information(start)(0, 0));
  return scalar_param(scalar_argmin(f, start(0), half, 1e-10));
}

}  // namespace misspec
