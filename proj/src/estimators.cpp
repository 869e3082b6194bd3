#include "misspec/estimators.hpp"

#include "misspec/optim.hpp"

#include <cmath>
#include <vector>

namespace misspec {

std::string to_string(Method method) {
  switch (method) {
    case Method::SAA: return "SAA";
    case Method::ETO: return "ETO";
    case Method::IEO: return "IEO";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  if (text == "SAA" || text == "saa") return Method::SAA;
  if (text == "ETO" || text == "eto") return Method::ETO;
  if (text == "IEO" || text == "ieo") return Method::IEO;
  throw ConfigError("unknown method '" + text + "'");
}

PipelineResult fit_saa(const DecisionProblem& problem, const Matrix& data) {
  if (data.rows() < 1) throw DataError("SAA needs at least one observation");
  PipelineResult r;
  r.method = Method::SAA;
  r.w = problem.empirical_minimizer(data);
  if (!r.w.allFinite()) throw SolverError("SAA produced a non-finite decision");
  return r;
}

PipelineResult fit_eto(const DecisionProblem& problem, const ParametricFamily& family, const Matrix& data) {
  if (data.rows() < 1) throw DataError("ETO needs at least one observation");
  PipelineResult r;
  r.method = Method::ETO;
  r.theta = family.mle_fit(data);
  r.w = problem.oracle_solution(family, *r.theta);
  if (!r.w.allFinite()) throw SolverError("ETO produced a non-finite decision");
  Vector g = Vector::Zero(family.param_dim());
  for (Eigen::Index i = 0; i < data.rows(); ++i) g += family.score(*r.theta, data.row(i).transpose());
  r.diagnostics.residual = g.norm() / static_cast<double>(data.rows());
  r.diagnostics.iterations = 1;
  return r;
}

PipelineResult fit_ieo(const DecisionProblem& problem, const ParametricFamily& family, const Matrix& data,
                       const IeoOptions& options) {
  if (data.rows() < 1) throw DataError("IEO needs at least one observation");
  if (family.param_dim() != 1) throw DomainError("IEO search is implemented for a scalar parameter only");
  if (options.grid_points < 3) throw DomainError("IEO grid needs at least three points");

  int evaluations = 0;
  auto objective = [&](double th) {
    ++evaluations;
    return problem.empirical_cost(problem.oracle_solution(family, scalar_param(th)), data);
  };

  const double theta_mle = family.mle_fit(data)(0);
  const double info = family.fisher_information(scalar_param(theta_mle))(0, 0);
  if (!(info > 0.0)) throw AssumptionError("IEO: Fisher information is not positive");
  double center = theta_mle;
  double half = options.half_width / std::sqrt(info);

  const int m = options.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(m));
  std::vector<double> values(static_cast<std::size_t>(m));
  int k = -1;
  for (int widen = 0; widen <= options.max_widenings; ++widen) {
    const double lo = center - half;
    const double step = 2.0 * half / (m - 1);
    k = 0;
    for (int i = 0; i < m; ++i) {
      grid[i] = lo + step * i;
      values[i] = objective(grid[i]);
      if (values[i] < values[k]) k = i;
    }
    if (k > 0 && k < m - 1) break;
    center = grid[k];
    half *= 2.0;
    k = -1;
  }
  if (k < 0) throw SolverError("IEO: no interior minimizer found on the widened theta range");

  const ScalarMinimum gs = golden_section(objective, grid[k - 1], grid[k + 1], options.tol);
  double best = gs.x;
  double fbest = gs.value;
  if (values[k] < fbest) {
    best = grid[k];
    fbest = values[k];
  }

  // move to the left edge of the (possibly flat) set of minimizers
  const double slack = 1e-13 * (1.0 + std::abs(fbest));
  int j = k - 1;
  while (j > 0 && values[j] <= fbest + slack) --j;
  double left = grid[j];
  if (values[j] > fbest + slack) {
    double right = best;
    while (right - left > options.tol) {
      const double mid = 0.5 * (left + right);
      if (objective(mid) <= fbest + slack) {
        right = mid;
      } else {
        left = mid;
      }
    }
    best = right;
  } else {
    best = left;
  }
  fbest = objective(best);

  if (objective(theta_mle) < fbest - 1e-12) best = theta_mle;

  PipelineResult r;
  r.method = Method::IEO;
  r.theta = scalar_param(best);
  r.w = problem.oracle_solution(family, *r.theta);
  if (!r.w.allFinite()) throw SolverError("IEO produced a non-finite decision");
  r.diagnostics.iterations = evaluations;
  r.diagnostics.residual = gs.bracket_width;
  return r;
}

PipelineResult fit(Method method, const DecisionProblem& problem, const ParametricFamily& family,
                   const Matrix& data) {
  switch (method) {
    case Method::SAA: return fit_saa(problem, data);
    case Method::ETO: return fit_eto(problem, family, data);
    case Method::IEO: return fit_ieo(problem, family, data);
  }
  throw DomainError("unknown method");
}

}  // namespace misspec
