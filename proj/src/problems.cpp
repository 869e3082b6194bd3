#include "misspec/problems.hpp"

#include "misspec/optim.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>

namespace misspec {

namespace {

QuadratureSpec with_kinks(const QuadratureSpec& spec, const std::vector<std::vector<double>>& kinks) {
  QuadratureSpec out = spec;
  if (out.breakpoints.size() < kinks.size()) out.breakpoints.resize(kinks.size());
  for (std::size_t j = 0; j < kinks.size(); ++j) {
    out.breakpoints[j].insert(out.breakpoints[j].end(), kinks[j].begin(), kinks[j].end());
  }
  return out;
}

void check_dims(const DecisionProblem& p, const Vector& w, const Vector& z) {
  if (w.size() != p.decision_dim() || z.size() != p.data_dim()) {
    throw DomainError(p.name() + ": dimension mismatch (w has " + std::to_string(w.size()) + ", z has " +
                      std::to_string(z.size()) + ")");
  }
}

struct MarginalMoments {
  Vector mean;
  Vector sd;
};

MarginalMoments marginal_moments(const Distribution& dist, const QuadratureSpec& spec) {
  const int d = dist.dim();
  const Vector first = expect(dist, spec, Vector(Vector::Zero(d)), [](const Vector& z) { return z; });
  const Vector second =
      expect(dist, spec, Vector(Vector::Zero(d)), [](const Vector& z) { return Vector(z.array().square()); });
  MarginalMoments m;
  m.mean = first;
  m.sd = (second - first.cwiseProduct(first)).cwiseMax(1e-300).cwiseSqrt();
  if (!m.mean.allFinite() || !m.sd.allFinite()) throw NumericError("marginal moments are not finite");
  return m;
}

}  // namespace

double DecisionProblem::empirical_cost(const Vector& w, const Matrix& data) const {
  if (data.rows() < 1) throw DataError(name() + ": empirical cost of an empty data set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) total += cost(w, data.row(i).transpose());
  return total / static_cast<double>(data.rows());
}

std::vector<std::vector<double>> DecisionProblem::kinks(const Vector&) const { return {}; }

Vector DecisionProblem::oracle_solution(const ParametricFamily& family, const Vector& theta) const {
  FamilyPtr alias(std::shared_ptr<const ParametricFamily>{}, &family);
  const FamilyPoint point(alias, theta);
  return coordinate_descent_minimizer(*this, point, family.marginal_mean(theta));
}

Vector DecisionProblem::distribution_minimizer(const Distribution& dist, const QuadratureSpec& spec) const {
  return coordinate_descent_minimizer(*this, dist, marginal_moments(dist, spec).mean, spec);
}

std::optional<Matrix> DecisionProblem::analytic_hessian(const ParametricFamily&, const Vector&,
                                                        const Vector&) const {
  return std::nullopt;
}

// ---------------------------------------------------------------------------

NewsvendorProblem::NewsvendorProblem(Vector holding, Vector backlog)
    : holding_(std::move(holding)), backlog_(std::move(backlog)) {
  if (holding_.size() < 1 || holding_.size() != backlog_.size()) {
    throw DomainError("newsvendor: holding and backlog costs must be non-empty and of equal length");
  }
  if ((holding_.array() <= 0.0).any() || (backlog_.array() <= 0.0).any() || !holding_.allFinite() ||
      !backlog_.allFinite()) {
    throw DomainError("newsvendor: costs must be positive and finite");
  }
}

Vector NewsvendorProblem::critical_ratios() const {
  return backlog_.array() / (holding_.array() + backlog_.array());
}

double NewsvendorProblem::cost(const Vector& w, const Vector& z) const {
  check_dims(*this, w, z);
  const Vector diff = w - z;
  return holding_.dot(diff.cwiseMax(0.0)) + backlog_.dot((-diff).cwiseMax(0.0));
}

Vector NewsvendorProblem::grad_cost(const Vector& w, const Vector& z) const {
  check_dims(*this, w, z);
  Vector g(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) g(j) = z(j) <= w(j) ? holding_(j) : -backlog_(j);
  return g;
}

double NewsvendorProblem::empirical_cost(const Vector& w, const Matrix& data) const {
  if (data.rows() < 1) throw DataError("newsvendor: empirical cost of an empty data set");
  if (data.cols() != data_dim() || w.size() != decision_dim()) throw DomainError("newsvendor: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double wj = w(j);
    const double a = holding_(j);
    const double d = backlog_(j);
    const double* col = data.col(j).data();
    double over = 0.0;
    double under = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double r = wj - col[i];
      if (r > 0.0) {
        over += r;
      } else {
        under -= r;
      }
    }
    total += a * over + d * under;
  }
  return total / static_cast<double>(data.rows());
}

std::vector<std::vector<double>> NewsvendorProblem::kinks(const Vector& w) const { return axis_kinks(w); }

Vector NewsvendorProblem::oracle_solution(const ParametricFamily& family, const Vector& theta) const {
  if (family.data_dim() != data_dim()) throw DomainError("newsvendor: family dimension mismatch");
  if (!family.independent_components()) return DecisionProblem::oracle_solution(family, theta);
  const Vector q = critical_ratios();
  Vector w(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) w(j) = family.marginal_quantile(theta, static_cast<int>(j), q(j));
  return w;
}

Vector NewsvendorProblem::distribution_minimizer(const Distribution& dist, const QuadratureSpec& spec) const {
  if (dist.dim() != data_dim()) throw DomainError("newsvendor: distribution dimension mismatch");
  const MarginalMoments mom = marginal_moments(dist, spec);
  const Vector q = critical_ratios();
  Vector w(q.size());
  for (int j = 0; j < data_dim(); ++j) {
    // marginal CDF, self-normalized on the same rule so F(+inf) = 1 exactly
    auto excess = [&](double x) {
      QuadratureSpec s = spec;
      s.breakpoints.assign(static_cast<std::size_t>(data_dim()), {});
      s.breakpoints[static_cast<std::size_t>(j)] = {x};
      double below = 0.0;
      double total = 0.0;
      dist.for_each_node(s, [&](const Vector& z, double wt) {
        total += wt;
        if (z(j) <= x) below += wt;
      });
      return below / total - q(j);
    };
    double lo = mom.mean(j) - 12.0 * mom.sd(j);
    double hi = mom.mean(j) + 12.0 * mom.sd(j);
    double flo = excess(lo);
    double fhi = excess(hi);
    if (!(flo < 0.0 && fhi > 0.0)) {
      throw SolverError("newsvendor: could not bracket the critical-ratio quantile of component " +
                        std::to_string(j + 1));
    }
    boost::uintmax_t iterations = 200;
    const auto root = boost::math::tools::toms748_solve(excess, lo, hi, flo, fhi,
                                                        boost::math::tools::eps_tolerance<double>(50), iterations);
    w(j) = 0.5 * (root.first + root.second);
  }
  return w;
}

Vector NewsvendorProblem::empirical_minimizer(const Matrix& data) const {
  if (data.rows() < 1) throw DataError("newsvendor: SAA needs at least one observation");
  if (data.cols() != data_dim()) throw DataError("newsvendor: data has the wrong number of columns");
  if (!data.allFinite()) throw DataError("newsvendor: data contains non-finite values");
  const Vector q = critical_ratios();
  const auto n = static_cast<std::size_t>(data.rows());
  Vector w(data.cols());
  std::vector<double> column(n);
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    std::copy(data.col(j).data(), data.col(j).data() + n, column.begin());
    const double nq = static_cast<double>(n) * q(j);
    auto k = static_cast<std::size_t>(std::ceil(nq - 1e-9 * std::max(1.0, nq)));
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(k - 1), column.end());
    w(j) = column[k - 1];
  }
  return w;
}

std::optional<Matrix> NewsvendorProblem::analytic_hessian(const ParametricFamily& family, const Vector& theta,
                                                          const Vector& w) const {
  if (!family.independent_components()) return std::nullopt;
  Matrix V = Matrix::Zero(w.size(), w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    V(j, j) = (holding_(j) + backlog_(j)) * family.marginal_pdf(theta, static_cast<int>(j), w(j));
  }
  return V;
}

// ---------------------------------------------------------------------------

double expected_cost(const DecisionProblem& problem, const Distribution& dist, const Vector& w,
                     const QuadratureSpec& spec) {
  if (w.size() != problem.decision_dim()) throw DomainError("expected_cost: decision has wrong dimension");
  const QuadratureSpec s = with_kinks(spec, problem.kinks(w));
  double num = 0.0;
  double mass = 0.0;
  dist.for_each_node(s, [&](const Vector& z, double wt) {
    if (wt == 0.0) return;
    num += wt * problem.cost(w, z);
    mass += wt;
  });
  const double value = num / mass;
  if (!std::isfinite(value)) throw NumericError("expected_cost: quadrature is not finite");
  return value;
}

Vector coordinate_descent_minimizer(const DecisionProblem& problem, const Distribution& dist, const Vector& start,
                                    const QuadratureSpec& spec, double tol) {
  Vector w = start;
  const Vector scale = Vector::Ones(w.size());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      auto f = [&](double x) {
        Vector trial = w;
        trial(k) = x;
        return expected_cost(problem, dist, trial, spec);
      };
      double radius = 4.0 * scale(k);
      ScalarMinimum m;
      for (int expand = 0; expand < 30; ++expand) {
        m = golden_section(f, w(k) - radius, w(k) + radius, tol);
        if (std::abs(m.x - w(k)) < 0.9 * radius) break;
        radius *= 2.0;
      }
      moved = std::max(moved, std::abs(m.x - w(k)));
      w(k) = m.x;
    }
    // golden section resolves a smooth minimum only to ~sqrt(eps)
    if (moved < std::max(10.0 * tol, 1e-7 * (1.0 + w.cwiseAbs().maxCoeff()))) return w;
  }
  throw SolverError("coordinate descent did not converge");
}

Matrix finite_difference_hessian(const DecisionProblem& problem, const Distribution& dist, const Vector& w,
                                 const QuadratureSpec& spec) {
  const Eigen::Index d = w.size();
  Matrix H(d, d);
  Vector step(d);
  for (Eigen::Index k = 0; k < d; ++k) step(k) = 1e-4 * (1.0 + std::abs(w(k)));
  auto f = [&](const Vector& x) { return expected_cost(problem, dist, x, spec); };
  const double f0 = f(w);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector wp = w, wm = w;
    wp(i) += step(i);
    wm(i) -= step(i);
    H(i, i) = (f(wp) - 2.0 * f0 + f(wm)) / (step(i) * step(i));
    for (Eigen::Index j = i + 1; j < d; ++j) {
      Vector pp = w, pm = w, mp = w, mm = w;
      pp(i) += step(i), pp(j) += step(j);
      pm(i) += step(i), pm(j) -= step(j);
      mp(i) -= step(i), mp(j) += step(j);
      mm(i) -= step(i), mm(j) -= step(j);
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step(i) * step(j));
    }
  }
  return H;
}

SensitivityMatrices sensitivity_matrices(const DecisionProblem& problem, FamilyPtr family, const Vector& theta0,
                                         const SensitivityOptions& options) {
  if (!family) throw DomainError("sensitivity_matrices requires a family");
  SensitivityMatrices m;
  m.theta0 = theta0;
  m.w0 = problem.oracle_solution(*family, theta0);
  const FamilyPoint base(family, theta0);

  if (auto V = problem.analytic_hessian(*family, theta0, m.w0)) {
    m.V = *V;
    m.analytic_V = true;
  } else {
    m.V = finite_difference_hessian(problem, base, m.w0);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> veig(0.5 * (m.V + m.V.transpose()));
  if (veig.eigenvalues().minCoeff() <= 0.0) throw AssumptionError("Hessian V is not positive definite");

  const int dw = problem.decision_dim();
  const int dth = family->param_dim();
  const QuadratureSpec kinked = with_kinks(QuadratureSpec{}, problem.kinks(m.w0));
  m.Sigma = refine_until_stable(
      [&](int nodes) {
        return expect(base, kinked.with_nodes(nodes), Matrix(Matrix::Zero(dw, dth)), [&](const Vector& z) {
          return Matrix(problem.grad_cost(m.w0, z) * family->score(theta0, z).transpose());
        });
      },
      options.start_nodes, options.rtol, options.max_nodes);

  Eigen::JacobiSVD<Matrix> svd(m.Sigma);
  const Vector sv = svd.singularValues();
  if (sv.size() == 0 || sv.minCoeff() <= 1e-10 * std::max(1.0, sv.maxCoeff())) {
    throw AssumptionError("Sigma is rank deficient");
  }

  m.I = family->fisher_information(theta0);
  const Eigen::LDLT<Matrix> vsolve(m.V);
  m.Phi = m.Sigma.transpose() * vsolve.solve(m.Sigma);
  m.oracle_gradient = -vsolve.solve(m.Sigma).transpose();

  m.oracle_gradient_fd.resize(dth, dw);
  for (int k = 0; k < dth; ++k) {
    const double h = options.theta_step * (1.0 + std::abs(theta0(k)));
    Vector tp = theta0, tm = theta0;
    tp(k) += h;
    tm(k) -= h;
    m.oracle_gradient_fd.row(k) =
        ((problem.oracle_solution(*family, tp) - problem.oracle_solution(*family, tm)) / (2.0 * h)).transpose();
  }
  return m;
}

}  // namespace misspec
