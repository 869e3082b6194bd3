#include "misspec/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

namespace misspec {

namespace {

// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix of the
// three-term recurrence, weights are mu0 times the squared first eigenvector components.
Rule1D golub_welsch(int n, double mu0, const std::function<double(int)>& off_diagonal) {
  if (n < 1) throw DomainError("quadrature rule needs at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = off_diagonal(k);
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
  if (solver.info() != Eigen::Success) throw NumericError("Golub-Welsch eigen solve failed");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  // symmetrize: the rules are exactly symmetric about zero
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

const Rule1D& cached(std::map<int, std::unique_ptr<Rule1D>>& cache, std::mutex& mutex, int n,
                     const std::function<Rule1D(int)>& build) {
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<Rule1D>(build(n))).first;
  return *it->second;
}

}  // namespace

const Rule1D& hermite_rule(int n) {
  static std::map<int, std::unique_ptr<Rule1D>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, n, [](int m) {
    return golub_welsch(m, 1.0, [](int k) { return std::sqrt(static_cast<double>(k)); });
  });
}

const Rule1D& legendre_rule(int n) {
  static std::map<int, std::unique_ptr<Rule1D>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, n, [](int m) {
    return golub_welsch(m, 2.0, [](int k) {
      const double kk = static_cast<double>(k);
      return kk / std::sqrt(4.0 * kk * kk - 1.0);
    });
  });
}

Rule1D gaussian_axis_rule(double mean, double sd, int nodes, const std::vector<double>* breakpoints,
                          double half_width) {
  if (!(sd > 0.0)) throw DomainError("axis standard deviation must be positive");
  Rule1D out;
  if (breakpoints == nullptr) {
    const Rule1D& gh = hermite_rule(nodes);
    out.nodes.reserve(gh.size());
    out.weights = gh.weights;
    for (double x : gh.nodes) out.nodes.push_back(mean + sd * x);
    return out;
  }

  const double lo = mean - half_width * sd;
  const double hi = mean + half_width * sd;
  std::vector<double> cuts{lo};
  for (double b : *breakpoints) {
    if (std::isfinite(b) && b > lo && b < hi) cuts.push_back(b);
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const Rule1D& gl = legendre_rule(nodes);
  const double norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double half = 0.5 * (cuts[p + 1] - cuts[p]);
    const double mid = 0.5 * (cuts[p + 1] + cuts[p]);
    for (std::size_t i = 0; i < gl.size(); ++i) {
      const double x = mid + half * gl.nodes[i];
      const double r = (x - mean) / sd;
      out.nodes.push_back(x);
      out.weights.push_back(half * gl.weights[i] * norm * std::exp(-0.5 * r * r));
    }
  }
  return out;
}

void tensor_for_each(const std::vector<Rule1D>& axes, const NodeVisitor& visit) {
  const std::size_t dim = axes.size();
  if (dim == 0) return;
  for (const auto& a : axes) {
    if (a.size() == 0) return;
  }
  std::vector<std::size_t> index(dim, 0);
  Vector z(static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < dim; ++j) z(j) = axes[j].nodes[0];
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < dim; ++j) w *= axes[j].weights[index[j]];
    visit(z, w);
    std::size_t j = 0;
    for (; j < dim; ++j) {
      if (++index[j] < axes[j].size()) {
        z(j) = axes[j].nodes[index[j]];
        break;
      }
      index[j] = 0;
      z(j) = axes[j].nodes[0];
    }
    if (j == dim) break;
  }
}

void gaussian_product_for_each(const Vector& mean, const Vector& sd, const QuadratureSpec& spec,
                               const NodeVisitor& visit) {
  std::vector<Rule1D> axes;
  axes.reserve(static_cast<std::size_t>(mean.size()));
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    axes.push_back(gaussian_axis_rule(mean(j), sd(j), spec.nodes,
                                      spec.axis_breakpoints(static_cast<std::size_t>(j)),
                                      spec.half_width));
  }
  tensor_for_each(axes, visit);
}

std::vector<std::vector<double>> axis_kinks(const Vector& w) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(w.size()));
  for (Eigen::Index j = 0; j < w.size(); ++j) out[static_cast<std::size_t>(j)] = {w(j)};
  return out;
}

}  // namespace misspec
