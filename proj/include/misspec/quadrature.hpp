#pragma once

#include <Eigen/Dense>

#include "misspec/errors.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace misspec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One-dimensional quadrature rule: sum_i weights[i] * f(nodes[i]).
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Probabilists' Gauss-Hermite rule with `n` nodes. Integrates against the
/// standard normal density, so the weights sum to one. Rules are cached.
const Rule1D& hermite_rule(int n);

/// Gauss-Legendre rule with `n` nodes on [-1, 1]. Rules are cached.
const Rule1D& legendre_rule(int n);

/// Resolution and kink locations for an expectation.
///
/// `breakpoints[j]` lists coordinates along axis j where the integrand is
/// discontinuous or kinked. Axes with breakpoints are integrated piecewise
/// with Gauss-Legendre on [mean - half_width*sd, ..., mean + half_width*sd];
/// axes without use Gauss-Hermite.
struct QuadratureSpec {
  int nodes = 64;
  std::vector<std::vector<double>> breakpoints;
  double half_width = 12.0;

  QuadratureSpec with_nodes(int n) const {
    QuadratureSpec s = *this;
    s.nodes = n;
    return s;
  }
  const std::vector<double>* axis_breakpoints(std::size_t axis) const {
    if (axis < breakpoints.size() && !breakpoints[axis].empty()) return &breakpoints[axis];
    return nullptr;
  }
};

/// Rule integrating against N(mean, sd^2) along one axis.
Rule1D gaussian_axis_rule(double mean, double sd, int nodes, const std::vector<double>* breakpoints,
                          double half_width);

using NodeVisitor = std::function<void(const Vector& z, double weight)>;

/// Visits every node of the tensor product of `axes`.
void tensor_for_each(const std::vector<Rule1D>& axes, const NodeVisitor& visit);

/// Product of independent normals N(mean_j, sd_j^2), integrated by a tensor rule.
void gaussian_product_for_each(const Vector& mean, const Vector& sd, const QuadratureSpec& spec,
                               const NodeVisitor& visit);

/// Breakpoints placing one kink per axis at `w` (separable piecewise integrands).
std::vector<std::vector<double>> axis_kinks(const Vector& w);

inline double norm_of(double x) { return std::abs(x); }
template <class Derived>
double norm_of(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().maxCoeff();
}

/// Computes `evaluate(nodes)` at increasing resolution until the relative
/// change drops below `rtol`; returns the finest value.
template <class Eval>
auto refine_until_stable(Eval&& evaluate, int start_nodes, double rtol, int max_nodes) {
  auto prev = evaluate(start_nodes);
  for (int n = 2 * start_nodes; n <= max_nodes; n *= 2) {
    auto next = evaluate(n);
    const double scale = std::max(1.0, static_cast<double>(norm_of(prev)));
    if (static_cast<double>(norm_of(next - prev)) <= rtol * scale) return next;
    prev = next;
  }
  throw NumericError("quadrature did not stabilise below rtol " + std::to_string(rtol) + " with " +
                     std::to_string(max_nodes) + " nodes per axis");
}

}  // namespace misspec
