#pragma once

#include "misspec/problems.hpp"

#include <optional>
#include <string>

namespace misspec {

enum class Method { SAA, ETO, IEO };

inline constexpr Method kAllMethods[] = {Method::SAA, Method::IEO, Method::ETO};

std::string to_string(Method method);
Method parse_method(const std::string& text);

struct SolverDiagnostics {
  int iterations = 0;
  /// ETO: norm of the mean score at theta_hat. IEO: width of the final bracket in theta.
  double residual = 0.0;
};

struct PipelineResult {
  Method method = Method::SAA;
  std::optional<Vector> theta;
  Vector w;
  SolverDiagnostics diagnostics;
};

PipelineResult fit_saa(const DecisionProblem& problem, const Matrix& data);

PipelineResult fit_eto(const DecisionProblem& problem, const ParametricFamily& family, const Matrix& data);

struct IeoOptions {
  int grid_points = 401;
  /// Initial half width, in units of 1/sqrt(I(theta_mle)).
  double half_width = 10.0;
  int max_widenings = 20;
  double tol = 1e-10;
};

/// Smallest minimizer of theta -> (1/n) sum_i c(w_theta, z_i). Scalar theta only.
PipelineResult fit_ieo(const DecisionProblem& problem, const ParametricFamily& family, const Matrix& data,
                       const IeoOptions& options = {});

PipelineResult fit(Method method, const DecisionProblem& problem, const ParametricFamily& family,
                   const Matrix& data);

}  // namespace misspec
