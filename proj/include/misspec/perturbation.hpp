#pragma once

#include "misspec/model.hpp"

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace misspec {

enum class TiltKind { Exponential, ReluLinear, SmoothG };

std::string to_string(TiltKind kind);
TiltKind parse_tilt_kind(const std::string& text);

/// Default smooth tilt link: g(x) = x on [-1/2, 1/2], blended to +-1 at
/// |x| = 3/2 with a quintic smoothstep on g', constant beyond. C^3, nondecreasing.
double smooth_g(double x);

/// Unnormalized tilt factor for the value t * u(z).
double tilt_factor(TiltKind kind, double tu);

/// A zero-mean perturbation direction u(z) under P_{theta0}.
class Direction {
public:
  using Fn = std::function<double(const Vector&)>;
  using AxisFn = std::function<double(int axis, double x)>;

  double operator()(const Vector& z) const { return raw_(z) - offset_; }

  const std::string& label() const { return label_; }
  /// True when a nonzero mean was subtracted from the raw function.
  bool centered() const { return centered_; }
  double offset() const { return offset_; }
  /// E_{theta0}[u^2] after centering.
  double second_moment() const { return second_moment_; }
  const FamilyPtr& family() const { return family_; }
  const Vector& theta0() const { return theta0_; }

  /// u(z) = sum_j axis_term(j, z_j) - offset when available.
  bool separable() const { return static_cast<bool>(axis_terms_); }
  double axis_term(int axis, double x) const { return axis_terms_(axis, x); }

  /// Returns a copy with u multiplied by `factor`.
  Direction scaled(double factor) const;

private:
  friend Direction center_direction(std::string label, Fn raw, FamilyPtr family, Vector theta0,
                                    AxisFn axis_terms, const QuadratureSpec& spec);
  std::string label_;
  Fn raw_;
  AxisFn axis_terms_;
  FamilyPtr family_;
  Vector theta0_;
  double offset_ = 0.0;
  double second_moment_ = 0.0;
  bool centered_ = false;
};

/// Subtracts E_{theta0}[raw] so the returned direction has mean zero.
/// `axis_terms`, when given, must satisfy raw(z) = sum_j axis_terms(j, z_j).
Direction center_direction(std::string label, Direction::Fn raw, FamilyPtr family, Vector theta0,
                           Direction::AxisFn axis_terms = {}, const QuadratureSpec& spec = {});

/// Named directions usable from configuration files.
///
///   prod_sq           prod_j z_j^2
///   prod_centered_sq  prod_j (z_j - mu_j)^2 / 2
///   score_linear      beta^T s_{theta0}(z)
///   hermite2          sum_j ((z_j - mu_j)^2 - 1)
///   identity          z_1 (one-dimensional data only)
///
/// mu_j is the mean of component j under P_{theta0}. Every direction is centered.
struct DirectionSpec {
  std::string kind;
  std::vector<double> beta;
  double scale = 1.0;

  std::string name() const;
};

Direction make_direction(const DirectionSpec& spec, FamilyPtr family, const Vector& theta0);

struct SamplingGridOptions {
  int cells_per_axis = 512;
  double half_width_sd = 8.0;
};

struct LogLikelihoodRatio {
  double value = 0.0;
  /// Set when some observation has zero tilted density; value is then -inf.
  bool zero_density = false;
};

/// Ground truth Q_t with density q_t(z) = tilt(t u(z)) p_{theta0}(z) / C_t.
class TiltedDistribution final : public Distribution {
public:
  TiltedDistribution(Direction direction, double t, TiltKind kind, const QuadratureSpec& spec = {},
                     SamplingGridOptions grid = {});

  int dim() const override { return direction_.family()->data_dim(); }
  void for_each_node(const QuadratureSpec& spec, const NodeVisitor& visit) const override;

  double t() const { return t_; }
  TiltKind kind() const { return kind_; }
  const Direction& direction() const { return direction_; }
  const ParametricFamily& family() const { return *direction_.family(); }
  const Vector& theta0() const { return direction_.theta0(); }
  double normalization() const { return normalization_; }
  const SamplingGridOptions& grid_options() const { return grid_; }

  /// Unnormalized factor tilt(t u(z)).
  double factor(const Vector& z) const;
  double density(const Vector& z) const;

  /// Draws from the tensor-grid discretization of Q_t. Thread-safe.
  Matrix sample(std::size_t n, RandomEngine& rng) const;

  /// sum_i log q_t(z_i) - sum_i log p_{theta0}(z_i).
  LogLikelihoodRatio log_likelihood_ratio(const Matrix& data) const;

  /// True when the sampler uses independent per-axis grids.
  bool factorized_sampling() const;

private:
  struct Grid {
    bool factorized = false;
    Vector lower;
    Vector cell_width;
    std::vector<std::vector<double>> axis_cdf;  // factorized
    std::vector<double> cdf;                    // full tensor, axis 0 fastest
  };
  void build_grid() const;

  Direction direction_;
  double t_;
  TiltKind kind_;
  SamplingGridOptions grid_;
  double normalization_ = 1.0;

  mutable std::once_flag grid_once_;
  mutable Grid grid_data_;
};

/// C_t by quadrature; for exponential tilts refinement must change it by less
/// than 1e-6 (relative), otherwise DivergenceError.
double normalization_constant(const Direction& direction, double t, TiltKind kind,
                              const QuadratureSpec& spec = {});

enum class Regime { Mild, Balanced, Severe };

std::string to_string(Regime regime);

struct RegimeConfig {
  double alpha = 0.5;
  std::size_t n = 1;
};

struct RegimeInfo {
  double t = 0.0;
  Regime regime = Regime::Balanced;
};

/// t = n^{-alpha} and the regime label of alpha.
RegimeInfo regime_t(const RegimeConfig& config);
Regime classify_regime(double alpha);

}  // namespace misspec
