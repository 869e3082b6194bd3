#include "misspec/perturbation.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace misspec {

std::string to_string(TiltKind kind) {
  switch (kind) {
    case TiltKind::Exponential:
      return "exponential";
    case TiltKind::ReluLinear:
      return "relu";
    case TiltKind::SmoothG:
      return "smooth_g";
  }
  return "unknown";
}

TiltKind parse_tilt_kind(const std::string& text) {
  if (text == "exponential" || text == "exp") return TiltKind::Exponential;
  if (text == "relu" || text == "relu_linear") return TiltKind::ReluLinear;
  if (text == "smooth_g" || text == "smooth") return TiltKind::SmoothG;
  throw ConfigError("unknown tilt kind '" + text + "' (expected exponential, relu or smooth_g)");
}

double smooth_g(double x) {
  const double ax = std::abs(x);
  if (ax <= 0.5) return x;
  double value = 1.0;
  if (ax < 1.5) {
    // g'(1/2 + s) = 1 - (6s^5 - 15s^4 + 10s^3); integrate from 1/2
    const double s = ax - 0.5;
    const double s2 = s * s;
    const double s4 = s2 * s2;
    value = 0.5 + s - (s4 * s2 - 3.0 * s4 * s + 2.5 * s4);
  }
  return x < 0.0 ? -value : value;
}

double tilt_factor(TiltKind kind, double tu) {
  switch (kind) {
    case TiltKind::Exponential:
      return std::exp(tu);
    case TiltKind::ReluLinear:
      return std::max(0.0, 1.0 + tu);
    case TiltKind::SmoothG:
      return 1.0 + smooth_g(tu);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

Direction Direction::scaled(double factor) const {
  Direction out = *this;
  Fn raw = raw_;
  out.raw_ = [raw, factor](const Vector& z) { return factor * raw(z); };
  if (axis_terms_) {
    AxisFn terms = axis_terms_;
    out.axis_terms_ = [terms, factor](int j, double x) { return factor * terms(j, x); };
  }
  out.offset_ = factor * offset_;
  out.second_moment_ = factor * factor * second_moment_;
  return out;
}

Direction center_direction(std::string label, Direction::Fn raw, FamilyPtr family, Vector theta0,
                           Direction::AxisFn axis_terms, const QuadratureSpec& spec) {
  if (!family) throw DirectionError("direction requires a family");
  if (!raw) throw DirectionError("direction requires an evaluator");
  const FamilyPoint base(family, theta0);
  const double mean = expect_scalar(base, spec, [&](const Vector& z) { return raw(z); });
  const double raw_second = expect_scalar(base, spec, [&](const Vector& z) {
    const double v = raw(z);
    return v * v;
  });
  if (!std::isfinite(mean) || !std::isfinite(raw_second)) {
    throw DirectionError("direction '" + label + "' has non-finite moments under the base model");
  }
  Direction d;
  d.label_ = std::move(label);
  d.raw_ = std::move(raw);
  d.axis_terms_ = std::move(axis_terms);
  d.family_ = std::move(family);
  d.theta0_ = std::move(theta0);
  d.offset_ = mean;
  d.centered_ = std::abs(mean) > 1e-12 * std::sqrt(raw_second);
  // E[(raw - mean)^2] recomputed directly to avoid cancellation
  d.second_moment_ = expect_scalar(base, spec, [&](const Vector& z) {
    const double v = d.raw_(z) - mean;
    return v * v;
  });
  return d;
}

std::string DirectionSpec::name() const {
  std::ostringstream os;
  os << kind;
  if (kind == "score_linear") {
    os << "[";
    for (std::size_t i = 0; i < beta.size(); ++i) os << (i ? "," : "") << beta[i];
    os << "]";
  }
  if (scale != 1.0) os << "*" << scale;
  return os.str();
}

Direction make_direction(const DirectionSpec& spec, FamilyPtr family, const Vector& theta0) {
  if (!family) throw DirectionError("direction requires a family");
  const int dz = family->data_dim();
  const Vector mu = family->marginal_mean(theta0);
  Direction::Fn raw;
  Direction::AxisFn terms;

  if (spec.kind == "prod_sq") {
    raw = [](const Vector& z) { return z.array().square().prod(); };
  } else if (spec.kind == "prod_centered_sq") {
    raw = [mu](const Vector& z) { return 0.5 * (z - mu).array().square().prod(); };
  } else if (spec.kind == "hermite2") {
    raw = [mu](const Vector& z) { return ((z - mu).array().square() - 1.0).sum(); };
    terms = [mu](int j, double x) {
      const double r = x - mu(j);
      return r * r - 1.0;
    };
  } else if (spec.kind == "score_linear") {
    if (static_cast<int>(spec.beta.size()) != family->param_dim()) {
      throw DirectionError("score_linear needs beta of length " + std::to_string(family->param_dim()));
    }
    const Vector beta = Eigen::Map<const Vector>(spec.beta.data(), static_cast<Eigen::Index>(spec.beta.size()));
    raw = [family, theta0, beta](const Vector& z) { return beta.dot(family->score(theta0, z)); };
    if (auto gsm = std::dynamic_pointer_cast<const GaussianScaledMeanFamily>(family)) {
      const Vector scales = gsm->scales();
      const double b = beta(0);
      terms = [scales, mu, b](int j, double x) { return b * scales(j) * (x - mu(j)); };
    }
  } else if (spec.kind == "identity") {
    if (dz != 1) throw DirectionError("identity direction requires one-dimensional data");
    raw = [](const Vector& z) { return z(0); };
    terms = [](int, double x) { return x; };
  } else {
    throw DirectionError("unknown direction kind '" + spec.kind + "'");
  }

  if (spec.scale != 1.0) {
    const double c = spec.scale;
    Direction::Fn inner = raw;
    raw = [inner, c](const Vector& z) { return c * inner(z); };
    if (terms) {
      Direction::AxisFn inner_terms = terms;
      terms = [inner_terms, c](int j, double x) { return c * inner_terms(j, x); };
    }
  }
  return center_direction(spec.name(), std::move(raw), std::move(family), theta0, std::move(terms));
}

// ---------------------------------------------------------------------------

namespace {

/// For one-dimensional data, adds the zeros of 1 + t u(z) (where the ReLU tilt
/// has a kink) to the breakpoints of `spec`.
QuadratureSpec with_tilt_kinks(const Direction& direction, double t, TiltKind kind, QuadratureSpec spec) {
  const ParametricFamily& family = *direction.family();
  if (kind != TiltKind::ReluLinear || t == 0.0 || family.data_dim() != 1) return spec;
  const double mean = family.marginal_mean(direction.theta0())(0);
  const double sd = family.marginal_sd(direction.theta0())(0);
  auto f = [&](double x) { return 1.0 + t * direction(Vector::Constant(1, x)); };
  const int scan = 4096;
  const double lo = mean - spec.half_width * sd, step = 2.0 * spec.half_width * sd / scan;
  std::vector<double> roots;
  double x0 = lo, f0 = f(lo);
  for (int k = 1; k <= scan; ++k) {
    const double x1 = lo + k * step, f1 = f(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if (f0 * f1 < 0.0) {
      std::uintmax_t iters = 100;
      const auto r = boost::math::tools::toms748_solve(f, x0, x1, f0, f1, boost::math::tools::eps_tolerance<double>(52),
                                                       iters);
      roots.push_back(0.5 * (r.first + r.second));
    }
    x0 = x1;
    f0 = f1;
  }
  if (roots.empty()) return spec;
  if (spec.breakpoints.empty()) spec.breakpoints.resize(1);
  auto& axis = spec.breakpoints[0];
  axis.insert(axis.end(), roots.begin(), roots.end());
  std::sort(axis.begin(), axis.end());
  return spec;
}

}  // namespace

double normalization_constant(const Direction& direction, double t, TiltKind kind, const QuadratureSpec& spec) {
  if (t == 0.0) return 1.0;
  const FamilyPoint base(direction.family(), direction.theta0());
  const QuadratureSpec kinked = with_tilt_kinks(direction, t, kind, spec);
  auto at = [&](int nodes) {
    return expect_scalar(base, kinked.with_nodes(nodes),
                         [&](const Vector& z) { return tilt_factor(kind, t * direction(z)); });
  };
  const double coarse = at(spec.nodes);
  const double fine = at(2 * spec.nodes);
  if (kind == TiltKind::Exponential) {
    const bool stable = std::isfinite(coarse) && std::isfinite(fine) && fine > 0.0 &&
                        std::abs(fine - coarse) <= 1e-6 * std::abs(fine);
    if (!stable) {
      std::ostringstream os;
      os << "exponential tilt of direction '" << direction.label() << "' at t=" << t
         << " has no stable normalization: C_t=" << coarse << " with " << spec.nodes
         << " nodes per axis, " << fine << " with " << 2 * spec.nodes;
      throw DivergenceError(os.str());
    }
  }
  if (!std::isfinite(fine) || !(fine > 0.0)) {
    throw NumericError("normalization constant of direction '" + direction.label() + "' is not positive and finite");
  }
  return fine;
}

TiltedDistribution::TiltedDistribution(Direction direction, double t, TiltKind kind, const QuadratureSpec& spec,
                                       SamplingGridOptions grid)
    : direction_(std::move(direction)), t_(t), kind_(kind), grid_(grid) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("tilt magnitude must be finite and nonnegative");
  if (grid_.cells_per_axis < 2) throw DomainError("sampling grid needs at least two cells per axis");
  normalization_ = normalization_constant(direction_, t_, kind_, spec);
}

double TiltedDistribution::factor(const Vector& z) const {
  if (t_ == 0.0) return 1.0;
  return tilt_factor(kind_, t_ * direction_(z));
}

double TiltedDistribution::density(const Vector& z) const {
  return factor(z) * family().density(theta0(), z) / normalization_;
}

void TiltedDistribution::for_each_node(const QuadratureSpec& spec, const NodeVisitor& visit) const {
  const double inv_c = 1.0 / normalization_;
  family().for_each_node(theta0(), with_tilt_kinks(direction_, t_, kind_, spec), [&](const Vector& z, double w) { visit(z, w * factor(z) * inv_c); });
}

LogLikelihoodRatio TiltedDistribution::log_likelihood_ratio(const Matrix& data) const {
  if (data.cols() != dim()) throw DomainError("log_likelihood_ratio: data has wrong dimension");
  LogLikelihoodRatio out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double f = factor(data.row(i).transpose());
    if (!(f > 0.0)) {
      out.zero_density = true;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    sum += std::log(f);
  }
  out.value = sum - static_cast<double>(data.rows()) * std::log(normalization_);
  return out;
}

bool TiltedDistribution::factorized_sampling() const {
  if (!family().independent_components()) return false;
  if (t_ == 0.0 || dim() == 1) return true;
  return kind_ == TiltKind::Exponential && direction_.separable();
}

void TiltedDistribution::build_grid() const {
  const int d = dim();
  if (d > 3) throw DomainError("tilted sampling supports at most three data dimensions");
  const int cells = grid_.cells_per_axis;
  Grid g;
  g.factorized = factorized_sampling();
  const Vector mean = family().marginal_mean(theta0());
  const Vector sd = family().marginal_sd(theta0());
  g.lower = mean - grid_.half_width_sd * sd;
  g.cell_width = (2.0 * grid_.half_width_sd / cells) * sd;
  const double boundary_tol = 1e-9;

  auto coverage_fail = [&](double share) {
    std::ostringstream os;
    os << "sampling grid (+-" << grid_.half_width_sd << " sd) misses the effective support of Q_t: "
       << "boundary cells carry " << share << " of the mass (direction '" << direction_.label()
       << "', t=" << t_ << ", tilt " << to_string(kind_) << ")";
    throw CoverageError(os.str());
  };

  if (g.factorized) {
    g.axis_cdf.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      std::vector<double> mass(static_cast<std::size_t>(cells));
      std::vector<double> logs(static_cast<std::size_t>(cells));
      double max_log = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < cells; ++k) {
        const double x = g.lower(j) + (k + 0.5) * g.cell_width(j);
        double l = std::log(family().marginal_pdf(theta0(), j, x));
        if (t_ != 0.0) {
          if (d == 1) {
            const double f = factor(Vector::Constant(1, x));
            l += f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
          } else {
            // exponential of a separable direction: the constant offset cancels
            l += t_ * direction_.axis_term(j, x);
          }
        }
        logs[static_cast<std::size_t>(k)] = l;
        max_log = std::max(max_log, l);
      }
      if (!std::isfinite(max_log)) throw NumericError("sampling grid has no mass");
      double total = 0.0;
      for (int k = 0; k < cells; ++k) {
        mass[static_cast<std::size_t>(k)] = std::exp(logs[static_cast<std::size_t>(k)] - max_log);
        total += mass[static_cast<std::size_t>(k)];
      }
      const double share = (mass.front() + mass.back()) / total;
      if (share > boundary_tol || !std::isfinite(total)) coverage_fail(share);
      auto& cdf = g.axis_cdf[static_cast<std::size_t>(j)];
      cdf.resize(static_cast<std::size_t>(cells));
      double acc = 0.0;
      for (int k = 0; k < cells; ++k) {
        acc += mass[static_cast<std::size_t>(k)] / total;
        cdf[static_cast<std::size_t>(k)] = acc;
      }
    }
  } else {
    std::size_t count = 1;
    for (int j = 0; j < d; ++j) count *= static_cast<std::size_t>(cells);
    if (count > (std::size_t{1} << 26)) {
      throw DomainError("full tensor sampling grid too large; lower cells_per_axis");
    }
    g.cdf.resize(count);
    std::vector<double> logs(count);
    double max_log = -std::numeric_limits<double>::infinity();
    Vector z(d);
    for (std::size_t idx = 0; idx < count; ++idx) {
      std::size_t rem = idx;
      for (int j = 0; j < d; ++j) {
        const std::size_t k = rem % static_cast<std::size_t>(cells);
        rem /= static_cast<std::size_t>(cells);
        z(j) = g.lower(j) + (static_cast<double>(k) + 0.5) * g.cell_width(j);
      }
      const double f = factor(z);
      double l = -std::numeric_limits<double>::infinity();
      if (f > 0.0 && std::isfinite(f)) {
        l = family().log_density(theta0(), z) + std::log(f);
      } else if (!std::isfinite(f)) {
        l = std::numeric_limits<double>::infinity();
      }
      logs[idx] = l;
      max_log = std::max(max_log, l);
    }
    if (!std::isfinite(max_log)) {
      throw CoverageError("tilted density is not finite on the sampling grid (direction '" + direction_.label() + "')");
    }
    double total = 0.0;
    double boundary = 0.0;
    for (std::size_t idx = 0; idx < count; ++idx) {
      const double m = std::exp(logs[idx] - max_log);
      total += m;
      std::size_t rem = idx;
      bool edge = false;
      for (int j = 0; j < d; ++j) {
        const std::size_t k = rem % static_cast<std::size_t>(cells);
        rem /= static_cast<std::size_t>(cells);
        edge = edge || k == 0 || k + 1 == static_cast<std::size_t>(cells);
      }
      if (edge) boundary += m;
      g.cdf[idx] = total;
    }
    if (boundary / total > boundary_tol) coverage_fail(boundary / total);
    for (double& c : g.cdf) c /= total;
  }
  grid_data_ = std::move(g);
}

Matrix TiltedDistribution::sample(std::size_t n, RandomEngine& rng) const {
  std::call_once(grid_once_, [this] { build_grid(); });
  const Grid& g = grid_data_;
  const int d = dim();
  Matrix out(static_cast<Eigen::Index>(n), d);
  const auto cells = static_cast<std::size_t>(grid_.cells_per_axis);
  auto locate = [](const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (g.factorized) {
      for (int j = 0; j < d; ++j) {
        const std::size_t k = locate(g.axis_cdf[static_cast<std::size_t>(j)], uniform01(rng));
        out(row, j) = g.lower(j) + (static_cast<double>(k) + uniform01(rng)) * g.cell_width(j);
      }
    } else {
      std::size_t rem = locate(g.cdf, uniform01(rng));
      for (int j = 0; j < d; ++j) {
        const std::size_t k = rem % cells;
        rem /= cells;
        out(row, j) = g.lower(j) + (static_cast<double>(k) + uniform01(rng)) * g.cell_width(j);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Mild:
      return "mild";
    case Regime::Balanced:
      return "balanced";
    case Regime::Severe:
      return "severe";
  }
  return "unknown";
}

Regime classify_regime(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  if (std::abs(alpha - 0.5) < 1e-12) return Regime::Balanced;
  return alpha > 0.5 ? Regime::Mild : Regime::Severe;
}

RegimeInfo regime_t(const RegimeConfig& config) {
  if (config.n < 1) throw DomainError("regime requires n >= 1");
  RegimeInfo info;
  info.regime = classify_regime(config.alpha);
  info.t = std::pow(static_cast<double>(config.n), -config.alpha);
  return info;
}

}  // namespace misspec
