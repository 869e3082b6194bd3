#include "misspec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <thread>

namespace misspec {

void ExperimentConfig::validate() const {
  if (data_dim < 1 || data_dim > 3) throw ConfigError("data_dim must be 1, 2 or 3");
  if (!(holding > 0.0) || !(backlog > 0.0)) throw ConfigError("holding and backlog costs must be positive");
  if (!std::isfinite(theta0)) throw ConfigError("theta0 must be finite");
  if (directions.empty()) throw ConfigError("at least one direction is required");
  if (alphas.empty()) throw ConfigError("at least one alpha is required");
  if (ns.empty()) throw ConfigError("at least one sample size is required");
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alpha must be positive and finite");
  }
  for (std::size_t n : ns) {
    if (n < 1) throw ConfigError("sample sizes must be positive");
  }
  if (reps < 2) throw ConfigError("at least two replications are required");
  if (grid.cells_per_axis < 2) throw ConfigError("grid resolution must be at least 2");
  if (!(grid.half_width_sd > 0.0)) throw ConfigError("grid half width must be positive");
  if (quadrature_nodes < 2) throw ConfigError("quadrature_nodes must be at least 2");
  if (threads < 0) throw ConfigError("threads must be non-negative");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.directions = {DirectionSpec{"prod_sq", {}, 1.0}, DirectionSpec{"prod_centered_sq", {}, 1.0}};
  c.alphas = {2.0, 0.5, 0.1};
  c.ns = {200, 1000};
  return c;
}

ExperimentConfig example1_config() {
  ExperimentConfig c;
  c.name = "example1";
  c.data_dim = 1;
  c.theta0 = 0.0;
  c.directions = {DirectionSpec{"identity", {}, 1.0}};
  c.tilt = TiltKind::ReluLinear;
  c.alphas = {0.3};
  c.ns = {10000};
  c.reps = 1000;
  return c;
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "default") return default_config();
  if (name == "example1") return example1_config();
  throw ConfigError("unknown preset '" + name + "' (expected default or example1)");
}

Instance build_instance(const ExperimentConfig& config) {
  Instance inst;
  inst.problem = std::make_shared<NewsvendorProblem>(Vector::Constant(config.data_dim, config.holding),
                                                     Vector::Constant(config.data_dim, config.backlog));
  inst.family = std::make_shared<GaussianScaledMeanFamily>(config.data_dim);
  inst.theta0 = scalar_param(config.theta0);
  return inst;
}

Direction build_direction(const Instance& instance, const DirectionSpec& spec) {
  return make_direction(spec, instance.family, instance.theta0);
}

TrueOptimum true_optimum(const DecisionProblem& problem, const TiltedDistribution& tilted,
                         const QuadratureSpec& spec, bool crosscheck) {
  TrueOptimum opt;
  opt.w = problem.distribution_minimizer(tilted, spec);
  opt.value = expected_cost(problem, tilted, opt.w, spec);
  if (crosscheck) {
    const Vector start = problem.oracle_solution(tilted.family(), tilted.theta0());
    const Vector cd = coordinate_descent_minimizer(problem, tilted, start, spec);
    opt.crosscheck_gap = (cd - opt.w).cwiseAbs().maxCoeff();
    if (opt.crosscheck_gap > 1e-5 * (1.0 + opt.w.cwiseAbs().maxCoeff())) {
      std::ostringstream os;
      os << "true optimum: quantile and coordinate-descent solutions differ by " << opt.crosscheck_gap;
      throw SolverError(os.str());
    }
  }
  if (!opt.w.allFinite() || !std::isfinite(opt.value)) throw NumericError("true optimum is not finite");
  return opt;
}

double regret(const DecisionProblem& problem, const TiltedDistribution& tilted, const TrueOptimum& optimum,
              const Vector& w, const QuadratureSpec& spec) {
  const double r = expected_cost(problem, tilted, w, spec) - optimum.value;
  if (r >= 0.0) return r;
  if (r >= -1e-10) return 0.0;
  std::ostringstream os;
  os << "negative regret " << r << " beyond the clipping tolerance";
  throw NumericError(os.str());
}

Cell prepare_cell(const Instance& instance, const Direction& direction, TiltKind tilt, std::size_t n,
                  double alpha, const SamplingGridOptions& grid, int quadrature_nodes) {
  Cell cell;
  cell.direction = direction.label();
  cell.n = n;
  cell.alpha = alpha;
  cell.regime = regime_t(RegimeConfig{alpha, n});
  cell.quadrature.nodes = quadrature_nodes;
  cell.truth = std::make_shared<TiltedDistribution>(direction, cell.regime.t, tilt, cell.quadrature, grid);
  cell.optimum = true_optimum(*instance.problem, *cell.truth, cell.quadrature);
  return cell;
}

std::uint64_t hash_data(const Matrix& data) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  const std::size_t len = static_cast<std::size_t>(data.size()) * sizeof(double);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::array<RegretSample, 3> run_replication(const Instance& instance, const Cell& cell, std::uint64_t seed,
                                            std::size_t rep) {
  std::array<RegretSample, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k].method = kAllMethods[k];
    out[k].n = cell.n;
    out[k].alpha = cell.alpha;
    out[k].rep = rep;
  }
  Matrix data;
  try {
    RandomEngine rng = replication_stream(seed, cell.n, cell.alpha, rep);
    data = cell.truth->sample(cell.n, rng);
  } catch (const Error& e) {
    for (auto& s : out) s.error = std::string("sampling: ") + e.what();
    return out;
  }
  const std::uint64_t hash = hash_data(data);
  for (auto& s : out) {
    s.data_hash = hash;
    try {
      PipelineResult fitted = fit(s.method, *instance.problem, *instance.family, data);
      s.w = std::move(fitted.w);
      s.theta = std::move(fitted.theta);
      s.regret = regret(*instance.problem, *cell.truth, cell.optimum, s.w, cell.quadrature);
    } catch (const Error& e) {
      s.error = e.what();
      s.regret = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

std::array<RegretSample, 3> run_replication(const ExperimentConfig& config, std::size_t n, double alpha,
                                            std::size_t rep) {
  config.validate();
  const Instance inst = build_instance(config);
  const Direction u = build_direction(inst, config.directions.front());
  const Cell cell = prepare_cell(inst, u, config.tilt, n, alpha, config.grid, config.quadrature_nodes);
  return run_replication(inst, cell, config.seed, rep);
}

double quantile7(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  MeanSe r;
  if (x.empty()) {
    r.mean = r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double sum = 0.0;
  for (double v : x) sum += v;
  r.mean = sum / static_cast<double>(x.size());
  if (x.size() < 2) {
    r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  return r;
}

}  // namespace

RegretSummary summarize(const std::vector<RegretSample>& samples, Method method, std::size_t n, double alpha) {
  RegretSummary s;
  s.method = method;
  s.n = n;
  s.alpha = alpha;
  std::vector<double> values;
  for (const auto& r : samples) {
    if (r.method != method) continue;
    if (r.ok()) {
      values.push_back(r.regret);
    } else {
      ++s.errors;
    }
  }
  s.count = values.size();
  const MeanSe ms = mean_se(values);
  s.mean = ms.mean;
  s.se = ms.se;
  s.median = quantile7(values, 0.5);
  s.q25 = quantile7(values, 0.25);
  s.q75 = quantile7(values, 0.75);
  return s;
}

PairedDifference paired_difference(const std::vector<RegretSample>& samples, Method lhs, Method rhs) {
  PairedDifference d;
  d.lhs = lhs;
  d.rhs = rhs;
  // samples of one replication are adjacent but not assumed to be
  std::vector<std::pair<std::size_t, double>> left, right;
  for (const auto& s : samples) {
    if (!s.ok()) continue;
    if (s.method == lhs) left.emplace_back(s.rep, s.regret);
    if (s.method == rhs) right.emplace_back(s.rep, s.regret);
  }
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  std::vector<double> diffs;
  std::size_t i = 0, j = 0;
  while (i < left.size() && j < right.size()) {
    if (left[i].first < right[j].first) {
      ++i;
    } else if (right[j].first < left[i].first) {
      ++j;
    } else {
      diffs.push_back(left[i].second - right[j].second);
      ++i;
      ++j;
    }
  }
  const MeanSe ms = mean_se(diffs);
  d.mean = ms.mean;
  d.se = ms.se;
  d.count = diffs.size();
  return d;
}

DeviationSummary scaled_deviation(const std::vector<RegretSample>& samples, Method method, const Vector& w_star,
                                  double scale) {
  DeviationSummary d;
  d.method = method;
  d.scale = scale;
  const Eigen::Index dw = w_star.size();
  d.mean = Vector::Zero(dw);
  d.se = Vector::Zero(dw);
  std::vector<Vector> devs;
  for (const auto& s : samples) {
    if (s.method == method && s.ok()) devs.push_back(scale * (s.w - w_star));
  }
  d.count = devs.size();
  for (Eigen::Index j = 0; j < dw; ++j) {
    std::vector<double> x;
    x.reserve(devs.size());
    for (const auto& v : devs) x.push_back(v(j));
    const MeanSe ms = mean_se(x);
    d.mean(j) = ms.mean;
    d.se(j) = ms.se;
  }
  return d;
}

const RegretSummary& CellResult::summary(Method m) const {
  for (const auto& s : summaries) {
    if (s.method == m) return s;
  }
  throw DomainError("no summary for method " + to_string(m));
}

void finalize_cell(CellResult& cell) {
  for (std::size_t k = 0; k < 3; ++k) cell.summaries[k] = summarize(cell.samples, kAllMethods[k], cell.n, cell.alpha);
  cell.paired[0] = paired_difference(cell.samples, Method::SAA, Method::IEO);
  cell.paired[1] = paired_difference(cell.samples, Method::IEO, Method::ETO);
  cell.paired[2] = paired_difference(cell.samples, Method::SAA, Method::ETO);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : cell.summaries) {
    if (s.count > 0 && s.mean < best) {
      best = s.mean;
      cell.best = s.method;
    }
  }
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<RegretSample> run_cell_replications(const Instance& instance, const Cell& cell, std::uint64_t seed,
                                                std::size_t reps, int threads) {
  std::vector<std::array<RegretSample, 3>> slots(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t rep = next++; rep < reps; rep = next++) slots[rep] = run_replication(instance, cell, seed, rep);
  };
  const int workers = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(reps)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<RegretSample> out;
  out.reserve(3 * reps);
  for (auto& slot : slots) {
    for (auto& s : slot) out.push_back(std::move(s));
  }
  return out;
}

CellResult simulate_cell(const Instance& instance, const Direction& direction, const ExperimentConfig& config,
                         std::size_t n, double alpha, const ProgressFn& progress) {
  CellResult result;
  result.direction = direction.label();
  result.n = n;
  result.alpha = alpha;
  const RegimeInfo info = regime_t(RegimeConfig{alpha, n});
  result.t = info.t;
  result.regime = info.regime;
  Cell cell;
  try {
    cell = prepare_cell(instance, direction, config.tilt, n, alpha, config.grid, config.quadrature_nodes);
  } catch (const Error& e) {
    result.error = e.what();
    if (progress) progress("cell " + result.direction + " n=" + std::to_string(n) + " failed: " + e.what());
    finalize_cell(result);
    return result;
  }
  result.w_star = cell.optimum.w;
  result.v_star = cell.optimum.value;
  result.crosscheck_gap = cell.optimum.crosscheck_gap;
  result.samples = run_cell_replications(instance, cell, config.seed, config.reps, config.threads);
  finalize_cell(result);
  if (progress) {
    std::ostringstream os;
    os << "cell " << result.direction << " n=" << n << " alpha=" << alpha << " best=" << to_string(result.best);
    progress(os.str());
  }
  return result;
}

SweepResult sweep(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  SweepResult out;
  out.config = config;
  const Instance inst = build_instance(config);
  for (const auto& spec : config.directions) {
    const Direction u = build_direction(inst, spec);
    for (double alpha : config.alphas) {
      for (std::size_t n : config.ns) out.cells.push_back(simulate_cell(inst, u, config, n, alpha, progress));
    }
  }
  return out;
}

}  // namespace misspec
