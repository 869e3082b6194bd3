#pragma once

#include "misspec/asymptotics.hpp"
#include "misspec/estimators.hpp"
#include "misspec/perturbation.hpp"
#include "misspec/problems.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace misspec {

struct ExperimentConfig {
  std::string name = "default";
  // newsvendor with identical costs on every component
  int data_dim = 2;
  double holding = 5.0;
  double backlog = 1.0;
  double theta0 = 3.0;
  std::vector<DirectionSpec> directions;
  TiltKind tilt = TiltKind::Exponential;
  std::vector<double> alphas;
  std::vector<std::size_t> ns;
  std::size_t reps = 500;
  std::uint64_t seed = 20240607;
  SamplingGridOptions grid;
  int quadrature_nodes = 64;
  std::string output_dir = "out";
  /// 0 = hardware concurrency.
  int threads = 0;

  void validate() const;
};

/// d_z = 2, a = 5, d = 1, theta0 = 3, both product directions, exponential tilt,
/// alpha in {2, 0.5, 0.1}, n in {200, 1000}, 500 replications.
ExperimentConfig default_config();
/// d_z = 1, theta0 = 0, u(z) = z with the ReLU tilt, alpha = 0.3, n = 10^4.
ExperimentConfig example1_config();
ExperimentConfig preset_config(const std::string& name);

/// Problem, family and base point built from a configuration.
struct Instance {
  std::shared_ptr<const NewsvendorProblem> problem;
  FamilyPtr family;
  Vector theta0;
};

Instance build_instance(const ExperimentConfig& config);
/// Every direction is centered at theta0.
Direction build_direction(const Instance& instance, const DirectionSpec& spec);

struct TrueOptimum {
  Vector w;
  double value = 0.0;
  /// max |w_quantile - w_coordinate_descent| (0 when not cross-checked).
  double crosscheck_gap = 0.0;
};

/// argmin_w E_{Q_t}[c(w, z)] and the attained value. The quantile solution
/// is cross-checked by coordinate descent when `crosscheck` is set.
TrueOptimum true_optimum(const DecisionProblem& problem, const TiltedDistribution& tilted,
                         const QuadratureSpec& spec = {}, bool crosscheck = true);

/// E_{Q_t}[c(w, z)] - v*; values in [-1e-10, 0) are clipped to 0.
double regret(const DecisionProblem& problem, const TiltedDistribution& tilted, const TrueOptimum& optimum,
              const Vector& w, const QuadratureSpec& spec = {});

struct RegretSample {
  Method method = Method::SAA;
  std::size_t n = 0;
  double alpha = 0.0;
  std::size_t rep = 0;
  Vector w;
  double regret = 0.0;
  std::optional<Vector> theta;
  std::uint64_t data_hash = 0;
  /// Non-empty when the pipeline or the regret evaluation failed.
  std::string error;

  bool ok() const { return error.empty(); }
};

/// One (direction, n, alpha) cell with its ground truth ready for replications.
struct Cell {
  std::string direction;
  std::size_t n = 0;
  double alpha = 0.0;
  RegimeInfo regime;
  std::shared_ptr<const TiltedDistribution> truth;
  TrueOptimum optimum;
  QuadratureSpec quadrature;
};

Cell prepare_cell(const Instance& instance, const Direction& direction, TiltKind tilt, std::size_t n,
                  double alpha, const SamplingGridOptions& grid = {}, int quadrature_nodes = 64);

/// FNV-1a over the bytes of the data matrix.
std::uint64_t hash_data(const Matrix& data);

/// Draws one data set from the cell's truth with the replication's own stream and
/// fits SAA, IEO and ETO on it. Failures are recorded per sample.
std::array<RegretSample, 3> run_replication(const Instance& instance, const Cell& cell, std::uint64_t seed,
                                            std::size_t rep);

/// Same, building the cell from the first direction of `config`.
std::array<RegretSample, 3> run_replication(const ExperimentConfig& config, std::size_t n, double alpha,
                                            std::size_t rep);

struct RegretSummary {
  Method method = Method::SAA;
  std::size_t n = 0;
  double alpha = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double se = 0.0;
  std::size_t count = 0;
  std::size_t errors = 0;
};

/// Summary of the successful samples of `method` (quantiles are type 7).
RegretSummary summarize(const std::vector<RegretSample>& samples, Method method, std::size_t n, double alpha);

/// Type-7 quantile of an unsorted sample.
double quantile7(std::vector<double> values, double p);

/// Mean and standard error of regret(lhs) - regret(rhs) over replications where both succeeded.
struct PairedDifference {
  Method lhs = Method::SAA;
  Method rhs = Method::SAA;
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

PairedDifference paired_difference(const std::vector<RegretSample>& samples, Method lhs, Method rhs);

/// Mean and standard error of scale * (w_hat - w*) per component.
struct DeviationSummary {
  Method method = Method::SAA;
  double scale = 1.0;
  Vector mean;
  Vector se;
  std::size_t count = 0;
};

DeviationSummary scaled_deviation(const std::vector<RegretSample>& samples, Method method, const Vector& w_star,
                                  double scale);

struct CellResult {
  std::string direction;
  std::size_t n = 0;
  double alpha = 0.0;
  double t = 0.0;
  Regime regime = Regime::Balanced;
  Vector w_star;
  double v_star = 0.0;
  double crosscheck_gap = 0.0;
  /// Ordered by replication, then SAA, IEO, ETO.
  std::vector<RegretSample> samples;
  std::array<RegretSummary, 3> summaries;   // SAA, IEO, ETO
  std::array<PairedDifference, 3> paired;   // SAA-IEO, IEO-ETO, SAA-ETO
  /// Method with the lowest mean regret.
  Method best = Method::SAA;
  /// Set when the cell could not be prepared (e.g. the tilt is not normalizable).
  std::string error;

  const RegretSummary& summary(Method m) const;
};

using ProgressFn = std::function<void(const std::string& message)>;

CellResult simulate_cell(const Instance& instance, const Direction& direction, const ExperimentConfig& config,
                         std::size_t n, double alpha, const ProgressFn& progress = {});

/// Replications 0..reps-1 of a prepared cell on `threads` workers; results are
/// ordered by replication index regardless of scheduling.
std::vector<RegretSample> run_cell_replications(const Instance& instance, const Cell& cell, std::uint64_t seed,
                                                std::size_t reps, int threads);

/// Fills summaries, paired differences and the best method from `samples`.
void finalize_cell(CellResult& cell);

struct SweepResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;
};

/// Full factorial over directions x alphas x ns.
SweepResult sweep(const ExperimentConfig& config, const ProgressFn& progress = {});

int resolve_threads(int requested);

}  // namespace misspec
