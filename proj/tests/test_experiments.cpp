#include <doctest.h>

#include "misspec/experiments_io.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace misspec;

namespace {
const double kX0 = oracle::norm_quantile(1.0 / 6.0);

ExperimentConfig one_dim() {
  ExperimentConfig c = default_config();
  c.data_dim = 1;
  c.directions = {DirectionSpec{"identity", {}, 1.0}};
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("misspec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("true optimum") {
  const Instance inst = build_instance(one_dim());
  const Direction u = build_direction(inst, one_dim().directions.front());
  const TiltedDistribution q0(u, 0.0, TiltKind::Exponential);
  const TrueOptimum o0 = true_optimum(*inst.problem, q0);
  CHECK(o0.w(0) == doctest::Approx(3.0 + kX0).epsilon(1e-9));
  const TiltedDistribution q(u, 0.2, TiltKind::Exponential);
  const TrueOptimum o = true_optimum(*inst.problem, q);
  CHECK(o.w(0) == doctest::Approx(3.2 + kX0).epsilon(1e-8));
  CHECK(o.crosscheck_gap < 1e-5);
  const Vector up = o.w.array() + 1e-2, down = o.w.array() - 1e-2;
  CHECK(expected_cost(*inst.problem, q, up) > o.value);
  CHECK(expected_cost(*inst.problem, q, down) > o.value);
}

TEST_CASE("regret") {
  const Instance inst = build_instance(one_dim());
  const Direction u = build_direction(inst, one_dim().directions.front());
  const TiltedDistribution q0(u, 0.0, TiltKind::Exponential);
  const TrueOptimum o = true_optimum(*inst.problem, q0);
  CHECK(regret(*inst.problem, q0, o, o.w) == 0.0);
  const double v = 6 * oracle::norm_pdf(kX0);
  const Vector w = o.w.array() + 0.1;
  CHECK(regret(*inst.problem, q0, o, w) == doctest::Approx(0.5 * v * 0.01).epsilon(0.05));
  // exact value from an independent quadrature
  auto cost = [&](double x) {
    return oracle::gauss_expect([&](double z) { return 5 * std::max(x - z, 0.0) + std::max(z - x, 0.0); }, 3.0, {x});
  };
  CHECK(regret(*inst.problem, q0, o, w) == doctest::Approx(cost(w(0)) - cost(o.w(0))).epsilon(1e-8));
}

TEST_CASE("replications are deterministic and share one data set") {
  ExperimentConfig c = default_config();
  c.directions = {DirectionSpec{"prod_centered_sq", {}, 1.0}};
  const auto a = run_replication(c, 200, 2.0, 7);
  const auto b = run_replication(c, 200, 2.0, 7);
  const auto other = run_replication(c, 200, 2.0, 8);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(a[k].ok());
    CHECK(a[k].w == b[k].w);
    CHECK(a[k].regret == b[k].regret);
    CHECK(a[k].data_hash == a[0].data_hash);
    CHECK(a[k].regret >= 0.0);
  }
  CHECK(a[0].data_hash != other[0].data_hash);
  CHECK(a[0].method == Method::SAA);
  CHECK(a[1].method == Method::IEO);
  CHECK(a[2].method == Method::ETO);
}

TEST_CASE("well-specified regrets stay below the asymptotic ceiling") {
  ExperimentConfig c = default_config();
  c.directions = {DirectionSpec{"prod_centered_sq", {}, 1.0}};
  const double n = 1e4;
  const double v = 6 * oracle::norm_pdf(kX0);
  // 10 (d_w / n) tr(V Var(IF^SAA)) / 2 with tr(V Var) = 10 / v
  const double ceiling = 10 * (2 / n) * (10 / v) / 2;
  for (std::size_t rep = 0; rep < 3; ++rep) {
    for (const auto& s : run_replication(c, 10000, 40.0, rep)) {
      REQUIRE(s.ok());
      CHECK(s.regret < ceiling);
    }
  }
}

TEST_CASE("thread count does not change results") {
  ExperimentConfig c = default_config();
  c.directions = {DirectionSpec{"hermite2", {}, 1.0}};
  c.reps = 6;
  const Instance inst = build_instance(c);
  const Direction u = build_direction(inst, c.directions.front());
  const Cell cell = prepare_cell(inst, u, c.tilt, 100, 0.5);
  const auto one = run_cell_replications(inst, cell, c.seed, c.reps, 1);
  const auto three = run_cell_replications(inst, cell, c.seed, c.reps, 3);
  REQUIRE(one.size() == 18);
  REQUIRE(three.size() == 18);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].rep == i / 3);
    CHECK(one[i].w == three[i].w);
  }
}

TEST_CASE("summaries") {
  CHECK(quantile7({3, 1, 2, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile7({3, 1, 2, 4}, 0.25) == doctest::Approx(1.75));
  std::vector<RegretSample> s;
  for (std::size_t rep = 0; rep < 4; ++rep) {
    for (Method m : kAllMethods) {
      RegretSample r;
      r.method = m;
      r.rep = rep;
      r.regret = static_cast<double>(rep) + (m == Method::ETO ? 1.0 : 0.0);
      r.w = Vector::Constant(1, r.regret);
      s.push_back(r);
    }
  }
  s.back().error = "failed";
  const RegretSummary eto = summarize(s, Method::ETO, 10, 0.5);
  CHECK(eto.count == 3);
  CHECK(eto.errors == 1);
  CHECK(eto.mean == doctest::Approx(2.0));
  CHECK(eto.se == doctest::Approx(1.0 / std::sqrt(3.0)));
  const PairedDifference d = paired_difference(s, Method::ETO, Method::SAA);
  CHECK(d.count == 3);
  CHECK(d.mean == doctest::Approx(1.0));
  CHECK(d.se == doctest::Approx(0.0));
  const DeviationSummary dev = scaled_deviation(s, Method::SAA, Vector::Constant(1, 1.0), 2.0);
  CHECK(dev.mean(0) == doctest::Approx(1.0));
}

TEST_CASE("samples csv") {
  const auto dir = scratch("csv");
  const std::string empty = (dir / "empty.csv").string();
  write_samples_csv(empty, {}, 2);
  std::ifstream in(empty);
  std::string header, rest;
  std::getline(in, header);
  CHECK(header == "method,n,alpha,rep,regret,w_1,w_2");
  CHECK_FALSE(std::getline(in, rest));
  CHECK(read_samples_csv(empty).empty());

  ExperimentConfig c = default_config();
  c.directions = {DirectionSpec{"prod_centered_sq", {}, 1.0}};
  c.reps = 5;
  const Instance inst = build_instance(c);
  const CellResult cell = simulate_cell(inst, build_direction(inst, c.directions.front()), c, 200, 2.0);
  REQUIRE(cell.error.empty());
  const std::string path = (dir / "samples.csv").string();
  write_samples_csv(path, cell.samples, 2);
  const auto back = read_samples_csv(path);
  REQUIRE(back.size() == cell.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].method == cell.samples[i].method);
    CHECK(back[i].regret == cell.samples[i].regret);
    CHECK(back[i].w == cell.samples[i].w);
  }
  for (Method m : kAllMethods) {
    const RegretSummary a = summarize(back, m, 200, 2.0), b = cell.summary(m);
    CHECK(std::abs(a.mean - b.mean) <= 1e-12 * std::abs(b.mean));
    CHECK(std::abs(a.median - b.median) <= 1e-12 * std::abs(b.median));
    CHECK(std::abs(a.se - b.se) <= 1e-12 * std::abs(b.se));
  }
}

TEST_CASE("emitted files and json schema") {
  ExperimentConfig c = default_config();
  c.directions = {DirectionSpec{"prod_centered_sq", {}, 1.0}};
  c.alphas = {2.0};
  c.ns = {100};
  c.reps = 3;
  const SweepResult r = sweep(c);
  const auto dir = scratch("emit");
  const auto files = emit(r, dir.string());
  CHECK(files.size() == 3);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));
  std::ifstream in(dir / "summary.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("common_random_numbers") == true);
  const auto& cell = j.at("cells").at(0);
  for (const char* key : {"direction", "n", "alpha", "t", "regime", "w_star", "v_star", "summaries",
                          "paired_differences", "lowest_mean_regret"}) {
    CHECK(cell.contains(key));
  }
  CHECK(cell.at("regime") == "mild");
  CHECK(cell.at("summaries").size() == 3);
  CHECK(config_from_json(j.at("config")).reps == 3);
}

TEST_CASE("configuration parsing") {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "preset": "example1", "reps": 7, "alphas": [0.25],
    "directions": ["identity", {"kind": "identity", "scale": 2.0}],
    "grid": {"cells_per_axis": 256}
  })");
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.data_dim == 1);
  CHECK(c.theta0 == 0.0);
  CHECK(c.tilt == TiltKind::ReluLinear);
  CHECK(c.reps == 7);
  CHECK(c.directions.size() == 2);
  CHECK(c.directions[1].scale == 2.0);
  CHECK(c.grid.cells_per_axis == 256);
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(back.alphas == c.alphas);
  CHECK(back.seed == c.seed);

  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"repz": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"reps": "many"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"preset": "fig9"})")), ConfigError);
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"alphas": [-1]})")));
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"tilt": "cubic"})")));
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
  CHECK(preset_config("default").directions.size() == 2);
}

TEST_CASE("prepared cells carry the regime") {
  const ExperimentConfig c = default_config();
  const Instance inst = build_instance(c);
  const Direction u = build_direction(inst, c.directions.back());
  const Cell cell = prepare_cell(inst, u, c.tilt, 1000, 2.0);
  CHECK(cell.regime.regime == Regime::Mild);
  CHECK(cell.regime.t == doctest::Approx(1e-6));
  // the exponential tilt of a quartic direction is not normalizable at t > 0 in practice
  CHECK_THROWS_AS(prepare_cell(inst, u, c.tilt, 1000, 0.1), DivergenceError);
}
