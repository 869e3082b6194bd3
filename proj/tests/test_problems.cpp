#include <doctest.h>

#include "misspec/perturbation.hpp"
#include "misspec/problems.hpp"
#include "oracles.hpp"

using namespace misspec;

namespace {
Vector v1(double x) { return Vector::Constant(1, x); }
NewsvendorProblem newsvendor(int d, double a, double b) {
  return NewsvendorProblem(Vector::Constant(d, a), Vector::Constant(d, b));
}
const double kX0 = oracle::norm_quantile(1.0 / 6.0);
}  // namespace

TEST_CASE("newsvendor cost and gradient") {
  const NewsvendorProblem p = newsvendor(1, 5, 1);
  CHECK(p.cost(v1(3), v1(3)) == 0.0);
  CHECK(p.cost(v1(4), v1(3)) == 5.0);
  CHECK(p.cost(v1(3), v1(5)) == 2.0);
  CHECK(p.grad_cost(v1(4), v1(3))(0) == 5.0);
  CHECK(p.grad_cost(v1(3), v1(5))(0) == -1.0);
  CHECK(p.grad_cost(v1(3), v1(3))(0) == 5.0);
  CHECK(p.critical_ratios()(0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("oracle solutions") {
  auto fam1 = std::make_shared<GaussianScaledMeanFamily>(1);
  auto fam2 = std::make_shared<GaussianScaledMeanFamily>(2);
  const NewsvendorProblem p = newsvendor(1, 5, 1);
  const double w = p.oracle_solution(*fam1, scalar_param(3))(0);
  CHECK(w == doctest::Approx(3.0 + kX0).epsilon(1e-10));
  CHECK(w == doctest::Approx(2.03258).epsilon(1e-5));
  // grid minimization of the expected cost as an independent oracle
  auto cost = [&](double x) {
    return oracle::gauss_expect([&](double z) { return 5 * std::max(x - z, 0.0) + std::max(z - x, 0.0); }, 3.0, {x});
  };
  double best = 0, fbest = 1e300;
  for (double x = 1.9; x <= 2.2; x += 1e-4) {
    if (cost(x) < fbest) {
      fbest = cost(x);
      best = x;
    }
  }
  CHECK(std::abs(best - w) < 2e-4);
  CHECK(newsvendor(1, 1, 1).oracle_solution(*fam1, scalar_param(0))(0) == doctest::Approx(0.0).epsilon(1e-12));
  const Vector w2 = newsvendor(2, 5, 1).oracle_solution(*fam2, scalar_param(1));
  CHECK(w2(0) == doctest::Approx(1 + kX0).epsilon(1e-10));
  CHECK(w2(1) == doctest::Approx(2 + kX0).epsilon(1e-10));
  // the generic coordinate-descent path agrees
  const FamilyPoint pt(fam2, scalar_param(1));
  const Vector cd = coordinate_descent_minimizer(newsvendor(2, 5, 1), pt, Vector::Zero(2));
  CHECK((cd - w2).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("expected cost") {
  auto fam = std::make_shared<GaussianScaledMeanFamily>(1);
  const NewsvendorProblem p = newsvendor(1, 5, 1);
  const FamilyPoint pt(fam, scalar_param(3));
  const Vector w = p.oracle_solution(*fam, scalar_param(3));
  const double v = expected_cost(p, pt, w);
  // newsvendor optimum value (a + d) phi(x0)
  CHECK(v == doctest::Approx(6 * oracle::norm_pdf(kX0)).epsilon(1e-10));
  CHECK(expected_cost(p, pt, w + v1(0.1)) > v);
  CHECK(expected_cost(p, pt, w - v1(0.1)) > v);
  const FamilyPoint std_normal(fam, scalar_param(0));
  CHECK(expected_cost(newsvendor(1, 1, 1), std_normal, v1(0)) == doctest::Approx(std::sqrt(2 / M_PI)).epsilon(1e-12));
  const Direction u = make_direction({"identity", {}, 1.0}, fam, scalar_param(3));
  const TiltedDistribution q0(u, 0.0, TiltKind::Exponential);
  CHECK(expected_cost(p, q0, v1(2.5)) == doctest::Approx(expected_cost(p, pt, v1(2.5))).epsilon(1e-13));
}

TEST_CASE("empirical minimizer") {
  const NewsvendorProblem p = newsvendor(1, 5, 1);
  Matrix data(6, 1);
  data << 4, 2, 6, 1, 5, 3;
  CHECK(p.empirical_minimizer(data)(0) == 1.0);
  RandomEngine rng(8);
  std::normal_distribution<double> nd(3.0, 1.0);
  for (int n : {1, 2, 5, 6, 7, 12, 60, 61}) {
    Matrix x(n, 1);
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(x(i, 0) = nd(rng));
    CHECK(p.empirical_minimizer(x)(0) == oracle::brute_force_newsvendor(xs, 5, 1));
    CHECK(newsvendor(1, 2, 3).empirical_minimizer(x)(0) == oracle::brute_force_newsvendor(xs, 2, 3));
  }
}

TEST_CASE("sensitivity matrices for the one-dimensional instance") {
  auto fam = std::make_shared<GaussianScaledMeanFamily>(1);
  const NewsvendorProblem p = newsvendor(1, 5, 1);
  const SensitivityMatrices m = sensitivity_matrices(p, fam, scalar_param(3));
  const double v = 6 * oracle::norm_pdf(kX0);
  CHECK(v == doctest::Approx(1.49914).epsilon(1e-4));
  CHECK(m.V(0, 0) == doctest::Approx(v).epsilon(1e-10));
  CHECK(m.Sigma(0, 0) == doctest::Approx(-v).epsilon(1e-8));
  CHECK(m.Phi(0, 0) == doctest::Approx(v).epsilon(1e-8));
  CHECK(m.I(0, 0) == doctest::Approx(1.0));
  CHECK(m.oracle_gradient(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(m.oracle_gradient_fd(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  const FamilyPoint pt(fam, scalar_param(3));
  CHECK(finite_difference_hessian(p, pt, m.w0)(0, 0) == doctest::Approx(v).epsilon(1e-4));
}

TEST_CASE("sensitivity matrices for the two-dimensional instance") {
  auto fam = std::make_shared<GaussianScaledMeanFamily>(2);
  const NewsvendorProblem p = newsvendor(2, 5, 1);
  const SensitivityMatrices m = sensitivity_matrices(p, fam, scalar_param(3));
  const double v = 6 * oracle::norm_pdf(kX0);
  CHECK(m.Sigma.rows() == 2);
  CHECK(m.Sigma.cols() == 1);
  CHECK(m.Sigma(0, 0) == doctest::Approx(-v).epsilon(1e-8));
  CHECK(m.Sigma(1, 0) == doctest::Approx(-2 * v).epsilon(1e-8));
  CHECK(m.Phi(0, 0) == doctest::Approx(5 * v).epsilon(1e-8));
  CHECK(m.I(0, 0) == 5.0);
  CHECK(m.w0(1) == doctest::Approx(6 + kX0).epsilon(1e-10));
  // Sigma against an independent quadrature of E[grad_w c * s]
  for (int j = 0; j < 2; ++j) {
    const double mu = 3.0 * (j + 1), w = mu + kX0;
    const double sig = oracle::gauss_expect(
        [&](double z) { return (z <= w ? 5.0 : -1.0) * (j + 1) * (z - mu); }, mu, {w});
    CHECK(m.Sigma(j, 0) == doctest::Approx(sig).epsilon(1e-8));
  }
}
