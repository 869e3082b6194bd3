#include <doctest.h>

#include "misspec/quadrature.hpp"
#include "misspec/random.hpp"
#include "oracles.hpp"

using namespace misspec;

TEST_CASE("hermite rule integrates gaussian moments") {
  for (int n : {4, 16, 64, 128}) {
    const Rule1D& r = hermite_rule(n);
    double m0 = 0, m2 = 0, m4 = 0, m1 = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double x = r.nodes[i];
      m0 += r.weights[i];
      m1 += r.weights[i] * x;
      m2 += r.weights[i] * x * x;
      m4 += r.weights[i] * x * x * x * x;
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(m1) < 1e-12);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("legendre rule is exact for polynomials of degree 2n-1") {
  const Rule1D& r = legendre_rule(5);
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 8);
  CHECK(s == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("axis rule with a breakpoint integrates an indicator") {
  const std::vector<double> cut{0.7};
  const Rule1D r = gaussian_axis_rule(2.0, 1.0, 64, &cut, 12.0);
  double below = 0, mean = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.nodes[i] <= 0.7) below += r.weights[i];
    mean += r.weights[i] * r.nodes[i];
  }
  CHECK(below == doctest::Approx(oracle::norm_cdf(0.7 - 2.0)).epsilon(1e-12));
  CHECK(mean == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tensor product visits every combination once") {
  std::vector<Rule1D> axes{legendre_rule(3), legendre_rule(4)};
  int count = 0;
  double mass = 0;
  tensor_for_each(axes, [&](const Vector& z, double w) {
    CHECK(z.size() == 2);
    ++count;
    mass += w;
  });
  CHECK(count == 12);
  CHECK(mass == doctest::Approx(4.0));
}

TEST_CASE("gaussian product with kinks: E|z1 - 1| E[z2] ") {
  QuadratureSpec spec;
  spec.breakpoints = {{1.0}, {}};
  double s = 0;
  gaussian_product_for_each(Vector::Zero(2), Vector::Ones(2), spec,
                            [&](const Vector& z, double w) { s += w * std::abs(z(0) - 1.0) * (z(1) + 2.0); });
  const double e_abs = oracle::gauss_expect([](double x) { return std::abs(x - 1.0); }, 0.0, {1.0});
  CHECK(s == doctest::Approx(2.0 * e_abs).epsilon(1e-12));
}

TEST_CASE("refine_until_stable converges or throws") {
  const double v = refine_until_stable([](int n) { return 1.0 + 1.0 / (n * n * n); }, 8, 1e-6, 1024);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(refine_until_stable([](int n) { return static_cast<double>(n); }, 8, 1e-6, 64), NumericError);
}

TEST_CASE("replication streams are deterministic and distinct") {
  RandomEngine a = replication_stream(7, 1000, 0.5, 3);
  RandomEngine b = replication_stream(7, 1000, 0.5, 3);
  RandomEngine c = replication_stream(7, 1000, 0.5, 4);
  RandomEngine d = replication_stream(7, 1000, 0.3, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
