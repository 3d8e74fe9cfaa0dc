#include "grshadow/polyfield.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace grshadow;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

// Central differences of the field, the oracle for symbolic derivatives.
Matrix central_differences(const PolynomialField& f, const Vector& x, double h) {
  const int n = f.dimension();
  Matrix j(n, n);
  for (int k = 0; k < n; ++k) {
    Vector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    j.col(k) = (f.eval(a) - f.eval(b)) / (2 * h);
  }
  return j;
}

PolynomialField random_field(std::mt19937_64& rng, int n, int degree) {
  std::uniform_int_distribution<int> coef(-5, 5), expo(0, degree);
  std::vector<std::vector<Monomial>> comps(static_cast<std::size_t>(n));
  for (auto& comp : comps) {
    for (int t = 0; t < 4; ++t) {
      std::vector<int> e(static_cast<std::size_t>(n), 0);
      int left = degree;
      for (auto& ei : e) {
        ei = std::min(left, expo(rng));
        left -= ei;
      }
      const int c = coef(rng);
      if (c != 0) comp.push_back({Rational(c, 1 + (t % 3)), e});
    }
  }
  return PolynomialField(n, comps);
}

}  // namespace

TEST_CASE("parse the identity field") {
  const PolynomialField f = parse_field("dim 1\nx0' = x0");
  CHECK(f.dimension() == 1);
  CHECK(f.degree() == 1);
  REQUIRE(f.components()[0].size() == 1);
  CHECK(f.components()[0][0].coefficient == Rational(1));
  CHECK(f.components()[0][0].exponents == std::vector<int>{1});
}

TEST_CASE("parse a rational planar field") {
  const PolynomialField f = parse_field("dim 2\nx0' = x0^2 - x1\nx1' = 3/2*x0*x1");
  CHECK(f.degree() == 2);
  CHECK(f.components()[0].size() == 2);
  REQUIRE(f.components()[1].size() == 1);
  CHECK(f.components()[1][0].coefficient == Rational(3, 2));
}

TEST_CASE("transcendental and division are rejected") {
  CHECK_THROWS_WITH_AS(parse_field("dim 1\nx0' = sin(x0)"), doctest::Contains("not normalizable"), ParseError);
  CHECK_THROWS_WITH_AS(parse_field("dim 1\nx0' = 1/x0"), doctest::Contains("not normalizable"), ParseError);
  CHECK_THROWS_WITH_AS(parse_field("dim 1\nx0' = x0^(1/2)"), doctest::Contains("not normalizable"), ParseError);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_field("dim 2\nx0' = x1\nx1' = x0 + * 2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
  }
  CHECK_THROWS_WITH_AS(parse_field("dim 1\nx0' = x3"), doctest::Contains("dimension mismatch"), ParseError);
  CHECK_THROWS_AS(parse_field("dim 2\nx0' = x1"), ParseError);
  CHECK_THROWS_AS(parse_field("x0' = x0"), ParseError);
}

TEST_CASE("comments, whitespace, parentheses and line order") {
  const PolynomialField a = parse_field("# c\ndim 2\n  x1' = (x0 + x1)^2   # tail\nx0'=x0");
  const PolynomialField b = parse_field("dim 2\nx0' = x0\nx1' = x0^2 + 2*x0*x1 + x1^2");
  CHECK(a == b);
}

TEST_CASE("evaluation examples") {
  CHECK(parse_field("dim 1\nx0' = x0").eval(vec({2}))[0] == doctest::Approx(2));
  const Vector v = parse_field("dim 2\nx0' = x0^2 - x1\nx1' = x0*x1").eval(vec({1, 1}));
  CHECK(v[0] == doctest::Approx(0));
  CHECK(v[1] == doctest::Approx(1));
  CHECK(parse_field("dim 1\nx0' = x0^2").eval(vec({10}))[0] == doctest::Approx(100));
  CHECK_THROWS_AS(parse_field("dim 1\nx0' = x0").eval(vec({1, 2})), DomainError);
}

TEST_CASE("jacobian examples") {
  CHECK(parse_field("dim 1\nx0' = x0").jacobian(vec({7}))(0, 0) == doctest::Approx(1));
  CHECK(parse_field("dim 1\nx0' = x0^2").jacobian(vec({3}))(0, 0) == doctest::Approx(6));
  const PolynomialField f = parse_field("dim 2\nx0' = x0^2 - x1\nx1' = x0*x1");
  const Matrix j = f.jacobian(vec({1, 2}));
  const Matrix oracle = central_differences(f, vec({1, 2}), 1e-6);
  CHECK((j - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(j(0, 0) == doctest::Approx(2));
  CHECK(j(0, 1) == doctest::Approx(-1));
  CHECK(j(1, 0) == doctest::Approx(2));
  CHECK(j(1, 1) == doctest::Approx(1));
}

TEST_CASE("top degree part") {
  CHECK(parse_field("dim 1\nx0' = x0").top_degree_part() == parse_field("dim 1\nx0' = x0"));
  CHECK(parse_field("dim 2\nx0' = x0^2 - x1\nx1' = x0*x1").top_degree_part() ==
        parse_field("dim 2\nx0' = x0^2\nx1' = x0*x1"));
  const PolynomialField c = parse_field("dim 1\nx0' = 5").top_degree_part();
  CHECK(c.degree() == 0);
  CHECK(c.eval(vec({3}))[0] == doctest::Approx(5));
  CHECK_THROWS_AS(parse_field("dim 1\nx0' = 0").top_degree_part(), DomainError);
}

TEST_CASE("random jacobians match central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    const PolynomialField f = random_field(rng, n, 1 + trial % 4);
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    const Matrix j = f.jacobian(x);
    const Matrix oracle = central_differences(f, x, 1e-5 * std::max(1.0, x.norm()));
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    CHECK((j - oracle).cwiseAbs().maxCoeff() / scale < 1e-6);
  }
}

TEST_CASE("top degree part is homogeneous") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 3;
    const PolynomialField f = random_field(rng, n, 1 + trial % 4);
    if (f.is_zero()) continue;
    const PolynomialField top = f.top_degree_part();
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    const double s = 1.7;
    const Vector lhs = top.eval(s * x);
    const Vector rhs = std::pow(s, top.degree()) * top.eval(x);
    CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("corpus round trip is idempotent") {
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(GRSHADOW_DATA_DIR "/fields")) {
    if (entry.path().extension() != ".ode") continue;
    ++files;
    const PolynomialField f = load_field(entry.path().string());
    const std::string printed = f.to_string();
    const PolynomialField g = parse_field(printed);
    CHECK(g == f);
    CHECK(g.to_string() == printed);
  }
  CHECK(files == 20);
}
