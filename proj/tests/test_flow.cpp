#include "grshadow/compactify.hpp"
#include "grshadow/flow.hpp"

#include <doctest.h>

#include <random>

using namespace grshadow;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

VectorField as_field(const PolynomialField& f) {
  return [f](const Vector& x) { return f.eval(x); };
}

IntegratorOptions with_tol(double tol) {
  IntegratorOptions o;
  o.tol = tol;
  return o;
}

}  // namespace

TEST_CASE("linear growth reaches e") {
  const VectorField f = as_field(parse_field("dim 1\nx0' = x0"));
  const Trajectory tr = integrate(f, vec({1}), 0, 1, with_tol(1e-10));
  CHECK(std::abs(tr.final_state()[0] - std::exp(1.0)) < 1e-9);
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
  CHECK(tr.at(0.37)[0] == doctest::Approx(std::exp(0.37)).epsilon(1e-9));
}

TEST_CASE("quadratic escape time") {
  const VectorField f = as_field(parse_field("dim 1\nx0' = x0^2"));
  const Trajectory tr = integrate(f, vec({1}), 0, 5, with_tol(1e-10));
  REQUIRE(tr.escape_time.has_value());
  CHECK(std::abs(*tr.escape_time - 1.0) < 1e-4);
  const Trajectory half = integrate(f, vec({2}), 0, 5, with_tol(1e-10));
  REQUIRE(half.escape_time.has_value());
  CHECK(std::abs(*half.escape_time - 0.5) < 1e-4);
}

TEST_CASE("compactified linear flow matches theta of the original solution") {
  const CompactifiedField cf(parse_field("dim 1\nx0' = x0"));
  const Trajectory tr = integrate(cf.as_field(), vec({1 / std::sqrt(2.0)}), 0, 1, with_tol(1e-12));
  // Degree one: no time change, so the oracle is theta(e).
  const double oracle = std::exp(1.0) / std::sqrt(1 + std::exp(2.0));
  CHECK(std::abs(tr.final_state()[0] - oracle) < 1e-6);
  CHECK(tr.final_state()[0] == doctest::Approx(0.938793).epsilon(1e-3));
  for (const Vector& s : tr.states) CHECK(s.norm() <= 1);
}

TEST_CASE("flow map examples") {
  const VectorField f = as_field(parse_field("dim 1\nx0' = x0"));
  CHECK(flow_map(f, 0, vec({3.5}))[0] == 3.5);
  CHECK(std::abs(flow_map(f, -1, vec({std::exp(1.0)}), with_tol(1e-10))[0] - 1) < 1e-9);
  CHECK_THROWS_AS(flow_map(as_field(parse_field("dim 1\nx0' = x0^2")), 2, vec({1})), DomainError);
}

TEST_CASE("group property on random polynomial fields") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> coef(-2, 2);
  std::uniform_real_distribution<double> u(-0.5, 0.5), dt(0.05, 0.6);
  const double tol = 1e-10;
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<Monomial>> comps(2);
    const std::vector<std::vector<int>> expos{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    for (auto& comp : comps) {
      for (const auto& e : expos) {
        const int c = coef(rng);
        if (c != 0) comp.push_back({Rational(c), e});
      }
    }
    const VectorField f = as_field(PolynomialField(2, comps));
    const Vector x = vec({u(rng), u(rng)});
    const double t = dt(rng), s = dt(rng);
    try {
      const Vector direct = flow_map(f, t + s, x, with_tol(tol));
      const Vector composed = flow_map(f, t, flow_map(f, s, x, with_tol(tol)), with_tol(tol));
      CHECK((direct - composed).norm() <= 10 * tol * std::max(1.0, direct.norm()));
      ++checked;
    } catch (const DomainError&) {
    }
  }
  CHECK(checked >= 30);
}

TEST_CASE("halving the tolerance reduces the error") {
  const VectorField f = as_field(parse_field("dim 1\nx0' = x0"));
  double previous = 0;
  for (double tol : {1e-5, 1e-6, 1e-7, 1e-8}) {
    const double err = std::abs(flow_map(f, 5, vec({1}), with_tol(tol))[0] - std::exp(5.0));
    if (previous > 0) CHECK(err * 2 <= previous);
    previous = err;
  }
}

TEST_CASE("stiff failure is reported") {
  IntegratorOptions o = with_tol(1e-12);
  o.min_step = 1e-3;
  CHECK_THROWS_WITH_AS(integrate(as_field(parse_field("dim 1\nx0' = -1000*x0^3")), vec({10}), 0, 1, o),
                       "stiff or singular; undetermined", DomainError);
}

TEST_CASE("dense output outside the span is rejected") {
  const Trajectory tr = integrate(as_field(parse_field("dim 1\nx0' = 1")), vec({0}), 0, 1);
  CHECK_THROWS_AS(tr.at(1.5), DomainError);
  CHECK(tr.at(0.5)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("growth classification") {
  const Trajectory lin = integrate(as_field(parse_field("dim 1\nx0' = x0")), vec({1}), 0, 50);
  CHECK(classify_growth(lin, 50).tag == GrowthTag::grow_up);
  const Trajectory quad = integrate(as_field(parse_field("dim 1\nx0' = x0^2")), vec({1}), 0, 50);
  const GrowthClass blow = classify_growth(quad, 50);
  CHECK(blow.tag == GrowthTag::blow_up);
  REQUIRE(blow.escape_time.has_value());
  CHECK(*blow.escape_time < 50);
  const Trajectory decay = integrate(as_field(parse_field("dim 1\nx0' = -x0")), vec({1}), 0, 50);
  CHECK(classify_growth(decay, 50).tag == GrowthTag::bounded);
  const Trajectory shortrun = integrate(as_field(parse_field("dim 1\nx0' = x0")), vec({1}), 0, 5);
  CHECK(classify_growth(shortrun, 50).tag == GrowthTag::undetermined);
}

TEST_CASE("variational flow matches finite differences") {
  const PolynomialField p = parse_field("dim 2\nx0' = x1\nx1' = -x0 - 1/10*x0^3");
  const VectorField f = as_field(p);
  const JacobianFn jac = [p](const Vector& x) { return p.jacobian(x); };
  const Vector x = vec({0.4, -0.2});
  const FlowWithJacobian fj = flow_map_with_jacobian(f, jac, 1.3, x, with_tol(1e-12));
  CHECK((fj.state - flow_map(f, 1.3, x, with_tol(1e-12))).norm() < 1e-10);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Vector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    const Vector col = (flow_map(f, 1.3, a, with_tol(1e-12)) - flow_map(f, 1.3, b, with_tol(1e-12))) / (2 * h);
    CHECK((fj.jacobian.col(k) - col).norm() < 1e-6);
  }
}
