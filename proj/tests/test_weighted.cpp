#include "grshadow/weighted.hpp"

#include <doctest.h>

#include <cmath>

using namespace grshadow;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

ErrorLaw weighted_law(double d, double C, LawKind kind = LawKind::weighted) {
  ErrorLaw l;
  l.kind = kind;
  l.magnitude = d;
  l.C = C;
  return l;
}

// Orbit of x/2 with defects d (1 - q0) q0^k / C^k, q0 = 1/2.
PseudoTrajectory halving_orbit(double d, double C, int length, double x0 = 1) {
  PseudoTrajectory pt;
  pt.law = weighted_law(d, C);
  double x = x0;
  for (int k = 0; k <= length; ++k) {
    pt.times.push_back(k);
    pt.states.push_back(vec({x}));
    x = 0.5 * x + d * 0.5 * std::pow(0.5, k) / std::pow(C, k);
  }
  return pt;
}

double objective(const PseudoTrajectory& pt, double C, double q) {
  double sum = 0, y = q;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    sum += std::pow(C, static_cast<double>(k)) * std::abs(pt.states[k][0] - y);
    y *= 0.5;
  }
  return sum;
}

double golden_section(const PseudoTrajectory& pt, double C, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = objective(pt, C, a), fb = objective(pt, C, b);
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = objective(pt, C, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = objective(pt, C, b);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("contracting line matches the golden-section minimizer") {
  const Dynamics f = linear_map_dynamics(Matrix::Identity(1, 1) * 0.5);
  const double C = 4;
  for (const double d : {1e-3, 1e-4}) {
    CAPTURE(d);
    const PseudoTrajectory pt = halving_orbit(d, C, 12);
    const ShadowResult r = weighted_shadow_solve(f, pt, C);
    REQUIRE_MESSAGE(r.valid, r.status);
    const double oracle = golden_section(pt, C, 0, 2);
    CHECK(std::abs(r.q[0] - oracle) <= 1e-8);
    CHECK(std::isfinite(r.L));
    CHECK(r.L * d >= objective(pt, C, r.q[0]) * (1 - 1e-9));
  }
}

TEST_CASE("realized constant is stable as the defects shrink") {
  const Dynamics f = linear_map_dynamics(Matrix::Identity(1, 1) * 0.5);
  const ShadowResult a = weighted_shadow_solve(f, halving_orbit(1e-3, 4, 12), 4);
  const ShadowResult b = weighted_shadow_solve(f, halving_orbit(1e-4, 4, 12), 4);
  REQUIRE(a.valid);
  REQUIRE(b.valid);
  CHECK(a.L / b.L <= 2);
  CHECK(b.L / a.L <= 2);
}

TEST_CASE("shadow point moves linearly with the defect size") {
  const Dynamics f = linear_map_dynamics(Matrix::Identity(1, 1) * 0.5);
  const ShadowResult exact = weighted_shadow_solve(f, halving_orbit(0, 4, 12), 4);
  REQUIRE(exact.valid);
  CHECK(exact.q[0] == doctest::Approx(1).epsilon(1e-14));
  std::vector<double> slopes;
  for (const double d : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const ShadowResult r = weighted_shadow_solve(f, halving_orbit(d, 4, 12), 4);
    REQUIRE(r.valid);
    slopes.push_back(std::abs(r.q[0] - 1) / d);
  }
  for (double s : slopes) CHECK(s == doctest::Approx(slopes.front()).epsilon(1e-4));
}

TEST_CASE("weight base must dominate the derivative") {
  const Dynamics f = linear_map_dynamics(Matrix::Identity(1, 1) * 2.0);
  PseudoTrajectory pt;
  pt.law = weighted_law(1e-3, 1.5);
  for (int k = 0; k <= 5; ++k) {
    pt.times.push_back(k);
    pt.states.push_back(vec({std::ldexp(1e-3, k)}));
  }
  CHECK_THROWS_WITH_AS(weighted_shadow_solve(f, pt, 1.5), doctest::Contains("weight base below derivative-norm floor"),
                       DomainError);
  pt.law = weighted_law(1e-3, 2);
  CHECK_NOTHROW(weighted_shadow_solve(f, pt, 2));
}

TEST_CASE("weighted error of an exact orbit vanishes") {
  const Dynamics f = linear_map_dynamics(Matrix::Identity(1, 1) * 0.5);
  const PseudoTrajectory pt = halving_orbit(0, 4, 12);
  const WeightedIntegral wi = weighted_error(f, pt, pt.states[0], 4);
  CHECK(wi.value == 0);
  CHECK(wi.tail == 0);
}

TEST_CASE("noncompact weighted pipeline re-verifies the Euclidean bound") {
  static const CompactifiedField cf(parse_field("dim 1\nx0' = x0"));
  const Dynamics euclid = rescaled_dynamics(cf);
  const double C = 2.5;
  for (const double d : {1e-3, 1e-4}) {
    CAPTURE(d);
    GenOptions g;
    g.seed = 3;
    const PseudoTrajectory pt = gen_pseudo(euclid, vec({2}), 4, weighted_law(d, C, LawKind::noncompact_weighted), g);
    const NoncompactWeighted w = weighted_transfer_noncompact(cf, pt, C);
    CHECK(w.compact.valid);
    CHECK(w.K_transfer > 0);
    CHECK(std::isfinite(w.I_E));
    CHECK(w.bound_holds);
    CHECK(w.L_E == doctest::Approx(w.I_E / d));
  }
}
