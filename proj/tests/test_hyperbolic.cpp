#include "grshadow/hyperbolic.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace grshadow;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

CompactifiedField field(const char* text) { return CompactifiedField(parse_field(text)); }

bool contains(const std::vector<Vector>& points, const Vector& p) {
  return std::any_of(points.begin(), points.end(), [&](const Vector& q) { return (q - p).norm() < 1e-8; });
}

HyperbolicProfile map_case_a(double mu, double lambda_s_min) {
  HyperbolicProfile p;
  p.kind = DynamicsKind::map;
  p.mu1 = p.mu2 = mu;
  p.lambda_s_min = lambda_s_min;
  p.lambda_s_max = mu;
  p.profile_case = ProfileCase::a;
  p.transversal_ok = true;
  return p;
}

}  // namespace

TEST_CASE("boundary fixed points of the line") {
  const std::vector<Vector> pts = boundary_fixed_points(field("dim 1\nx0' = x0"));
  CHECK(pts.size() == 2);
  CHECK(contains(pts, vec({1})));
  CHECK(contains(pts, vec({-1})));
}

TEST_CASE("boundary fixed points of a diagonal planar field are the axis directions") {
  const CompactifiedField cf = field("dim 2\nx0' = x0\nx1' = 2*x1");
  const std::vector<Vector> pts = boundary_fixed_points(cf);
  CHECK(pts.size() == 4);
  for (const Vector& p : {vec({1, 0}), vec({-1, 0}), vec({0, 1}), vec({0, -1})}) {
    CHECK(contains(pts, p));
    CHECK(cf.boundary_eval(p).norm() < 1e-10);
  }
}

TEST_CASE("rotation has no boundary fixed points") {
  CHECK(boundary_fixed_points(field("dim 2\nx0' = -x1\nx1' = x0")).empty());
}

TEST_CASE("boundary fixed points in three dimensions") {
  const CompactifiedField cf = field("dim 3\nx0' = x0\nx1' = 2*x1\nx2' = 3*x2");
  const std::vector<Vector> pts = boundary_fixed_points(cf, 40);
  CHECK(pts.size() == 6);
  for (const Vector& p : pts) CHECK(cf.boundary_eval(p).norm() < 1e-10);
  const std::vector<Vector> seeded = boundary_fixed_points(cf, {vec({0.1, 0.1, 0.9})});
  REQUIRE(seeded.size() == 1);
  CHECK((seeded[0] - vec({0, 0, 1})).norm() < 1e-8);
}

TEST_CASE("profile of the linear line") {
  for (double sign : {1.0, -1.0}) {
    const HyperbolicProfile p = spectral_profile(field("dim 1\nx0' = x0"), vec({sign}));
    // Oracle: d/dx of x(1 - x^2) is 1 - 3x^2.
    CHECK(p.mu1 == doctest::Approx(1 - 3.0).epsilon(1e-8));
    CHECK(p.mu2 == doctest::Approx(-2).epsilon(1e-8));
    CHECK(p.profile_case == ProfileCase::a);
    REQUIRE(p.lambda_s_min.has_value());
    CHECK(*p.lambda_s_min == doctest::Approx(-2).epsilon(1e-8));
    CHECK(p.transversal_ok);
    CHECK_FALSE(p.lambda_u_min.has_value());
  }
}

TEST_CASE("profiles match closed-form jacobians") {
  // Linear diagonal fields: radial rate -2a and tangent rate b - a at e0.
  const HyperbolicProfile p = spectral_profile(field("dim 2\nx0' = x0\nx1' = 2*x1"), vec({1, 0}));
  CHECK(p.mu2 == doctest::Approx(-2).epsilon(1e-8));
  REQUIRE(p.tangent_rates.size() == 1);
  CHECK(p.tangent_rates[0] == doctest::Approx(1).epsilon(1e-8));
  CHECK(p.profile_case == ProfileCase::b);
  CHECK(*p.lambda_u_min == doctest::Approx(1).epsilon(1e-8));
  const HyperbolicProfile q = spectral_profile(field("dim 2\nx0' = x0\nx1' = 2*x1"), vec({0, 1}));
  CHECK(q.mu2 == doctest::Approx(-4).epsilon(1e-8));
  CHECK(q.tangent_rates[0] == doctest::Approx(-1).epsilon(1e-8));
  CHECK(q.profile_case == ProfileCase::a);
  // x' = x^2: derivative of (1 - x^2) x^2 is 2x - 4x^3.
  const HyperbolicProfile r = spectral_profile(field("dim 1\nx0' = x0^2"), vec({1}));
  CHECK(r.mu2 == doctest::Approx(-2).epsilon(1e-8));
  const HyperbolicProfile s = spectral_profile(field("dim 1\nx0' = x0^2"), vec({-1}));
  CHECK(s.mu2 == doctest::Approx(2).epsilon(1e-8));
}

TEST_CASE("non-hyperbolic boundary points are rejected") {
  CHECK_THROWS_WITH_AS(spectral_profile(field("dim 2\nx0' = x0\nx1' = x1"), vec({1, 0})),
                       doctest::Contains("non-hyperbolic boundary point"), DomainError);
  CHECK_THROWS_AS(spectral_profile(field("dim 1\nx0' = x0"), vec({0.5})), DomainError);
}

TEST_CASE("exponent windows") {
  SUBCASE("flow profile of the linear line") {
    const HyperbolicProfile p = spectral_profile(field("dim 1\nx0' = x0"), vec({1}));
    const ExponentWindow w = admissible_exponents(p, DynamicsKind::flow, 1.5);
    CHECK(w.bound_kind == BoundKind::lower);
    CHECK(w.m_bound == doctest::Approx(1).epsilon(1e-8));
    CHECK(w.m_in_window);
    CHECK(w.decompactified_exponent == doctest::Approx(0).scale(1));
    CHECK_FALSE(w.admits(0.9));
  }
  SUBCASE("map profile with log ratio two") {
    const ExponentWindow w = admissible_exponents(map_case_a(0.5, 0.25), DynamicsKind::map);
    CHECK(w.m_bound == doctest::Approx(std::log(0.25) / std::log(0.5)).epsilon(1e-12));
    CHECK(w.m_bound == doctest::Approx(2));
    CHECK(w.admits(2.5));
    CHECK_FALSE(w.admits(1.5));
  }
  SUBCASE("flow case b is an upper bound") {
    HyperbolicProfile p;
    p.kind = DynamicsKind::flow;
    p.mu1 = p.mu2 = -1;
    p.lambda_s_min = -1;
    p.lambda_s_max = -0.5;
    p.lambda_u_min = p.lambda_u_max = 1;
    p.profile_case = ProfileCase::b;
    p.transversal_ok = true;
    const ExponentWindow w = admissible_exponents(p, DynamicsKind::flow);
    CHECK(w.bound_kind == BoundKind::upper);
    CHECK(w.m_bound == doctest::Approx(0.5));
    CHECK(w.admits(0.25));
    CHECK_FALSE(w.admits(0.75));
    CHECK_FALSE(w.admits(-0.1));
  }
  SUBCASE("a repelling transversal direction has no window") {
    const HyperbolicProfile p = spectral_profile(field("dim 1\nx0' = x0^2"), vec({-1}));
    CHECK_THROWS_WITH_AS(admissible_exponents(p, DynamicsKind::flow),
                         "no admissible exponent: transversal direction not contracting", DomainError);
  }
  SUBCASE("noncompact exponent") {
    const HyperbolicProfile p = spectral_profile(field("dim 1\nx0' = x0"), vec({1}));
    CHECK(admissible_exponents(p, DynamicsKind::flow, 1.5, 2.0).n0 == doctest::Approx(1));
    CHECK(admissible_exponents(p, DynamicsKind::flow, 1.5, 3.0).n0 == doctest::Approx(3));
  }
}

TEST_CASE("time-one map profile takes exponentials") {
  const HyperbolicProfile flow = spectral_profile(field("dim 2\nx0' = x0\nx1' = 2*x1"), vec({0, 1}));
  const HyperbolicProfile map = map_profile(flow);
  CHECK(map.kind == DynamicsKind::map);
  CHECK(map.mu2 == doctest::Approx(std::exp(flow.mu2)).epsilon(1e-12));
  const double flow_bound = admissible_exponents(flow, DynamicsKind::flow).m_bound;
  const double map_bound = admissible_exponents(map, DynamicsKind::map).m_bound;
  CHECK(map_bound == doctest::Approx(flow_bound).epsilon(1e-12));
}

TEST_CASE("case windows sit on the correct side of one") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 500; ++i) {
    const double mu = u(rng);
    const double lam = mu * u(rng);
    CHECK(admissible_exponents(map_case_a(mu, lam), DynamicsKind::map).m_bound > 1);
    HyperbolicProfile b;
    b.kind = DynamicsKind::map;
    b.mu1 = b.mu2 = u(rng);
    b.lambda_s_max = b.mu1 + (1 - b.mu1) * u(rng);
    b.lambda_s_min = b.mu1;
    b.lambda_u_min = b.lambda_u_max = 1.5;
    b.profile_case = ProfileCase::b;
    b.transversal_ok = true;
    CHECK(admissible_exponents(b, DynamicsKind::map).m_bound < 1);
  }
}

TEST_CASE("flow bounds are invariant under time rescaling") {
  const CompactifiedField slow = field("dim 2\nx0' = x0 + x1\nx1' = 3*x1");
  const CompactifiedField fast = field("dim 2\nx0' = 5/2*x0 + 5/2*x1\nx1' = 15/2*x1");
  for (const Vector& p : boundary_fixed_points(slow)) {
    const HyperbolicProfile a = spectral_profile(slow, p);
    const HyperbolicProfile b = spectral_profile(fast, p);
    CHECK(b.mu2 == doctest::Approx(2.5 * a.mu2).epsilon(1e-8));
    if (a.mu2 >= 0) continue;
    const ExponentWindow wa = admissible_exponents(a, DynamicsKind::flow);
    const ExponentWindow wb = admissible_exponents(b, DynamicsKind::flow);
    CHECK(std::abs(wa.m_bound - wb.m_bound) < 1e-12 * std::max(1.0, wa.m_bound) + 1e-9);
  }
}
