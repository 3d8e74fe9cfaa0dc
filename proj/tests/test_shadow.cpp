#include "grshadow/shadow.hpp"

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

const CompactifiedField& linear_cf() {
  static const CompactifiedField cf(parse_field("dim 1\nx0' = x0"));
  return cf;
}

IntegratorOptions tol(double t) {
  IntegratorOptions o;
  o.tol = t;
  return o;
}

ErrorLaw nonuniform(double delta, double n = 2) {
  ErrorLaw l;
  l.kind = LawKind::nonuniform;
  l.magnitude = delta;
  l.n = n;
  return l;
}

Dynamics chart_map() { return chart_dynamics(linear_cf(), vec({1}), tol(1e-10)).time_one_map(); }
Dynamics chart_flow() { return chart_dynamics(linear_cf(), vec({1}), tol(1e-10)); }

ExponentWindow window(DynamicsKind kind, double m) {
  return admissible_exponents(spectral_profile(linear_cf(), vec({1})), kind, m);
}

// Closed-form time-one map of the compactified linear field in the distance
// r = 1 - xbar, computed without cancellation.
double r_step(double r) {
  const double x = (1 - r) / std::sqrt(r * (2 - r));
  const double y = std::exp(1.0) * x;
  const double s = std::sqrt(1 + y * y);
  return 1 / (s * (s + y));
}

// Shadows the first steps whose distance is resolvable in double precision.
bool oracle_shadows(double q, const PseudoTrajectory& pt, double m, double Delta, std::size_t steps) {
  double r = q;
  for (std::size_t k = 0; k < steps; ++k) {
    if (std::abs(r - pt.states[k][0]) > Delta * std::pow(r, m)) return false;
    r = r_step(r);
  }
  return true;
}

std::size_t resolvable_steps(const PseudoTrajectory& pt, double m, double Delta) {
  std::size_t k = 0;
  while (k < pt.size() && Delta * std::pow(pt.states[k][0], m) > 1e-6 * pt.states[k][0]) ++k;
  return k;
}

}  // namespace

TEST_CASE("exact orbit is its own shadow") {
  const Dynamics f = chart_map();
  const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 40, nonuniform(0));
  const ShadowResult r = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2);
  REQUIRE(r.valid);
  CHECK(r.certified);
  CHECK(std::abs(r.q[0] - 0.1) <= 1e-12);
  for (const StepRecord& s : r.steps) {
    CHECK(s.error <= 1e-9 * s.allowance);
    CHECK(s.margin == doctest::Approx(s.allowance).epsilon(1e-9));
  }
}

TEST_CASE("nonuniform map shadowing agrees with a bisection oracle") {
  const Dynamics f = chart_map();
  const double m = 1.5, Delta = 1e-2;
  GenOptions g;
  g.seed = 4;
  const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 200, nonuniform(1e-3), g);
  const ShadowResult r = shadow_search_map(f, pt, window(DynamicsKind::map, m), m, Delta);
  REQUIRE_MESSAGE(r.valid, r.status);
  CHECK(r.status == "ok");
  CHECK(r.worst_margin >= 0);
  CHECK(r.diagnostics.closure_residual <= 1e-2);
  CHECK(r.steps.size() == pt.size());
  const std::size_t steps = resolvable_steps(pt, m, Delta);
  REQUIRE(steps >= 5);
  CHECK(oracle_shadows(r.q[0], pt, m, Delta, steps));
  // The valid set is an interval around the shadow: bisect for its left end.
  double lo = 0.5 * r.q[0], hi = r.q[0];
  REQUIRE_FALSE(oracle_shadows(lo, pt, m, Delta, steps));
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle_shadows(mid, pt, m, Delta, steps) ? hi : lo) = mid;
  }
  CHECK(hi <= r.q[0]);
  CHECK(r.q[0] - hi <= Delta * std::pow(0.1, m));
}

TEST_CASE("realized constant scales with delta") {
  const Dynamics f = chart_map();
  std::vector<double> ratios;
  for (double delta : {1e-3, 1e-4}) {
    GenOptions g;
    g.seed = 9;
    const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 200, nonuniform(delta), g);
    const ShadowResult r = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2);
    REQUIRE(r.valid);
    ratios.push_back(r.realized_Delta / delta);
  }
  CHECK(ratios[0] / ratios[1] <= 2);
  CHECK(ratios[1] / ratios[0] <= 2);
}

TEST_CASE("a defect far over the allowance is rejected") {
  const Dynamics f = chart_map();
  GenOptions g;
  g.seed = 2;
  PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 30, nonuniform(1e-3), g);
  const std::size_t k = 6;
  const double r = f.step(pt.states[k])[0];
  pt.jumps[k][0] = 10 * 1e-2 * std::pow(r, 1.5);
  pt.states[k + 1][0] = r + pt.jumps[k][0];
  for (std::size_t j = k + 1; j + 1 < pt.size(); ++j) {
    pt.states[j + 1] = f.step(pt.states[j]) + pt.jumps[j];
  }
  const ShadowResult checked = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2);
  CHECK_FALSE(checked.valid);
  CHECK(checked.status == "pseudotrajectory violates its law");
  CHECK(checked.worst_location == static_cast<double>(k));
  ShadowOptions o;
  o.check_law = false;
  const ShadowResult r2 = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2, o);
  CHECK_FALSE(r2.valid);
  CHECK(r2.worst_margin < 0);
  CHECK(std::abs(r2.worst_location - static_cast<double>(k)) <= 1);
}

TEST_CASE("unique shadow when every direction is expanding relative to the boxes") {
  const Dynamics f = chart_map();
  GenOptions g;
  g.seed = 12;
  const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 60, nonuniform(1e-3), g);
  const ShadowResult a = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2);
  const ShadowResult b = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 2e-2);
  REQUIRE(a.valid);
  REQUIRE(b.valid);
  CHECK(a.diagnostics.s_dim == 0);
  CHECK(std::abs(a.q[0] - b.q[0]) <= std::ldexp(1e-2 * std::pow(0.1, 1.5), -6));
}

TEST_CASE("flow shadowing") {
  const Dynamics phi = chart_flow();
  SUBCASE("exact flow orbit") {
    const PseudoTrajectory pt = gen_pseudo(phi, vec({0.1}), 6, nonuniform(0));
    const ShadowResult r = shadow_search_flow(phi, pt, window(DynamicsKind::flow, 1.5), 1.5, 1e-2);
    REQUIRE_MESSAGE(r.valid, r.status);
    CHECK(std::abs(r.q[0] - 0.1) <= 1e-10);
  }
  SUBCASE("nonuniform flow pseudotrajectory") {
    GenOptions g;
    g.seed = 1;
    const PseudoTrajectory pt = gen_pseudo(phi, vec({0.1}), 8, nonuniform(1e-3), g);
    const ShadowResult r = shadow_search_flow(phi, pt, window(DynamicsKind::flow, 1.5), 1.5, 1e-2);
    REQUIRE_MESSAGE(r.valid, r.status);
    CHECK(r.certified);
    CHECK(r.Delta >= 1e-2);
    CHECK(r.diagnostics.flow_factor >= 0);
    for (const StepRecord& s : r.steps) CHECK(s.margin >= 0);
  }
  SUBCASE("exponent below the window is flagged") {
    GenOptions g;
    g.seed = 1;
    const PseudoTrajectory pt = gen_pseudo(phi, vec({0.1}), 8, nonuniform(1e-3), g);
    const ShadowResult r = shadow_search_flow(phi, pt, window(DynamicsKind::flow, 0.5), 0.5, 1e-2);
    CHECK_FALSE(r.certified);
    if (r.valid) CHECK(r.status == "ok (outside certified window)");
  }
}

TEST_CASE("planar saddle at the boundary yields a disk of shadows") {
  static const CompactifiedField cf(parse_field("dim 2\nx0' = x0\nx1' = 2*x1"));
  const Dynamics f = chart_dynamics(cf, vec({1, 0}), tol(1e-10)).time_one_map();
  const HyperbolicProfile prof = spectral_profile(cf, vec({1, 0}));
  const ExponentWindow w = admissible_exponents(prof, DynamicsKind::map, 0.5);
  REQUIRE(w.bound_kind == BoundKind::upper);
  GenOptions g;
  g.seed = 6;
  const PseudoTrajectory pt = gen_pseudo(f, vec({0.1, 0.0}), 12, nonuniform(1e-4, 1), g);
  ShadowOptions o;
  o.surface_samples = 3;
  const ShadowResult r = shadow_search_map(f, pt, w, 0.5, 1e-1, o);
  REQUIRE_MESSAGE(r.valid, r.status);
  CHECK(r.diagnostics.s_dim + r.diagnostics.u_dim == 2);
  REQUIRE(r.diagnostics.s_dim >= 1);
  REQUIRE_FALSE(r.surface_sample.empty());
  for (bool ok : r.surface_valid) CHECK(ok);
}

TEST_CASE("noncompact transfer of a ball shadow") {
  const Dynamics f = chart_map();
  GenOptions g;
  g.seed = 4;
  SUBCASE("zero ball errors stay zero") {
    const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 20, nonuniform(0));
    const ShadowResult r = shadow_search_map(f, pt, window(DynamicsKind::map, 1.5), 1.5, 1e-2);
    const NoncompactTransfer t = shadow_transfer_noncompact(r, f.geometry, linear_cf(), 1.5);
    for (double e : t.errors) CHECK(e <= 1e-9);
  }
  for (const double mbar : {1.5, 1.25}) {
    CAPTURE(mbar);
    const PseudoTrajectory pt = gen_pseudo(f, vec({0.1}), 25, nonuniform(1e-3), g);
    const ShadowResult r = shadow_search_map(f, pt, window(DynamicsKind::map, mbar), mbar, 1e-2);
    REQUIRE(r.valid);
    const NoncompactTransfer t = shadow_transfer_noncompact(r, f.geometry, linear_cf(), mbar);
    CHECK(t.envelope_exponent == doctest::Approx(3 - 2 * mbar));
    CHECK(t.fitted_points >= 5);
    CHECK(t.measured_slope <= (mbar == 1.5 ? 0.1 : 0.6));
    CHECK(t.result.valid);
  }
}
