#include "grshadow/conley.hpp"

#include <doctest.h>

#include <cmath>

using namespace grshadow;

namespace {

BoxComplex constant_boxes(int s, int u, int depth, double width = 1.0) {
  BoxComplex b;
  b.s_dim = s;
  b.u_dim = u;
  b.half_widths.assign(static_cast<std::size_t>(depth + 1), width);
  return b;
}

StepMap diagonal(std::vector<double> rates) {
  return [rates](int, const Vector& v) {
    Vector w = v;
    for (Eigen::Index i = 0; i < v.size(); ++i) w[i] *= rates[static_cast<std::size_t>(i)];
    return w;
  };
}

// Brute-force oracle: grid vertices of [-1,1]^2 whose orbit stays in the box.
std::vector<Vector> surviving_vertices(const StepMap& g, int depth, int per_side) {
  std::vector<Vector> out;
  for (int i = 0; i <= per_side; ++i) {
    for (int j = 0; j <= per_side; ++j) {
      Vector v(2);
      v << -1 + 2.0 * i / per_side, -1 + 2.0 * j / per_side;
      Vector w = v;
      bool inside = true;
      for (int k = 0; k < depth && inside; ++k) {
        w = g(k, w);
        inside = w.cwiseAbs().maxCoeff() <= 1;
      }
      if (inside) out.push_back(v);
    }
  }
  return out;
}

double directed(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double worst = 0;
  for (const Vector& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& q : b) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("linear saddle refines to the stable axis") {
  const StepMap g = diagonal({0.5, 2.0});
  const ConleyResult r = conley_refine(g, constant_boxes(1, 1, 30), 30, 8);
  for (const Vector& c : r.centers) CHECK(std::abs(c[1]) <= std::ldexp(1.0, -8));
  CHECK(r.surface_certified);
  const std::vector<Vector> oracle = surviving_vertices(g, 30, 512);
  REQUIRE_FALSE(oracle.empty());
  const double hausdorff = std::max(directed(r.centers, oracle), directed(oracle, r.centers));
  CHECK(hausdorff <= std::ldexp(1.0, -7));
}

TEST_CASE("composed membership tests agree on the saddle") {
  const StepMap g = diagonal({0.5, 2.0});
  ConleyOptions o;
  o.compose = 3;
  const ConleyResult a = conley_refine(g, constant_boxes(1, 1, 30), 30, 7);
  const ConleyResult b = conley_refine(g, constant_boxes(1, 1, 30), 30, 7, o);
  CHECK(a.cubes == b.cubes);
  CHECK(b.survivors_per_step.size() == 10);
}

TEST_CASE("full contraction with shrinking boxes converges to the fixed point") {
  const StepMap g = diagonal({0.5, 0.5});
  BoxComplex b = constant_boxes(2, 0, 30);
  for (int k = 0; k <= 30; ++k) b.half_widths[static_cast<std::size_t>(k)] = std::pow(0.4, k);
  ConleyOptions o;
  o.check_nesting = false;
  const ConleyResult r = conley_refine(g, b, 30, 8, o);
  CHECK(r.point.norm() <= std::ldexp(1.0, -8));
  CHECK(r.spread <= std::ldexp(1.0, -7));
  CHECK(r.cubes.size() <= 4);
}

TEST_CASE("expansion keeps the cubes meeting the exact preimage") {
  const int depth = 5, level = 8;
  const ConleyResult r = conley_refine(diagonal({2.0}), constant_boxes(0, 1, depth), depth, level);
  // Oracle: the preimage of [-1, 1] after depth doublings is [-2^-depth, 2^-depth].
  const double w = std::ldexp(1.0, -depth);
  const double side = 2.0 / (1 << level);
  std::vector<std::vector<int>> expected;
  for (int i = 0; i < (1 << level); ++i) {
    const double a = -1 + i * side, b = a + side;
    if (b >= -w && a <= w) expected.push_back({i});
  }
  CHECK(r.cubes == expected);
  CHECK(r.surface_certified);
}

TEST_CASE("higher-dimensional saddles keep a surface over every stable cell") {
  struct Split {
    int s, u;
  };
  for (const Split sp : {Split{1, 1}, Split{2, 1}, Split{1, 2}}) {
    std::vector<double> rates;
    for (int i = 0; i < sp.s; ++i) rates.push_back(0.5);
    for (int i = 0; i < sp.u; ++i) rates.push_back(2.0);
    const int level = sp.s + sp.u == 2 ? 7 : 5;
    const ConleyResult r = conley_refine(diagonal(rates), constant_boxes(sp.s, sp.u, 20), 20, level);
    CHECK(r.surface_certified);
    const double side = std::ldexp(1.0, 1 - level);
    for (const Vector& c : r.centers) CHECK(c.tail(sp.u).cwiseAbs().maxCoeff() <= side);
  }
}

TEST_CASE("misaligned boxes are rejected") {
  CHECK_THROWS_WITH_AS(conley_refine(diagonal({2.0, 0.5}), constant_boxes(1, 1, 5), 5, 4),
                       "hyperbolic box alignment violated at step 0", DomainError);
  const StepMap shifted = [](int, const Vector& v) {
    Vector w(2);
    w << v[0] / 2, 2 * v[1] + 3;
    return w;
  };
  ConleyOptions o;
  o.check_nesting = false;
  CHECK_THROWS_WITH_AS(conley_refine(shifted, constant_boxes(1, 1, 5), 5, 4, o),
                       "no invariant cubes: pseudotrajectory too coarse for given boxes", DomainError);
}

TEST_CASE("non-finite images are kept as undecided") {
  const StepMap g = [](int, const Vector& v) {
    Vector w = v;
    w[0] = v[0] > 0.9 ? std::numeric_limits<double>::quiet_NaN() : 2 * v[0];
    return w;
  };
  ConleyOptions o;
  o.check_nesting = false;
  const ConleyResult r = conley_refine(g, constant_boxes(0, 1, 3), 3, 4, o);
  CHECK(r.undecided > 0);
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(conley_refine(diagonal({0.5}), constant_boxes(1, 0, 2), 5, 3), DomainError);
  CHECK_THROWS_AS(conley_refine(diagonal({0.5}), constant_boxes(1, 0, 5), 5, 31), DomainError);
  ConleyOptions o;
  o.max_vertices = 100;
  CHECK_THROWS_AS(conley_refine(diagonal({0.5, 2}), constant_boxes(1, 1, 5), 5, 8, o), DomainError);
}
