#pragma once

#include "grshadow/compactify.hpp"
#include "grshadow/flow.hpp"
#include "grshadow/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace grshadow {

enum class LawKind { standard, nonuniform, noncompact_nonuniform, weighted, noncompact_weighted };
std::string to_string(LawKind kind);
LawKind parse_law_kind(const std::string& name);

/// Allowed size of defects.
///   standard              |e| <= d
///   nonuniform            |e| <= delta * r^n        (r = distance to the sphere)
///   noncompact_nonuniform |e| <= delta * |x|^{-n}   (Euclidean, rescaled time)
///   weighted              sum/integral of C^t |e| <= d
///   noncompact_weighted   integral of C^{5t/2} |e| <= d (Euclidean, rescaled time)
struct ErrorLaw {
  LawKind kind = LawKind::standard;
  double magnitude = 0.0;  // delta or d
  double n = 1.0;
  double C = 2.0;
  double T = 1.0;
  /// Measure the nonuniform allowance at x_{k+1} instead of f(x_k).
  bool next_point = false;

  /// Throws DomainError for n < 1 (nonuniform kinds), C <= 1 (weighted kinds),
  /// negative magnitude or T <= 0.
  void validate() const;
  bool weighted() const;
  bool noncompact() const;
  /// Exponent of the weight: 1 for weighted, 5/2 for noncompact_weighted.
  double weight_power() const;
};

enum class Space { euclidean, ball, chart };
std::string to_string(Space space);
Space parse_space(const std::string& name);

/// How points of a space are measured. Ball and chart points use the
/// Euclidean metric of the ball; chart points are converted through the
/// chart's linearized differences so tiny distances near the sphere survive.
class Geometry {
 public:
  static Geometry euclidean(int dimension);
  static Geometry ball(int dimension);
  static Geometry chart(const BoundaryChart& chart);

  Space space() const { return space_; }
  int dimension() const { return dimension_; }
  const std::optional<BoundaryChart>& boundary_chart() const { return chart_; }

  /// |b - a| in the space's metric.
  double distance(const Vector& a, const Vector& b) const;
  /// Metric displacement of a + delta relative to a (a vector in R^N).
  Vector displacement(const Vector& a, const Vector& delta) const;
  /// Inverse of displacement to first order: the coordinate step at a whose
  /// metric image is v.
  Vector coordinate_step(const Vector& a, const Vector& v) const;
  /// Distance to the boundary sphere; throws for Euclidean points.
  double boundary_distance(const Vector& x) const;
  /// Norm of the corresponding point of R^N.
  double euclid_norm(const Vector& x) const;
  Vector to_euclid(const Vector& x) const;
  Vector to_ball(const Vector& x) const;
  /// Throws when x is not an admissible point (outside the open ball etc.).
  void require_interior(const Vector& x) const;
  /// Size of round-off in distance computations at x for integration tol.
  double noise(const Vector& x, double tol) const;

 private:
  Space space_ = Space::euclidean;
  int dimension_ = 0;
  std::optional<BoundaryChart> chart_;
};

/// A map x -> f(x) or a flow x' = F(x) acting on points of a Geometry.
struct Dynamics {
  enum class Kind { map, flow };
  Kind kind = Kind::map;
  PointMap map;
  VectorField field;
  /// Jacobian of the map or the field; optional.
  JacobianFn jacobian;
  IntegratorOptions options;
  Geometry geometry = Geometry::euclidean(1);

  int dimension() const { return geometry.dimension(); }
  /// f(x), or Phi(1, x) for flows.
  Vector step(const Vector& x) const;
  /// Phi(t, x); flows only.
  Vector flow(double t, const Vector& x) const;
  Trajectory trajectory(const Vector& x, double t0, double t1) const;
  /// Df(x), or D Phi(1, x) for flows (variational equation).
  Matrix step_jacobian(const Vector& x) const;
  /// The time-one map of a flow, as map dynamics.
  Dynamics time_one_map() const;
  /// The same dynamics integrated at another tolerance (explicit maps are
  /// returned unchanged).
  Dynamics with_tolerance(double tol) const;

  /// Set on time-one maps: the flow they were built from.
  std::shared_ptr<const Dynamics> flow_source;
};

Dynamics map_dynamics(PointMap f, JacobianFn jacobian, Geometry geometry);
Dynamics linear_map_dynamics(const Matrix& a);
/// x' = X(x) on R^N.
Dynamics original_dynamics(const PolynomialField& field, IntegratorOptions options = {});
/// The pulled-back field (1+|x|^2)^{-(deg-1)/2} X(x) on R^N, whose flow is
/// Phi(alpha(s, x), x). The CompactifiedField must outlive the result.
Dynamics rescaled_dynamics(const CompactifiedField& cf, IntegratorOptions options = {});
Dynamics ball_dynamics(const CompactifiedField& cf, IntegratorOptions options = {});
/// Compactified field in boundary chart coordinates around p.
Dynamics chart_dynamics(const CompactifiedField& cf, const Vector& p, IntegratorOptions options = {});

/// Sampled approximate orbit. For maps times are 0, 1, ..., K.
struct PseudoTrajectory {
  bool is_map = true;
  Space space = Space::euclidean;
  ErrorLaw law;
  std::vector<double> times;
  std::vector<Vector> states;
  /// Maps only, optional: jumps[k] = x_{k+1} - f(x_k) in coordinates, kept
  /// from generation so defects far below the resolution of x_{k+1} are exact.
  std::vector<Vector> jumps;
  /// Center of the boundary chart for chart-space samples.
  Vector chart_point;

  std::size_t size() const { return states.size(); }
  /// Psi(t) from the samples (linear between samples).
  Vector at(double t) const;
};

/// A stored jump reproduces next = f(x) + jump up to rounding and the
/// integration noise at tolerance tol.
bool jump_consistent(const Geometry& g, const Vector& next, const Vector& fx, const Vector& jump, double tol);

struct DefectSample {
  double t = 0;
  double defect = 0;
  /// Law allowance at this sample (pointwise kinds); 0 for weighted kinds.
  double allowance = 0;
  /// Round-off budget granted to the comparison.
  double noise = 0;
};

struct DefectOptions {
  /// Window half-width T for flows; the law's T when unset.
  std::optional<double> window;
  /// Spacing of the tau grid; sample spacing when unset.
  std::optional<double> tau_step;
};

/// Defects e_k = |x_{k+1} - f(x_k)| for maps, or
/// psi(t) = max over the tau grid in [-T, T] of |Psi(t+tau) - Phi(tau, Psi(t))|
/// for flows (windows are clipped to the sampled span). The allowance column
/// is filled from law (pointwise kinds).
std::vector<DefectSample> compute_defects(const PseudoTrajectory& pt, const Dynamics& dynamics,
                                          const ErrorLaw& law, const DefectOptions& options = {});

struct CheckReport {
  bool holds = false;
  double worst_margin = 0;
  double worst_location = 0;
  /// Weighted kinds: the weighted sum or integral including the tail bound.
  std::optional<double> integral_value;
  double tail_bound = 0;
  std::vector<DefectSample> samples;
};

/// Checks pt against law. Pointwise kinds compare every defect with its
/// allowance (relative slack 1e-12 plus the integration noise); weighted kinds
/// compare the weighted sum (maps) or trapezoid integral (flows) plus a
/// geometric tail majorant with d. A non-decaying tail gives +inf.
CheckReport check_pseudo(const PseudoTrajectory& pt, const Dynamics& dynamics, const ErrorLaw& law,
                         const DefectOptions& options = {});

/// Weighted sum or integral of the defects with weight C^{p t}, with the tail
/// estimated from the last unit of time using only the part of each sample
/// above its noise.
struct WeightedIntegral {
  double value = 0;
  double tail = 0;
};
WeightedIntegral weighted_integral(const std::vector<DefectSample>& samples, double base, bool discrete);

struct GenOptions {
  std::uint64_t seed = 0;
  /// Flows: samples per unit time.
  int samples_per_unit = 16;
  /// Fraction of the allowance used by the random perturbations.
  double safety = 0.5;
  int max_rounds = 40;
};

/// Perturbed orbit of length `length` (steps for maps, time for flows)
/// satisfying law by construction: x_{k+1} = f(x_k) + p_k with p_k uniform in
/// the allowance ball. Flows are built from exact segments
/// Psi(k + s) = Phi(s, y_k) with jumps at integer times; perturbations that
/// break the check are halved until it holds. Deterministic given the seed.
PseudoTrajectory gen_pseudo(const Dynamics& dynamics, const Vector& x0, int length,
                            const ErrorLaw& law, const GenOptions& options = {});

/// CSV with header comment lines; see the README for the layout.
void write_pseudo_csv(const PseudoTrajectory& pt, std::ostream& out);
PseudoTrajectory read_pseudo_csv(std::istream& in);

}  // namespace grshadow
