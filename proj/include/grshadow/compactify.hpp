#pragma once

#include "grshadow/flow.hpp"
#include "grshadow/polyfield.hpp"
#include "grshadow/types.hpp"

#include <functional>
#include <vector>

namespace grshadow {

/// x -> x / sqrt(|x|^2 + 1), onto the open unit ball. Directions are kept.
Vector theta(const Vector& x);
/// Inverse of theta; throws DomainError for |xbar| >= 1.
Vector theta_inv(const Vector& xbar);
/// Radial inverse z = zbar / sqrt(1 - zbar^2).
double radial_decompactify(double zbar);
/// The same radius from the boundary distance ybar = 1 - zbar:
/// z = sqrt(1 / (2 ybar - ybar^2) - 1).
double radial_decompactify_from_distance(double ybar);
double radial_compactify(double z);

/// The compactified field on the closed unit ball
///
///   Xbar(xbar) = (1 - |xbar|^2)^{deg/2} (I - xbar xbar^T) X(theta_inv(xbar)),
///
/// obtained from the pushforward of X by theta and the time rescale
/// dt/ds = (1 - |xbar|^2)^{(deg-1)/2}. Writing X = sum_k X_k by homogeneous
/// degree and w = sqrt(1 - |xbar|^2) this equals
///
///   (I - xbar xbar^T) sum_k w^{deg-k} X_k(xbar),
///
/// which is what gets evaluated; at w = 0 only the top-degree part survives.
class CompactifiedField {
 public:
  explicit CompactifiedField(PolynomialField base);

  const PolynomialField& base() const { return base_; }
  int degree() const { return base_.degree(); }
  int dimension() const { return base_.dimension(); }
  /// (deg - 1) / 2, the exponent in dt/ds = (1 - |xbar|^2)^{(deg-1)/2}.
  double rescale_exponent() const { return 0.5 * (degree() - 1); }

  /// Requires |xbar| <= 1 (up to 1e-12).
  Vector eval(const Vector& xbar) const;
  /// Closed form on the sphere: (I - xbar xbar^T) X_top(xbar).
  Vector boundary_eval(const Vector& xbar) const;
  /// Same formula continued past the sphere: even powers of w become
  /// polynomials in 1 - |xbar|^2, odd powers are clamped at zero outside.
  /// Used for difference quotients at boundary points.
  Vector eval_extended(const Vector& xbar) const;
  /// Central differences of eval_extended.
  Matrix jacobian(const Vector& xbar, double step = 1e-6) const;
  /// True when the field has terms of degree deg-1; these make Xbar lose
  /// differentiability at the sphere (w appears to the first power).
  bool has_half_order_terms() const;

  VectorField as_field() const;
  /// X pulled back along theta in compactified time:
  /// (1 + |x|^2)^{-(deg-1)/2} X(x), so its flow is Phi(alpha(s, x), x).
  VectorField rescaled_original() const;
  /// dt/ds at a ball point.
  double time_rescale(const Vector& xbar) const;

 private:
  Vector combine(const Vector& xbar, double w2) const;

  PolynomialField base_;
  PolynomialField top_;
};

/// Local coordinates z = (r, t) near a boundary point p of the ball:
///
///   xbar = (1 - r) (p + B t) / |p + B t|,
///
/// with B an orthonormal basis of the tangent space at p. r is the distance to
/// the sphere and is carried exactly, so orbits approaching the boundary keep
/// full relative precision in r even when 1 - |xbar| is far below machine
/// epsilon. Valid on the open hemisphere around p.
class BoundaryChart {
 public:
  explicit BoundaryChart(const Vector& boundary_point);

  int dimension() const { return static_cast<int>(p_.size()); }
  const Vector& point() const { return p_; }
  const Matrix& tangent_basis() const { return basis_; }

  Vector to_ball(const Vector& z) const;
  Vector from_ball(const Vector& xbar) const;
  Vector from_euclid(const Vector& x) const;
  Vector to_euclid(const Vector& z) const;
  /// |theta_inv(to_ball(z))| without forming the ball point.
  double euclid_norm(const Vector& z) const;
  /// Unit direction u(t).
  Vector direction(const Vector& z) const;

  /// d to_euclid / dz and d to_ball / dz.
  Matrix euclid_jacobian(const Vector& z) const;
  Matrix ball_jacobian(const Vector& z) const;
  /// to_euclid(z + dz) - to_euclid(z), linearized when dz is small relative
  /// to the scale of z so that differences far below |x| * eps survive.
  Vector euclid_difference(const Vector& z, const Vector& dz) const;
  Vector ball_difference(const Vector& z, const Vector& dz) const;

  /// The compactified field written in chart coordinates.
  VectorField field(const CompactifiedField& cf) const;
  /// Relative-step central differences of field(cf), safe at tiny r.
  JacobianFn field_jacobian(const CompactifiedField& cf) const;
  /// Per-component error floor for integrating in this chart: zero on r
  /// (relative control) and small on the tangential coordinates.
  Vector error_floor() const;
  /// dt/ds in chart coordinates.
  double time_rescale(const CompactifiedField& cf, const Vector& z) const;

 private:
  Vector p_;
  Matrix basis_;
};

/// Sampled correspondence between compactified time s and original time t.
struct TimeChange {
  std::vector<double> s;
  std::vector<double> t;
  /// dt/ds as a function of s. Without it values are interpolated linearly.
  std::function<double(double)> rate;
  bool inverted = false;
  /// t(s), or s(t) after inverse().
  double operator()(double value) const;
  TimeChange inverse() const;
};

enum class TimeDirection { compact_to_original, original_to_compact };

/// alpha(s) = integral of (1 - |xbar(s)|^2)^{(deg-1)/2} ds along a sampled
/// compactified trajectory (Gauss-Legendre per step on the dense output).
/// Throws "time change degenerates at boundary" if a sample reaches the sphere.
TimeChange time_change(const Trajectory& compact_trajectory, int degree,
                       TimeDirection direction = TimeDirection::compact_to_original);

enum class TransferDirection { decompactify, compactify };

struct BallTransfer {
  double center_norm = 0;  // |xbar| for decompactify, |x| for compactify
  double input_radius = 0;
  double output_radius = 0;
  TransferDirection direction = TransferDirection::decompactify;

  double boundary_distance() const { return 1.0 - center_norm; }
};

/// Exact radial half-width R of theta_inv(U(Rbar, xbar)):
/// max over the endpoints zbar +- Rbar of |z(zbar +- Rbar) - z(zbar)|.
/// Throws when the ball reaches the sphere.
BallTransfer ball_expand_bound(const Vector& xbar, double rbar);
/// Exact radial half-width Rbar of theta(U(R, x)).
BallTransfer ball_contract_bound(const Vector& x, double r);

}  // namespace grshadow
