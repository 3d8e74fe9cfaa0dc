#include "grshadow/compactify.hpp"

#include <memory>
#include <algorithm>
#include <cmath>

namespace grshadow {

Vector theta(const Vector& x) { return x / std::sqrt(x.squaredNorm() + 1.0); }

Vector theta_inv(const Vector& xbar) {
  const double n2 = xbar.squaredNorm();
  if (!(n2 < 1.0)) throw DomainError("boundary point has no finite preimage");
  return xbar / std::sqrt(1.0 - n2);
}

double radial_decompactify(double zbar) {
  if (!(std::abs(zbar) < 1.0)) throw DomainError("boundary point has no finite preimage");
  return zbar / std::sqrt(1.0 - zbar * zbar);
}

double radial_decompactify_from_distance(double ybar) {
  if (!(ybar > 0.0)) throw DomainError("boundary point has no finite preimage");
  // sqrt(1/(2y - y^2) - 1) rewritten without cancellation.
  return (1.0 - ybar) / std::sqrt(ybar * (2.0 - ybar));
}

double radial_compactify(double z) { return z / std::sqrt(z * z + 1.0); }

namespace {

// w^j for w = sqrt(w2), continued past the sphere as described in the header.
double w_power(double w2, int j) {
  if (j == 0) return 1.0;
  if (j % 2 == 0) return std::pow(w2, j / 2);
  return std::pow(std::max(w2, 0.0), 0.5 * j);
}

// Boundary distance of a point given by its Euclidean norm: 1 - z/sqrt(1+z^2).
double boundary_distance_of_norm(double z) {
  const double rho = std::sqrt(1.0 + z * z);
  return 1.0 / (rho * (rho + z));
}

}  // namespace

CompactifiedField::CompactifiedField(PolynomialField base)
    : base_(std::move(base)), top_(base_.is_zero() ? base_ : base_.top_degree_part()) {}

Vector CompactifiedField::combine(const Vector& xbar, double w2) const {
  const Matrix parts = base_.eval_by_degree(xbar);
  const int deg = degree();
  Vector v = Vector::Zero(xbar.size());
  for (int k = 0; k <= deg; ++k) v += w_power(w2, deg - k) * parts.col(k);
  return v - xbar * xbar.dot(v);
}

Vector CompactifiedField::eval(const Vector& xbar) const {
  require_dimension(xbar, dimension(), "ball point");
  const double n2 = xbar.squaredNorm();
  if (n2 > 1.0 + 1e-12) throw DomainError("point outside the closed unit ball");
  return combine(xbar, std::max(0.0, 1.0 - n2));
}

Vector CompactifiedField::boundary_eval(const Vector& xbar) const {
  require_dimension(xbar, dimension(), "ball point");
  Vector v = top_.eval(xbar);
  return v - xbar * xbar.dot(v);
}

Vector CompactifiedField::eval_extended(const Vector& xbar) const {
  require_dimension(xbar, dimension(), "ball point");
  return combine(xbar, 1.0 - xbar.squaredNorm());
}

Matrix CompactifiedField::jacobian(const Vector& xbar, double step) const {
  const Eigen::Index n = xbar.size();
  Matrix jac(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector xp = xbar, xm = xbar;
    xp[j] += step;
    xm[j] -= step;
    jac.col(j) = (eval_extended(xp) - eval_extended(xm)) / (2 * step);
  }
  return jac;
}

bool CompactifiedField::has_half_order_terms() const {
  if (degree() == 0) return false;
  return !base_.homogeneous_part(degree() - 1).is_zero();
}

VectorField CompactifiedField::as_field() const {
  return [this](const Vector& xbar) { return eval_extended(xbar); };
}

VectorField CompactifiedField::rescaled_original() const {
  const double e = rescale_exponent();
  return [this, e](const Vector& x) {
    return (std::pow(1.0 + x.squaredNorm(), -e) * base_.eval(x)).eval();
  };
}

double CompactifiedField::time_rescale(const Vector& xbar) const {
  const double w2 = 1.0 - xbar.squaredNorm();
  if (!(w2 > 0)) throw DomainError("time change degenerates at boundary");
  return std::pow(w2, rescale_exponent());
}

// --- BoundaryChart ---------------------------------------------------------

BoundaryChart::BoundaryChart(const Vector& boundary_point) {
  const double norm = boundary_point.norm();
  if (!(norm > 0)) throw DomainError("chart center must be a nonzero direction");
  p_ = boundary_point / norm;
  const Eigen::Index n = p_.size();
  // Orthonormal complement of p from a full QR of [p].
  Matrix pm = p_;
  Eigen::HouseholderQR<Matrix> qr(pm);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  basis_ = q.rightCols(n - 1);
}

Vector BoundaryChart::direction(const Vector& z) const {
  Vector d = p_ + basis_ * z.tail(z.size() - 1);
  return d / d.norm();
}

Vector BoundaryChart::to_ball(const Vector& z) const {
  require_dimension(z, dimension(), "chart point");
  return (1.0 - z[0]) * direction(z);
}

Vector BoundaryChart::from_ball(const Vector& xbar) const {
  require_dimension(xbar, dimension(), "ball point");
  const double norm = xbar.norm();
  Vector z(dimension());
  z[0] = 1.0 - norm;
  if (norm == 0) {
    z.tail(dimension() - 1).setZero();
    return z;
  }
  const Vector u = xbar / norm;
  const double pu = p_.dot(u);
  if (!(pu > 0)) throw DomainError("point outside the chart hemisphere");
  z.tail(dimension() - 1) = basis_.transpose() * u / pu;
  return z;
}

Vector BoundaryChart::from_euclid(const Vector& x) const {
  require_dimension(x, dimension(), "point");
  const double norm = x.norm();
  Vector z(dimension());
  z[0] = boundary_distance_of_norm(norm);
  if (norm == 0) {
    z.tail(dimension() - 1).setZero();
    return z;
  }
  const Vector u = x / norm;
  const double pu = p_.dot(u);
  if (!(pu > 0)) throw DomainError("point outside the chart hemisphere");
  z.tail(dimension() - 1) = basis_.transpose() * u / pu;
  return z;
}

double BoundaryChart::euclid_norm(const Vector& z) const {
  return radial_decompactify_from_distance(z[0]);
}

Vector BoundaryChart::to_euclid(const Vector& z) const {
  require_dimension(z, dimension(), "chart point");
  return euclid_norm(z) * direction(z);
}

Matrix BoundaryChart::euclid_jacobian(const Vector& z) const {
  const Eigen::Index n = dimension();
  const double r = z[0];
  const double s = r * (2.0 - r);
  const Vector d = p_ + basis_ * z.tail(n - 1);
  const double dn = d.norm();
  const Vector u = d / dn;
  Matrix jac(n, n);
  jac.col(0) = -std::pow(s, -1.5) * u;
  if (n > 1) {
    const double rho = (1.0 - r) / std::sqrt(s);
    jac.rightCols(n - 1) = rho * (Matrix::Identity(n, n) - u * u.transpose()) * basis_ / dn;
  }
  return jac;
}

Matrix BoundaryChart::ball_jacobian(const Vector& z) const {
  const Eigen::Index n = dimension();
  const Vector d = p_ + basis_ * z.tail(n - 1);
  const double dn = d.norm();
  const Vector u = d / dn;
  Matrix jac(n, n);
  jac.col(0) = -u;
  if (n > 1) jac.rightCols(n - 1) = (1.0 - z[0]) * (Matrix::Identity(n, n) - u * u.transpose()) * basis_ / dn;
  return jac;
}

namespace {

bool small_relative_to(const Vector& z, const Vector& dz) {
  if (std::abs(dz[0]) >= 1e-6 * std::abs(z[0])) return false;
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    if (std::abs(dz[i]) >= 1e-6) return false;
  }
  return true;
}

}  // namespace

Vector BoundaryChart::euclid_difference(const Vector& z, const Vector& dz) const {
  if (small_relative_to(z, dz)) return euclid_jacobian(z) * dz;
  return to_euclid(z + dz) - to_euclid(z);
}

Vector BoundaryChart::ball_difference(const Vector& z, const Vector& dz) const {
  if (small_relative_to(z, dz)) return ball_jacobian(z) * dz;
  return to_ball(z + dz) - to_ball(z);
}

VectorField BoundaryChart::field(const CompactifiedField& cf) const {
  return [p = p_, basis = basis_, &cf](const Vector& z) {
    const Eigen::Index n = p.size();
    const double r = z[0];
    const Vector d = p + basis * z.tail(n - 1);
    const double dn = d.norm();
    const Vector u = d / dn;
    const Vector xbar = (1.0 - r) * u;
    const double w2 = r * (2.0 - r);
    const Matrix parts = cf.base().eval_by_degree(xbar);
    const int deg = cf.degree();
    Vector v = Vector::Zero(n);
    for (int k = 0; k <= deg; ++k) v += w_power(w2, deg - k) * parts.col(k);
    const double uv = u.dot(v);
    Vector out(n);
    out[0] = -w2 * uv;
    if (n > 1) {
      const Vector u_dot = (v - uv * u) / (1.0 - r);
      const double pu = p.dot(u);
      out.tail(n - 1) = (basis.transpose() * u_dot - (basis.transpose() * u) * (p.dot(u_dot) / pu)) / pu;
    }
    return out;
  };
}

JacobianFn BoundaryChart::field_jacobian(const CompactifiedField& cf) const {
  VectorField f = field(cf);
  Vector floor = Vector::Constant(dimension(), 1e-3);
  return [f, floor](const Vector& z) {
    const Eigen::Index n = z.size();
    Matrix jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      // The field is smooth in r on a unit scale; keep the r step away from rounding.
      const double h = j == 0 ? std::min(6e-6, 0.5 * z[0]) : 6e-6 * std::max(std::abs(z[j]), floor[j]);
      Vector zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      jac.col(j) = (f(zp) - f(zm)) / (zp[j] - zm[j]);
    }
    return jac;
  };
}

Vector BoundaryChart::error_floor() const {
  Vector floor = Vector::Constant(dimension(), 1e-9);
  floor[0] = 0.0;
  return floor;
}

double BoundaryChart::time_rescale(const CompactifiedField& cf, const Vector& z) const {
  const double w2 = z[0] * (2.0 - z[0]);
  if (!(w2 > 0)) throw DomainError("time change degenerates at boundary");
  return std::pow(w2, cf.rescale_exponent());
}

// --- time change -----------------------------------------------------------

namespace {

constexpr double gl_nodes[] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281, 0.9305681557970263};
constexpr double gl_weights[] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269};

double gauss_legendre(const std::function<double(double)>& g, double a, double b) {
  double sum = 0;
  for (int q = 0; q < 4; ++q) sum += gl_weights[q] * g(a + gl_nodes[q] * (b - a));
  return (b - a) * sum;
}

std::size_t bracket_index(const std::vector<double>& grid, double value) {
  const bool increasing = grid.back() > grid.front();
  std::vector<double>::const_iterator it;
  if (increasing) {
    it = std::upper_bound(grid.begin(), grid.end(), value);
  } else {
    it = std::upper_bound(grid.begin(), grid.end(), value, std::greater<>());
  }
  const std::size_t i = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  return std::min(i, grid.size() - 2);
}

}  // namespace

double TimeChange::operator()(double value) const {
  if (s.empty()) throw DomainError("empty time change");
  if (s.size() == 1) return inverted ? s.front() : t.front();
  if (!rate) {
    const std::size_t i = bracket_index(s, value);
    const double f = (value - s[i]) / (s[i + 1] - s[i]);
    return t[i] + f * (t[i + 1] - t[i]);
  }
  if (!inverted) {
    const std::size_t i = bracket_index(s, value);
    return t[i] + gauss_legendre(rate, s[i], value);
  }
  const std::size_t i = bracket_index(t, value);
  const double lo = std::min(s[i], s[i + 1]), hi = std::max(s[i], s[i + 1]);
  double sigma = s[i] + (value - t[i]) / (t[i + 1] - t[i]) * (s[i + 1] - s[i]);
  for (int iter = 0; iter < 30; ++iter) {
    const double residual = t[i] + gauss_legendre(rate, s[i], sigma) - value;
    const double next = std::clamp(sigma - residual / rate(sigma), lo, hi);
    const bool done = std::abs(next - sigma) <= 1e-15 * std::max(1.0, std::abs(sigma));
    sigma = next;
    if (done) break;
  }
  return sigma;
}

TimeChange TimeChange::inverse() const {
  if (rate) {
    TimeChange out = *this;
    out.inverted = !inverted;
    return out;
  }
  return {t, s, {}, false};
}

TimeChange time_change(const Trajectory& traj, int degree, TimeDirection direction) {
  const double exponent = 0.5 * (degree - 1);
  auto rate = [&](const Vector& xbar) {
    const double w2 = 1.0 - xbar.squaredNorm();
    if (!(w2 > 0)) throw DomainError("time change degenerates at boundary");
    return std::pow(w2, exponent);
  };
  TimeChange tc;
  tc.s.push_back(traj.times.front());
  tc.t.push_back(0.0);
  auto shared = std::make_shared<Trajectory>(traj);
  tc.rate = [shared, exponent](double s) {
    const double w2 = 1.0 - shared->at(s).squaredNorm();
    if (!(w2 > 0)) throw DomainError("time change degenerates at boundary");
    return std::pow(w2, exponent);
  };
  rate(traj.states.front());
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    rate(traj.states[i]);
    tc.s.push_back(traj.times[i]);
    tc.t.push_back(tc.t.back() + gauss_legendre(tc.rate, traj.times[i - 1], traj.times[i]));
  }
  return direction == TimeDirection::compact_to_original ? tc : tc.inverse();
}

// --- ball transfer ---------------------------------------------------------

BallTransfer ball_expand_bound(const Vector& xbar, double rbar) {
  if (rbar < 0) throw DomainError("radius must be non-negative");
  BallTransfer out;
  out.direction = TransferDirection::decompactify;
  out.center_norm = xbar.norm();
  out.input_radius = rbar;
  const double ybar = 1.0 - out.center_norm;
  if (!(rbar < ybar)) throw DomainError("ball intersects the boundary sphere");
  if (rbar == 0) return out;
  const double z = radial_decompactify_from_distance(ybar);
  const double outer = radial_decompactify_from_distance(ybar - rbar) - z;
  const double zin = out.center_norm - rbar;
  const double inner = z - (zin >= 0 ? radial_decompactify_from_distance(1.0 - zin) : radial_decompactify(zin));
  out.output_radius = std::max(std::abs(outer), std::abs(inner));
  return out;
}

BallTransfer ball_contract_bound(const Vector& x, double r) {
  if (r < 0) throw DomainError("radius must be non-negative");
  BallTransfer out;
  out.direction = TransferDirection::compactify;
  out.center_norm = x.norm();
  out.input_radius = r;
  if (r == 0) return out;
  const double z = out.center_norm;
  const double y = boundary_distance_of_norm(z);
  const double outer = y - boundary_distance_of_norm(z + r);
  const double inner = z - r >= 0 ? boundary_distance_of_norm(z - r) - y
                                   : radial_compactify(z) - radial_compactify(z - r);
  out.output_radius = std::max(std::abs(outer), std::abs(inner));
  return out;
}

}  // namespace grshadow
