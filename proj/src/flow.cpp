#include "grshadow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace grshadow {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension of order four.
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

Vector Trajectory::at(double t) const {
  const std::size_t n = times.size();
  if (n == 1) return states.front();
  const bool forward = times.back() >= times.front();
  const double lo = forward ? times.front() : times.back();
  const double hi = forward ? times.back() : times.front();
  const double slack = 1e-12 * std::max(1.0, std::abs(hi - lo));
  if (t < lo - slack || t > hi + slack) {
    throw DomainError("dense output requested outside the integrated span");
  }
  // Locate the step [times[i], times[i+1]] containing t.
  std::size_t i;
  if (forward) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  } else {
    auto it = std::upper_bound(times.begin(), times.end(), t, std::greater<>());
    i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  }
  i = std::min(i, n - 2);
  const double h = times[i + 1] - times[i];
  const double s = (t - times[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  Vector y = h00 * states[i] + h10 * h * derivatives[i] + h01 * states[i + 1] + h11 * h * derivatives[i + 1];
  if (corrections.size() + 1 == n) y += s2 * (1 - s) * (1 - s) * corrections[i];
  return y;
}

Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double t1,
                     const IntegratorOptions& options) {
  if (!(options.tol > 0)) throw DomainError("integration tolerance must be positive");
  const Eigen::Index n = x0.size();
  Vector floor = options.error_floor.size() == n ? options.error_floor : Vector::Ones(n);

  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(x0);
  Vector k1 = field(x0);
  traj.derivatives.push_back(k1);
  if (t1 == t0) return traj;
  if (!all_finite(x0) || !all_finite(k1)) throw DomainError("non-finite initial state or field value");

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  Vector y = x0;

  // Initial step from the local scale of the solution.
  auto scale_of = [&](const Vector& a, const Vector& b) {
    Vector sc(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sc[i] = options.tol * std::max({std::abs(a[i]), std::abs(b[i]), floor[i]});
      if (sc[i] == 0) sc[i] = std::numeric_limits<double>::min();
    }
    return sc;
  };
  double h;
  {
    Vector sc = scale_of(y, y);
    double d0 = (y.array() / sc.array()).abs().maxCoeff();
    double d1 = (k1.array() / sc.array()).abs().maxCoeff();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * std::max(1.0, span) : 0.01 * d0 / d1;
    h = std::min({h, span, options.max_step});
  }

  Vector k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
  std::size_t steps = 0;
  while (dir * (t1 - t) > 0) {
    if (++steps > options.max_steps) throw DomainError("integration exceeded the step budget");
    const double remaining = std::abs(t1 - t);
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    if (h < options.min_step && !last) {
      const double norm = y.norm();
      if (norm > std::sqrt(options.escape_norm)) {
        traj.exit_time = t;
        traj.escape_time = t;
        return traj;
      }
      throw DomainError("stiff or singular; undetermined");
    }
    const double hs = dir * h;
    k2 = field(y + hs * a21 * k1);
    k3 = field(y + hs * (a31 * k1 + a32 * k2));
    k4 = field(y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = field(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = field(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = field(ynew);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_norm;
    if (!all_finite(ynew) || !all_finite(k7) || !all_finite(err)) {
      err_norm = std::numeric_limits<double>::infinity();
    } else {
      Vector sc = scale_of(y, ynew);
      err_norm = (err.array() / sc.array()).abs().maxCoeff();
    }

    if (err_norm <= 1.0) {
      const Vector k1_prev = k1;
      t = last ? t1 : t + hs;
      y = ynew;
      k1 = k7;
      traj.times.push_back(t);
      traj.states.push_back(y);
      traj.derivatives.push_back(k1);
      traj.corrections.push_back(hs * (d1 * k1_prev + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7));
      const double norm = y.norm();
      if (norm > options.escape_norm) {
        traj.exit_time = t;
        // Finite-time escape: the time scale |x|/|x'| has collapsed relative
        // to the elapsed time. Exponential growth keeps it of order one.
        const double speed = k1.norm();
        const double time_scale = speed > 0 ? norm / speed : std::numeric_limits<double>::infinity();
        if (time_scale < 1e-6 * (1.0 + std::abs(t - t0))) traj.escape_time = t + dir * time_scale;
        return traj;
      }
      const double fac = err_norm == 0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      h = std::min(h * fac, options.max_step);
    } else {
      const double fac = std::isfinite(err_norm) ? std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9) : 0.1;
      h *= fac;
    }
  }
  return traj;
}

Vector flow_map(const VectorField& field, double t, const Vector& x, const IntegratorOptions& options) {
  Trajectory traj = integrate(field, x, 0.0, t, options);
  if (traj.exit_time) throw DomainError("solution escaped before the requested time");
  return traj.final_state();
}

Trajectory integrate_variational(const VectorField& field, const JacobianFn& jacobian,
                                 const Vector& x0, double t0, double t1,
                                 const IntegratorOptions& options) {
  const Eigen::Index n = x0.size();
  Vector aug(n + n * n);
  aug.head(n) = x0;
  Eigen::Map<Matrix>(aug.data() + n, n, n).setIdentity();
  VectorField augmented = [&](const Vector& z) {
    Vector out(z.size());
    Vector x = z.head(n);
    out.head(n) = field(x);
    Eigen::Map<const Matrix> phi(z.data() + n, n, n);
    Eigen::Map<Matrix>(out.data() + n, n, n) = jacobian(x) * phi;
    return out;
  };
  IntegratorOptions opts = options;
  Vector floor(n + n * n);
  floor.head(n) = options.error_floor.size() == n ? options.error_floor : Vector::Ones(n);
  floor.tail(n * n).setConstant(1.0);
  opts.error_floor = floor;
  opts.escape_norm = std::numeric_limits<double>::infinity();
  return integrate(augmented, aug, t0, t1, opts);
}

FlowWithJacobian split_variational(const Vector& augmented, Eigen::Index n) {
  return {augmented.head(n), Eigen::Map<const Matrix>(augmented.data() + n, n, n)};
}

FlowWithJacobian flow_map_with_jacobian(const VectorField& field, const JacobianFn& jacobian,
                                        double t, const Vector& x, const IntegratorOptions& options) {
  Trajectory traj = integrate_variational(field, jacobian, x, 0.0, t, options);
  if (!traj.final_state().head(x.size()).allFinite()) throw DomainError("variational integration diverged");
  return split_variational(traj.final_state(), x.size());
}

Matrix numeric_jacobian(const VectorField& field, const Vector& x, double rel_step, const Vector& floor) {
  const Eigen::Index n = x.size();
  Matrix jac(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double base = floor.size() == n ? floor[j] : 1.0;
    const double h = rel_step * std::max(std::abs(x[j]), base);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (field(xp) - field(xm)) / (xp[j] - xm[j]);
  }
  return jac;
}

std::string to_string(GrowthTag tag) {
  switch (tag) {
    case GrowthTag::bounded: return "bounded";
    case GrowthTag::grow_up: return "grow_up";
    case GrowthTag::blow_up: return "blow_up";
    case GrowthTag::undetermined: return "undetermined";
  }
  return "undetermined";
}

GrowthClass classify_growth(const Trajectory& trajectory, double horizon, double norm_threshold) {
  GrowthClass out;
  out.final_time = trajectory.t_end();
  for (const auto& s : trajectory.states) out.max_norm = std::max(out.max_norm, s.norm());
  const double t0 = trajectory.t_begin();
  const double elapsed = std::abs(trajectory.t_end() - t0);

  if (trajectory.escape_time && std::abs(*trajectory.escape_time - t0) < horizon) {
    out.tag = GrowthTag::blow_up;
    out.escape_time = trajectory.escape_time;
    out.evidence = "finite escape at t=" + std::to_string(*trajectory.escape_time);
    return out;
  }
  if (out.max_norm > norm_threshold) {
    const double cutoff = 0.9 * elapsed;
    double previous = -1.0;
    bool monotone = true;
    for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
      if (std::abs(trajectory.times[i] - t0) < cutoff) continue;
      const double norm = trajectory.states[i].norm();
      if (norm < previous * (1 - 1e-12)) monotone = false;
      previous = norm;
    }
    if (monotone && trajectory.final_state().norm() > norm_threshold) {
      out.tag = GrowthTag::grow_up;
      out.evidence = "norm " + std::to_string(trajectory.final_state().norm()) +
                     " increasing over the last tenth of the span";
    } else {
      out.tag = GrowthTag::undetermined;
      out.evidence = "norm exceeded threshold without monotone growth";
    }
    return out;
  }
  if (elapsed >= horizon * (1 - 1e-12)) {
    out.tag = GrowthTag::bounded;
    out.evidence = "max norm " + std::to_string(out.max_norm) + " below threshold";
  } else {
    out.tag = GrowthTag::undetermined;
    out.evidence = "trajectory ends before the horizon";
  }
  return out;
}

}  // namespace grshadow
