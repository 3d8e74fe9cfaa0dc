#include "grshadow/weighted.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace grshadow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

JacobianFn field_jacobian_of(const Dynamics& dyn) {
  if (dyn.jacobian) return dyn.jacobian;
  const VectorField f = dyn.field;
  Vector floor = Vector::Ones(dyn.dimension());
  if (dyn.geometry.space() == Space::chart) {
    floor.setConstant(1e-3);
    floor[0] = 1e-200;
  }
  return [f, floor](const Vector& y) { return numeric_jacobian(f, y, 6e-6, floor); };
}

double spectral_norm(const Matrix& a) { return Eigen::JacobiSVD<Matrix>(a).singularValues()(0); }

Matrix metric_jacobian(const Geometry& g, const Vector& a) {
  if (g.space() == Space::chart) return g.boundary_chart()->ball_jacobian(a);
  return Matrix::Identity(g.dimension(), g.dimension());
}

double weight_power_of(const PseudoTrajectory& pt, const WeightedOptions& options) {
  return options.weight_power > 0 ? options.weight_power : pt.law.weight_power();
}

// Discrete problem: targets x_k at integer times, weights base^{k - K}.
struct Objective {
  const Dynamics& f;
  const std::vector<Vector>& x;
  std::vector<double> w;

  struct Eval {
    double value = 0;
    std::vector<Vector> r;   // metric residuals
    std::vector<Matrix> G;   // d r_k / d q
  };

  Eval eval(const Vector& q, bool with_jacobian) const {
    Eval e;
    const Geometry& g = f.geometry;
    const int n = f.dimension();
    Vector y = q;
    Matrix J = Matrix::Identity(n, n);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k > 0) {
        if (with_jacobian) J = f.step_jacobian(y) * J;
        y = f.step(y);
      }
      const Vector r = g.displacement(x[k], y - x[k]);
      e.value += w[k] * r.norm();
      e.r.push_back(r);
      if (with_jacobian) e.G.push_back(metric_jacobian(g, x[k]) * J);
    }
    return e;
  }

  double smoothed(const Eval& e, double s) const {
    double v = 0;
    for (std::size_t k = 0; k < e.r.size(); ++k) v += w[k] * std::sqrt(e.r[k].squaredNorm() + s * s);
    return v;
  }
};

struct Minimum {
  Vector q;
  double value = kInf;
  int iterations = 0;
};

Minimum minimize(const Objective& obj, const Vector& q0, const WeightedOptions& options) {
  const int n = obj.f.dimension();
  Minimum best;
  best.q = q0;
  Objective::Eval cur = obj.eval(q0, true);
  best.value = cur.value;
  double scale = 0;
  for (const auto& r : cur.r) scale = std::max(scale, r.norm());
  if (scale == 0) return best;
  double s = scale;
  const double s_min = scale * 1e-12;
  Vector q = q0;
  double previous = cur.value;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Matrix H = Matrix::Zero(n, n);
    Vector grad = Vector::Zero(n);
    for (std::size_t k = 0; k < cur.r.size(); ++k) {
      const double a = obj.w[k] / std::sqrt(cur.r[k].squaredNorm() + s * s);
      H += a * cur.G[k].transpose() * cur.G[k];
      grad += a * cur.G[k].transpose() * cur.r[k];
    }
    H.diagonal().array() += 1e-14 * std::max(H.diagonal().maxCoeff(), 1e-300);
    const Vector step = -H.ldlt().solve(grad);
    const double phi = obj.smoothed(cur, s);
    double t = 1;
    Objective::Eval next;
    bool accepted = false;
    for (int ls = 0; ls < 40 && step.allFinite(); ++ls, t *= 0.5) {
      try {
        next = obj.eval(q + t * step, false);
      } catch (const DomainError&) {
        continue;
      }
      if (obj.smoothed(next, s) <= phi) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      q += t * step;
      cur = obj.eval(q, true);
      if (cur.value < best.value) {
        best.value = cur.value;
        best.q = q;
      }
    }
    const bool smoothing_done = s <= s_min;
    s = std::max(s * 0.1, s_min);
    if (smoothing_done) {
      const double decrease = previous - cur.value;
      if (!accepted || decrease <= options.relative_decrease * std::max(previous, 1e-300)) break;
    }
    previous = cur.value;
  }
  best.iterations = it + 1;
  return best;
}

// Newton solve of f^k(q) = x_k from q.
bool hit_kink(const Objective& obj, std::size_t k, Vector& q) {
  const int n = obj.f.dimension();
  for (int it = 0; it < 40; ++it) {
    Vector y = q;
    Matrix J = Matrix::Identity(n, n);
    for (std::size_t j = 0; j < k; ++j) {
      J = obj.f.step_jacobian(y) * J;
      y = obj.f.step(y);
    }
    const Vector r = y - obj.x[k];
    if (r.cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon() * obj.x[k].cwiseAbs().maxCoeff()) {
      return true;
    }
    const Vector dq = J.partialPivLu().solve(r);
    if (!dq.allFinite()) return false;
    q -= dq;
    if (dq.norm() <= 1e-16 * std::max(q.norm(), 1e-300)) return true;
  }
  return false;
}

void snap_to_kinks(const Objective& obj, Minimum& best) {
  for (std::size_t k = 0; k < obj.x.size(); ++k) {
    Vector q = best.q;
    try {
      if (!hit_kink(obj, k, q)) continue;
      const double v = obj.eval(q, false).value;
      if (v < best.value) {
        best.value = v;
        best.q = q;
      }
    } catch (const DomainError&) {
    }
  }
}

// Trapezoid (or unit) weights attached to each sample.
std::vector<double> sample_mass(const std::vector<double>& t, bool discrete) {
  std::vector<double> h(t.size(), 1.0);
  if (discrete || t.size() < 2) return h;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double left = i > 0 ? t[i] - t[i - 1] : 0.0;
    const double right = i + 1 < t.size() ? t[i + 1] - t[i] : 0.0;
    h[i] = 0.5 * (left + right);
  }
  return h;
}

std::vector<DefectSample> error_samples(const Dynamics& dyn, const PseudoTrajectory& pt, const Vector& q) {
  const Geometry& g = dyn.geometry;
  std::vector<DefectSample> out;
  const double t0 = pt.times.front();
  if (pt.is_map) {
    Vector y = q;
    for (std::size_t k = 0; k < pt.states.size(); ++k) {
      if (k > 0) y = dyn.step(y);
      out.push_back({pt.times[k] - t0, g.displacement(pt.states[k], y - pt.states[k]).norm(), 0, 0});
    }
    return out;
  }
  const Dynamics fine = dyn.with_tolerance(dyn.options.tol / 10);
  const Trajectory traj = fine.trajectory(q, t0, pt.times.back());
  if (traj.exit_time) throw DomainError("shadowing orbit escapes before the pseudotrajectory ends");
  for (std::size_t i = 0; i < pt.states.size(); ++i) {
    const Vector y = traj.at(pt.times[i]);
    out.push_back({pt.times[i] - t0, g.displacement(pt.states[i], y - pt.states[i]).norm(), 0,
                   g.noise(y, dyn.options.tol)});
  }
  return out;
}

}  // namespace

double derivative_norm_floor(const Dynamics& dyn, const PseudoTrajectory& pt) {
  if (pt.states.empty()) throw DomainError("empty pseudotrajectory");
  double out = 0;
  if (dyn.kind == Dynamics::Kind::map) {
    for (const auto& x : pt.states) out = std::max(out, spectral_norm(dyn.step_jacobian(x)));
    return out;
  }
  const JacobianFn jac = field_jacobian_of(dyn);
  const int n = dyn.dimension();
  const double t0 = pt.times.front();
  const int K = static_cast<int>(std::floor(pt.times.back() - t0 + 1e-9));
  for (int k = 0; k <= K; ++k) {
    const Vector x = pt.at(t0 + k);
    for (double end : {1.0, -1.0}) {
      const Trajectory var = integrate_variational(dyn.field, jac, x, 0.0, end, dyn.options);
      if (var.exit_time) throw DomainError("orbit escapes within a unit of time");
      for (double tau = 0.25; tau <= 1.0 + 1e-12; tau += 0.25) {
        out = std::max(out, spectral_norm(split_variational(var.at(end * tau), n).jacobian));
      }
    }
  }
  return out;
}

WeightedIntegral weighted_error(const Dynamics& dyn, const PseudoTrajectory& pt, const Vector& q, double base) {
  return weighted_integral(error_samples(dyn, pt, q), base, pt.is_map);
}

ShadowResult weighted_shadow_solve(const Dynamics& dyn, const PseudoTrajectory& pt, double C,
                                   const WeightedOptions& options) {
  if (pt.states.empty()) throw DomainError("empty pseudotrajectory");
  if (!pt.law.weighted()) throw DomainError("weighted solver needs a weighted law");
  if (pt.is_map != (dyn.kind == Dynamics::Kind::map)) throw DomainError("pseudotrajectory and dynamics kinds differ");
  if (!(C > 0)) throw DomainError("weight base must be positive");
  const double p = weight_power_of(pt, options);
  const double base = std::pow(C, p);
  ShadowResult result;
  result.weighted = true;
  result.space = pt.space;
  result.C = C;
  result.d = pt.law.magnitude;
  result.base = pt.states;

  const double floor = derivative_norm_floor(dyn, pt);
  if (base < floor * (1 - 1e-12)) {
    throw DomainError("weight base below derivative-norm floor: C^p = " + std::to_string(base) +
                      " < " + std::to_string(floor));
  }
  if (options.check_law) {
    const CheckReport law = check_pseudo(pt, dyn, pt.law);
    if (!law.holds) {
      result.worst_margin = law.worst_margin;
      result.worst_location = law.worst_location;
      result.status = "pseudotrajectory violates its law";
      return result;
    }
  }

  // Integer-time reduction.
  const Dynamics f = dyn.kind == Dynamics::Kind::map ? dyn : dyn.time_one_map();
  std::vector<Vector> targets;
  const double t0 = pt.times.front();
  const int K = pt.is_map ? static_cast<int>(pt.states.size()) - 1
                          : static_cast<int>(std::floor(pt.times.back() - t0 + 1e-9));
  for (int k = 0; k <= K; ++k) targets.push_back(pt.is_map ? pt.states[static_cast<std::size_t>(k)] : pt.at(t0 + k));
  Objective obj{f, targets, {}};
  for (int k = 0; k <= K; ++k) obj.w.push_back(std::exp((k - K) * std::log(base)));

  Minimum best = minimize(obj, targets[0], options);
  snap_to_kinks(obj, best);
  result.q = best.q;
  result.diagnostics.iterations = best.iterations;

  const std::vector<DefectSample> errors = error_samples(dyn, pt, result.q);
  const WeightedIntegral wi = weighted_integral(errors, base, pt.is_map);
  result.diagnostics.tail_bound = wi.tail;
  const double total = wi.value + wi.tail;
  if (!std::isfinite(total)) {
    result.status = "objective divergence: errors not summable under the weight";
    return result;
  }
  result.L = result.d > 0 ? total / result.d : 0.0;

  std::vector<double> ts;
  for (const auto& e : errors) ts.push_back(e.t);
  const std::vector<double> mass = sample_mass(ts, pt.is_map);
  result.worst_margin = kInf;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    StepRecord s;
    s.t = pt.times[i];
    s.error = errors[i].defect;
    s.allowance = mass[i] > 0 ? total / (mass[i] * std::pow(base, errors[i].t)) : kInf;
    s.margin = s.allowance - s.error;
    if (s.margin < result.worst_margin) {
      result.worst_margin = s.margin;
      result.worst_location = s.t;
    }
    result.steps.push_back(s);
    result.deviations.push_back(Vector::Constant(dyn.dimension(), s.error));
  }
  result.valid = true;
  result.certified = true;
  result.status = "ok";
  return result;
}

NoncompactWeighted weighted_transfer_noncompact(const CompactifiedField& cf, const PseudoTrajectory& pt, double C,
                                                const WeightedOptions& options) {
  if (pt.is_map || pt.space != Space::euclidean) throw DomainError("transfer needs a Euclidean flow pseudotrajectory");
  if (pt.law.kind != LawKind::noncompact_weighted) throw DomainError("transfer needs a noncompact weighted law");
  if (pt.states.empty()) throw DomainError("empty pseudotrajectory");
  const Dynamics euclid = rescaled_dynamics(cf);
  if (options.check_law && !check_pseudo(pt, euclid, pt.law).holds) {
    throw DomainError("pseudotrajectory violates its law");
  }
  Vector p = pt.chart_point;
  if (p.size() != cf.dimension()) {
    p = pt.states.back();
    if (p.norm() == 0) throw DomainError("cannot place a boundary chart at the origin");
  }
  p /= p.norm();
  const Dynamics compact_dyn = chart_dynamics(cf, p, euclid.options);
  const BoundaryChart& chart = *compact_dyn.geometry.boundary_chart();

  NoncompactWeighted out;
  out.d = pt.law.magnitude;
  const double Cb = std::pow(C, 2.5);
  PseudoTrajectory cpt;
  cpt.is_map = false;
  cpt.space = Space::chart;
  cpt.chart_point = p;
  cpt.law = pt.law;
  cpt.law.kind = LawKind::weighted;
  cpt.law.C = Cb;
  cpt.times = pt.times;
  for (const auto& x : pt.states) cpt.states.push_back(chart.from_euclid(x));
  out.compact_law_holds = check_pseudo(cpt, compact_dyn, cpt.law).holds;

  WeightedOptions copt = options;
  copt.weight_power = 1;
  copt.check_law = false;
  out.compact = weighted_shadow_solve(compact_dyn, cpt, Cb, copt);
  if (!out.compact.valid) throw DomainError("compactified weighted solve failed: " + out.compact.status);
  out.q = chart.to_euclid(out.compact.q);

  const std::vector<DefectSample> ball = error_samples(compact_dyn, cpt, out.compact.q);
  const std::vector<DefectSample> flat = error_samples(euclid, pt, out.q);
  const Trajectory shadow = compact_dyn.with_tolerance(compact_dyn.options.tol / 10)
                                .trajectory(out.compact.q, pt.times.front(), pt.times.back());
  for (std::size_t i = 0; i < cpt.states.size(); ++i) {
    const double r = std::min(cpt.states[i][0], shadow.at(pt.times[i])[0]);
    const double w2 = r * (2 - r);
    const double k = std::pow(w2, -1.5) * std::pow(C, -1.5 * ball[i].t);
    out.K_transfer = std::max(out.K_transfer, k);
  }
  const WeightedIntegral ib = weighted_integral(ball, Cb, false);
  const WeightedIntegral ie = weighted_integral(flat, C, false);
  out.I_B = ib.value + ib.tail;
  out.I_E = ie.value + ie.tail;
  out.L_E = out.d > 0 ? out.I_E / out.d : 0.0;
  out.bound_holds = out.I_E <= out.K_transfer * out.I_B * (1 + 1e-9) + 1e-300;
  return out;
}

}  // namespace grshadow
