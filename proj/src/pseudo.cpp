#include "grshadow/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace grshadow {

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::standard: return "standard";
    case LawKind::nonuniform: return "nonuniform";
    case LawKind::noncompact_nonuniform: return "noncompact_nonuniform";
    case LawKind::weighted: return "weighted";
    case LawKind::noncompact_weighted: return "noncompact_weighted";
  }
  return "standard";
}

LawKind parse_law_kind(const std::string& name) {
  for (LawKind k : {LawKind::standard, LawKind::nonuniform, LawKind::noncompact_nonuniform,
                    LawKind::weighted, LawKind::noncompact_weighted}) {
    if (to_string(k) == name) return k;
  }
  throw DomainError("unknown law kind: " + name);
}

void ErrorLaw::validate() const {
  if (!(magnitude >= 0) || !std::isfinite(magnitude)) throw DomainError("law magnitude must be finite and non-negative");
  if (!(T > 0)) throw DomainError("law window T must be positive");
  if ((kind == LawKind::nonuniform || kind == LawKind::noncompact_nonuniform) && !(n >= 1)) {
    throw DomainError("nonuniform laws require n >= 1");
  }
  if (weighted() && !(C > 1)) throw DomainError("weighted laws require C > 1");
}

bool ErrorLaw::weighted() const { return kind == LawKind::weighted || kind == LawKind::noncompact_weighted; }

bool ErrorLaw::noncompact() const {
  return kind == LawKind::noncompact_nonuniform || kind == LawKind::noncompact_weighted;
}

double ErrorLaw::weight_power() const { return kind == LawKind::noncompact_weighted ? 2.5 : 1.0; }

std::string to_string(Space space) {
  switch (space) {
    case Space::euclidean: return "euclidean";
    case Space::ball: return "ball";
    case Space::chart: return "chart";
  }
  return "euclidean";
}

Space parse_space(const std::string& name) {
  for (Space s : {Space::euclidean, Space::ball, Space::chart}) {
    if (to_string(s) == name) return s;
  }
  throw DomainError("unknown space: " + name);
}

// --- Geometry ----------------------------------------------------------------

Geometry Geometry::euclidean(int dimension) {
  Geometry g;
  g.space_ = Space::euclidean;
  g.dimension_ = dimension;
  return g;
}

Geometry Geometry::ball(int dimension) {
  Geometry g;
  g.space_ = Space::ball;
  g.dimension_ = dimension;
  return g;
}

Geometry Geometry::chart(const BoundaryChart& chart) {
  Geometry g;
  g.space_ = Space::chart;
  g.dimension_ = chart.dimension();
  g.chart_ = chart;
  return g;
}

Vector Geometry::displacement(const Vector& a, const Vector& delta) const {
  if (space_ == Space::chart) return chart_->ball_difference(a, delta);
  return delta;
}

double Geometry::distance(const Vector& a, const Vector& b) const {
  return displacement(a, b - a).norm();
}

Vector Geometry::coordinate_step(const Vector& a, const Vector& v) const {
  if (space_ == Space::chart) return chart_->ball_jacobian(a).partialPivLu().solve(v);
  return v;
}

double Geometry::boundary_distance(const Vector& x) const {
  switch (space_) {
    case Space::ball: return 1.0 - x.norm();
    case Space::chart: return x[0];
    case Space::euclidean: break;
  }
  throw DomainError("boundary distance is undefined for Euclidean points");
}

double Geometry::euclid_norm(const Vector& x) const {
  switch (space_) {
    case Space::ball: return radial_decompactify_from_distance(1.0 - x.norm());
    case Space::chart: return chart_->euclid_norm(x);
    case Space::euclidean: break;
  }
  return x.norm();
}

Vector Geometry::to_euclid(const Vector& x) const {
  switch (space_) {
    case Space::ball: return theta_inv(x);
    case Space::chart: return chart_->to_euclid(x);
    case Space::euclidean: break;
  }
  return x;
}

Vector Geometry::to_ball(const Vector& x) const {
  switch (space_) {
    case Space::ball: return x;
    case Space::chart: return chart_->to_ball(x);
    case Space::euclidean: break;
  }
  return theta(x);
}

void Geometry::require_interior(const Vector& x) const {
  if (!x.allFinite()) throw DomainError("non-finite point on the orbit");
  if (space_ == Space::ball && !(x.norm() < 1.0)) throw DomainError("orbit exits the ball");
  if (space_ == Space::chart && !(x[0] > 0.0 && x[0] <= 1.0)) throw DomainError("orbit exits the ball");
}

double Geometry::noise(const Vector& x, double tol) const {
  switch (space_) {
    case Space::ball: return 10 * tol;
    case Space::chart: {
      double s = std::abs(x[0]);
      if (x.size() > 1) s = std::max({s, x.tail(x.size() - 1).cwiseAbs().maxCoeff(), 1e-9});
      return 10 * tol * s;
    }
    case Space::euclidean: break;
  }
  return 10 * tol * std::max(1.0, x.norm());
}

// --- Dynamics ----------------------------------------------------------------

Vector Dynamics::step(const Vector& x) const {
  if (kind == Kind::map) return map(x);
  return flow_map(field, 1.0, x, options);
}

Vector Dynamics::flow(double t, const Vector& x) const {
  if (kind != Kind::flow) throw DomainError("flow requested from map dynamics");
  return flow_map(field, t, x, options);
}

Trajectory Dynamics::trajectory(const Vector& x, double t0, double t1) const {
  if (kind != Kind::flow) throw DomainError("trajectory requested from map dynamics");
  return integrate(field, x, t0, t1, options);
}

namespace {

Vector jacobian_floor(const Geometry& g) {
  Vector floor = Vector::Ones(g.dimension());
  if (g.space() == Space::chart) {
    floor.setConstant(1e-3);
    floor[0] = 1e-200;
  }
  return floor;
}

}  // namespace

Matrix Dynamics::step_jacobian(const Vector& x) const {
  if (kind == Kind::map) {
    if (jacobian) return jacobian(x);
    return numeric_jacobian(map, x, 6e-6, jacobian_floor(geometry));
  }
  JacobianFn jac = jacobian;
  if (!jac) {
    const VectorField f = field;
    const Vector floor = jacobian_floor(geometry);
    jac = [f, floor](const Vector& y) { return numeric_jacobian(f, y, 6e-6, floor); };
  }
  return flow_map_with_jacobian(field, jac, 1.0, x, options).jacobian;
}

Dynamics Dynamics::time_one_map() const {
  if (kind != Kind::flow) return *this;
  Dynamics out = *this;
  out.kind = Kind::map;
  const Dynamics self = *this;
  out.map = [self](const Vector& x) { return self.step(x); };
  out.jacobian = [self](const Vector& x) { return self.step_jacobian(x); };
  out.flow_source = std::make_shared<const Dynamics>(self);
  return out;
}

Dynamics Dynamics::with_tolerance(double tol) const {
  if (kind == Kind::flow) {
    Dynamics out = *this;
    out.options.tol = tol;
    return out;
  }
  if (flow_source) return flow_source->with_tolerance(tol).time_one_map();
  return *this;
}

Dynamics map_dynamics(PointMap f, JacobianFn jacobian, Geometry geometry) {
  Dynamics d;
  d.kind = Dynamics::Kind::map;
  d.map = std::move(f);
  d.jacobian = std::move(jacobian);
  d.geometry = std::move(geometry);
  d.options.tol = 1e-15;
  return d;
}

Dynamics linear_map_dynamics(const Matrix& a) {
  return map_dynamics([a](const Vector& x) { return (a * x).eval(); }, [a](const Vector&) { return a; },
                      Geometry::euclidean(static_cast<int>(a.rows())));
}

Dynamics original_dynamics(const PolynomialField& field, IntegratorOptions options) {
  Dynamics d;
  d.kind = Dynamics::Kind::flow;
  d.field = [field](const Vector& x) { return field.eval(x); };
  d.jacobian = [field](const Vector& x) { return field.jacobian(x); };
  d.options = options;
  d.geometry = Geometry::euclidean(field.dimension());
  return d;
}

Dynamics rescaled_dynamics(const CompactifiedField& cf, IntegratorOptions options) {
  Dynamics d;
  d.kind = Dynamics::Kind::flow;
  d.field = cf.rescaled_original();
  d.options = options;
  d.geometry = Geometry::euclidean(cf.dimension());
  return d;
}

Dynamics ball_dynamics(const CompactifiedField& cf, IntegratorOptions options) {
  Dynamics d;
  d.kind = Dynamics::Kind::flow;
  d.field = cf.as_field();
  d.jacobian = [&cf](const Vector& x) { return cf.jacobian(x); };
  d.options = options;
  d.geometry = Geometry::ball(cf.dimension());
  return d;
}

Dynamics chart_dynamics(const CompactifiedField& cf, const Vector& p, IntegratorOptions options) {
  BoundaryChart chart(p);
  Dynamics d;
  d.kind = Dynamics::Kind::flow;
  d.field = chart.field(cf);
  d.jacobian = chart.field_jacobian(cf);
  options.error_floor = chart.error_floor();
  d.options = options;
  d.geometry = Geometry::chart(chart);
  return d;
}

bool jump_consistent(const Geometry& g, const Vector& next, const Vector& fx, const Vector& jump, double tol) {
  const Vector gap = (next - fx - jump).cwiseAbs();
  const Vector bound = 4 * std::numeric_limits<double>::epsilon() * next.cwiseAbs() +
                       Vector::Constant(next.size(), 10 * g.noise(fx, tol));
  return (gap.array() <= bound.array()).all();
}

// --- PseudoTrajectory ---------------------------------------------------------

Vector PseudoTrajectory::at(double t) const {
  if (states.empty()) throw DomainError("empty pseudotrajectory");
  if (states.size() == 1) return states.front();
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it != times.end() && *it == t) return states[static_cast<std::size_t>(it - times.begin())];
  if (it == times.begin() || it == times.end()) throw DomainError("time outside the sampled span");
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  const double f = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return (1 - f) * states[i - 1] + f * states[i];
}

// --- defects -----------------------------------------------------------------

namespace {

constexpr double kRelativeSlack = 1e-12;

double pointwise_allowance(const ErrorLaw& law, const Geometry& g, double min_r, double max_norm) {
  switch (law.kind) {
    case LawKind::standard: return law.magnitude;
    case LawKind::nonuniform: return law.magnitude * std::pow(min_r, law.n);
    case LawKind::noncompact_nonuniform: return law.magnitude * std::pow(std::max(max_norm, 1e-300), -law.n);
    default: break;
  }
  (void)g;
  return 0.0;
}

void require_law_space(const ErrorLaw& law, Space space) {
  if (law.noncompact() && space != Space::euclidean) {
    throw DomainError("law kind " + to_string(law.kind) + " requires Euclidean points");
  }
  if (law.kind == LawKind::nonuniform && space == Space::euclidean) {
    throw DomainError("law kind nonuniform requires ball or chart points");
  }
}

std::vector<DefectSample> map_defects(const PseudoTrajectory& pt, const Dynamics& dyn, const ErrorLaw& law) {
  const Geometry& g = dyn.geometry;
  std::vector<DefectSample> out;
  const bool use_jumps = pt.jumps.size() + 1 == pt.states.size();
  for (std::size_t k = 0; k + 1 < pt.states.size(); ++k) {
    const Vector& x = pt.states[k];
    const Vector& next = pt.states[k + 1];
    const Vector fx = dyn.step(x);
    Vector jump = next - fx;
    bool exact = false;
    if (use_jumps) {
      if (jump_consistent(g, next, fx, pt.jumps[k], dyn.options.tol)) {
        jump = pt.jumps[k];
        exact = true;
      }
    }
    DefectSample s;
    s.t = pt.times[k];
    s.defect = g.displacement(fx, jump).norm();
    if (exact) {
      s.noise = 0.0;
    } else if (!dyn.flow_source) {
      s.noise = 4 * std::numeric_limits<double>::epsilon() * std::max(fx.norm(), next.norm());
    } else {
      s.noise = g.noise(fx, dyn.options.tol);
    }
    if (!law.weighted()) {
      const Vector& at = law.next_point ? next : fx;
      const double r = law.kind == LawKind::nonuniform ? g.boundary_distance(at) : 0.0;
      const double norm = law.kind == LawKind::noncompact_nonuniform ? g.euclid_norm(at) : 0.0;
      s.allowance = pointwise_allowance(law, g, r, norm);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<DefectSample> flow_defects(const PseudoTrajectory& pt, const Dynamics& dyn, const ErrorLaw& law,
                                       const DefectOptions& options) {
  const Geometry& g = dyn.geometry;
  std::vector<DefectSample> out;
  if (pt.states.size() < 2) {
    if (!pt.states.empty()) out.push_back({pt.times.front(), 0.0, 0.0, 0.0});
    return out;
  }
  const double window = options.window.value_or(law.T);
  const double spacing = pt.times[1] - pt.times[0];
  const double h = options.tau_step.value_or(spacing);
  if (!(h > 0)) throw DomainError("tau grid spacing must be positive");
  const double t_lo = pt.times.front(), t_hi = pt.times.back();
  const double eps = 1e-9 * h;
  const bool need_r = law.kind == LawKind::nonuniform;
  const bool need_norm = law.kind == LawKind::noncompact_nonuniform;

  for (std::size_t i = 0; i < pt.states.size(); ++i) {
    const double t = pt.times[i];
    const Vector& x = pt.states[i];
    const double fwd = std::min(window, t_hi - t);
    const double bwd = std::min(window, t - t_lo);
    DefectSample s;
    s.t = t;
    double min_r = need_r ? g.boundary_distance(x) : 0.0;
    double max_norm = need_norm ? g.euclid_norm(x) : 0.0;
    double noise = g.noise(x, dyn.options.tol);
    for (int dir : {1, -1}) {
      const double reach = dir > 0 ? fwd : bwd;
      if (reach <= eps) continue;
      Trajectory traj = dyn.trajectory(x, 0.0, dir * reach);
      if (traj.exit_time) throw DomainError("flow escapes within a defect window");
      const int steps = static_cast<int>(std::floor(reach / h + 1e-9));
      for (int j = 1; j <= steps + 1; ++j) {
        double tau = std::min(j * h, reach);
        if (j == steps + 1 && reach - steps * h <= eps) break;
        const Vector phi = traj.at(dir * tau);
        // Snap to sample times to avoid interpolating Psi across jumps.
        double when = t + dir * tau;
        const double idx = (when - t_lo) / spacing;
        if (std::abs(idx - std::round(idx)) < 1e-9) when = pt.times[std::min(pt.times.size() - 1, static_cast<std::size_t>(std::llround(idx)))];
        const Vector psi = pt.at(when);
        s.defect = std::max(s.defect, g.distance(phi, psi));
        if (need_r) min_r = std::min(min_r, g.boundary_distance(phi));
        if (need_norm) max_norm = std::max(max_norm, g.euclid_norm(phi));
        noise = std::max(noise, g.noise(phi, dyn.options.tol));
      }
    }
    s.noise = noise;
    if (!law.weighted()) s.allowance = pointwise_allowance(law, g, min_r, max_norm);
    out.push_back(s);
  }
  return out;
}

}  // namespace

std::vector<DefectSample> compute_defects(const PseudoTrajectory& pt, const Dynamics& dynamics,
                                          const ErrorLaw& law, const DefectOptions& options) {
  law.validate();
  if (pt.times.size() != pt.states.size()) throw DomainError("pseudotrajectory times and states differ in length");
  for (const auto& x : pt.states) require_dimension(x, dynamics.dimension(), "pseudotrajectory sample");
  if (dynamics.geometry.space() != pt.space) {
    throw DomainError("pseudotrajectory space " + to_string(pt.space) + " does not match the dynamics (" +
                      to_string(dynamics.geometry.space()) + ")");
  }
  require_law_space(law, pt.space);
  if (pt.is_map) return map_defects(pt, dynamics, law);
  return flow_defects(pt, dynamics, law, options);
}

WeightedIntegral weighted_integral(const std::vector<DefectSample>& samples, double base, bool discrete) {
  WeightedIntegral out;
  if (samples.empty()) return out;
  const double lb = std::log(base);
  auto weight = [&](double t) { return std::exp(lb * t); };
  std::vector<double> g(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) g[i] = weight(samples[i].t) * samples[i].defect;
  if (discrete) {
    for (double v : g) out.value += v;
  } else {
    for (std::size_t i = 1; i < samples.size(); ++i) {
      out.value += 0.5 * (samples[i].t - samples[i - 1].t) * (g[i] + g[i - 1]);
    }
  }
  // The tail reads only the part of each sample above its noise level.
  for (std::size_t i = 0; i < samples.size(); ++i) {
    g[i] = weight(samples[i].t) * std::max(0.0, samples[i].defect - samples[i].noise);
  }
  const double t_end = samples.back().t;
  if (g.back() == 0.0) return out;
  double q;
  if (discrete) {
    if (samples.size() < 2 || g[g.size() - 2] == 0.0) {
      out.tail = std::numeric_limits<double>::infinity();
      return out;
    }
    q = g.back() / g[g.size() - 2];
    out.tail = q < 1 ? g.back() * q / (1 - q) : std::numeric_limits<double>::infinity();
    return out;
  }
  // Maxima over the last two units of time give the decay ratio.
  double last = 0, previous = 0;
  bool have_previous = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double age = t_end - samples[i].t;
    if (age <= 1.0 + 1e-12) {
      last = std::max(last, g[i]);
    } else if (age <= 2.0 + 1e-12) {
      previous = std::max(previous, g[i]);
      have_previous = true;
    }
  }
  if (!have_previous || previous == 0.0) {
    out.tail = std::numeric_limits<double>::infinity();
    return out;
  }
  q = last / previous;
  out.tail = q < 1 ? last * q / (1 - q) : std::numeric_limits<double>::infinity();
  return out;
}

CheckReport check_pseudo(const PseudoTrajectory& pt, const Dynamics& dynamics, const ErrorLaw& law,
                         const DefectOptions& options) {
  CheckReport report;
  report.samples = compute_defects(pt, dynamics, law, options);
  if (report.samples.empty()) {
    report.holds = true;
    report.worst_margin = law.weighted() ? law.magnitude : std::numeric_limits<double>::infinity();
    if (law.weighted()) report.integral_value = 0.0;
    return report;
  }
  if (law.weighted()) {
    const double base = std::pow(law.C, law.weight_power());
    const WeightedIntegral wi = weighted_integral(report.samples, base, pt.is_map);
    std::vector<DefectSample> noise = report.samples;
    for (auto& s : noise) s.defect = s.noise;
    const WeightedIntegral slack = weighted_integral(noise, base, pt.is_map);
    report.integral_value = wi.value + wi.tail;
    report.tail_bound = wi.tail;
    report.worst_margin = law.magnitude * (1 + kRelativeSlack) + slack.value - *report.integral_value;
    report.holds = report.worst_margin >= 0;
    double worst = -1;
    for (const auto& s : report.samples) {
      const double v = std::pow(base, s.t) * s.defect;
      if (v > worst) {
        worst = v;
        report.worst_location = s.t;
      }
    }
    return report;
  }
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : report.samples) {
    const double margin = s.allowance * (1 + kRelativeSlack) + s.noise - s.defect;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_location = s.t;
    }
  }
  report.holds = report.worst_margin >= 0;
  return report;
}

// --- generation ----------------------------------------------------------------

namespace {

Vector random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  do {
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

double jump_budget(const ErrorLaw& law, const Geometry& g, const Vector& at, int k, double offset) {
  switch (law.kind) {
    case LawKind::standard: return law.magnitude;
    case LawKind::nonuniform: return law.magnitude * std::pow(g.boundary_distance(at), law.n);
    case LawKind::noncompact_nonuniform: return law.magnitude * std::pow(std::max(g.euclid_norm(at), 1e-300), -law.n);
    case LawKind::weighted:
    case LawKind::noncompact_weighted: {
      const double base = std::pow(law.C, law.weight_power());
      return law.magnitude * 0.5 * std::pow(0.5, k) / std::pow(base, k + offset);
    }
  }
  return 0.0;
}

PseudoTrajectory gen_map(const Dynamics& dyn, const Vector& x0, int length, const ErrorLaw& law,
                         const GenOptions& options) {
  const Geometry& g = dyn.geometry;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PseudoTrajectory pt;
  pt.is_map = true;
  pt.space = g.space();
  if (g.boundary_chart()) pt.chart_point = g.boundary_chart()->point();
  pt.law = law;
  Vector x = x0;
  g.require_interior(x);
  pt.times.push_back(0.0);
  pt.states.push_back(x);
  for (int k = 0; k < length; ++k) {
    const Vector fx = dyn.step(x);
    g.require_interior(fx);
    const double budget = jump_budget(law, g, fx, k, 0.0);
    const Vector dir = random_unit(rng, g.dimension());
    // Weighted kinds keep consecutive jumps within a factor 4/3 so the tail
    // ratio read by the checker stays below one.
    const double u = law.weighted() ? 0.75 + 0.25 * unif(rng) : unif(rng);
    const double size = u * options.safety * budget;
    Vector p = g.coordinate_step(fx, size * dir);
    Vector next = fx + p;
    for (int tries = 0; tries < 200; ++tries) {
      bool ok = next.allFinite();
      if (ok && g.space() != Space::euclidean) {
        ok = g.space() == Space::ball ? next.norm() < 1.0 : (next[0] > 0.0 && next[0] <= 1.0);
      }
      if (ok) {
        const double e = g.displacement(fx, p).norm();
        double allow = budget;
        if (law.next_point && law.kind == LawKind::nonuniform) {
          allow = std::min(allow, law.magnitude * std::pow(g.boundary_distance(next), law.n));
        }
        ok = e <= allow;
      }
      if (ok) break;
      p *= 0.5;
      next = fx + p;
    }
    g.require_interior(next);
    pt.times.push_back(k + 1.0);
    pt.states.push_back(next);
    pt.jumps.push_back(p);
    x = next;
  }
  return pt;
}

PseudoTrajectory build_flow(const Dynamics& dyn, const Vector& x0, int length, const ErrorLaw& law,
                            int spu, const std::vector<Vector>& directions, const std::vector<double>& sizes,
                            const std::vector<double>& scales) {
  const Geometry& g = dyn.geometry;
  PseudoTrajectory pt;
  pt.is_map = false;
  pt.space = g.space();
  if (g.boundary_chart()) pt.chart_point = g.boundary_chart()->point();
  pt.law = law;
  Vector y = x0;
  g.require_interior(y);
  for (int k = 0; k < length; ++k) {
    Trajectory traj = dyn.trajectory(y, 0.0, 1.0);
    if (traj.exit_time) throw DomainError("orbit escapes before the requested length");
    for (int j = 0; j < spu; ++j) {
      const double s = static_cast<double>(j) / spu;
      pt.times.push_back(k + s);
      pt.states.push_back(j == 0 ? y : traj.at(s));
    }
    const Vector end = traj.final_state();
    g.require_interior(end);
    const double budget = jump_budget(law, g, end, k, 1.0 + law.T) / (law.weighted() ? 2 * law.T : 1.0);
    Vector p = g.coordinate_step(end, sizes[k] * scales[k] * budget * directions[k]);
    Vector next = end + p;
    for (int tries = 0; tries < 200; ++tries) {
      bool ok = next.allFinite();
      if (ok && g.space() == Space::ball) ok = next.norm() < 1.0;
      if (ok && g.space() == Space::chart) ok = next[0] > 0.0 && next[0] <= 1.0;
      if (ok) break;
      p *= 0.5;
      next = end + p;
    }
    y = next;
  }
  g.require_interior(y);
  pt.times.push_back(static_cast<double>(length));
  pt.states.push_back(y);
  return pt;
}

PseudoTrajectory gen_flow(const Dynamics& dyn, const Vector& x0, int length, const ErrorLaw& law,
                          const GenOptions& options) {
  const Geometry& g = dyn.geometry;
  const int spu = std::max(1, options.samples_per_unit);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> directions;
  std::vector<double> sizes;
  for (int k = 0; k < length; ++k) {
    directions.push_back(random_unit(rng, g.dimension()));
    sizes.push_back(law.weighted() ? 0.75 + 0.25 * unif(rng) : unif(rng));
  }
  std::vector<double> scales(static_cast<std::size_t>(length), options.safety);
  for (int round = 0; round < options.max_rounds; ++round) {
    PseudoTrajectory pt = build_flow(dyn, x0, length, law, spu, directions, sizes, scales);
    const CheckReport report = check_pseudo(pt, dyn, law);
    if (report.holds) return pt;
    if (law.weighted()) {
      for (double& s : scales) s *= 0.5;
      continue;
    }
    for (const auto& s : report.samples) {
      if (s.allowance * (1 + kRelativeSlack) + s.noise - s.defect >= 0) continue;
      const int lo = std::max(0, static_cast<int>(std::floor(s.t - law.T)) - 1);
      const int hi = std::min(length - 1, static_cast<int>(std::ceil(s.t + law.T)));
      for (int k = lo; k <= hi; ++k) scales[static_cast<std::size_t>(k)] *= 0.5;
    }
  }
  throw DomainError("could not generate a pseudotrajectory satisfying the law");
}

}  // namespace

PseudoTrajectory gen_pseudo(const Dynamics& dynamics, const Vector& x0, int length, const ErrorLaw& law,
                            const GenOptions& options) {
  law.validate();
  require_dimension(x0, dynamics.dimension(), "initial point");
  require_law_space(law, dynamics.geometry.space());
  if (length < 0) throw DomainError("length must be non-negative");
  if (dynamics.kind == Dynamics::Kind::map) return gen_map(dynamics, x0, length, law, options);
  return gen_flow(dynamics, x0, length, law, options);
}

}  // namespace grshadow
