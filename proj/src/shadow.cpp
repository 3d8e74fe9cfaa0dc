#include "grshadow/shadow.hpp"

#include "grshadow/report.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace grshadow {

namespace {

constexpr double kLinearizeBelow = 1e-6;

bool small_step(const Geometry& g, const Vector& x, const Vector& z) {
  switch (g.space()) {
    case Space::chart:
      if (std::abs(z[0]) >= kLinearizeBelow * std::abs(x[0])) return false;
      for (Eigen::Index i = 1; i < z.size(); ++i) {
        if (std::abs(z[i]) >= kLinearizeBelow) return false;
      }
      return true;
    case Space::ball: return z.norm() < kLinearizeBelow * std::max(1.0 - x.norm(), 1e-300);
    case Space::euclidean: break;
  }
  return z.norm() < kLinearizeBelow * std::max(1.0, x.norm());
}

// Distance to the sphere of the exact point x + z.
double radius_of(const Geometry& g, const Vector& x, const Vector& z) {
  switch (g.space()) {
    case Space::chart: return x[0] + z[0];
    case Space::ball: return 1.0 - (x + z).norm();
    case Space::euclidean: break;
  }
  return 1.0;
}

double allowance_at(const Geometry& g, double Delta, double m, double r) {
  if (g.space() == Space::euclidean) return Delta;
  return Delta * std::pow(std::max(r, 0.0), m);
}

double euclid_norm_of(const Geometry& g, const Vector& x, const Vector& z) {
  try {
    if (g.space() == Space::chart) {
      Vector y = x;
      y[0] += z[0];
      y.tail(y.size() - 1) += z.tail(z.size() - 1);
      return g.euclid_norm(y);
    }
    return g.euclid_norm(x + z);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct StepData {
  Vector fx;
  Matrix A;
  Vector e;
};

// f(x_k), Df(x_k) and the defect vector e_k = x_{k+1} - f(x_k), preferring the
// stored jump when it reproduces the stored next point.
// Jacobians are taken from `linear` when given.
std::vector<StepData> step_data(const Dynamics& f, const PseudoTrajectory& pt,
                                const std::vector<StepData>* linear = nullptr) {
  const bool use_jumps = pt.jumps.size() + 1 == pt.states.size();
  std::vector<StepData> out;
  for (std::size_t k = 0; k + 1 < pt.states.size(); ++k) {
    StepData s;
    s.fx = f.step(pt.states[k]);
    s.A = linear ? (*linear)[k].A : f.step_jacobian(pt.states[k]);
    s.e = pt.states[k + 1] - s.fx;
    if (use_jumps && jump_consistent(f.geometry, pt.states[k + 1], s.fx, pt.jumps[k], f.options.tol * 10)) {
      s.e = pt.jumps[k];
    }
    out.push_back(std::move(s));
  }
  return out;
}

Vector bracket(const Dynamics& f, const StepData& s, const Vector& x, const Vector& z) {
  if (small_step(f.geometry, x, z)) return s.A * z;
  return f.step(x + z) - s.fx;
}

struct Frame {
  Matrix E;
  Matrix E_inv;
  int s_dim = 0;
  double condition = 1;
  std::vector<double> scaled_moduli;  // |lambda| * rho, frame order
};

Frame frozen_frame(const Dynamics& f, const PseudoTrajectory& pt, const std::vector<double>& eps) {
  const int n = f.dimension();
  const std::size_t K = pt.states.size() - 1;
  Vector anchor = pt.states.back();
  if (f.geometry.space() == Space::chart) anchor[0] = 0.0;
  if (f.geometry.space() == Space::ball) anchor /= anchor.norm();
  Matrix A;
  try {
    A = f.step_jacobian(anchor);
  } catch (const DomainError&) {
    A.resize(0, 0);
  }
  if (A.size() == 0 || !A.allFinite()) A = f.step_jacobian(pt.states[K > 0 ? K - 1 : 0]);

  double log_rho = 0;
  int count = 0;
  for (std::size_t k = K > 5 ? K - 5 : 0; k < K; ++k) {
    if (eps[k] > 0 && eps[k + 1] > 0) {
      log_rho += std::log(eps[k] / eps[k + 1]);
      ++count;
    }
  }
  const double rho = count ? std::exp(log_rho / count) : 1.0;

  Eigen::EigenSolver<Matrix> es(A);
  const Eigen::VectorXcd values = es.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values[i].imag()) > 1e-12 * (1 + std::abs(values[i]))) {
      throw DomainError("complex spectrum at the boundary point: no real stable/unstable frame");
    }
  }
  const Matrix vectors = es.eigenvectors().real();
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[a].real()) < std::abs(values[b].real());
  });
  Frame fr;
  fr.E.resize(n, n);
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    fr.E.col(j) = vectors.col(src) / vectors.col(src).norm();
    const double scaled = std::abs(values[src].real()) * rho;
    fr.scaled_moduli.push_back(scaled);
    if (scaled < 1.0) ++fr.s_dim;
  }
  const Eigen::JacobiSVD<Matrix> svd(fr.E);
  fr.condition = svd.singularValues()(0) / svd.singularValues()(n - 1);
  if (!std::isfinite(fr.condition) || fr.condition > 1e10) throw DomainError("degenerate stable/unstable frame");
  fr.E_inv = fr.E.inverse();
  return fr;
}

int auto_compose(const Frame& fr, int depth) {
  int t = 1;
  for (std::size_t i = 0; i < fr.scaled_moduli.size(); ++i) {
    const double v = fr.scaled_moduli[i];
    double need = 1;
    if (v < 1) need = std::ceil(std::log(0.9) / std::log(v));
    if (v > 1) need = std::ceil(std::log(1 / 0.9) / std::log(v));
    if (std::isfinite(need)) t = std::max(t, static_cast<int>(need));
  }
  return std::clamp(t, 1, std::max(1, depth));
}

struct Polish {
  std::vector<Vector> eta;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
};

// Minimum-norm Gauss-Newton (chord) solve of
//   eta_{k+1} - G_k(eta_k) = 0,  G_k(eta) = (bracket(eps_k eta) - e_k) / eps_{k+1},
// with optional linear constraints P eta_0 = target.
Polish polish(const Dynamics& f, const PseudoTrajectory& pt, const std::vector<StepData>& data,
              const std::vector<double>& eps, std::vector<Vector> eta, const Matrix& P, const Vector& target,
              int max_iter) {
  const int n = f.dimension();
  const int K = static_cast<int>(data.size());
  const int rows = n * K + static_cast<int>(P.rows());
  const int cols = n * (K + 1);
  Matrix J = Matrix::Zero(rows, cols);
  for (int k = 0; k < K; ++k) {
    const double ratio = eps[static_cast<std::size_t>(k)] / eps[static_cast<std::size_t>(k + 1)];
    J.block(n * k, n * k, n, n) = -ratio * data[static_cast<std::size_t>(k)].A;
    J.block(n * k, n * (k + 1), n, n) = Matrix::Identity(n, n);
  }
  if (P.rows() > 0) J.block(n * K, 0, P.rows(), n) = P;
  const Eigen::LDLT<Matrix> normal((J * J.transpose()).eval());
  if (normal.info() != Eigen::Success) throw DomainError("singular shadowing system");

  Polish out;
  auto residuals = [&](const std::vector<Vector>& y) {
    Vector R(rows);
    for (int k = 0; k < K; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Vector z = eps[ks] * y[ks];
      const Vector next = (bracket(f, data[ks], pt.states[ks], z) - data[ks].e) / eps[ks + 1];
      R.segment(n * k, n) = y[ks + 1] - next;
    }
    if (P.rows() > 0) R.tail(P.rows()) = P * y[0] - target;
    return R;
  };
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_iter; ++it) {
    const Vector R = residuals(eta);
    if (!R.allFinite()) throw DomainError("shadowing iteration diverged");
    const double res = R.cwiseAbs().maxCoeff();
    out.iterations = it;
    if (res < out.residual) {
      out.residual = res;
      out.eta = eta;
    }
    // Below 1e-10 a step that fails to halve the residual has hit the integration noise.
    if (res < 1e-13 || it == max_iter || (res < 1e-10 && res > 0.5 * previous)) break;
    previous = res;
    // Chord step towards the minimum-norm solution of the linearized system.
    Vector y(cols);
    for (int k = 0; k <= K; ++k) y.segment(n * k, n) = eta[static_cast<std::size_t>(k)];
    y = J.transpose() * normal.solve(J * y - R);
    for (int k = 0; k <= K; ++k) eta[static_cast<std::size_t>(k)] = y.segment(n * k, n);
  }
  return out;
}

struct Verification {
  std::vector<StepRecord> steps;
  double closure = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_location = 0;
  double realized_Delta = 0;
};

Verification verify(const Dynamics& f, const PseudoTrajectory& pt, const std::vector<Vector>& zeta, double m,
                    double Delta, const std::vector<StepData>* linear = nullptr) {
  const Dynamics fv = f.with_tolerance(f.options.tol / 10);
  const std::vector<StepData> data = step_data(fv, pt, linear);
  const Geometry& g = f.geometry;
  const std::size_t K = data.size();
  Verification v;
  std::vector<double> closure_abs(K + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const Vector predicted = bracket(fv, data[k], pt.states[k], zeta[k]) - data[k].e;
    const Vector gap = zeta[k + 1] - predicted;
    closure_abs[k + 1] = g.displacement(pt.states[k + 1], gap).norm();
  }
  for (std::size_t k = 0; k <= K; ++k) {
    StepRecord s;
    s.t = pt.times[k];
    const double r = radius_of(g, pt.states[k], zeta[k]);
    s.allowance = allowance_at(g, Delta, m, r);
    s.error = g.displacement(pt.states[k], zeta[k]).norm();
    s.margin = s.allowance - s.error - closure_abs[k];
    if (g.space() != Space::euclidean) s.boundary_distance = r;
    s.norm = euclid_norm_of(g, pt.states[k], zeta[k]);
    const double unit = allowance_at(g, 1.0, m, r);
    if (unit > 0) v.realized_Delta = std::max(v.realized_Delta, s.error / unit);
    if (s.allowance > 0) v.closure = std::max(v.closure, closure_abs[k] / s.allowance);
    else if (closure_abs[k] > 0) v.closure = std::numeric_limits<double>::infinity();
    if (s.margin < v.worst_margin) {
      v.worst_margin = s.margin;
      v.worst_location = s.t;
    }
    v.steps.push_back(s);
  }
  return v;
}

ShadowResult invalid(ShadowResult r, const std::string& why) {
  r.valid = false;
  r.status = why;
  return r;
}

}  // namespace

ShadowResult shadow_search_map(const Dynamics& f, const PseudoTrajectory& pt, const ExponentWindow& window,
                               double m, double Delta, const ShadowOptions& options) {
  if (f.kind != Dynamics::Kind::map) throw DomainError("shadow_search_map needs map dynamics");
  if (!pt.is_map) throw DomainError("shadow_search_map needs a map pseudotrajectory");
  if (pt.states.empty()) throw DomainError("empty pseudotrajectory");
  if (!(Delta > 0) || !(m > 0)) throw DomainError("m and Delta must be positive");
  ShadowResult result;
  result.space = pt.space;
  result.m = m;
  result.Delta = Delta;
  result.certified = window.admits(m);
  result.base = pt.states;

  if (options.check_law) {
    const CheckReport law = check_pseudo(pt, f, pt.law);
    if (!law.holds) {
      result.worst_margin = law.worst_margin;
      result.worst_location = law.worst_location;
      return invalid(result, "pseudotrajectory violates its law");
    }
  }

  const Geometry& g = f.geometry;
  const std::size_t K = pt.states.size() - 1;
  std::vector<double> eps(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    g.require_interior(pt.states[k]);
    eps[k] = allowance_at(g, Delta, m, g.space() == Space::euclidean ? 1.0 : g.boundary_distance(pt.states[k]));
    if (!(eps[k] > 0)) throw DomainError("allowance underflows at step " + std::to_string(k));
  }
  const int n = f.dimension();
  if (K == 0) {
    result.q = pt.states[0];
    result.deviations = {Vector::Zero(n)};
    Verification v = verify(f, pt, result.deviations, m, Delta);
    result.steps = v.steps;
    result.worst_margin = v.worst_margin;
    result.valid = true;
    result.status = "ok";
    return result;
  }

  const std::vector<StepData> data = step_data(f, pt);

  Frame fr;
  try {
    fr = frozen_frame(f, pt, eps);
  } catch (const DomainError& e) {
    return invalid(result, e.what());
  }
  result.diagnostics.s_dim = fr.s_dim;
  result.diagnostics.u_dim = n - fr.s_dim;
  result.diagnostics.frame_condition = fr.condition;

  // Conley seed in frame coordinates c, eta = E c.
  const int depth = std::min<int>(options.depth, static_cast<int>(K));
  const int compose = options.compose > 0 ? options.compose : auto_compose(fr, depth);
  result.diagnostics.compose = compose;
  StepMap gmap = [&](int k, const Vector& c) -> Vector {
    const auto ks = static_cast<std::size_t>(k);
    const Vector z = eps[ks] * (fr.E * c);
    Vector next;
    try {
      next = (bracket(f, data[ks], pt.states[ks], z) - data[ks].e) / eps[ks + 1];
    } catch (const DomainError&) {
      return Vector::Constant(c.size(), std::numeric_limits<double>::quiet_NaN());
    }
    return fr.E_inv * next;
  };
  BoxComplex boxes;
  boxes.s_dim = fr.s_dim;
  boxes.u_dim = n - fr.s_dim;
  boxes.half_widths.assign(static_cast<std::size_t>(depth) + 1, 1.0);
  ConleyOptions copts;
  copts.compose = compose;
  ConleyResult conley;
  std::string box_failure;
  try {
    conley = conley_refine(gmap, boxes, depth, options.level, copts);
  } catch (const DomainError& e) {
    box_failure = std::string("box refinement: ") + e.what();
    conley.point = Vector::Zero(n);
  }
  result.diagnostics.conley_cubes = conley.cubes.size();
  result.diagnostics.conley_undecided = conley.undecided;
  result.diagnostics.conley_cube_side = conley.cube_side;
  result.diagnostics.surface_certified = conley.surface_certified;

  std::vector<Vector> eta(K + 1, Vector::Zero(n));
  Vector c = conley.point;
  for (int k = 0; k <= depth; ++k) {
    if (!c.allFinite() || c.cwiseAbs().maxCoeff() > 10) break;
    eta[static_cast<std::size_t>(k)] = fr.E * c;
    if (k < depth) c = gmap(k, c);
  }

  Polish pol;
  try {
    pol = polish(f, pt, data, eps, eta, Matrix(0, n), Vector(0), options.max_newton);
  } catch (const DomainError& e) {
    return invalid(result, e.what());
  }
  result.diagnostics.newton_iterations = pol.iterations;
  result.deviations.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) result.deviations[k] = eps[k] * pol.eta[k];
  result.q = pt.states[0] + result.deviations[0];

  Verification v;
  try {
    v = verify(f, pt, result.deviations, m, Delta, &data);
  } catch (const DomainError& e) {
    return invalid(result, std::string("re-verification: ") + e.what());
  }
  result.steps = v.steps;
  result.worst_margin = v.worst_margin;
  result.worst_location = v.worst_location;
  result.realized_Delta = v.realized_Delta;
  result.diagnostics.closure_residual = v.closure;
  if (!box_failure.empty()) return invalid(result, box_failure);

  if (fr.s_dim > 0) {
    const int per = std::max(1, options.surface_samples);
    const Matrix P = fr.E_inv.topRows(fr.s_dim);
    const int total = static_cast<int>(std::pow(per, fr.s_dim));
    for (int idx = 0; idx < total; ++idx) {
      Vector target(fr.s_dim);
      int rem = idx;
      for (int i = 0; i < fr.s_dim; ++i) {
        const int j = rem % per;
        rem /= per;
        target[i] = per == 1 ? 0.0 : -0.5 + static_cast<double>(j) / (per - 1);
      }
      try {
        Polish sp = polish(f, pt, data, eps, pol.eta, P, target, options.max_newton);
        std::vector<Vector> z(K + 1);
        for (std::size_t k = 0; k <= K; ++k) z[k] = eps[k] * sp.eta[k];
        const Verification sv = verify(f, pt, z, m, Delta, &data);
        result.surface_sample.push_back(pt.states[0] + z[0]);
        result.surface_valid.push_back(sv.worst_margin >= 0 && sv.closure <= options.closure_tolerance &&
                                       sp.residual < 1e-8);
      } catch (const DomainError&) {
        result.surface_sample.push_back(pt.states[0]);
        result.surface_valid.push_back(false);
      }
    }
  }

  if (!(pol.residual < 1e-8)) return invalid(result, "polish stagnated above the allowance");
  if (!(v.closure <= options.closure_tolerance)) return invalid(result, "re-verification failed: closure residual");
  if (!(v.worst_margin >= 0)) return invalid(result, "envelope violated");
  result.valid = true;
  result.status = result.certified ? "ok" : "ok (outside certified window)";
  return result;
}

ShadowResult shadow_search_flow(const Dynamics& flow, const PseudoTrajectory& pt, const ExponentWindow& window,
                                double m, double Delta, const ShadowOptions& options) {
  if (flow.kind != Dynamics::Kind::flow) throw DomainError("shadow_search_flow needs flow dynamics");
  if (pt.is_map) throw DomainError("shadow_search_flow needs a flow pseudotrajectory");
  if (pt.states.empty()) throw DomainError("empty pseudotrajectory");
  ShadowResult result;
  result.space = pt.space;
  result.m = m;
  result.Delta = Delta;
  result.certified = window.admits(m);
  if (options.check_law) {
    ErrorLaw law = pt.law;
    law.T = 1.0;
    const CheckReport report = check_pseudo(pt, flow, law);
    if (!report.holds) {
      result.worst_margin = report.worst_margin;
      result.worst_location = report.worst_location;
      return invalid(result, "pseudotrajectory violates its law");
    }
  }

  // Integer-time reduction.
  PseudoTrajectory mp;
  mp.is_map = true;
  mp.space = pt.space;
  mp.law = pt.law;
  mp.chart_point = pt.chart_point;
  const double t0 = pt.times.front();
  const int K = static_cast<int>(std::floor(pt.times.back() - t0 + 1e-9));
  for (int k = 0; k <= K; ++k) {
    mp.times.push_back(k);
    mp.states.push_back(pt.at(t0 + k));
  }
  ShadowOptions mopts = options;
  mopts.check_law = false;
  const Dynamics f = flow.time_one_map();
  ShadowResult discrete = shadow_search_map(f, mp, window, m, Delta, mopts);
  result.q = discrete.q;
  result.base = discrete.base;
  result.deviations = discrete.deviations;
  result.diagnostics = discrete.diagnostics;
  result.surface_sample = discrete.surface_sample;
  result.surface_valid = discrete.surface_valid;
  if (!discrete.valid) {
    result.steps = discrete.steps;
    result.worst_margin = discrete.worst_margin;
    result.worst_location = discrete.worst_location;
    return invalid(result, "time-one reduction: " + discrete.status);
  }

  // Continuous envelope on the sample grid.
  const Dynamics fv = flow.with_tolerance(flow.options.tol / 10);
  const Geometry& g = flow.geometry;
  JacobianFn jac = fv.jacobian;
  if (!jac) {
    const VectorField fld = fv.field;
    jac = [fld](const Vector& y) { return numeric_jacobian(fld, y); };
  }
  const int n = flow.dimension();
  struct Sample {
    double t, error, r, norm;
  };
  std::vector<Sample> samples;
  double H = 0;
  std::vector<double> window_max(static_cast<std::size_t>(std::max(K, 1)), 0.0);
  for (int k = 0; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Vector& xk = result.base[ks];
    const Vector& zk = result.deviations[ks];
    const Trajectory var = integrate_variational(fv.field, jac, xk, 0.0, 1.0, fv.options);
    std::optional<Trajectory> shifted;
    if (!small_step(g, xk, zk)) shifted = fv.trajectory(xk + zk, 0.0, 1.0);
    for (std::size_t i = 0; i < pt.times.size(); ++i) {
      const double s = pt.times[i] - t0 - k;
      if (s < -1e-12 || s > 1 + 1e-12) continue;
      if (s > 1 - 1e-12 && k + 1 < K) continue;
      const FlowWithJacobian fj = split_variational(var.at(s), n);
      Eigen::JacobiSVD<Matrix> svd(fj.jacobian);
      H = std::max(H, svd.singularValues()(0) - 1.0);
      const Vector dz = shifted ? Vector(shifted->at(s) - fj.state) : Vector(fj.jacobian * zk);
      const Vector d_psi = pt.states[i] - fj.state;
      Sample smp;
      smp.t = pt.times[i];
      smp.error = g.displacement(fj.state, dz - d_psi).norm();
      smp.r = radius_of(g, fj.state, dz);
      smp.norm = euclid_norm_of(g, fj.state, dz);
      window_max[ks] = std::max(window_max[ks], allowance_at(g, 1.0, m, smp.r));
      samples.push_back(smp);
    }
  }
  const double Dc = (1 + H) * Delta;
  result.Delta = Dc;
  result.diagnostics.flow_factor = H;
  result.worst_margin = std::numeric_limits<double>::infinity();
  for (const Sample& s : samples) {
    const int k = std::min(K - 1, static_cast<int>(std::floor(s.t - t0 + 1e-12)));
    const double unit = window_max[static_cast<std::size_t>(std::max(k, 0))];
    StepRecord rec;
    rec.t = s.t;
    rec.error = s.error;
    rec.allowance = Dc * unit;
    rec.margin = rec.allowance - rec.error;
    if (g.space() != Space::euclidean) rec.boundary_distance = s.r;
    rec.norm = s.norm;
    if (unit > 0) result.realized_Delta = std::max(result.realized_Delta, s.error / unit);
    if (rec.margin < result.worst_margin) {
      result.worst_margin = rec.margin;
      result.worst_location = rec.t;
    }
    result.steps.push_back(rec);
  }
  if (!(result.worst_margin >= 0)) return invalid(result, "continuous envelope violated");
  result.valid = true;
  result.status = result.certified ? "ok" : "ok (outside certified window)";
  return result;
}

NoncompactTransfer shadow_transfer_noncompact(const ShadowResult& result, const Geometry& geometry,
                                              const CompactifiedField& cf, double mbar) {
  if (geometry.space() == Space::euclidean) throw DomainError("transfer needs a ball or chart result");
  if (!result.valid) throw DomainError("transfer needs a valid shadowing result");
  NoncompactTransfer out;
  out.envelope_exponent = 3 - 2 * mbar;
  ShadowResult& r = out.result;
  r.space = Space::euclidean;
  r.m = mbar;
  r.certified = result.certified;
  const std::size_t K = result.base.size();
  if (K == 0) throw DomainError("empty shadowing result");
  r.q = geometry.to_euclid(result.base[0] + result.deviations[0]);

  auto rescale = [&](const Vector& x) {
    const double rr = geometry.boundary_distance(x);
    const double w2 = rr * (2 - rr);
    if (!(w2 > 0)) throw DomainError("decompactified orbit blows up before the pseudotrajectory ends");
    return std::pow(w2, cf.rescale_exponent());
  };
  double alpha = 0;
  double prev_rate = rescale(result.base[0]);
  for (std::size_t k = 0; k < K; ++k) {
    const Vector& x = result.base[k];
    const Vector& z = result.deviations[k];
    double err;
    if (geometry.space() == Space::chart) {
      err = geometry.boundary_chart()->euclid_difference(x, z).norm();
    } else {
      err = (theta_inv(x + z) - theta_inv(x)).norm();
    }
    const double norm = euclid_norm_of(geometry, x, z);
    if (!std::isfinite(norm) || !std::isfinite(err)) {
      throw DomainError("decompactified orbit blows up before the pseudotrajectory ends");
    }
    if (k > 0) {
      const double rate = rescale(x);
      alpha += 0.5 * (rate + prev_rate);
      prev_rate = rate;
    }
    out.norms.push_back(norm);
    out.errors.push_back(err);
    out.alpha_times.push_back(alpha);
  }
  double DeltaE = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double scale = std::pow(std::max(out.norms[k], 1e-300), out.envelope_exponent);
    if (scale > 0 && std::isfinite(scale)) DeltaE = std::max(DeltaE, out.errors[k] / scale);
  }
  r.Delta = DeltaE;
  r.realized_Delta = DeltaE;
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    StepRecord s;
    s.t = out.alpha_times[k];
    s.error = out.errors[k];
    s.norm = out.norms[k];
    s.allowance = DeltaE * std::pow(std::max(out.norms[k], 1e-300), out.envelope_exponent);
    s.margin = s.allowance - s.error;
    if (s.margin < r.worst_margin) {
      r.worst_margin = s.margin;
      r.worst_location = s.t;
    }
    r.steps.push_back(s);
  }
  const LinearFit fit = fit_loglog(out.norms, out.errors);
  out.measured_slope = fit.slope;
  out.slope_half_width = fit.half_width;
  out.fitted_points = fit.count;
  r.valid = std::isfinite(DeltaE);
  r.status = r.valid ? "ok" : "non-finite envelope";
  return out;
}

}  // namespace grshadow
