#include "grshadow/hyperbolic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace grshadow {

std::string to_string(ProfileCase c) { return c == ProfileCase::a ? "4a" : "4b"; }
std::string to_string(BoundKind b) { return b == BoundKind::lower ? "lower" : "upper"; }

namespace {

Vector refine_on_sphere(const CompactifiedField& cf, Vector u, bool& ok) {
  ok = false;
  const int n = cf.dimension();
  u /= u.norm();
  for (int it = 0; it < 60; ++it) {
    const Vector res = cf.boundary_eval(u);
    if (res.norm() < 1e-10) {
      ok = true;
      return u;
    }
    const BoundaryChart chart(u);
    const Matrix& b = chart.tangent_basis();
    Matrix jac(n, n - 1);
    const double h = 1e-7;
    for (int j = 0; j < n - 1; ++j) {
      Vector up = u + h * b.col(j), um = u - h * b.col(j);
      jac.col(j) = (cf.boundary_eval(up / up.norm()) - cf.boundary_eval(um / um.norm())) / (2 * h);
    }
    Vector step = jac.completeOrthogonalDecomposition().solve(-res);
    if (!step.allFinite()) return u;
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    Vector next = u + b * step;
    u = next / next.norm();
  }
  ok = cf.boundary_eval(u).norm() < 1e-10;
  return u;
}

std::vector<Vector> dedupe(std::vector<Vector> points) {
  std::vector<Vector> out;
  for (auto& p : points) {
    bool seen = false;
    for (const auto& q : out) seen = seen || (p - q).norm() < 1e-6;
    if (!seen) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Vector& a, const Vector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return a[i] > b[i];
    }
    return false;
  });
  return out;
}

}  // namespace

std::vector<Vector> boundary_fixed_points(const CompactifiedField& cf, const std::vector<Vector>& seeds) {
  std::vector<Vector> found;
  for (const auto& s : seeds) {
    require_dimension(s, cf.dimension(), "seed");
    if (s.norm() == 0) continue;
    bool ok = false;
    Vector p = refine_on_sphere(cf, s, ok);
    if (ok) found.push_back(p);
  }
  return dedupe(found);
}

std::vector<Vector> boundary_fixed_points(const CompactifiedField& cf, int density) {
  const int n = cf.dimension();
  if (n == 1) return {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  if (n > 3) throw DomainError("grid search supports N <= 3; supply seeds for higher dimensions");
  if (density < 4) throw DomainError("grid density must be at least 4");
  const double pi = std::numbers::pi;

  // Sample |T| on an angular grid; rows are polar angles (one row for N = 2).
  const int cols = n == 2 ? 4 * density : 2 * density;
  const int rows = n == 2 ? 1 : density + 1;
  auto point = [&](int i, int j) {
    const double phi = 2 * pi * j / cols;
    Vector u(n);
    if (n == 2) {
      u << std::cos(phi), std::sin(phi);
    } else {
      const double th = pi * i / density;
      u << std::sin(th) * std::cos(phi), std::sin(th) * std::sin(phi), std::cos(th);
    }
    return u;
  };
  Matrix mag(rows, cols);
  double biggest = 0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      mag(i, j) = cf.boundary_eval(point(i, j)).norm();
      biggest = std::max(biggest, mag(i, j));
    }
  }
  if (biggest < 1e-12) {
    throw DomainError("tangential boundary field vanishes identically: boundary fixed points form a continuum");
  }
  std::vector<std::pair<double, Vector>> candidates;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      bool minimum = true;
      for (int di = -1; di <= 1 && minimum; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di;
          if (ii < 0 || ii >= rows) continue;
          const int jj = (j + dj + cols) % cols;
          if (mag(ii, jj) < mag(i, j)) {
            minimum = false;
            break;
          }
        }
      }
      if (minimum) candidates.emplace_back(mag(i, j), point(i, j));
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (candidates.size() > 400) candidates.resize(400);
  std::vector<Vector> seeds;
  for (auto& c : candidates) seeds.push_back(c.second);
  return boundary_fixed_points(cf, seeds);
}

HyperbolicProfile spectral_profile(const CompactifiedField& cf, const Vector& p) {
  require_dimension(p, cf.dimension(), "boundary point");
  if (std::abs(p.norm() - 1.0) > 1e-9) throw DomainError("point is not on the boundary sphere");
  if (cf.eval(p).norm() > 1e-8) throw DomainError("point is not a fixed point of the compactified field");
  if (cf.has_half_order_terms()) {
    throw DomainError("compactified field is not differentiable at the sphere (terms of degree deg-1 present)");
  }
  HyperbolicProfile prof;
  prof.point = p;
  prof.kind = DynamicsKind::flow;
  prof.jacobian = cf.jacobian(p);

  Eigen::EigenSolver<Matrix> es(prof.jacobian);
  if (es.info() != Eigen::Success) throw DomainError("eigen-decomposition failed");
  const Eigen::VectorXcd values = es.eigenvalues();
  Eigen::MatrixXcd vectors = es.eigenvectors();
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) vectors.col(j).normalize();
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vectors);
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-8 * svd.singularValues().maxCoeff())) {
    throw DomainError("non-hyperbolic boundary point: Jacobian is not diagonalizable");
  }
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (std::abs(values[j].real()) < 1e-8) {
      throw DomainError("non-hyperbolic boundary point: eigenvalue with zero real part");
    }
  }
  Eigen::Index best = 0;
  double radial = -1;
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const double c = std::abs(p.cast<std::complex<double>>().dot(vectors.col(j)));
    if (c > radial) {
      radial = c;
      best = j;
    }
  }
  prof.transversal_ok = radial > 1e-6;
  if (!prof.transversal_ok) throw DomainError("no eigen-direction transversal to the boundary");
  Eigen::VectorXcd ell = vectors.col(best);
  // Rotate the complex phase so the radial component is real and positive.
  const std::complex<double> phase = p.cast<std::complex<double>>().dot(ell);
  ell *= std::conj(phase) / std::abs(phase);
  prof.ell = ell.real() / ell.real().norm();
  prof.mu1 = prof.mu2 = values[best].real();

  std::vector<double> stable, unstable;
  (prof.mu2 < 0 ? stable : unstable).push_back(prof.mu2);
  bool same_sign = true;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (j == best) continue;
    const double rate = values[j].real();
    prof.tangent_rates.push_back(rate);
    (rate < 0 ? stable : unstable).push_back(rate);
    if ((rate < 0) != (prof.mu2 < 0)) same_sign = false;
  }
  std::sort(prof.tangent_rates.begin(), prof.tangent_rates.end());
  prof.profile_case = same_sign ? ProfileCase::a : ProfileCase::b;
  if (!stable.empty()) {
    prof.lambda_s_min = *std::min_element(stable.begin(), stable.end());
    prof.lambda_s_max = *std::max_element(stable.begin(), stable.end());
  }
  if (!unstable.empty()) {
    prof.lambda_u_min = *std::min_element(unstable.begin(), unstable.end());
    prof.lambda_u_max = *std::max_element(unstable.begin(), unstable.end());
  }
  return prof;
}

HyperbolicProfile map_profile(const HyperbolicProfile& flow_profile) {
  if (flow_profile.kind == DynamicsKind::map) return flow_profile;
  HyperbolicProfile m = flow_profile;
  m.kind = DynamicsKind::map;
  auto ex = [](std::optional<double> v) -> std::optional<double> {
    if (!v) return v;
    return std::exp(*v);
  };
  m.mu1 = std::exp(flow_profile.mu1);
  m.mu2 = std::exp(flow_profile.mu2);
  for (double& r : m.tangent_rates) r = std::exp(r);
  m.lambda_s_min = ex(flow_profile.lambda_s_min);
  m.lambda_s_max = ex(flow_profile.lambda_s_max);
  m.lambda_u_min = ex(flow_profile.lambda_u_min);
  m.lambda_u_max = ex(flow_profile.lambda_u_max);
  return m;
}

bool ExponentWindow::admits(double candidate) const {
  if (bound_kind == BoundKind::lower) return candidate > m_bound;
  return candidate > 0 && candidate < m_bound;
}

ExponentWindow admissible_exponents(const HyperbolicProfile& profile, DynamicsKind kind,
                                    std::optional<double> m, double nbar0) {
  HyperbolicProfile prof = kind == DynamicsKind::map ? map_profile(profile) : profile;
  if (kind == DynamicsKind::flow && profile.kind == DynamicsKind::map) {
    throw DomainError("flow exponents requested from a map profile");
  }
  if (!prof.transversal_ok) throw DomainError("no eigen-direction transversal to the boundary");
  const bool contracting = kind == DynamicsKind::flow ? prof.mu2 < 0 : prof.mu2 < 1;
  if (!contracting) throw DomainError("no admissible exponent: transversal direction not contracting");
  if (!prof.lambda_s_min || !prof.lambda_s_max) throw DomainError("profile has no stable rates");
  auto ratio = [&](double num, double den) {
    if (kind == DynamicsKind::flow) return num / den;
    if (!(num > 0) || !(den > 0)) throw DomainError("map rates must be positive multipliers");
    return std::log(num) / std::log(den);
  };
  ExponentWindow w;
  if (prof.profile_case == ProfileCase::a) {
    w.bound_kind = BoundKind::lower;
    w.m_bound = ratio(*prof.lambda_s_min, prof.mu2);
    w.paper_literal_bound = kind == DynamicsKind::flow ? ratio(*prof.lambda_s_max, prof.mu2) : w.m_bound;
  } else {
    w.bound_kind = BoundKind::upper;
    w.m_bound = ratio(*prof.lambda_s_max, prof.mu1);
    w.paper_literal_bound = kind == DynamicsKind::flow ? ratio(*prof.lambda_s_min, prof.mu1) : w.m_bound;
  }
  w.m = m.value_or(w.bound_kind == BoundKind::lower ? w.m_bound + 0.5 : 0.5 * w.m_bound);
  w.m_in_window = w.admits(w.m);
  w.decompactified_exponent = 3 - 2 * w.m;
  w.nbar0 = nbar0;
  w.n0 = std::max(1.0, 2 * nbar0 - 3);
  return w;
}

}  // namespace grshadow
