#pragma once

#include "grshadow/compactify.hpp"
#include "grshadow/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace grshadow {

enum class DynamicsKind { map, flow };

/// "4a": all tangent rates share the sign of the transversal rate;
/// "4b": stable and unstable tangent directions are both present.
enum class ProfileCase { a, b };
std::string to_string(ProfileCase c);

/// Rates at a boundary fixed point. Flow profiles hold real exponents, map
/// profiles hold positive multipliers (exp of the flow exponents for the
/// time-one map).
struct HyperbolicProfile {
  Vector point;
  DynamicsKind kind = DynamicsKind::flow;
  /// Eigen-direction transversal to the sphere and its rate.
  Vector ell;
  double mu1 = 0, mu2 = 0;
  /// Real parts (flow) or moduli (map) of the tangent-space spectrum.
  std::vector<double> tangent_rates;
  /// Stable rates include the transversal rate when it is contracting.
  std::optional<double> lambda_s_min, lambda_s_max, lambda_u_min, lambda_u_max;
  ProfileCase profile_case = ProfileCase::a;
  bool transversal_ok = false;
  Matrix jacobian;
};

/// Boundary points p with (I - p p^T) X_top(p) = 0. N = 1 gives {-1, +1};
/// N = 2, 3 use a grid of `density` samples per angle followed by Newton
/// refinement on the sphere to residual < 1e-10 and deduplication within
/// 1e-6. Throws for N > 3 (use the seeded overload) and when the tangential
/// field vanishes identically.
std::vector<Vector> boundary_fixed_points(const CompactifiedField& cf, int density = 90);
std::vector<Vector> boundary_fixed_points(const CompactifiedField& cf, const std::vector<Vector>& seeds);

/// Spectral data of the compactified field at a boundary fixed point, from
/// central differences (step 1e-6) of the extended field.
HyperbolicProfile spectral_profile(const CompactifiedField& cf, const Vector& p);

/// The same profile for the time-one map: rates become exp(rate).
HyperbolicProfile map_profile(const HyperbolicProfile& flow_profile);

enum class BoundKind { lower, upper };
std::string to_string(BoundKind b);

struct ExponentWindow {
  double m_bound = 0;
  BoundKind bound_kind = BoundKind::lower;
  /// The alternative ratio obtained by swapping lambda_s_min and lambda_s_max.
  double paper_literal_bound = 0;
  double m = 0;
  bool m_in_window = false;
  /// 3 - 2m, the exponent of the envelope after decompactification.
  double decompactified_exponent = 0;
  /// Noncompact pseudotrajectory exponent 2 nbar0 - 3 (at least 1).
  double n0 = 1;
  double nbar0 = 2;

  bool admits(double candidate) const;
};

/// Window of admissible envelope exponents m.
///   case a:  m > lambda_s_min / mu2   (map: ln lambda_s_min / ln mu2)
///   case b:  m < lambda_s_max / mu1   (map: ln lambda_s_max / ln mu1)
/// When m is not given a representative (bound + 1/2, or bound / 2) is used.
ExponentWindow admissible_exponents(const HyperbolicProfile& profile, DynamicsKind kind,
                                    std::optional<double> m = std::nullopt, double nbar0 = 2.0);

}  // namespace grshadow
