#pragma once

#include "grshadow/compactify.hpp"
#include "grshadow/pseudo.hpp"
#include "grshadow/shadow.hpp"

namespace grshadow {

/// Largest spectral norm of Df(x_k) (maps) or of D Phi(tau, x_k) over
/// |tau| <= 1 at the integer-time samples (flows).
double derivative_norm_floor(const Dynamics& dynamics, const PseudoTrajectory& pt);

struct WeightedOptions {
  /// Exponent of the weight, C^{power t}; 0 takes it from the law.
  double weight_power = 0;
  bool check_law = true;
  int max_iterations = 200;
  double relative_decrease = 1e-10;
  /// tau spacing for the derivative floor of flows.
  double tau_step = 0.25;
};

/// Minimizes sum_{k <= K} C^{p k} |x_k - f^k(q)| over q (flows: x_k = Psi(k)
/// and the time-one map), by reweighted Gauss-Newton on a smoothed objective
/// followed by a search over the kinks f^k(q) = x_k. For flows the reported
/// value is the trapezoid integral of C^{p t} |Phi(t, q) - Psi(t)| on the
/// sample grid. L = (value + tail) / d with d the law magnitude.
ShadowResult weighted_shadow_solve(const Dynamics& dynamics, const PseudoTrajectory& pt, double C,
                                   const WeightedOptions& options = {});

/// Sum (maps) or trapezoid integral (flows) of C^{p t} |x(t) - y(t)| with
/// geometric tail, where y comes from q under the dynamics.
WeightedIntegral weighted_error(const Dynamics& dynamics, const PseudoTrajectory& pt, const Vector& q,
                                double base);

/// Weighted shadowing in R^N through the compactification: a Euclidean
/// pseudotrajectory of the rescaled field with a noncompact_weighted law is
/// shadowed in the boundary chart with base C^{5/2} and mapped back.
struct NoncompactWeighted {
  ShadowResult compact;
  Vector q;
  double d = 0;
  /// Integral of C^{5t/2} |Psi_bar - Phi_bar| in the ball.
  double I_B = 0;
  /// Integral of C^t |Psi(t) - Phi(alpha(t, q), q)| in R^N, both with tails.
  double I_E = 0;
  /// sup over samples of (r (2 - r))^{-3/2} C^{-3t/2}, r taken at the point of
  /// the pair closer to the sphere; the factor carrying ball errors to R^N.
  double K_transfer = 0;
  double L_E = 0;
  bool compact_law_holds = false;
  bool bound_holds = false;
};
NoncompactWeighted weighted_transfer_noncompact(const CompactifiedField& cf, const PseudoTrajectory& pt,
                                                double C, const WeightedOptions& options = {});

}  // namespace grshadow
