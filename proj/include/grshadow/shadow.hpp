#pragma once

#include "grshadow/compactify.hpp"
#include "grshadow/conley.hpp"
#include "grshadow/hyperbolic.hpp"
#include "grshadow/pseudo.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace grshadow {

struct StepRecord {
  double t = 0;
  double error = 0;
  double allowance = 0;
  double margin = 0;
  /// Distance to the sphere and Euclidean norm of the exact orbit point
  /// (NaN when undefined for the space).
  double boundary_distance = std::numeric_limits<double>::quiet_NaN();
  double norm = std::numeric_limits<double>::quiet_NaN();
};

struct ShadowDiagnostics {
  int newton_iterations = 0;
  /// Largest closure residual of the deviation recursion, relative to the
  /// allowance, after re-verification at tol/10.
  double closure_residual = 0;
  int s_dim = 0;
  int u_dim = 0;
  int compose = 1;
  std::size_t conley_cubes = 0;
  std::size_t conley_undecided = 0;
  double conley_cube_side = 0;
  bool surface_certified = false;
  /// Condition number of the frozen stable/unstable frame.
  double frame_condition = 1;
  /// Flows: H in the (1 + H) factor of the continuous envelope.
  double flow_factor = 0;
  double tail_bound = 0;
  int iterations = 0;
};

struct ShadowResult {
  bool valid = false;
  /// The exponent lies inside the admissible window.
  bool certified = false;
  std::string status;
  Space space = Space::euclidean;
  Vector q;
  bool weighted = false;
  double m = 0, Delta = 0;
  double C = 0, L = 0, d = 0;
  /// max error / r^m over the steps (nonuniform results).
  double realized_Delta = 0;
  double worst_margin = 0;
  double worst_location = 0;
  std::vector<StepRecord> steps;
  /// Pseudotrajectory points x_k and deviations f^k(q) - x_k in coordinates.
  std::vector<Vector> base;
  std::vector<Vector> deviations;
  /// Case 4b: sampled shadowing points of the s-disk, with validity.
  std::vector<Vector> surface_sample;
  std::vector<bool> surface_valid;
  ShadowDiagnostics diagnostics;
};

struct ShadowOptions {
  int level = 6;
  int depth = 30;
  /// Steps per Conley membership test; 0 picks the smallest T whose
  /// box-relative contraction and expansion are stronger than 0.9.
  int compose = 0;
  bool check_law = true;
  int max_newton = 25;
  /// Case 4b: samples per s-direction of the disk D_s.
  int surface_samples = 3;
  /// Largest accepted closure residual relative to the allowance.
  double closure_tolerance = 1e-2;
};

/// Nonuniform shadowing for maps. Works in deviation coordinates
/// zeta_k = f^k(q) - x_k scaled by the allowance Delta r_k^m, seeds with a
/// Conley refinement in a frame frozen at the boundary, and finishes with a
/// minimum-norm Gauss-Newton solve of the whole deviation sequence. The result
/// is re-verified at tol/10. An exponent outside `window` only clears
/// `certified`.
ShadowResult shadow_search_map(const Dynamics& f, const PseudoTrajectory& pt, const ExponentWindow& window,
                               double m, double Delta, const ShadowOptions& options = {});

/// Flow version: the search runs on the time-one map at integer times, then the
/// continuous envelope is checked on the sample grid with allowance
/// (1 + H) Delta max r(Phi(tau, q))^m over each unit window.
ShadowResult shadow_search_flow(const Dynamics& flow, const PseudoTrajectory& pt, const ExponentWindow& window,
                                double m, double Delta, const ShadowOptions& options = {});

/// Euclidean view of a ball or chart result.
struct NoncompactTransfer {
  ShadowResult result;
  double envelope_exponent = 0;
  double measured_slope = 0;
  double slope_half_width = 0;
  std::size_t fitted_points = 0;
  std::vector<double> norms;
  std::vector<double> errors;
  std::vector<double> alpha_times;
};
/// Errors |Psi - Phi(alpha, q)| in R^N are measured against the envelope
/// Delta_E |x|^{3 - 2 mbar}, with Delta_E the smallest constant that works;
/// measured_slope is the log-log slope of error against |x|.
NoncompactTransfer shadow_transfer_noncompact(const ShadowResult& result, const Geometry& geometry,
                                              const CompactifiedField& cf, double mbar);

}  // namespace grshadow
