#pragma once

#include "grshadow/types.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace grshadow {

struct IntegratorOptions {
  /// Bound on the local error of every accepted step, measured componentwise
  /// against tol * max(|y_i|, |y_new_i|, error_floor_i).
  double tol = 1e-9;
  /// Per-component floor of the error scale; empty means all ones (mixed
  /// absolute/relative control). A zero floor gives pure relative control.
  Vector error_floor;
  double escape_norm = 1e12;
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
};

/// Accepted steps of an integration, with cubic Hermite dense output.
/// Times are strictly monotone in the direction of integration.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> derivatives;
  /// Per-step fifth coefficient of the continuous extension.
  std::vector<Vector> corrections;
  /// Set when integration stopped because |x| exceeded the escape norm.
  std::optional<double> exit_time;
  /// Set when the exit carries a finite-time escape signature (blow-up).
  std::optional<double> escape_time;

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  const Vector& final_state() const { return states.back(); }
  /// Dense output at t; t must lie within the integrated span.
  Vector at(double t) const;
};

/// Adaptive Dormand-Prince 5(4) integration of x' = F(x) from t0 to t1 (t1 may
/// be smaller than t0). Stops early at |x| > escape_norm. Throws DomainError
/// "stiff or singular; undetermined" when the step size underflows without an
/// escape.
Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double t1,
                     const IntegratorOptions& options = {});

/// Endpoint of the flow Phi(t, x). Throws DomainError when the solution
/// leaves every bounded set before time t.
Vector flow_map(const VectorField& field, double t, const Vector& x,
                const IntegratorOptions& options = {});

/// Phi(t, x) together with D_x Phi(t, x), integrating the variational
/// equation alongside the state.
struct FlowWithJacobian {
  Vector state;
  Matrix jacobian;
};
FlowWithJacobian flow_map_with_jacobian(const VectorField& field, const JacobianFn& jacobian,
                                        double t, const Vector& x,
                                        const IntegratorOptions& options = {});

/// Integrates state and variational equation; states of the returned
/// trajectory are [x; vec(D_x Phi)] (column-major), N + N*N entries.
Trajectory integrate_variational(const VectorField& field, const JacobianFn& jacobian,
                                 const Vector& x0, double t0, double t1,
                                 const IntegratorOptions& options = {});
FlowWithJacobian split_variational(const Vector& augmented, Eigen::Index n);

/// Central differences with per-component step rel_step * max(|x_i|, floor_i).
Matrix numeric_jacobian(const VectorField& field, const Vector& x, double rel_step = 6e-6,
                        const Vector& floor = {});

enum class GrowthTag { bounded, grow_up, blow_up, undetermined };
std::string to_string(GrowthTag tag);

struct GrowthClass {
  GrowthTag tag = GrowthTag::undetermined;
  std::optional<double> escape_time;
  double max_norm = 0.0;
  double final_time = 0.0;
  std::string evidence;
};

/// Finite-horizon reading of grow-up and blow-up:
///  - blow_up: finite escape detected before the horizon;
///  - grow_up: norm exceeded the threshold and was nondecreasing over the
///    last tenth of the integrated time span, without an escape signature;
///  - bounded: integrated to the horizon with norm below the threshold.
GrowthClass classify_growth(const Trajectory& trajectory, double horizon,
                            double norm_threshold = 1e6);

}  // namespace grshadow
