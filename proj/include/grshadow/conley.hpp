#pragma once

#include "grshadow/types.hpp"

#include <functional>
#include <vector>

namespace grshadow {

/// g_k in box coordinates: maps a point of box k to box k + 1. Box k is the
/// cube [-delta_k, delta_k]^N whose first s_dim coordinates form the s-block.
using StepMap = std::function<Vector(int k, const Vector& v)>;

struct BoxComplex {
  int s_dim = 0;
  int u_dim = 0;
  /// Half-widths delta_k, k = 0..K.
  std::vector<double> half_widths;

  int dimension() const { return s_dim + u_dim; }
};

struct ConleyOptions {
  /// Test membership only after every `compose` steps (compositions of g_k).
  int compose = 1;
  bool check_nesting = true;
  /// Upper bound on the number of grid vertices.
  std::size_t max_vertices = std::size_t{1} << 24;
};

struct ConleyResult {
  int level = 0;
  double cube_side = 0;
  /// Surviving cubes as multi-indices into the 2^level grid of box 0.
  std::vector<std::vector<int>> cubes;
  std::vector<Vector> centers;
  /// Mean of the surviving centers and their largest distance from it.
  Vector point;
  double spread = 0;
  /// Cubes kept because a vertex image was not finite.
  std::size_t undecided = 0;
  /// Every s-index of the grid holds at least one surviving cube.
  bool surface_certified = false;
  std::vector<std::size_t> survivors_per_step;
};

/// Verifies the stable/unstable nesting of consecutive boxes: images of box k
/// have s-projection inside box k + 1, and the u-faces of box k are pushed
/// beyond the u-faces of box k + 1. Throws "hyperbolic box alignment violated
/// at step k".
void check_box_nesting(const StepMap& g, const BoxComplex& boxes, int depth, int compose = 1);

/// Level-`level` cubes of box 0 whose images stay in the boxes for `depth`
/// steps. A cube survives a step when the bounding box of its propagated
/// vertices meets the next box, so the result contains every cube meeting
/// the true forward-invariant set.
ConleyResult conley_refine(const StepMap& g, const BoxComplex& boxes, int depth, int level,
                           const ConleyOptions& options = {});

}  // namespace grshadow
