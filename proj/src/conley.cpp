#include "grshadow/conley.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace grshadow {

namespace {

void validate(const BoxComplex& boxes, int depth) {
  if (boxes.s_dim < 0 || boxes.u_dim < 0 || boxes.dimension() < 1) throw DomainError("invalid box splitting");
  if (depth < 1) throw DomainError("depth must be at least 1");
  if (static_cast<int>(boxes.half_widths.size()) < depth + 1) {
    throw DomainError("need depth + 1 box half-widths");
  }
  for (double d : boxes.half_widths) {
    if (!(d > 0)) throw DomainError("box half-widths must be positive");
  }
}

std::vector<int> checkpoints(int depth, int compose) {
  std::vector<int> out;
  for (int k = compose; k < depth; k += compose) out.push_back(k);
  out.push_back(depth);
  return out;
}

Vector compose_from(const StepMap& g, int from, int to, Vector v) {
  for (int k = from; k < to; ++k) v = g(k, v);
  return v;
}

}  // namespace

void check_box_nesting(const StepMap& g, const BoxComplex& boxes, int depth, int compose) {
  validate(boxes, depth);
  const int n = boxes.dimension();
  const int s = boxes.s_dim;
  int from = 0;
  for (int to : checkpoints(depth, std::max(1, compose))) {
    const double d0 = boxes.half_widths[static_cast<std::size_t>(from)];
    const double d1 = boxes.half_widths[static_cast<std::size_t>(to)];
    const double slack = 1e-9 * d1;
    auto fail = [&]() {
      throw DomainError("hyperbolic box alignment violated at step " + std::to_string(from));
    };
    if (s > 0) {
      for (long corner = 0; corner < (1L << n); ++corner) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = (corner >> i & 1) ? d0 : -d0;
        const Vector w = compose_from(g, from, to, v);
        if (!w.allFinite() || w.head(s).cwiseAbs().maxCoeff() > d1 + slack) fail();
      }
    }
    for (int i = s; i < n; ++i) {
      for (double sign : {-1.0, 1.0}) {
        Vector v = Vector::Zero(n);
        v[i] = sign * d0;
        const Vector w = compose_from(g, from, to, v);
        if (!w.allFinite() || !(sign * w[i] >= d1 - slack)) fail();
      }
    }
    from = to;
  }
}

ConleyResult conley_refine(const StepMap& g, const BoxComplex& boxes, int depth, int level,
                           const ConleyOptions& options) {
  validate(boxes, depth);
  if (level < 0 || level > 30) throw DomainError("level must lie in [0, 30]");
  const int n = boxes.dimension();
  const int compose = std::max(1, options.compose);
  if (options.check_nesting) check_box_nesting(g, boxes, depth, compose);

  const long cells = 1L << level;
  const long verts_per_dim = cells + 1;
  double vertex_count = std::pow(static_cast<double>(verts_per_dim), n);
  if (vertex_count > static_cast<double>(options.max_vertices)) {
    throw DomainError("refinement grid too large: " + std::to_string(static_cast<long long>(vertex_count)) +
                      " vertices");
  }
  const std::size_t nv = static_cast<std::size_t>(vertex_count);
  const std::size_t nc = static_cast<std::size_t>(std::pow(static_cast<double>(cells), n));
  const double d0 = boxes.half_widths[0];
  const double side = 2 * d0 / static_cast<double>(cells);

  std::vector<long> vstride(static_cast<std::size_t>(n)), cstride(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    vstride[static_cast<std::size_t>(i)] = i == 0 ? 1 : vstride[static_cast<std::size_t>(i - 1)] * verts_per_dim;
    cstride[static_cast<std::size_t>(i)] = i == 0 ? 1 : cstride[static_cast<std::size_t>(i - 1)] * cells;
  }
  auto cube_index = [&](std::size_t c) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    long rem = static_cast<long>(c);
    for (int i = 0; i < n; ++i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % cells);
      rem /= cells;
    }
    return idx;
  };
  auto base_vertex = [&](std::size_t c) {
    long rem = static_cast<long>(c);
    long v = 0;
    for (int i = 0; i < n; ++i) {
      v += (rem % cells) * vstride[static_cast<std::size_t>(i)];
      rem /= cells;
    }
    return static_cast<std::size_t>(v);
  };
  std::vector<std::size_t> corner_offsets;
  for (long corner = 0; corner < (1L << n); ++corner) {
    long off = 0;
    for (int i = 0; i < n; ++i) {
      if (corner >> i & 1) off += vstride[static_cast<std::size_t>(i)];
    }
    corner_offsets.push_back(static_cast<std::size_t>(off));
  }

  Matrix images(n, static_cast<Eigen::Index>(nv));
  for (std::size_t v = 0; v < nv; ++v) {
    long rem = static_cast<long>(v);
    for (int i = 0; i < n; ++i) {
      images(i, static_cast<Eigen::Index>(v)) = -d0 + static_cast<double>(rem % verts_per_dim) * side;
      rem /= verts_per_dim;
    }
  }

  std::vector<char> alive(nc, 1), undecided(nc, 0), needed(nv, 0);
  ConleyResult result;
  result.level = level;
  result.cube_side = side;
  const std::vector<int> checks = checkpoints(depth, compose);
  std::size_t next_check = 0;
  for (int k = 0; k < depth; ++k) {
    std::fill(needed.begin(), needed.end(), 0);
    for (std::size_t c = 0; c < nc; ++c) {
      if (!alive[c]) continue;
      const std::size_t b = base_vertex(c);
      for (std::size_t off : corner_offsets) needed[b + off] = 1;
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (!needed[v]) continue;
      const auto col = static_cast<Eigen::Index>(v);
      if (!images.col(col).allFinite()) continue;
      images.col(col) = g(k, images.col(col));
    }
    if (k + 1 != checks[next_check]) continue;
    ++next_check;
    const double d1 = boxes.half_widths[static_cast<std::size_t>(k + 1)];
    std::size_t count = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (!alive[c]) continue;
      const std::size_t b = base_vertex(c);
      Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
      Vector hi = -lo;
      bool finite = true;
      for (std::size_t off : corner_offsets) {
        const auto col = images.col(static_cast<Eigen::Index>(b + off));
        if (!col.allFinite()) {
          finite = false;
          break;
        }
        lo = lo.cwiseMin(col);
        hi = hi.cwiseMax(col);
      }
      if (!finite) {
        undecided[c] = 1;
        ++count;
        continue;
      }
      const bool meets = (lo.array() <= d1).all() && (hi.array() >= -d1).all();
      if (meets) {
        ++count;
      } else {
        alive[c] = 0;
      }
    }
    result.survivors_per_step.push_back(count);
  }

  std::unordered_set<long> s_covered;
  for (std::size_t c = 0; c < nc; ++c) {
    if (!alive[c]) continue;
    auto idx = cube_index(c);
    Vector center(n);
    for (int i = 0; i < n; ++i) center[i] = -d0 + (idx[static_cast<std::size_t>(i)] + 0.5) * side;
    long key = 0;
    for (int i = 0; i < boxes.s_dim; ++i) key += idx[static_cast<std::size_t>(i)] * cstride[static_cast<std::size_t>(i)];
    s_covered.insert(key);
    result.cubes.push_back(std::move(idx));
    result.centers.push_back(center);
    if (undecided[c]) ++result.undecided;
  }
  if (result.cubes.empty()) throw DomainError("no invariant cubes: pseudotrajectory too coarse for given boxes");
  result.point = Vector::Zero(n);
  for (const auto& c : result.centers) result.point += c;
  result.point /= static_cast<double>(result.centers.size());
  for (const auto& c : result.centers) result.spread = std::max(result.spread, (c - result.point).norm());
  result.surface_certified =
      s_covered.size() == static_cast<std::size_t>(std::pow(static_cast<double>(cells), boxes.s_dim));
  return result;
}

}  // namespace grshadow
