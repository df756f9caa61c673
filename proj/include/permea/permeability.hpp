#pragma once

// Witness paths in obstacle complements and the diagnostics built on them:
// corridor-restricted grid search with smoothing, detour repair with length
// accounting, exact intersection counting, the orthogonal double-cone witness,
// and the spliced-loop witness for planar finite-type attractors.

#include "permea/cells.hpp"
#include "permea/contour.hpp"
#include "permea/covers.hpp"
#include "permea/geometry.hpp"
#include "permea/ifs.hpp"
#include "permea/neighbors.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace permea {

enum class WitnessStatus { Found, NoPath, NotFound };

// Resolution-level reading of the permeability taxonomy: how much longer than
// the straight segment the witness is, and how often it touches the obstacle.
enum class VerdictHint { NullLike, FiniteLike, CountableLike, Blocked };

struct WitnessReport {
  WitnessStatus status = WitnessStatus::Found;
  PolyPath path;
  double excess = 0;  // length(path) - ||y-x|| under the chosen norm
  std::size_t intersection_components = 0;
  int level = 0;  // obstacle approximation level when the caller supplied one
  VerdictHint hint = VerdictHint::NullLike;
  bool endpoints_moved = false;  // an endpoint started inside the obstacle
  std::string provenance;
};

// Reports for one (x, y, delta) across increasing obstacle levels.
struct ProfileSeries {
  Point x, y;
  Rat delta;
  std::vector<int> levels;
  std::vector<WitnessReport> reports;
};

// Maximal path-parameter intervals whose image meets the cells. Parameters
// are global: segment index plus position in [0,1]. Exact for any polyline
// against the closed rational cells; adjacent and touching intervals merge,
// so a path sliding along a cell edge counts once.
struct IntersectionProfile {
  std::size_t components = 0;
  std::vector<std::pair<double, double>> spans;
};

IntersectionProfile count_intersections(const PolyPath& path, const CellSet& cells);

// Shortest 8-connected grid path at the cell resolution between the cells
// containing x and y, restricted to the corridor [segment xy]_margin with
// margin = max(delta, 4 * resolution), optionally clipped to a domain box.
// Steps through obstacle cells are allowed but minimized lexicographically
// before length, so the result crosses the obstacle only where every corridor
// path must; when even the optimal crossing length exceeds the margin the
// obstacle is treated as blocking and NoPath is returned. Free stretches are
// smoothed by exact shortcut tests against the cells. Endpoints inside the
// obstacle are searched from the nearest free cell and flagged.
WitnessReport witness_path(const CellSet& cells, const Point& x, const Point& y,
                           const Rat& delta, const Norm& norm,
                           const std::optional<Box2>& domain = std::nullopt);

// Replaces each maximal subpath through the cells by a detour around the
// occupied cluster, found by local grid search in a window grown on demand.
// Accounting makes the quasi-convexity budget checkable by the caller:
// length(path) <= length(input) + C * covered_in + delta is the target, and
// complete reports whether every cluster was detoured.
struct RepairReport {
  PolyPath path;
  double covered_in = 0;  // input length inside the cells
  double added = 0;       // length(path) - length(input)
  bool complete = true;
  int detours = 0;
};

RepairReport repair_path(const PolyPath& path, const CellSet& cells, double C,
                         const Rat& delta);

// Deterministic scan of the orthogonal mid-disk: candidates z with
// |z - (x+y)/2| <= delta, z - (x+y)/2 perpendicular to y - x. Returns the
// first z whose two-segment path x -> z -> y misses the cells entirely; its
// length is at most sqrt(||y-x||^2 + 4 delta^2) by construction. NotFound
// after the attempt budget.
WitnessReport cone_witness(const CellSet& cells, const Point& x, const Point& y,
                           const Rat& delta, int attempts);

// Witness for a planar finite-type attractor: picks a parallel line close to
// the segment xy whose attractor slice admits a small curtailed-piece cover,
// then splices the scaled surrounding loops of the covering pieces into the
// line. The result has exact length at most ||y-x|| + delta and touches K
// only near scaled images of the intersection points. Requires an axis-
// parallel segment and axis-aligned maps (checked); straight segments that
// certifiably miss K are returned unchanged for any direction.
WitnessReport finite_type_witness_2d(const IFSSystem& ifs,
                                     const NeighborClosure& closure,
                                     const std::vector<Point>& h_points,
                                     const CoverSequence& layers,
                                     const LoopResult& loop, const Point& x,
                                     const Point& y, const Rat& delta);

}  // namespace permea
