#pragma once

// Conservative cell covers. A CellSet is a set of closed lattice boxes
// [i*res_x,(i+1)*res_x] x [j*res_y,(j+1)*res_y] (x [k*res_z,...] in 3d).
// Rasterization marks every cell whose closed box meets the target shape, so
// a cell set is always a superset of the set it covers: an empty intersection
// of covers certifies an empty intersection of the underlying sets.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "permea/geometry.hpp"
#include "permea/rational.hpp"

namespace permea {

using CellIdx = std::array<int64_t, 3>;

struct CellSet {
  int dim = 2;
  std::array<Rat, 3> res{Rat(1), Rat(1), Rat(1)};  // per-axis side lengths
  std::vector<CellIdx> cells;                      // sorted, unique
  std::string provenance;

  static CellSet make(int dim, const Rat& r);
  static CellSet make_rect(const Rat& rx, const Rat& ry);

  void add(int64_t i, int64_t j, int64_t k = 0) { cells.push_back({i, j, k}); }
  void normalize();  // sort + unique
  bool contains(const CellIdx& c) const;
  size_t size() const { return cells.size(); }
  bool same_grid(const CellSet& o) const;

  Ext lo(const CellIdx& c, int axis) const { return Ext(Rat(c[axis]) * res[axis]); }
  Ext hi(const CellIdx& c, int axis) const { return Ext(Rat(c[axis] + 1) * res[axis]); }
  Ext diag2() const;  // squared diagonal of one cell
  Point center(const CellIdx& c) const;

  CellSet unioned(const CellSet& o) const;
  CellSet intersected(const CellSet& o) const;

  // Connected components under box adjacency (8-/26-neighborhood).
  std::vector<std::vector<size_t>> components() const;

  // Certified separation: true iff every pair of boxes (one from each set) is
  // at squared distance > d2. Cover separation implies true-set separation.
  bool separated_by(const CellSet& other, const Rat& d2) const;

  // Exact squared distance between two cells' closed boxes (grids may differ).
  static Ext box_dist2(const CellSet& A, const CellIdx& a, const CellSet& B,
                       const CellIdx& b);

  // Exact squared distance from a point to a cell's closed box.
  Ext point_dist2(const Point& p, const CellIdx& c) const;

  // True iff segment [a,b] meets the closed box of cell c (exact, d=2).
  bool segment_hits(const Point& a, const Point& b, const CellIdx& c) const;

  // All cells whose box intersects the given closed box (exact bounds).
  std::vector<CellIdx> range_query(const Point& blo, const Point& bhi) const;
};

// Mark all cells meeting the closed ball (conservative, exact boundary test).
void raster_ball(CellSet& out, const Point& center, const Rat& radius);

// Mark all cells meeting the closed axis box [lo, hi].
void raster_box(CellSet& out, const Point& blo, const Point& bhi);

// Mark all cells meeting the segment [a, b] (d=2, exact).
void raster_segment(CellSet& out, const Point& a, const Point& b);

// Conservative cover of the eps-neighborhood of a cell set (closed or open;
// both get the closed superset - open neighborhoods only shrink).
CellSet neighborhood(const CellSet& src, const Rat& eps);

// Conservative cover of the eps-neighborhood of points.
CellSet neighborhood(int dim, const Rat& res, const std::vector<Point>& pts,
                     const Rat& eps);

}  // namespace permea
