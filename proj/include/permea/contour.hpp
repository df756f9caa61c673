#pragma once

// Outer boundary of a union of axis-aligned boxes, as an exact simple closed
// rectilinear polygon. Adjacency is that of open boxes: unions whose pieces
// touch only at corners count as disconnected and are rejected. Pockets fully
// enclosed by the union are absorbed, so the loop bounds a single
// simply-connected region containing every input box.

#include "permea/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace permea {

struct Box2 {
  Ext x0, y0, x1, y1;  // x0 < x1, y0 < y1
};

struct Loop {
  std::vector<Point> v;  // polygon vertices, implicitly closed (v.back() -> v.front())
  Ext length_upper;      // exact perimeter (all edges are axis-aligned)
  double length_est = 0;
};

// Grid snapshot of the enclosed region (union plus absorbed pockets) for
// batch point queries. contains() is exact; boundary points count as inside,
// matching point_inside on the traced loop.
struct RegionGrid {
  std::vector<Ext> xs, ys;          // cell edge coordinates, ascending
  std::size_t nx = 0, ny = 0;       // cell counts per axis
  std::vector<std::uint64_t> bits;  // row-major cell membership, packed

  bool cell(std::size_t i, std::size_t j) const {
    std::size_t id = j * nx + i;
    return (bits[id >> 6] >> (id & 63)) & 1;
  }
  bool contains(const Point& p) const;
};

// Traces the outer boundary of the union. Throws std::runtime_error when the
// union is disconnected (including corner-only contact) or when the
// compressed grid would exceed an internal size limit.
Loop outer_boundary(const std::vector<Box2>& boxes, RegionGrid* grid_out = nullptr);

// Exact point-in-polygon; points on the boundary count as inside.
bool point_inside(const Loop& loop, const Point& p);

// Points on the loop, roughly equally spaced by arc length, with exact
// coordinates (rational interpolation along the segments).
std::vector<Point> sample_loop(const Loop& loop, int count);

// Exact check that no two non-adjacent segments of the closed polygon meet.
bool loop_is_simple(const Loop& loop);

}  // namespace permea
