#pragma once

// Lattice square covers of attractors and the machinery built on them: the
// delta/k constant selection, the layered cover sequence with its surrounding
// loop, separated cover families with certificates, porosity scanning, and
// box-dimension estimation.

#include "permea/cells.hpp"
#include "permea/contour.hpp"
#include "permea/geometry.hpp"
#include "permea/ifs.hpp"
#include "permea/neighbors.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace permea {

// Open lattice squares (-eta/2, eta/2)^2 + z with z in (eta/2)Z^2 that meet a
// target set. Centers are exact lattice points.
struct SquareCover {
  Rat eta;
  std::vector<Point> centers;
  std::string provenance;
  size_t size() const { return centers.size(); }
};

// Squares meeting the closed boxes of a cell set (conservative superset of
// the squares meeting the covered set).
SquareCover grid_cover(const CellSet& cells, const Rat& eta);
// Squares meeting the exact point set / segment (open-square test, exact).
SquareCover grid_cover(const std::vector<Point>& points, const Rat& eta);
SquareCover grid_cover(const Segment& seg, const Rat& eta);

// Snaps certified-finite intersection enclosures to exact coordinates, each
// matched against fixed points of short map words and their short-word
// images. Throws when an enclosure matches no candidate or several.
std::vector<Point> exact_h_points(const IFSSystem& ifs,
                                  const std::vector<Enclosure>& enclosures,
                                  int max_len = 3);

struct DeltaK {
  Rat delta;
  int k = 1;
  Rat eps;                  // the closure fattening the bound was computed with
  Rat dist_lower;           // certified: dist(K \ (H)_delta, U h(K)) > dist_lower
  bool neighbors_empty = false;
  int refinement_level = 0;  // deepest subdivision used by the certificates
  int halvings = 0;          // delta halvings forced during certification
};

// Picks delta below 1/4 min{1, eps, min pairwise distance in H}, certifies
// the 2delta-ball implication for every closure map, and returns the least k
// whose separation inequality is certified. Throws std::runtime_error when a
// certificate still fails at the maximum refinement (message carries the
// level reached).
DeltaK select_delta_k(const IFSSystem& ifs, const NeighborClosure& closure,
                      const std::vector<Point>& h_points, const Rat& eps);
// Gate on a certified-finite intersection set; snaps its pullback enclosures.
DeltaK select_delta_k(const IFSSystem& ifs, const NeighborClosure& closure,
                      const IntersectionSet& isect, const Rat& eps);

// One layer of the cover sequence. Layer 1 is the base cover; layers n >= 2
// record the pieces refined near H and their per-piece square counts.
struct CoverLayer {
  int n = 1;
  size_t piece_count = 0;          // #P_n
  std::vector<Word> pieces;        // P_n (empty for layer 1)
  size_t square_count = 0;         // squares added by this layer
  Rat perimeter_sum;               // exact sum of their perimeters
  size_t cum_square_count = 0;
  Rat cum_perimeter;
};

struct CoverSequence {
  IFSSystem ifs;
  std::vector<Point> h_points;
  Rat delta;
  int k = 1;
  Rat eta;                   // delta * 2^-k
  int leaf_level = 0;        // curtail depth of the base ball cover
  size_t base_square_count = 0;  // #C(eta): squares meeting the attractor cover
  std::vector<std::pair<int64_t, int64_t>> base_squares;  // sorted lattice indices
  std::vector<std::pair<int64_t, int64_t>> u1_squares;    // sorted, layer 1
  SquareCover u1_cover;      // layer 1 squares with exact centers
  std::vector<CoverLayer> layers;
};

// Builds U_1..U_{n_max}: the base grid cover away from the delta-neighborhood
// of H, then per-level refinements V_i over the pieces P_n. Layer square
// counts are conservative (piece-local meet tests) and per-piece at most the
// base count, so the geometric-series length bound applies exactly.
CoverSequence cover_sequence(const IFSSystem& ifs, const std::vector<Point>& h_points,
                             const Rat& delta, int k, int n_max);
// Derives H internally (eps sweep, intersection points, exact snap).
CoverSequence cover_sequence(const IFSSystem& ifs, const Rat& delta, int k, int n_max);

struct LoopResult {
  Loop loop;                 // exact rectilinear polygon
  PolyPath path;             // the same loop as a closed path
  double length = 0;
  Ext length_upper;          // exact perimeter
  Rat length_bound;          // cover perimeter sum + H square perimeters
  int n = 1;
  Rat h_radius;              // delta^{n-1}
  std::vector<Point> contact_points;  // probe points inside the K-approximation
  size_t probe_count = 0;
  size_t region_boxes = 0;
  RegionGrid grid;           // enclosed-region snapshot for batch queries
  std::string provenance;
};

struct LoopOptions {
  int probe_count = 1000;
  int approx_level = 8;   // word depth of the reference K-approximation
  int approx_res_shift = 3;  // cell side = r_max^level / 2^shift
};

// Traces the outer boundary of U_n plus closed sup-norm squares of radius
// delta^{n-1} around H. The traced loop is simple, closed, and its exact
// length is checked against the perimeter bound. Throws when the union is
// disconnected (non-connected attractors), when a rotated piece would need
// non-axis-aligned squares, or when the grid exceeds internal limits.
LoopResult surrounding_loop(const CoverSequence& layers, const std::vector<Point>& h_points,
                            const Rat& delta, int n, const LoopOptions& opt = {});

// --- separated cover families ---

struct NagataBall {
  Point center;
  Rat radius;
  Word word;       // the piece the ball was pushed through
  int h_index = 0; // which intersection point seeded it
};

struct NagataPiece {
  Word word;  // piece f_w(K \ [H]_{c1})
};

struct SeparationCertificate {
  bool certified = false;
  Rat threshold;               // required pairwise distance (c*s)
  size_t pairs = 0;            // pairs examined
  int violating_a = -1, violating_b = -1;
  double violating_distance = 0;  // only meaningful when !certified
};

struct CoverFamily {
  Rat s;
  Rat eps;  // after the pairwise-distance cap over Z = H u h(H)
  Rat c1, c2, c;
  std::vector<NagataBall> balls;    // first family: maximal pushed balls
  std::vector<NagataPiece> pieces;  // second family: punctured pieces
  SeparationCertificate ball_cert, piece_cert;
  bool piece_diam_certified = false;
  int nagata_dim_signature = 1;  // 0 when the ball family is empty
  std::string provenance;
};

// Builds the two families over Q_{s/2} with c1 = eps*r_min/8 and c2 from the
// certified punctured-piece distances, then verifies both families
// c*s-separated (c = min(c1, c2)) with exact arithmetic. A failed pair is
// reported in the certificate rather than thrown.
CoverFamily nagata_cover(const IFSSystem& ifs, const NeighborClosure& closure,
                         const std::vector<Point>& h_points, const Rat& s);

// --- scanning and estimation ---

struct PorosityVerdict {
  bool evidence = false;   // every sampled (x, r) admitted an empty sub-ball
  bool violated = false;
  Point violated_x;
  double violated_r = 0;
  size_t samples = 0;
  size_t checks = 0;
};

// For sampled cell centers x and each radius r, searches a grid of candidate
// centers y for an empty ball B_{qr}(y) inside B_r(x). Evidence only: the
// verdict certifies the found witnesses, never porosity itself.
PorosityVerdict porosity_scan(const CellSet& cells, const Rat& q, int sample_points,
                              const std::vector<Rat>& radii);

struct BoxDimEstimate {
  double estimate = 0;
  double stderr_ = 0;
  double lo = 0, hi = 0;  // estimate -/+ 2 standard errors
  int scales = 0;
};

// Least-squares slope of log N(eps) against log(1/eps). Requires >= 4 scales
// spanning >= 2 octaves; throws on degenerate (constant) counts.
BoxDimEstimate box_dimension(const std::vector<Rat>& eps, const std::vector<size_t>& counts);

// Occupied-cell counts of the attractor at scales r_max^l, l = level_lo..
// level_hi: distinct grid cells (side = scale) hit by the depth-l piece
// anchor points f_w(center). On lattice-aligned attractors this equals the
// exact box count.
std::vector<size_t> box_counts(const IFSSystem& ifs, int level_lo, int level_hi,
                               std::vector<Rat>* eps_out = nullptr);

}  // namespace permea
