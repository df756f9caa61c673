#pragma once

#include "permea/cells.hpp"
#include "permea/rational.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace permea {

// Ordered disjoint closed rational subintervals of [0,1].
struct IntervalSet {
    int level = 0;
    std::vector<std::pair<Rat, Rat>> intervals;
    Rat measure() const;
    bool contains(const Rat& x) const;
};

// Smith-Volterra-Cantor stages: F_0 = [0,1]; each interval [a,b] of F_{n-1}
// loses the open middle gap of width 2^{-2n} around its midpoint.
IntervalSet svc_level(int n);

// Middle-third Cantor stages.
IntervalSet cantor_level(int n);

// Cell cover of the union over n = 0..n_max of the boundaries of the product
// squares F_n x F_n (4 exact segments per interval pair). If the resolution
// cannot separate the level-n_max gaps, the cover is still correct but a
// warning note is appended to its provenance.
CellSet theta_squares(int n_max, const Rat& resolution);

// Cell cover of I x [t0,t1] (axis 0) or [t0,t1] x I (axis 1).
CellSet extrude(const IntervalSet& iv, int axis, const Rat& t0, const Rat& t1,
                const Rat& resolution);

// Bedford-McMullen pattern on an n x m digit grid; the doubled pattern R2
// stacks a second copy shifted up by m rows.
struct BMCPattern {
    int n = 0, m = 0;
    std::vector<std::pair<int, int>> cells;  // sorted unique, in R
    bool member(int i, int j) const;
    bool member2(int i, int j) const;  // in R2, j in 0..2m-1
    size_t count() const { return cells.size(); }
};

BMCPattern make_pattern(int n, int m, std::vector<std::pair<int, int>> cells);

// The 48 x 10 pattern R = {(2i, j) : 0 <= i < 24, j != 5i+7 (mod 10)}.
BMCPattern bmc_pattern();

struct WindowCheckResult {
    bool pass = true;
    int windows = 0;        // number of windows examined
    int fail_block = -1;    // first failing column block nu
    int fail_row = -1;      // first failing row j
};

// For every column block nu and every row j of R2, some column i in
// {4nu, 4nu+2} must contain both (i,j) and (i,j+1) in R2.
WindowCheckResult bmc_window_check(const BMCPattern& p);

// Level-l cell cover: |R|^l rectangles of size n^-l x m^-l inside [0,1]^2.
// Refuses to materialize more than 2^22 rectangles (explicit limit error).
CellSet bmc_cells(const BMCPattern& p, int level);

// Doubled-pattern obstacle for crossing experiments: the level-l cells plus a
// copy shifted up by one unit, filling [0,1] x [0,2] the way R2 doubles the
// digit grid. Crossing bounds from min_crossing_variation apply to this set.
CellSet bmc_doubled_cells(const BMCPattern& p, int level);

// Exact measure of the level-l union, |R|^l / (n m)^l, without materializing.
Rat bmc_measure(const BMCPattern& p, int level);

// Exact minimum total vertical movement of a monotone-in-x rectilinear grid
// crossing of [0,1] x [0,2] that avoids the closed level-l rectangles of the
// doubled pattern. nullopt when every crossing is blocked. The value bounds
// the vertical variation of crossings in this restricted class only.
std::optional<Rat> min_crossing_variation(const BMCPattern& p, int level);

}  // namespace permea
