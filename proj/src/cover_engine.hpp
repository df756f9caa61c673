#pragma once

// Internal helpers shared by the cover and separated-family builders:
// certified distances between (optionally punctured) attractor pieces,
// curtailed ball leaves, and exact lattice index ranges.

#include "permea/covers.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace permea {
namespace detail {

// Exact comparisons of a squared quantity against a rational threshold,
// screened by doubles away from the boundary.
bool gt_exact(const Ext& lhs2, const Rat& rhs2);  // lhs2 >  rhs2
bool lt_exact(const Ext& lhs2, const Rat& rhs2);  // lhs2 <  rhs2

// Open ball removed from the attractor (K-frame coordinates).
struct Puncture {
  Point center;
  Rat radius;
};

// A = transform(K \ union of punctures).
struct PuncturedSet {
  Similarity transform;
  std::vector<Puncture> punctures;
};

// Certifies dist(A, B) > tau by branch and bound over word-ball pairs.
// Returns false when the certificate cannot be completed with leaf balls of
// radius tau/32 (which happens in particular when the inequality is false).
// deepest, when given, records the maximum word depth examined.
bool certify_set_distance(const IFSSystem& ifs, const PuncturedSet& A,
                          const PuncturedSet& B, const Rat& tau, int* deepest = nullptr);

// Certifies dist(A, {x}) > tau (same contract).
bool certify_point_distance(const IFSSystem& ifs, const PuncturedSet& A, const Point& x,
                            const Rat& tau, int* deepest = nullptr);

struct Leaf {
  Word w;
  Point c;  // ball center f_w(ifs.center)
  Rat r;    // ball radius sr(w) * ifs.radius; f_w(K) lies inside B(c, r)
};

// Curtailed ball cover of the attractor with leaf radius <= max_radius.
std::vector<Leaf> leaf_cover(const IFSSystem& ifs, const Rat& max_radius,
                             int* level_out = nullptr);

// True iff the closed ball B(c, r) lies inside the open ball B(p, rho).
bool ball_inside_open(const Point& c, const Rat& r, const Point& p, const Rat& rho);

// Lattice indices t such that the open square ((t-1)step, (t+1)step) meets
// the closed interval [lo, hi]; empty when first > second.
std::pair<int64_t, int64_t> lattice_range(const Ext& lo, const Ext& hi, const Rat& step);

// Exact fixed points of nonempty words up to max_len, pushed through words up
// to max_len: a deduplicated candidate set of exactly representable points of
// the attractor.
std::vector<Point> exact_point_candidates(const IFSSystem& ifs, int max_len);

}  // namespace detail
}  // namespace permea
