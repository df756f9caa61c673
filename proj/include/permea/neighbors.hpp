#pragma once

#include "permea/ifs.hpp"

#include <optional>
#include <vector>

namespace permea {

// Neighbor map h = f_wi^{-1} o f_wj with ratio in [r_min, 1/r_min].
struct NeighborMap {
    Similarity map;
    Word wi, wj;
};

enum class ClosureStatus { Stabilized, Overflow };

struct NeighborClosure {
    Rat eps;
    int level = 4;
    size_t max_maps = 0;
    ClosureStatus status = ClosureStatus::Stabilized;
    std::vector<NeighborMap> maps;
    int rounds = 0;
};

// Seeds with f_i^{-1} o f_j (i != j), expands h -> f_a^{-1} o h o f_b with
// |b| <= ceil(log r_min / log r_max), keeping maps whose ratio stays within
// [r_min, 1/r_min] and whose fattened covers still meet: the overlap test is
// a conservative ball-pair refinement at the given level, so a stabilized
// result is a certified superset of the true neighbor set.
NeighborClosure neighbor_closure(const IFSSystem& ifs, const Rat& eps, int level,
                                 size_t max_maps);

struct Enclosure {
    Point center;
    Rat radius;  // certified: the enclosed cluster lies in B(center, radius)
};

enum class FiniteVerdict { CertifiedFinite, SuspectedInfinite, Unknown };

// Two views of the intersection structure. `points` holds the junctions where
// first-level pieces of K meet (each cluster of K cap h(K) pushed forward
// through the provenance word of h); `pullback` holds the raw union of
// K cap h(K) over the closure, which the cover machinery consumes.
struct IntersectionSet {
    FiniteVerdict status = FiniteVerdict::Unknown;
    std::vector<Enclosure> points;
    std::vector<Enclosure> pullback;
};

IntersectionSet intersection_points(const IFSSystem& ifs, const NeighborClosure& closure,
                                    const Rat& target_radius);

struct PairReport {
    int i = 0, j = 0;
    FiniteVerdict verdict = FiniteVerdict::Unknown;
    int clusters = 0;
    std::vector<double> extents;  // max cluster diameter per level in [lo, hi]
};

// Tracks connected survivor clusters of f_i(K) cap f_j(K) across levels.
std::vector<PairReport> pairwise_finiteness(const IFSSystem& ifs, int level_lo, int level_hi);

// Replaces an enclosure center by the exact fixed point of a short map word
// when exactly one such fixed point lies inside the enclosure.
std::optional<Point> snap_to_word_fixed_point(const IFSSystem& ifs, const Enclosure& e,
                                              int max_len);

// Largest eps from {1/2, 1/4, ..., 2^-10} whose stabilized closure has the
// same map set as the eps = 0 closure. Falls back to eps = 0 when no sweep
// value stabilizes to the same set.
std::pair<Rat, NeighborClosure> stabilized_eps(const IFSSystem& ifs, int level,
                                               size_t max_maps);

}  // namespace permea
