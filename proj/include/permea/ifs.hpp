#pragma once

#include "permea/cells.hpp"
#include "permea/geometry.hpp"
#include "permea/rational.hpp"

#include <functional>
#include <string>
#include <vector>

namespace permea {

// Similarity map f(x) = ratio * O * x + t with O orthogonal.
// Entries live in Q[sqrt(3)] so that 30-degree rotation multiples stay exact.
// Maps built from arbitrary float angles carry exact=false; downstream
// predicates pad their tolerances when they see that flag.
struct Similarity {
    int dim = 2;
    Rat ratio = 1;
    std::array<std::array<Ext, 3>, 3> O{};  // orthogonal part, row major
    Point t;                                // translation
    bool exact = true;

    Point apply(const Point& p) const;
    Segment apply(const Segment& s) const;
};

Similarity identity_map(int dim);
// Rotation by angle_deg (counterclockwise, about the origin), then optional
// reflection across the x-axis applied first: O = Rot(angle) * Diag(1,-1).
Similarity planar_similarity(const Rat& ratio, double angle_deg, bool reflect,
                             const Point& translate);
Similarity compose(const Similarity& f, const Similarity& g);  // f after g
Similarity inverse(const Similarity& f);
// Solves f(x) = x. Throws std::domain_error when f has no unique fixed point
// (ratio 1 with identity rotation, i.e. a pure translation).
Point fixed_point(const Similarity& f);
bool same_map(const Similarity& f, const Similarity& g, const Rat& tol);

// Finite word over map indices 0..m-1 (printed 1-based).
using Word = std::vector<int>;
std::string word_to_string(const Word& w, int m);

struct IFSSystem {
    int dim = 2;
    std::vector<Similarity> maps;
    Rat r_min, r_max;
    Point center;  // bounding ball center, forward invariant:
    Rat radius;    // |f_i(center)-center| <= radius*(1-r_i) for all i
    bool exact = true;
    std::string name;

    int m() const { return static_cast<int>(maps.size()); }
    Rat diameter() const { return radius * 2; }
};

// Validates ratios in (0,1), m >= 2, and computes a certified forward
// invariant bounding ball (so the attractor lies inside it).
IFSSystem make_ifs(int dim, std::vector<Similarity> maps, std::string name = "");

Similarity compose(const IFSSystem& ifs, const Word& w);

// rho_level helper: rho for "level n" refinement = r_max^n.
Rat level_rho(const IFSSystem& ifs, int level);

// Curtailed word set Q_rho: minimal words with sr(f_w) <= rho; every member
// satisfies r_min*rho < sr(f_w) <= rho and the set is prefix free.
std::vector<Word> curtail(const IFSSystem& ifs, const Rat& rho);

// Visits each curtailed word together with its composed map; deterministic
// lexicographic order. Avoids materialising Q_rho when only a fold is needed.
void enumerate_curtailed(const IFSSystem& ifs, const Rat& rho,
                         const std::function<void(const Word&, const Similarity&)>& fn);

// Conservative cell cover of the attractor: union over Q_rho of rasterised
// image balls f_w(ball). Requires resolution <= rho * diameter.
CellSet approximate(const IFSSystem& ifs, const Rat& rho, const Rat& resolution);

}  // namespace permea
