// Grid square covers, the delta/k selection, iterated cover layers with exact
// perimeter accounting, and surrounding loops. The certified-distance engine
// shared with the separated-family builder lives here too.

#include "permea/covers.hpp"

#include "cover_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace permea {
namespace detail {

bool gt_exact(const Ext& lhs2, const Rat& rhs2) {
    double l = lhs2.to_double(), r = to_double(rhs2);
    double m = 1e-9 * (std::fabs(l) + std::fabs(r) + 1e-30);
    if (l > r + m) return true;
    if (l < r - m) return false;
    return lhs2 > Ext(rhs2);
}

bool lt_exact(const Ext& lhs2, const Rat& rhs2) {
    double l = lhs2.to_double(), r = to_double(rhs2);
    double m = 1e-9 * (std::fabs(l) + std::fabs(r) + 1e-30);
    if (l < r - m) return true;
    if (l > r + m) return false;
    return lhs2 < Ext(rhs2);
}

bool ball_inside_open(const Point& c, const Rat& r, const Point& p, const Rat& rho) {
    if (r >= rho) return false;
    Rat t = rho - r;
    return lt_exact(dist2(c, p), t * t);
}

std::pair<int64_t, int64_t> lattice_range(const Ext& lo, const Ext& hi, const Rat& step) {
    BigInt tmin = floor_div(lo - Ext(step), step) + 1;
    BigInt tmax = -floor_div(Ext(0) - (hi + Ext(step)), step) - 1;
    return {to_long(tmin), to_long(tmax)};
}

std::vector<Leaf> leaf_cover(const IFSSystem& ifs, const Rat& max_radius, int* level_out) {
    if (max_radius <= 0) throw std::invalid_argument("leaf_cover: radius must be positive");
    std::vector<Leaf> out;
    int deepest = 0;
    Rat rho = max_radius / ifs.radius;
    if (rho >= 1) {
        out.push_back({Word{}, ifs.center, ifs.radius});
    } else {
        enumerate_curtailed(ifs, rho, [&](const Word& w, const Similarity& f) {
            out.push_back({w, f.apply(ifs.center), f.ratio * ifs.radius});
            if ((int)w.size() > deepest) deepest = (int)w.size();
        });
    }
    if (level_out) *level_out = deepest;
    return out;
}

std::vector<Point> exact_point_candidates(const IFSSystem& ifs, int max_len) {
    auto point_less = [](const Point& a, const Point& b) {
        for (int i = 0; i < a.dim; ++i) {
            if (a.x[i] < b.x[i]) return true;
            if (b.x[i] < a.x[i]) return false;
        }
        return false;
    };
    auto sort_unique = [&](std::vector<Point>& v) {
        std::sort(v.begin(), v.end(), point_less);
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    std::vector<Point> fps;
    std::function<void(const Similarity&, int)> walk_fp = [&](const Similarity& f, int len) {
        if (len > 0) fps.push_back(fixed_point(f));
        if (len == max_len) return;
        for (const auto& m : ifs.maps) walk_fp(compose(f, m), len + 1);
    };
    walk_fp(identity_map(ifs.dim), 0);
    sort_unique(fps);
    std::vector<Point> out;
    std::function<void(const Similarity&, int)> walk_img = [&](const Similarity& f, int len) {
        for (const auto& p : fps) out.push_back(f.apply(p));
        if (len == max_len) return;
        for (const auto& m : ifs.maps) walk_img(compose(f, m), len + 1);
    };
    walk_img(identity_map(ifs.dim), 0);
    sort_unique(out);
    return out;
}

namespace {

struct BBNode {
    Similarity word_map;  // f_w in the attractor frame
    Point kc;             // frame ball
    Rat kr;
    Point tc;             // transformed ball
    Rat tr;
    int depth = 0;
};

BBNode make_node(const IFSSystem& ifs, const PuncturedSet& S, const Similarity& wmap,
                 int depth) {
    BBNode n;
    n.word_map = wmap;
    n.kc = wmap.apply(ifs.center);
    n.kr = wmap.ratio * ifs.radius;
    n.tc = S.transform.apply(n.kc);
    n.tr = S.transform.ratio * n.kr;
    n.depth = depth;
    return n;
}

bool node_dropped(const BBNode& n, const PuncturedSet& S) {
    for (const auto& p : S.punctures)
        if (ball_inside_open(n.kc, n.kr, p.center, p.radius)) return true;
    return false;
}

bool pair_rec(const IFSSystem& ifs, const PuncturedSet& A, const PuncturedSet& B,
              const BBNode& na, const BBNode& nb, const Rat& tau_pad, const Rat& fail_r,
              int* deepest) {
    if (deepest && na.depth + nb.depth > *deepest) *deepest = na.depth + nb.depth;
    Rat need = tau_pad + na.tr + nb.tr;
    if (!lt_exact(dist2(na.tc, nb.tc), need * need)) return true;
    bool ea = na.tr > fail_r, eb = nb.tr > fail_r;
    if (!ea && !eb) return false;
    bool expand_a = ea && (!eb || na.tr >= nb.tr);
    const BBNode& parent = expand_a ? na : nb;
    const PuncturedSet& S = expand_a ? A : B;
    for (const auto& m : ifs.maps) {
        BBNode child = make_node(ifs, S, compose(parent.word_map, m), parent.depth + 1);
        if (node_dropped(child, S)) continue;
        bool ok = expand_a ? pair_rec(ifs, A, B, child, nb, tau_pad, fail_r, deepest)
                           : pair_rec(ifs, A, B, na, child, tau_pad, fail_r, deepest);
        if (!ok) return false;
    }
    return true;
}

bool point_rec(const IFSSystem& ifs, const PuncturedSet& A, const BBNode& na, const Point& x,
               const Rat& tau_pad, const Rat& fail_r, int* deepest) {
    if (deepest && na.depth > *deepest) *deepest = na.depth;
    Rat need = tau_pad + na.tr;
    if (!lt_exact(dist2(na.tc, x), need * need)) return true;
    if (na.tr <= fail_r) return false;
    for (const auto& m : ifs.maps) {
        BBNode child = make_node(ifs, A, compose(na.word_map, m), na.depth + 1);
        if (node_dropped(child, A)) continue;
        if (!point_rec(ifs, A, child, x, tau_pad, fail_r, deepest)) return false;
    }
    return true;
}

}  // namespace

bool certify_set_distance(const IFSSystem& ifs, const PuncturedSet& A, const PuncturedSet& B,
                          const Rat& tau, int* deepest) {
    if (tau <= 0) throw std::invalid_argument("certify_set_distance: tau must be positive");
    Rat tau_pad = tau * Rat(65, 64);
    Rat fail_r = tau / 32;
    BBNode ra = make_node(ifs, A, identity_map(ifs.dim), 0);
    BBNode rb = make_node(ifs, B, identity_map(ifs.dim), 0);
    if (node_dropped(ra, A) || node_dropped(rb, B)) return true;  // a side is empty
    return pair_rec(ifs, A, B, ra, rb, tau_pad, fail_r, deepest);
}

bool certify_point_distance(const IFSSystem& ifs, const PuncturedSet& A, const Point& x,
                            const Rat& tau, int* deepest) {
    if (tau <= 0) throw std::invalid_argument("certify_point_distance: tau must be positive");
    Rat tau_pad = tau * Rat(65, 64);
    Rat fail_r = tau / 32;
    BBNode ra = make_node(ifs, A, identity_map(ifs.dim), 0);
    if (node_dropped(ra, A)) return true;
    return point_rec(ifs, A, ra, x, tau_pad, fail_r, deepest);
}

}  // namespace detail

namespace {

Point square_center(int64_t a, int64_t b, const Rat& step) {
    return Point(Ext(Rat(a) * step), Ext(Rat(b) * step));
}

bool point_less(const Point& a, const Point& b) {
    for (int i = 0; i < a.dim; ++i) {
        if (a.x[i] < b.x[i]) return true;
        if (b.x[i] < a.x[i]) return false;
    }
    return false;
}

SquareCover cover_from_indices(std::vector<std::pair<int64_t, int64_t>> idx, const Rat& eta,
                               std::string provenance) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    SquareCover sc;
    sc.eta = eta;
    sc.provenance = std::move(provenance);
    Rat step = eta / 2;
    sc.centers.reserve(idx.size());
    for (const auto& [a, b] : idx) sc.centers.push_back(square_center(a, b, step));
    return sc;
}

bool square_inside_open_ball(const std::pair<int64_t, int64_t>& s, const Rat& step,
                             const Point& c, const Rat& rho) {
    Rat r2 = rho * rho;
    for (int dx = -1; dx <= 1; dx += 2)
        for (int dy = -1; dy <= 1; dy += 2) {
            Point corner(Ext(Rat(s.first + dx) * step), Ext(Rat(s.second + dy) * step));
            if (!detail::lt_exact(dist2(corner, c), r2)) return false;
        }
    return true;
}

// Squares of the eta-grid meeting the leaf-ball boxes, minus leaves and
// squares that certifiably sit inside an open puncture. Conservative both
// ways that matter: kept squares cover everything the punctured attractor
// meets, dropped squares lie inside the removed neighborhood.
std::vector<std::pair<int64_t, int64_t>> squares_from_leaves(
    const std::vector<detail::Leaf>& leaves, const Rat& step,
    const std::vector<detail::Puncture>& punct) {
    std::vector<std::pair<int64_t, int64_t>> out;
    for (const auto& lf : leaves) {
        bool drop = false;
        for (const auto& p : punct)
            if (detail::ball_inside_open(lf.c, lf.r, p.center, p.radius)) {
                drop = true;
                break;
            }
        if (drop) continue;
        Ext r{Rat(lf.r)};
        auto [x0, x1] = detail::lattice_range(lf.c.x[0] - r, lf.c.x[0] + r, step);
        auto [y0, y1] = detail::lattice_range(lf.c.x[1] - r, lf.c.x[1] + r, step);
        for (int64_t a = x0; a <= x1; ++a)
            for (int64_t b = y0; b <= y1; ++b) out.emplace_back(a, b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!punct.empty()) {
        out.erase(std::remove_if(out.begin(), out.end(),
                                 [&](const std::pair<int64_t, int64_t>& s) {
                                     for (const auto& p : punct)
                                         if (square_inside_open_ball(s, step, p.center, p.radius))
                                             return true;
                                     return false;
                                 }),
                  out.end());
    }
    return out;
}

// Curtailed words at scale rho whose piece may meet the closed reach-
// neighborhood of the given points. Certified-far words are excluded; a
// four-level refinement tightens the borderline ones.
std::vector<Word> layer_words(const IFSSystem& ifs, const std::vector<Point>& pts,
                              const Rat& rho, const Rat& reach) {
    std::vector<Word> out;
    if (pts.empty()) return out;
    auto far = [&](const Point& c, const Rat& r) {
        Rat lim = reach + r;
        Rat lim2 = lim * lim;
        for (const auto& x : pts)
            if (!detail::gt_exact(dist2(c, x), lim2)) return false;
        return true;
    };
    std::function<bool(const Similarity&, int)> survives = [&](const Similarity& f,
                                                               int depth) -> bool {
        Point c = f.apply(ifs.center);
        Rat r = f.ratio * ifs.radius;
        if (far(c, r)) return false;
        if (depth == 4) return true;
        for (const auto& m : ifs.maps)
            if (survives(compose(f, m), depth + 1)) return true;
        return false;
    };
    Word cur;
    std::function<void(const Similarity&)> rec = [&](const Similarity& f) {
        Point c = f.apply(ifs.center);
        Rat r = f.ratio * ifs.radius;
        if (far(c, r)) return;
        if (f.ratio <= rho) {
            if (survives(f, 0)) out.push_back(cur);
            return;
        }
        for (size_t i = 0; i < ifs.maps.size(); ++i) {
            cur.push_back((int)i);
            rec(compose(f, ifs.maps[i]));
            cur.pop_back();
        }
    };
    rec(identity_map(ifs.dim));
    return out;
}

// Square count of one piece at layer scale rho_n. Pieces whose excluded
// neighborhoods miss the attractor frame reuse the shared base count.
size_t piece_square_count(const IFSSystem& ifs, const std::vector<detail::Leaf>& leaves,
                          const Rat& step, const Similarity& f, const Rat& rho_n,
                          const std::vector<Point>& pts,
                          const std::vector<std::pair<int64_t, int64_t>>& base, bool* bulk_out,
                          std::vector<std::pair<int64_t, int64_t>>* squares_out) {
    std::vector<detail::Puncture> punct;
    Similarity inv = inverse(f);
    Rat pr = rho_n / f.ratio;
    Rat rsum = ifs.radius + pr;
    Rat rsum2 = rsum * rsum;
    for (const auto& x : pts) {
        Point pc = inv.apply(x);
        if (!detail::gt_exact(dist2(pc, ifs.center), rsum2)) punct.push_back({pc, pr});
    }
    if (punct.empty()) {
        if (bulk_out) *bulk_out = true;
        if (squares_out) *squares_out = base;
        return base.size();
    }
    if (bulk_out) *bulk_out = false;
    auto sqs = squares_from_leaves(leaves, step, punct);
    size_t cnt = sqs.size();
    if (squares_out) *squares_out = std::move(sqs);
    return cnt;
}

bool rotation_free(const Similarity& f) {
    return f.O[0][0] == Ext(1) && f.O[0][1] == Ext(0) && f.O[1][0] == Ext(0) &&
           f.O[1][1] == Ext(1);
}

// Exact s-interval test: does the segment meet the open square with index
// (t1, t2)? Parameter bounds are kept as exact fractions to avoid division.
struct Frac {
    Ext num;
    Ext den;  // > 0
};

bool frac_less(const Frac& a, const Frac& b) { return a.num * b.den < b.num * a.den; }

bool segment_meets_open_square(const Segment& seg, const Point& d, int64_t t1, int64_t t2,
                               const Rat& step) {
    Frac lo{Ext(0), Ext(1)}, hi{Ext(1), Ext(1)};
    int64_t tt[2] = {t1, t2};
    for (int axis = 0; axis < 2; ++axis) {
        Ext slo{Rat(tt[axis] - 1) * step};
        Ext shi{Rat(tt[axis] + 1) * step};
        const Ext& a = seg.a.x[axis];
        const Ext& di = d.x[axis];
        if (di.sign() == 0) {
            if (!(slo < a && a < shi)) return false;
            continue;
        }
        Frac b1{slo - a, di}, b2{shi - a, di};
        if (di.sign() < 0) {
            b1 = Frac{a - slo, Ext(0) - di};
            b2 = Frac{a - shi, Ext(0) - di};
            std::swap(b1, b2);
        }
        if (frac_less(lo, b1)) lo = b1;
        if (frac_less(b2, hi)) hi = b2;
    }
    return frac_less(lo, hi);
}

}  // namespace

SquareCover grid_cover(const CellSet& cells, const Rat& eta) {
    if (eta <= 0) throw std::invalid_argument("grid_cover: eta must be positive");
    if (cells.dim != 2) throw std::invalid_argument("grid_cover: planar cell sets only");
    Rat step = eta / 2;
    std::vector<std::pair<int64_t, int64_t>> idx;
    for (const auto& c : cells.cells) {
        auto [x0, x1] = detail::lattice_range(cells.lo(c, 0), cells.hi(c, 0), step);
        auto [y0, y1] = detail::lattice_range(cells.lo(c, 1), cells.hi(c, 1), step);
        for (int64_t a = x0; a <= x1; ++a)
            for (int64_t b = y0; b <= y1; ++b) idx.emplace_back(a, b);
    }
    return cover_from_indices(std::move(idx), eta, "cells");
}

SquareCover grid_cover(const std::vector<Point>& points, const Rat& eta) {
    if (eta <= 0) throw std::invalid_argument("grid_cover: eta must be positive");
    Rat step = eta / 2;
    std::vector<std::pair<int64_t, int64_t>> idx;
    for (const auto& p : points) {
        if (p.dim != 2) throw std::invalid_argument("grid_cover: planar points only");
        auto [x0, x1] = detail::lattice_range(p.x[0], p.x[0], step);
        auto [y0, y1] = detail::lattice_range(p.x[1], p.x[1], step);
        for (int64_t a = x0; a <= x1; ++a)
            for (int64_t b = y0; b <= y1; ++b) idx.emplace_back(a, b);
    }
    return cover_from_indices(std::move(idx), eta, "points");
}

SquareCover grid_cover(const Segment& seg, const Rat& eta) {
    if (eta <= 0) throw std::invalid_argument("grid_cover: eta must be positive");
    if (seg.a.dim != 2 || seg.b.dim != 2)
        throw std::invalid_argument("grid_cover: planar segments only");
    Rat step = eta / 2;
    Ext lox = seg.a.x[0] < seg.b.x[0] ? seg.a.x[0] : seg.b.x[0];
    Ext hix = seg.a.x[0] < seg.b.x[0] ? seg.b.x[0] : seg.a.x[0];
    Ext loy = seg.a.x[1] < seg.b.x[1] ? seg.a.x[1] : seg.b.x[1];
    Ext hiy = seg.a.x[1] < seg.b.x[1] ? seg.b.x[1] : seg.a.x[1];
    auto [tx0, tx1] = detail::lattice_range(lox, hix, step);
    auto [ty0, ty1] = detail::lattice_range(loy, hiy, step);
    if ((tx1 - tx0 + 1) > 1 << 21 || (ty1 - ty0 + 1) > 1 << 21 ||
        (tx1 - tx0 + 1) * (ty1 - ty0 + 1) > (1 << 22))
        throw std::invalid_argument("grid_cover: segment window too large for eta");
    Point d = seg.b - seg.a;
    std::vector<std::pair<int64_t, int64_t>> idx;
    for (int64_t a = tx0; a <= tx1; ++a)
        for (int64_t b = ty0; b <= ty1; ++b)
            if (segment_meets_open_square(seg, d, a, b, step)) idx.emplace_back(a, b);
    return cover_from_indices(std::move(idx), eta, "segment");
}

std::vector<Point> exact_h_points(const IFSSystem& ifs, const std::vector<Enclosure>& enclosures,
                                  int max_len) {
    std::vector<Point> out;
    if (enclosures.empty()) return out;
    auto candidates = detail::exact_point_candidates(ifs, max_len);
    for (const auto& e : enclosures) {
        Rat r2 = e.radius * e.radius;
        const Point* found = nullptr;
        for (const auto& c : candidates) {
            if (detail::gt_exact(dist2(c, e.center), r2)) continue;
            if (found && !(*found == c))
                throw std::runtime_error("exact_h_points: enclosure admits two exact candidates");
            found = &c;
        }
        if (!found) throw std::runtime_error("exact_h_points: no exact candidate in an enclosure");
        out.push_back(*found);
    }
    std::sort(out.begin(), out.end(), point_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DeltaK select_delta_k(const IFSSystem& ifs, const NeighborClosure& closure,
                      const std::vector<Point>& h_points, const Rat& eps) {
    if (eps <= 0) throw std::invalid_argument("select_delta_k: eps must be positive");
    DeltaK out;
    out.eps = eps;
    if (h_points.empty() || closure.maps.empty()) {
        out.neighbors_empty = true;
        out.delta = std::min(Rat(1), eps) * Rat(15, 64);
        out.k = 1;
        out.dist_lower = 0;
        return out;
    }
    Ext mp2;
    bool have = false;
    for (size_t i = 0; i < h_points.size(); ++i)
        for (size_t j = i + 1; j < h_points.size(); ++j) {
            Ext d2 = dist2(h_points[i], h_points[j]);
            if (d2.sign() == 0)
                throw std::invalid_argument("select_delta_k: duplicate anchor points");
            if (!have || d2 < mp2) {
                mp2 = d2;
                have = true;
            }
        }
    Rat b = std::min(Rat(1), eps);
    if (have) b = std::min(b, rat_lower_sqrt(mp2));
    Rat delta = b * Rat(15, 64);  // safely below the quarter bound

    auto candidates = detail::exact_point_candidates(ifs, 3);
    int deepest = 0;
    int halvings = 0;
    const Rat pad(1025, 1024);
    for (;;) {
        bool ok = true;
        for (const auto& x : h_points) {
            for (const auto& nm : closure.maps) {
                Point pre = inverse(nm.map).apply(x);
                bool member = false;
                for (const auto& c : candidates)
                    if (pre == c) {
                        member = true;
                        break;
                    }
                if (member) continue;
                detail::PuncturedSet img{nm.map, {}};
                if (detail::certify_point_distance(ifs, img, x, delta * 2 * pad, &deepest))
                    continue;
                ok = false;
                break;
            }
            if (!ok) break;
        }
        if (ok) break;
        if (++halvings > 4)
            throw std::runtime_error(
                "select_delta_k: neighbor membership unresolved after 4 refinements (deepest "
                "ball level " +
                std::to_string(deepest) + ")");
        delta /= 2;
    }
    out.delta = delta;
    out.halvings = halvings;

    detail::PuncturedSet punctured{identity_map(ifs.dim), {}};
    for (const auto& x : h_points) punctured.punctures.push_back({x, delta});
    bool found = false;
    for (int k = 1; k <= 8 && !found; ++k) {
        Rat tau = delta;
        for (int i = 1; i < k; ++i) tau /= 2;
        bool all = true;
        for (const auto& nm : closure.maps) {
            detail::PuncturedSet img{nm.map, {}};
            if (!detail::certify_set_distance(ifs, punctured, img, tau, &deepest)) {
                all = false;
                break;
            }
        }
        if (all) {
            out.k = k;
            out.dist_lower = tau;
            found = true;
        }
    }
    if (!found)
        throw std::runtime_error("select_delta_k: no separation exponent certified up to k = 8");
    out.refinement_level = deepest;
    return out;
}

DeltaK select_delta_k(const IFSSystem& ifs, const NeighborClosure& closure,
                      const IntersectionSet& isect, const Rat& eps) {
    if (isect.status != FiniteVerdict::CertifiedFinite)
        throw std::runtime_error("select_delta_k: intersection set not certified finite");
    return select_delta_k(ifs, closure, exact_h_points(ifs, isect.pullback, 3), eps);
}

CoverSequence cover_sequence(const IFSSystem& ifs, const std::vector<Point>& h_points,
                             const Rat& delta, int k, int n_max) {
    if (ifs.dim != 2) throw std::invalid_argument("cover_sequence: planar systems only");
    if (!(delta > 0 && delta < 1))
        throw std::invalid_argument("cover_sequence: delta must lie in (0, 1)");
    if (k < 1) throw std::invalid_argument("cover_sequence: k must be >= 1");
    if (n_max < 1) throw std::invalid_argument("cover_sequence: n_max must be >= 1");
    CoverSequence seq;
    seq.ifs = ifs;
    seq.h_points = h_points;
    seq.delta = delta;
    seq.k = k;
    Rat eta = delta;
    for (int i = 0; i < k; ++i) eta /= 2;
    seq.eta = eta;
    Rat step = eta / 2;

    auto leaves = detail::leaf_cover(ifs, eta / 4, &seq.leaf_level);
    seq.base_squares = squares_from_leaves(leaves, step, {});
    seq.base_square_count = seq.base_squares.size();

    std::vector<detail::Puncture> hpunct;
    for (const auto& x : h_points) hpunct.push_back({x, delta});
    seq.u1_squares = squares_from_leaves(leaves, step, hpunct);
    seq.u1_cover.eta = eta;
    seq.u1_cover.provenance = "iterated cover, layer 1";
    seq.u1_cover.centers.reserve(seq.u1_squares.size());
    for (const auto& [a, b] : seq.u1_squares)
        seq.u1_cover.centers.push_back(square_center(a, b, step));

    CoverLayer l1;
    l1.n = 1;
    l1.piece_count = layer_words(ifs, h_points, delta, Rat(1)).size();
    l1.square_count = seq.u1_squares.size();
    l1.perimeter_sum = Rat(4) * eta * Rat((long)l1.square_count);
    l1.cum_square_count = l1.square_count;
    l1.cum_perimeter = l1.perimeter_sum;
    seq.layers.push_back(std::move(l1));

    Rat reach = delta;
    Rat rho = delta * delta;
    for (int n = 2; n <= n_max; ++n) {
        CoverLayer L;
        L.n = n;
        L.pieces = layer_words(ifs, h_points, rho, reach);
        L.piece_count = L.pieces.size();
        L.perimeter_sum = 0;
        size_t squares = 0;
        for (const auto& w : L.pieces) {
            Similarity f = compose(ifs, w);
            size_t cnt = piece_square_count(ifs, leaves, step, f, rho, h_points,
                                            seq.base_squares, nullptr, nullptr);
            squares += cnt;
            L.perimeter_sum += Rat(4) * eta * f.ratio * Rat((long)cnt);
        }
        L.square_count = squares;
        L.cum_square_count = seq.layers.back().cum_square_count + squares;
        L.cum_perimeter = seq.layers.back().cum_perimeter + L.perimeter_sum;
        seq.layers.push_back(std::move(L));
        reach = rho;
        rho *= delta;
    }
    return seq;
}

CoverSequence cover_sequence(const IFSSystem& ifs, const Rat& delta, int k, int n_max) {
    auto sweep = stabilized_eps(ifs, 4, 4096);
    IntersectionSet isect = intersection_points(ifs, sweep.second, Rat(1, 1 << 20));
    if (isect.status != FiniteVerdict::CertifiedFinite)
        throw std::runtime_error("cover_sequence: intersection set not certified finite");
    return cover_sequence(ifs, exact_h_points(ifs, isect.pullback, 3), delta, k, n_max);
}

LoopResult surrounding_loop(const CoverSequence& seq, const std::vector<Point>& h_points,
                            const Rat& delta, int n, const LoopOptions& opt) {
    const IFSSystem& ifs = seq.ifs;
    if (ifs.dim != 2) throw std::invalid_argument("surrounding_loop: planar systems only");
    if (n < 1 || seq.layers.empty() || seq.layers.back().n < n)
        throw std::invalid_argument("surrounding_loop: requested layer not available");
    if (!h_points.empty() && n < 2)
        throw std::invalid_argument("surrounding_loop: need n >= 2 with anchor points present");

    Rat eta = seq.eta;
    Rat step = eta / 2;
    Rat hr(1);
    for (int i = 1; i < n; ++i) hr *= delta;

    LoopResult res;
    res.n = n;
    res.h_radius = hr;

    std::vector<Box2> boxes;
    std::vector<Box2> sup;
    for (const auto& x : h_points) {
        Box2 b{x.x[0] - Ext(hr), x.x[1] - Ext(hr), x.x[0] + Ext(hr), x.x[1] + Ext(hr)};
        sup.push_back(b);
        boxes.push_back(b);
    }
    auto in_sup = [&](const Box2& b) {
        for (const auto& s : sup)
            if (!(b.x0 < s.x0) && !(b.y0 < s.y0) && !(s.x1 < b.x1) && !(s.y1 < b.y1)) return true;
        return false;
    };
    auto square_box = [&](int64_t a, int64_t b) {
        return Box2{Ext(Rat(a - 1) * step), Ext(Rat(b - 1) * step), Ext(Rat(a + 1) * step),
                    Ext(Rat(b + 1) * step)};
    };
    auto inside_u1 = [&](const Box2& b) {
        int64_t ax_lo = to_long(-floor_div(Ext(0) - b.x1, step)) - 1;
        int64_t ax_hi = to_long(floor_div(b.x0, step)) + 1;
        int64_t ay_lo = to_long(-floor_div(Ext(0) - b.y1, step)) - 1;
        int64_t ay_hi = to_long(floor_div(b.y0, step)) + 1;
        for (int64_t a = ax_lo; a <= ax_hi; ++a)
            for (int64_t c = ay_lo; c <= ay_hi; ++c) {
                if (!std::binary_search(seq.u1_squares.begin(), seq.u1_squares.end(),
                                        std::make_pair(a, c)))
                    continue;
                Box2 s = square_box(a, c);
                if (!(b.x0 < s.x0) && !(b.y0 < s.y0) && !(s.x1 < b.x1) && !(s.y1 < b.y1))
                    return true;
            }
        return false;
    };

    for (const auto& s : seq.u1_squares) {
        Box2 b = square_box(s.first, s.second);
        if (!in_sup(b)) boxes.push_back(b);
    }

    std::vector<detail::Leaf> leaves;
    if (n >= 2) leaves = detail::leaf_cover(ifs, eta / 4, nullptr);
    Rat rho = delta * delta;
    for (int j = 2; j <= n; ++j) {
        const CoverLayer& L = seq.layers[(size_t)j - 1];
        for (const auto& w : L.pieces) {
            Similarity f = compose(ifs, w);
            Point pc = f.apply(ifs.center);
            Rat pr = f.ratio * ifs.radius;
            bool skip = false;
            for (const auto& s : sup)
                if (!(pc.x[0] - Ext(pr) < s.x0) && !(pc.x[1] - Ext(pr) < s.y0) &&
                    !(s.x1 < pc.x[0] + Ext(pr)) && !(s.y1 < pc.x[1] + Ext(pr))) {
                    skip = true;
                    break;
                }
            if (skip) continue;
            if (!rotation_free(f))
                throw std::runtime_error(
                    "surrounding_loop: piece carries a nontrivial rotation; rectilinear "
                    "realization unavailable");
            std::vector<std::pair<int64_t, int64_t>> sqs;
            piece_square_count(ifs, leaves, step, f, rho, h_points, seq.base_squares, nullptr,
                               &sqs);
            for (const auto& s : sqs) {
                Point lo = f.apply(
                    Point(Ext(Rat(s.first - 1) * step), Ext(Rat(s.second - 1) * step)));
                Point hi = f.apply(
                    Point(Ext(Rat(s.first + 1) * step), Ext(Rat(s.second + 1) * step)));
                Box2 b{lo.x[0], lo.x[1], hi.x[0], hi.x[1]};
                if (in_sup(b)) continue;
                if (inside_u1(b)) continue;
                boxes.push_back(b);
            }
        }
        rho *= delta;
        if (boxes.size() > 500000)
            throw std::runtime_error("surrounding_loop: region exceeds the box budget at n = " +
                                     std::to_string(n));
    }

    res.region_boxes = boxes.size();
    res.loop = outer_boundary(boxes, &res.grid);
    res.length_upper = res.loop.length_upper;
    res.length = res.loop.length_est;
    Rat bound =
        seq.layers[(size_t)n - 1].cum_perimeter + Rat(8) * hr * Rat((long)h_points.size());
    if (Ext(bound) < res.loop.length_upper)
        throw std::logic_error("surrounding_loop: boundary length exceeds the perimeter budget");
    res.length_bound = bound;

    std::vector<Point> pv = res.loop.v;
    if (!pv.empty()) pv.push_back(pv.front());
    res.path = PolyPath(pv);

    auto probes = sample_loop(res.loop, opt.probe_count);
    res.probe_count = probes.size();
    Rat arho = level_rho(ifs, opt.approx_level);
    Rat ares = arho / (1 << opt.approx_res_shift);
    CellSet approx = approximate(ifs, arho, ares);
    for (const auto& p : probes) {
        int64_t cx = to_long(floor_div(p.x[0], ares));
        int64_t cy = to_long(floor_div(p.x[1], ares));
        bool hit = false;
        for (int64_t a = cx - 1; a <= cx && !hit; ++a)
            for (int64_t b = cy - 1; b <= cy && !hit; ++b) {
                CellIdx c{a, b, 0};
                if (!approx.contains(c)) continue;
                if (approx.point_dist2(p, c).sign() == 0) hit = true;
            }
        if (hit) res.contact_points.push_back(p);
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "surrounding loop: sup-norm squares around anchors, n=%d, boxes=%zu", n,
                  (size_t)res.region_boxes);
    res.provenance = buf;
    return res;
}

}  // namespace permea
