// Two-family separated covers at scale s: balls around the images of the
// anchor points, and curtailed pieces. Separation constants are certified
// exactly; failures are reported in the certificates, not thrown.

#include "permea/covers.hpp"

#include "cover_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace permea {

namespace {

bool point_less(const Point& a, const Point& b) {
    for (int i = 0; i < a.dim; ++i) {
        if (a.x[i] < b.x[i]) return true;
        if (b.x[i] < a.x[i]) return false;
    }
    return false;
}

// Largest rung of the ladder c1 * {2, 1, 1/2, ..., 1/16} certified as a lower
// bound for dist(K', h(K')), where K' removes the open c1-neighborhood of the
// anchor points. Returns 0 when no rung certifies.
Rat certified_gap(const IFSSystem& ifs, const Similarity& h,
                  const std::vector<detail::Puncture>& punct, const Rat& c1) {
    detail::PuncturedSet A{identity_map(ifs.dim), punct};
    detail::PuncturedSet B{h, punct};
    Rat tau = c1 * 2;
    for (int rung = 0; rung < 6; ++rung) {
        if (detail::certify_set_distance(ifs, A, B, tau)) return tau;
        tau /= 2;
    }
    return 0;
}

}  // namespace

CoverFamily nagata_cover(const IFSSystem& ifs, const NeighborClosure& closure,
                         const std::vector<Point>& h_points, const Rat& s) {
    if (s <= 0) throw std::invalid_argument("nagata_cover: s must be positive");
    CoverFamily fam;
    fam.s = s;

    // Scale cap: the working eps stays below the least gap among the anchor
    // points and their neighbor images.
    std::vector<Point> z = h_points;
    for (const auto& nm : closure.maps)
        for (const auto& x : h_points) z.push_back(nm.map.apply(x));
    std::sort(z.begin(), z.end(), point_less);
    z.erase(std::unique(z.begin(), z.end()), z.end());
    Ext mp2;
    bool have = false;
    for (size_t i = 0; i < z.size(); ++i)
        for (size_t j = i + 1; j < z.size(); ++j) {
            Ext d2 = dist2(z[i], z[j]);
            if (!have || d2 < mp2) {
                mp2 = d2;
                have = true;
            }
        }
    Rat eps = closure.eps > 0 ? closure.eps : Rat(1, 4);
    if (have)
        while (!(Ext(eps * eps) < mp2)) eps /= 2;
    fam.eps = eps;
    fam.c1 = eps * ifs.r_min / 8;

    // Certified piece-to-piece gaps per neighbor map.
    std::vector<detail::Puncture> punct;
    for (const auto& x : h_points) punct.push_back({x, fam.c1});
    std::vector<Rat> gap(closure.maps.size());
    Rat gap_min;
    bool gap_have = false;
    for (size_t i = 0; i < closure.maps.size(); ++i) {
        gap[i] = certified_gap(ifs, closure.maps[i].map, punct, fam.c1);
        if (gap[i] == 0)
            throw std::runtime_error("nagata_cover: no certified gap for a neighbor map");
        if (!gap_have || gap[i] < gap_min) {
            gap_min = gap[i];
            gap_have = true;
        }
    }
    if (gap_have) {
        fam.c2 = ifs.r_min / 2 * gap_min;
        fam.c = std::min(fam.c1, fam.c2);
    } else {
        fam.c2 = fam.c1;  // no neighbor maps: piece pairs are plainly disjoint
        fam.c = fam.c1;
    }

    // Pieces at scale s/2, with their maps and inverses.
    Rat rho = s / 2;
    std::vector<Word> words;
    std::vector<Similarity> maps, invs;
    if (rho >= 1) {
        words.push_back({});
        maps.push_back(identity_map(ifs.dim));
        invs.push_back(identity_map(ifs.dim));
    } else {
        enumerate_curtailed(ifs, rho, [&](const Word& w, const Similarity& f) {
            words.push_back(w);
            maps.push_back(f);
            invs.push_back(inverse(f));
        });
    }
    for (const auto& w : words) fam.pieces.push_back({w});

    // Ball family: images of the anchor points, radius 2 c1 per piece scale.
    for (size_t pi = 0; pi < words.size(); ++pi)
        for (size_t hi = 0; hi < h_points.size(); ++hi)
            fam.balls.push_back(
                {maps[pi].apply(h_points[hi]), fam.c1 * 2 * maps[pi].ratio, words[pi], (int)hi});
    std::sort(fam.balls.begin(), fam.balls.end(), [](const NagataBall& a, const NagataBall& b) {
        if (point_less(a.center, b.center)) return true;
        if (point_less(b.center, a.center)) return false;
        return a.radius < b.radius;
    });
    fam.balls.erase(std::unique(fam.balls.begin(), fam.balls.end(),
                                [](const NagataBall& a, const NagataBall& b) {
                                    return a.center == b.center && a.radius == b.radius;
                                }),
                    fam.balls.end());
    // Keep maximal balls only.
    {
        std::vector<NagataBall> keep;
        for (size_t i = 0; i < fam.balls.size(); ++i) {
            bool covered = false;
            for (size_t j = 0; j < fam.balls.size() && !covered; ++j) {
                if (j == i || fam.balls[i].radius > fam.balls[j].radius) continue;
                Rat slack = fam.balls[j].radius - fam.balls[i].radius;
                if (!detail::gt_exact(dist2(fam.balls[i].center, fam.balls[j].center),
                                      slack * slack))
                    covered = true;
            }
            if (!covered) keep.push_back(fam.balls[i]);
        }
        fam.balls = std::move(keep);
    }
    fam.nagata_dim_signature = fam.balls.empty() ? 0 : 1;

    // Ball separation: distinct balls stay cs apart.
    Rat cs = fam.c * s;
    fam.ball_cert.threshold = cs;
    fam.ball_cert.certified = true;
    for (size_t i = 0; i < fam.balls.size() && fam.ball_cert.certified; ++i)
        for (size_t j = i + 1; j < fam.balls.size(); ++j) {
            ++fam.ball_cert.pairs;
            Rat need = cs + fam.balls[i].radius + fam.balls[j].radius;
            Ext d2 = dist2(fam.balls[i].center, fam.balls[j].center);
            if (detail::lt_exact(d2, need * need)) {
                fam.ball_cert.certified = false;
                fam.ball_cert.violating_a = (int)i;
                fam.ball_cert.violating_b = (int)j;
                fam.ball_cert.violating_distance =
                    std::sqrt(std::max(0.0, d2.to_double())) -
                    to_double(fam.balls[i].radius + fam.balls[j].radius);
                break;
            }
        }

    // Piece separation: neighbor pairs inherit the certified gap scaled by
    // the piece ratio; the rest certify by a ball screen or branch and bound.
    fam.piece_cert.threshold = cs;
    fam.piece_cert.certified = true;
    const Rat pad(65, 64);
    std::vector<Point> centers(words.size());
    std::vector<Rat> radii(words.size());
    for (size_t i = 0; i < words.size(); ++i) {
        centers[i] = maps[i].apply(ifs.center);
        radii[i] = maps[i].ratio * ifs.radius;
    }
    for (size_t i = 0; i < words.size() && fam.piece_cert.certified; ++i)
        for (size_t j = i + 1; j < words.size(); ++j) {
            ++fam.piece_cert.pairs;
            Similarity hij = compose(invs[i], maps[j]);
            int which = -1;
            for (size_t m = 0; m < closure.maps.size(); ++m)
                if (same_map(hij, closure.maps[m].map, Rat(0))) {
                    which = (int)m;
                    break;
                }
            bool ok;
            if (which >= 0) {
                ok = maps[i].ratio * gap[(size_t)which] >= cs;
            } else {
                Rat need = radii[i] + radii[j] + cs * pad;
                ok = !detail::lt_exact(dist2(centers[i], centers[j]), need * need);
                if (!ok) {
                    detail::PuncturedSet A{maps[i], {}};
                    detail::PuncturedSet B{maps[j], {}};
                    ok = detail::certify_set_distance(ifs, A, B, cs);
                }
            }
            if (!ok) {
                fam.piece_cert.certified = false;
                fam.piece_cert.violating_a = (int)i;
                fam.piece_cert.violating_b = (int)j;
                fam.piece_cert.violating_distance =
                    std::sqrt(std::max(0.0, dist2(centers[i], centers[j]).to_double())) -
                    to_double(radii[i] + radii[j]);
                break;
            }
        }

    // Diameter discipline: pieces and balls fit inside scale s.
    fam.piece_diam_certified = true;
    for (size_t i = 0; i < words.size(); ++i) {
        if (ifs.radius * 2 * maps[i].ratio <= s && fam.c1 * 4 * maps[i].ratio <= s) continue;
        fam.piece_diam_certified = false;
        break;
    }

    fam.provenance = "two families at scale s: anchor-image balls (radius 2 c1 per piece) and "
                     "curtailed pieces; separation certified exactly; c = min(c1, c2), c1 = " +
                     rat_to_string(fam.c1) + ", c2 = " + rat_to_string(fam.c2);
    return fam;
}

}  // namespace permea
