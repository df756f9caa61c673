#include "permea/ifs.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace permea {

namespace {

// cos/sin of k*30 degrees in Q[sqrt(3)], k = 0..11.
Ext cos30(int k) {
    static const Ext table[12] = {
        Ext(1),           Ext(Rat(0), Rat(1, 2)),  Ext(Rat(1, 2)),  Ext(0),
        Ext(Rat(-1, 2)),  Ext(Rat(0), Rat(-1, 2)), Ext(-1),
        Ext(Rat(0), Rat(-1, 2)), Ext(Rat(-1, 2)), Ext(0),
        Ext(Rat(1, 2)),   Ext(Rat(0), Rat(1, 2)),
    };
    return table[((k % 12) + 12) % 12];
}
Ext sin30(int k) { return cos30(k - 3); }

// Solve M x = b over Q[sqrt(3)] by Cramer's rule (dim 2 or 3).
std::array<Ext, 3> solve_linear(int dim, const std::array<std::array<Ext, 3>, 3>& M,
                                const std::array<Ext, 3>& b) {
    std::array<Ext, 3> x{Ext(0), Ext(0), Ext(0)};
    if (dim == 2) {
        Ext det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
        if (det.sign() == 0) throw std::domain_error("singular linear system");
        Ext inv = det.inverse();
        x[0] = (b[0] * M[1][1] - b[1] * M[0][1]) * inv;
        x[1] = (M[0][0] * b[1] - M[1][0] * b[0]) * inv;
        return x;
    }
    auto det3 = [](const std::array<std::array<Ext, 3>, 3>& A) {
        return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
               A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
               A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    };
    Ext det = det3(M);
    if (det.sign() == 0) throw std::domain_error("singular linear system");
    Ext inv = det.inverse();
    for (int c = 0; c < 3; ++c) {
        auto A = M;
        for (int r = 0; r < 3; ++r) A[r][c] = b[r];
        x[c] = det3(A) * inv;
    }
    return x;
}

std::array<std::array<Ext, 3>, 3> identity_matrix() {
    std::array<std::array<Ext, 3>, 3> O{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) O[i][j] = Ext(i == j ? 1 : 0);
    return O;
}

}  // namespace

Point Similarity::apply(const Point& p) const {
    if (p.dim != dim) throw std::invalid_argument("similarity/point dimension mismatch");
    Point q;
    q.dim = dim;
    q.exact = exact && p.exact;
    Ext r(ratio);
    for (int i = 0; i < dim; ++i) {
        Ext acc(0);
        for (int j = 0; j < dim; ++j) acc = acc + O[i][j] * p.x[j];
        q.x[i] = r * acc + t.x[i];
    }
    return q;
}

Segment Similarity::apply(const Segment& s) const { return Segment{apply(s.a), apply(s.b)}; }

Similarity identity_map(int dim) {
    Similarity f;
    f.dim = dim;
    f.ratio = 1;
    f.O = identity_matrix();
    f.t = Point::zero(dim);
    f.exact = true;
    return f;
}

Similarity planar_similarity(const Rat& ratio, double angle_deg, bool reflect,
                             const Point& translate) {
    if (translate.dim != 2) throw std::invalid_argument("planar similarity needs a 2d translation");
    Similarity f = identity_map(2);
    f.ratio = ratio;
    f.t = translate;
    double k = angle_deg / 30.0;
    double kr = std::round(k);
    Ext c, s;
    if (std::abs(k - kr) < 1e-9 && std::abs(kr) < 1e15) {
        int ki = static_cast<int>(kr);
        c = cos30(ki);
        s = sin30(ki);
        f.exact = translate.exact;
    } else {
        double rad = angle_deg * std::acos(-1.0) / 180.0;
        c = Ext(rat_from_double(std::cos(rad)));
        s = Ext(rat_from_double(std::sin(rad)));
        f.exact = false;
    }
    // Rot(angle) * Diag(1, reflect ? -1 : 1)
    Ext flip(reflect ? -1 : 1);
    f.O[0][0] = c;
    f.O[0][1] = (s * flip) * Ext(-1);
    f.O[1][0] = s;
    f.O[1][1] = c * flip;
    return f;
}

Similarity compose(const Similarity& f, const Similarity& g) {
    if (f.dim != g.dim) throw std::invalid_argument("composing maps of different dimension");
    Similarity h;
    h.dim = f.dim;
    h.ratio = f.ratio * g.ratio;
    h.exact = f.exact && g.exact;
    h.O = identity_matrix();
    for (int i = 0; i < f.dim; ++i)
        for (int j = 0; j < f.dim; ++j) {
            Ext acc(0);
            for (int k = 0; k < f.dim; ++k) acc = acc + f.O[i][k] * g.O[k][j];
            h.O[i][j] = acc;
        }
    h.t = f.apply(g.t);
    return h;
}

Similarity inverse(const Similarity& f) {
    Similarity g;
    g.dim = f.dim;
    g.ratio = Rat(1) / f.ratio;
    g.exact = f.exact;
    g.O = identity_matrix();
    for (int i = 0; i < f.dim; ++i)
        for (int j = 0; j < f.dim; ++j) g.O[i][j] = f.O[j][i];
    Ext rinv(g.ratio);
    g.t = Point::zero(f.dim);
    g.t.exact = f.t.exact;
    for (int i = 0; i < f.dim; ++i) {
        Ext acc(0);
        for (int j = 0; j < f.dim; ++j) acc = acc + g.O[i][j] * f.t.x[j];
        g.t.x[i] = rinv * acc * Ext(-1);
    }
    return g;
}

Point fixed_point(const Similarity& f) {
    // (I - ratio*O) x = t
    std::array<std::array<Ext, 3>, 3> M = identity_matrix();
    Ext r(f.ratio);
    for (int i = 0; i < f.dim; ++i)
        for (int j = 0; j < f.dim; ++j) M[i][j] = Ext(i == j ? 1 : 0) - r * f.O[i][j];
    std::array<Ext, 3> b{f.t.x[0], f.t.x[1], f.t.x[2]};
    auto x = solve_linear(f.dim, M, b);
    Point p;
    p.dim = f.dim;
    p.exact = f.exact;
    for (int i = 0; i < f.dim; ++i) p.x[i] = x[i];
    return p;
}

bool same_map(const Similarity& f, const Similarity& g, const Rat& tol) {
    if (f.dim != g.dim) return false;
    bool strict = f.exact && g.exact && tol == 0;
    auto close = [&](const Ext& a, const Ext& b) {
        Ext d = a - b;
        if (strict) return d.sign() == 0;
        return abs(d) <= Ext(tol);
    };
    if (!close(Ext(f.ratio), Ext(g.ratio))) return false;
    for (int i = 0; i < f.dim; ++i) {
        if (!close(f.t.x[i], g.t.x[i])) return false;
        for (int j = 0; j < f.dim; ++j)
            if (!close(f.O[i][j], g.O[i][j])) return false;
    }
    return true;
}

std::string word_to_string(const Word& w, int m) {
    std::string s;
    for (size_t k = 0; k < w.size(); ++k) {
        if (m > 9 && k) s += '.';
        s += std::to_string(w[k] + 1);
    }
    return s;
}

namespace {

// Smallest certified forward invariant radius around c: the exact check is
// dist(f_i(c), c)^2 <= (R*(1-r_i))^2 for every map.
bool ball_invariant(const std::vector<Similarity>& maps, const Point& c, const Rat& R) {
    for (const auto& f : maps) {
        Ext d2 = dist2(f.apply(c), c);
        Rat m = R * (1 - f.ratio);
        if ((d2 - Ext(m * m)).sign() > 0) return false;
    }
    return true;
}

Rat certified_radius(const std::vector<Similarity>& maps, const Point& c) {
    double best = 0.0;
    for (const auto& f : maps) {
        double d = std::sqrt(dist2(f.apply(c), c).to_double());
        double denom = 1.0 - to_double(f.ratio);
        best = std::max(best, d / denom);
    }
    // Round up on a dyadic grid and bump until the exact check passes.
    Rat step(1, BigInt(1) << 16);
    Rat R = step * BigInt(std::ceil(best / to_double(step)));
    if (R == 0) R = step;
    for (int tries = 0; tries < 64; ++tries) {
        if (ball_invariant(maps, c, R)) return R;
        R += step;
    }
    throw std::runtime_error("could not certify a bounding ball radius");
}

}  // namespace

IFSSystem make_ifs(int dim, std::vector<Similarity> maps, std::string name) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
    if (maps.size() < 2) throw std::invalid_argument("an IFS needs at least two maps");
    IFSSystem ifs;
    ifs.dim = dim;
    ifs.name = std::move(name);
    for (auto& f : maps) {
        if (f.dim != dim) throw std::invalid_argument("map dimension mismatch");
        if (!(f.ratio > 0 && f.ratio < 1))
            throw std::invalid_argument("member ratios must lie in (0,1)");
        ifs.exact = ifs.exact && f.exact;
    }
    ifs.maps = std::move(maps);
    ifs.r_min = ifs.r_max = ifs.maps[0].ratio;
    for (const auto& f : ifs.maps) {
        ifs.r_min = std::min(ifs.r_min, f.ratio);
        ifs.r_max = std::max(ifs.r_max, f.ratio);
    }

    // Candidate centers: the barycenter fixed point of x -> (1/m) sum f_i(x)
    // (solved exactly; usually close to the attractor's Chebyshev center) and
    // the fixed point of the first map. Keep whichever certifies smaller.
    std::vector<Point> candidates;
    {
        int m = ifs.m();
        std::array<std::array<Ext, 3>, 3> M = identity_matrix();
        std::array<Ext, 3> b{Ext(0), Ext(0), Ext(0)};
        Ext invm = Ext(Rat(1, m));
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                Ext acc(0);
                for (const auto& f : ifs.maps) acc = acc + Ext(f.ratio) * f.O[i][j];
                M[i][j] = Ext(i == j ? 1 : 0) - invm * acc;
            }
            Ext acc(0);
            for (const auto& f : ifs.maps) acc = acc + f.t.x[i];
            b[i] = invm * acc;
        }
        auto x = solve_linear(dim, M, b);
        Point bary;
        bary.dim = dim;
        bary.exact = ifs.exact;
        for (int i = 0; i < dim; ++i) bary.x[i] = x[i];
        candidates.push_back(bary);
    }
    candidates.push_back(fixed_point(ifs.maps[0]));

    bool have = false;
    for (const auto& c : candidates) {
        Rat R = certified_radius(ifs.maps, c);
        if (!have || R < ifs.radius) {
            ifs.center = c;
            ifs.radius = R;
            have = true;
        }
    }
    return ifs;
}

Similarity compose(const IFSSystem& ifs, const Word& w) {
    Similarity acc = identity_map(ifs.dim);
    for (int idx : w) {
        if (idx < 0 || idx >= ifs.m()) throw std::out_of_range("word index out of range");
        acc = compose(acc, ifs.maps[idx]);
    }
    return acc;
}

Rat level_rho(const IFSSystem& ifs, int level) {
    if (level < 0) throw std::invalid_argument("level must be nonnegative");
    Rat rho = 1;
    for (int i = 0; i < level; ++i) rho *= ifs.r_max;
    return rho;
}

namespace {

void curtail_rec(const IFSSystem& ifs, const Rat& rho, Word& w, const Similarity& acc,
                 const std::function<void(const Word&, const Similarity&)>& fn) {
    if (acc.ratio <= rho) {
        fn(w, acc);
        return;
    }
    for (int i = 0; i < ifs.m(); ++i) {
        w.push_back(i);
        curtail_rec(ifs, rho, w, compose(acc, ifs.maps[i]), fn);
        w.pop_back();
    }
}

}  // namespace

void enumerate_curtailed(const IFSSystem& ifs, const Rat& rho,
                         const std::function<void(const Word&, const Similarity&)>& fn) {
    if (!(rho > 0 && rho < 1)) throw std::invalid_argument("rho must lie in (0,1)");
    Word w;
    curtail_rec(ifs, rho, w, identity_map(ifs.dim), fn);
}

std::vector<Word> curtail(const IFSSystem& ifs, const Rat& rho) {
    std::vector<Word> out;
    enumerate_curtailed(ifs, rho, [&](const Word& w, const Similarity&) { out.push_back(w); });
    return out;
}

CellSet approximate(const IFSSystem& ifs, const Rat& rho, const Rat& resolution) {
    if (!(rho > 0 && rho < 1)) throw std::invalid_argument("rho must lie in (0,1)");
    if (resolution > rho * ifs.diameter())
        throw std::invalid_argument("resolution too coarse for the requested rho");
    CellSet cs = CellSet::make(ifs.dim, resolution);
    cs.provenance = "attractor cover of '" + ifs.name + "' rho=" + rat_to_string(rho);
    size_t last = 64;
    enumerate_curtailed(ifs, rho, [&](const Word&, const Similarity& f) {
        raster_ball(cs, f.apply(ifs.center), f.ratio * ifs.radius);
        if (cs.size() > 4 * last) {
            cs.normalize();
            last = std::max<size_t>(64, cs.size());
        }
    });
    cs.normalize();
    return cs;
}

}  // namespace permea
