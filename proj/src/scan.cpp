// Porosity sampling over conservative cell covers, and box-counting slopes.

#include "permea/covers.hpp"

#include "cover_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace permea {

namespace {

// True when no cell of the set meets the open ball B(y, qr), verified with
// exact arithmetic. Cells are visited in rings around y's own grid cell so a
// blocked candidate dies on its first nearby cell; a ring at Chebyshev index s
// sits at distance >= (s-1)*res on the axis that attains s, which bounds how
// far the walk must go.
bool ball_clear(const CellSet& cells, const Point& y, const Rat& qr) {
    const Rat& rx = cells.res[0];
    const Rat& ry = cells.res[1];
    int64_t ic = to_long(floor_div(y.x[0], rx));
    int64_t jc = to_long(floor_div(y.x[1], ry));
    if (cells.contains({ic, jc, 0})) return false;  // y lies inside a covered box
    long smax_i = (long)std::floor(to_double(qr / rx)) + 2;
    long smax_j = (long)std::floor(to_double(qr / ry)) + 2;
    if (std::max(smax_i, smax_j) > 4096)
        throw std::invalid_argument("porosity_scan: radius too coarse for the raster");
    Rat qr2 = qr * qr;
    auto blocked = [&](int64_t i, int64_t j) {
        if (!cells.contains({i, j, 0})) return false;
        return detail::lt_exact(cells.point_dist2(y, {i, j, 0}), qr2);
    };
    for (long s = 1;; ++s) {
        bool iside = !(Rat(s - 1) * rx > qr);  // |di| = s cells can still reach the ball
        bool jside = !(Rat(s - 1) * ry > qr);
        if (!iside && !jside) return true;
        if (iside)
            for (int64_t j = jc - s; j <= jc + s; ++j) {
                if (blocked(ic - s, j)) return false;
                if (blocked(ic + s, j)) return false;
            }
        if (jside)
            for (int64_t i = ic - s + 1; i <= ic + s - 1; ++i) {
                if (blocked(i, jc - s)) return false;
                if (blocked(i, jc + s)) return false;
            }
    }
}

}  // namespace

PorosityVerdict porosity_scan(const CellSet& cells, const Rat& q, int sample_points,
                              const std::vector<Rat>& radii) {
    if (!(q > 0 && q < 1)) throw std::invalid_argument("porosity_scan: q must lie in (0, 1)");
    if (radii.empty()) throw std::invalid_argument("porosity_scan: need at least one radius");
    for (const auto& r : radii)
        if (r <= 0) throw std::invalid_argument("porosity_scan: radii must be positive");
    PorosityVerdict v;
    if (cells.cells.empty()) {  // nothing to scan
        v.evidence = true;
        return v;
    }
    if (cells.dim != 2) throw std::invalid_argument("porosity_scan: planar cell sets only");
    if (sample_points < 1) sample_points = 1;
    size_t stride = std::max<size_t>(1, cells.cells.size() / (size_t)sample_points);
    for (size_t ci = 0; ci < cells.cells.size(); ci += stride) {
        Point x = cells.center(cells.cells[ci]);
        ++v.samples;
        for (const auto& r : radii) {
            Rat qr = q * r;
            Rat pitch = qr / 4;  // grid hits any clear patch at least half a step wide
            Rat reach2 = (Rat(1) - q) * r;
            reach2 = reach2 * reach2;
            long span = (long)std::floor(to_double((Rat(1) - q) / q)) * 4 + 5;
            bool found = false;
            for (long b = -span; b <= span && !found; ++b)
                for (long a = -span; a <= span && !found; ++a) {
                    if (Rat(a * a + b * b) * pitch * pitch > reach2) continue;
                    Point y(x.x[0] + Ext(pitch * Rat(a)), x.x[1] + Ext(pitch * Rat(b)));
                    ++v.checks;
                    if (ball_clear(cells, y, qr)) found = true;
                }
            if (!found) {
                v.violated = true;
                v.violated_x = x;
                v.violated_r = to_double(r);
                return v;
            }
        }
    }
    v.evidence = true;
    return v;
}

BoxDimEstimate box_dimension(const std::vector<Rat>& eps, const std::vector<size_t>& counts) {
    if (eps.size() != counts.size()) throw std::invalid_argument("box_dimension: size mismatch");
    size_t n = eps.size();
    if (n < 4) throw std::invalid_argument("box_dimension: need at least 4 scales");
    Rat emin = eps[0], emax = eps[0];
    for (const auto& e : eps) {
        if (e <= 0) throw std::invalid_argument("box_dimension: scales must be positive");
        emin = std::min(emin, e);
        emax = std::max(emax, e);
    }
    if (emax < emin * 4)
        throw std::invalid_argument("box_dimension: scales must span at least two octaves");
    bool vary = false;
    for (auto c : counts) {
        if (c == 0) throw std::invalid_argument("box_dimension: zero count");
        if (c != counts[0]) vary = true;
    }
    if (!vary) throw std::invalid_argument("box_dimension: degenerate counts");

    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = -std::log(to_double(eps[i]));
        ys[i] = std::log((double)counts[i]);
    }
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= (double)n;
    my /= (double)n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0) throw std::invalid_argument("box_dimension: degenerate scales");
    double slope = sxy / sxx;
    double b0 = my - slope * mx;
    double ss = 0;
    for (size_t i = 0; i < n; ++i) {
        double r = ys[i] - (b0 + slope * xs[i]);
        ss += r * r;
    }
    double dof = (double)n - 2.0;
    double se = dof > 0 ? std::sqrt(ss / dof / sxx) : 0.0;
    BoxDimEstimate est;
    est.estimate = slope;
    est.stderr_ = se;
    est.lo = slope - 2 * se;
    est.hi = slope + 2 * se;
    est.scales = (int)n;
    return est;
}

std::vector<size_t> box_counts(const IFSSystem& ifs, int level_lo, int level_hi,
                               std::vector<Rat>* eps_out) {
    if (level_lo < 1 || level_hi < level_lo)
        throw std::invalid_argument("box_counts: bad level range");
    if (ifs.dim != 2) throw std::invalid_argument("box_counts: planar systems only");
    double pieces = 1;
    for (int l = 0; l < level_hi; ++l) {
        pieces *= ifs.m();
        if (pieces > (double)(1 << 22))
            throw std::invalid_argument("box_counts: too many pieces at this depth");
    }
    std::vector<size_t> out;
    if (eps_out) eps_out->clear();
    // Depth-l anchor points f_w(center), |w| = l, one inside each piece's
    // bounding ball, built iteratively as A_l = union of f_i(A_{l-1}).
    // Counting their grid cells avoids the fattening of a rasterised cover,
    // which would bias the log-log slope at coarse scales; on lattice-aligned
    // attractors the anchors land one per occupied box and the count is the
    // exact box count.
    std::vector<Point> anchors{ifs.center};
    Rat eps(1);
    for (int l = 1; l <= level_hi; ++l) {
        eps = eps * ifs.r_max;
        std::vector<Point> next;
        next.reserve(anchors.size() * ifs.maps.size());
        for (const auto& f : ifs.maps)
            for (const auto& p : anchors) next.push_back(f.apply(p));
        anchors.swap(next);
        if (l < level_lo) continue;
        std::vector<std::array<int64_t, 2>> hit;
        hit.reserve(anchors.size());
        for (const auto& p : anchors)
            hit.push_back({to_long(floor_div(p.x[0], eps)), to_long(floor_div(p.x[1], eps))});
        std::sort(hit.begin(), hit.end());
        hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
        out.push_back(hit.size());
        if (eps_out) eps_out->push_back(eps);
    }
    return out;
}

}  // namespace permea
