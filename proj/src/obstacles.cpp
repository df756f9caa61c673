#include "permea/obstacles.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace permea {

Rat IntervalSet::measure() const {
    Rat s = 0;
    for (const auto& [a, b] : intervals) s += b - a;
    return s;
}

bool IntervalSet::contains(const Rat& x) const {
    for (const auto& [a, b] : intervals)
        if (a <= x && x <= b) return true;
    return false;
}

IntervalSet svc_level(int n) {
    if (n < 0) throw std::invalid_argument("level must be nonnegative");
    IntervalSet f;
    f.intervals = {{Rat(0), Rat(1)}};
    for (int k = 1; k <= n; ++k) {
        Rat half_gap(1, BigInt(1) << (2 * k + 1));
        std::vector<std::pair<Rat, Rat>> next;
        next.reserve(f.intervals.size() * 2);
        for (const auto& [a, b] : f.intervals) {
            Rat mid = (a + b) / 2;
            next.emplace_back(a, mid - half_gap);
            next.emplace_back(mid + half_gap, b);
        }
        f.intervals = std::move(next);
    }
    f.level = n;
    return f;
}

IntervalSet cantor_level(int n) {
    if (n < 0) throw std::invalid_argument("level must be nonnegative");
    IntervalSet f;
    f.intervals = {{Rat(0), Rat(1)}};
    for (int k = 1; k <= n; ++k) {
        std::vector<std::pair<Rat, Rat>> next;
        next.reserve(f.intervals.size() * 2);
        for (const auto& [a, b] : f.intervals) {
            Rat third = (b - a) / 3;
            next.emplace_back(a, a + third);
            next.emplace_back(b - third, b);
        }
        f.intervals = std::move(next);
    }
    f.level = n;
    return f;
}

namespace {

Point pt2(const Rat& x, const Rat& y) {
    Point p;
    p.dim = 2;
    p.x[0] = Ext(x);
    p.x[1] = Ext(y);
    return p;
}

}  // namespace

CellSet theta_squares(int n_max, const Rat& resolution) {
    if (n_max < 0) throw std::invalid_argument("level must be nonnegative");
    if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
    CellSet out = CellSet::make(2, resolution);
    for (int n = 0; n <= n_max; ++n) {
        IntervalSet f = svc_level(n);
        for (const auto& [ax, bx] : f.intervals)
            for (const auto& [ay, by] : f.intervals) {
                raster_segment(out, pt2(ax, ay), pt2(bx, ay));
                raster_segment(out, pt2(ax, by), pt2(bx, by));
                raster_segment(out, pt2(ax, ay), pt2(ax, by));
                raster_segment(out, pt2(bx, ay), pt2(bx, by));
                out.normalize();
            }
    }
    out.normalize();
    out.provenance = "theta square boundaries up to level " + std::to_string(n_max);
    if (n_max >= 1) {
        Rat gap(1, BigInt(1) << (2 * n_max));  // level-n gap width is 4^-n
        if (resolution > gap)
            out.provenance += "; warning: resolution coarser than the level gap";
    }
    return out;
}

CellSet extrude(const IntervalSet& iv, int axis, const Rat& t0, const Rat& t1,
                const Rat& resolution) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("axis must be 0 or 1");
    if (!(t0 <= t1)) throw std::invalid_argument("thickness range is empty");
    CellSet out = CellSet::make(2, resolution);
    for (const auto& [a, b] : iv.intervals) {
        if (axis == 0)
            raster_box(out, pt2(a, t0), pt2(b, t1));
        else
            raster_box(out, pt2(t0, a), pt2(t1, b));
    }
    out.normalize();
    out.provenance = "extruded interval set, level " + std::to_string(iv.level);
    return out;
}

bool BMCPattern::member(int i, int j) const {
    return std::binary_search(cells.begin(), cells.end(), std::make_pair(i, j));
}

bool BMCPattern::member2(int i, int j) const {
    if (j >= m) j -= m;
    return member(i, j);
}

BMCPattern make_pattern(int n, int m, std::vector<std::pair<int, int>> cells) {
    if (n <= 0 || m <= 0) throw std::invalid_argument("pattern dimensions must be positive");
    BMCPattern p;
    p.n = n;
    p.m = m;
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    for (const auto& [i, j] : cells)
        if (i < 0 || i >= n || j < 0 || j >= m)
            throw std::invalid_argument("pattern cell out of range");
    p.cells = std::move(cells);
    return p;
}

BMCPattern bmc_pattern() {
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 10; ++j)
            if (j != (5 * i + 7) % 10) cells.emplace_back(2 * i, j);
    return make_pattern(48, 10, std::move(cells));
}

WindowCheckResult bmc_window_check(const BMCPattern& p) {
    if (p.n % 4 != 0) throw std::invalid_argument("pattern columns must come in blocks of 4");
    WindowCheckResult r;
    for (int nu = 0; nu < p.n / 4; ++nu)
        for (int j = 0; j <= 2 * p.m - 2; ++j) {
            ++r.windows;
            bool ok = false;
            for (int i : {4 * nu, 4 * nu + 2})
                ok = ok || (p.member2(i, j) && p.member2(i, j + 1));
            if (!ok && r.pass) {
                r.pass = false;
                r.fail_block = nu;
                r.fail_row = j;
            }
        }
    return r;
}

namespace {

BigInt ipow(int64_t base, int e) {
    BigInt v = 1;
    for (int i = 0; i < e; ++i) v *= base;
    return v;
}

}  // namespace

Rat bmc_measure(const BMCPattern& p, int level) {
    if (level < 0) throw std::invalid_argument("level must be nonnegative");
    return Rat(ipow(static_cast<int64_t>(p.cells.size()), level)) /
           Rat(ipow(static_cast<int64_t>(p.n) * p.m, level));
}

CellSet bmc_cells(const BMCPattern& p, int level) {
    if (level < 1) throw std::invalid_argument("level must be at least 1");
    BigInt count = ipow(static_cast<int64_t>(p.cells.size()), level);
    if (count > (BigInt(1) << 22))
        throw std::runtime_error("limit: level-" + std::to_string(level) +
                                 " pattern would materialize " + count.str() + " rectangles");
    CellSet out = CellSet::make_rect(Rat(1, ipow(p.n, level)), Rat(1, ipow(p.m, level)));
    out.provenance = "pattern cells at level " + std::to_string(level);
    std::vector<std::pair<int64_t, int64_t>> frontier = {{0, 0}};
    for (int k = 0; k < level; ++k) {
        std::vector<std::pair<int64_t, int64_t>> next;
        next.reserve(frontier.size() * p.cells.size());
        for (const auto& [x, y] : frontier)
            for (const auto& [i, j] : p.cells)
                next.emplace_back(x * p.n + i, y * p.m + j);
        frontier = std::move(next);
    }
    for (const auto& [x, y] : frontier) out.add(x, y);
    out.normalize();
    return out;
}

CellSet bmc_doubled_cells(const BMCPattern& p, int level) {
    CellSet base = bmc_cells(p, level);
    CellSet out = CellSet::make_rect(base.res[0], base.res[1]);
    out.provenance = "doubled pattern cells at level " + std::to_string(level);
    int64_t shift = to_long(ipow(p.m, level));
    for (const auto& c : base.cells) {
        out.add(c[0], c[1]);
        out.add(c[0], c[1] + shift);
    }
    out.normalize();
    return out;
}

std::optional<Rat> min_crossing_variation(const BMCPattern& p, int level) {
    if (level < 1 || level > 4) throw std::invalid_argument("level must be in 1..4");
    std::vector<std::vector<int>> col_rows(p.n);
    for (const auto& [i, j] : p.cells) col_rows[i].push_back(j);
    bool any = !p.cells.empty();
    if (!any) return Rat(0);

    BigInt rows_big = 2 * ipow(p.m, level);
    BigInt cols_big = ipow(p.n, level);
    if (rows_big > (BigInt(1) << 21) || cols_big > (BigInt(1) << 24))
        throw std::runtime_error("limit: grid too deep for the crossing sweep");
    const int64_t rows = to_long(rows_big);
    const int64_t half = rows / 2;  // row count of one pattern copy
    // Work estimate: nonempty columns times row sweep.
    {
        BigInt nonempty = 1;
        int ne = 0;
        for (const auto& c : col_rows) ne += c.empty() ? 0 : 1;
        for (int k = 0; k < level; ++k) nonempty *= ne;
        if (nonempty * rows_big > (BigInt(1) << 26))
            throw std::runtime_error("limit: grid too deep for the crossing sweep");
    }

    const int64_t INF = std::numeric_limits<int64_t>::max() / 4;
    // dp over horizontal grid lines 0..rows: min vertical movement (in row
    // units) for a path whose y sits on line L after the columns seen so far.
    std::vector<int64_t> dp(rows + 1, 0);
    std::vector<char> blocked(rows, 0);
    std::vector<int> digit(level, 0);

    auto unrestricted = [&]() {
        for (int64_t l = 1; l <= rows; ++l) dp[l] = std::min(dp[l], dp[l - 1] + 1);
        for (int64_t l = rows - 1; l >= 0; --l) dp[l] = std::min(dp[l], dp[l + 1] + 1);
    };

    bool gap_pending = false;  // free columns seen since the last obstacle column
    while (true) {
        bool empty_col = false;
        for (int k = 0; k < level; ++k) empty_col = empty_col || col_rows[digit[k]].empty();
        if (empty_col) {
            gap_pending = true;
        } else {
            std::fill(blocked.begin(), blocked.end(), 0);
            // obstacle rows: every digit choice per refinement level, two copies
            std::vector<int64_t> acc = {0};
            for (int k = 0; k < level; ++k) {
                std::vector<int64_t> nxt;
                nxt.reserve(acc.size() * col_rows[digit[k]].size());
                for (int64_t base : acc)
                    for (int j : col_rows[digit[k]]) nxt.push_back(base * p.m + j);
                acc = std::move(nxt);
            }
            for (int64_t r : acc) {
                blocked[r] = 1;
                blocked[r + half] = 1;
            }
            if (gap_pending) unrestricted();
            gap_pending = false;
            // a line is usable only when a free row touches it
            for (int64_t l = 0; l <= rows; ++l) {
                bool usable = (l > 0 && !blocked[l - 1]) || (l < rows && !blocked[l]);
                if (!usable) dp[l] = INF;
            }
            // vertical movement inside this column: crossing row l costs one unit
            for (int64_t l = 1; l <= rows; ++l)
                if (!blocked[l - 1]) dp[l] = std::min(dp[l], dp[l - 1] + 1);
            for (int64_t l = rows - 1; l >= 0; --l)
                if (!blocked[l]) dp[l] = std::min(dp[l], dp[l + 1] + 1);
            bool all_inf = true;
            for (int64_t l = 0; l <= rows && all_inf; ++l) all_inf = dp[l] >= INF;
            if (all_inf) return std::nullopt;
        }
        int k = level - 1;
        while (k >= 0 && digit[k] == p.n - 1) digit[k--] = 0;
        if (k < 0) break;
        ++digit[k];
    }
    int64_t best = INF;
    for (int64_t l = 0; l <= rows; ++l) best = std::min(best, dp[l]);
    if (best >= INF) return std::nullopt;
    return Rat(best) / Rat(ipow(p.m, level));
}

}  // namespace permea
