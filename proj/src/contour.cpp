#include "permea/contour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace permea {

namespace {

std::vector<Ext> compress(std::vector<Ext> vals) {
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

size_t index_of(const std::vector<Ext>& axis, const Ext& v) {
  size_t lo = 0, hi = axis.size();
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (axis[mid] < v)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;  // axis[lo] == v by construction
}

// Directions on the compressed vertex grid: E, N, W, S.
constexpr int DX[4] = {1, 0, -1, 0};
constexpr int DY[4] = {0, 1, 0, -1};

// Packed row-major cell bitmap.
struct BitGrid {
  size_t nx = 0, ny = 0;
  std::vector<std::uint64_t> w;
  BitGrid(size_t nx_, size_t ny_) : nx(nx_), ny(ny_), w((nx_ * ny_ + 63) / 64, 0) {}
  bool get(size_t i, size_t j) const {
    size_t id = j * nx + i;
    return (w[id >> 6] >> (id & 63)) & 1;
  }
  // set cells [i0, i1) of row j
  void set_run(size_t i0, size_t i1, size_t j) {
    size_t a = j * nx + i0, b = j * nx + i1;
    while (a < b && (a & 63)) {
      w[a >> 6] |= std::uint64_t(1) << (a & 63);
      ++a;
    }
    while (a + 64 <= b) {
      w[a >> 6] = ~std::uint64_t(0);
      a += 64;
    }
    while (a < b) {
      w[a >> 6] |= std::uint64_t(1) << (a & 63);
      ++a;
    }
  }
  size_t popcount() const {
    size_t n = 0;
    for (std::uint64_t x : w) n += size_t(__builtin_popcountll(x));
    return n;
  }
};

// Scanline flood fill over cells satisfying free(i, j), marking them in
// `mark`. Seeds may repeat or be stale. Returns the number of cells marked.
template <typename Free>
size_t flood(BitGrid& mark, std::vector<std::pair<std::uint32_t, std::uint32_t>> seeds,
             const Free& free) {
  const size_t nx = mark.nx, ny = mark.ny;
  size_t marked = 0;
  auto fresh = [&](size_t i, size_t j) { return free(i, j) && !mark.get(i, j); };
  while (!seeds.empty()) {
    auto [si, sj] = seeds.back();
    seeds.pop_back();
    if (!fresh(si, sj)) continue;
    size_t l = si, r = si + 1;
    while (l > 0 && fresh(l - 1, sj)) --l;
    while (r < nx && fresh(r, sj)) ++r;
    mark.set_run(l, r, sj);
    marked += r - l;
    for (int dj : {-1, 1}) {
      if (dj < 0 ? sj == 0 : sj + 1 == ny) continue;
      size_t jj = dj < 0 ? sj - 1 : sj + 1;
      bool in_run = false;
      for (size_t i = l; i < r; ++i) {
        bool f = fresh(i, jj);
        if (f && !in_run) seeds.emplace_back(std::uint32_t(i), std::uint32_t(jj));
        in_run = f;
      }
    }
  }
  return marked;
}

}  // namespace

bool RegionGrid::contains(const Point& p) const {
  if (nx == 0 || ny == 0) return false;
  if (p.x[0] < xs.front() || xs.back() < p.x[0]) return false;
  if (p.x[1] < ys.front() || ys.back() < p.x[1]) return false;
  // cells whose closure contains p; a point on a grid line borders two
  // columns (rows), so membership means some bordering cell is in the region
  long iu = long(std::upper_bound(xs.begin(), xs.end(), p.x[0]) - xs.begin());
  long ju = long(std::upper_bound(ys.begin(), ys.end(), p.x[1]) - ys.begin());
  long ci1 = iu - 1, ci0 = (xs[size_t(iu - 1)] == p.x[0]) ? iu - 2 : iu - 1;
  long cj1 = ju - 1, cj0 = (ys[size_t(ju - 1)] == p.x[1]) ? ju - 2 : ju - 1;
  for (long cj = std::max(cj0, 0L); cj <= std::min(cj1, long(ny) - 1); ++cj)
    for (long ci = std::max(ci0, 0L); ci <= std::min(ci1, long(nx) - 1); ++ci)
      if (cell(size_t(ci), size_t(cj))) return true;
  return false;
}

Loop outer_boundary(const std::vector<Box2>& boxes, RegionGrid* grid_out) {
  if (boxes.empty()) throw std::runtime_error("outer_boundary: no boxes");
  std::vector<Ext> xs, ys;
  xs.reserve(boxes.size() * 2);
  ys.reserve(boxes.size() * 2);
  for (const Box2& b : boxes) {
    if (!(b.x0 < b.x1) || !(b.y0 < b.y1))
      throw std::invalid_argument("outer_boundary: degenerate box");
    xs.push_back(b.x0);
    xs.push_back(b.x1);
    ys.push_back(b.y0);
    ys.push_back(b.y1);
  }
  xs = compress(std::move(xs));
  ys = compress(std::move(ys));
  const size_t nx = xs.size() - 1, ny = ys.size() - 1;
  if (nx * ny > size_t(120000000))
    throw std::runtime_error("outer_boundary: compressed grid too large (" + std::to_string(nx) +
                             " x " + std::to_string(ny) + " cells)");

  // Coverage: paint half-open column intervals per row, merge, set bits.
  BitGrid covered(nx, ny);
  {
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> rows(ny);
    for (const Box2& b : boxes) {
      size_t i0 = index_of(xs, b.x0), i1 = index_of(xs, b.x1);
      size_t j0 = index_of(ys, b.y0), j1 = index_of(ys, b.y1);
      for (size_t j = j0; j < j1; ++j)
        rows[j].emplace_back(std::uint32_t(i0), std::uint32_t(i1));
    }
    for (size_t j = 0; j < ny; ++j) {
      auto& iv = rows[j];
      std::sort(iv.begin(), iv.end());
      size_t u = 0;
      while (u < iv.size()) {
        std::uint32_t a = iv[u].first, e = iv[u].second;
        size_t v = u + 1;
        while (v < iv.size() && iv[v].first <= e) {
          e = std::max(e, iv[v].second);
          ++v;
        }
        covered.set_run(a, e, j);
        u = v;
      }
      iv = {};
    }
  }

  // Outside = uncovered cells reachable from the grid border through shared
  // edges; everything else (covered cells plus enclosed pockets) forms the
  // region the loop encloses.
  BitGrid outside(nx, ny);
  {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seeds;
    auto seed = [&](size_t i, size_t j) {
      if (!covered.get(i, j)) seeds.emplace_back(std::uint32_t(i), std::uint32_t(j));
    };
    for (size_t i = 0; i < nx; ++i) {
      seed(i, 0);
      seed(i, ny - 1);
    }
    for (size_t j = 0; j < ny; ++j) {
      seed(0, j);
      seed(nx - 1, j);
    }
    flood(outside, std::move(seeds), [&](size_t i, size_t j) { return !covered.get(i, j); });
  }

  // A single outer loop exists only when the region is one edge-connected
  // block; pieces meeting at a corner alone stay disconnected.
  const size_t total_region = nx * ny - outside.popcount();
  if (total_region == 0) throw std::runtime_error("outer_boundary: empty region");
  size_t fi = nx, fj = ny;
  for (size_t j = 0; j < ny && fj == ny; ++j)
    for (size_t i = 0; i < nx; ++i)
      if (!outside.get(i, j)) {
        fi = i;
        fj = j;
        break;
      }
  {
    BitGrid seen(nx, ny);
    size_t reached = flood(seen, {{std::uint32_t(fi), std::uint32_t(fj)}},
                           [&](size_t i, size_t j) { return !outside.get(i, j); });
    if (reached != total_region)
      throw std::runtime_error("outer_boundary: union is disconnected");
  }

  auto in_region = [&](long i, long j) {
    if (i < 0 || j < 0 || i >= long(nx) || j >= long(ny)) return false;
    return !outside.get(size_t(i), size_t(j));
  };

  // Walk the boundary with the region on the left. An edge-connected region
  // with pockets filled admits exactly one continuation at every vertex, so
  // the trace is simple by construction; the ambiguity check is defensive.
  long vi = long(fi), vj = long(fj);
  int dir = 0;  // heading E along the bottom edge of cell (fi, fj)
  const long svi = vi, svj = vj;
  const int sdir = dir;
  auto left_cell = [&](long i, long j, int d, long& ci, long& cj) {
    switch (d) {
      case 0: ci = i; cj = j; break;          // E: left = NE
      case 1: ci = i - 1; cj = j; break;      // N: left = NW
      case 2: ci = i - 1; cj = j - 1; break;  // W: left = SW
      default: ci = i; cj = j - 1; break;     // S: left = SE
    }
  };
  auto edge_valid = [&](long i, long j, int d) {
    long li, lj, ri, rj;
    left_cell(i, j, d, li, lj);
    left_cell(i, j, (d + 3) & 3, ri, rj);
    return in_region(li, lj) && !in_region(ri, rj);
  };
  if (!edge_valid(vi, vj, dir)) throw std::runtime_error("outer_boundary: bad start edge");

  std::vector<std::pair<long, long>> steps;  // vertex before each step
  std::vector<int> dirs;
  const size_t guard = 4 * nx * ny + 16;
  while (true) {
    steps.emplace_back(vi, vj);
    dirs.push_back(dir);
    vi += DX[dir];
    vj += DY[dir];
    int nd = -1;
    for (int turn : {3, 0, 1}) {  // right, straight, left
      int cand = (dir + turn) & 3;
      if (edge_valid(vi, vj, cand)) {
        if (nd >= 0) throw std::runtime_error("outer_boundary: ambiguous boundary vertex");
        nd = cand;
      }
    }
    if (nd < 0) throw std::runtime_error("outer_boundary: walk stuck");
    dir = nd;
    if (vi == svi && vj == svj && dir == sdir) break;
    if (steps.size() > guard) throw std::runtime_error("outer_boundary: walk did not close");
  }

  // Collapse straight runs into polygon vertices (turns only).
  Loop loop;
  const size_t n = steps.size();
  for (size_t s = 0; s < n; ++s)
    if (dirs[s] != dirs[(s + n - 1) % n])
      loop.v.push_back(Point(xs[size_t(steps[s].first)], ys[size_t(steps[s].second)]));
  if (loop.v.size() < 4) throw std::runtime_error("outer_boundary: degenerate loop");

  Ext total(0);
  double est = 0;
  const size_t m = loop.v.size();
  for (size_t s = 0; s < m; ++s) {
    const Point& a = loop.v[s];
    const Point& b = loop.v[(s + 1) % m];
    total += abs(b.x[0] - a.x[0]) + abs(b.x[1] - a.x[1]);
    est += std::sqrt(dist2(a, b).to_double());
  }
  loop.length_upper = total;
  loop.length_est = est;

  if (grid_out) {
    grid_out->xs = std::move(xs);
    grid_out->ys = std::move(ys);
    grid_out->nx = nx;
    grid_out->ny = ny;
    grid_out->bits.assign(outside.w.size(), 0);
    for (size_t k = 0; k < outside.w.size(); ++k) grid_out->bits[k] = ~outside.w[k];
    size_t pad = grid_out->bits.size() * 64 - nx * ny;
    if (pad) grid_out->bits.back() &= ~std::uint64_t(0) >> pad;
  }
  return loop;
}

bool point_inside(const Loop& loop, const Point& p) {
  size_t m = loop.v.size();
  int crossings = 0;
  for (size_t s = 0; s < m; ++s) {
    const Point& a = loop.v[s];
    const Point& b = loop.v[(s + 1) % m];
    // on-segment test first (boundary counts as inside)
    Ext cross = (b.x[0] - a.x[0]) * (p.x[1] - a.x[1]) - (b.x[1] - a.x[1]) * (p.x[0] - a.x[0]);
    if (cross.sign() == 0) {
      Ext lo_x = min(a.x[0], b.x[0]), hi_x = max(a.x[0], b.x[0]);
      Ext lo_y = min(a.x[1], b.x[1]), hi_y = max(a.x[1], b.x[1]);
      if (lo_x <= p.x[0] && p.x[0] <= hi_x && lo_y <= p.x[1] && p.x[1] <= hi_y) return true;
      continue;
    }
    // half-open straddle rule on y
    bool a_below = a.x[1] <= p.x[1];
    bool b_below = b.x[1] <= p.x[1];
    if (a_below == b_below) continue;
    // x of the intersection with the horizontal line through p
    Ext t = (p.x[1] - a.x[1]) / (b.x[1] - a.x[1]);
    Ext x = a.x[0] + (b.x[0] - a.x[0]) * t;
    if (x > p.x[0]) ++crossings;
  }
  return (crossings & 1) != 0;
}

std::vector<Point> sample_loop(const Loop& loop, int count) {
  std::vector<Point> out;
  if (count <= 0 || loop.v.size() < 2) return out;
  size_t m = loop.v.size();
  std::vector<double> cum(m + 1, 0);
  for (size_t s = 0; s < m; ++s)
    cum[s + 1] = cum[s] + std::sqrt(dist2(loop.v[s], loop.v[(s + 1) % m]).to_double());
  double total = cum[m];
  if (total <= 0) return out;
  size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    double target = total * k / count;
    while (seg + 1 < m && cum[seg + 1] < target) ++seg;
    double len = cum[seg + 1] - cum[seg];
    double t = len > 0 ? (target - cum[seg]) / len : 0;
    long num = std::lround(std::clamp(t, 0.0, 1.0) * 1048576.0);
    Rat tr(num, 1048576);
    const Point& a = loop.v[seg];
    const Point& b = loop.v[(seg + 1) % m];
    Point p = a;
    p.x[0] = a.x[0] + (b.x[0] - a.x[0]) * Ext(tr);
    p.x[1] = a.x[1] + (b.x[1] - a.x[1]) * Ext(tr);
    out.push_back(p);
  }
  return out;
}

namespace {

int orient(const Point& p, const Point& q, const Point& r) {
  Ext cross = (q.x[0] - p.x[0]) * (r.x[1] - p.x[1]) - (q.x[1] - p.x[1]) * (r.x[0] - p.x[0]);
  return cross.sign();
}

bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  auto on_seg = [](const Point& p, const Point& q, const Point& r) {
    // r collinear with pq: does r lie within the bounding box?
    return min(p.x[0], q.x[0]) <= r.x[0] && r.x[0] <= max(p.x[0], q.x[0]) &&
           min(p.x[1], q.x[1]) <= r.x[1] && r.x[1] <= max(p.x[1], q.x[1]);
  };
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

}  // namespace

bool loop_is_simple(const Loop& loop) {
  size_t m = loop.v.size();
  if (m < 3) return false;
  for (size_t s = 0; s < m; ++s) {
    const Point& a = loop.v[s];
    const Point& b = loop.v[(s + 1) % m];
    if (a == b) return false;
  }
  // bucket segments on a coarse double grid to keep the exact tests local
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const Point& p : loop.v)
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], p.xd(d));
      hi[d] = std::max(hi[d], p.xd(d));
    }
  double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
  double cell = span / 128;
  std::unordered_map<long long, std::vector<size_t>> buckets;
  auto keys_of = [&](size_t s, std::vector<long long>& keys) {
    keys.clear();
    const Point& a = loop.v[s];
    const Point& b = loop.v[(s + 1) % m];
    double x0 = std::min(a.xd(0), b.xd(0)) - 1e-12 * span;
    double x1 = std::max(a.xd(0), b.xd(0)) + 1e-12 * span;
    double y0 = std::min(a.xd(1), b.xd(1)) - 1e-12 * span;
    double y1 = std::max(a.xd(1), b.xd(1)) + 1e-12 * span;
    for (long ix = (long)std::floor((x0 - lo[0]) / cell); ix <= (long)std::floor((x1 - lo[0]) / cell); ++ix)
      for (long iy = (long)std::floor((y0 - lo[1]) / cell); iy <= (long)std::floor((y1 - lo[1]) / cell); ++iy)
        keys.push_back((long long)ix * 1000003LL + iy);
  };
  std::vector<long long> keys;
  for (size_t s = 0; s < m; ++s) {
    keys_of(s, keys);
    for (long long k : keys) buckets[k].push_back(s);
  }
  auto adjacent = [&](size_t s, size_t t) {
    size_t d = (s > t ? s - t : t - s);
    return d == 1 || d == m - 1;
  };
  std::map<std::pair<size_t, size_t>, char> done;
  for (auto& [key, list] : buckets) {
    (void)key;
    for (size_t u = 0; u < list.size(); ++u)
      for (size_t w = u + 1; w < list.size(); ++w) {
        size_t s = std::min(list[u], list[w]), t = std::max(list[u], list[w]);
        if (s == t || adjacent(s, t)) continue;
        if (done.emplace(std::make_pair(s, t), 1).second == false) continue;
        if (segments_cross(loop.v[s], loop.v[(s + 1) % m], loop.v[t], loop.v[(t + 1) % m]))
          return false;
      }
  }
  return true;
}

}  // namespace permea
