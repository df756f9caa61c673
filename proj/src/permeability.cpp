#include "permea/permeability.hpp"

#include "cover_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace permea {
namespace {

// Path parameters as exact fractions n/d with d > 0.
struct Frac {
  Ext n, d;
};

bool frac_lt(const Frac& a, const Frac& b) { return a.n * b.d < b.n * a.d; }
bool frac_le(const Frac& a, const Frac& b) { return a.n * b.d <= b.n * a.d; }

double frac_to_double(const Frac& f) { return f.n.to_double() / f.d.to_double(); }

// Closed parameter interval of segment a + t*d, t in [0,1], inside the closed
// box of cell c; false when empty.
bool clip_cell(const CellSet& cs, const CellIdx& c, const Point& a,
               const Point& d, Frac& lo, Frac& hi) {
  lo = {Ext(0), Ext(1)};
  hi = {Ext(1), Ext(1)};
  for (int ax = 0; ax < 2; ++ax) {
    Ext L = cs.lo(c, ax), H = cs.hi(c, ax);
    const Ext& A = a.x[ax];
    const Ext& D = d.x[ax];
    int s = D.sign();
    if (s == 0) {
      if (A < L || A > H) return false;
      continue;
    }
    Ext n1 = L - A, n2 = H - A, den = D;
    if (s < 0) {
      std::swap(n1, n2);
      n1 = -n1;
      n2 = -n2;
      den = -den;
    }
    Frac flo{n1, den}, fhi{n2, den};
    if (frac_lt(lo, flo)) lo = flo;
    if (frac_lt(fhi, hi)) hi = fhi;
  }
  return frac_le(lo, hi);
}

// One maximal stretch of the path inside the cells. Parameters are global
// (segment index + local t); segment/local endpoints kept for splicing.
struct HitSpan {
  Frac lo, hi;          // global parameters
  size_t seg_lo = 0, seg_hi = 0;
  Frac t_lo, t_hi;      // local parameters on those segments
  std::vector<CellIdx> touched;
};

std::vector<HitSpan> collect_spans(const PolyPath& path, const CellSet& cells) {
  std::vector<HitSpan> raw;
  for (size_t i = 0; i < path.segments(); ++i) {
    const Point& a = path.v[i];
    const Point& b = path.v[i + 1];
    Point d = b - a;
    Point blo(std::min(a.x[0], b.x[0]), std::min(a.x[1], b.x[1]));
    Point bhi(std::max(a.x[0], b.x[0]), std::max(a.x[1], b.x[1]));
    for (const CellIdx& c : cells.range_query(blo, bhi)) {
      Frac tl, th;
      if (!clip_cell(cells, c, a, d, tl, th)) continue;
      HitSpan s;
      s.lo = {tl.n + Ext(Rat(static_cast<long>(i))) * tl.d, tl.d};
      s.hi = {th.n + Ext(Rat(static_cast<long>(i))) * th.d, th.d};
      s.seg_lo = s.seg_hi = i;
      s.t_lo = tl;
      s.t_hi = th;
      s.touched = {c};
      raw.push_back(std::move(s));
    }
  }
  std::sort(raw.begin(), raw.end(), [](const HitSpan& a, const HitSpan& b) {
    if (frac_lt(a.lo, b.lo)) return true;
    if (frac_lt(b.lo, a.lo)) return false;
    return frac_lt(a.hi, b.hi);
  });
  std::vector<HitSpan> merged;
  for (auto& s : raw) {
    if (!merged.empty() && frac_le(s.lo, merged.back().hi)) {
      HitSpan& m = merged.back();
      if (frac_lt(m.hi, s.hi)) {
        m.hi = s.hi;
        m.seg_hi = s.seg_hi;
        m.t_hi = s.t_hi;
      }
      m.touched.insert(m.touched.end(), s.touched.begin(), s.touched.end());
    } else {
      merged.push_back(std::move(s));
    }
  }
  return merged;
}

Point param_point(const PolyPath& path, size_t seg, const Frac& t) {
  const Point& a = path.v[seg];
  const Point& b = path.v[seg + 1];
  Ext f = t.n / t.d;
  return a + (b - a).scaled(f);
}

// True iff the closed segment misses every cell (exact).
bool segment_clear(const CellSet& cells, const Point& a, const Point& b) {
  if (cells.cells.empty()) return true;
  Point blo(std::min(a.x[0], b.x[0]), std::min(a.x[1], b.x[1]));
  Point bhi(std::max(a.x[0], b.x[0]), std::max(a.x[1], b.x[1]));
  for (const CellIdx& c : cells.range_query(blo, bhi))
    if (cells.segment_hits(a, b, c)) return false;
  return true;
}

double seg_dist_d(double px, double py, double ax, double ay, double bx,
                  double by) {
  double dx = bx - ax, dy = by - ay;
  double wx = px - ax, wy = py - ay;
  double den = dx * dx + dy * dy;
  if (den <= 0) return std::hypot(wx, wy);
  double t = (wx * dx + wy * dy) / den;
  t = std::max(0.0, std::min(1.0, t));
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

VerdictHint classify(double excess, double delta, size_t comps) {
  if (!(excess <= delta)) return VerdictHint::Blocked;
  if (comps == 0) return VerdictHint::NullLike;
  if (comps <= 64) return VerdictHint::FiniteLike;
  return VerdictHint::CountableLike;
}

// Shortcut smoothing on maximal obstacle-free vertex runs; pts[i] free means
// the vertex and shortcut chords avoid the cells (exact tests). Crossing
// vertices are kept verbatim so forced crossings survive untouched.
void smooth_free_runs(std::vector<Point>& pts, const CellSet& cells) {
  if (pts.size() < 3 || cells.cells.empty()) return;
  auto vertex_free = [&](const Point& p) {
    return segment_clear(cells, p, p);
  };
  std::vector<char> free_v(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) free_v[i] = vertex_free(pts[i]);
  std::vector<Point> out;
  out.reserve(pts.size());
  size_t i = 0;
  const size_t lookahead = 32;
  while (i + 1 < pts.size()) {
    out.push_back(pts[i]);
    if (!free_v[i]) {
      ++i;
      continue;
    }
    size_t best = i + 1;
    size_t jmax = std::min(pts.size() - 1, i + lookahead);
    for (size_t j = i + 2; j <= jmax; ++j) {
      if (!free_v[j - 1]) break;  // do not shortcut across crossings
      if (segment_clear(cells, pts[i], pts[j])) best = j;
    }
    i = best;
  }
  out.push_back(pts.back());
  pts.swap(out);
}

double poly_len_d(const std::vector<Point>& pts, const Norm& n) {
  double total = 0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) total += n.length(pts[i + 1] - pts[i]);
  return total;
}

}  // namespace

IntersectionProfile count_intersections(const PolyPath& path,
                                        const CellSet& cells) {
  IntersectionProfile out;
  if (path.segments() == 0 || cells.cells.empty()) return out;
  if (path.dim() != 2 || cells.dim != 2)
    throw std::invalid_argument("count_intersections: 2d paths and cells only");
  auto spans = collect_spans(path, cells);
  out.components = spans.size();
  out.spans.reserve(spans.size());
  for (const auto& s : spans)
    out.spans.emplace_back(frac_to_double(s.lo), frac_to_double(s.hi));
  return out;
}

WitnessReport witness_path(const CellSet& cells, const Point& x, const Point& y,
                           const Rat& delta, const Norm& norm,
                           const std::optional<Box2>& domain) {
  if (delta.sign() <= 0) throw std::invalid_argument("witness_path: delta must be positive");
  if (x.dim != 2 || y.dim != 2)
    throw std::invalid_argument("witness_path: 2d points required");
  WitnessReport rep;
  rep.status = WitnessStatus::Found;
  if (cells.cells.empty()) {
    rep.path = PolyPath({x, y});
    rep.excess = 0;
    rep.hint = VerdictHint::NullLike;
    rep.provenance = "empty obstacle: straight segment";
    return rep;
  }
  if (cells.dim != 2) throw std::invalid_argument("witness_path: 2d cells only");

  const Rat rx = cells.res[0], ry = cells.res[1];
  const Rat rmax = rx > ry ? rx : ry;
  Rat margin = delta > rmax * 4 ? delta : rmax * 4;

  // Index window of the corridor stadium (optionally domain-clipped).
  auto floor_idx = [](const Ext& v, const Rat& r) {
    return to_long(floor_div(v, r));
  };
  Ext mx0 = std::min(x.x[0], y.x[0]) - Ext(margin);
  Ext mx1 = std::max(x.x[0], y.x[0]) + Ext(margin);
  Ext my0 = std::min(x.x[1], y.x[1]) - Ext(margin);
  Ext my1 = std::max(x.x[1], y.x[1]) + Ext(margin);
  if (domain) {
    mx0 = std::max(mx0, domain->x0);
    mx1 = std::min(mx1, domain->x1);
    my0 = std::max(my0, domain->y0);
    my1 = std::min(my1, domain->y1);
  }
  int64_t i0 = floor_idx(mx0, rx) - 1, i1 = floor_idx(mx1, rx) + 1;
  int64_t j0 = floor_idx(my0, ry) - 1, j1 = floor_idx(my1, ry) + 1;
  int64_t W = i1 - i0 + 1, H = j1 - j0 + 1;
  if (W <= 0 || H <= 0 || W * H > 8'000'000)
    throw std::runtime_error("witness_path: corridor too large at this resolution");
  const size_t N = static_cast<size_t>(W * H);

  const double rxd = to_double(rx), ryd = to_double(ry);
  const double xd0 = x.xd(0), xd1 = x.xd(1), yd0 = y.xd(0), yd1 = y.xd(1);
  const double margin_d = to_double(margin) * (1 + 1e-12);
  const double dmx0 = domain ? domain->x0.to_double() : 0;
  const double dmx1 = domain ? domain->x1.to_double() : 0;
  const double dmy0 = domain ? domain->y0.to_double() : 0;
  const double dmy1 = domain ? domain->y1.to_double() : 0;

  // bit0: inside corridor, bit1: obstacle.
  std::vector<uint8_t> mask(N, 0);
  for (int64_t j = j0; j <= j1; ++j) {
    double cy = (static_cast<double>(j) + 0.5) * ryd;
    for (int64_t i = i0; i <= i1; ++i) {
      double cx = (static_cast<double>(i) + 0.5) * rxd;
      if (domain && (cx < dmx0 || cx > dmx1 || cy < dmy0 || cy > dmy1)) continue;
      if (seg_dist_d(cx, cy, xd0, xd1, yd0, yd1) <= margin_d)
        mask[static_cast<size_t>((j - j0) * W + (i - i0))] |= 1;
    }
  }
  for (const CellIdx& c : cells.cells) {
    if (c[0] < i0 || c[0] > i1 || c[1] < j0 || c[1] > j1) continue;
    mask[static_cast<size_t>((c[1] - j0) * W + (c[0] - i0))] |= 2;
  }

  auto node_of = [&](int64_t i, int64_t j) {
    return static_cast<size_t>((j - j0) * W + (i - i0));
  };
  auto in_window = [&](int64_t i, int64_t j) {
    return i >= i0 && i <= i1 && j >= j0 && j <= j1;
  };

  // Endpoint cells; when a start lies in an obstacle cell, search from the
  // nearest free corridor cell (scanned in deterministic ring order).
  auto locate = [&](const Point& p, bool& moved) -> int64_t {
    int64_t pi = floor_idx(p.x[0], rx), pj = floor_idx(p.x[1], ry);
    if (!in_window(pi, pj)) {
      pi = std::max(i0, std::min(i1, pi));
      pj = std::max(j0, std::min(j1, pj));
    }
    if ((mask[node_of(pi, pj)] & 1) && !(mask[node_of(pi, pj)] & 2))
      return static_cast<int64_t>(node_of(pi, pj));
    moved = true;
    for (int64_t s = 1; s <= std::max(W, H); ++s) {
      for (int64_t dj = -s; dj <= s; ++dj)
        for (int64_t di = -s; di <= s; ++di) {
          if (std::max(std::llabs(di), std::llabs(dj)) != s) continue;
          int64_t qi = pi + di, qj = pj + dj;
          if (!in_window(qi, qj)) continue;
          uint8_t m = mask[node_of(qi, qj)];
          if ((m & 1) && !(m & 2)) return static_cast<int64_t>(node_of(qi, qj));
        }
    }
    return -1;
  };
  bool moved = false;
  int64_t start = locate(x, moved), goal = locate(y, moved);
  rep.endpoints_moved = moved;
  if (start < 0 || goal < 0) {
    rep.status = WitnessStatus::NoPath;
    rep.hint = VerdictHint::Blocked;
    rep.excess = -1;
    rep.provenance = "no free corridor cell near an endpoint";
    return rep;
  }

  // Lexicographic Dijkstra: obstacle length first, then total length.
  const int64_t SC = int64_t(1) << 30;
  const int64_t cax = std::llround(rxd * SC);
  const int64_t cay = std::llround(ryd * SC);
  const int64_t cdi = std::llround(std::hypot(rxd, ryd) * SC);
  const int di8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dj8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int64_t cost8[8] = {cax, cax, cay, cay, cdi, cdi, cdi, cdi};

  const int64_t INF = std::numeric_limits<int64_t>::max();
  std::vector<int64_t> din(N, INF), dln(N, INF);
  std::vector<int32_t> par(N, -1);
  using QE = std::tuple<int64_t, int64_t, int64_t>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
  din[static_cast<size_t>(start)] = 0;
  dln[static_cast<size_t>(start)] = 0;
  pq.emplace(0, 0, start);
  while (!pq.empty()) {
    auto [ci, cl, u] = pq.top();
    pq.pop();
    size_t us = static_cast<size_t>(u);
    if (ci != din[us] || cl != dln[us]) continue;
    if (u == goal) break;
    int64_t ui = i0 + (u % W), uj = j0 + (u / W);
    int uo = (mask[us] & 2) ? 1 : 0;
    for (int k = 0; k < 8; ++k) {
      int64_t vi = ui + di8[k], vj = uj + dj8[k];
      if (!in_window(vi, vj)) continue;
      size_t vs = node_of(vi, vj);
      if (!(mask[vs] & 1)) continue;
      int vo = (mask[vs] & 2) ? 1 : 0;
      int64_t ni = ci + (uo + vo) * cost8[k];
      int64_t nl = cl + cost8[k];
      if (ni < din[vs] || (ni == din[vs] && nl < dln[vs])) {
        din[vs] = ni;
        dln[vs] = nl;
        par[vs] = static_cast<int32_t>(u);
        pq.emplace(ni, nl, static_cast<int64_t>(vs));
      }
    }
  }
  size_t gs = static_cast<size_t>(goal);
  if (din[gs] == INF) {
    rep.status = WitnessStatus::NoPath;
    rep.hint = VerdictHint::Blocked;
    rep.excess = -1;
    rep.provenance = "corridor disconnected";
    return rep;
  }
  double inside_len = static_cast<double>(din[gs]) / (2.0 * SC);
  if (inside_len > to_double(margin)) {
    rep.status = WitnessStatus::NoPath;
    rep.hint = VerdictHint::Blocked;
    rep.excess = -1;
    std::ostringstream os;
    os << "optimal crossing length " << inside_len << " exceeds margin "
       << to_double(margin);
    rep.provenance = os.str();
    return rep;
  }

  std::vector<Point> pts;
  for (int64_t u = goal; u != -1; u = par[static_cast<size_t>(u)]) {
    int64_t ui = i0 + (u % W), uj = j0 + (u / W);
    pts.push_back(cells.center({ui, uj, 0}));
    if (u == start) break;
  }
  std::reverse(pts.begin(), pts.end());
  pts.insert(pts.begin(), x);
  pts.push_back(y);
  size_t raw_vertices = pts.size();
  smooth_free_runs(pts, cells);

  rep.path = PolyPath(pts);
  double direct = norm.length(y - x);
  rep.excess = poly_len_d(pts, norm) - direct;
  rep.intersection_components = count_intersections(rep.path, cells).components;
  rep.hint = classify(rep.excess, to_double(delta), rep.intersection_components);
  std::ostringstream os;
  os << "grid " << W << "x" << H << " margin " << to_double(margin)
     << " inside " << inside_len << " vertices " << raw_vertices << "->"
     << pts.size();
  rep.provenance = os.str();
  return rep;
}

RepairReport repair_path(const PolyPath& path, const CellSet& cells, double C,
                         const Rat& delta) {
  if (C < 1) throw std::invalid_argument("repair_path: C must be >= 1");
  RepairReport out;
  out.path = path;
  if (path.segments() == 0 || cells.cells.empty()) return out;
  if (path.dim() != 2 || cells.dim != 2)
    throw std::invalid_argument("repair_path: 2d paths and cells only");

  auto spans = collect_spans(path, cells);
  if (spans.empty()) return out;

  Norm euclid = Norm::euclid();
  for (const auto& s : spans) {
    // covered length: vertex chain from entry to exit point
    Point a = param_point(path, s.seg_lo, s.t_lo);
    Point b = param_point(path, s.seg_hi, s.t_hi);
    double len = 0;
    Point prev = a;
    for (size_t k = s.seg_lo + 1; k <= s.seg_hi; ++k) {
      len += euclid.length(path.v[k] - prev);
      prev = path.v[k];
    }
    len += euclid.length(b - prev);
    out.covered_in += len;
  }

  // Obstacle component id per cell (sorted index -> component).
  auto comps = cells.components();
  std::vector<int32_t> comp_of(cells.cells.size(), -1);
  for (size_t c = 0; c < comps.size(); ++c)
    for (size_t idx : comps[c]) comp_of[idx] = static_cast<int32_t>(c);
  auto cell_index = [&](const CellIdx& c) -> size_t {
    auto it = std::lower_bound(cells.cells.begin(), cells.cells.end(), c);
    return static_cast<size_t>(it - cells.cells.begin());
  };

  const Rat rx = cells.res[0], ry = cells.res[1];
  auto detour_for = [&](const HitSpan& s, std::vector<Point>& detour) -> bool {
    // cluster = union of obstacle components touched by this span
    std::vector<int32_t> ids;
    for (const CellIdx& c : s.touched) ids.push_back(comp_of[cell_index(c)]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    int64_t bi0 = INT64_MAX, bi1 = INT64_MIN, bj0 = INT64_MAX, bj1 = INT64_MIN;
    for (int32_t id : ids)
      for (size_t idx : comps[static_cast<size_t>(id)]) {
        const CellIdx& c = cells.cells[idx];
        bi0 = std::min(bi0, c[0]);
        bi1 = std::max(bi1, c[0]);
        bj0 = std::min(bj0, c[1]);
        bj1 = std::max(bj1, c[1]);
      }
    Point entry = param_point(path, s.seg_lo, s.t_lo);
    Point exitp = param_point(path, s.seg_hi, s.t_hi);

    for (int64_t grow = 2; grow <= 32; grow *= 2) {
      int64_t i0 = bi0 - grow, i1 = bi1 + grow;
      int64_t j0 = bj0 - grow, j1 = bj1 + grow;
      int64_t W = i1 - i0 + 1, H = j1 - j0 + 1;
      if (W * H > 4'000'000) return false;
      size_t N = static_cast<size_t>(W * H);
      std::vector<uint8_t> wall(N, 0);
      for (const CellIdx& c : cells.cells)
        if (c[0] >= i0 && c[0] <= i1 && c[1] >= j0 && c[1] <= j1)
          wall[static_cast<size_t>((c[1] - j0) * W + (c[0] - i0))] = 1;
      auto node_of = [&](int64_t i, int64_t j) {
        return static_cast<size_t>((j - j0) * W + (i - i0));
      };
      // free cell whose closed box contains the point
      auto locate = [&](const Point& p) -> int64_t {
        int64_t pi = to_long(floor_div(p.x[0], rx));
        int64_t pj = to_long(floor_div(p.x[1], ry));
        for (int64_t di = 0; di >= -1; --di)
          for (int64_t dj = 0; dj >= -1; --dj) {
            int64_t qi = pi + di, qj = pj + dj;
            if (qi < i0 || qi > i1 || qj < j0 || qj > j1) continue;
            if (wall[node_of(qi, qj)]) continue;
            CellIdx q{qi, qj, 0};
            if (p.x[0] >= cells.lo(q, 0) && p.x[0] <= cells.hi(q, 0) &&
                p.x[1] >= cells.lo(q, 1) && p.x[1] <= cells.hi(q, 1))
              return static_cast<int64_t>(node_of(qi, qj));
          }
        return -1;
      };
      int64_t start = locate(entry), goal = locate(exitp);
      if (start < 0 || goal < 0) continue;

      const int64_t SC = int64_t(1) << 30;
      const int64_t cax = std::llround(to_double(rx) * SC);
      const int64_t cay = std::llround(to_double(ry) * SC);
      const int64_t cdi =
          std::llround(std::hypot(to_double(rx), to_double(ry)) * SC);
      const int di8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
      const int dj8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
      const int64_t cost8[8] = {cax, cax, cay, cay, cdi, cdi, cdi, cdi};
      const int64_t INF = std::numeric_limits<int64_t>::max();
      std::vector<int64_t> dist(N, INF);
      std::vector<int32_t> par(N, -1);
      using QE = std::pair<int64_t, int64_t>;
      std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
      dist[static_cast<size_t>(start)] = 0;
      pq.emplace(0, start);
      while (!pq.empty()) {
        auto [cd, u] = pq.top();
        pq.pop();
        if (cd != dist[static_cast<size_t>(u)]) continue;
        if (u == goal) break;
        int64_t ui = i0 + (u % W), uj = j0 + (u / W);
        for (int k = 0; k < 8; ++k) {
          int64_t vi = ui + di8[k], vj = uj + dj8[k];
          if (vi < i0 || vi > i1 || vj < j0 || vj > j1) continue;
          size_t vs = node_of(vi, vj);
          if (wall[vs]) continue;
          int64_t nd = cd + cost8[k];
          if (nd < dist[vs]) {
            dist[vs] = nd;
            par[vs] = static_cast<int32_t>(u);
            pq.emplace(nd, static_cast<int64_t>(vs));
          }
        }
      }
      if (dist[static_cast<size_t>(goal)] == INF) continue;
      std::vector<Point> pts;
      for (int64_t u = goal; u != -1; u = par[static_cast<size_t>(u)]) {
        int64_t ui = i0 + (u % W), uj = j0 + (u / W);
        pts.push_back(cells.center({ui, uj, 0}));
        if (u == start) break;
      }
      std::reverse(pts.begin(), pts.end());
      pts.insert(pts.begin(), entry);
      pts.push_back(exitp);
      smooth_free_runs(pts, cells);
      detour = std::move(pts);
      return true;
    }
    return false;
  };

  // Rebuild once, splicing detours in order.
  std::vector<Point> rebuilt;
  size_t next_vertex = 0;
  for (const auto& s : spans) {
    bool at_start = s.lo.n.sign() == 0;
    bool at_end =
        !frac_lt(s.hi, Frac{Ext(Rat(static_cast<long>(path.segments()))), Ext(1)});
    std::vector<Point> detour;
    bool ok = !at_start && !at_end && detour_for(s, detour);
    // vertices strictly before the span entry
    while (next_vertex < path.v.size() &&
           frac_lt(Frac{Ext(Rat(static_cast<long>(next_vertex))), Ext(1)}, s.lo)) {
      rebuilt.push_back(path.v[next_vertex++]);
    }
    if (ok) {
      ++out.detours;
      for (auto& p : detour)
        if (rebuilt.empty() || !(rebuilt.back() == p)) rebuilt.push_back(p);
    } else {
      out.complete = false;
      // keep the original crossing: copy vertices through the span
    }
    // skip original vertices covered by the span when detoured
    if (ok) {
      while (next_vertex < path.v.size() &&
             frac_le(Frac{Ext(Rat(static_cast<long>(next_vertex))), Ext(1)}, s.hi))
        ++next_vertex;
    }
  }
  while (next_vertex < path.v.size()) rebuilt.push_back(path.v[next_vertex++]);

  out.path = PolyPath(rebuilt);
  out.added = poly_len_d(out.path.v, euclid) - poly_len_d(path.v, euclid);
  if (out.added > C * out.covered_in + to_double(delta) * (1 + 1e-9))
    out.complete = false;
  return out;
}

WitnessReport cone_witness(const CellSet& cells, const Point& x, const Point& y,
                           const Rat& delta, int attempts) {
  if (x == y) throw std::invalid_argument("cone_witness: x == y");
  if (delta.sign() <= 0)
    throw std::invalid_argument("cone_witness: delta must be positive");
  if (x.dim != 2 || y.dim != 2)
    throw std::invalid_argument("cone_witness: 2d points required");

  Point d = y - x;
  Point perp(-d.x[1], d.x[0]);
  Rat upper = rat_upper_sqrt(norm2(d));
  Rat rho = delta / upper;  // |s * rho * perp| <= |s| * delta
  Point mid = (x + y).scaled(Ext(Rat(1, 2)));

  Norm euclid = Norm::euclid();
  double L = euclid.length(d);
  double bound = std::sqrt(L * L + 4 * to_double(delta) * to_double(delta));

  // s = 0, then +-odd/2^k ascending: a deterministic sweep of the mid-disk.
  std::vector<Rat> svals{Rat(0)};
  for (int k = 1; static_cast<int>(svals.size()) < attempts && k <= 20; ++k)
    for (int64_t num = 1; num < (int64_t(1) << k);  num += 2) {
      svals.emplace_back(num, int64_t(1) << k);
      svals.emplace_back(-num, int64_t(1) << k);
      if (static_cast<int>(svals.size()) >= attempts) break;
    }
  if (static_cast<int>(svals.size()) > attempts) svals.resize(attempts);

  for (size_t t = 0; t < svals.size(); ++t) {
    Point z = mid + perp.scaled(Ext(svals[t] * rho));
    if (!segment_clear(cells, x, z) || !segment_clear(cells, z, y)) continue;
    WitnessReport rep;
    rep.status = WitnessStatus::Found;
    rep.path = PolyPath({x, z, y});
    double len = euclid.length(z - x) + euclid.length(y - z);
    if (len > bound * (1 + 1e-9))
      throw std::logic_error("cone_witness: length bound violated");
    rep.excess = len - L;
    rep.intersection_components = 0;
    rep.hint = VerdictHint::NullLike;
    std::ostringstream os;
    os << "attempt " << (t + 1) << " of " << attempts << ", offset "
       << rat_to_string(svals[t]) << " of the disk radius";
    rep.provenance = os.str();
    return rep;
  }
  WitnessReport rep;
  rep.status = WitnessStatus::NotFound;
  rep.hint = VerdictHint::Blocked;
  rep.excess = -1;
  std::ostringstream os;
  os << "no clear double cone after " << attempts << " attempts";
  rep.provenance = os.str();
  return rep;
}

// ---------------------------------------------------------------------------
// finite_type_witness_2d
// ---------------------------------------------------------------------------

namespace {

// u = coordinate along the segment's axis, v = across it.
struct LineFrame {
  int axis = 0;  // 0: horizontal segment, 1: vertical
  Ext u(const Point& p) const { return p.x[axis]; }
  Ext v(const Point& p) const { return p.x[1 - axis]; }
  Point world(const Ext& uu, const Ext& vv) const {
    return axis == 0 ? Point(uu, vv) : Point(vv, uu);
  }
};

// Slab decomposition of the closed region bounded by a simple rectilinear
// polygon into axis boxes (exact; boxes overlap only on edges).
std::vector<Box2> polygon_boxes(const Loop& lp) {
  const auto& V = lp.v;
  const size_t n = V.size();
  if (n < 4) throw std::invalid_argument("polygon_boxes: degenerate polygon");
  std::vector<Ext> xs;
  xs.reserve(n);
  for (const auto& p : V) xs.push_back(p.x[0]);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  struct HEdge {
    Ext x0, x1, y;
  };
  std::vector<HEdge> hedges;
  for (size_t i = 0; i < n; ++i) {
    const Point& p = V[i];
    const Point& q = V[(i + 1) % n];
    if (p.x[1] == q.x[1] && !(p.x[0] == q.x[0]))
      hedges.push_back({std::min(p.x[0], q.x[0]), std::max(p.x[0], q.x[0]), p.x[1]});
  }
  std::vector<Box2> out;
  for (size_t s = 0; s + 1 < xs.size(); ++s) {
    const Ext& xa = xs[s];
    const Ext& xb = xs[s + 1];
    std::vector<Ext> ys;
    for (const auto& e : hedges)
      if (e.x0 <= xa && xb <= e.x1) ys.push_back(e.y);
    std::sort(ys.begin(), ys.end());
    if (ys.size() % 2 != 0)
      throw std::logic_error("polygon_boxes: odd crossing count");
    for (size_t t = 0; t + 1 < ys.size(); t += 2) {
      if (ys[t] == ys[t + 1]) continue;
      out.push_back({xa, ys[t], xb, ys[t + 1]});
    }
  }
  return out;
}

struct SlicePiece {
  Word w;
  Similarity sim;
  Rat sr;
  Ext u0, u1;  // scaled loop bbox span along the line
};

// Exact dist(segment xy, ball(c, r)) > 0 test: true when the closed ball
// provably misses the closed segment.
bool ball_misses_segment(const Point& c, const Rat& r, const Point& x,
                         const Point& y) {
  Point d = y - x;
  Point w = c - x;
  Ext tden = norm2(d);
  Ext tnum = w.x[0] * d.x[0] + w.x[1] * d.x[1];
  Ext r2 = Ext(r * r);
  if (tnum.sign() <= 0) return norm2(w) > r2;
  if (tnum >= tden) return dist2(c, y) > r2;
  return norm2(w) * tden - tnum * tnum > r2 * tden;
}

}  // namespace

WitnessReport finite_type_witness_2d(const IFSSystem& ifs,
                                     const NeighborClosure& closure,
                                     const std::vector<Point>& h_points,
                                     const CoverSequence& layers,
                                     const LoopResult& loop, const Point& x,
                                     const Point& y, const Rat& delta) {
  if (ifs.dim != 2 || x.dim != 2 || y.dim != 2)
    throw std::invalid_argument("finite_type_witness_2d: planar inputs required");
  if (closure.status != ClosureStatus::Stabilized)
    throw std::invalid_argument(
        "finite_type_witness_2d: neighbor closure not stabilized");
  if (h_points.empty())
    throw std::invalid_argument(
        "finite_type_witness_2d: empty intersection point set");
  if (loop.loop.v.size() < 4)
    throw std::invalid_argument("finite_type_witness_2d: degenerate loop");
  if (delta.sign() <= 0)
    throw std::invalid_argument("finite_type_witness_2d: delta must be positive");
  if (x == y)
    throw std::invalid_argument("finite_type_witness_2d: x == y");

  const Norm euclid = Norm::euclid();
  const Rat quarter = delta / 4;

  // Reference approximation for the intersection report.
  const int ref_level = 8;
  Rat rho8 = level_rho(ifs, ref_level);
  CellSet ref = approximate(ifs, rho8, rho8 / 2);

  // A straight segment that certifiably misses K needs no construction
  // (any direction). Branch and bound on piece balls.
  {
    bool miss = true;
    std::vector<std::pair<Similarity, Rat>> stack{{identity_map(2), Rat(1)}};
    Rat floor_sr = level_rho(ifs, ref_level);
    while (!stack.empty() && miss) {
      auto [sim, sr] = stack.back();
      stack.pop_back();
      Point c = sim.apply(ifs.center);
      if (ball_misses_segment(c, sr * ifs.radius, x, y)) continue;
      if (sr <= floor_sr) {
        miss = false;
        break;
      }
      for (const auto& f : ifs.maps) stack.emplace_back(compose(sim, f), sr * f.ratio);
    }
    if (miss) {
      WitnessReport rep;
      rep.status = WitnessStatus::Found;
      rep.path = PolyPath({x, y});
      rep.excess = 0;
      rep.intersection_components = 0;
      rep.level = ref_level;
      rep.hint = VerdictHint::NullLike;
      rep.provenance = "segment certifiably misses the attractor";
      return rep;
    }
  }

  // Axis-parallel segment and axis-aligned maps from here on.
  LineFrame fr;
  if (x.x[1] == y.x[1])
    fr.axis = 0;
  else if (x.x[0] == y.x[0])
    fr.axis = 1;
  else
    throw std::invalid_argument(
        "finite_type_witness_2d: axis-parallel segment required");
  for (const auto& f : ifs.maps) {
    if (!f.exact || !(f.O[0][1] == Ext(0)) || !(f.O[1][0] == Ext(0)))
      throw std::invalid_argument(
          "finite_type_witness_2d: axis-aligned similarity maps required");
  }

  detail::PuncturedSet whole{identity_map(2), {}};
  if (!detail::certify_point_distance(ifs, whole, x, quarter) ||
      !detail::certify_point_distance(ifs, whole, y, quarter))
    throw std::invalid_argument(
        "finite_type_witness_2d: endpoint within delta/4 of the attractor");

  // Base loop geometry: interior boxes, bounding box, exact perimeter.
  const std::vector<Box2> base_boxes = polygon_boxes(loop.loop);
  Ext bb_x0 = loop.loop.v[0].x[0], bb_x1 = bb_x0;
  Ext bb_y0 = loop.loop.v[0].x[1], bb_y1 = bb_y0;
  for (const auto& p : loop.loop.v) {
    bb_x0 = std::min(bb_x0, p.x[0]);
    bb_x1 = std::max(bb_x1, p.x[0]);
    bb_y0 = std::min(bb_y0, p.x[1]);
    bb_y1 = std::max(bb_y1, p.x[1]);
  }
  Ext corner_max(0);
  for (const Ext& cx : {bb_x0, bb_x1})
    for (const Ext& cy : {bb_y0, bb_y1})
      corner_max = std::max(corner_max, dist2(Point(cx, cy), ifs.center));
  Rat rbb = std::max(rat_upper_sqrt(corner_max), ifs.radius);
  const Ext lalpha = loop.loop.length_upper;

  const Ext ux_raw = fr.u(x), uy_raw = fr.u(y);
  const bool flipped = uy_raw < ux_raw;
  const Ext ux = flipped ? uy_raw : ux_raw;
  const Ext uy = flipped ? ux_raw : uy_raw;
  const Ext vbase = fr.v(x);

  // Collect curtailed pieces whose scaled loop bbox crosses the line v = v0.
  auto collect = [&](const Rat& rho, const Ext& v0, std::vector<SlicePiece>& out,
                     size_t cap) -> bool {
    struct Node {
      Word w;
      Similarity sim;
      Rat sr;
    };
    std::vector<Node> stack{{Word{}, identity_map(2), Rat(1)}};
    while (!stack.empty()) {
      Node nd = std::move(stack.back());
      stack.pop_back();
      Point c = nd.sim.apply(ifs.center);
      if (abs(fr.v(c) - v0) > Ext(nd.sr * rbb)) continue;
      if (nd.sr <= rho) {
        Point c1 = nd.sim.apply(Point(bb_x0, bb_y0));
        Point c2 = nd.sim.apply(Point(bb_x1, bb_y1));
        Ext pv0 = std::min(fr.v(c1), fr.v(c2)), pv1 = std::max(fr.v(c1), fr.v(c2));
        if (v0 < pv0 || v0 > pv1) continue;
        SlicePiece sp;
        sp.w = nd.w;
        sp.sim = nd.sim;
        sp.sr = nd.sr;
        sp.u0 = std::min(fr.u(c1), fr.u(c2));
        sp.u1 = std::max(fr.u(c1), fr.u(c2));
        out.push_back(std::move(sp));
        if (out.size() > cap) return false;
        continue;
      }
      for (int i = static_cast<int>(ifs.maps.size()) - 1; i >= 0; --i) {
        Node ch;
        ch.w = nd.w;
        ch.w.push_back(i);
        ch.sim = compose(nd.sim, ifs.maps[static_cast<size_t>(i)]);
        ch.sr = nd.sr * ifs.maps[static_cast<size_t>(i)].ratio;
        stack.push_back(std::move(ch));
      }
    }
    return true;
  };

  struct Built {
    std::vector<Point> world_pts;
    Ext excess;
    std::string note;
  };

  // Walk construction for a fixed line and admissible piece set. Returns
  // false when loop unions stay disconnected after escalation or the length
  // budget breaks; the caller then refines the scale.
  auto build = [&](const Ext& v0, std::vector<SlicePiece> pieces, size_t n_disks,
                   size_t max_per_disk, Built& out) -> bool {
    int escalations = 0;
    for (;; ++escalations) {
      if (escalations > 12) return false;
      // budget check (re-done after every escalation)
      Rat sum_sr(0);
      for (const auto& p : pieces) sum_sr += p.sr;
      if (Ext(sum_sr) * lalpha > Ext(delta / 2)) return false;

      // groups = connected components of overlapping bbox spans on the line
      std::sort(pieces.begin(), pieces.end(),
                [](const SlicePiece& a, const SlicePiece& b) {
                  if (a.u0 < b.u0) return true;
                  if (b.u0 < a.u0) return false;
                  return a.u1 < b.u1;
                });
      struct Group {
        std::vector<size_t> members;
        Ext u0, u1;
      };
      std::vector<Group> groups;
      for (size_t i = 0; i < pieces.size(); ++i) {
        if (!groups.empty() && pieces[i].u0 <= groups.back().u1) {
          groups.back().members.push_back(i);
          groups.back().u1 = std::max(groups.back().u1, pieces[i].u1);
        } else {
          groups.push_back({{i}, pieces[i].u0, pieces[i].u1});
        }
      }

      struct Stretch {
        Ext A, B;
        std::vector<Point> arc;  // frame points from (A, v0) to (B, v0)
      };
      std::vector<Stretch> stretches;
      bool failed_group = false;
      std::vector<size_t> failing;
      for (const auto& g : groups) {
        std::vector<Box2> boxes;
        boxes.reserve(g.members.size() * base_boxes.size());
        for (size_t m : g.members) {
          const auto& sp = pieces[m];
          for (const auto& b : base_boxes) {
            Point c1 = sp.sim.apply(Point(b.x0, b.y0));
            Point c2 = sp.sim.apply(Point(b.x1, b.y1));
            Box2 fb;
            fb.x0 = std::min(fr.u(c1), fr.u(c2));
            fb.x1 = std::max(fr.u(c1), fr.u(c2));
            fb.y0 = std::min(fr.v(c1), fr.v(c2));
            fb.y1 = std::max(fr.v(c1), fr.v(c2));
            boxes.push_back(fb);
          }
        }
        Loop gl;
        try {
          gl = outer_boundary(boxes);
        } catch (const std::runtime_error&) {
          failed_group = true;
          failing = g.members;
          break;
        }
        // crossings of the group boundary with the line
        const auto& V = gl.v;
        const size_t n = V.size();
        struct Cross {
          Ext u;
          size_t edge;
        };
        std::vector<Cross> crossings;
        for (size_t i = 0; i < n; ++i) {
          const Point& p = V[i];
          const Point& q = V[(i + 1) % n];
          if (p.x[0] == q.x[0]) {  // frame-vertical edge
            if (std::min(p.x[1], q.x[1]) <= v0 && v0 <= std::max(p.x[1], q.x[1]))
              crossings.push_back({p.x[0], i});
          } else if (p.x[1] == v0) {  // frame-horizontal edge on the line
            crossings.push_back({std::min(p.x[0], q.x[0]), i});
            crossings.push_back({std::max(p.x[0], q.x[0]), i});
          }
        }
        if (crossings.empty()) continue;  // group never blocks the line
        size_t iA = 0, iB = 0;
        for (size_t i = 1; i < crossings.size(); ++i) {
          if (crossings[i].u < crossings[iA].u) iA = i;
          if (crossings[iB].u < crossings[i].u) iB = i;
        }
        Point pA(crossings[iA].u, v0);
        Point pB(crossings[iB].u, v0);
        size_t eA = crossings[iA].edge, eB = crossings[iB].edge;
        std::vector<Point> fwd{pA}, bwd{pA};
        if (eA != eB) {
          for (size_t i = (eA + 1) % n;; i = (i + 1) % n) {
            fwd.push_back(V[i]);
            if (i == eB) break;
          }
          for (size_t i = eA;; i = (i + n - 1) % n) {
            bwd.push_back(V[i]);
            if (i == (eB + 1) % n) break;
          }
        }
        fwd.push_back(pB);
        bwd.push_back(pB);
        auto arclen = [](const std::vector<Point>& a) {
          double s = 0;
          for (size_t i = 0; i + 1 < a.size(); ++i)
            s += std::abs(a[i + 1].xd(0) - a[i].xd(0)) +
                 std::abs(a[i + 1].xd(1) - a[i].xd(1));
          return s;
        };
        Stretch st;
        st.A = pA.x[0];
        st.B = pB.x[0];
        st.arc = arclen(fwd) <= arclen(bwd) ? std::move(fwd) : std::move(bwd);
        stretches.push_back(std::move(st));
      }
      if (failed_group) {
        // replace the failing members by their parents and regroup globally
        std::vector<Word> words;
        words.reserve(pieces.size());
        std::vector<char> is_failing(pieces.size(), 0);
        for (size_t m : failing) is_failing[m] = 1;
        for (size_t i = 0; i < pieces.size(); ++i) {
          Word w = pieces[i].w;
          if (is_failing[i]) {
            if (w.empty()) return false;  // already at the root
            w.pop_back();
          }
          words.push_back(std::move(w));
        }
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        std::vector<Word> pruned;
        for (const auto& w : words) {
          bool covered = false;
          for (const auto& p : pruned)
            if (p.size() <= w.size() && std::equal(p.begin(), p.end(), w.begin())) {
              covered = true;
              break;
            }
          if (!covered) pruned.push_back(w);
        }
        std::vector<SlicePiece> next;
        for (const auto& w : pruned) {
          SlicePiece sp;
          sp.w = w;
          sp.sim = compose(ifs, w);
          sp.sr = sp.sim.ratio;
          Point c1 = sp.sim.apply(Point(bb_x0, bb_y0));
          Point c2 = sp.sim.apply(Point(bb_x1, bb_y1));
          sp.u0 = std::min(fr.u(c1), fr.u(c2));
          sp.u1 = std::max(fr.u(c1), fr.u(c2));
          next.push_back(std::move(sp));
        }
        pieces = std::move(next);
        continue;
      }

      // assemble left to right along the line, connectors at both ends
      std::sort(stretches.begin(), stretches.end(),
                [](const Stretch& a, const Stretch& b) { return a.A < b.A; });
      std::vector<Point> pts;  // frame coordinates
      pts.emplace_back(ux, vbase);
      pts.emplace_back(ux, v0);
      for (const auto& st : stretches) {
        if (st.B < ux || uy < st.A) continue;  // beside the segment
        if (st.A <= ux || uy <= st.B)
          throw std::logic_error(
              "finite_type_witness_2d: loop region reaches an endpoint");
        for (const auto& p : st.arc)
          if (!(pts.back() == p)) pts.push_back(p);
      }
      pts.emplace_back(uy, v0);
      pts.emplace_back(uy, vbase);

      // exact rectilinear length and the bound
      Ext total(0);
      for (size_t i = 0; i + 1 < pts.size(); ++i) {
        Ext du = abs(pts[i + 1].x[0] - pts[i].x[0]);
        Ext dv = abs(pts[i + 1].x[1] - pts[i].x[1]);
        if (du.sign() != 0 && dv.sign() != 0)
          throw std::logic_error("finite_type_witness_2d: non-rectilinear step");
        total = total + du + dv;
      }
      Ext excess = total - (uy - ux);
      if (excess.sign() < 0 || excess > Ext(delta))
        throw std::logic_error("finite_type_witness_2d: length bound violated");

      std::vector<Point> world;
      world.reserve(pts.size());
      for (const auto& p : pts) world.push_back(fr.world(p.x[0], p.x[1]));
      if (flipped) std::reverse(world.begin(), world.end());

      std::ostringstream os;
      os << "pieces " << pieces.size() << " sum_sr " << to_double(sum_sr)
         << " disks " << n_disks << " max_pieces_per_disk " << max_per_disk
         << " stretches " << stretches.size() << " escalations " << escalations;
      out.world_pts = std::move(world);
      out.excess = excess;
      out.note = os.str();
      return true;
    }
  };

  // Scale ladder and parallel-line scan: prefer the offset with the smallest
  // covered slice; admissible when sum_sr * |alpha| <= delta / 2.
  double best_seen = std::numeric_limits<double>::infinity();
  for (int L = 6; L <= 26; L += 2) {
    Rat rho(1, int64_t(1) << L);
    int best_j = 0;
    Rat best_sum(-1);
    std::vector<SlicePiece> best_pieces;
    for (int jj = 0; jj <= 30; ++jj) {
      int j = (jj + 1) / 2 * ((jj % 2) ? 1 : -1);  // 0, +1, -1, +2, -2, ...
      if (jj == 0) j = 0;
      Ext v0 = vbase + Ext(Rat(j) * delta / 64);
      std::vector<SlicePiece> pieces;
      if (!collect(rho, v0, pieces, 6000)) continue;
      Rat sum(0);
      for (const auto& p : pieces) sum += p.sr;
      if (best_sum.sign() < 0 || sum < best_sum) {
        best_sum = sum;
        best_j = j;
        best_pieces = std::move(pieces);
      }
    }
    if (best_sum.sign() < 0) continue;
    best_seen = std::min(best_seen, to_double(best_sum) * lalpha.to_double());
    if (Ext(best_sum) * lalpha > Ext(delta / 2)) continue;

    // disk metadata from merged piece spans (before any escalation)
    size_t n_disks = 0, max_per = 0, cur = 0;
    Ext cur_u1(0);
    std::vector<SlicePiece> sorted = best_pieces;
    std::sort(sorted.begin(), sorted.end(),
              [](const SlicePiece& a, const SlicePiece& b) { return a.u0 < b.u0; });
    for (size_t i = 0; i < sorted.size(); ++i) {
      if (i == 0 || cur_u1 < sorted[i].u0) {
        ++n_disks;
        cur = 1;
        cur_u1 = sorted[i].u1;
      } else {
        ++cur;
        cur_u1 = std::max(cur_u1, sorted[i].u1);
      }
      max_per = std::max(max_per, cur);
    }

    Ext v0 = vbase + Ext(Rat(best_j) * delta / 64);
    Built built;
    if (!build(v0, std::move(best_pieces), n_disks, max_per, built)) continue;

    WitnessReport rep;
    rep.status = WitnessStatus::Found;
    rep.path = PolyPath(built.world_pts);
    rep.excess = built.excess.to_double();
    rep.intersection_components = count_intersections(rep.path, ref).components;
    rep.level = ref_level;
    rep.hint = classify(rep.excess, to_double(delta), rep.intersection_components);
    std::ostringstream os;
    os << "scale 2^-" << L << " offset " << best_j << "/64 delta " << built.note
       << " h_points " << h_points.size() << " layer1 "
       << layers.u1_squares.size();
    rep.provenance = os.str();
    return rep;
  }
  std::ostringstream os;
  os << "finite_type_witness_2d: no admissible parallel line found; best "
        "covered-length bound "
     << best_seen << " against budget " << to_double(delta) / 2;
  throw std::runtime_error(os.str());
}

}  // namespace permea
