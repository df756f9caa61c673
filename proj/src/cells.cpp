#include "permea/cells.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace permea {

CellSet CellSet::make(int dim, const Rat& r) {
  if (r <= 0) throw std::invalid_argument("resolution must be positive");
  CellSet s;
  s.dim = dim;
  s.res = {r, r, r};
  return s;
}

CellSet CellSet::make_rect(const Rat& rx, const Rat& ry) {
  if (rx <= 0 || ry <= 0) throw std::invalid_argument("resolution must be positive");
  CellSet s;
  s.dim = 2;
  s.res = {rx, ry, ry};
  return s;
}

void CellSet::normalize() {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
}

bool CellSet::contains(const CellIdx& c) const {
  return std::binary_search(cells.begin(), cells.end(), c);
}

bool CellSet::same_grid(const CellSet& o) const {
  return dim == o.dim && res[0] == o.res[0] && res[1] == o.res[1] &&
         (dim < 3 || res[2] == o.res[2]);
}

Ext CellSet::diag2() const {
  Ext s(0);
  for (int k = 0; k < dim; ++k) s += Ext(res[k] * res[k]);
  return s;
}

Point CellSet::center(const CellIdx& c) const {
  Point p = Point::zero(dim);
  for (int k = 0; k < dim; ++k) p.x[k] = Ext(Rat(2 * c[k] + 1) * res[k] / 2);
  return p;
}

CellSet CellSet::unioned(const CellSet& o) const {
  if (!same_grid(o)) throw std::invalid_argument("grid mismatch in union");
  CellSet r = *this;
  r.cells.insert(r.cells.end(), o.cells.begin(), o.cells.end());
  r.normalize();
  return r;
}

CellSet CellSet::intersected(const CellSet& o) const {
  if (!same_grid(o)) throw std::invalid_argument("grid mismatch in intersection");
  CellSet r = *this;
  r.cells.clear();
  std::set_intersection(cells.begin(), cells.end(), o.cells.begin(),
                        o.cells.end(), std::back_inserter(r.cells));
  return r;
}

std::vector<std::vector<size_t>> CellSet::components() const {
  std::vector<std::vector<size_t>> out;
  std::vector<char> seen(cells.size(), 0);
  int kmax = dim == 3 ? 1 : 0;
  for (size_t start = 0; start < cells.size(); ++start) {
    if (seen[start]) continue;
    std::vector<size_t> comp, stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      size_t cur = stack.back();
      stack.pop_back();
      comp.push_back(cur);
      const CellIdx& c = cells[cur];
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          for (int dk = -kmax; dk <= kmax; ++dk) {
            if (di == 0 && dj == 0 && dk == 0) continue;
            CellIdx nb{c[0] + di, c[1] + dj, c[2] + dk};
            auto it = std::lower_bound(cells.begin(), cells.end(), nb);
            if (it != cells.end() && *it == nb) {
              size_t idx = size_t(it - cells.begin());
              if (!seen[idx]) {
                seen[idx] = 1;
                stack.push_back(idx);
              }
            }
          }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

Ext CellSet::box_dist2(const CellSet& A, const CellIdx& a, const CellSet& B,
                       const CellIdx& b) {
  Ext s(0);
  for (int k = 0; k < A.dim; ++k) {
    Ext gap(0);
    if (A.lo(a, k) > B.hi(b, k))
      gap = A.lo(a, k) - B.hi(b, k);
    else if (B.lo(b, k) > A.hi(a, k))
      gap = B.lo(b, k) - A.hi(a, k);
    s += gap * gap;
  }
  return s;
}

Ext CellSet::point_dist2(const Point& p, const CellIdx& c) const {
  Ext s(0);
  for (int k = 0; k < dim; ++k) {
    Ext gap(0);
    if (p.x[k] < lo(c, k))
      gap = lo(c, k) - p.x[k];
    else if (p.x[k] > hi(c, k))
      gap = p.x[k] - hi(c, k);
    s += gap * gap;
  }
  return s;
}

bool CellSet::separated_by(const CellSet& other, const Rat& d2) const {
  const CellSet& small = size() <= other.size() ? *this : other;
  const CellSet& big = size() <= other.size() ? other : *this;
  // Window big's lattice around each small cell; beyond the window the axis
  // index gap alone already certifies squared distance > d2.
  std::array<int64_t, 3> ring{};
  for (int k = 0; k < big.dim; ++k) {
    Rat d2k = d2 / (big.res[k] * big.res[k]);
    int64_t r = 1;
    while (Rat(r) * Rat(r) <= d2k) ++r;
    ring[k] = r + 1;
  }
  for (const CellIdx& a : small.cells) {
    std::array<int64_t, 3> base{}, span{};
    for (int k = 0; k < big.dim; ++k) {
      base[k] = to_long(floor_div(small.lo(a, k), big.res[k]));
      span[k] = to_long(floor_div(small.hi(a, k), big.res[k])) - base[k];
    }
    int64_t kr = big.dim == 3 ? ring[2] : 0;
    int64_t ks = big.dim == 3 ? span[2] : 0;
    for (int64_t i = base[0] - ring[0]; i <= base[0] + span[0] + ring[0]; ++i)
      for (int64_t j = base[1] - ring[1]; j <= base[1] + span[1] + ring[1]; ++j)
        for (int64_t k = base[2] - kr; k <= base[2] + ks + kr; ++k) {
          CellIdx b{i, j, k};
          if (!big.contains(b)) continue;
          if (box_dist2(small, a, big, b) <= Ext(d2)) return false;
        }
  }
  return true;
}

bool CellSet::segment_hits(const Point& a, const Point& b,
                           const CellIdx& c) const {
  // Separating axis test: segment and box intersect iff their projections
  // overlap on both coordinate axes and on the segment's normal.
  for (int k = 0; k < 2; ++k) {
    Ext slo = min(a.x[k], b.x[k]), shi = max(a.x[k], b.x[k]);
    if (shi < lo(c, k) || slo > hi(c, k)) return false;
  }
  Ext nx = a.x[1] - b.x[1], ny = b.x[0] - a.x[0];
  int smin = 1, smax = -1;
  for (int ci = 0; ci < 4; ++ci) {
    Ext px = (ci & 1) ? hi(c, 0) : lo(c, 0);
    Ext py = (ci & 2) ? hi(c, 1) : lo(c, 1);
    int s = (nx * (px - a.x[0]) + ny * (py - a.x[1])).sign();
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  return smin <= 0 && smax >= 0;
}

std::vector<CellIdx> CellSet::range_query(const Point& blo,
                                          const Point& bhi) const {
  std::vector<CellIdx> out;
  int64_t i0 = to_long(floor_div(blo.x[0], res[0])) - 1;
  int64_t i1 = to_long(floor_div(bhi.x[0], res[0]));
  for (int64_t i = i0; i <= i1; ++i) {
    if (hi(CellIdx{i, 0, 0}, 0) < blo.x[0]) continue;
    CellIdx from{i, std::numeric_limits<int64_t>::min(),
                 std::numeric_limits<int64_t>::min()};
    auto it = std::lower_bound(cells.begin(), cells.end(), from);
    for (; it != cells.end() && (*it)[0] == i; ++it) {
      bool inside = true;
      for (int k = 1; k < dim; ++k)
        if (hi(*it, k) < blo.x[k] || lo(*it, k) > bhi.x[k]) {
          inside = false;
          break;
        }
      if (inside) out.push_back(*it);
    }
  }
  return out;
}

// --- Rasterization ---

namespace {

// Integer-scaled value a + b*sqrt(3); keeps the hot loops free of rational
// normalization.
struct IE {
  BigInt a, b;
};

int isign(const IE& v) {
  int sa = v.a.sign(), sb = v.b.sign();
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  BigInt d = v.a * v.a - 3 * v.b * v.b;
  int sd = d.sign();
  return sd == 0 ? 0 : (sd > 0 ? sa : sb);
}

IE square(const IE& v) { return {v.a * v.a + 3 * v.b * v.b, 2 * v.a * v.b}; }

}  // namespace

void raster_ball(CellSet& out, const Point& center, const Rat& radius) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (radius < 0) throw std::invalid_argument("negative radius");
  const int dim = out.dim;
  // Common denominator: the inner loop then runs on integers only.
  BigInt D = 1;
  for (int k = 0; k < dim; ++k) {
    D = boost::multiprecision::lcm(D, denominator(center.x[k].a));
    D = boost::multiprecision::lcm(D, denominator(center.x[k].b));
    D = boost::multiprecision::lcm(D, denominator(out.res[k]));
  }
  D = boost::multiprecision::lcm(D, denominator(radius));
  std::array<IE, 3> c{};
  std::array<BigInt, 3> s{};
  for (int k = 0; k < dim; ++k) {
    c[k] = {numerator(center.x[k].a * D), numerator(center.x[k].b * D)};
    s[k] = numerator(out.res[k] * D);
  }
  BigInt r = numerator(radius * D);
  IE r2{r * r, 0};

  std::array<int64_t, 3> a{}, b{};
  for (int k = 0; k < dim; ++k) {
    a[k] = to_long(floor_div(center.x[k] - Ext(radius), out.res[k])) - 1;
    b[k] = to_long(floor_div(center.x[k] + Ext(radius), out.res[k])) + 1;
  }
  // Squared distance from the center to the cell's slab on one axis.
  auto gap2 = [&](int k, int64_t i) -> IE {
    BigInt l = i * s[k];
    IE d{c[k].a - l, c[k].b};
    if (isign(d) < 0) return square(IE{-d.a, -d.b});
    d.a -= s[k];
    if (isign(d) > 0) return square(d);
    return {0, 0};
  };
  auto within = [&](const IE& g) {
    return isign(IE{g.a - r2.a, g.b - r2.b}) <= 0;
  };
  std::vector<IE> gy;
  if (dim >= 2)
    for (int64_t j = a[1]; j <= b[1]; ++j) gy.push_back(gap2(1, j));
  for (int64_t i = a[0]; i <= b[0]; ++i) {
    IE gx = gap2(0, i);
    if (!within(gx)) continue;
    if (dim == 1) {
      out.add(i, 0, 0);
      continue;
    }
    for (int64_t j = a[1]; j <= b[1]; ++j) {
      const IE& g1 = gy[size_t(j - a[1])];
      IE gxy{gx.a + g1.a, gx.b + g1.b};
      if (!within(gxy)) continue;
      if (dim == 2) {
        out.add(i, j);
        continue;
      }
      for (int64_t k = a[2]; k <= b[2]; ++k) {
        IE g = gap2(2, k);
        if (within(IE{gxy.a + g.a, gxy.b + g.b})) out.add(i, j, k);
      }
    }
  }
}

void raster_box(CellSet& out, const Point& blo, const Point& bhi) {
  const int dim = out.dim;
  std::array<int64_t, 3> a{}, b{};
  for (int k = 0; k < dim; ++k) {
    a[k] = to_long(floor_div(blo.x[k], out.res[k]));
    // A box starting exactly on a lattice line also touches the cell below.
    if (Ext(Rat(a[k]) * out.res[k]) == blo.x[k]) --a[k];
    b[k] = to_long(floor_div(bhi.x[k], out.res[k]));
  }
  for (int64_t i = a[0]; i <= b[0]; ++i)
    for (int64_t j = (dim > 1 ? a[1] : 0); j <= (dim > 1 ? b[1] : 0); ++j)
      for (int64_t k = (dim > 2 ? a[2] : 0); k <= (dim > 2 ? b[2] : 0); ++k)
        out.add(i, j, k);
}

void raster_segment(CellSet& out, const Point& a, const Point& b) {
  if (out.dim != 2) throw std::invalid_argument("segment raster is 2d");
  const Point& p = a.x[0] <= b.x[0] ? a : b;
  const Point& q = a.x[0] <= b.x[0] ? b : a;
  Ext dx = q.x[0] - p.x[0], dy = q.x[1] - p.x[1];
  int64_t i0 = to_long(floor_div(p.x[0], out.res[0])) - 1;
  int64_t i1 = to_long(floor_div(q.x[0], out.res[0]));
  for (int64_t i = i0; i <= i1; ++i) {
    // Clip the parameter interval against the closed column slab.
    Ext y0, y1;
    if (dx.sign() == 0) {
      Ext cl = Ext(Rat(i) * out.res[0]), ch = Ext(Rat(i + 1) * out.res[0]);
      if (p.x[0] < cl || p.x[0] > ch) continue;
      y0 = min(p.x[1], q.x[1]);
      y1 = max(p.x[1], q.x[1]);
    } else {
      Ext t0(0), t1(1);
      Ext tl = (Ext(Rat(i) * out.res[0]) - p.x[0]) / dx;
      Ext th = (Ext(Rat(i + 1) * out.res[0]) - p.x[0]) / dx;
      if (tl > t0) t0 = tl;
      if (th < t1) t1 = th;
      if (t0 > t1) continue;
      y0 = p.x[1] + t0 * dy;
      y1 = p.x[1] + t1 * dy;
      if (y0 > y1) std::swap(y0, y1);
    }
    int64_t j0 = to_long(floor_div(y0, out.res[1]));
    int64_t j1 = to_long(floor_div(y1, out.res[1]));
    // Exact contact with a lattice row line also touches the row below.
    if (Ext(Rat(j0) * out.res[1]) == y0) --j0;
    for (int64_t j = j0; j <= j1; ++j) out.add(i, j);
  }
}

CellSet neighborhood(const CellSet& src, const Rat& eps) {
  if (eps < 0) throw std::invalid_argument("negative eps");
  CellSet out = src;
  out.cells.clear();
  Rat e2 = eps * eps;
  // Offsets are grid-translation invariant: precompute them once.
  std::array<int64_t, 3> ring{};
  for (int k = 0; k < src.dim; ++k) {
    int64_t r = 0;
    while (Rat(r) * src.res[k] < eps) ++r;
    ring[k] = r + 1;
  }
  int64_t kr = src.dim == 3 ? ring[2] : 0;
  std::vector<CellIdx> offs;
  for (int64_t di = -ring[0]; di <= ring[0]; ++di)
    for (int64_t dj = -ring[1]; dj <= ring[1]; ++dj)
      for (int64_t dk = -kr; dk <= kr; ++dk) {
        Rat g2 = 0;
        int64_t d[3] = {di, dj, dk};
        for (int k = 0; k < src.dim; ++k) {
          int64_t m = std::max<int64_t>(std::abs(d[k]) - 1, 0);
          g2 += Rat(m) * Rat(m) * src.res[k] * src.res[k];
        }
        if (g2 <= e2) offs.push_back({di, dj, dk});
      }
  out.cells.reserve(src.cells.size() * offs.size());
  for (const CellIdx& c : src.cells)
    for (const CellIdx& o : offs)
      out.cells.push_back({c[0] + o[0], c[1] + o[1], c[2] + o[2]});
  out.normalize();
  return out;
}

CellSet neighborhood(int dim, const Rat& res, const std::vector<Point>& pts,
                     const Rat& eps) {
  CellSet out = CellSet::make(dim, res);
  for (const Point& p : pts) raster_ball(out, p, eps);
  out.normalize();
  return out;
}

}  // namespace permea
