#include "permea/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace permea {

namespace {

// A pair of refined pieces: the left piece f_u(B) against the right piece
// g_v(B) where g_v already includes the outer neighbor map (g_v = h o f_v).
// The ball B(center, radius) is forward-invariant, so every child piece stays
// inside its parent ball and pruning a non-meeting pair is sound at any depth.
struct PairNode {
  Similarity fu, gv;
};

bool node_meets(const IFSSystem& ifs, const PairNode& n, const Rat& eps_total) {
  Point cu = n.fu.apply(ifs.center);
  Point cv = n.gv.apply(ifs.center);
  Rat reach = (n.fu.ratio + n.gv.ratio) * ifs.radius + eps_total;
  return dist2(cu, cv) <= Ext(reach * reach);
}

void expand_node(const IFSSystem& ifs, const PairNode& n, bool left,
                 std::vector<PairNode>& stack) {
  for (int k = static_cast<int>(ifs.maps.size()) - 1; k >= 0; --k) {
    if (left)
      stack.push_back({compose(n.fu, ifs.maps[k]), n.gv});
    else
      stack.push_back({n.fu, compose(n.gv, ifs.maps[k])});
  }
}

// True if some pair of pieces at ratio <= rho on both sides still meets after
// fattening by eps_total. Conservative: returns true when the node budget
// runs out before a verdict.
bool pairs_meet(const IFSSystem& ifs, const Similarity& h, const Rat& rho,
                const Rat& eps_total, size_t budget) {
  std::vector<PairNode> stack{{identity_map(ifs.dim), h}};
  while (!stack.empty()) {
    if (budget-- == 0) return true;
    PairNode n = std::move(stack.back());
    stack.pop_back();
    if (!node_meets(ifs, n, eps_total)) continue;
    bool u_done = n.fu.ratio <= rho;
    bool v_done = n.gv.ratio <= rho;
    if (u_done && v_done) return true;
    bool left = !u_done && (v_done || n.fu.ratio >= n.gv.ratio);
    expand_node(ifs, n, left, stack);
  }
  return false;
}

// Refines the given pairs until both sides reach ratio <= rho, dropping pairs
// whose fattened balls separate. Sets capped when the node budget or the
// survivor cap was hit (the returned list is then incomplete).
std::vector<PairNode> refine_survivors(const IFSSystem& ifs, std::vector<PairNode> start,
                                       const Rat& rho, const Rat& eps_total, size_t budget,
                                       size_t max_survivors, bool& capped) {
  capped = false;
  std::vector<PairNode> out;
  std::vector<PairNode> stack(start.rbegin(), start.rend());
  while (!stack.empty()) {
    if (budget-- == 0 || out.size() > max_survivors) {
      capped = true;
      return out;
    }
    PairNode n = std::move(stack.back());
    stack.pop_back();
    if (!node_meets(ifs, n, eps_total)) continue;
    bool u_done = n.fu.ratio <= rho;
    bool v_done = n.gv.ratio <= rho;
    if (u_done && v_done) {
      out.push_back(std::move(n));
      continue;
    }
    bool left = !u_done && (v_done || n.fu.ratio >= n.gv.ratio);
    expand_node(ifs, n, left, stack);
  }
  return out;
}

struct NodeGeom {
  std::array<double, 3> c{};
  double r = 0;
};

struct UnionFind {
  std::vector<size_t> parent;
  explicit UnionFind(size_t n) : parent(n) {
    for (size_t i = 0; i < n; ++i) parent[i] = i;
  }
  size_t find(size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Groups survivor pairs whose left balls touch. Grouping only affects how the
// survivors are partitioned for reporting; the per-group enclosures remain
// certified for any partition.
std::vector<std::vector<size_t>> cluster_nodes(const IFSSystem& ifs,
                                               const std::vector<PairNode>& nodes,
                                               std::vector<NodeGeom>& geom) {
  size_t n = nodes.size();
  geom.assign(n, {});
  double maxr = 0;
  double radius = to_double(ifs.radius);
  for (size_t i = 0; i < n; ++i) {
    Point c = nodes[i].fu.apply(ifs.center);
    for (int d = 0; d < ifs.dim; ++d) geom[i].c[d] = c.xd(d);
    geom[i].r = to_double(nodes[i].fu.ratio) * radius;
    maxr = std::max(maxr, geom[i].r);
  }
  UnionFind uf(n);
  auto touches = [&](size_t a, size_t b) {
    double d2 = 0;
    for (int d = 0; d < ifs.dim; ++d) {
      double dd = geom[a].c[d] - geom[b].c[d];
      d2 += dd * dd;
    }
    double rr = (geom[a].r + geom[b].r) * (1 + 1e-9);
    return d2 <= rr * rr;
  };
  if (n <= 4096) {
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j)
        if (touches(i, j)) uf.unite(i, j);
  } else {
    double s = std::max(2 * maxr, 1e-300);
    std::map<std::array<long, 3>, std::vector<size_t>> cells;
    auto cell_of = [&](size_t i) {
      std::array<long, 3> key{0, 0, 0};
      for (int d = 0; d < ifs.dim; ++d) key[d] = static_cast<long>(std::floor(geom[i].c[d] / s));
      return key;
    };
    for (size_t i = 0; i < n; ++i) cells[cell_of(i)].push_back(i);
    int zlo = ifs.dim == 3 ? -1 : 0, zhi = ifs.dim == 3 ? 1 : 0;
    for (size_t i = 0; i < n; ++i) {
      auto base = cell_of(i);
      for (long dx = -1; dx <= 1; ++dx)
        for (long dy = -1; dy <= 1; ++dy)
          for (long dz = zlo; dz <= zhi; ++dz) {
            auto it = cells.find({base[0] + dx, base[1] + dy, base[2] + dz});
            if (it == cells.end()) continue;
            for (size_t j : it->second)
              if (j < i && touches(i, j)) uf.unite(i, j);
          }
    }
  }
  std::map<size_t, size_t> roots;
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < n; ++i) {
    size_t r = uf.find(i);
    auto it = roots.find(r);
    if (it == roots.end()) {
      roots.emplace(r, groups.size());
      groups.push_back({i});
    } else {
      groups[it->second].push_back(i);
    }
  }
  return groups;
}

// Outer diameter of a group: diagonal of the bounding box of its fattened
// left balls. Tracks how a potential intersection component spreads out.
double group_extent(const IFSSystem& ifs, const std::vector<size_t>& g,
                    const std::vector<NodeGeom>& geom) {
  double lo[3], hi[3];
  for (int d = 0; d < ifs.dim; ++d) {
    lo[d] = 1e300;
    hi[d] = -1e300;
  }
  for (size_t idx : g)
    for (int d = 0; d < ifs.dim; ++d) {
      lo[d] = std::min(lo[d], geom[idx].c[d] - geom[idx].r);
      hi[d] = std::max(hi[d], geom[idx].c[d] + geom[idx].r);
    }
  double s = 0;
  for (int d = 0; d < ifs.dim; ++d) s += (hi[d] - lo[d]) * (hi[d] - lo[d]);
  return std::sqrt(s);
}

// Certified ball around a group: center is the member center nearest the
// bounding-box middle; the radius is an exact upper bound over the members'
// fattened left balls, so the group's share of the intersection lies inside.
Enclosure enclose_group(const IFSSystem& ifs, const std::vector<PairNode>& nodes,
                        const std::vector<size_t>& g, const std::vector<NodeGeom>& geom) {
  double lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int d = 0; d < ifs.dim; ++d) {
    lo[d] = 1e300;
    hi[d] = -1e300;
  }
  for (size_t idx : g)
    for (int d = 0; d < ifs.dim; ++d) {
      lo[d] = std::min(lo[d], geom[idx].c[d]);
      hi[d] = std::max(hi[d], geom[idx].c[d]);
    }
  size_t best = g.front();
  double best_d2 = 1e300;
  for (size_t idx : g) {
    double d2 = 0;
    for (int d = 0; d < ifs.dim; ++d) {
      double dd = geom[idx].c[d] - 0.5 * (lo[d] + hi[d]);
      d2 += dd * dd;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = idx;
    }
  }
  Point center = nodes[best].fu.apply(ifs.center);
  Rat radius(0);
  for (size_t idx : g) {
    Point ci = nodes[idx].fu.apply(ifs.center);
    Rat bound = rat_upper_sqrt(dist2(center, ci)) + nodes[idx].fu.ratio * ifs.radius;
    if (bound > radius) radius = bound;
  }
  return {center, radius};
}

bool enclosure_less(const Enclosure& a, const Enclosure& b) {
  for (int d = 0; d < 3; ++d) {
    if (a.center.x[d] != b.center.x[d]) return a.center.x[d] < b.center.x[d];
  }
  return a.radius < b.radius;
}

// Merges overlapping enclosures into joint ones (center from the smallest
// member, radius rechecked exactly), so the final list is pairwise disjoint
// and still covers everything the inputs covered.
std::vector<Enclosure> merge_enclosures(std::vector<Enclosure> in) {
  size_t n = in.size();
  if (n <= 1) return in;
  UnionFind uf(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      Rat rr = in[i].radius + in[j].radius;
      if (dist2(in[i].center, in[j].center) <= Ext(rr * rr)) uf.unite(i, j);
    }
  std::map<size_t, std::vector<size_t>> classes;
  for (size_t i = 0; i < n; ++i) classes[uf.find(i)].push_back(i);
  std::vector<Enclosure> out;
  for (auto& [root, members] : classes) {
    (void)root;
    size_t rep = members.front();
    for (size_t idx : members)
      if (in[idx].radius < in[rep].radius) rep = idx;
    Enclosure joint{in[rep].center, Rat(0)};
    for (size_t idx : members) {
      Rat bound = rat_upper_sqrt(dist2(joint.center, in[idx].center)) + in[idx].radius;
      if (bound > joint.radius) joint.radius = bound;
    }
    out.push_back(std::move(joint));
  }
  std::sort(out.begin(), out.end(), enclosure_less);
  return out;
}

std::string map_key(const Similarity& f) {
  std::string s;
  auto add_ext = [&](const Ext& e) {
    s += rat_to_string(e.a);
    if (e.b != 0) {
      s += "~";
      s += rat_to_string(e.b);
    }
    s += "|";
  };
  s += rat_to_string(f.ratio);
  s += "|";
  for (int r = 0; r < f.dim; ++r)
    for (int c = 0; c < f.dim; ++c) add_ext(f.O[r][c]);
  for (int d = 0; d < f.dim; ++d) add_ext(f.t.x[d]);
  return s;
}

std::string map_key_rounded(const Similarity& f) {
  std::string s;
  char buf[40];
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6e|", v);
    s += buf;
  };
  add(to_double(f.ratio));
  for (int r = 0; r < f.dim; ++r)
    for (int c = 0; c < f.dim; ++c) add(f.O[r][c].to_double());
  for (int d = 0; d < f.dim; ++d) add(f.t.xd(d));
  return s;
}

// Shortest suffix length C with r_max^C <= r_min: expanding a neighbor map by
// one letter on the left and at most C letters on the right is enough to land
// back in the ratio window.
int suffix_bound(const IFSSystem& ifs) {
  int c = 1;
  Rat p = ifs.r_max;
  while (p > ifs.r_min && c < 64) {
    p *= ifs.r_max;
    ++c;
  }
  return c;
}

struct PerMapAnalysis {
  FiniteVerdict verdict = FiniteVerdict::Unknown;
  std::vector<Enclosure> clusters;
};

// Iterative deepening on K against h(K): empty survivors certify an empty
// intersection, shrinking clusters below the target radius certify a finite
// one, and extents that stop shrinking for several levels suggest an infinite
// (positive-dimensional) intersection.
PerMapAnalysis analyze_map(const IFSSystem& ifs, const Similarity& h, int start_level,
                           const Rat& target) {
  const size_t budget = 4000000, survivor_cap = 30000;
  std::vector<PairNode> nodes{{identity_map(ifs.dim), h}};
  double prev = -1;
  int stall = 0;
  double stall_thresh = std::min(0.95, (1.0 + to_double(ifs.r_max)) / 2.0);
  double target_d = to_double(target);
  for (int level = start_level; level <= start_level + 60; ++level) {
    bool capped = false;
    nodes = refine_survivors(ifs, std::move(nodes), level_rho(ifs, level), Rat(0), budget,
                             survivor_cap, capped);
    if (capped) return {};
    if (nodes.empty()) {
      PerMapAnalysis a;
      a.verdict = FiniteVerdict::CertifiedFinite;
      return a;
    }
    std::vector<NodeGeom> geom;
    auto groups = cluster_nodes(ifs, nodes, geom);
    double worst_est = 0, worst_extent = 0;
    for (const auto& g : groups) {
      double extent = group_extent(ifs, g, geom);
      worst_extent = std::max(worst_extent, extent);
      double maxr = 0;
      for (size_t idx : g) maxr = std::max(maxr, geom[idx].r);
      worst_est = std::max(worst_est, extent / 2 + maxr);
    }
    if (worst_est <= 0.9 * target_d) {
      PerMapAnalysis a;
      a.verdict = FiniteVerdict::CertifiedFinite;
      bool ok = true;
      for (const auto& g : groups) {
        Enclosure e = enclose_group(ifs, nodes, g, geom);
        if (e.radius > target) {
          ok = false;
          break;
        }
        a.clusters.push_back(std::move(e));
      }
      if (ok) return a;
    }
    if (prev >= 0 && worst_extent > stall_thresh * prev) {
      if (++stall >= 3) {
        PerMapAnalysis a;
        a.verdict = FiniteVerdict::SuspectedInfinite;
        return a;
      }
    } else {
      stall = 0;
    }
    prev = worst_extent;
  }
  return {};
}

}  // namespace

NeighborClosure neighbor_closure(const IFSSystem& ifs, const Rat& eps, int level,
                                 size_t max_maps) {
  if (eps < 0) throw std::invalid_argument("neighbor_closure: eps must be >= 0");
  if (level < 1) throw std::invalid_argument("neighbor_closure: level must be >= 1");
  if (max_maps == 0) throw std::invalid_argument("neighbor_closure: max_maps must be >= 1");

  NeighborClosure out;
  out.eps = eps;
  out.level = level;
  out.max_maps = max_maps;

  const Rat rho = level_rho(ifs, level);
  const Rat ratio_lo = ifs.r_min, ratio_hi = Rat(1) / ifs.r_min;
  const size_t overlap_budget = 200000;
  const int m = static_cast<int>(ifs.maps.size());
  const Similarity id = identity_map(ifs.dim);
  const double dup_tol = ifs.exact ? 0.0 : 1e-9 * to_double(ifs.diameter());

  std::unordered_map<std::string, std::vector<size_t>> index;
  auto known = [&](const Similarity& f) {
    if (ifs.exact) {
      auto it = index.find(map_key(f));
      if (it == index.end()) return false;
      for (size_t idx : it->second)
        if (same_map(out.maps[idx].map, f, 0.0)) return true;
      return false;
    }
    for (const NeighborMap& nm : out.maps)
      if (same_map(nm.map, f, dup_tol)) return true;
    return false;
  };
  auto remember = [&](const Similarity& f, size_t idx) {
    if (ifs.exact) index[map_key(f)].push_back(idx);
  };
  auto overlaps = [&](const Similarity& h) {
    Rat eps_total = eps * (Rat(1) + h.ratio);
    return pairs_meet(ifs, h, rho, eps_total, overlap_budget);
  };

  std::vector<size_t> frontier;
  bool full = false;
  auto admit = [&](Similarity h, Word wi, Word wj) {
    if (h.ratio < ratio_lo || h.ratio > ratio_hi) return;
    if (same_map(h, id, dup_tol)) return;
    if (known(h)) return;
    if (!overlaps(h)) return;
    if (out.maps.size() >= max_maps) {
      full = true;
      return;
    }
    size_t idx = out.maps.size();
    out.maps.push_back({std::move(h), std::move(wi), std::move(wj)});
    remember(out.maps[idx].map, idx);
    frontier.push_back(idx);
  };

  std::vector<Similarity> inv;
  inv.reserve(m);
  for (int k = 0; k < m; ++k) inv.push_back(inverse(ifs.maps[k]));

  for (int i = 0; i < m && !full; ++i)
    for (int j = 0; j < m && !full; ++j) {
      if (i == j) continue;
      admit(compose(inv[i], ifs.maps[j]), {i}, {j});
    }

  // Right-hand suffix words of length 0..C and their composed maps.
  const int c_bound = suffix_bound(ifs);
  std::vector<std::pair<Word, Similarity>> suffixes;
  suffixes.emplace_back(Word{}, id);
  {
    size_t lo = 0;
    for (int len = 1; len <= c_bound; ++len) {
      size_t hi = suffixes.size();
      for (size_t s = lo; s < hi; ++s)
        for (int k = 0; k < m; ++k) {
          Word w = suffixes[s].first;
          w.push_back(k);
          suffixes.emplace_back(std::move(w), compose(suffixes[s].second, ifs.maps[k]));
        }
      lo = hi;
    }
  }

  while (!frontier.empty() && !full) {
    ++out.rounds;
    std::vector<size_t> current;
    std::swap(current, frontier);
    for (size_t idx : current) {
      if (full) break;
      NeighborMap nm = out.maps[idx];  // copy: out.maps may grow while we expand
      for (int a = 0; a < m && !full; ++a) {
        Similarity left = compose(inv[a], nm.map);
        for (const auto& [bw, bmap] : suffixes) {
          if (full) break;
          Word wi = nm.wi;
          wi.push_back(a);
          Word wj = nm.wj;
          wj.insert(wj.end(), bw.begin(), bw.end());
          admit(compose(left, bmap), std::move(wi), std::move(wj));
        }
      }
    }
  }
  out.status = full ? ClosureStatus::Overflow : ClosureStatus::Stabilized;
  return out;
}

IntersectionSet intersection_points(const IFSSystem& ifs, const NeighborClosure& closure,
                                    const Rat& target_radius) {
  if (closure.status != ClosureStatus::Stabilized)
    throw std::invalid_argument("intersection_points: closure must be stabilized");
  if (target_radius <= 0)
    throw std::invalid_argument("intersection_points: target radius must be positive");

  IntersectionSet out;
  out.status = FiniteVerdict::CertifiedFinite;
  std::vector<Enclosure> junctions, pullback;
  for (const NeighborMap& nm : closure.maps) {
    PerMapAnalysis a = analyze_map(ifs, nm.map, closure.level, target_radius);
    if (a.verdict == FiniteVerdict::SuspectedInfinite)
      out.status = FiniteVerdict::SuspectedInfinite;
    else if (a.verdict == FiniteVerdict::Unknown && out.status != FiniteVerdict::SuspectedInfinite)
      out.status = FiniteVerdict::Unknown;
    if (a.verdict != FiniteVerdict::CertifiedFinite) continue;
    Similarity fw = compose(ifs, nm.wi);
    for (const Enclosure& e : a.clusters) {
      pullback.push_back(e);
      junctions.push_back({fw.apply(e.center), fw.ratio * e.radius});
    }
  }
  out.points = merge_enclosures(std::move(junctions));
  out.pullback = merge_enclosures(std::move(pullback));
  return out;
}

std::vector<PairReport> pairwise_finiteness(const IFSSystem& ifs, int level_lo, int level_hi) {
  if (level_lo < 1 || level_hi < level_lo)
    throw std::invalid_argument("pairwise_finiteness: need 1 <= level_lo <= level_hi");
  const size_t budget = 6000000, survivor_cap = 30000;
  const int m = static_cast<int>(ifs.maps.size());
  std::vector<PairReport> out;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      PairReport rep;
      rep.i = i;
      rep.j = j;
      std::vector<PairNode> nodes{{ifs.maps[i], ifs.maps[j]}};
      bool decided = false;
      for (int level = level_lo; level <= level_hi; ++level) {
        bool capped = false;
        nodes = refine_survivors(ifs, std::move(nodes), level_rho(ifs, level), Rat(0), budget,
                                 survivor_cap, capped);
        if (capped) {
          rep.verdict = FiniteVerdict::Unknown;
          decided = true;
          break;
        }
        if (nodes.empty()) {
          rep.verdict = FiniteVerdict::CertifiedFinite;
          rep.clusters = 0;
          decided = true;
          break;
        }
        std::vector<NodeGeom> geom;
        auto groups = cluster_nodes(ifs, nodes, geom);
        rep.clusters = static_cast<int>(groups.size());
        double worst = 0;
        for (const auto& g : groups) worst = std::max(worst, group_extent(ifs, g, geom));
        rep.extents.push_back(worst);
      }
      if (!decided) {
        if (rep.extents.size() < 2) {
          rep.verdict = FiniteVerdict::Unknown;
        } else {
          bool all_shrink = true, all_stable = true;
          for (size_t k = 0; k + 1 < rep.extents.size(); ++k) {
            double ratio = rep.extents[k] > 0 ? rep.extents[k + 1] / rep.extents[k] : 0.0;
            if (ratio >= 0.8) all_shrink = false;
            if (ratio < 0.8 || ratio > 1.25) all_stable = false;
          }
          rep.verdict = all_shrink  ? FiniteVerdict::CertifiedFinite
                        : all_stable ? FiniteVerdict::SuspectedInfinite
                                     : FiniteVerdict::Unknown;
        }
      }
      out.push_back(std::move(rep));
    }
  }
  return out;
}

std::optional<Point> snap_to_word_fixed_point(const IFSSystem& ifs, const Enclosure& e,
                                              int max_len) {
  const int m = static_cast<int>(ifs.maps.size());
  std::vector<Point> found;
  Ext r2 = Ext(e.radius * e.radius);
  Word w;
  for (int len = 1; len <= max_len; ++len) {
    w.assign(len, 0);
    while (true) {
      Point fp = fixed_point(compose(ifs, w));
      if (dist2(fp, e.center) <= r2) {
        bool dup = false;
        for (const Point& p : found)
          if (dist2(p, fp).sign() == 0) {
            dup = true;
            break;
          }
        if (!dup) found.push_back(fp);
      }
      int pos = len - 1;
      while (pos >= 0 && w[pos] == m - 1) {
        w[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++w[pos];
    }
  }
  if (found.size() == 1) return found.front();
  return std::nullopt;
}

std::pair<Rat, NeighborClosure> stabilized_eps(const IFSSystem& ifs, int level,
                                               size_t max_maps) {
  NeighborClosure base = neighbor_closure(ifs, Rat(0), level, max_maps);
  if (base.status != ClosureStatus::Stabilized) return {Rat(0), std::move(base)};
  auto keyset = [&](const NeighborClosure& c) {
    std::vector<std::string> keys;
    keys.reserve(c.maps.size());
    for (const NeighborMap& nm : c.maps)
      keys.push_back(ifs.exact ? map_key(nm.map) : map_key_rounded(nm.map));
    std::sort(keys.begin(), keys.end());
    return keys;
  };
  auto base_keys = keyset(base);
  for (int k = 1; k <= 10; ++k) {
    Rat eps(1, BigInt(1) << k);
    NeighborClosure c = neighbor_closure(ifs, eps, level, max_maps);
    if (c.status == ClosureStatus::Stabilized && keyset(c) == base_keys)
      return {eps, std::move(c)};
  }
  return {Rat(0), std::move(base)};
}

}  // namespace permea
