#include "permea/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace permea {

static void check_dim(const Point& a, const Point& b) {
  if (a.dim != b.dim) throw std::invalid_argument("dimension mismatch");
}

Point Point::operator+(const Point& o) const {
  check_dim(*this, o);
  Point r = *this;
  for (int i = 0; i < dim; ++i) r.x[i] += o.x[i];
  r.exact = exact && o.exact;
  return r;
}

Point Point::operator-(const Point& o) const {
  check_dim(*this, o);
  Point r = *this;
  for (int i = 0; i < dim; ++i) r.x[i] -= o.x[i];
  r.exact = exact && o.exact;
  return r;
}

Point Point::scaled(const Ext& f) const {
  Point r = *this;
  for (int i = 0; i < dim; ++i) r.x[i] *= f;
  return r;
}

bool Point::operator==(const Point& o) const {
  if (dim != o.dim) return false;
  for (int i = 0; i < dim; ++i)
    if (x[i] != o.x[i]) return false;
  return true;
}

Ext dist2(const Point& a, const Point& b) {
  check_dim(a, b);
  Ext s(0);
  for (int i = 0; i < a.dim; ++i) {
    Ext d = a.x[i] - b.x[i];
    s += d * d;
  }
  return s;
}

Ext norm2(const Point& a) {
  Ext s(0);
  for (int i = 0; i < a.dim; ++i) s += a.x[i] * a.x[i];
  return s;
}

Norm Norm::p_norm(double p) {
  if (p < 1.0) throw std::invalid_argument("p-norm needs p >= 1");
  Norm n;
  n.kind = Kind::P;
  n.p = p;
  return n;
}

Norm Norm::poly(std::vector<Point> vertices) {
  if (vertices.size() < 3) throw std::invalid_argument("unit ball needs >= 3 vertices");
  for (auto& v : vertices)
    if (v.dim != 2) throw std::invalid_argument("polygon norms are 2d");
  Norm n;
  n.kind = Kind::PolyBall;
  n.ball_vertices = std::move(vertices);
  return n;
}

// Minkowski functional of the polygon: smallest t with v/t inside the ball.
// For each edge (a,b) the supporting line gives t >= cross(v, b-a)/cross(a, b-a)... we
// use the standard form: gauge(v) = max over edges of (v x e) / (a x e) with e = b-a,
// taking only edges where the denominator is positive (origin strictly inside).
static double poly_gauge(const Norm& n, const Point& v) {
  double vx = v.xd(0), vy = v.xd(1);
  if (vx == 0 && vy == 0) return 0;
  double best = 0;
  size_t m = n.ball_vertices.size();
  for (size_t i = 0; i < m; ++i) {
    const Point& a = n.ball_vertices[i];
    const Point& b = n.ball_vertices[(i + 1) % m];
    double ax = a.xd(0), ay = a.xd(1);
    double ex = b.xd(0) - ax, ey = b.xd(1) - ay;
    double den = ax * ey - ay * ex;  // 2*area(0,a,b), positive if ccw and 0 inside
    if (den <= 0) continue;
    double num = vx * ey - vy * ex;
    best = std::max(best, num / den);
  }
  return best;
}

double Norm::length(const Point& v) const {
  switch (kind) {
    case Kind::Euclid:
      return std::sqrt(norm2(v).to_double());
    case Kind::P: {
      if (std::isinf(p)) {
        double m = 0;
        for (int i = 0; i < v.dim; ++i) m = std::max(m, std::abs(v.xd(i)));
        return m;
      }
      if (p == 1.0) {
        double s = 0;
        for (int i = 0; i < v.dim; ++i) s += std::abs(v.xd(i));
        return s;
      }
      if (p == 2.0) return std::sqrt(norm2(v).to_double());
      double s = 0;
      for (int i = 0; i < v.dim; ++i) s += std::pow(std::abs(v.xd(i)), p);
      return std::pow(s, 1.0 / p);
    }
    case Kind::PolyBall:
      return poly_gauge(*this, v);
  }
  return 0;
}

PolyPath::PolyPath(std::vector<Point> vertices) {
  for (auto& p : vertices) {
    if (!v.empty() && v.back() == p) continue;
    v.push_back(std::move(p));
  }
  if (v.size() < 2) throw std::invalid_argument("path needs >= 2 distinct vertices");
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i].dim != v[0].dim) throw std::invalid_argument("dimension mismatch");
}

PolyPath PolyPath::reversed() const {
  PolyPath r;
  r.v.assign(v.rbegin(), v.rend());
  return r;
}

PolyPath PolyPath::concat(const PolyPath& q) const {
  if (v.empty()) return q;
  if (q.v.empty()) return *this;
  if (!(v.back() == q.v.front()))
    throw std::invalid_argument("concat endpoints disagree");
  PolyPath r = *this;
  r.v.insert(r.v.end(), q.v.begin() + 1, q.v.end());
  return r;
}

double path_length(const PolyPath& path, const Norm& n) {
  double total = 0;
  for (size_t i = 1; i < path.v.size(); ++i)
    total += n.length(path.v[i] - path.v[i - 1]);
  return total;
}

std::optional<Ext> path_length_exact(const PolyPath& path, const Norm& n) {
  bool one = n.kind == Norm::Kind::P && n.p == 1.0;
  bool inf = n.is_inf();
  if (!one && !inf) return std::nullopt;
  Ext total(0);
  for (size_t i = 1; i < path.v.size(); ++i) {
    const Point d = path.v[i] - path.v[i - 1];
    if (one) {
      for (int k = 0; k < d.dim; ++k) total += abs(d.x[k]);
    } else {
      Ext m(0);
      for (int k = 0; k < d.dim; ++k) m = max(m, abs(d.x[k]));
      total += m;
    }
  }
  return total;
}

double segment_angle(const Segment& s1, const Segment& s2) {
  Point u = s1.b - s1.a, v = s2.b - s2.a;
  Ext uu = norm2(u), vv = norm2(v);
  if (uu.sign() == 0 || vv.sign() == 0)
    throw std::invalid_argument("degenerate segment");
  Ext dot(0);
  for (int i = 0; i < u.dim; ++i) dot += u.x[i] * v.x[i];
  double c = dot.to_double() / std::sqrt(uu.to_double() * vv.to_double());
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c);
}

Point double_cone_point(const Point& x, const Point& y, const Rat& delta,
                        const Rat& s, const Point& z) {
  if (s < -1 || s > 1) throw std::invalid_argument("|s| > 1");
  if (x == y) throw std::invalid_argument("x == y");
  Point d = y - x;
  Ext dot(0);
  for (int i = 0; i < x.dim; ++i) dot += d.x[i] * z.x[i];
  if (dot.sign() != 0) throw std::invalid_argument("z not orthogonal to y-x");
  if (norm2(z) > Ext(delta * delta)) throw std::invalid_argument("z outside mid-disk");
  Rat half(1, 2);
  Point mid = (x + y).scaled(Ext(half));
  Rat a = s < 0 ? -s : s;
  Point r = mid + d.scaled(Ext(s * half)) + z.scaled(Ext(Rat(1) - a));
  return r;
}

double angle_excess(const PolyPath& path, const Point& z, double eps,
                    const Norm& n) {
  if (norm2(z).sign() == 0) throw std::invalid_argument("degenerate z");
  Segment axis{Point::zero(z.dim), z};
  double total = 0;
  for (size_t i = 1; i < path.v.size(); ++i) {
    Segment s{path.v[i - 1], path.v[i]};
    if (dist2(s.a, s.b).sign() == 0) continue;
    if (segment_angle(s, axis) > eps) total += n.length(s.b - s.a);
  }
  return total;
}

}  // namespace permea
