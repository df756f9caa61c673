#pragma once

// Points, norms, segments, polygonal paths: lengths, angles, the double-cone
// parametrization. Coordinates are exact (Q[sqrt3]); lengths and angles are
// reported as binary64, with exact rational variants for the 1- and inf-norms.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "permea/rational.hpp"

namespace permea {

struct Point {
  int dim = 2;
  std::array<Ext, 3> x{};  // unused coordinates stay zero
  bool exact = true;       // false when built from non-representable reals

  Point() = default;
  Point(Ext x0, Ext x1) : dim(2), x{std::move(x0), std::move(x1), Ext(0)} {}
  Point(Ext x0, Ext x1, Ext x2)
      : dim(3), x{std::move(x0), std::move(x1), std::move(x2)} {}

  static Point zero(int d) {
    Point p;
    p.dim = d;
    return p;
  }

  Point operator+(const Point& o) const;
  Point operator-(const Point& o) const;
  Point scaled(const Ext& f) const;
  bool operator==(const Point& o) const;

  double xd(int i) const { return x[i].to_double(); }
};

// Squared Euclidean distance, exact.
Ext dist2(const Point& a, const Point& b);
Ext norm2(const Point& a);

struct Segment {
  Point a, b;
};

struct Norm {
  enum class Kind { Euclid, P, PolyBall };
  Kind kind = Kind::Euclid;
  double p = 2.0;                    // for Kind::P; infinity() means sup-norm
  std::vector<Point> ball_vertices;  // for Kind::PolyBall, d=2, origin inside

  static Norm euclid() { return {}; }
  static Norm p_norm(double p);
  static Norm poly(std::vector<Point> vertices);

  double length(const Point& v) const;
  bool is_inf() const {
    return kind == Kind::P && std::isinf(p);
  }
};

struct PolyPath {
  std::vector<Point> v;  // >= 2 vertices, consecutive duplicates collapsed

  explicit PolyPath(std::vector<Point> vertices);
  PolyPath() = default;

  int dim() const { return v.empty() ? 0 : v.front().dim; }
  size_t segments() const { return v.size() < 2 ? 0 : v.size() - 1; }
  PolyPath reversed() const;
  PolyPath concat(const PolyPath& q) const;  // q must start where *this ends
};

double path_length(const PolyPath& path, const Norm& n);

// Exact total length under the 1- or inf-norm (other kinds: nullopt).
std::optional<Ext> path_length_exact(const PolyPath& path, const Norm& n);

// Angle between direction vectors, in [0, pi]. Euclidean inner product.
double segment_angle(const Segment& s1, const Segment& s2);

// (x+y)/2 + s*(y-x)/2 + (1-|s|)*z for s in [-1,1], z orthogonal to y-x.
// c(-1,z) = x and c(1,z) = y exactly.
Point double_cone_point(const Point& x, const Point& y, const Rat& delta,
                        const Rat& s, const Point& z);

// Sum of lengths (under the norm) of path segments whose angle with the
// direction 0 -> z exceeds eps. The path is taken as already based at 0.
double angle_excess(const PolyPath& path, const Point& z, double eps,
                    const Norm& n);

}  // namespace permea
