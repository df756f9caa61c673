#pragma once

// Exact arithmetic: rationals and the quadratic extension Q[sqrt(3)].
// Geometric predicates (separation, containment, point-in-polygon) run on
// these types so every reported emptiness or distance claim is a certificate,
// not a sample. Conversions to double happen only at the output boundary.

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace permea {

// Expression templates off: operators return materialized values, so mixed
// expressions compose with .sign(), numerator(), std::min and friends.
using BigInt =
    boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                  boost::multiprecision::et_off>;
using Rat = boost::multiprecision::number<
    boost::multiprecision::backends::rational_adaptor<
        boost::multiprecision::cpp_int_backend<>>,
    boost::multiprecision::et_off>;

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

// Exact dyadic rational from a binary64 value.
inline Rat rat_from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("non-finite value");
  if (x == 0.0) return Rat(0);
  int exp = 0;
  double m = std::frexp(x, &exp);  // x = m * 2^exp, |m| in [0.5, 1)
  auto mant = static_cast<long long>(std::ldexp(m, 53));
  exp -= 53;
  Rat r(mant);
  if (exp >= 0) {
    r *= Rat(BigInt(1) << exp);
  } else {
    r /= Rat(BigInt(1) << (-exp));
  }
  return r;
}

// Accepts "p/q", decimal strings ("0.25", "-3"), and plain integers. Decimal
// strings parse exactly (digits over a power of ten), not via binary64.
inline Rat parse_rat(const std::string& s) {
  auto bad = [&] { throw std::invalid_argument("bad rational: " + s); };
  if (s.empty()) bad();
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    BigInt p(s.substr(0, slash)), q(s.substr(slash + 1));
    if (q == 0) bad();
    return Rat(p, q);
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rat(BigInt(s));
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  size_t frac_len = s.size() - dot - 1;
  if (digits.empty() || digits == "-" || digits == "+") bad();
  BigInt den = 1;
  for (size_t i = 0; i < frac_len; ++i) den *= 10;
  return Rat(BigInt(digits), den);
}

inline std::string rat_to_string(const Rat& r) {
  std::string s = numerator(r).str();
  if (denominator(r) != 1) s += "/" + denominator(r).str();
  return s;
}

inline int sign_of(const Rat& r) { return r.sign(); }

// Largest power of two <= x (x > 0), as a rational. Used to pick dyadic
// resolutions and the dyadic delta of the cover construction.
inline Rat dyadic_floor(const Rat& x) {
  if (x <= 0) throw std::invalid_argument("dyadic_floor needs x > 0");
  Rat p(1);
  if (x >= 1) {
    while (p * 2 <= x) p *= 2;
  } else {
    while (p > x) p /= 2;
  }
  return p;
}

// Value a + b*sqrt(3). Closed under ring operations; division only by
// rationals and nonzero elements (field inverse via conjugate). Comparisons
// are exact: sqrt(3) is irrational, so a + b*sqrt(3) = 0 iff a = b = 0.
struct Ext {
  Rat a, b;

  Ext() : a(0), b(0) {}
  Ext(int v) : a(v), b(0) {}
  Ext(Rat v) : a(std::move(v)), b(0) {}
  Ext(Rat ra, Rat rb) : a(std::move(ra)), b(std::move(rb)) {}

  bool is_rational() const { return b == 0; }

  Ext operator+(const Ext& o) const { return {a + o.a, b + o.b}; }
  Ext operator-(const Ext& o) const { return {a - o.a, b - o.b}; }
  Ext operator-() const { return {-a, -b}; }
  Ext operator*(const Ext& o) const {
    return {a * o.a + 3 * b * o.b, a * o.b + b * o.a};
  }
  Ext& operator+=(const Ext& o) { a += o.a; b += o.b; return *this; }
  Ext& operator-=(const Ext& o) { a -= o.a; b -= o.b; return *this; }
  Ext& operator*=(const Ext& o) { *this = *this * o; return *this; }

  Ext inverse() const {
    Rat n = a * a - 3 * b * b;  // conjugate norm; zero only at the origin
    if (n == 0) throw std::domain_error("division by zero");
    return {a / n, -b / n};
  }
  Ext operator/(const Ext& o) const { return *this * o.inverse(); }

  bool operator==(const Ext& o) const { return a == o.a && b == o.b; }
  bool operator!=(const Ext& o) const { return !(*this == o); }

  int sign() const {
    int sa = a.sign(), sb = b.sign();
    if (sb == 0) return sa;
    if (sa == 0) return sb;
    if (sa == sb) return sa;
    // a and b*sqrt(3) compete: sign equals sign of a^2 - 3 b^2 flipped to b's
    // side when |b*sqrt3| wins.
    int cmp = (a * a - 3 * b * b).sign();
    return cmp == 0 ? 0 : (cmp > 0 ? sa : sb);
  }

  bool operator<(const Ext& o) const { return (*this - o).sign() < 0; }
  bool operator<=(const Ext& o) const { return (*this - o).sign() <= 0; }
  bool operator>(const Ext& o) const { return (*this - o).sign() > 0; }
  bool operator>=(const Ext& o) const { return (*this - o).sign() >= 0; }

  double to_double() const {
    static const double s3 = std::sqrt(3.0);
    return permea::to_double(a) + permea::to_double(b) * s3;
  }
};

inline Ext abs(const Ext& x) { return x.sign() < 0 ? -x : x; }
inline Ext min(const Ext& x, const Ext& y) { return x <= y ? x : y; }
inline Ext max(const Ext& x, const Ext& y) { return x >= y ? x : y; }

// Floor of x/step for rational step > 0 (exact lattice index).
inline BigInt floor_div(const Ext& x, const Rat& step) {
  Rat q = x.a / step;
  BigInt base = numerator(q) / denominator(q);
  if (q < 0 && base * denominator(q) != numerator(q)) base -= 1;
  if (x.b == 0) return base;
  // Adjust for the sqrt(3) part: x/step = q + scale*sqrt3 with |sqrt3| < 2,
  // so the true floor lies within floor(2|scale|)+1 of base. Bisect exactly.
  Rat scale = x.b / step;
  Rat mag = scale < 0 ? -scale : scale;
  BigInt off = numerator(mag * 2) / denominator(mag * 2) + 1;
  BigInt lo = base - off;
  BigInt hi = base + off + 1;
  while (lo + 1 < hi) {
    BigInt mid = (lo + hi) / 2;
    if (Ext(Rat(mid) * step, 0) <= x)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline long to_long(const BigInt& v) { return v.convert_to<long>(); }

// Rational upper bound on sqrt(v) for v >= 0: returns u with u*u >= v.
// Starts from the double estimate and bumps by ~2^-20 relative steps until
// the exact comparison holds, so the bound is certified but nearly tight.
inline Rat rat_upper_sqrt(const Ext& v) {
  if (v.sign() < 0) throw std::invalid_argument("rat_upper_sqrt needs v >= 0");
  if (v.sign() == 0) return Rat(0);
  double est = std::sqrt(v.to_double());
  Rat u = rat_from_double(est > 0 ? est * (1.0 + 1e-12) : 1e-300);
  if (u <= 0) u = Rat(1, BigInt(1) << 64);
  const Rat bump(1048577, 1048576);
  while (Ext(u * u) < v) u *= bump;
  return u;
}

// Rational lower bound on sqrt(v) for v >= 0: returns l >= 0 with l*l <= v.
inline Rat rat_lower_sqrt(const Ext& v) {
  if (v.sign() <= 0) return Rat(0);
  double est = std::sqrt(v.to_double());
  Rat l = rat_from_double(est * (1.0 - 1e-12));
  if (l < 0) l = 0;
  const Rat shrink(1048575, 1048576);
  while (Ext(l * l) > v) l *= shrink;
  return l;
}

}  // namespace permea
