#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cgas/errors.hpp"

namespace cgas {

// Points always carry three coordinates; in dimension 2 the last one is zero.
using Point = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;

// Throws unless d is 2 or 3.
inline int check_dim(int d) {
  if (d != 2 && d != 3)
    throw DomainError("dimension must be 2 or 3, got " + std::to_string(d));
  return d;
}

inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Point& operator+=(Point& a, const Point& b) {
  a[0] += b[0];
  a[1] += b[1];
  a[2] += b[2];
  return a;
}
inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm2(const Point& a) { return dot(a, a); }
inline double norm(const Point& a) { return std::sqrt(norm2(a)); }

// Neumaier-compensated accumulator. Used wherever long sums of mixed-sign
// terms must not depend on how they are partitioned.
class Accumulator {
public:
  void add(double x) {
    double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  Accumulator& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

} // namespace cgas
