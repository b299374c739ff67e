#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "cgas/types.hpp"

namespace cgas {

// Radial profile V(r), V'(r), ΔV(r) about a center, when the potential has one.
struct RadialProfile {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> laplacian;
};

// Confining external potential. All three callables are mandatory; the
// radial profile is optional and enables the exact radial solvers.
struct Potential {
  int d = 2;
  std::string name;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  std::function<double(const Point&)> laplacian;
  bool confining = true;
  std::optional<RadialProfile> radial;
  Point center{0.0, 0.0, 0.0};
  nlohmann::json description; // enough to rebuild the potential

  double operator()(const Point& x) const { return value(x); }
  bool is_radial() const { return radial.has_value(); }
};

// alpha |x - center|^p with p >= 2.
Potential power_potential(int d, double alpha, double p, Point center = {0, 0, 0});
// alpha |x|^2, Laplacian 2 d alpha.
Potential quadratic_potential(int d, double alpha = 1.0);
// Identically zero; not confining.
Potential zero_potential(int d);
// V(x - a).
Potential shifted(const Potential& v, const Point& a);
// s V(x) + offset.
Potential scaled(const Potential& v, double s, double offset = 0.0);

// Builds a potential from {"type": "quadratic"|"power"|"zero", "alpha", "p",
// "center", "scale", "offset"}. Throws SpecError on bad input.
Potential potential_from_json(int d, const nlohmann::json& j);

} // namespace cgas
