#include "cgas/potential.hpp"

#include <cmath>

namespace cgas {

namespace {

Point read_point(const nlohmann::json& j, const char* key) {
  Point p{0, 0, 0};
  if (!j.contains(key)) return p;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() < 2 || a.size() > 3)
    throw SpecError(std::string("potential.") + key + ": expected array of 2 or 3 numbers");
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number())
      throw SpecError(std::string("potential.") + key + ": entries must be numbers");
    p[i] = a[i].get<double>();
  }
  return p;
}

double number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw SpecError(std::string("potential.") + key + ": expected a number");
  return j.at(key).get<double>();
}

} // namespace

Potential power_potential(int d, double alpha, double p, Point center) {
  check_dim(d);
  if (!(alpha > 0)) throw DomainError("power potential needs alpha > 0");
  if (!(p >= 2)) throw DomainError("power potential needs exponent p >= 2");
  if (d == 2) center[2] = 0.0;
  Potential v;
  v.d = d;
  v.name = p == 2 ? "quadratic" : "power";
  v.center = center;
  v.value = [=](const Point& x) { return alpha * std::pow(norm2(x - center), 0.5 * p); };
  v.gradient = [=](const Point& x) {
    Point y = x - center;
    double r2 = norm2(y);
    double f = p == 2 ? 2 * alpha : (r2 == 0 ? 0.0 : alpha * p * std::pow(r2, 0.5 * p - 1));
    return f * y;
  };
  v.laplacian = [=](const Point& x) {
    double r2 = norm2(x - center);
    double f = p == 2 ? 1.0 : (r2 == 0 ? 0.0 : std::pow(r2, 0.5 * p - 1));
    return alpha * p * (p + d - 2) * f;
  };
  v.radial = RadialProfile{
      [=](double r) { return alpha * std::pow(r, p); },
      [=](double r) { return alpha * p * std::pow(r, p - 1); },
      [=](double r) { return alpha * p * (p + d - 2) * (p == 2 ? 1.0 : std::pow(r, p - 2)); }};
  v.description = {{"type", p == 2 ? "quadratic" : "power"},
                   {"alpha", alpha},
                   {"p", p},
                   {"center", {center[0], center[1], center[2]}}};
  return v;
}

Potential quadratic_potential(int d, double alpha) { return power_potential(d, alpha, 2.0); }

Potential zero_potential(int d) {
  check_dim(d);
  Potential v;
  v.d = d;
  v.name = "zero";
  v.confining = false;
  v.value = [](const Point&) { return 0.0; };
  v.gradient = [](const Point&) { return Point{0, 0, 0}; };
  v.laplacian = [](const Point&) { return 0.0; };
  v.radial = RadialProfile{[](double) { return 0.0; }, [](double) { return 0.0; },
                           [](double) { return 0.0; }};
  v.description = {{"type", "zero"}};
  return v;
}

Potential shifted(const Potential& v, const Point& a) {
  Potential s = v;
  s.name = v.name + "+shift";
  s.value = [f = v.value, a](const Point& x) { return f(x - a); };
  s.gradient = [g = v.gradient, a](const Point& x) { return g(x - a); };
  s.laplacian = [l = v.laplacian, a](const Point& x) { return l(x - a); };
  s.center = v.center + a;
  s.description = v.description;
  s.description["shift"] = {a[0], a[1], a[2]};
  return s;
}

Potential scaled(const Potential& v, double k, double offset) {
  if (!(k > 0)) throw DomainError("potential scale factor must be positive");
  Potential s = v;
  s.value = [f = v.value, k, offset](const Point& x) { return k * f(x) + offset; };
  s.gradient = [g = v.gradient, k](const Point& x) { return k * g(x); };
  s.laplacian = [l = v.laplacian, k](const Point& x) { return k * l(x); };
  if (v.radial) {
    const RadialProfile& r = *v.radial;
    s.radial = RadialProfile{[f = r.value, k, offset](double t) { return k * f(t) + offset; },
                             [f = r.derivative, k](double t) { return k * f(t); },
                             [f = r.laplacian, k](double t) { return k * f(t); }};
  }
  s.description = v.description;
  s.description["scale"] = k * v.description.value("scale", 1.0);
  s.description["offset"] = offset + k * v.description.value("offset", 0.0);
  return s;
}

Potential potential_from_json(int d, const nlohmann::json& j) {
  if (!j.is_object()) throw SpecError("potential: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* known[] = {"type", "alpha", "p", "center", "scale", "offset", "shift"};
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw SpecError("potential." + it.key() + ": unknown key");
  }
  if (!j.contains("type") || !j.at("type").is_string())
    throw SpecError("potential.type: required string field missing");
  std::string type = j.at("type");
  Potential v;
  if (type == "quadratic") {
    v = power_potential(d, number(j, "alpha", 1.0), 2.0, read_point(j, "center"));
  } else if (type == "power") {
    if (!j.contains("p")) throw SpecError("potential.p: required for type power");
    v = power_potential(d, number(j, "alpha", 1.0), number(j, "p", 2.0), read_point(j, "center"));
  } else if (type == "zero") {
    v = zero_potential(d);
  } else {
    throw SpecError("potential.type: unknown potential '" + type + "'");
  }
  if (j.contains("shift")) v = shifted(v, read_point(j, "shift"));
  if (j.contains("scale") || j.contains("offset"))
    v = scaled(v, number(j, "scale", 1.0), number(j, "offset", 0.0));
  return v;
}

} // namespace cgas
