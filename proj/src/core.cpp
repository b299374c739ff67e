#include "cgas/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cgas {

SpaceConstants space_constants(int d) {
  check_dim(d);
  if (d == 2) return {2, 2 * pi, 2 * pi, 2 * pi * 0.25};
  return {3, 4 * pi, 4 * pi * 1.2, 0.0};
}

double unit_ball_self_energy(int d) { return check_dim(d) == 3 ? 1.2 : 0.25; }

double coulomb_kernel_radial(double r, int d) {
  if (r == 0) throw SingularityError("Coulomb kernel evaluated at the origin");
  return d == 3 ? 1.0 / r : -std::log(r);
}

double coulomb_kernel(const Point& x, int d) {
  check_dim(d);
  return coulomb_kernel_radial(norm(x), d);
}

Point coulomb_kernel_gradient(const Point& x, int d) {
  double r2 = norm2(x);
  if (r2 == 0) throw SingularityError("Coulomb kernel gradient evaluated at the origin");
  double f = d == 3 ? -1.0 / (r2 * std::sqrt(r2)) : -1.0 / r2;
  return f * x;
}

double smeared_potential(double r, double eta, int d) {
  check_dim(d);
  if (!(eta > 0)) throw DomainError("smearing radius must be positive");
  r = std::fabs(r);
  if (d == 3) return r >= eta ? 1.0 / r : (3 * eta * eta - r * r) / (2 * eta * eta * eta);
  return r >= eta ? -std::log(r) : -std::log(eta) + 0.5 * (1 - r * r / (eta * eta));
}

double self_energy(double eta, int d) {
  check_dim(d);
  if (!(eta > 0)) throw DomainError("smearing radius must be positive");
  if (d == 3) return 1.2 / eta;
  return -std::log(eta) + 0.25;
}

double RadialField::potential(double r) const {
  if (r < support) return interior(r);
  return mass * coulomb_kernel_radial(r, d);
}

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

// Mean of the field's potential over the sphere (circle) |y - s e| = t.
// Outside the support the potential is harmonic, so only the part of the
// sphere inside the support needs quadrature; the singular Coulomb part is
// handled through the mean value property.
double shell_mean(const RadialField& f, double s, double t) {
  const double R = f.support;
  if (t == 0) return f.potential(s);
  if (s == 0) return f.potential(t);
  const double outer = f.mass * coulomb_kernel_radial(std::max(s, t), f.d);
  if (f.d == 3) {
    double lo = std::fabs(s - t), hi = std::min(s + t, R);
    if (lo >= hi) return outer;
    double v = gauss<double, 30>::integrate([&](double u) { return f.interior(u) * u - f.mass; }, lo, hi);
    return outer + v / (2 * s * t);
  }
  double cth = (R * R - s * s - t * t) / (2 * s * t);
  if (cth <= -1) return outer;
  double th0 = cth >= 1 ? 0.0 : std::acos(cth);
  auto u_of = [&](double th) { return std::sqrt(std::max(s * s + t * t + 2 * s * t * std::cos(th), 0.0)); };
  // (1/π)[∫_{θ0}^{π} interior(u) dθ + mass ∫_0^{θ0} w(u) dθ], using
  // (1/π)∫_0^π w(u) dθ = w(max(s,t)).
  double inner = gauss<double, 30>::integrate([&](double th) { return f.interior(u_of(th)); }, th0, pi);
  double outside =
      th0 > 0 ? gauss<double, 30>::integrate([&](double th) { return -std::log(u_of(th)); }, 0.0, th0) : 0.0;
  return (inner + f.mass * outside) / pi;
}

} // namespace

double ball_average(const RadialField& f, double s, double ell) {
  if (!(ell > 0)) throw DomainError("ball radius must be positive");
  const int d = f.d;
  auto integrand = [&](double t) {
    double wgt = d == 3 ? 3 * t * t / (ell * ell * ell) : 2 * t / (ell * ell);
    return wgt == 0 ? 0.0 : wgt * shell_mean(f, s, t);
  };
  // Kinks of the integrand: t = s (Coulomb part) and |s ± t| = R (support edge).
  std::vector<double> cuts{0.0, ell};
  for (double b : {s, f.support - s, s - f.support, s + f.support})
    if (b > 0 && b < ell) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  Accumulator acc;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] <= 0) continue;
    acc += gauss_kronrod<double, 31>::integrate(integrand, cuts[k], cuts[k + 1], 10, 1e-12);
  }
  return acc.value();
}

RadialField smeared_charge_field(double eta, int d) {
  check_dim(d);
  if (!(eta > 0)) throw DomainError("smearing radius must be positive");
  RadialField f;
  f.d = d;
  f.mass = 1.0;
  f.support = eta;
  f.interior = [eta, d](double u) { return smeared_potential(u, eta, d); };
  return f;
}

double smeared_pair_energy_radial(double s, double eta, int d) {
  check_dim(d);
  if (!(eta > 0)) throw DomainError("smearing radius must be positive");
  s = std::fabs(s);
  if (s >= 2 * eta) return coulomb_kernel_radial(s, d);
  // Newton: the potential of one ball seen by the other equals the
  // potential of the radial profile averaged over the second ball.
  return ball_average(smeared_charge_field(eta, d), s, eta);
}

double smeared_pair_energy(const Point& x, const Point& y, double eta, int d) {
  return smeared_pair_energy_radial(norm(x - y), eta, d);
}

Configuration::Configuration(int dim, std::vector<Point> pts) : d(check_dim(dim)), points(std::move(pts)) {
  if (points.empty()) throw ContractError("configuration needs at least one point");
  for (size_t i = 0; i < points.size(); ++i) {
    if (d == 2) points[i][2] = 0.0;
    for (double v : points[i])
      if (!std::isfinite(v))
        throw DomainError("configuration point " + std::to_string(i) + " has a non-finite coordinate");
  }
}

Separation min_separation(const Configuration& c) {
  Separation best{std::numeric_limits<double>::infinity(), 0, 0};
  const size_t n = c.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double r = norm(c.points[i] - c.points[j]);
      if (r < best.distance) best = {r, i, j};
    }
  return best;
}

namespace {

[[noreturn]] void coincident(size_t i, size_t j) {
  throw SingularityError("coincident points " + std::to_string(i) + " and " + std::to_string(j));
}

} // namespace

double pair_energy(const Configuration& c) {
  const size_t n = c.size();
  Accumulator acc;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double r = norm(c.points[i] - c.points[j]);
      if (r == 0) coincident(i, j);
      acc += coulomb_kernel_radial(r, c.d);
    }
  return 2 * acc.value();
}

double hamiltonian(const Configuration& c, const Potential& v) {
  if (v.d != c.d) throw ContractError("potential and configuration dimensions differ");
  Accumulator ext;
  for (const Point& x : c.points) ext += v(x);
  return pair_energy(c) + static_cast<double>(c.size()) * ext.value();
}

std::vector<Point> hamiltonian_gradient(const Configuration& c, const Potential& v) {
  if (v.d != c.d) throw ContractError("potential and configuration dimensions differ");
  const size_t n = c.size();
  std::vector<Point> g(n, Point{0, 0, 0});
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      Point dx = c.points[i] - c.points[j];
      if (norm2(dx) == 0) coincident(i, j);
      Point f = 2.0 * coulomb_kernel_gradient(dx, c.d);
      g[i] += f;
      g[j] += -1.0 * f;
    }
  const double nd = static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    g[i] += nd * v.gradient(c.points[i]);
    if (c.d == 2) g[i][2] = 0.0;
  }
  return g;
}

} // namespace cgas
