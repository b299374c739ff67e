#pragma once

#include <functional>
#include <vector>

#include "cgas/potential.hpp"
#include "cgas/types.hpp"

namespace cgas {

// c_d, the constants κ_d and γ_2 of the ball smearing profile.
struct SpaceConstants {
  int d;
  double c;     // 2π or 4π: -Δw = c δ_0
  double kappa; // c_2 in d=2, c_3 · 6/5 in d=3
  double gamma; // c_2 · 1/4 in d=2, zero in d=3
};

SpaceConstants space_constants(int d);

// Coulomb interaction energy D(δ^(1), δ^(1)) of the unit-ball profile with
// itself: 6/5 in d=3, 1/4 in d=2.
double unit_ball_self_energy(int d);

// w(x): 1/|x| (d=3) or -log|x| (d=2). Throws SingularityError at x=0.
double coulomb_kernel(const Point& x, int d);
double coulomb_kernel_radial(double r, int d);
// ∇w(x).
Point coulomb_kernel_gradient(const Point& x, int d);

// Potential of the uniform ball charge of radius eta at distance r from its center.
double smeared_potential(double r, double eta, int d);

// D(δ_x^(η), δ_y^(η)). Exact Coulomb value once |x-y| >= 2η, radial
// quadrature when the balls overlap.
double smeared_pair_energy(const Point& x, const Point& y, double eta, int d);
double smeared_pair_energy_radial(double s, double eta, int d);

// D(δ^(η), δ^(η)): (6/5)/η in d=3, -log η + 1/4 in d=2.
double self_energy(double eta, int d);

// Potential of a radial charge distribution of given mass supported in
// B(0, support): interior(r) inside, mass·w(r) outside.
struct RadialField {
  int d = 2;
  double mass = 1.0;
  double support = 0.0;
  std::function<double(double)> interior; // smooth on [0, support]

  double potential(double r) const;
};

// Average of the field's potential over the ball of radius ell centered at
// distance s from the field's center (equivalently D(field, δ^(ell))).
double ball_average(const RadialField& f, double s, double ell);

// Field of a uniform ball of radius eta and unit mass.
RadialField smeared_charge_field(double eta, int d);

// n points in R^d.
struct Configuration {
  int d = 2;
  std::vector<Point> points;

  Configuration() = default;
  Configuration(int dim, std::vector<Point> pts);
  size_t size() const { return points.size(); }
};

// Smallest pairwise distance, with the achieving pair. Infinity when n < 2.
struct Separation {
  double distance;
  size_t i, j;
};
Separation min_separation(const Configuration& c);

// Σ_{i≠j} w(x_i - x_j) over ordered pairs.
double pair_energy(const Configuration& c);

// H_n = Σ_{i≠j} w(x_i - x_j) + n Σ_i V(x_i).
double hamiltonian(const Configuration& c, const Potential& v);

// ∂H_n/∂x_i = 2 Σ_{j≠i} ∇w(x_i - x_j) + n ∇V(x_i).
std::vector<Point> hamiltonian_gradient(const Configuration& c, const Potential& v);

} // namespace cgas
