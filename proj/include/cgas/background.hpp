#pragma once

#include <functional>

#include "cgas/types.hpp"

namespace cgas {

// A neutralizing charge distribution seen by the point charges: the
// equilibrium measure, its blow-up, or a test background.
class Background {
public:
  virtual ~Background() = default;

  virtual int dim() const = 0;
  virtual double mass() const = 0;
  virtual double density(const Point& x) const = 0;
  // h(x) = ∫ w(x - y) dμ(y).
  virtual double potential(const Point& x) const = 0;
  // D(μ, δ_x^(ell)): the potential averaged over the ball B(x, ell).
  virtual double smeared_potential(const Point& x, double ell) const = 0;
  // D(μ, μ).
  virtual double coulomb_energy() const = 0;
  virtual double sup_density() const = 0;
  // μ(B(x, R)).
  virtual double ball_mass(const Point& x, double radius) const = 0;
};

// Average of f over B(x, ell) by Gauss in the radius and a product rule on
// the sphere. Accurate for f smooth on the ball.
double numeric_ball_average(const std::function<double(const Point&)>& f, const Point& x, double ell, int d);

// Uniform density m on the box [lo, hi]. Potential from the closed-form
// antiderivative of the kernel; self energy by tensor Gauss quadrature.
class UniformBoxBackground : public Background {
public:
  UniformBoxBackground(int d, const Point& lo, const Point& hi, double density);

  int dim() const override { return d_; }
  double mass() const override;
  double density(const Point& x) const override;
  double potential(const Point& x) const override;
  double smeared_potential(const Point& x, double ell) const override;
  double coulomb_energy() const override { return self_; }
  double sup_density() const override { return m_; }
  double ball_mass(const Point& x, double radius) const override;

  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  // Distance from x to the box boundary (positive inside and outside).
  double boundary_distance(const Point& x) const;

private:
  int d_;
  Point lo_, hi_;
  double m_;
  double self_ = 0.0;
};

} // namespace cgas
