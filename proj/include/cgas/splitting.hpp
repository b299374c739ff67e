#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cgas/background.hpp"
#include "cgas/core.hpp"
#include "cgas/equilibrium.hpp"

namespace cgas {

// x' = n^{1/d} x: typical spacing of order one.
struct BlownUpConfiguration {
  int d = 2;
  size_t n = 0;
  double factor = 1.0; // n^{1/d}
  Configuration points;

  Configuration blow_down() const;
};

BlownUpConfiguration blow_up(const Configuration& c);

// The push-forward of n·μ under x -> n^{1/d} x, with density μ(x'/n^{1/d})
// and total mass n. Keeps a reference to the wrapped background.
class BlownUpBackground : public Background {
public:
  BlownUpBackground(const Background& mu, size_t n);

  int dim() const override { return mu_.dim(); }
  double mass() const override { return n_ * mu_.mass(); }
  double density(const Point& x) const override { return mu_.density(down(x)); }
  double potential(const Point& x) const override;
  double smeared_potential(const Point& x, double ell) const override;
  double coulomb_energy() const override;
  double sup_density() const override { return mu_.sup_density(); }
  double ball_mass(const Point& x, double radius) const override;

private:
  Point down(const Point& x) const { return (1.0 / factor_) * x; }
  // Potential of the blown-up measure in terms of the original potential.
  double lift(double h) const;

  const Background& mu_;
  double n_, factor_;
};

// Smearing constant C_L with |D(μ, δ_x - δ_x^(ℓ))| ≤ C_L ℓ² ‖μ‖_∞:
// c_d / (2(d + 2)), attained inside a region of constant density.
double lieb_constant(int d);

// D(μ, δ_x^(ℓ)) - h_μ(x).
double smearing_error(const Background& mu, const Point& x, double ell);

// c_d D(q μ - Σ δ_{x_i}^(ℓ), same) expanded into pair, cross and
// background terms. q is the charge carried by the background.
double field_energy(const Configuration& c, const Background& mu, double q, double ell);

// ∫|∇h_{n,ℓ}|² = c_d D(n μ0 - Σ δ_{x_i}^(ℓ), same).
double smeared_field_energy(const Configuration& c, const Background& mu0, double ell);

struct SplittingReport {
  int d = 2;
  size_t n = 0;
  double eta = 0.0, ell = 0.0;
  double hamiltonian = 0.0;
  double mean_field_term = 0.0; // n² E[μ0]
  double log_term = 0.0;        // (n/2) log n in d=2
  double zeta_term = 0.0;       // 2n Σ ζ(x_i)
  double smeared_energy = 0.0;  // ∫|∇h_{n,ℓ}|² at the macroscopic scale
  double j_n = 0.0;
  double smearing_error = 0.0;  // 2n Σ (D(μ0, δ_i^(ℓ)) - h(x_i))
  double smearing_bound = 0.0;  // 2n² ‖μ0‖_∞ C_L ℓ²
  double split_sum = 0.0;       // exact right-hand side, equals H when separated
  double lower_bound = 0.0;     // split_sum with the smearing error replaced by its bound
  double next_order = 0.0;
  double min_separation = 0.0;
  bool equality_flag = false; // min separation ≥ 2ℓ

  nlohmann::json to_json() const;
};

// H_n ≥ n²E + 2nΣζ - (n/2)log n 1_{d=2} + n^{2-2/d} J_n(η) + smearing error,
// with equality when the smeared balls are disjoint.
SplittingReport onsager_split(const Configuration& c, const EquilibriumMeasure& mu0, const Potential& v, double eta);

// (H_n - n² E[μ0] + (n/2) log n 1_{d=2}) / n^{2-2/d}.
double next_order_energy(const Configuration& c, const EquilibriumMeasure& mu0, const Potential& v);

// Lower bound on next_order_energy from the splitting at η = 1 with the
// field energy dropped: -(κ_d w(1) + γ_2)/c_d - 2‖μ0‖_∞ C_L.
double next_order_lower_bound(const EquilibriumMeasure& mu0);

struct Box {
  Point lo{0, 0, 0}, hi{0, 0, 0};
  bool contains(const Point& x, int d) const;
  double boundary_distance(const Point& x, int d) const;
};

struct RenormalizedEnergy {
  double value = 0.0;     // extrapolated η -> 0 limit
  double tolerance = 0.0; // spread between the last two extrapolants
  std::vector<double> etas, ladder;
  size_t points = 0;
};

// Renormalized energy of the neutral system made of the points of c inside U
// and the background (which U should carry): the η -> 0 limit of
// c_d D(Σ δ^(η) - μ, same) - N (κ_d w(η) + γ_2), by Richardson extrapolation
// in η². Points must be η0-separated from each other and from ∂U.
RenormalizedEnergy renormalized_W_of_config(const Configuration& c, const Background& mu, const Box& u,
                                            double eta0 = 0.25);

} // namespace cgas
