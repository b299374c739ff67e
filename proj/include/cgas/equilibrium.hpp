#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgas/background.hpp"
#include "cgas/core.hpp"
#include "cgas/grid.hpp"
#include "cgas/potential.hpp"

namespace cgas {

// Exterior multipole expansion of a compactly supported charge distribution,
// about its centroid: complex moments up to order 4 in d=2, quadrupole in d=3.
struct FarField {
  int d = 2;
  double mass = 1.0;
  Point centroid{0, 0, 0};
  std::array<double, 5> re{}, im{}; // d=2: a_k = ∫ (y - centroid)^k dμ, k = 1..4
  std::array<double, 6> quad{};     // d=3: Q_xx Q_yy Q_zz Q_xy Q_xz Q_yz
  Point dipole{0, 0, 0};            // d=3

  double operator()(const Point& x) const;
  static FarField of_grid_density(const Grid& g, const std::vector<double>& density);
  static FarField monopole(int d, const Point& center, double mass = 1.0);
};

// Exact equilibrium measure of a radial potential: ΔV/(2c_d) on a ball.
struct RadialModel {
  int d = 2;
  double radius = 0.0;
  double robin = 0.0;
  Point center{0, 0, 0};
  RadialProfile v;
  double interaction = 0.0; // D(μ0, μ0)
  double external = 0.0;    // ∫ V dμ0

  double density(double r) const;
  // h_{μ0}(r): c - V/2 inside the support, w(r) outside.
  double potential(double r) const;
  RadialField field() const;
};

// Measure on a grid: density per cell, support mask, Robin constant and the
// potential h at the nodes. Radial solutions also carry the exact model, which
// then backs every Background query.
class EquilibriumMeasure : public Background {
public:
  Grid grid;
  std::vector<double> density_values;
  std::vector<unsigned char> support;
  double robin_constant = 0.0;
  std::vector<double> node_potential;
  std::shared_ptr<const RadialModel> radial;
  FarField far_field;
  std::string model; // "radial", "obstacle", "mean-field-beta", "grid"
  nlohmann::json stats = nlohmann::json::object();
  double interaction = 0.0; // D(μ, μ)

  int dim() const override { return grid.d; }
  double mass() const override;
  double density(const Point& x) const override;
  double potential(const Point& x) const override;
  double smeared_potential(const Point& x, double ell) const override;
  double coulomb_energy() const override { return interaction; }
  double sup_density() const override;
  double ball_mass(const Point& x, double radius) const override;

  double grid_mass() const { return grid_integral(grid, density_values); }
  // ∫ V dμ (exact radial quadrature when available).
  double external_energy(const Potential& v) const;
  // E[μ] = D(μ,μ) + ∫ V dμ from the best available representation.
  double energy(const Potential& v) const { return interaction + external_energy(v); }
  // ∫ μ log μ and ∫ μ^p.
  double entropy() const;
  double power_integral(double p) const;
  Point center() const;
  // Radius of a ball about center() containing the support.
  double support_radius() const;
};

// Wraps a grid density (renormalized to mass 1 when `normalize`), computing
// its node potential, self-interaction and far field.
EquilibriumMeasure measure_from_density(const Grid& g, std::vector<double> density, const std::string& model,
                                        bool normalize = true);

// E[μ] = ∬ w dμ dμ + ∫ V dμ by grid quadrature with exact self-cell terms.
double mf_energy(const EquilibriumMeasure& mu, const Potential& v);

// Radial potential: density ΔV/(2c_d) on B(0,R*) with mass 1. The grid
// representation defaults to a box of half-width 1.25 R* with spacing R*/50
// (R*/25 in d=3).
EquilibriumMeasure solve_equilibrium_radial(const Potential& v, const Grid* grid = nullptr);

struct ObstacleOptions {
  double omega = 0.0;       // over-relaxation; 0 picks 2/(1 + sin(π/N))
  long max_sweeps = 400000; // total budget across levels and Robin updates
  int coarse_levels = -1;   // -1: coarsen down to about 24 cells per axis
  double mass_tol = 1e-7;
  int max_robin_iterations = 60;
};

// Discrete obstacle problem h ≥ c - V/2, -Δh ≥ 0 with complementarity, by
// cascadic projected SOR; c adjusted so the recovered μ0 = -Δh/c_d has mass 1.
EquilibriumMeasure solve_equilibrium_obstacle(const Potential& v, const Grid& grid, double tol = 1e-9,
                                              const ObstacleOptions& opt = {});

struct EffectivePotential {
  Grid grid;
  std::vector<double> zeta;
  double min_value = 0.0;            // most negative ζ on the grid
  double max_abs_on_support = 0.0;   // max |ζ| over the support mask
  std::vector<size_t> negative_nodes; // nodes with ζ < -tol
};

// ζ = h_{μ0} + V/2 - c on the grid nodes.
EffectivePotential zeta_potential(const EquilibriumMeasure& mu0, const Potential& v, double tol = 1e-6);
// ζ at an arbitrary point.
double zeta_at(const EquilibriumMeasure& mu0, const Potential& v, const Point& x);

struct MuBetaOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iterations = 20000;
  bool adaptive = true; // halve the damping when the residual grows
};

// Minimizer of E[μ] + (2/(nβ)) ∫ μ log μ: fixed point of
// μ = exp(-(nβ/2)(2h_μ + V)) / Z, iterated with damping.
EquilibriumMeasure solve_mu_beta(const Potential& v, int n, double beta, const Grid& grid,
                                 const MuBetaOptions& opt = {});

// Box large enough for μ_β: covers the support of μ0 and the thermal tail.
Grid mu_beta_grid(const Potential& v, int n, double beta, double h);

// CSV (node coordinates, density, zeta) and JSON sidecar (grid, Robin constant, stats).
void write_measure(const EquilibriumMeasure& mu, const Potential& v, const std::string& csv_path,
                   const std::string& json_path);

} // namespace cgas
