#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cgas/core.hpp"
#include "cgas/equilibrium.hpp"
#include "cgas/grid.hpp"
#include "cgas/jellium.hpp"

namespace cgas {

// Microscopic radius n^{-1/(d+2)}.
double micro_radius(size_t n, int d);

// #{x_i ∈ B(x, R)} - n μ0(B(x, R)).
double charge_discrepancy(const Configuration& c, const Background& mu0, const Point& x, double radius);

struct FluctuationSample {
  Point center{0, 0, 0};
  double radius = 0.0;
  double value = 0.0;
  std::string scale; // "micro" or "macro"
};

// Wilson score interval for k successes in m trials.
struct Interval {
  double lo = 0.0, hi = 0.0;
};
Interval wilson_interval(long k, long m, double z = 1.959963984540054);

struct TailRow {
  double radius = 0.0;
  double lambda = 0.0;
  std::string scale;
  long exceed = 0, trials = 0;
  double probability = 0.0;
  Interval ci;
};

struct TailTable {
  std::vector<TailRow> rows;
  std::vector<Point> centers;
  bool few_samples = false; // fewer than 10³ samples
  std::string warning;

  nlohmann::json to_json() const;
  // radius, lambda, scale, exceed, trials, p, ci_lo, ci_hi
  std::string to_csv() const;
};

// Centers on a lattice of spacing `radius` whose balls B(x, radius) lie in
// the support of μ0.
std::vector<Point> interior_centers(const EquilibriumMeasure& mu0, double radius);

// Empirical P(|D(x,R)| ≥ λ n R^d) over samples × centers, with Wilson
// intervals. Radii up to twice the micro radius are labeled "micro". Empty
// `centers` picks interior_centers per radius.
TailTable fluctuation_tails(const std::vector<Configuration>& samples, const EquilibriumMeasure& mu0,
                            const std::vector<double>& radii, const std::vector<double>& lambdas,
                            const std::vector<Point>& centers = {});

struct DensityProfile {
  Grid grid;
  std::vector<double> empirical; // density per cell, normalized to mass 1
  double l1 = 0.0;               // ∫ |empirical - μ0|
  double weak_proxy = 0.0;       // sup over the dictionary
  std::vector<double> bump_values;  // |∫(ν̂ - nμ0)φ| / (n ‖∇φ‖_2) per bump
  std::vector<double> bump_scales;
  std::vector<Point> bump_centers;

  nlohmann::json to_json() const;
};

// Histogram of the one-point marginal on `grid`, its L¹ distance to μ0, and
// the test-function proxy for the negative Sobolev norm over Gaussian bumps
// at three scales (0.1, 0.2, 0.4 times the support radius).
DensityProfile density_profile(const std::vector<Configuration>& samples, const EquilibriumMeasure& mu0,
                               const Grid& grid);

// Delaunay triangulation of planar points (Bowyer-Watson). Triangles as
// index triples; fails with ContractError on degenerate input.
std::vector<std::array<size_t, 3>> delaunay_triangles(const std::vector<Point>& pts);

struct BondOrder {
  std::vector<double> psi; // |Σ w e^{6iθ}| / Σ w over bonds, w the Voronoi facet length
  std::vector<unsigned char> interior; // not on the convex hull
  std::vector<unsigned char> bulk;     // no hull point among its neighbors
  double bulk_mean = 0.0;
  double interior_mean = 0.0;
  bool delaunay = true; // false when the k=6 neighbor fallback was used
};

BondOrder bond_order_psi6(const Configuration& c);

struct PeriodDensityRow {
  double side = 0.0;
  double ratio = 0.0;    // ν(K_R)/|K_R|
  double envelope = 0.0; // allowed |ratio - m|
  bool within = true;
};

struct PeriodDensityReport {
  double density = 0.0;
  std::vector<PeriodDensityRow> rows;
  bool converges = true;

  nlohmann::json to_json() const;
};

// Counts the periodic extension of tc in cubes [-R/2, R/2)^d.
PeriodDensityReport period_density_check(const TorusConfiguration& tc, const std::vector<double>& sides);

} // namespace cgas
