#pragma once

#include <array>
#include <vector>

#include <json.hpp>

#include "cgas/types.hpp"

namespace cgas {

// Uniform cell-centered grid on the box [lo, lo + n h]. Node k sits at the
// center of cell k; values stored on nodes are read as cell averages.
struct Grid {
  int d = 2;
  Point lo{0, 0, 0};
  double h = 0.0;
  std::array<int, 3> n{0, 0, 1};

  // Cube of half-width `half_width` around `center`, spacing close to h
  // (adjusted so that an integer number of cells fits exactly).
  static Grid centered(int d, const Point& center, double half_width, double h);

  size_t size() const { return static_cast<size_t>(n[0]) * n[1] * n[2]; }
  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(k) * n[1] + j) * n[0] + i;
  }
  std::array<int, 3> coords(size_t idx) const;
  Point node(size_t idx) const;
  double cell_volume() const { return d == 3 ? h * h * h : h * h; }
  Point hi() const;
  bool contains(const Point& x) const;

  nlohmann::json to_json() const;
  static Grid from_json(const nlohmann::json& j);
};

// Σ f_k |cell|.
double grid_integral(const Grid& g, const std::vector<double>& f);

// Multilinear interpolation between node values; points between the outer
// nodes and the box wall use the nearest node layer.
double grid_interpolate(const Grid& g, const std::vector<double>& f, const Point& x);

// Value of the cell containing x (piecewise-constant reading); zero outside the box.
double grid_cell_value(const Grid& g, const std::vector<double>& f, const Point& x);

// Σ_k |f_k - g_k| |cell| for two fields on the same grid.
double grid_l1_distance(const Grid& g, const std::vector<double>& a, const std::vector<double>& b);

// Potential ∫ w(x_k - y) ρ(y) dy at every node for piecewise-constant ρ,
// by zero-padded FFT convolution with exact near-field cell integrals.
std::vector<double> coulomb_potential_on_grid(const Grid& g, const std::vector<double>& density);

// D(ρ, ρ) for piecewise-constant ρ using exact cell-cell interaction
// averages near the diagonal (including the singular self-cell term).
double coulomb_energy_on_grid(const Grid& g, const std::vector<double>& density);

} // namespace cgas
