#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgas/types.hpp"

namespace cgas {

class EquilibriumMeasure;

// Bravais lattice given by d basis vectors (rows of `basis`).
struct Lattice {
  std::string name;
  int d = 2;
  std::array<Point, 3> basis{};

  double covolume() const;
  double density() const { return 1.0 / covolume(); }
  // Rows k_i with k_i · b_j = 2π δ_ij.
  std::array<Point, 3> reciprocal() const;
  // Coordinates of x in the basis.
  Point fractional(const Point& x) const;
  Point cartesian(const Point& f) const;
  Lattice scaled(double factor) const;
  Lattice with_density(double m) const;
  // Rotation about the origin: angle in the plane (d=2) or about `axis` (d=3).
  Lattice rotated(double angle, const Point& axis = {0, 0, 1}) const;

  nlohmann::json to_json() const;
  static Lattice from_json(const nlohmann::json& j);
};

// Unit-density catalog entries: "square", "triangular", "rhombic<deg>"
// (equal sides, given angle), "sc", "bcc", "fcc".
Lattice make_lattice(const std::string& name);
std::vector<Lattice> lattice_catalog(int d);

// N points on the flat torus spanned by `periods`.
struct TorusConfiguration {
  Lattice periods;
  std::vector<Point> points;

  TorusConfiguration(Lattice periods, std::vector<Point> pts);
  int dim() const { return periods.d; }
  size_t size() const { return points.size(); }
  double volume() const { return periods.covolume(); }
  bool unit_density(double tol = 1e-9) const;
};

// The lattice as a one-point torus, and its k×…×k supercell.
TorusConfiguration lattice_torus(const Lattice& lat);
TorusConfiguration supercell(const Lattice& lat, int k);

struct EwaldParameters {
  double alpha = 0.0;
  double real_cutoff = 0.0;
  double recip_cutoff = 0.0;
  double tolerance = 1e-13;
  double real_tail = 0.0;  // estimated size of the neglected real-space terms
  double recip_tail = 0.0; // same for the reciprocal sum
};

// Cutoffs from the tail estimates for the given torus; alpha = 0 picks
// √π V^{-1/d}. Throws if the tails cannot be brought under the tolerance.
EwaldParameters ewald_parameters(const Lattice& periods, double tol = 1e-13, double alpha = 0.0);

// Ewald evaluation of the mean-zero torus Green function -ΔG = δ_0 - 1/V.
// Caches the lattice and reciprocal vectors within the cutoffs.
class TorusGreen {
public:
  TorusGreen(const Lattice& periods, const EwaldParameters& ewald);

  double operator()(const Point& x) const;
  // lim_{x->0} G(x) - w(x)/c_d.
  double madelung() const;
  const EwaldParameters& parameters() const { return ewald_; }

private:
  double real_sum(const Point& x, bool skip_origin) const;
  double recip_sum(const Point& x) const;
  Point reduce(const Point& x) const;

  Lattice periods_;
  EwaldParameters ewald_;
  double volume_;
  std::vector<Point> shifts_;                       // real-space lattice vectors
  std::vector<std::pair<Point, double>> recip_;     // k and e^{-k²/4α²}/k² for one of each ±k pair
};

double torus_green(const Point& x, const Lattice& periods, const EwaldParameters& ewald);
double madelung_constant(const Lattice& periods, const EwaldParameters& ewald);

// 𝒲 = (c_d²/V)(Σ_{i≠j} G(a_i - a_j) + N R); for unit density V = N.
double periodic_renormalized_energy(const TorusConfiguration& tc, const EwaldParameters& ewald);
double periodic_renormalized_energy(const TorusConfiguration& tc, double tol = 1e-13);

// 𝒲 of the lattice at its own density m from the density-one value:
// m^{2-2/d} 𝒲(1) in d=3, m(𝒲(1) - (κ_2/2) log m) in d=2.
double lattice_energy(const Lattice& lat, double tol = 1e-13);

// Σ_{p≠0} |p|^{-(2+s)} by the incomplete-gamma (theta) representation,
// valid for every s > 0 except the pole 2 + s = d.
double epstein_zeta(const Lattice& lat, double s, double tol = 1e-14);
// Direct shell sum over |p| ≤ radius with the continuum tail added; needs s > d - 2.
double epstein_zeta_direct(const Lattice& lat, double s, double radius);

struct ZetaConsistency {
  double energy_difference = 0.0;            // 𝒲(lat1) - 𝒲(lat2)
  std::vector<double> s, zeta_difference;    // ζ_1(s) - ζ_2(s) along the ladder
  double zeta_limit = 0.0;                   // extrapolated s -> 0⁺
  double zeta_small_s = 0.0;                 // direct evaluation at s = 1e-6
  double fitted_constant = 0.0;              // energy_difference / zeta_limit
  bool same_sign = false;

  nlohmann::json to_json() const;
};

// Kronecker-limit comparison of two unit-density planar lattices.
ZetaConsistency zeta_renorm_consistency(const Lattice& lat1, const Lattice& lat2, const std::vector<double>& s_ladder);

struct XiEstimate {
  double value = 0.0;
  double alpha = 0.0;            // the 𝒲 minimum used
  double lattice_term = 0.0;     // α/c_d ∫ μ0^{2-2/d} or α/(2π)
  double entropy_term = 0.0;     // -½ ∫ μ0 log μ0 in d=2
  bool conjectural = true;
  std::string alpha_source;

  nlohmann::json to_json() const;
};

// Minimum of 𝒲 over the catalog at unit density, with the lattice name.
std::pair<double, std::string> catalog_minimum_energy(int d);

// ξ_d from μ0 and an estimate of min 𝒲.
XiEstimate xi_d(const EquilibriumMeasure& mu0, double alpha_estimate, const std::string& source = "user");
XiEstimate xi_d(const EquilibriumMeasure& mu0); // catalog minimum, flagged conjectural

struct BoxAverage {
  double value = 0.0;                // at the first ladder entry
  std::vector<int> ladder;           // supercell multiples
  std::vector<double> values;
  double tail = 0.0;                 // continuum tail added past the cutoff
  double cutoff = 0.0;               // |k| cutoff
  size_t terms = 0;
};

// ⨍|E_η|² - m(κ_d w(η) + γ_2 1_{d=2}) over one period, by Parseval over the
// reciprocal lattice with the smeared-charge form factor. Each ladder entry
// k repeats the computation on the k-fold supercell.
BoxAverage box_averaged_W_eta(const TorusConfiguration& tc, double eta, const std::vector<int>& ladder = {1});
BoxAverage box_averaged_W_eta(const Lattice& lat, double eta, const std::vector<int>& ladder = {1});

} // namespace cgas
