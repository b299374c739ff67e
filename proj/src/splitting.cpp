#include "cgas/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cgas {

namespace {

double dim_power(size_t n, int d, double e) { return std::pow(static_cast<double>(n), e / d); }

// Σ_{i≠j} D(δ_i^(ℓ), δ_j^(ℓ)) over ordered pairs.
double smeared_pair_sum(const Configuration& c, double ell) {
  Accumulator acc;
  for (size_t i = 0; i < c.size(); ++i)
    for (size_t j = i + 1; j < c.size(); ++j) acc += smeared_pair_energy(c.points[i], c.points[j], ell, c.d);
  return 2 * acc.value();
}

} // namespace

Configuration BlownUpConfiguration::blow_down() const {
  Configuration c = points;
  for (auto& p : c.points) p = (1.0 / factor) * p;
  return c;
}

BlownUpConfiguration blow_up(const Configuration& c) {
  BlownUpConfiguration b;
  b.d = c.d;
  b.n = c.size();
  b.factor = dim_power(b.n, c.d, 1.0);
  b.points = c;
  for (auto& p : b.points.points) p = b.factor * p;
  return b;
}

BlownUpBackground::BlownUpBackground(const Background& mu, size_t n)
    : mu_(mu), n_(static_cast<double>(n)), factor_(std::pow(static_cast<double>(n), 1.0 / mu.dim())) {
  if (n == 0) throw DomainError("blow-up needs n ≥ 1");
}

double BlownUpBackground::lift(double h) const {
  // n ∫ w(x' - λy) dμ(y): w(λr) = w(r)/λ in d=3, w(r) - log λ in d=2.
  if (mu_.dim() == 3) return n_ * h / factor_;
  return n_ * (h - std::log(factor_) * mu_.mass());
}

double BlownUpBackground::potential(const Point& x) const { return lift(mu_.potential(down(x))); }

double BlownUpBackground::smeared_potential(const Point& x, double ell) const {
  return lift(mu_.smeared_potential(down(x), ell / factor_));
}

double BlownUpBackground::coulomb_energy() const {
  double m = mu_.mass();
  if (mu_.dim() == 3) return n_ * n_ * mu_.coulomb_energy() / factor_;
  return n_ * n_ * (mu_.coulomb_energy() - std::log(factor_) * m * m);
}

double BlownUpBackground::ball_mass(const Point& x, double radius) const {
  return n_ * mu_.ball_mass(down(x), radius / factor_);
}

double lieb_constant(int d) { return space_constants(d).c / (2.0 * (check_dim(d) + 2)); }

double smearing_error(const Background& mu, const Point& x, double ell) {
  return mu.smeared_potential(x, ell) - mu.potential(x);
}

double field_energy(const Configuration& c, const Background& mu, double q, double ell) {
  if (mu.dim() != c.d) throw ContractError("background and configuration dimensions differ");
  Accumulator cross;
  for (const Point& x : c.points) cross += mu.smeared_potential(x, ell);
  const double n = static_cast<double>(c.size());
  Accumulator acc;
  acc += q * q * mu.coulomb_energy();
  acc += -2 * q * cross.value();
  acc += smeared_pair_sum(c, ell);
  acc += n * self_energy(ell, c.d);
  return space_constants(c.d).c * acc.value();
}

double smeared_field_energy(const Configuration& c, const Background& mu0, double ell) {
  if (!(ell > 0)) throw DomainError("smearing radius must be positive");
  return field_energy(c, mu0, static_cast<double>(c.size()), ell);
}

nlohmann::json SplittingReport::to_json() const {
  return {{"d", d},
          {"n", n},
          {"eta", eta},
          {"ell", ell},
          {"hamiltonian", hamiltonian},
          {"mean_field_term", mean_field_term},
          {"log_term", log_term},
          {"zeta_term", zeta_term},
          {"smeared_energy", smeared_energy},
          {"j_n", j_n},
          {"smearing_error", smearing_error},
          {"smearing_bound", smearing_bound},
          {"split_sum", split_sum},
          {"lower_bound", lower_bound},
          {"next_order", next_order},
          {"min_separation", min_separation},
          {"equality_flag", equality_flag}};
}

SplittingReport onsager_split(const Configuration& c, const EquilibriumMeasure& mu0, const Potential& v, double eta) {
  if (!(eta > 0) || eta > 1) throw DomainError("eta must lie in (0, 1]");
  if (c.d != v.d || c.d != mu0.dim()) throw ContractError("dimension mismatch in splitting");
  const int d = c.d;
  const auto sc = space_constants(d);
  SplittingReport r;
  r.d = d;
  r.n = c.size();
  const double n = static_cast<double>(r.n);
  const double scale = dim_power(r.n, d, 2.0 * (d - 1)); // n^{2-2/d}
  r.eta = eta;
  r.ell = eta / dim_power(r.n, d, 1.0);
  r.hamiltonian = hamiltonian(c, v);
  r.mean_field_term = n * n * mu0.energy(v);
  r.log_term = d == 2 ? 0.5 * n * std::log(n) : 0.0;

  Accumulator zeta, lieb, cross;
  for (const Point& x : c.points) {
    double h = mu0.potential(x);
    double s = mu0.smeared_potential(x, r.ell);
    zeta += h + 0.5 * v(x) - mu0.robin_constant;
    lieb += s - h;
    cross += s;
  }
  r.zeta_term = 2 * n * zeta.value();
  r.smearing_error = 2 * n * lieb.value();

  Accumulator field;
  field += n * n * mu0.coulomb_energy();
  field += -2 * n * cross.value();
  field += smeared_pair_sum(c, r.ell);
  field += n * self_energy(r.ell, d);
  r.smeared_energy = sc.c * field.value();

  const double blown = r.smeared_energy / dim_power(r.n, d, d - 2.0); // ∫|∇h'_{n,η}|²
  const double renorm = sc.kappa * (d == 3 ? 1.0 / eta : -std::log(eta)) + sc.gamma;
  r.j_n = (blown / n - renorm) / sc.c;

  r.smearing_bound = 2 * n * n * mu0.sup_density() * lieb_constant(d) * r.ell * r.ell;
  const double base = r.mean_field_term + r.zeta_term - r.log_term + scale * r.j_n;
  r.split_sum = base + r.smearing_error;
  r.lower_bound = base - r.smearing_bound;
  r.next_order = (r.hamiltonian - r.mean_field_term + r.log_term) / scale;
  r.min_separation = r.n > 1 ? min_separation(c).distance : std::numeric_limits<double>::infinity();
  r.equality_flag = r.min_separation >= 2 * r.ell;
  return r;
}

double next_order_energy(const Configuration& c, const EquilibriumMeasure& mu0, const Potential& v) {
  const double n = static_cast<double>(c.size());
  double log_term = c.d == 2 ? 0.5 * n * std::log(n) : 0.0;
  return (hamiltonian(c, v) - n * n * mu0.energy(v) + log_term) / dim_power(c.size(), c.d, 2.0 * (c.d - 1));
}

double next_order_lower_bound(const EquilibriumMeasure& mu0) {
  const int d = mu0.dim();
  const auto sc = space_constants(d);
  double renorm = sc.kappa * (d == 3 ? 1.0 : 0.0) + sc.gamma;
  return -renorm / sc.c - 2 * mu0.sup_density() * lieb_constant(d);
}

bool Box::contains(const Point& x, int d) const {
  for (int a = 0; a < d; ++a)
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  return true;
}

double Box::boundary_distance(const Point& x, int d) const {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) best = std::min({best, std::fabs(x[a] - lo[a]), std::fabs(x[a] - hi[a])});
  return best;
}

RenormalizedEnergy renormalized_W_of_config(const Configuration& c, const Background& mu, const Box& u, double eta0) {
  if (mu.dim() != c.d) throw ContractError("background and configuration dimensions differ");
  if (!(eta0 > 0) || eta0 > 1) throw DomainError("eta0 must lie in (0, 1]");
  const int d = c.d;
  std::vector<Point> inside;
  for (const Point& p : c.points)
    if (u.contains(p, d)) inside.push_back(p);
  if (inside.empty()) throw ContractError("no points inside the box");
  std::ostringstream bad;
  int violations = 0;
  for (size_t i = 0; i < inside.size(); ++i) {
    if (u.boundary_distance(inside[i], d) < eta0) {
      if (violations++ < 10) bad << " (" << i << ", boundary)";
    }
    for (size_t j = i + 1; j < inside.size(); ++j)
      if (norm(inside[i] - inside[j]) < eta0 && violations++ < 10) bad << " (" << i << ", " << j << ")";
  }
  if (violations)
    throw ContractError("configuration is not " + std::to_string(eta0) + "-separated in the box:" + bad.str() +
                        (violations > 10 ? " ..." : ""));

  Configuration sub(d, inside);
  const auto sc = space_constants(d);
  // Balls of radius η ≤ η0/2 are disjoint, so pair terms are exact Coulomb
  // and the self terms cancel the renormalization exactly; only the cross
  // term D(μ, δ^(η)) still depends on η, through O(η²) smearing errors.
  const double pairs = pair_energy(sub);
  RenormalizedEnergy out;
  out.points = inside.size();
  for (int k = 1; k <= 3; ++k) {
    double eta = eta0 / std::pow(2.0, k);
    Accumulator cross;
    for (const Point& x : inside) cross += mu.smeared_potential(x, eta);
    double w = sc.c * (pairs - 2 * cross.value() + mu.coulomb_energy());
    out.etas.push_back(eta);
    out.ladder.push_back(w);
  }
  auto richardson = [&](int a) { return (4 * out.ladder[a + 1] - out.ladder[a]) / 3; };
  double r1 = richardson(0), r2 = richardson(1);
  out.value = r2;
  out.tolerance = std::fabs(r2 - r1);
  return out;
}

} // namespace cgas
