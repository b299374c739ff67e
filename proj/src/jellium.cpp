#include "cgas/jellium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cgas/core.hpp"
#include "cgas/equilibrium.hpp"

namespace cgas {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double euler_gamma = 0.57721566490153286061;

double sphere_area(int d) { return d == 3 ? 4 * pi : 2 * pi; }

Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Basis rows with the third row set to e_z in d=2, so 3-D formulas apply.
std::array<Point, 3> full_basis(const Lattice& l) {
  auto b = l.basis;
  if (l.d == 2) {
    b[0][2] = b[1][2] = 0;
    b[2] = {0, 0, 1};
  }
  return b;
}

// Calls f(p) for every lattice point p = Σ n_i b_i with |p| ≤ radius.
void for_lattice_points(const Lattice& lat, double radius, const std::function<void(const Point&)>& f) {
  auto rec = lat.reciprocal();
  int m[3] = {0, 0, 0};
  for (int a = 0; a < lat.d; ++a) m[a] = static_cast<int>(std::ceil(radius * norm(rec[a]) / (2 * pi))) + 1;
  const double r2 = radius * radius;
  for (int i = -m[0]; i <= m[0]; ++i)
    for (int j = -m[1]; j <= m[1]; ++j)
      for (int k = -m[2]; k <= m[2]; ++k) {
        Point p = double(i) * lat.basis[0] + double(j) * lat.basis[1];
        if (lat.d == 3) p += double(k) * lat.basis[2];
        if (norm2(p) <= r2) f(p);
      }
}

Lattice reciprocal_lattice(const Lattice& lat) {
  Lattice r;
  r.name = lat.name + "-reciprocal";
  r.d = lat.d;
  r.basis = lat.reciprocal();
  return r;
}

// Γ(a, x) for any real a, by upward recurrence from a > 0.
double upper_gamma(double a, double x) {
  if (a > 0) return boost::math::tgamma(a, x);
  if (a == 0) return boost::math::expint(1, x);
  return (upper_gamma(a + 1, x) - std::pow(x, a) * std::exp(-x)) / a;
}

// Real-space Ewald kernel: erfc(αr)/(4πr) in d=3, E1(α²r²)/(4π) in d=2.
double real_kernel(double r, double alpha, int d) {
  if (d == 3) return std::erfc(alpha * r) / (4 * pi * r);
  double z = alpha * alpha * r * r;
  return z > 700 ? 0.0 : boost::math::expint(1, z) / (4 * pi);
}

double tail_integral(const std::function<double(double)>& f, double from, double width) {
  Accumulator acc;
  for (int p = 0; p < 40; ++p)
    acc += gauss_kronrod<double, 31>::integrate(f, from + p * width, from + (p + 1) * width, 5, 1e-12);
  return acc.value();
}

} // namespace

// ------------------------------------------------------------------ Lattice

double Lattice::covolume() const {
  auto b = full_basis(*this);
  return std::fabs(dot(b[0], cross(b[1], b[2])));
}

std::array<Point, 3> Lattice::reciprocal() const {
  auto b = full_basis(*this);
  double vol = dot(b[0], cross(b[1], b[2]));
  if (vol == 0) throw DomainError("degenerate lattice basis");
  std::array<Point, 3> k{(2 * pi / vol) * cross(b[1], b[2]), (2 * pi / vol) * cross(b[2], b[0]),
                         (2 * pi / vol) * cross(b[0], b[1])};
  if (d == 2) k[2] = {0, 0, 0};
  return k;
}

Point Lattice::fractional(const Point& x) const {
  auto k = reciprocal();
  Point f{dot(x, k[0]) / (2 * pi), dot(x, k[1]) / (2 * pi), d == 3 ? dot(x, k[2]) / (2 * pi) : 0.0};
  return f;
}

Point Lattice::cartesian(const Point& f) const {
  Point x = f[0] * basis[0] + f[1] * basis[1];
  if (d == 3) x += f[2] * basis[2];
  return x;
}

Lattice Lattice::scaled(double factor) const {
  Lattice l = *this;
  for (int a = 0; a < d; ++a) l.basis[a] = factor * basis[a];
  return l;
}

Lattice Lattice::with_density(double m) const {
  if (!(m > 0)) throw DomainError("lattice density must be positive");
  return scaled(std::pow(density() / m, 1.0 / d));
}

Lattice Lattice::rotated(double angle, const Point& axis) const {
  Lattice l = *this;
  double c = std::cos(angle), s = std::sin(angle);
  Point u = d == 2 ? Point{0, 0, 1} : (1.0 / norm(axis)) * axis;
  for (int a = 0; a < d; ++a) {
    const Point& v = basis[a];
    // Rodrigues: v cos + (u × v) sin + u (u·v)(1 - cos).
    l.basis[a] = c * v + s * cross(u, v) + (dot(u, v) * (1 - c)) * u;
    if (d == 2) l.basis[a][2] = 0;
  }
  return l;
}

nlohmann::json Lattice::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (int a = 0; a < d; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < d; ++c) row.push_back(basis[a][c]);
    b.push_back(row);
  }
  return {{"name", name}, {"d", d}, {"basis", b}, {"density", density()}};
}

Lattice Lattice::from_json(const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "name" && it.key() != "d" && it.key() != "basis" && it.key() != "density")
      throw SpecError("unknown lattice key '" + it.key() + "'");
  Lattice l;
  l.name = j.value("name", std::string("custom"));
  l.d = check_dim(j.at("d").get<int>());
  const auto& b = j.at("basis");
  if (!b.is_array() || static_cast<int>(b.size()) != l.d) throw SpecError("lattice basis needs d rows");
  for (int a = 0; a < l.d; ++a) {
    if (!b[a].is_array() || static_cast<int>(b[a].size()) != l.d) throw SpecError("lattice basis rows need d entries");
    for (int c = 0; c < l.d; ++c) l.basis[a][c] = b[a][c].get<double>();
  }
  if (!(l.covolume() > 1e-300)) throw DomainError("degenerate lattice basis");
  if (j.contains("density")) l = l.with_density(j["density"].get<double>());
  return l;
}

Lattice make_lattice(const std::string& name) {
  Lattice l;
  l.name = name;
  if (name == "square") {
    l.d = 2;
    l.basis[0] = {1, 0, 0};
    l.basis[1] = {0, 1, 0};
  } else if (name == "triangular") {
    l.d = 2;
    double a = std::sqrt(2 / std::sqrt(3.0));
    l.basis[0] = {a, 0, 0};
    l.basis[1] = {a / 2, a * std::sqrt(3.0) / 2, 0};
  } else if (name.rfind("rhombic", 0) == 0) {
    double deg = std::stod(name.substr(7));
    if (!(deg > 0 && deg < 180)) throw DomainError("rhombic angle must lie in (0, 180)");
    double th = deg * pi / 180, a = 1 / std::sqrt(std::sin(th));
    l.d = 2;
    l.basis[0] = {a, 0, 0};
    l.basis[1] = {a * std::cos(th), a * std::sin(th), 0};
  } else if (name == "sc") {
    l.d = 3;
    l.basis = {Point{1, 0, 0}, Point{0, 1, 0}, Point{0, 0, 1}};
  } else if (name == "bcc") {
    l.d = 3;
    double a = std::cbrt(2.0) / 2;
    l.basis = {Point{-a, a, a}, Point{a, -a, a}, Point{a, a, -a}};
  } else if (name == "fcc") {
    l.d = 3;
    double a = std::cbrt(4.0) / 2;
    l.basis = {Point{0, a, a}, Point{a, 0, a}, Point{a, a, 0}};
  } else {
    throw SpecError("unknown lattice '" + name + "'");
  }
  return l;
}

std::vector<Lattice> lattice_catalog(int d) {
  if (check_dim(d) == 2) return {make_lattice("square"), make_lattice("triangular")};
  return {make_lattice("sc"), make_lattice("bcc"), make_lattice("fcc")};
}

// ------------------------------------------------------------------- Torus

TorusConfiguration::TorusConfiguration(Lattice p, std::vector<Point> pts) : periods(std::move(p)), points(std::move(pts)) {
  check_dim(periods.d);
  if (points.empty()) throw ContractError("torus configuration needs at least one point");
  for (auto& x : points) {
    if (periods.d == 2) x[2] = 0;
    for (double v : x)
      if (!std::isfinite(v)) throw DomainError("torus point has a non-finite coordinate");
  }
}

bool TorusConfiguration::unit_density(double tol) const {
  return std::fabs(volume() - static_cast<double>(size())) <= tol * static_cast<double>(size());
}

TorusConfiguration lattice_torus(const Lattice& lat) { return TorusConfiguration(lat, {Point{0, 0, 0}}); }

TorusConfiguration supercell(const Lattice& lat, int k) {
  if (k < 1) throw DomainError("supercell factor must be positive");
  Lattice big = lat.scaled(k);
  big.name = lat.name + "x" + std::to_string(k);
  std::vector<Point> pts;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < (lat.d == 3 ? k : 1); ++l) pts.push_back(lat.cartesian({double(i), double(j), double(l)}));
  return TorusConfiguration(big, pts);
}

// ------------------------------------------------------------------- Ewald

EwaldParameters ewald_parameters(const Lattice& periods, double tol, double alpha) {
  const int d = check_dim(periods.d);
  if (!(tol > 0)) throw DomainError("Ewald tolerance must be positive");
  const double vol = periods.covolume();
  EwaldParameters e;
  e.tolerance = tol;
  e.alpha = alpha > 0 ? alpha : std::sqrt(pi) * std::pow(vol, -1.0 / d);
  const double a = e.alpha;
  // Continuum estimates of the neglected shells, doubled for safety.
  auto real_tail = [&](double rc) {
    auto f = [&](double r) { return sphere_area(d) * std::pow(r, d - 1) * real_kernel(r, a, d) / vol; };
    return 2 * tail_integral(f, rc, 0.5 / a);
  };
  auto recip_tail = [&](double kc) {
    auto f = [&](double k) { return sphere_area(d) * std::pow(k, d - 3) * std::exp(-k * k / (4 * a * a)) / std::pow(2 * pi, d); };
    return 2 * tail_integral(f, kc, a);
  };
  double rc = 1 / a;
  while ((e.real_tail = real_tail(rc)) > tol / 4) {
    rc += 0.25 / a;
    if (rc > 100 / a) throw ConvergenceError("Ewald real-space cutoff search failed", e.real_tail);
  }
  double kc = a;
  while ((e.recip_tail = recip_tail(kc)) > tol / 4) {
    kc += 0.5 * a;
    if (kc > 200 * a) throw ConvergenceError("Ewald reciprocal cutoff search failed", e.recip_tail);
  }
  e.real_cutoff = rc;
  e.recip_cutoff = kc;
  return e;
}

TorusGreen::TorusGreen(const Lattice& periods, const EwaldParameters& ewald)
    : periods_(periods), ewald_(ewald), volume_(periods.covolume()) {
  check_dim(periods.d);
  // After reduction |x| is at most the cell diameter.
  double diam = 0;
  for (int i = -1; i <= 1; i += 2)
    for (int j = -1; j <= 1; j += 2)
      for (int k = -1; k <= 1; k += 2) diam = std::max(diam, norm(periods.cartesian({0.5 * i, 0.5 * j, 0.5 * k})));
  for_lattice_points(periods, ewald.real_cutoff + diam, [&](const Point& p) { shifts_.push_back(p); });
  std::sort(shifts_.begin(), shifts_.end(), [](const Point& a, const Point& b) { return norm2(a) > norm2(b); });
  const double a2 = ewald.alpha * ewald.alpha;
  std::vector<Point> ks;
  for_lattice_points(reciprocal_lattice(periods), ewald.recip_cutoff, [&](const Point& k) {
    // One representative of each ±k pair.
    for (int c = 0; c < 3; ++c) {
      if (k[c] > 0) break;
      if (k[c] < 0) return;
    }
    if (norm2(k) > 0) ks.push_back(k);
  });
  std::sort(ks.begin(), ks.end(), [](const Point& a, const Point& b) { return norm2(a) > norm2(b); });
  for (const Point& k : ks) {
    double k2 = norm2(k);
    recip_.push_back({k, std::exp(-k2 / (4 * a2)) / k2});
  }
}

Point TorusGreen::reduce(const Point& x) const {
  Point f = periods_.fractional(x);
  for (int a = 0; a < periods_.d; ++a) f[a] -= std::round(f[a]);
  return periods_.cartesian(f);
}

double TorusGreen::real_sum(const Point& x, bool skip_origin) const {
  Accumulator acc;
  const int d = periods_.d;
  for (const Point& l : shifts_) {
    if (skip_origin && norm2(l) == 0) continue;
    double r = norm(x + l);
    if (r <= ewald_.real_cutoff) acc += real_kernel(r, ewald_.alpha, d);
  }
  return acc.value();
}

double TorusGreen::recip_sum(const Point& x) const {
  Accumulator acc;
  for (const auto& [k, w] : recip_) acc += w * std::cos(dot(k, x));
  return 2 * acc.value() / volume_;
}

double TorusGreen::operator()(const Point& x) const {
  Point y = reduce(x);
  if (norm(y) < 1e-13 * std::pow(volume_, 1.0 / periods_.d))
    throw SingularityError("torus Green function evaluated at a lattice point");
  return real_sum(y, false) + recip_sum(y) - 1 / (4 * ewald_.alpha * ewald_.alpha * volume_);
}

double TorusGreen::madelung() const {
  const double a = ewald_.alpha;
  // Finite part of the origin term: -erf(αr)/(4πr) -> -α/(2π^{3/2}) in d=3,
  // E1(α²r²)/(4π) + log r/(2π) -> -(γ + 2 log α)/(4π) in d=2.
  double origin = periods_.d == 3 ? -a / (2 * std::pow(pi, 1.5)) : -(euler_gamma + 2 * std::log(a)) / (4 * pi);
  return real_sum({0, 0, 0}, true) + recip_sum({0, 0, 0}) - 1 / (4 * a * a * volume_) + origin;
}

double torus_green(const Point& x, const Lattice& periods, const EwaldParameters& ewald) {
  return TorusGreen(periods, ewald)(x);
}

double madelung_constant(const Lattice& periods, const EwaldParameters& ewald) {
  return TorusGreen(periods, ewald).madelung();
}

double periodic_renormalized_energy(const TorusConfiguration& tc, const EwaldParameters& ewald) {
  const int d = tc.dim();
  TorusGreen g(tc.periods, ewald);
  Accumulator acc;
  const size_t n = tc.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      try {
        acc += 2 * g(tc.points[i] - tc.points[j]);
      } catch (const SingularityError&) {
        throw SingularityError("points " + std::to_string(i) + " and " + std::to_string(j) +
                               " coincide on the torus: multiplicity makes the energy infinite");
      }
    }
  acc += static_cast<double>(n) * g.madelung();
  double c = space_constants(d).c;
  return c * c * acc.value() / tc.volume();
}

double periodic_renormalized_energy(const TorusConfiguration& tc, double tol) {
  return periodic_renormalized_energy(tc, ewald_parameters(tc.periods, tol));
}

double lattice_energy(const Lattice& lat, double tol) {
  const double m = lat.density();
  Lattice unit = lat.with_density(1.0);
  double w1 = periodic_renormalized_energy(lattice_torus(unit), tol);
  if (lat.d == 3) return std::pow(m, 2 - 2.0 / 3) * w1;
  return m * (w1 - 0.5 * space_constants(2).kappa * std::log(m));
}

// ------------------------------------------------------------ Epstein zeta

double epstein_zeta(const Lattice& lat, double s, double tol) {
  const int d = check_dim(lat.d);
  if (!(s > 0)) throw DomainError("Epstein zeta needs s > 0");
  const double nu = 0.5 * (2 + s), half = 0.5 * d;
  if (std::fabs(nu - half) < 1e-12) throw DomainError("Epstein zeta has a pole at 2 + s = d");
  const double vol = lat.covolume();
  // Terms decay like e^{-π|p|²}; keep π|p|² up to log(1/tol) + margin.
  const double radius = std::sqrt((std::log(1 / tol) + 8) / pi);
  Accumulator direct, dual;
  for_lattice_points(lat, radius, [&](const Point& p) {
    double x = pi * norm2(p);
    if (x > 0) direct += upper_gamma(nu, x) * std::pow(x, -nu);
  });
  Lattice dl = reciprocal_lattice(lat).scaled(1 / (2 * pi));
  for_lattice_points(dl, radius, [&](const Point& q) {
    double x = pi * norm2(q);
    if (x > 0) dual += upper_gamma(half - nu, x) * std::pow(x, nu - half);
  });
  double bracket = direct.value() + dual.value() / vol + 1 / (vol * (nu - half)) - 1 / nu;
  return std::pow(pi, nu) / std::tgamma(nu) * bracket;
}

double epstein_zeta_direct(const Lattice& lat, double s, double radius) {
  const int d = check_dim(lat.d);
  if (!(s > d - 2)) throw DomainError("direct Epstein sum needs s > d - 2");
  Accumulator acc;
  const double e = -(2 + s) / 2;
  std::vector<double> terms;
  for_lattice_points(lat, radius, [&](const Point& p) {
    double r2 = norm2(p);
    if (r2 > 0) terms.push_back(std::pow(r2, e));
  });
  std::sort(terms.begin(), terms.end());
  for (double t : terms) acc += t;
  // Continuum tail beyond the radius.
  acc += sphere_area(d) / lat.covolume() * std::pow(radius, d - 2 - s) / (2 + s - d);
  return acc.value();
}

nlohmann::json ZetaConsistency::to_json() const {
  return {{"energy_difference", energy_difference}, {"s", s},
          {"zeta_difference", zeta_difference},     {"zeta_limit", zeta_limit},
          {"zeta_small_s", zeta_small_s},           {"fitted_constant", fitted_constant},
          {"same_sign", same_sign}};
}

ZetaConsistency zeta_renorm_consistency(const Lattice& lat1, const Lattice& lat2, const std::vector<double>& s_ladder) {
  if (lat1.d != 2 || lat2.d != 2) throw ContractError("zeta consistency is a planar statement");
  if (std::fabs(lat1.density() - 1) > 1e-9 || std::fabs(lat2.density() - 1) > 1e-9)
    throw ContractError("zeta consistency needs unit-density lattices");
  if (s_ladder.empty()) throw DomainError("empty s ladder");
  ZetaConsistency z;
  z.energy_difference = lattice_energy(lat1) - lattice_energy(lat2);
  for (double s : s_ladder) {
    z.s.push_back(s);
    z.zeta_difference.push_back(epstein_zeta(lat1, s) - epstein_zeta(lat2, s));
  }
  // Lagrange extrapolation to s = 0 through the whole ladder.
  double lim = 0;
  for (size_t i = 0; i < z.s.size(); ++i) {
    double li = 1;
    for (size_t j = 0; j < z.s.size(); ++j)
      if (j != i) li *= (0 - z.s[j]) / (z.s[i] - z.s[j]);
    lim += li * z.zeta_difference[i];
  }
  z.zeta_limit = lim;
  z.zeta_small_s = epstein_zeta(lat1, 1e-6) - epstein_zeta(lat2, 1e-6);
  const double eps = 1e-12;
  auto sign = [&](double v) { return std::fabs(v) < eps ? 0 : (v > 0 ? 1 : -1); };
  int ref = sign(z.energy_difference);
  z.same_sign = sign(z.zeta_limit) == ref;
  for (double v : z.zeta_difference) z.same_sign = z.same_sign && sign(v) == ref;
  z.fitted_constant = std::fabs(lim) < eps ? std::numeric_limits<double>::quiet_NaN() : z.energy_difference / lim;
  return z;
}

// ---------------------------------------------------------------------- ξ_d

nlohmann::json XiEstimate::to_json() const {
  return {{"value", value},          {"alpha", alpha},           {"lattice_term", lattice_term},
          {"entropy_term", entropy_term}, {"conjectural", conjectural}, {"alpha_source", alpha_source}};
}

std::pair<double, std::string> catalog_minimum_energy(int d) {
  std::pair<double, std::string> best{std::numeric_limits<double>::infinity(), ""};
  for (const Lattice& l : lattice_catalog(d)) {
    double w = lattice_energy(l);
    if (w < best.first) best = {w, l.name};
  }
  return best;
}

XiEstimate xi_d(const EquilibriumMeasure& mu0, double alpha_estimate, const std::string& source) {
  const int d = mu0.dim();
  XiEstimate x;
  x.alpha = alpha_estimate;
  x.alpha_source = source;
  if (d == 2) {
    x.lattice_term = alpha_estimate / (2 * pi);
    x.entropy_term = -0.5 * mu0.entropy();
  } else {
    x.lattice_term = alpha_estimate / space_constants(d).c * mu0.power_integral(2 - 2.0 / d);
  }
  x.value = x.lattice_term + x.entropy_term;
  return x;
}

XiEstimate xi_d(const EquilibriumMeasure& mu0) {
  auto [w, name] = catalog_minimum_energy(mu0.dim());
  return xi_d(mu0, w, "catalog minimum (" + name + "), conjectural");
}

// ------------------------------------------------------ box-averaged 𝒲_η

namespace {

// Fourier transform of the normalized ball indicator, ρ̂(0) = 1.
double ball_form_factor(double u, int d) {
  if (d == 2) return u < 1e-4 ? 1 - u * u / 8 : 2 * std::cyl_bessel_j(1.0, u) / u;
  if (u < 1e-3) return 1 - u * u / 10;
  return 3 * (std::sin(u) - u * std::cos(u)) / (u * u * u);
}

BoxAverage parseval_average(const TorusConfiguration& tc, double eta) {
  const int d = tc.dim();
  const auto sc = space_constants(d);
  const double vol = tc.volume();
  const double n = static_cast<double>(tc.size());
  const double cutoff = 40 / eta;
  Accumulator acc;
  size_t terms = 0;
  for_lattice_points(reciprocal_lattice(tc.periods), cutoff, [&](const Point& k) {
    for (int c = 0; c < 3; ++c) {
      if (k[c] > 0) break;
      if (k[c] < 0) return;
    }
    double k2 = norm2(k);
    if (k2 == 0) return;
    double re = 0, im = 0;
    for (const Point& a : tc.points) {
      double ph = dot(k, a);
      re += std::cos(ph);
      im -= std::sin(ph);
    }
    double f = ball_form_factor(std::sqrt(k2) * eta, d);
    acc += 2 * (re * re + im * im) * f * f / k2;
    ++terms;
  });
  // Past the cutoff |S(k)|² averages to N; integrate the continuum form
  // factor numerically over many oscillations, then its mean asymptotically.
  const double u0 = cutoff * eta;
  auto integrand = [&](double u) { double f = ball_form_factor(u, d); return std::pow(u, d - 3) * f * f; };
  Accumulator tail_u;
  const int panels = 400;
  for (int p = 0; p < panels; ++p)
    tail_u += gauss_kronrod<double, 31>::integrate(integrand, u0 + p * pi, u0 + (p + 1) * pi, 5, 1e-12);
  double u1 = u0 + panels * pi;
  tail_u += d == 2 ? 4 / (3 * pi * u1 * u1 * u1) : 1.5 / (u1 * u1 * u1);
  double tail = n * vol / std::pow(2 * pi, d) * sphere_area(d) * std::pow(eta, 2 - d) * tail_u.value();

  BoxAverage b;
  double renorm = sc.kappa * (d == 3 ? 1 / eta : -std::log(eta)) + sc.gamma;
  b.value = sc.c * sc.c / (vol * vol) * (acc.value() + tail) - n / vol * renorm;
  b.tail = sc.c * sc.c / (vol * vol) * tail;
  b.cutoff = cutoff;
  b.terms = terms;
  return b;
}

} // namespace

BoxAverage box_averaged_W_eta(const TorusConfiguration& tc, double eta, const std::vector<int>& ladder) {
  if (!(eta > 0) || eta > 1) throw DomainError("eta must lie in (0, 1]");
  if (ladder.empty()) throw DomainError("empty supercell ladder");
  BoxAverage out;
  for (int k : ladder) {
    if (k < 1) throw DomainError("supercell multiples must be positive");
    Lattice big = tc.periods.scaled(k);
    std::vector<Point> pts;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        for (int l = 0; l < (tc.dim() == 3 ? k : 1); ++l)
          for (const Point& a : tc.points) pts.push_back(a + tc.periods.cartesian({double(i), double(j), double(l)}));
    BoxAverage b = parseval_average(TorusConfiguration(big, pts), eta);
    if (out.ladder.empty()) out = b;
    out.ladder.push_back(k);
    out.values.push_back(b.value);
  }
  out.value = out.values.front();
  return out;
}

BoxAverage box_averaged_W_eta(const Lattice& lat, double eta, const std::vector<int>& ladder) {
  return box_averaged_W_eta(lattice_torus(lat), eta, ladder);
}

} // namespace cgas
