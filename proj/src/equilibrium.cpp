#include "cgas/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <cstdint>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "cgas/config_io.hpp"

namespace cgas {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

namespace {

double sphere_area(int d) { return d == 3 ? 4 * pi : 2 * pi; }

// ∫_a^b f with adaptive Gauss–Kronrod.
template <class F>
double integrate(F f, double a, double b, double tol = 1e-12) {
  if (b <= a) return 0.0;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, tol);
}

} // namespace

// ---------------------------------------------------------------- FarField

double FarField::operator()(const Point& x) const {
  Point z = x - centroid;
  double r2 = norm2(z);
  if (r2 == 0) throw SingularityError("far-field expansion evaluated at its center");
  if (d == 2) {
    std::complex<double> zc(z[0], z[1]);
    double v = -0.5 * mass * std::log(r2);
    std::complex<double> zk = 1.0;
    for (int k = 1; k <= 4; ++k) {
      zk *= zc;
      v += std::real(std::complex<double>(re[k], im[k]) / (static_cast<double>(k) * zk));
    }
    return v;
  }
  double r = std::sqrt(r2);
  double v = mass / r + dot(dipole, z) / (r2 * r);
  double qq = quad[0] * z[0] * z[0] + quad[1] * z[1] * z[1] + quad[2] * z[2] * z[2] +
              2 * (quad[3] * z[0] * z[1] + quad[4] * z[0] * z[2] + quad[5] * z[1] * z[2]);
  return v + 0.5 * qq / (r2 * r2 * r);
}

FarField FarField::monopole(int d, const Point& center, double mass) {
  FarField f;
  f.d = d;
  f.mass = mass;
  f.centroid = center;
  return f;
}

FarField FarField::of_grid_density(const Grid& g, const std::vector<double>& density) {
  FarField f;
  f.d = g.d;
  const double vol = g.cell_volume();
  double m = 0;
  Point c{0, 0, 0};
  for (size_t k = 0; k < g.size(); ++k) {
    if (density[k] == 0) continue;
    double w = density[k] * vol;
    m += w;
    c += w * g.node(k);
  }
  if (m <= 0) throw ContractError("far field of a zero density");
  c = (1.0 / m) * c;
  f.mass = m;
  f.centroid = c;
  for (size_t k = 0; k < g.size(); ++k) {
    if (density[k] == 0) continue;
    double w = density[k] * vol;
    Point y = g.node(k) - c;
    if (g.d == 2) {
      std::complex<double> yc(y[0], y[1]), yk = 1.0;
      for (int p = 1; p <= 4; ++p) {
        yk *= yc;
        f.re[p] += w * yk.real();
        f.im[p] += w * yk.imag();
      }
    } else {
      double r2 = norm2(y);
      f.dipole += w * y;
      f.quad[0] += w * (3 * y[0] * y[0] - r2);
      f.quad[1] += w * (3 * y[1] * y[1] - r2);
      f.quad[2] += w * (3 * y[2] * y[2] - r2);
      f.quad[3] += w * 3 * y[0] * y[1];
      f.quad[4] += w * 3 * y[0] * y[2];
      f.quad[5] += w * 3 * y[1] * y[2];
    }
  }
  return f;
}

// ------------------------------------------------------------- RadialModel

double RadialModel::density(double r) const {
  if (r >= radius) return 0.0;
  return v.laplacian(r) / (2 * space_constants(d).c);
}

double RadialModel::potential(double r) const {
  if (r < radius) return robin - 0.5 * v.value(r);
  return coulomb_kernel_radial(r, d);
}

RadialField RadialModel::field() const {
  RadialField f;
  f.d = d;
  f.mass = 1.0;
  f.support = radius;
  const double c = robin;
  auto val = v.value;
  f.interior = [c, val](double u) { return c - 0.5 * val(u); };
  return f;
}

// ------------------------------------------------------ EquilibriumMeasure

double EquilibriumMeasure::mass() const { return radial ? 1.0 : grid_mass(); }

Point EquilibriumMeasure::center() const { return radial ? radial->center : far_field.centroid; }

double EquilibriumMeasure::support_radius() const {
  if (radial) return radial->radius;
  double r = 0;
  Point c = center();
  double half_diag = 0.5 * std::sqrt(static_cast<double>(grid.d)) * grid.h;
  for (size_t k = 0; k < grid.size(); ++k)
    if (density_values[k] > 0) r = std::max(r, norm(grid.node(k) - c) + half_diag);
  return r;
}

double EquilibriumMeasure::density(const Point& x) const {
  if (radial) return radial->density(norm(x - radial->center));
  return grid_cell_value(grid, density_values, x);
}

double EquilibriumMeasure::potential(const Point& x) const {
  if (radial) return radial->potential(norm(x - radial->center));
  if (grid.contains(x)) return grid_interpolate(grid, node_potential, x);
  return far_field(x);
}

double EquilibriumMeasure::smeared_potential(const Point& x, double ell) const {
  if (!(ell > 0)) throw DomainError("smearing radius must be positive");
  if (radial) return ball_average(radial->field(), norm(x - radial->center), ell);
  return numeric_ball_average([this](const Point& y) { return potential(y); }, x, ell, grid.d);
}

double EquilibriumMeasure::sup_density() const {
  if (radial) {
    double m = 0;
    for (int k = 0; k <= 2000; ++k) m = std::max(m, radial->density(radial->radius * k / 2000.0 * (1 - 1e-12)));
    return m;
  }
  return *std::max_element(density_values.begin(), density_values.end());
}

double EquilibriumMeasure::ball_mass(const Point& x, double rb) const {
  if (!(rb > 0)) throw DomainError("ball radius must be positive");
  const int d = grid.d;
  if (radial) {
    const double R = radial->radius;
    const double s = norm(x - radial->center);
    if (s + R <= rb) return 1.0;
    if (s >= R + rb) return 0.0;
    auto integrand = [&](double u) {
      double area;
      if (s == 0) {
        area = u < rb ? sphere_area(d) * std::pow(u, d - 1) : 0.0;
      } else {
        double k = (u * u + s * s - rb * rb) / (2 * u * s);
        if (k >= 1) return 0.0;
        k = std::max(k, -1.0);
        area = d == 2 ? 2 * u * std::acos(k) : 2 * pi * u * u * (1 - k);
      }
      return area * radial->density(u);
    };
    std::vector<double> cuts{0.0, R};
    for (double b : {std::fabs(s - rb), s + rb})
      if (b > 0 && b < R) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    Accumulator acc;
    for (size_t k = 0; k + 1 < cuts.size(); ++k) acc += integrate(integrand, cuts[k], cuts[k + 1], 1e-13);
    return acc.value();
  }
  const double half_diag = 0.5 * std::sqrt(static_cast<double>(d)) * grid.h;
  const double vol = grid.cell_volume();
  const int sub = 6;
  Accumulator acc;
  for (size_t k = 0; k < grid.size(); ++k) {
    if (density_values[k] == 0) continue;
    Point p = grid.node(k);
    double r = norm(p - x);
    if (r + half_diag <= rb) {
      acc += density_values[k] * vol;
    } else if (r - half_diag < rb) {
      int inside = 0, total = 0;
      for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b)
          for (int c = 0; c < (d == 3 ? sub : 1); ++c) {
            Point q = p + Point{((a + 0.5) / sub - 0.5) * grid.h, ((b + 0.5) / sub - 0.5) * grid.h,
                                d == 3 ? ((c + 0.5) / sub - 0.5) * grid.h : 0.0};
            ++total;
            if (norm(q - x) < rb) ++inside;
          }
      acc += density_values[k] * vol * inside / total;
    }
  }
  return acc.value();
}

double EquilibriumMeasure::external_energy(const Potential& v) const {
  if (radial && v.is_radial() && norm(v.center - radial->center) == 0) {
    const int d = grid.d;
    const auto& val = v.radial->value;
    return integrate([&](double r) { return sphere_area(d) * std::pow(r, d - 1) * radial->density(r) * val(r); },
                     0.0, radial->radius, 1e-14);
  }
  Accumulator acc;
  for (size_t k = 0; k < grid.size(); ++k)
    if (density_values[k] != 0) acc += density_values[k] * v(grid.node(k));
  return acc.value() * grid.cell_volume();
}

double EquilibriumMeasure::entropy() const {
  if (radial) {
    const int d = grid.d;
    return integrate(
        [&](double r) {
          double m = radial->density(r);
          return m > 0 ? sphere_area(d) * std::pow(r, d - 1) * m * std::log(m) : 0.0;
        },
        0.0, radial->radius, 1e-14);
  }
  Accumulator acc;
  for (double m : density_values)
    if (m > 0) acc += m * std::log(m);
  return acc.value() * grid.cell_volume();
}

double EquilibriumMeasure::power_integral(double p) const {
  if (radial) {
    const int d = grid.d;
    return integrate([&](double r) { return sphere_area(d) * std::pow(r, d - 1) * std::pow(radial->density(r), p); },
                     0.0, radial->radius, 1e-14);
  }
  Accumulator acc;
  for (double m : density_values)
    if (m > 0) acc += std::pow(m, p);
  return acc.value() * grid.cell_volume();
}

// ----------------------------------------------------------- constructors

namespace {

std::vector<unsigned char> support_mask(const std::vector<double>& density) {
  double mx = 0;
  for (double v : density) mx = std::max(mx, v);
  std::vector<unsigned char> mask(density.size(), 0);
  for (size_t k = 0; k < density.size(); ++k) mask[k] = density[k] > 1e-8 * mx;
  return mask;
}

} // namespace

EquilibriumMeasure measure_from_density(const Grid& g, std::vector<double> density, const std::string& model,
                                        bool normalize) {
  if (density.size() != g.size()) throw ContractError("density size does not match grid");
  for (double v : density)
    if (!(v >= 0) || !std::isfinite(v)) throw DomainError("density must be finite and nonnegative");
  EquilibriumMeasure mu;
  mu.grid = g;
  double m = grid_integral(g, density);
  if (!(m > 0)) throw DomainError("density has zero mass");
  if (normalize)
    for (double& v : density) v /= m;
  mu.density_values = std::move(density);
  mu.support = support_mask(mu.density_values);
  mu.model = model;
  mu.node_potential = coulomb_potential_on_grid(g, mu.density_values);
  mu.interaction = coulomb_energy_on_grid(g, mu.density_values);
  mu.far_field = FarField::of_grid_density(g, mu.density_values);
  mu.stats["input_mass"] = m;
  return mu;
}

double mf_energy(const EquilibriumMeasure& mu, const Potential& v) {
  double m = mu.grid_mass();
  if (std::fabs(m - 1) > 1e-6)
    throw ContractError("mf_energy needs a probability measure; grid mass is " + format_double(m));
  double d_mu = coulomb_energy_on_grid(mu.grid, mu.density_values);
  Accumulator acc;
  for (size_t k = 0; k < mu.grid.size(); ++k)
    if (mu.density_values[k] != 0) acc += mu.density_values[k] * v(mu.grid.node(k));
  return d_mu + acc.value() * mu.grid.cell_volume();
}

EquilibriumMeasure solve_equilibrium_radial(const Potential& v, const Grid* grid) {
  const int d = check_dim(v.d);
  if (!v.is_radial()) throw ContractError("solve_equilibrium_radial needs a radial potential");
  const RadialProfile& rp = *v.radial;
  const double cd = space_constants(d).c;
  // Mass of ΔV/(2c_d) inside radius r, by the divergence theorem.
  auto enclosed = [&](double r) { return sphere_area(d) * std::pow(r, d - 1) * rp.derivative(r) / (2 * cd); };
  double hi = 1.0;
  int expand = 0;
  while (!(enclosed(hi) > 1)) {
    hi *= 2;
    if (++expand > 60) throw DomainError("no equilibrium ball: enclosed mass never reaches 1 (V not confining?)");
  }
  std::uintmax_t iters = 200;
  auto root = boost::math::tools::toms748_solve([&](double r) { return enclosed(r) - 1; }, 0.0, hi,
                                                boost::math::tools::eps_tolerance<double>(52), iters);
  const double R = 0.5 * (root.first + root.second);
  for (int k = 0; k <= 400; ++k) {
    double r = R * k / 400.0;
    if (rp.laplacian(r) < 0)
      throw DomainError("ΔV < 0 inside the candidate ball; the support is not a ball, use the obstacle solver");
  }
  auto model = std::make_shared<RadialModel>();
  model->d = d;
  model->radius = R;
  model->center = v.center;
  model->v = rp;
  model->robin = coulomb_kernel_radial(R, d) + 0.5 * rp.value(R);
  // Independent value of c from h(0) + V(0)/2, by quadrature of the density.
  double h0 = d == 3 ? integrate([&](double s) { return 4 * pi * s * model->density(s); }, 0.0, R, 1e-14)
                     : integrate([&](double s) { return s > 0 ? -2 * pi * s * std::log(s) * model->density(s) : 0.0; },
                                 0.0, R, 1e-14);
  double c_center = h0 + 0.5 * rp.value(0.0);
  if (std::fabs(c_center - model->robin) > 1e-8 * (1 + std::fabs(model->robin)))
    throw DomainError("radial ansatz inconsistent (Robin constants " + format_double(model->robin) + " vs " +
                      format_double(c_center) + ")");
  model->external =
      integrate([&](double r) { return sphere_area(d) * std::pow(r, d - 1) * model->density(r) * rp.value(r); }, 0.0,
                R, 1e-14);
  // D(μ0,μ0) = ∫ h dμ0 = c - ½ ∫ V dμ0 since h = c - V/2 on the support.
  model->interaction = model->robin - 0.5 * model->external;

  EquilibriumMeasure mu;
  mu.grid = grid ? *grid : Grid::centered(d, v.center, 1.25 * R, d == 2 ? R / 50 : R / 25);
  if (mu.grid.d != d) throw ContractError("grid dimension differs from potential dimension");
  mu.radial = model;
  mu.model = "radial";
  mu.robin_constant = model->robin;
  mu.interaction = model->interaction;
  mu.far_field = FarField::monopole(d, v.center);
  // Cell averages: subsample the cells cut by the sphere.
  const Grid& g = mu.grid;
  const double half_diag = 0.5 * std::sqrt(static_cast<double>(d)) * g.h;
  mu.density_values.assign(g.size(), 0.0);
  mu.node_potential.assign(g.size(), 0.0);
  const int sub = 8;
  for (size_t k = 0; k < g.size(); ++k) {
    Point p = g.node(k);
    double r = norm(p - v.center);
    mu.node_potential[k] = model->potential(r);
    if (r + half_diag < R) {
      mu.density_values[k] = model->density(r);
    } else if (r - half_diag < R) {
      Accumulator acc;
      int total = 0;
      for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b)
          for (int c = 0; c < (d == 3 ? sub : 1); ++c) {
            Point q = p + Point{((a + 0.5) / sub - 0.5) * g.h, ((b + 0.5) / sub - 0.5) * g.h,
                                d == 3 ? ((c + 0.5) / sub - 0.5) * g.h : 0.0};
            acc += model->density(norm(q - v.center));
            ++total;
          }
      mu.density_values[k] = acc.value() / total;
    }
  }
  double gm = mu.grid_mass();
  for (double& x : mu.density_values) x /= gm;
  mu.support = support_mask(mu.density_values);
  mu.stats = {{"radius", R},
              {"robin_constant", model->robin},
              {"robin_from_center", c_center},
              {"interaction", model->interaction},
              {"external", model->external},
              {"grid_mass_before_normalization", gm}};
  return mu;
}

// ------------------------------------------------------------------- zeta

double zeta_at(const EquilibriumMeasure& mu0, const Potential& v, const Point& x) {
  return mu0.potential(x) + 0.5 * v(x) - mu0.robin_constant;
}

EffectivePotential zeta_potential(const EquilibriumMeasure& mu0, const Potential& v, double tol) {
  EffectivePotential z;
  z.grid = mu0.grid;
  z.zeta.resize(mu0.grid.size());
  z.min_value = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < mu0.grid.size(); ++k) {
    double h = mu0.radial ? mu0.radial->potential(norm(mu0.grid.node(k) - mu0.radial->center)) : mu0.node_potential[k];
    double val = h + 0.5 * v(mu0.grid.node(k)) - mu0.robin_constant;
    z.zeta[k] = val;
    z.min_value = std::min(z.min_value, val);
    if (val < -tol) z.negative_nodes.push_back(k);
    if (mu0.support[k]) z.max_abs_on_support = std::max(z.max_abs_on_support, std::fabs(val));
  }
  return z;
}

// ---------------------------------------------------------------- mu_beta

Grid mu_beta_grid(const Potential& v, int n, double beta, double h) {
  if (!(n * beta > 0)) throw DomainError("mu_beta_grid needs n β > 0");
  const int d = v.d;
  // Radius where the thermal weight exp(-(nβ/2)(V(r) - V(R0))) drops below 1e-14.
  double r0 = 1.0;
  if (v.is_radial()) {
    try {
      r0 = solve_equilibrium_radial(v, nullptr).radial->radius;
    } catch (const Error&) {
    }
  }
  double r = r0;
  auto vr = [&](double t) { return v(v.center + Point{t, 0, 0}); };
  double base = vr(r0);
  while ((0.5 * n * beta) * (vr(r) - base) < 32.2 + (d - 1) * std::log(1 + r)) r += 0.05 * r0;
  return Grid::centered(d, v.center, r, h);
}

EquilibriumMeasure solve_mu_beta(const Potential& v, int n, double beta, const Grid& grid, const MuBetaOptions& opt) {
  if (!(n > 0) || !(beta > 0)) throw DomainError("solve_mu_beta needs n β > 0");
  if (grid.d != v.d) throw ContractError("grid dimension differs from potential dimension");
  const double nb = n * beta;
  const size_t N = grid.size();
  std::vector<double> vnode(N);
  for (size_t k = 0; k < N; ++k) vnode[k] = v(grid.node(k));

  auto gibbs = [&](const std::vector<double>& h) {
    std::vector<double> phi(N);
    double mn = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < N; ++k) {
      phi[k] = 0.5 * nb * (2 * h[k] + vnode[k]);
      mn = std::min(mn, phi[k]);
    }
    std::vector<double> t(N);
    for (size_t k = 0; k < N; ++k) t[k] = std::exp(std::max(mn - phi[k], -700.0));
    double m = grid_integral(grid, t);
    for (double& x : t) x /= m;
    return t;
  };

  // Start from the non-interacting weight blended with the equilibrium guess.
  std::vector<double> mu = gibbs(std::vector<double>(N, 0.0));
  if (v.is_radial()) {
    try {
      EquilibriumMeasure eq = solve_equilibrium_radial(v, &grid);
      double w = nb > 10 ? 0.9 : 0.5;
      for (size_t k = 0; k < N; ++k) mu[k] = (1 - w) * mu[k] + w * eq.density_values[k];
    } catch (const Error&) {
    }
  }
  double theta = opt.damping;
  double prev = std::numeric_limits<double>::infinity();
  double residual = prev;
  int it = 0, growth = 0;
  for (; it < opt.max_iterations; ++it) {
    std::vector<double> h = coulomb_potential_on_grid(grid, mu);
    std::vector<double> t = gibbs(h);
    double mx = 0, diff = 0;
    for (size_t k = 0; k < N; ++k) {
      mx = std::max(mx, mu[k]);
      diff = std::max(diff, std::fabs(t[k] - mu[k]));
    }
    residual = diff / mx;
    if (!std::isfinite(residual))
      throw ConvergenceError("mu_beta iteration produced non-finite values; use stronger damping", residual);
    if (residual < opt.tol) break;
    if (residual > prev) {
      if (++growth >= 2 && opt.adaptive) {
        theta *= 0.5;
        growth = 0;
        if (theta < 1e-5)
          throw ConvergenceError("mu_beta iteration diverges even at damping 1e-5; use stronger damping", residual);
      }
    } else {
      growth = 0;
    }
    prev = residual;
    for (size_t k = 0; k < N; ++k) mu[k] = (1 - theta) * mu[k] + theta * t[k];
  }
  if (residual >= opt.tol)
    throw ConvergenceError("mu_beta iteration did not converge within budget; use stronger damping", residual);
  EquilibriumMeasure out = measure_from_density(grid, mu, "mean-field-beta");
  // Robin-type constant of the fixed-point equation: h + V/2 + log μ/(nβ) = const.
  Accumulator acc;
  for (size_t k = 0; k < N; ++k)
    acc += out.density_values[k] * (out.node_potential[k] + 0.5 * vnode[k] + std::log(out.density_values[k]) / nb);
  out.robin_constant = acc.value() * grid.cell_volume();
  out.stats = {{"iterations", it}, {"residual", residual}, {"final_damping", theta}, {"n_beta", nb}};
  return out;
}

// --------------------------------------------------------------------- io

void write_measure(const EquilibriumMeasure& mu, const Potential& v, const std::string& csv_path,
                   const std::string& json_path) {
  EffectivePotential z = zeta_potential(mu, v);
  std::ofstream os(csv_path);
  if (!os) throw Error("cannot open " + csv_path);
  os << (mu.grid.d == 2 ? "x0,x1,density,zeta\n" : "x0,x1,x2,density,zeta\n");
  for (size_t k = 0; k < mu.grid.size(); ++k) {
    Point p = mu.grid.node(k);
    os << format_double(p[0]) << ',' << format_double(p[1]);
    if (mu.grid.d == 3) os << ',' << format_double(p[2]);
    os << ',' << format_double(mu.density_values[k]) << ',' << format_double(z.zeta[k]) << '\n';
  }
  nlohmann::json j = {{"model", mu.model},
                      {"grid", mu.grid.to_json()},
                      {"robin_constant", mu.robin_constant},
                      {"interaction", mu.interaction},
                      {"mass", mu.grid_mass()},
                      {"zeta_min", z.min_value},
                      {"zeta_max_abs_on_support", z.max_abs_on_support},
                      {"potential", v.description},
                      {"solver", mu.stats}};
  std::ofstream js(json_path);
  if (!js) throw Error("cannot open " + json_path);
  js << j.dump(2) << '\n';
}

} // namespace cgas
