#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cgas/equilibrium.hpp"

using namespace cgas;

namespace {

// Exact cell averages of the uniform density 1/|B| on the ball of radius R
// about `center`, by dense subsampling of each cell (test oracle).
std::vector<double> uniform_ball_cells(const Grid& g, double R, const Point& center = {0, 0, 0}) {
  const int d = g.d;
  const double dens = d == 2 ? 1 / (pi * R * R) : 3 / (4 * pi * R * R * R);
  std::vector<double> out(g.size(), 0.0);
  const int sub = 10;
  for (size_t k = 0; k < g.size(); ++k) {
    Point p = g.node(k);
    double r = norm(p - center);
    double hd = 0.5 * std::sqrt(double(d)) * g.h;
    if (r + hd < R) {
      out[k] = dens;
      continue;
    }
    if (r - hd >= R) continue;
    int in = 0, tot = 0;
    for (int a = 0; a < sub; ++a)
      for (int b = 0; b < sub; ++b)
        for (int c = 0; c < (d == 3 ? sub : 1); ++c) {
          Point q = p + Point{((a + 0.5) / sub - 0.5) * g.h, ((b + 0.5) / sub - 0.5) * g.h,
                              d == 3 ? ((c + 0.5) / sub - 0.5) * g.h : 0.0};
          ++tot;
          if (norm(q - center) < R) ++in;
        }
    out[k] = dens * in / tot;
  }
  return out;
}

} // namespace

TEST_CASE("grid Coulomb energy of the uniform disk and ball") {
  // D(μ,μ) for the uniform unit disk is 1/4; for the unit ball 6/5 (oracles in test_core).
  Grid g2 = Grid::centered(2, {0, 0, 0}, 1.1, 0.01);
  auto mu2 = measure_from_density(g2, uniform_ball_cells(g2, 1.0), "grid");
  CHECK(mu2.coulomb_energy() == doctest::Approx(0.25).epsilon(2e-4));
  CHECK(mf_energy(mu2, zero_potential(2)) == doctest::Approx(0.25).epsilon(2e-4));
  CHECK(mf_energy(mu2, quadratic_potential(2)) == doctest::Approx(0.75).epsilon(2e-4));
  Grid g3 = Grid::centered(3, {0, 0, 0}, 1.1, 0.05);
  auto mu3 = measure_from_density(g3, uniform_ball_cells(g3, 1.0), "grid");
  CHECK(mu3.coulomb_energy() == doctest::Approx(1.2).epsilon(2e-3));
}

TEST_CASE("grid potential of the uniform disk matches the radial formula") {
  Grid g = Grid::centered(2, {0, 0, 0}, 1.2, 0.01);
  auto mu = measure_from_density(g, uniform_ball_cells(g, 1.0), "grid");
  for (double r : {0.0, 0.5, 0.9, 1.1}) {
    Point x{r + 0.005, 0.005, 0};
    double rr = norm(x);
    double exact = rr < 1 ? 0.5 * (1 - rr * rr) : -std::log(rr);
    CHECK(std::fabs(mu.potential(x) - exact) < 2e-4);
  }
}

TEST_CASE("mf_energy: additivity under constant shift, contract on mass") {
  Grid g = Grid::centered(2, {0, 0, 0}, 1.1, 0.02);
  auto mu = measure_from_density(g, uniform_ball_cells(g, 1.0), "grid");
  Potential v = quadratic_potential(2);
  CHECK(mf_energy(mu, scaled(v, 1.0, 3.0)) == doctest::Approx(mf_energy(mu, v) + 3.0).epsilon(1e-12));
  auto bad = mu;
  for (double& x : bad.density_values) x *= 2;
  CHECK_THROWS_AS(mf_energy(bad, v), ContractError);
}

TEST_CASE("radial equilibrium: quadratic and quartic") {
  auto m2 = solve_equilibrium_radial(quadratic_potential(2));
  CHECK(m2.radial->radius == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m2.density({0.3, 0.2, 0}) == doctest::Approx(1 / pi));
  CHECK(m2.robin_constant == doctest::Approx(0.5));
  CHECK(m2.energy(quadratic_potential(2)) == doctest::Approx(0.75).epsilon(1e-12));

  auto m3 = solve_equilibrium_radial(quadratic_potential(3));
  CHECK(m3.radial->radius == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m3.density({0.1, 0.2, 0.3}) == doctest::Approx(3 / (4 * pi)));
  CHECK(m3.robin_constant == doctest::Approx(1.5));
  CHECK(m3.energy(quadratic_potential(3)) == doctest::Approx(1.8).epsilon(1e-12));

  auto m2b = solve_equilibrium_radial(quadratic_potential(2, 2.0));
  CHECK(m2b.radial->radius == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(m2b.density({0.1, 0, 0}) == doctest::Approx(2 / pi));

  auto q = solve_equilibrium_radial(power_potential(2, 1.0, 4.0));
  CHECK(q.radial->radius == doctest::Approx(std::pow(0.5, 0.25)).epsilon(1e-12));
  CHECK(q.density({0.5, 0, 0}) == doctest::Approx(4 * 0.25 / pi));
  CHECK(q.grid_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(solve_equilibrium_radial(zero_potential(2)), DomainError);
}

TEST_CASE("radial ball mass matches geometric oracle") {
  auto m2 = solve_equilibrium_radial(quadratic_potential(2));
  // Lens area of two unit-radius... here: disk of radius 0.5 at distance 0.8 inside unit disk.
  double s = 0.8, rb = 0.5, R = 1.0;
  double a = rb * rb * std::acos((s * s + rb * rb - R * R) / (2 * s * rb)) +
             R * R * std::acos((s * s + R * R - rb * rb) / (2 * s * R)) -
             0.5 * std::sqrt((-s + rb + R) * (s + rb - R) * (s - rb + R) * (s + rb + R));
  CHECK(m2.ball_mass({s, 0, 0}, rb) == doctest::Approx(a / pi).epsilon(1e-9));
  CHECK(m2.ball_mass({0.1, 0, 0}, 1.5) == 1.0);
  CHECK(m2.ball_mass({3, 0, 0}, 0.5) == 0.0);
}

TEST_CASE("zeta on the radial quadratic measure") {
  Potential v = quadratic_potential(2);
  auto m = solve_equilibrium_radial(v);
  CHECK(zeta_at(m, v, {2, 0, 0}) == doctest::Approx(-std::log(2.0) + 2 - 0.5));
  CHECK(std::fabs(zeta_at(m, v, {0.3, 0.4, 0})) < 1e-14);
  // Growth along rays.
  double prev = 0;
  for (double r = 1.5; r < 20; r *= 1.5) {
    double z = zeta_at(m, v, {r / std::sqrt(2.0), r / std::sqrt(2.0), 0});
    CHECK(z > prev);
    prev = z;
  }
}

TEST_CASE("obstacle solver reproduces the uniform disk") {
  Potential v = quadratic_potential(2);
  Grid g = Grid::centered(2, {0, 0, 0}, 1.3, 0.02);
  auto mu = solve_equilibrium_obstacle(v, g, 1e-10);
  auto exact = uniform_ball_cells(mu.grid, 1.0);
  CHECK(grid_l1_distance(mu.grid, mu.density_values, exact) < 0.02);
  CHECK(mu.grid_mass() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::fabs(mu.stats["raw_mass"].get<double>() - 1) < 1e-6);
  CHECK(mu.robin_constant == doctest::Approx(0.5).epsilon(1e-2));
  auto z = zeta_potential(mu, v);
  CHECK(z.min_value >= -1e-6);
  CHECK(z.max_abs_on_support <= 1e-4);
}

TEST_CASE("obstacle solver: quartic potential and translation covariance") {
  Potential v = power_potential(2, 1.0, 4.0);
  Grid g = Grid::centered(2, {0, 0, 0}, 1.1, 0.02);
  auto mu = solve_equilibrium_obstacle(v, g, 1e-10);
  auto rad = solve_equilibrium_radial(v, &mu.grid);
  CHECK(grid_l1_distance(mu.grid, mu.density_values, rad.density_values) < 0.02);

  Point a{0.3, -0.2, 0};
  Potential vs = shifted(quadratic_potential(2), a);
  Grid gs = Grid::centered(2, a, 1.3, 0.02);
  auto ms = solve_equilibrium_obstacle(vs, gs, 1e-10);
  auto base = solve_equilibrium_obstacle(quadratic_potential(2), Grid::centered(2, {0, 0, 0}, 1.3, 0.02), 1e-10);
  CHECK(grid_l1_distance(ms.grid, ms.density_values, base.density_values) < 1e-6);
  CHECK(ms.far_field.centroid[0] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("obstacle solver reports budget exhaustion") {
  ObstacleOptions opt;
  opt.max_sweeps = 50;
  CHECK_THROWS_AS(solve_equilibrium_obstacle(quadratic_potential(2), Grid::centered(2, {0, 0, 0}, 1.3, 0.02), 1e-10, opt),
                  ConvergenceError);
}

TEST_CASE("mean-field energy is convex along segments") {
  Grid g = Grid::centered(2, {0, 0, 0}, 1.5, 0.04);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 1.3);
  Potential v = quadratic_potential(2);
  for (int t = 0; t < 5; ++t) {
    auto a = measure_from_density(g, uniform_ball_cells(g, u(rng), {0.1, 0, 0}), "grid");
    auto b = measure_from_density(g, uniform_ball_cells(g, u(rng), {-0.2, 0.1, 0}), "grid");
    std::vector<double> mid(g.size());
    for (size_t k = 0; k < g.size(); ++k) mid[k] = 0.5 * (a.density_values[k] + b.density_values[k]);
    auto m = measure_from_density(g, mid, "grid");
    CHECK(mf_energy(m, v) <= 0.5 * (mf_energy(a, v) + mf_energy(b, v)) + 1e-12);
  }
}

TEST_CASE("mu_beta: limits and symmetry") {
  Potential v = quadratic_potential(2);
  auto mu0 = solve_equilibrium_radial(v);
  double prev = 1e9;
  for (double nb : {20.0, 80.0, 320.0}) {
    Grid g = mu_beta_grid(v, 1, nb, 0.03);
    auto mb = solve_mu_beta(v, 1, nb, g);
    auto ref = solve_equilibrium_radial(v, &mb.grid);
    double l1 = grid_l1_distance(mb.grid, mb.density_values, ref.density_values);
    CHECK(l1 < prev);
    prev = l1;
    CHECK(mb.grid_mass() == doctest::Approx(1.0).epsilon(1e-9));
    for (double x : mb.density_values) CHECK(x > 0);
  }
  // Small nβ: close to the non-interacting Gaussian shape.
  double nb = 0.05;
  Grid g = mu_beta_grid(v, 1, nb, 0.25);
  auto mb = solve_mu_beta(v, 1, nb, g);
  std::vector<double> gauss(g.size());
  for (size_t k = 0; k < g.size(); ++k) gauss[k] = std::exp(-0.5 * nb * v(g.node(k)));
  double m = grid_integral(g, gauss);
  for (double& x : gauss) x /= m;
  CHECK(grid_l1_distance(g, mb.density_values, gauss) < 0.1);
  // Radial symmetry: compare values at rotated nodes (exact grid symmetry x ↔ y).
  Grid gs = mu_beta_grid(v, 10, 2.0, 0.05);
  auto ms = solve_mu_beta(v, 10, 2.0, gs);
  double worst = 0;
  for (int i = 0; i < gs.n[0]; ++i)
    for (int j = 0; j < gs.n[1]; ++j)
      worst = std::max(worst, std::fabs(ms.density_values[gs.index(i, j, 0)] - ms.density_values[gs.index(j, i, 0)]));
  CHECK(worst < 1e-8);
}
