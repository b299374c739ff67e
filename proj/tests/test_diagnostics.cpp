#include <doctest.h>

#include <cmath>
#include <random>

#include "cgas/diagnostics.hpp"
#include "cgas/sampler.hpp"

using namespace cgas;

namespace {

// Triangular lattice points with hexagonal distance ≤ rings from the origin.
Configuration hexagonal_patch(int rings, double a = 1.0, double angle = 0.0) {
  std::vector<Point> pts;
  for (int i = -rings; i <= rings; ++i)
    for (int j = -rings; j <= rings; ++j) {
      if (std::abs(i + j) > rings) continue;
      double x = a * (i + 0.5 * j), y = a * std::sqrt(3.0) / 2 * j;
      pts.push_back({x * std::cos(angle) - y * std::sin(angle), x * std::sin(angle) + y * std::cos(angle), 0});
    }
  return Configuration(2, pts);
}

Configuration square_patch(int m) {
  std::vector<Point> pts;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) pts.push_back({double(i), double(j), 0});
  return Configuration(2, pts);
}

} // namespace

TEST_CASE("wilson interval") {
  auto ci = wilson_interval(0, 100);
  CHECK(ci.lo == 0.0);
  CHECK(ci.hi == doctest::Approx(0.0370).epsilon(0.01));
  ci = wilson_interval(50, 100);
  CHECK(ci.lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(ci.hi == doctest::Approx(0.5962).epsilon(1e-3));
  ci = wilson_interval(0, 0);
  CHECK(ci.lo == 0.0);
  CHECK(ci.hi == 1.0);
}

TEST_CASE("charge discrepancy") {
  auto v = quadratic_potential(2);
  auto mu0 = solve_equilibrium_radial(v);
  CHECK(micro_radius(100, 2) == doctest::Approx(std::pow(100.0, -0.25)));
  CHECK(micro_radius(100, 3) == doctest::Approx(std::pow(100.0, -0.2)));

  std::mt19937_64 rng(5);
  auto c = sample_measure(mu0, 200, rng);
  // A ball covering the whole support has zero discrepancy.
  CHECK(std::fabs(charge_discrepancy(c, mu0, {0, 0, 0}, 1.5)) < 1e-9);
  // Exact count minus n/π · |B| for a ball inside the disk.
  double d = charge_discrepancy(c, mu0, {0.2, 0.1, 0}, 0.3);
  long count = 0;
  for (auto& p : c.points) count += norm2(p - Point{0.2, 0.1, 0}) < 0.09;
  CHECK(d == doctest::Approx(count - 200 * 0.09).epsilon(1e-9));

  // Mean over i.i.d. draws vanishes.
  Accumulator mean;
  for (int s = 0; s < 400; ++s) mean += charge_discrepancy(sample_measure(mu0, 200, rng), mu0, {0.3, -0.2, 0}, 0.25);
  // Var ≤ n p(1-p) with p = 1/16, so the standard error of the mean is ≈ 0.17.
  CHECK(std::fabs(mean.value() / 400) < 0.7);

  CHECK_THROWS_AS(charge_discrepancy(c, mu0, {0, 0, 0}, 0.0), DomainError);

  // Rotation invariance: rotating points and center together.
  double t = 0.7;
  std::vector<Point> rot;
  for (auto& p : c.points) rot.push_back({std::cos(t) * p[0] - std::sin(t) * p[1], std::sin(t) * p[0] + std::cos(t) * p[1], 0});
  Point x{0.2, 0.1, 0}, rx{std::cos(t) * 0.2 - std::sin(t) * 0.1, std::sin(t) * 0.2 + std::cos(t) * 0.1, 0};
  CHECK(charge_discrepancy(Configuration(2, rot), mu0, rx, 0.3) == doctest::Approx(d).epsilon(1e-10));
}

TEST_CASE("charge discrepancy in three dimensions") {
  auto v = quadratic_potential(3);
  auto mu0 = solve_equilibrium_radial(v);
  std::mt19937_64 rng(8);
  auto c = sample_measure(mu0, 100, rng);
  CHECK(std::fabs(charge_discrepancy(c, mu0, {0, 0, 0}, 1.2)) < 1e-9);
  long count = 0;
  for (auto& p : c.points) count += norm(p) < 0.5;
  CHECK(charge_discrepancy(c, mu0, {0, 0, 0}, 0.5) == doctest::Approx(count - 100 * 0.125).epsilon(1e-9));
}

TEST_CASE("fluctuation tails") {
  auto v = quadratic_potential(2);
  auto mu0 = solve_equilibrium_radial(v);
  std::mt19937_64 rng(11);
  std::vector<Configuration> samples;
  for (int s = 0; s < 200; ++s) samples.push_back(sample_measure(mu0, 100, rng));
  const double rn = micro_radius(100, 2);
  auto t = fluctuation_tails(samples, mu0, {rn, 0.7}, {0.05, 0.2, 0.5});
  CHECK(t.few_samples);
  CHECK_FALSE(t.warning.empty());
  REQUIRE(t.rows.size() == 6);
  CHECK(t.rows[0].scale == "micro");
  CHECK(t.rows[3].scale == "macro");
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 2; ++k) CHECK(t.rows[3 * r + k].probability >= t.rows[3 * r + k + 1].probability);
  for (auto& row : t.rows) {
    CHECK(row.ci.lo <= row.probability);
    CHECK(row.ci.hi >= row.probability);
  }
  // Centers stay away from the edge.
  for (auto& x : interior_centers(mu0, 0.3)) CHECK(norm(x) <= 0.7 + 1e-12);
  auto csv = t.to_csv();
  CHECK(csv.rfind("radius,lambda,scale", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  std::vector<Configuration> many(1000, samples.front());
  CHECK_FALSE(fluctuation_tails(many, mu0, {0.3}, {0.2}).few_samples);
}

TEST_CASE("density profile") {
  auto v = quadratic_potential(2);
  auto mu0 = solve_equilibrium_radial(v);
  auto g = Grid::centered(2, {0, 0, 0}, 1.1, 0.1);
  std::mt19937_64 rng(2);
  std::vector<Configuration> few, lots;
  for (int s = 0; s < 5; ++s) few.push_back(sample_measure(mu0, 100, rng));
  for (int s = 0; s < 400; ++s) lots.push_back(sample_measure(mu0, 100, rng));
  auto a = density_profile(few, mu0, g), b = density_profile(lots, mu0, g);
  CHECK(b.l1 < a.l1);
  CHECK(b.l1 < 0.1);
  CHECK(b.weak_proxy < a.weak_proxy);
  CHECK(grid_integral(g, b.empirical) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.bump_values.size() == a.bump_scales.size());

  // A configuration far from μ0 is detected at every scale.
  std::vector<Configuration> off{Configuration(2, std::vector<Point>(100, Point{0.5, 0, 0}))};
  auto c = density_profile(off, mu0, g);
  CHECK(c.l1 > 1.5);
  CHECK(c.weak_proxy > 10 * b.weak_proxy);
}

TEST_CASE("weak norm of a single bump") {
  // One sample at the bump center: |1 - n∫φ dμ0| / (n‖∇φ‖_2), with
  // ‖∇φ‖_2² = (d/2) π^{d/2} s^{d-2} checked by radial quadrature in d=3.
  auto v = quadratic_potential(3);
  auto mu0 = solve_equilibrium_radial(v);
  auto g = Grid::centered(3, {0, 0, 0}, 1.1, 0.1);
  std::vector<Configuration> one{Configuration(3, {Point{0, 0, 0}})};
  auto prof = density_profile(one, mu0, g);
  const double s = 0.1 * mu0.support_radius();
  double grad2 = 0;
  const int m = 20000;
  for (int k = 0; k < m; ++k) {
    double r = (k + 0.5) * 10 * s / m;
    grad2 += 4 * pi * r * r * (r * r / std::pow(s, 4)) * std::exp(-r * r / (s * s)) * 10 * s / m;
  }
  // The bump at the origin has mass ∫φ dμ0 = (3/4π)(2π s²)^{3/2}.
  double mass = 3 / (4 * pi) * std::pow(2 * pi * s * s, 1.5);
  bool found = false;
  for (size_t k = 0; k < prof.bump_values.size(); ++k)
    if (prof.bump_scales[k] == s && norm(prof.bump_centers[k]) < 1e-12) {
      found = true;
      CHECK(prof.bump_values[k] == doctest::Approx((1 - mass) / std::sqrt(grad2)).epsilon(1e-3));
    }
  CHECK(found);
}

TEST_CASE("delaunay triangulation") {
  // Unit square plus center: four triangles.
  std::vector<Point> pts{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0.5, 0.5, 0}};
  CHECK(delaunay_triangles(pts).size() == 4);
  // Euler: 2n - 2 - h triangles for n points with h on the hull.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point> rnd;
  for (int i = 0; i < 200; ++i) rnd.push_back({u(rng), u(rng), 0});
  auto tris = delaunay_triangles(rnd);
  auto bo = bond_order_psi6(Configuration(2, rnd));
  long hull = std::count(bo.interior.begin(), bo.interior.end(), 0);
  CHECK(long(tris.size()) == 2 * 200 - 2 - hull);
  // Empty circumcircles.
  for (auto& t : tris) {
    const Point &a = rnd[t[0]], &b = rnd[t[1]], &c = rnd[t[2]];
    double dd = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    double ux = (norm2(a) * (b[1] - c[1]) + norm2(b) * (c[1] - a[1]) + norm2(c) * (a[1] - b[1])) / dd;
    double uy = (norm2(a) * (c[0] - b[0]) + norm2(b) * (a[0] - c[0]) + norm2(c) * (b[0] - a[0])) / dd;
    Point o{ux, uy, 0};
    double r2 = norm2(a - o);
    for (auto& p : rnd) CHECK(norm2(p - o) >= r2 * (1 - 1e-9));
  }
  std::vector<Point> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  CHECK_THROWS_AS(delaunay_triangles(line), ContractError);
}

TEST_CASE("bond order") {
  for (double angle : {0.0, 0.3}) {
    auto b = bond_order_psi6(hexagonal_patch(6, 0.7, angle));
    CHECK(b.delaunay);
    for (size_t i = 0; i < b.psi.size(); ++i)
      if (b.interior[i]) CHECK(std::fabs(b.psi[i] - 1.0) < 1e-12);
    CHECK(std::fabs(b.bulk_mean - 1.0) < 1e-12);
  }
  // Square lattice: four bonds at 90° cancel e^{6iθ}; the diagonals picked
  // by the triangulation have zero-length Voronoi facets.
  auto sq = bond_order_psi6(square_patch(6));
  CHECK(sq.bulk_mean < 1e-6);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point> pts;
  for (int i = 0; i < 800; ++i) pts.push_back({u(rng), u(rng), 0});
  auto poisson = bond_order_psi6(Configuration(2, pts));
  CHECK(poisson.bulk_mean < 0.5);

  CHECK_THROWS_AS(bond_order_psi6(Configuration(3, std::vector<Point>(10, Point{0, 0, 0}))), ContractError);
}

TEST_CASE("square lattice gives zero bond order with the six-neighbor rule") {
  // The fallback path: collinear input has no triangles.
  std::vector<Point> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 0, 0});
  auto b = bond_order_psi6(Configuration(2, line));
  CHECK_FALSE(b.delaunay);
  // All bonds are horizontal: e^{6iθ} = 1.
  for (double p : b.psi) CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("periodic density") {
  for (std::string name : {"square", "sc"}) {
    auto rep = period_density_check(supercell(make_lattice(name), 2), {2, 4, 6, 10});
    for (auto& row : rep.rows) CHECK(row.ratio == 1.0);
    CHECK(rep.converges);
  }
  for (double m : {0.5, 2.0, 3.0}) {
    auto lat = make_lattice("triangular").with_density(m);
    auto rep = period_density_check(lattice_torus(lat), {3.3, 7.1, 15.9, 31.7});
    CHECK(rep.density == doctest::Approx(m));
    CHECK(rep.converges);
    CHECK(std::fabs(rep.rows.back().ratio - m) < std::fabs(rep.rows.back().envelope));
  }
  auto fcc = period_density_check(lattice_torus(make_lattice("fcc").with_density(2.0)), {2.5, 5.5, 11.5});
  CHECK(fcc.converges);
  CHECK(fcc.rows.back().ratio == doctest::Approx(2.0).epsilon(0.2));

  // A multiple of the square period with density m is exact.
  auto sq = make_lattice("square").with_density(4.0); // period 1/2
  auto rep = period_density_check(lattice_torus(sq), {1, 2, 5});
  for (auto& row : rep.rows) CHECK(row.ratio == 4.0);
  CHECK_THROWS_AS(period_density_check(lattice_torus(sq), {0.0}), DomainError);
}
