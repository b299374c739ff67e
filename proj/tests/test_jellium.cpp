#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <boost/math/quadrature/gauss.hpp>

#include "cgas/equilibrium.hpp"
#include "cgas/jellium.hpp"

using namespace cgas;
using boost::math::quadrature::gauss;

namespace {

// Madelung constant of a unit-covolume planar lattice with modulus τ from the
// Kronecker limit formula: -(1/2π) log(2π √(Im τ) |η(τ)|²).
double kronecker_madelung(std::complex<double> tau) {
  using C = std::complex<double>;
  C q = std::exp(C(0, 2 * pi) * tau);
  C eta = std::exp(C(0, 2 * pi / 24) * tau);
  C qn = 1;
  for (int n = 1; n < 200; ++n) {
    qn *= q;
    eta *= 1.0 - qn;
  }
  return -std::log(2 * pi * std::sqrt(tau.imag()) * std::norm(eta)) / (2 * pi);
}

// Σ' e^{-a²|L|²}/|L| - 2π/a² over Z³, which tends to 4π R_sc as a -> 0.
double sc_gaussian_cutoff(double a) {
  const int m = static_cast<int>(std::ceil(6.5 / a));
  Accumulator acc;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j)
      for (int k = -m; k <= m; ++k) {
        double r2 = double(i * i + j * j + k * k);
        if (r2 > 0) acc += std::exp(-a * a * r2) / std::sqrt(r2);
      }
  return acc.value() - 2 * pi / (a * a);
}

Point random_point(std::mt19937_64& rng, const Lattice& l) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  return l.cartesian({u(rng), u(rng), u(rng)});
}

} // namespace

TEST_CASE("catalog lattices have unit density and round-trip through JSON") {
  for (int d : {2, 3})
    for (const Lattice& l : lattice_catalog(d)) {
      CHECK(l.density() == doctest::Approx(1).epsilon(1e-14));
      Lattice back = Lattice::from_json(l.to_json());
      for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) CHECK(back.basis[a][c] == doctest::Approx(l.basis[a][c]).epsilon(1e-14));
    }
  CHECK(make_lattice("rhombic40").density() == doctest::Approx(1).epsilon(1e-14));
  CHECK_THROWS_AS(make_lattice("hexagonal-close"), SpecError);
  CHECK_THROWS_AS(make_lattice("rhombic0"), DomainError);
  Lattice l = make_lattice("fcc");
  auto k = l.reciprocal();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(dot(l.basis[a], k[b]) == doctest::Approx(a == b ? 2 * pi : 0).epsilon(1e-13).scale(1));
}

TEST_CASE("torus Green function: symmetric, independent of the splitting, mean zero") {
  std::mt19937_64 rng(11);
  for (const char* name : {"square", "triangular", "rhombic40", "sc", "bcc", "fcc"}) {
    Lattice l = make_lattice(name);
    // α ∈ {1, 0.5, 2}·V^{-1/d}.
    TorusGreen g0(l, ewald_parameters(l, 1e-13, 1.0)), g1(l, ewald_parameters(l, 1e-13, 0.5)),
        g2(l, ewald_parameters(l, 1e-13, 2.0));
    for (int t = 0; t < 10; ++t) {
      Point x = random_point(rng, l);
      double v = g0(x);
      CHECK(std::fabs(g1(x) - v) < 1e-10);
      CHECK(std::fabs(g2(x) - v) < 1e-10);
      CHECK(std::fabs(g0(-1.0 * x) - v) < 1e-12);
      CHECK(std::fabs(g0(x + l.basis[0] - 2.0 * l.basis[1]) - v) < 1e-12);
    }
    CHECK(std::fabs(g1.madelung() - g0.madelung()) < 1e-10);
    CHECK_THROWS_AS(g0(l.basis[1]), SingularityError);
  }

  // Mean over the fundamental region 0 ≤ y ≤ x ≤ 1/2 of the square (8 copies)
  // and 0 ≤ z ≤ y ≤ x ≤ 1/2 of the cube (48 copies), with y = a x, z = b x.
  {
    Lattice l = make_lattice("square");
    TorusGreen g(l, ewald_parameters(l, 1e-13));
    // x = t²/2 removes the x log x behaviour at the origin.
    double mean = 8 * gauss<double, 40>::integrate(
                          [&](double t) {
                            double x = 0.5 * t * t;
                            return gauss<double, 30>::integrate([&](double a) { return x * g({x, a * x, 0}); }, 0.0, 1.0) * t;
                          },
                          0.0, 1.0);
    CHECK(std::fabs(mean) < 1e-8);
  }
  {
    Lattice l = make_lattice("sc");
    TorusGreen g(l, ewald_parameters(l, 1e-13));
    double mean = 48 * gauss<double, 20>::integrate(
                           [&](double x) {
                             return gauss<double, 20>::integrate(
                                 [&](double a) {
                                   return gauss<double, 20>::integrate(
                                       [&](double b) { return x * x * g({x, a * x, b * x}); }, 0.0, a);
                                 },
                                 0.0, 1.0);
                           },
                           0.0, 0.5);
    CHECK(std::fabs(mean) < 1e-8);
  }
}

TEST_CASE("Madelung constants") {
  Lattice sq = make_lattice("square"), tri = make_lattice("triangular"), rh = make_lattice("rhombic40");
  // Finite part of G at the origin, extrapolated in r².
  {
    TorusGreen g(sq, ewald_parameters(sq, 1e-13));
    auto f = [&](double r) { return g({r / std::sqrt(2.0), r / std::sqrt(2.0), 0}) + std::log(r) / (2 * pi); };
    double r = 1e-3;
    CHECK(std::fabs((4 * f(r) - f(2 * r)) / 3 - g.madelung()) < 1e-8);
  }
  // Planar lattices against the Kronecker limit formula.
  CHECK(madelung_constant(sq, ewald_parameters(sq, 1e-13)) == doctest::Approx(kronecker_madelung({0, 1})).epsilon(1e-12));
  CHECK(madelung_constant(tri, ewald_parameters(tri, 1e-13)) ==
        doctest::Approx(kronecker_madelung({0.5, std::sqrt(3.0) / 2})).epsilon(1e-12));
  double th = 40 * pi / 180;
  CHECK(madelung_constant(rh, ewald_parameters(rh, 1e-13)) ==
        doctest::Approx(kronecker_madelung({std::cos(th), std::sin(th)})).epsilon(1e-12));
  CHECK(madelung_constant(sq, ewald_parameters(sq, 1e-13)) == doctest::Approx(-0.2085777932435014).epsilon(1e-12));

  // Simple cubic against a Gaussian-cutoff lattice sum, Richardson extrapolated.
  Lattice sc = make_lattice("sc");
  double r_sc = madelung_constant(sc, ewald_parameters(sc, 1e-13));
  double oracle = (4 * sc_gaussian_cutoff(0.1) - sc_gaussian_cutoff(0.2)) / 3;
  CHECK(std::fabs(4 * pi * r_sc - oracle) < 3e-5);
  CHECK(4 * pi * r_sc == doctest::Approx(-2.837297479480619).epsilon(1e-12));
  CHECK(madelung_constant(make_lattice("bcc"), ewald_parameters(make_lattice("bcc"), 1e-13)) ==
        doctest::Approx(-0.22985646307).epsilon(1e-10));
  CHECK(madelung_constant(make_lattice("fcc"), ewald_parameters(make_lattice("fcc"), 1e-13)) ==
        doctest::Approx(-0.22984218814).epsilon(1e-10));

  // Rescaling a lattice by λ: R shifts by log λ/(2π) in the plane, scales by 1/λ in space.
  for (double lam : {0.5, 3.0}) {
    Lattice s2 = sq.scaled(lam), s3 = sc.scaled(lam);
    double r2 = madelung_constant(s2, ewald_parameters(s2, 1e-13));
    CHECK(std::fabs(r2 - (madelung_constant(sq, ewald_parameters(sq, 1e-13)) + std::log(lam) / (2 * pi))) < 1e-11);
    double r3 = madelung_constant(s3, ewald_parameters(s3, 1e-13));
    CHECK(std::fabs(r3 - r_sc / lam) < 1e-11);
  }
}

TEST_CASE("periodic renormalized energy") {
  Lattice sq = make_lattice("square"), tri = make_lattice("triangular"), rh = make_lattice("rhombic40");
  double wsq = periodic_renormalized_energy(lattice_torus(sq));
  double wtri = periodic_renormalized_energy(lattice_torus(tri));
  double wrh = periodic_renormalized_energy(lattice_torus(rh));
  CHECK(wsq == doctest::Approx(4 * pi * pi * -0.2085777932435014).epsilon(1e-12));
  CHECK(wtri < wsq);
  CHECK(wsq < wrh);
  double wsc = lattice_energy(make_lattice("sc")), wbcc = lattice_energy(make_lattice("bcc")),
         wfcc = lattice_energy(make_lattice("fcc"));
  CHECK(wbcc < wfcc);
  CHECK(wfcc < wsc);

  // A single point on a unit-volume torus carries c_d² R.
  Lattice sc = make_lattice("sc");
  CHECK(wsc == doctest::Approx(16 * pi * pi * madelung_constant(sc, ewald_parameters(sc, 1e-13))).epsilon(1e-13));

  // Supercells describe the same periodic configuration.
  for (const char* name : {"square", "triangular", "sc", "bcc"}) {
    Lattice l = make_lattice(name);
    double w1 = lattice_energy(l);
    for (int k : {2, 3}) CHECK(std::fabs(periodic_renormalized_energy(supercell(l, k)) - w1) < 1e-9);
  }

  // Rotations.
  CHECK(std::fabs(periodic_renormalized_energy(lattice_torus(tri.rotated(0.7))) - wtri) < 1e-12);
  Lattice fcc = make_lattice("fcc");
  CHECK(std::fabs(periodic_renormalized_energy(lattice_torus(fcc.rotated(1.1, {1, 2, 3}))) - wfcc) < 1e-12);

  // Scaling with the density, computed directly on the dense tori.
  for (double m : {0.5, 1.0, 2.0, 4.0}) {
    double w2 = periodic_renormalized_energy(lattice_torus(tri.with_density(m)));
    CHECK(std::fabs(w2 - m * (wtri - pi * std::log(m))) < 1e-9 * std::fabs(w2));
    double w3 = periodic_renormalized_energy(lattice_torus(fcc.with_density(m)));
    CHECK(std::fabs(w3 - std::pow(m, 4.0 / 3) * wfcc) < 1e-9 * std::fabs(w3));
  }
  // 8^{2-2/3} = 16.
  CHECK(periodic_renormalized_energy(lattice_torus(fcc.with_density(8))) == doctest::Approx(16 * wfcc).epsilon(1e-10));
  double e2 = std::exp(2.0);
  CHECK(periodic_renormalized_energy(lattice_torus(sq.with_density(e2))) ==
        doctest::Approx(e2 * (wsq - 2 * pi)).epsilon(1e-10));
  CHECK(lattice_energy(sq.with_density(e2)) == doctest::Approx(e2 * (wsq - 2 * pi)).epsilon(1e-12));

  // Two-point torus built by hand equals the rectangle supercell.
  Lattice rect;
  rect.name = "rect";
  rect.d = 2;
  rect.basis[0] = {2, 0, 0};
  rect.basis[1] = {0, 1, 0};
  CHECK(std::fabs(periodic_renormalized_energy(TorusConfiguration(rect, {{0, 0, 0}, {1, 0, 0}})) - wsq) < 1e-10);

  // Coincident points modulo the torus.
  CHECK_THROWS_AS(periodic_renormalized_energy(TorusConfiguration(rect, {{0.3, 0.1, 0}, {2.3, 1.1, 0}})),
                  SingularityError);
  // Permutation invariance on a random torus configuration.
  std::mt19937_64 rng(5);
  std::vector<Point> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(random_point(rng, rect));
  double w = periodic_renormalized_energy(TorusConfiguration(rect, pts));
  std::swap(pts[0], pts[4]);
  CHECK(std::fabs(periodic_renormalized_energy(TorusConfiguration(rect, pts)) - w) < 1e-11);
}

TEST_CASE("Epstein zeta function") {
  Lattice sq = make_lattice("square"), tri = make_lattice("triangular");
  // 4 ζ(2) β(2) with Catalan's constant.
  const double catalan = 0.915965594177219015;
  CHECK(std::fabs(epstein_zeta(sq, 2) - 4 * pi * pi / 6 * catalan) < 1e-10);
  CHECK(std::fabs(epstein_zeta(sq, 2) - 6.02681203969194) < 1e-10);
  CHECK(std::fabs(epstein_zeta_direct(sq, 2, 300) - epstein_zeta(sq, 2)) < 1e-7);
  CHECK(std::fabs(epstein_zeta_direct(tri, 1.5, 300) - epstein_zeta(tri, 1.5)) < 1e-5);
  Lattice fcc = make_lattice("fcc");
  CHECK(std::fabs(epstein_zeta_direct(fcc, 3, 60) - epstein_zeta(fcc, 3)) < 1e-6);
  for (double s : {0.3, 2.5})
    for (double lam : {0.7, 2.0})
      CHECK(epstein_zeta(tri.scaled(lam), s) == doctest::Approx(std::pow(lam, -(2 + s)) * epstein_zeta(tri, s)).epsilon(1e-11));
  for (double s : {0.1, 0.5, 1.0}) CHECK(epstein_zeta(tri, s) < epstein_zeta(sq, s));
  CHECK_THROWS_AS(epstein_zeta(sq, 0), DomainError);
  CHECK_THROWS_AS(epstein_zeta(sq, -1), DomainError);
  CHECK_THROWS_AS(epstein_zeta(fcc, 1), DomainError);
}

TEST_CASE("zeta differences track renormalized energy differences") {
  Lattice sq = make_lattice("square"), tri = make_lattice("triangular"), rh = make_lattice("rhombic40");
  std::vector<double> ladder{0.05, 0.1, 0.15, 0.2};
  auto a = zeta_renorm_consistency(tri, sq, ladder);
  auto b = zeta_renorm_consistency(tri, rh, ladder);
  auto c = zeta_renorm_consistency(sq, rh, ladder);
  for (const auto& z : {a, b, c}) {
    CHECK(z.same_sign);
    CHECK(z.fitted_constant == doctest::Approx(a.fitted_constant).epsilon(0.02));
    CHECK(z.zeta_small_s == doctest::Approx(z.zeta_limit).epsilon(1e-3));
  }
  CHECK_THROWS_AS(zeta_renorm_consistency(tri.with_density(2), sq, ladder), ContractError);
}

TEST_CASE("xi constants from equilibrium measures") {
  auto mu2 = solve_equilibrium_radial(quadratic_potential(2));
  auto x2 = xi_d(mu2);
  CHECK(x2.entropy_term == doctest::Approx(std::log(pi) / 2).epsilon(1e-8));
  CHECK(x2.conjectural);
  CHECK(x2.value == doctest::Approx(-0.748752485503338).epsilon(1e-8));

  auto mu3 = solve_equilibrium_radial(quadratic_potential(3));
  CHECK(mu3.power_integral(4.0 / 3) == doctest::Approx(std::cbrt(3 / (4 * pi))).epsilon(1e-8));
  // Density one: V = (4π/3)|x|² gives μ0 = 1 on the ball of volume one.
  auto unit = solve_equilibrium_radial(quadratic_potential(3, 4 * pi / 3));
  auto x3 = xi_d(unit, -36.0, "test");
  CHECK(x3.value == doctest::Approx(-36.0 / (4 * pi)).epsilon(1e-8));
  CHECK(x3.alpha_source == "test");
}

TEST_CASE("box-averaged smeared energy approaches the periodic energy") {
  for (const char* name : {"triangular", "square"}) {
    Lattice l = make_lattice(name);
    double w = lattice_energy(l);
    auto b = box_averaged_W_eta(l, 1e-2);
    CHECK(std::fabs(b.value - w) < 1e-2 * std::fabs(w));
    // Supercell multiples give the same average.
    auto c = box_averaged_W_eta(l, 0.05, {1, 2});
    CHECK(std::fabs(c.values[0] - c.values[1]) < 1e-8 * std::fabs(w));
  }
  CHECK_THROWS_AS(box_averaged_W_eta(make_lattice("sc"), 0), DomainError);
}
