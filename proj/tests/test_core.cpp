#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cgas/config_io.hpp"
#include "cgas/core.hpp"

using namespace cgas;

namespace {

// Independent oracle: D(δ^(1), δ^(1)) = ∫ φ(r) ρ(r) dr for the unit ball,
// with φ the interior potential from the radial Poisson equation.
double unit_ball_oracle(int d) {
  using boost::math::quadrature::gauss_kronrod;
  if (d == 3) return gauss_kronrod<double, 61>::integrate([](double r) { return 0.5 * (3 - r * r) * 3 * r * r; }, 0, 1);
  return gauss_kronrod<double, 61>::integrate([](double r) { return 0.5 * (1 - r * r) * 2 * r; }, 0, 1);
}

Configuration random_config(std::mt19937_64& rng, int d, int n, double spread = 1.0) {
  std::normal_distribution<double> g(0.0, spread);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {g(rng), g(rng), d == 3 ? g(rng) : 0.0};
  return Configuration(d, pts);
}

} // namespace

TEST_CASE("coulomb kernel values") {
  CHECK(coulomb_kernel({1, 0, 0}, 3) == doctest::Approx(1.0));
  CHECK(coulomb_kernel({0, 1, 0}, 2) == doctest::Approx(0.0));
  CHECK(coulomb_kernel({std::exp(1.0), 0, 0}, 2) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(coulomb_kernel({0, 0, 0}, 3), SingularityError);
  CHECK_THROWS_AS(coulomb_kernel({1, 0, 0}, 4), DomainError);
}

TEST_CASE("space constants") {
  auto c2 = space_constants(2), c3 = space_constants(3);
  CHECK(c2.c == doctest::Approx(2 * pi));
  CHECK(c3.c == doctest::Approx(4 * pi));
  CHECK(c2.kappa == doctest::Approx(c2.c));
  CHECK(c3.kappa == doctest::Approx(c3.c * unit_ball_oracle(3)).epsilon(1e-12));
  CHECK(c2.gamma == doctest::Approx(c2.c * unit_ball_oracle(2)).epsilon(1e-12));
  CHECK(c3.gamma == 0.0);
}

TEST_CASE("smeared potential: interior and exterior") {
  CHECK(smeared_potential(2, 1, 3) == doctest::Approx(0.5));
  CHECK(smeared_potential(0, 1, 3) == doctest::Approx(1.5));
  CHECK(smeared_potential(0, 1, 2) == doctest::Approx(0.5));
  // Continuity at the ball surface.
  for (int d : {2, 3}) {
    double eta = 0.37;
    CHECK(smeared_potential(eta * (1 - 1e-12), eta, d) == doctest::Approx(smeared_potential(eta, eta, d)));
  }
}

TEST_CASE("smeared potential matches Monte Carlo average of the kernel") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int d : {2, 3}) {
    for (double r : {0.0, 0.4, 1.7}) {
      double sum = 0, sum2 = 0;
      int n = 0;
      while (n < 200000) {
        Point y{u(rng), u(rng), d == 3 ? u(rng) : 0.0};
        if (norm2(y) > 1) continue;
        double v = coulomb_kernel(Point{r, 0, 0} - y, d);
        sum += v;
        sum2 += v * v;
        ++n;
      }
      double mean = sum / n, err = std::sqrt((sum2 / n - mean * mean) / n);
      CHECK(std::fabs(mean - smeared_potential(r, 1, d)) < 5 * err + 1e-4);
    }
  }
}

TEST_CASE("smearing constants against radial oracle") {
  CHECK(std::fabs(smeared_pair_energy({0, 0, 0}, {0, 0, 0}, 1, 3) - unit_ball_oracle(3)) < 1e-8);
  CHECK(std::fabs(smeared_pair_energy({0, 0, 0}, {0, 0, 0}, 1, 2) - unit_ball_oracle(2)) < 1e-8);
  CHECK(unit_ball_oracle(3) == doctest::Approx(1.2).epsilon(1e-13));
  CHECK(unit_ball_oracle(2) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(smeared_pair_energy({0, 0, 0}, {1, 0, 0}, 0.1, 3) == doctest::Approx(1.0));
}

TEST_CASE("self energy equals the coincident smeared pair energy") {
  for (int d : {2, 3})
    for (double eta : {0.01, 0.1, 0.5, 1.0, 3.0})
      CHECK(std::fabs(self_energy(eta, d) - smeared_pair_energy_radial(0, eta, d)) < 1e-10 * (1 + std::fabs(self_energy(eta, d))));
  CHECK(self_energy(1, 3) == doctest::Approx(1.2));
  CHECK(self_energy(0.5, 3) == doctest::Approx(2.4));
  CHECK(self_energy(0.5, 2) == doctest::Approx(std::log(2.0) + 0.25));
}

TEST_CASE("Newton exactness and monotone domination") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int d : {2, 3}) {
    for (int k = 0; k < 12; ++k) {
      double eta = std::pow(10.0, -3 + 3 * u(rng));
      double s = 2 * eta * (1 + 3 * u(rng));
      // Quadrature route at exactly the contact distance must also be exact.
      CHECK(smeared_pair_energy_radial(s, eta, d) == doctest::Approx(coulomb_kernel_radial(s, d)).epsilon(1e-12));
    }
    double eta = 0.3;
    for (double s : {1e-4, 0.01, 0.1, 0.3, 0.45, 0.59, 0.599999}) {
      double e = smeared_pair_energy_radial(s, eta, d);
      CHECK(e <= coulomb_kernel_radial(s, d));
    }
    // Continuity across s = 2η.
    CHECK(smeared_pair_energy_radial(0.6 * (1 - 1e-9), eta, d) ==
          doctest::Approx(coulomb_kernel_radial(0.6, d)).epsilon(1e-8));
  }
}

TEST_CASE("overlapping pair energy agrees with Monte Carlo double average") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int d : {2, 3}) {
    double s = 0.8, eta = 1.0;
    auto draw = [&] {
      for (;;) {
        Point y{u(rng), u(rng), d == 3 ? u(rng) : 0.0};
        if (norm2(y) <= 1) return y;
      }
    };
    double sum = 0, sum2 = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      Point a = draw(), b = draw();
      a[0] += s;
      double v = coulomb_kernel(a - b, d);
      sum += v;
      sum2 += v * v;
    }
    double mean = sum / n, err = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - smeared_pair_energy_radial(s, eta, d)) < 5 * err);
  }
}

TEST_CASE("hamiltonian small cases") {
  Potential q2 = quadratic_potential(2);
  CHECK(hamiltonian(Configuration(2, {{1, 0, 0}}), q2) == doctest::Approx(1.0));
  CHECK(hamiltonian(Configuration(3, {{0, 0, 0}, {1, 0, 0}}), zero_potential(3)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(hamiltonian(Configuration(2, {{0.5, 0, 0}, {0.5, 0, 0}}), q2), SingularityError);
  try {
    hamiltonian(Configuration(2, {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}}), q2);
  } catch (const SingularityError& e) {
    CHECK(std::string(e.what()).find("1 and 2") != std::string::npos);
  }
}

TEST_CASE("hamiltonian matches brute-force double loop") {
  std::mt19937_64 rng(3);
  Potential q2 = quadratic_potential(2);
  Configuration c = random_config(rng, 2, 3);
  double brute = 0;
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 3; ++j)
      if (i != j) brute += -std::log(std::hypot(c.points[i][0] - c.points[j][0], c.points[i][1] - c.points[j][1]));
    brute += 3 * (c.points[i][0] * c.points[i][0] + c.points[i][1] * c.points[i][1]);
  }
  CHECK(std::fabs(hamiltonian(c, q2) - brute) < 1e-12 * (1 + std::fabs(brute)));
}

TEST_CASE("hamiltonian permutation invariance") {
  std::mt19937_64 rng(9);
  for (int d : {2, 3}) {
    Potential v = quadratic_potential(d, 0.7);
    Configuration c = random_config(rng, d, 40);
    double h0 = hamiltonian(c, v);
    for (int t = 0; t < 10; ++t) {
      std::shuffle(c.points.begin(), c.points.end(), rng);
      CHECK(std::fabs(hamiltonian(c, v) - h0) < 1e-12 * std::fabs(h0));
    }
  }
}

TEST_CASE("gradient: symmetric pair and single particle") {
  auto g = hamiltonian_gradient(Configuration(2, {{-0.5, 0, 0}, {0.5, 0, 0}}), zero_potential(2));
  CHECK(g[0][0] == doctest::Approx(-g[1][0]));
  CHECK(g[0][0] > 0); // pushing the left point further left lowers -log|x|
  auto g1 = hamiltonian_gradient(Configuration(2, {{1, 0, 0}}), quadratic_potential(2));
  CHECK(g1[0][0] == doctest::Approx(2.0));
  CHECK(g1[0][1] == doctest::Approx(0.0));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(21);
  for (int d : {2, 3}) {
    Potential v = power_potential(d, 1.3, 4.0);
    for (int t = 0; t < 20; ++t) {
      Configuration c = random_config(rng, d, 8, 0.6);
      auto g = hamiltonian_gradient(c, v);
      double worst = 0, scale = 0;
      for (size_t i = 0; i < c.size(); ++i)
        for (int a = 0; a < d; ++a) {
          double hstep = 1e-6;
          Configuration p = c, m = c;
          p.points[i][a] += hstep;
          m.points[i][a] -= hstep;
          double fd = (hamiltonian(p, v) - hamiltonian(m, v)) / (2 * hstep);
          worst = std::max(worst, std::fabs(fd - g[i][a]));
          scale = std::max(scale, std::fabs(g[i][a]));
        }
      CHECK(worst / scale < 1e-6);
    }
  }
}

TEST_CASE("configuration CSV round trip") {
  std::mt19937_64 rng(2);
  for (int d : {2, 3}) {
    Configuration c = random_config(rng, d, 7);
    std::stringstream ss;
    write_configuration_csv(ss, c);
    Configuration back = read_configuration_csv(ss);
    REQUIRE(back.size() == c.size());
    CHECK(back.d == d);
    for (size_t i = 0; i < c.size(); ++i) CHECK(back.points[i] == c.points[i]);
  }
  std::stringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(read_configuration_csv(bad), SpecError);
}
