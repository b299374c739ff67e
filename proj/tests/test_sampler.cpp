#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "cgas/sampler.hpp"
#include "cgas/splitting.hpp"

using namespace cgas;

namespace {

// Two particles in V = |x|² (d=2): with x = c ± r/2 the Gibbs weight splits
// into e^{-2β|c|²} and ρ^{β} e^{-βρ²/2}, so
// Z = (π/(2β)) · 2π · (1/2)(2/β)^{1+β/2} Γ(1+β/2).
double two_particle_free_energy(double beta) {
  double z = pi / (2 * beta) * pi * std::pow(2 / beta, 1 + beta / 2) * std::tgamma(1 + beta / 2);
  return -2 / beta * std::log(z);
}

Configuration random_config(std::mt19937_64& rng, int d, int n) {
  std::normal_distribution<double> g(0, 0.5);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.push_back({g(rng), g(rng), d == 3 ? g(rng) : 0.0});
  return Configuration(d, pts);
}

} // namespace

TEST_CASE("chains are deterministic and resumable") {
  auto v = quadratic_potential(2);
  std::mt19937_64 rng(3);
  auto c = random_config(rng, 2, 8);
  Chain a = make_chain(c, v, 2.0, 99), b = make_chain(c, v, 2.0, 99);
  for (int s = 0; s < 50; ++s) metropolis_sweep(a, v), metropolis_sweep(b, v);
  CHECK(a.config.points == b.config.points);
  CHECK(a.energy == b.energy);

  Chain resumed = Chain::from_json(nlohmann::json::parse(a.to_json().dump()));
  for (int s = 0; s < 50; ++s) metropolis_sweep(a, v), metropolis_sweep(resumed, v);
  CHECK(a.config.points == resumed.config.points);
  CHECK(a.accepted == resumed.accepted);
  CHECK(a.energy == resumed.energy);

  Chain other = make_chain(c, v, 2.0, 100);
  for (int s = 0; s < 50; ++s) metropolis_sweep(other, v);
  CHECK(other.config.points != b.config.points);
}

TEST_CASE("a resumed Gibbs run continues the same trajectories") {
  auto v = quadratic_potential(2);
  auto mu = solve_equilibrium_radial(v);
  GibbsOptions o;
  o.chains = 2;
  o.burn_in = 200;
  o.samples = 20;
  o.thin = 5;
  o.seed = 4;
  GibbsRun whole = sample_gibbs(10, v, mu, 2.0, o);

  o.samples = 8;
  GibbsRun first = sample_gibbs(10, v, mu, 2.0, o);
  GibbsOptions r = o;
  r.samples = 12;
  r.resume = first.chains;
  GibbsRun second = sample_gibbs(10, v, mu, 2.0, r);
  REQUIRE(second.samples.size() == 24);
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < 8; ++k)
      CHECK(first.samples[c * 8 + k].points == whole.samples[c * 20 + k].points);
    for (int k = 0; k < 12; ++k)
      CHECK(second.samples[c * 12 + k].points == whole.samples[c * 20 + 8 + k].points);
    for (int k = 0; k < 12; ++k) CHECK(second.energies[c * 12 + k] == whole.energies[c * 20 + 8 + k]);
  }

  r.thin = 0;
  CHECK_THROWS_AS(sample_gibbs(10, v, mu, 2.0, r), ContractError);
  r.thin = 5;
  CHECK_THROWS(sample_gibbs(11, v, mu, 2.0, r));
}

TEST_CASE("incremental energy matches recomputation") {
  for (int d : {2, 3}) {
    auto v = quadratic_potential(d);
    std::mt19937_64 rng(4);
    Chain ch = make_chain(random_config(rng, d, 10), v, 1.0, 5);
    burn_in(ch, v, 200);
    for (int s = 0; s < 10000; ++s) metropolis_sweep(ch, v);
    CHECK(audit_energy(ch, v) < 1e-9);
  }
  // Coincident proposals carry infinite energy.
  auto v = quadratic_potential(2);
  Configuration c(2, {{0, 0, 0}, {1, 0, 0}});
  CHECK(std::isinf(move_energy_change(c, v, 0, {1, 0, 0})));
  CHECK(move_energy_change(c, v, 0, {0.5, 0, 0}) == doctest::Approx(hamiltonian(Configuration(2, {{0.5, 0, 0}, {1, 0, 0}}), v) -
                                                                    hamiltonian(c, v)));
}

TEST_CASE("zero temperature limit accepts only descents") {
  auto v = quadratic_potential(2);
  std::mt19937_64 rng(8);
  Chain ch = make_chain(random_config(rng, 2, 6), v, 1e300, 1);
  double e = ch.energy;
  for (int s = 0; s < 500; ++s) {
    metropolis_sweep(ch, v);
    CHECK(ch.energy <= e + 1e-12);
    e = ch.energy;
  }
}

TEST_CASE("burn-in tunes acceptance into the target band") {
  auto v = quadratic_potential(2);
  std::mt19937_64 rng(9);
  Chain ch = make_chain(random_config(rng, 2, 20), v, 5.0, 2, 5.0);
  burn_in(ch, v, 1000);
  double step = ch.step;
  for (int s = 0; s < 500; ++s) metropolis_sweep(ch, v);
  CHECK(ch.step == step);
  CHECK(ch.acceptance_rate() > 0.2);
  CHECK(ch.acceptance_rate() < 0.45);
}

TEST_CASE("two-particle relative distance follows the exact Gibbs density") {
  // Density of ρ = |x1 - x2| ∝ ρ^{1+β} e^{-βρ²/2} for V = |x|², d = 2.
  const double beta = 2.0;
  auto v = quadratic_potential(2);
  Chain ch = make_chain(Configuration(2, {{0.3, 0, 0}, {-0.3, 0.1, 0}}), v, beta, 17);
  burn_in(ch, v, 2000);
  const int bins = 10;
  const double top = 3.0;
  std::vector<double> hist(bins, 0);
  const long sweeps = 1000000;
  for (long s = 0; s < sweeps; ++s) {
    metropolis_sweep(ch, v);
    double r = norm(ch.config.points[0] - ch.config.points[1]);
    if (r < top) hist[static_cast<int>(r / top * bins)] += 1.0 / sweeps;
  }
  auto dens = [&](double r) { return std::pow(r, 1 + beta) * std::exp(-beta * r * r / 2); };
  using boost::math::quadrature::gauss_kronrod;
  double total = gauss_kronrod<double, 31>::integrate(dens, 0.0, 20.0, 10, 1e-12);
  for (int b = 0; b < bins; ++b) {
    double p = gauss_kronrod<double, 31>::integrate(dens, top * b / bins, top * (b + 1) / bins, 10, 1e-12) / total;
    if (p > 0.05) CHECK(hist[b] == doctest::Approx(p).epsilon(0.03));
  }
}

TEST_CASE("Langevin moves") {
  auto v = quadratic_potential(2);
  std::mt19937_64 rng(12);
  auto c = random_config(rng, 2, 5);
  Chain tiny = make_chain(c, v, 1.0, 3);
  int acc = 0;
  for (int s = 0; s < 200; ++s) acc += langevin_step(tiny, v, 1e-9);
  CHECK(acc >= 198);
  Chain blow = make_chain(c, v, 1.0, 3);
  CHECK_THROWS_AS(langevin_step(blow, v, 1e305), DomainError);

  // Long-run mean energy agrees with the Metropolis chain.
  const double beta = 1.0;
  Chain m = make_chain(c, v, beta, 21), l = make_chain(c, v, beta, 22);
  burn_in(m, v, 2000);
  for (int s = 0; s < 2000; ++s) langevin_step(l, v, 0.01);
  std::vector<double> em, el;
  for (int s = 0; s < 40000; ++s) {
    metropolis_sweep(m, v);
    em.push_back(m.energy);
    for (int k = 0; k < 3; ++k) langevin_step(l, v, 0.01);
    el.push_back(l.energy);
  }
  auto mean_se = [](const std::vector<double>& x) {
    double mu = 0;
    for (double t : x) mu += t;
    mu /= x.size();
    double var = 0;
    for (double t : x) var += (t - mu) * (t - mu);
    var /= x.size() - 1;
    return std::pair{mu, std::sqrt(var * integrated_autocorrelation(x) / x.size())};
  };
  auto [mm, sm] = mean_se(em);
  auto [ml, sl] = mean_se(el);
  CHECK(std::fabs(mm - ml) < 4 * std::sqrt(sm * sm + sl * sl));
}

TEST_CASE("one sweep preserves an exactly sampled Gibbs law") {
  // n = 1: the target is the Gaussian e^{-(β/2)|x|²}.
  const double beta = 2.0;
  auto v = quadratic_potential(2);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1 / std::sqrt(beta));
  const int walkers = 100000;
  double before = 0, after = 0, sq = 0;
  for (int w = 0; w < walkers; ++w) {
    Chain ch = make_chain(Configuration(2, {{g(rng), g(rng), 0}}), v, beta, w, 0.8);
    double r2 = norm2(ch.config.points[0]);
    metropolis_sweep(ch, v);
    double s2 = norm2(ch.config.points[0]);
    before += r2 / walkers;
    after += s2 / walkers;
    sq += (s2 - r2) * (s2 - r2) / walkers;
  }
  // Exact ⟨|x|²⟩ = 2/β; the change over one sweep is pure noise.
  CHECK(std::fabs(after - before) < 4 * std::sqrt(sq / walkers));
  CHECK(after == doctest::Approx(2 / beta).epsilon(0.02));
}

TEST_CASE("autocorrelation and convergence diagnostics") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> iid(20000), ar(200000);
  for (double& x : iid) x = g(rng);
  CHECK(integrated_autocorrelation(iid) == doctest::Approx(1.0).epsilon(0.15));
  double phi = 0.9, x = 0;
  for (double& t : ar) t = x = phi * x + g(rng);
  CHECK(integrated_autocorrelation(ar) == doctest::Approx((1 + phi) / (1 - phi)).epsilon(0.15));
  std::vector<std::vector<double>> same{iid, iid}, shifted{iid, iid};
  CHECK(gelman_rubin(same) == doctest::Approx(1.0).epsilon(1e-3));
  for (double& t : shifted[1]) t += 3;
  CHECK(gelman_rubin(shifted) > 1.5);
}

TEST_CASE("ground states") {
  // n = 2: the pair sits symmetrically at the radius minimizing 2w(2r) + 2·2r².
  for (int d : {2, 3}) {
    auto v = quadratic_potential(d);
    auto mu = solve_equilibrium_radial(v);
    auto f = [d](double r) { return 2 * coulomb_kernel_radial(2 * r, d) + 4 * r * r; };
    double r_opt = boost::math::tools::brent_find_minima(f, 0.01, 3.0, 50).first;
    AnnealSchedule s;
    s.restarts = 2;
    auto gs = find_ground_state(2, v, mu, s, 5);
    CHECK(gs.converged);
    CHECK(norm(gs.config.points[0]) == doctest::Approx(r_opt).epsilon(1e-6));
    CHECK(norm(gs.config.points[0] + gs.config.points[1]) < 1e-6);
    CHECK(gs.energy == doctest::Approx(f(r_opt)).epsilon(1e-10));
  }
  {
    // n = 3, d = 2: equilateral triangle; H(side) = -6 log side + 3 side².
    auto v = quadratic_potential(2);
    auto mu = solve_equilibrium_radial(v);
    auto gs = find_ground_state(3, v, mu, AnnealSchedule{}, 6);
    auto f = [](double side) { return -6 * std::log(side) + 3 * side * side; };
    double side = boost::math::tools::brent_find_minima(f, 0.1, 5.0, 50).first;
    const auto& p = gs.config.points;
    for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}}) CHECK(norm(p[i] - p[j]) == doctest::Approx(side).epsilon(1e-6));
    CHECK(norm(p[0] + p[1] + p[2]) < 1e-6);
  }
  {
    auto v = quadratic_potential(2);
    auto mu = solve_equilibrium_radial(v);
    AnnealSchedule s;
    s.restarts = 1;
    auto gs = find_ground_state(40, v, mu, s, 7, 1e-7);
    CHECK(gs.converged);
    CHECK(gs.gradient_norm < 1e-7);
    for (const Point& x : gs.config.points) CHECK(zeta_at(mu, v, x) <= 1e-8);
    CHECK(next_order_energy(gs.config, mu, v) >= next_order_lower_bound(mu));
  }
  AnnealSchedule bad;
  bad.betas = {2, 1};
  CHECK_THROWS_AS(bad.validate(), SpecError);
}

TEST_CASE("sampling the equilibrium measure") {
  for (int d : {2, 3}) {
    auto mu = solve_equilibrium_radial(quadratic_potential(d));
    std::mt19937_64 rng(2);
    auto c = sample_measure(mu, 20000, rng);
    double r2 = 0;
    for (const Point& p : c.points) {
      CHECK(norm(p) <= 1 + 1e-12);
      r2 += norm2(p) / c.size();
    }
    // Uniform ball of radius 1: ⟨r²⟩ = d/(d+2).
    CHECK(r2 == doctest::Approx(double(d) / (d + 2)).epsilon(0.02));
  }
}

TEST_CASE("free energy by thermodynamic integration") {
  auto v = quadratic_potential(2);
  auto mu = solve_equilibrium_radial(v);
  // Non-interacting reference: -(2n/β) log(2π/(nβ)).
  for (double beta : {0.5, 3.0})
    CHECK(independent_free_energy(v, 4, beta) == doctest::Approx(-8 / beta * std::log(2 * pi / (4 * beta))).epsilon(1e-10));
  auto v3 = quadratic_potential(3);
  CHECK(independent_free_energy(v3, 2, 1.0) == doctest::Approx(-4 * 1.5 * std::log(pi)).epsilon(1e-10));

  FreeEnergyProtocol p;
  p.sweeps = 20000;
  p.burn_in = 1000;
  for (double beta : {0.5, 2.0}) {
    auto est = free_energy(2, v, mu, beta, p);
    double exact = two_particle_free_energy(beta);
    CHECK(std::fabs(est.value - exact) < 0.01 * std::fabs(exact));
    CHECK(std::fabs(est.value - exact) < 5 * est.error + 1e-3);
    CHECK_FALSE(est.flagged);
  }
  // Halving the λ grid moves the estimate by less than the error bars.
  FreeEnergyProtocol coarse = p;
  coarse.lambda_nodes = 4;
  coarse.sweeps = 8000;
  FreeEnergyProtocol fine = coarse;
  fine.lambda_nodes = 8;
  auto a = free_energy(4, v, mu, 1.0, coarse), b = free_energy(4, v, mu, 1.0, fine);
  CHECK(std::fabs(a.value - b.value) < 3 * std::sqrt(a.error * a.error + b.error * b.error));
}

TEST_CASE("free energy bounds bracket the estimate") {
  auto v = quadratic_potential(2);
  auto mu = solve_equilibrium_radial(v);
  const size_t n = 8;
  const double beta = 2.0;
  auto trial = solve_mu_beta(v, n, beta, mu_beta_grid(v, n, beta, 0.05));
  auto b = free_energy_bounds(n, v, mu, trial, beta);
  FreeEnergyProtocol p;
  p.sweeps = 4000;
  auto est = free_energy(n, v, mu, beta, p);
  CHECK(b.lower < est.value);
  CHECK(est.value < b.upper);
  // μ0 itself is an admissible trial measure, never better than μ_β.
  auto b0 = free_energy_bounds(n, v, mu, mu, beta);
  CHECK(b.upper <= b0.upper + 1e-6 * std::fabs(b0.upper));
}

TEST_CASE("tiled configurations") {
  auto v = quadratic_potential(2);
  auto mu = solve_equilibrium_radial(v);
  for (size_t n : {50, 100, 400}) {
    TilingReport rep;
    auto c = generate_tiled_configuration(mu, n, 2.0, 3, &rep);
    CHECK(c.size() == n);
    CHECK(rep.min_separation >= rep.r0);
    CHECK(rep.r0 == doctest::Approx(0.5 * std::sqrt(pi)).epsilon(1e-6));
    CHECK(rep.tiles > 0);
    CHECK(min_separation(c).distance * std::sqrt(double(n)) >= rep.r0 * (1 - 1e-12));
  }
  auto tiled = generate_tiled_configuration(mu, 100, 2.0, 3);
  AnnealSchedule s;
  s.restarts = 2;
  auto gs = find_ground_state(100, v, mu, s, 1);
  double eg = next_order_energy(gs.config, mu, v), et = next_order_energy(tiled, mu, v);
  CHECK(et >= eg);
  CHECK(std::fabs(et - eg) < 0.1 * std::fabs(eg));

  auto mu3 = solve_equilibrium_radial(quadratic_potential(3));
  TilingReport rep3;
  auto c3 = generate_tiled_configuration(mu3, 200, 1.5, 3, &rep3);
  CHECK(c3.size() == 200);
  CHECK(rep3.min_separation >= rep3.r0);
  CHECK_THROWS_AS(generate_tiled_configuration(mu, 10, 10.0, 3), ContractError);
}
