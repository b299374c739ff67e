#include "cgas/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cgas/jellium.hpp"
#include "cgas/splitting.hpp"

namespace cgas {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double inf = std::numeric_limits<double>::infinity();

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Point gaussian_point(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Point p{g(rng), g(rng), 0.0};
  if (d == 3) p[2] = g(rng);
  return p;
}

double sphere_area(int d) { return d == 3 ? 4 * pi : 2 * pi; }

double dim_power(double n, int d, double numerator) { return std::pow(n, numerator / d); }

} // namespace

void parallel_for(size_t count, int threads, const std::function<void(size_t)>& f) {
  const size_t workers = std::min<size_t>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < count; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int default_threads() {
  if (const char* s = std::getenv("CGAS_THREADS")) {
    int t = std::atoi(s);
    if (t > 0) return t;
  }
  return 1;
}

// ------------------------------------------------------------------- chains

nlohmann::json Chain::to_json() const {
  std::ostringstream rs;
  rs << rng;
  nlohmann::json pts = nlohmann::json::array();
  for (const Point& p : config.points) {
    nlohmann::json row = nlohmann::json::array();
    for (int a = 0; a < config.d; ++a) row.push_back(p[a]);
    pts.push_back(row);
  }
  return {{"d", config.d},        {"points", pts},     {"beta", beta},       {"seed", seed},
          {"rng", rs.str()},      {"step", step},      {"proposed", proposed}, {"accepted", accepted},
          {"sweeps", sweeps},     {"energy", energy},  {"coupling", coupling}};
}

Chain Chain::from_json(const nlohmann::json& j) {
  Chain c;
  int d = j.at("d").get<int>();
  std::vector<Point> pts;
  for (const auto& row : j.at("points")) {
    Point p{0, 0, 0};
    for (int a = 0; a < d; ++a) p[a] = row.at(a).get<double>();
    pts.push_back(p);
  }
  c.config = Configuration(d, pts);
  c.beta = j.at("beta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  std::istringstream rs(j.at("rng").get<std::string>());
  rs >> c.rng;
  c.step = j.at("step").get<double>();
  c.proposed = j.at("proposed").get<long>();
  c.accepted = j.at("accepted").get<long>();
  c.sweeps = j.at("sweeps").get<long>();
  c.energy = j.at("energy").get<double>();
  c.coupling = j.value("coupling", 1.0);
  return c;
}

double coupled_energy(const Configuration& c, const Potential& v, double coupling) {
  Accumulator ext;
  for (const Point& x : c.points) ext += v(x);
  return coupling * pair_energy(c) + static_cast<double>(c.size()) * ext.value();
}

Chain make_chain(const Configuration& c, const Potential& v, double beta, std::uint64_t seed, double step) {
  if (!(beta > 0)) throw DomainError("beta must be positive");
  if (v.d != c.d) throw ContractError("potential and configuration dimensions differ");
  Chain ch;
  ch.config = c;
  ch.beta = beta;
  ch.seed = seed;
  ch.rng = seeded_rng(seed, 0);
  ch.step = step > 0 ? step : 0.5 * std::pow(static_cast<double>(c.size()), -1.0 / c.d);
  ch.energy = hamiltonian(c, v);
  return ch;
}

double move_energy_change(const Configuration& c, const Potential& v, size_t i, const Point& y, double coupling) {
  const Point& x = c.points[i];
  Accumulator acc;
  if (coupling != 0) {
    for (size_t j = 0; j < c.size(); ++j) {
      if (j == i) continue;
      double ry = norm(y - c.points[j]);
      if (ry == 0) return inf;
      acc += coulomb_kernel_radial(ry, c.d) - coulomb_kernel_radial(norm(x - c.points[j]), c.d);
    }
  }
  return 2 * coupling * acc.value() + static_cast<double>(c.size()) * (v(y) - v(x));
}

void metropolis_sweep(Chain& chain, const Potential& v) {
  if (!(chain.beta > 0)) throw DomainError("beta must be positive");
  Configuration& c = chain.config;
  const size_t n = c.size();
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (size_t m = 0; m < n; ++m) {
    size_t i = pick(chain.rng);
    Point y = c.points[i] + chain.step * gaussian_point(chain.rng, c.d);
    double dh = move_energy_change(c, v, i, y, chain.coupling);
    double u = unif(chain.rng);
    ++chain.proposed;
    if (dh <= 0 || u < std::exp(-0.5 * chain.beta * dh)) {
      c.points[i] = y;
      chain.energy += dh;
      ++chain.accepted;
    }
  }
  ++chain.sweeps;
}

void burn_in(Chain& chain, const Potential& v, long sweeps) {
  const long block = 50;
  chain.reset_counters();
  for (long s = 0; s < sweeps; ++s) {
    metropolis_sweep(chain, v);
    if ((s + 1) % block == 0) {
      double r = chain.acceptance_rate();
      if (r < 0.25) chain.step *= std::max(0.5, r / 0.3);
      if (r > 0.40) chain.step *= std::min(2.0, r / 0.35);
      chain.reset_counters();
    }
  }
  chain.reset_counters();
  audit_energy(chain, v);
}

double audit_energy(Chain& chain, const Potential& v) {
  double exact = coupled_energy(chain.config, v, chain.coupling);
  double drift = std::fabs(exact - chain.energy);
  chain.energy = exact;
  return drift;
}

bool langevin_step(Chain& chain, const Potential& v, double dt) {
  if (!(dt > 0)) throw DomainError("Langevin step must be positive");
  if (chain.coupling != 1.0) throw ContractError("Langevin moves use the full Hamiltonian");
  Configuration& c = chain.config;
  const int d = c.d;
  const size_t n = c.size();
  const double drift = chain.beta * dt / 4;
  auto gx = hamiltonian_gradient(c, v);
  std::vector<Point> y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = c.points[i] - drift * gx[i] + std::sqrt(dt) * gaussian_point(chain.rng, d);
    for (double t : y[i])
      if (!std::isfinite(t)) throw DomainError("Langevin proposal is not finite; reduce dt");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(chain.rng);
  ++chain.proposed;
  Configuration cy(d, y);
  double hy;
  std::vector<Point> gy;
  try {
    hy = hamiltonian(cy, v);
    gy = hamiltonian_gradient(cy, v);
  } catch (const SingularityError&) {
    return false;
  }
  if (!std::isfinite(hy)) throw DomainError("Langevin proposal is not finite; reduce dt");
  // log q(x | y) - log q(y | x) for the Gaussian proposals.
  double fwd = 0, bwd = 0;
  for (size_t i = 0; i < n; ++i) {
    fwd += norm2(y[i] - (c.points[i] - drift * gx[i]));
    bwd += norm2(c.points[i] - (y[i] - drift * gy[i]));
  }
  double log_ratio = -0.5 * chain.beta * (hy - chain.energy) - (bwd - fwd) / (2 * dt);
  if (log_ratio >= 0 || u < std::exp(log_ratio)) {
    c = cy;
    chain.energy = hy;
    ++chain.accepted;
    return true;
  }
  return false;
}

// ------------------------------------------------------------ ground states

void AnnealSchedule::validate() const {
  if (betas.empty()) throw SpecError("anneal schedule needs at least one beta");
  for (size_t k = 0; k < betas.size(); ++k) {
    if (!(betas[k] > 0)) throw SpecError("anneal betas must be positive");
    if (k > 0 && !(betas[k] > betas[k - 1])) throw SpecError("anneal betas must be strictly increasing");
  }
  if (sweeps_per_level < 0 || descent_steps < 1 || restarts < 1) throw SpecError("anneal counts must be positive");
}

nlohmann::json AnnealSchedule::to_json() const {
  return {{"betas", betas}, {"sweeps_per_level", sweeps_per_level}, {"descent_steps", descent_steps},
          {"restarts", restarts}};
}

AnnealSchedule AnnealSchedule::from_json(const nlohmann::json& j) {
  AnnealSchedule s;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "betas" && it.key() != "sweeps_per_level" && it.key() != "descent_steps" && it.key() != "restarts")
      throw SpecError("unknown schedule key '" + it.key() + "'");
  if (j.contains("betas")) s.betas = j["betas"].get<std::vector<double>>();
  s.sweeps_per_level = j.value("sweeps_per_level", s.sweeps_per_level);
  s.descent_steps = j.value("descent_steps", s.descent_steps);
  s.restarts = j.value("restarts", s.restarts);
  s.validate();
  return s;
}

nlohmann::json GroundState::to_json() const {
  return {{"n", config.size()},          {"d", config.d},           {"energy", energy},
          {"gradient_norm", gradient_norm}, {"best_restart", best_restart}, {"restart_energies", restart_energies},
          {"converged", converged}};
}

namespace {

double energy_or_inf(const Configuration& c, const Potential& v) {
  try {
    return hamiltonian(c, v);
  } catch (const SingularityError&) {
    return inf;
  }
}

double inf_norm(const std::vector<Point>& g) {
  double m = 0;
  for (const Point& p : g)
    for (double t : p) m = std::max(m, std::fabs(t));
  return m;
}

double dotv(const std::vector<Point>& a, const std::vector<Point>& b) {
  Accumulator acc;
  for (size_t i = 0; i < a.size(); ++i) acc += dot(a[i], b[i]);
  return acc.value();
}

} // namespace

GroundState polish(const Configuration& start, const Potential& v, double tol, int max_steps) {
  Configuration c = start;
  const size_t n = c.size();
  const int memory = 10;
  double f = hamiltonian(c, v);
  auto g = hamiltonian_gradient(c, v);
  std::deque<std::vector<Point>> s_hist, y_hist;
  std::deque<double> rho_hist;
  const double spacing = std::pow(static_cast<double>(n), -1.0 / c.d);
  int step = 0;
  for (; step < max_steps && inf_norm(g) >= tol; ++step) {
    // Two-loop recursion for the L-BFGS direction.
    std::vector<Point> q = g;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * dotv(s_hist[k], q);
      for (size_t i = 0; i < n; ++i) q[i] += -alpha[k] * y_hist[k][i];
    }
    double scale = s_hist.empty() ? 0.1 * spacing / inf_norm(g)
                                  : dotv(s_hist.back(), y_hist.back()) / dotv(y_hist.back(), y_hist.back());
    for (auto& p : q) p = scale * p;
    for (size_t k = 0; k < s_hist.size(); ++k) {
      double b = rho_hist[k] * dotv(y_hist[k], q);
      for (size_t i = 0; i < n; ++i) q[i] += (alpha[k] - b) * s_hist[k][i];
    }
    std::vector<Point> dir(n);
    for (size_t i = 0; i < n; ++i) dir[i] = -1.0 * q[i];
    double slope = dotv(g, dir);
    if (!(slope < 0)) {
      for (size_t i = 0; i < n; ++i) dir[i] = (-0.1 * spacing / inf_norm(g)) * g[i];
      slope = dotv(g, dir);
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
    }
    // Backtracking line search; near convergence f stalls at rounding level,
    // so a step that reduces the gradient is accepted as well.
    double t = 1.0, fn = inf;
    Configuration cn = c;
    std::vector<Point> gn;
    bool ok = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      for (size_t i = 0; i < n; ++i) cn.points[i] = c.points[i] + t * dir[i];
      fn = energy_or_inf(cn, v);
      if (!std::isfinite(fn)) continue;
      if (fn <= f + 1e-4 * t * slope) {
        ok = true;
        break;
      }
      if (std::fabs(fn - f) <= 1e-13 * std::fabs(f)) {
        gn = hamiltonian_gradient(cn, v);
        if (inf_norm(gn) < inf_norm(g)) {
          ok = true;
          break;
        }
        gn.clear();
      }
    }
    if (!ok) {
      if (s_hist.empty()) break;
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      continue;
    }
    if (gn.empty()) gn = hamiltonian_gradient(cn, v);
    std::vector<Point> s(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = cn.points[i] - c.points[i];
      y[i] = gn[i] - g[i];
    }
    double sy = dotv(s, y);
    if (sy > 1e-300) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      }
    }
    c = cn;
    f = fn;
    g = gn;
  }
  GroundState gs;
  gs.config = c;
  gs.energy = hamiltonian(c, v);
  gs.gradient_norm = inf_norm(g);
  gs.converged = gs.gradient_norm < tol;
  return gs;
}

Configuration sample_measure(const EquilibriumMeasure& mu0, size_t n, std::mt19937_64& rng) {
  const int d = mu0.dim();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Point> pts;
  pts.reserve(n);
  if (mu0.radial) {
    const RadialModel& m = *mu0.radial;
    const int steps = 4000;
    std::vector<double> r(steps + 1), cdf(steps + 1, 0.0);
    for (int k = 0; k <= steps; ++k) r[k] = m.radius * k / steps;
    for (int k = 1; k <= steps; ++k) {
      auto f = [&](double t) { return sphere_area(d) * std::pow(t, d - 1) * m.density(t); };
      cdf[k] = cdf[k - 1] + 0.5 * (r[k] - r[k - 1]) * (f(r[k]) + f(r[k - 1]));
    }
    for (double& c : cdf) c /= cdf.back();
    for (size_t i = 0; i < n; ++i) {
      double u = unif(rng);
      size_t k = std::min<size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), steps);
      double a = cdf[k - 1], b = cdf[k];
      double rad = r[k - 1] + (b > a ? (u - a) / (b - a) : 0.0) * (r[k] - r[k - 1]);
      Point dir = gaussian_point(rng, d);
      double nd = norm(dir);
      pts.push_back(m.center + (rad / nd) * dir);
    }
  } else {
    const Grid& g = mu0.grid;
    std::vector<double> cdf(g.size());
    double acc = 0;
    for (size_t k = 0; k < g.size(); ++k) {
      acc += std::max(mu0.density_values[k], 0.0);
      cdf[k] = acc;
    }
    if (!(acc > 0)) throw ContractError("measure has no mass to sample");
    for (size_t i = 0; i < n; ++i) {
      double u = unif(rng) * acc;
      size_t k = std::min<size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), g.size() - 1);
      Point p = g.node(k);
      for (int a = 0; a < d; ++a) p[a] += (unif(rng) - 0.5) * g.h;
      pts.push_back(p);
    }
  }
  return Configuration(d, pts);
}

GroundState find_ground_state(size_t n, const Potential& v, const EquilibriumMeasure& mu0,
                              const AnnealSchedule& schedule, std::uint64_t seed, double tol, int threads) {
  schedule.validate();
  if (n < 1) throw DomainError("ground state needs n >= 1");
  if (mu0.dim() != v.d) throw ContractError("measure and potential dimensions differ");
  std::vector<GroundState> runs(schedule.restarts);
  parallel_for(runs.size(), threads, [&](size_t r) {
    std::mt19937_64 rng = seeded_rng(seed, 1000 + r);
    Configuration c = sample_measure(mu0, n, rng);
    Chain ch = make_chain(c, v, schedule.betas.front(), rng());
    for (double b : schedule.betas) {
      ch.beta = b;
      burn_in(ch, v, schedule.sweeps_per_level);
    }
    runs[r] = polish(ch.config, v, tol, schedule.descent_steps);
  });
  GroundState best = runs.front();
  for (size_t r = 0; r < runs.size(); ++r) {
    best.restart_energies.push_back(runs[r].energy);
    if (runs[r].energy < best.energy) {
      auto energies = best.restart_energies;
      best = runs[r];
      best.restart_energies = energies;
      best.best_restart = static_cast<int>(r);
    }
  }
  return best;
}

// ------------------------------------------------------------ Gibbs sampling

double integrated_autocorrelation(const std::vector<double>& x) {
  const size_t n = x.size();
  if (n < 4) return 1.0;
  double mean = 0;
  for (double t : x) mean += t;
  mean /= n;
  double c0 = 0;
  for (double t : x) c0 += (t - mean) * (t - mean);
  c0 /= n;
  if (c0 == 0) return 1.0;
  double tau = 1.0;
  for (size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0;
    for (size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
    tau += 2 * c / (n * c0);
    if (static_cast<double>(lag) >= 5 * tau) break;
  }
  return std::max(tau, 1.0);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const size_t m = chains.size();
  if (m < 2) return 1.0;
  const size_t len = chains.front().size();
  if (len < 2) return 1.0;
  std::vector<double> means(m), vars(m);
  double grand = 0;
  for (size_t j = 0; j < m; ++j) {
    if (chains[j].size() != len) throw ContractError("Gelman-Rubin needs equal-length chains");
    double mu = 0;
    for (double t : chains[j]) mu += t;
    mu /= len;
    double s = 0;
    for (double t : chains[j]) s += (t - mu) * (t - mu);
    means[j] = mu;
    vars[j] = s / (len - 1);
    grand += mu;
  }
  grand /= m;
  double between = 0, within = 0;
  for (size_t j = 0; j < m; ++j) {
    between += (means[j] - grand) * (means[j] - grand);
    within += vars[j];
  }
  between *= double(len) / (m - 1);
  within /= m;
  if (within == 0) return between == 0 ? 1.0 : inf;
  double pooled = (len - 1.0) / len * within + between / len;
  return std::sqrt(pooled / within);
}

nlohmann::json GibbsRun::to_json() const {
  return {{"samples", samples.size()}, {"acceptance", acceptance}, {"autocorrelation_time", autocorrelation_time},
          {"thin", thin},              {"r_hat", r_hat}};
}

GibbsRun sample_gibbs(size_t n, const Potential& v, const EquilibriumMeasure& mu0, double beta, const GibbsOptions& opt) {
  if (!(beta > 0)) throw DomainError("beta must be positive");
  if (opt.chains < 1 || opt.samples < 1 || opt.burn_in < 0 || opt.thin < 0) throw DomainError("invalid Gibbs options");
  if (opt.start != "measure" && opt.start != "ground-state") throw SpecError("unknown chain start '" + opt.start + "'");
  const bool resuming = !opt.resume.empty();
  if (resuming && (opt.resume.size() != size_t(opt.chains) || opt.thin < 1))
    throw ContractError("resuming needs one chain state per chain and a fixed thinning");
  struct Out {
    std::vector<Configuration> samples;
    std::vector<double> energies;
    double acceptance = 0, tau = 1;
    long thin = 1;
    Chain chain;
  };
  std::vector<Out> outs(opt.chains);
  parallel_for(outs.size(), opt.threads, [&](size_t c) {
    Out& o = outs[c];
    Chain& ch = o.chain;
    if (resuming) {
      ch = opt.resume[c];
      if (ch.config.size() != n || ch.beta != beta) throw ContractError("checkpoint does not match n and beta");
    } else {
      std::mt19937_64 rng = seeded_rng(opt.seed, c);
      Configuration start = sample_measure(mu0, n, rng);
      if (opt.start == "ground-state") start = polish(start, v, 1e-6, 5000).config;
      ch = make_chain(start, v, beta, rng());
      burn_in(ch, v, opt.burn_in);
    }
    if (opt.thin > 0) {
      o.thin = opt.thin;
    } else {
      std::vector<double> pilot;
      for (int s = 0; s < 400; ++s) {
        metropolis_sweep(ch, v);
        pilot.push_back(ch.energy);
      }
      o.tau = integrated_autocorrelation(pilot);
      o.thin = std::max<long>(1, static_cast<long>(std::ceil(2 * o.tau)));
    }
    ch.reset_counters();
    for (long k = 0; k < opt.samples; ++k) {
      for (long s = 0; s < o.thin; ++s) metropolis_sweep(ch, v);
      o.samples.push_back(ch.config);
      o.energies.push_back(ch.energy);
    }
    o.acceptance = ch.acceptance_rate();
    // no audit here: the cached energy stays as is so a checkpoint continues
    // bit for bit like an uninterrupted run
  });
  GibbsRun run;
  std::vector<std::vector<double>> series;
  for (const Out& o : outs) {
    run.samples.insert(run.samples.end(), o.samples.begin(), o.samples.end());
    run.energies.insert(run.energies.end(), o.energies.begin(), o.energies.end());
    run.acceptance.push_back(o.acceptance);
    run.autocorrelation_time += o.tau / outs.size();
    run.thin = std::max(run.thin, o.thin);
    series.push_back(o.energies);
    run.chains.push_back(o.chain);
  }
  run.r_hat = gelman_rubin(series);
  return run;
}

// -------------------------------------------------------------- free energy

nlohmann::json FreeEnergyProtocol::to_json() const {
  return {{"lambda_nodes", lambda_nodes}, {"chains", chains},   {"burn_in", burn_in},
          {"sweeps", sweeps},             {"batches", batches}, {"r_hat_threshold", r_hat_threshold}};
}

FreeEnergyProtocol FreeEnergyProtocol::from_json(const nlohmann::json& j) {
  FreeEnergyProtocol p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "lambda_nodes" && k != "chains" && k != "burn_in" && k != "sweeps" && k != "batches" &&
        k != "r_hat_threshold")
      throw SpecError("unknown protocol key '" + k + "'");
  }
  p.lambda_nodes = j.value("lambda_nodes", p.lambda_nodes);
  p.chains = j.value("chains", p.chains);
  p.burn_in = j.value("burn_in", p.burn_in);
  p.sweeps = j.value("sweeps", p.sweeps);
  p.batches = j.value("batches", p.batches);
  p.r_hat_threshold = j.value("r_hat_threshold", p.r_hat_threshold);
  if (p.lambda_nodes < 1 || p.chains < 1 || p.batches < 2 || p.sweeps < p.batches || p.burn_in < 0)
    throw SpecError("invalid free-energy protocol");
  return p;
}

nlohmann::json FreeEnergyEstimate::to_json() const {
  return {{"n", n},         {"beta", beta},           {"value", value},         {"error", error},
          {"reference", reference}, {"lambdas", lambdas}, {"mean_pair", mean_pair}, {"pair_error", pair_error},
          {"r_hat", r_hat}, {"flagged", flagged}};
}

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
  x.assign(m, 0);
  w.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(pi * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p = std::legendre(m, z), q = std::legendre(m - 1, z);
      double dp = m * (z * p - q) / (z * z - 1);
      double dz = p / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    double dp = m * (z * std::legendre(m, z) - std::legendre(m - 1, z)) / (z * z - 1);
    x[i] = 0.5 * (1 - z);
    w[i] = 1 / ((1 - z * z) * dp * dp);
  }
  std::vector<size_t> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> xs, ws;
  for (size_t i : order) xs.push_back(x[i]), ws.push_back(w[i]);
  x = xs, w = ws;
}

// log ∫ exp(-f(x)) dx over R^d for f radial about `center` (profile f(r)) or
// general, where f is bounded below by its value near the center.
double log_integral_exp(const Potential& v, const std::function<double(const Point&)>& f,
                        const std::function<double(double)>* radial) {
  const int d = v.d;
  if (radial) {
    const auto& fr = *radial;
    double f0 = fr(0);
    double rmax = 1;
    while (fr(rmax) - f0 < 60) rmax *= 1.5;
    auto g = [&](double r) { return sphere_area(d) * std::pow(r, d - 1) * std::exp(-(fr(r) - f0)); };
    Accumulator acc;
    const int panels = 64;
    for (int p = 0; p < panels; ++p)
      acc += gauss_kronrod<double, 31>::integrate(g, rmax * p / panels, rmax * (p + 1) / panels, 8, 1e-12);
    return std::log(acc.value()) - f0;
  }
  double f0 = f(v.center);
  double half = 1;
  auto boundary_min = [&](double a) {
    double m = inf;
    for (int k = 0; k < 64; ++k) {
      double t = 2 * pi * k / 64;
      Point p = v.center + Point{a * std::cos(t), a * std::sin(t), 0};
      m = std::min(m, f(p));
      if (d == 3) m = std::min({m, f(v.center + Point{a * std::cos(t), 0, a * std::sin(t)}),
                               f(v.center + Point{0, a * std::cos(t), a * std::sin(t)})});
    }
    return m;
  };
  while (boundary_min(half) - f0 < 60) half *= 1.5;
  const int m = d == 2 ? 400 : 120;
  const double h = 2 * half / m;
  Accumulator acc;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < (d == 3 ? m : 1); ++k) {
        Point p = v.center + Point{-half + (i + 0.5) * h, -half + (j + 0.5) * h, d == 3 ? -half + (k + 0.5) * h : 0};
        acc += std::exp(-(f(p) - f0));
      }
  return std::log(acc.value() * std::pow(h, d)) - f0;
}

} // namespace

double independent_free_energy(const Potential& v, size_t n, double beta) {
  if (!(beta > 0)) throw DomainError("beta must be positive");
  const double s = 0.5 * n * beta;
  std::function<double(const Point&)> f = [&](const Point& x) { return s * v(x); };
  double logz;
  if (v.is_radial()) {
    std::function<double(double)> fr = [&](double r) { return s * v.radial->value(r); };
    logz = log_integral_exp(v, f, &fr);
  } else {
    logz = log_integral_exp(v, f, nullptr);
  }
  return -2.0 * n / beta * logz;
}

FreeEnergyEstimate free_energy(size_t n, const Potential& v, const EquilibriumMeasure& mu0, double beta,
                               const FreeEnergyProtocol& p) {
  if (!(beta > 0)) throw DomainError("beta must be positive");
  if (n < 2) throw DomainError("free energy needs n >= 2");
  std::vector<double> lam, wts;
  gauss_legendre(p.lambda_nodes, lam, wts);
  struct Node {
    std::vector<std::vector<double>> series; // per chain
  };
  std::vector<Node> nodes(lam.size());
  for (auto& nd : nodes) nd.series.resize(p.chains);
  parallel_for(lam.size() * p.chains, p.threads, [&](size_t job) {
    size_t k = job / p.chains, c = job % p.chains;
    std::mt19937_64 rng = seeded_rng(p.seed, 7919 * k + c);
    Chain ch = make_chain(sample_measure(mu0, n, rng), v, beta, rng());
    ch.coupling = lam[k];
    ch.energy = coupled_energy(ch.config, v, ch.coupling);
    burn_in(ch, v, p.burn_in);
    auto& out = nodes[k].series[c];
    out.reserve(p.sweeps);
    for (long s = 0; s < p.sweeps; ++s) {
      metropolis_sweep(ch, v);
      out.push_back(pair_energy(ch.config));
    }
  });
  FreeEnergyEstimate est;
  est.n = n;
  est.beta = beta;
  est.reference = independent_free_energy(v, n, beta);
  Accumulator total;
  double var = 0;
  for (size_t k = 0; k < lam.size(); ++k) {
    std::vector<double> batch_means;
    const long per = p.sweeps / p.batches;
    for (const auto& s : nodes[k].series)
      for (int b = 0; b < p.batches; ++b) {
        double m = 0;
        for (long t = b * per; t < (b + 1) * per; ++t) m += s[t];
        batch_means.push_back(m / per);
      }
    double mean = 0;
    for (double m : batch_means) mean += m;
    mean /= batch_means.size();
    double sd = 0;
    for (double m : batch_means) sd += (m - mean) * (m - mean);
    sd = std::sqrt(sd / (batch_means.size() - 1));
    double se = sd / std::sqrt(static_cast<double>(batch_means.size()));
    double rh = gelman_rubin(nodes[k].series);
    est.lambdas.push_back(lam[k]);
    est.mean_pair.push_back(mean);
    est.pair_error.push_back(se);
    est.r_hat.push_back(rh);
    if (!(rh <= p.r_hat_threshold)) est.flagged = true;
    total += wts[k] * mean;
    var += wts[k] * wts[k] * se * se;
  }
  est.value = est.reference + total.value();
  est.error = std::sqrt(var);
  return est;
}

nlohmann::json FreeEnergyBounds::to_json() const {
  return {{"lower", lower},
          {"upper", upper},
          {"zeta_integral", zeta_integral},
          {"trial_energy", trial_energy},
          {"trial_entropy", trial_entropy},
          {"trial_interaction", trial_interaction}};
}

FreeEnergyBounds free_energy_bounds(size_t n, const Potential& v, const EquilibriumMeasure& mu0,
                                    const EquilibriumMeasure& trial, double beta) {
  if (!(beta > 0)) throw DomainError("beta must be positive");
  const int d = v.d;
  const double nd = static_cast<double>(n);
  FreeEnergyBounds b;
  // ∫ exp(-nβ ζ): ζ vanishes on the support and grows outside.
  const double s = nd * beta;
  std::function<double(const Point&)> f = [&](const Point& x) { return s * std::max(zeta_at(mu0, v, x), 0.0); };
  double logz;
  if (mu0.radial && v.is_radial()) {
    const Point c = mu0.radial->center;
    std::function<double(double)> fr = [&](double r) { return f(c + Point{r, 0, 0}); };
    double rs = mu0.radial->radius;
    // Exact on the support, quadrature outside.
    double inside = std::pow(rs, d) * sphere_area(d) / d;
    double rmax = rs * 1.01 + 1e-3;
    while (fr(rmax) < 60) rmax = rs + 1.5 * (rmax - rs);
    auto g = [&](double r) { return sphere_area(d) * std::pow(r, d - 1) * std::exp(-fr(r)); };
    Accumulator acc;
    const int panels = 64;
    for (int p = 0; p < panels; ++p)
      acc += gauss_kronrod<double, 31>::integrate(g, rs + (rmax - rs) * p / panels, rs + (rmax - rs) * (p + 1) / panels,
                                                  8, 1e-12);
    logz = std::log(inside + acc.value());
  } else {
    Potential shiftv = v;
    shiftv.center = mu0.center();
    logz = log_integral_exp(shiftv, f, nullptr);
  }
  b.zeta_integral = std::exp(logz);
  double log_term = d == 2 ? 0.5 * nd * std::log(nd) : 0.0;
  b.lower = nd * nd * mu0.energy(v) - log_term + dim_power(nd, d, 2.0 * (d - 1)) * next_order_lower_bound(mu0) -
            2 * nd / beta * logz;
  b.trial_energy = trial.energy(v);
  b.trial_entropy = trial.entropy();
  b.trial_interaction = trial.interaction;
  b.upper = nd * nd * b.trial_energy + 2 * nd / beta * b.trial_entropy - nd * b.trial_interaction;
  return b;
}

// ------------------------------------------------------------------- tiling

namespace {

struct Rect {
  Point lo, hi;
};

bool in_rect(const Point& p, const Rect& r, int d, double margin = 0) {
  for (int a = 0; a < d; ++a)
    if (p[a] < r.lo[a] + margin || p[a] > r.hi[a] - margin) return false;
  return true;
}

} // namespace

Configuration generate_tiled_configuration(const EquilibriumMeasure& mu0, size_t n, double r_cell, std::uint64_t seed,
                                           TilingReport* report, double r0) {
  const int d = mu0.dim();
  if (!(r_cell > 0)) throw DomainError("tile half-side must be positive");
  if (n < 1) throw DomainError("tiling needs n >= 1");
  const double nd = static_cast<double>(n);
  const double lam = std::pow(nd, 1.0 / d);
  const Point center = lam * mu0.center();
  const double extent = lam * mu0.support_radius();
  // Blown-up density n μ0(x/λ)/λ^d = μ0(x/λ) in units where the mass is n.
  auto density = [&](const Point& x) { return mu0.density((1 / lam) * x); };
  auto inside = [&](const Point& x) { return density(x) > 0; };

  double support_volume = 0;
  if (mu0.radial) {
    support_volume = sphere_area(d) / d * std::pow(mu0.radial->radius, d);
  } else {
    for (size_t k = 0; k < mu0.grid.size(); ++k)
      if (mu0.support[k]) support_volume += mu0.grid.cell_volume();
  }
  const double mean_density = nd / (support_volume * std::pow(lam, d)) ;
  if (!(r0 > 0)) r0 = 0.5 * std::pow(mean_density, -1.0 / d);

  // Mass of a box, Gauss-Legendre product rule.
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  auto box_mass = [&](const Point& lo, const Point& hi) {
    const int sub = 3;
    Accumulator acc;
    double vol = 1;
    for (int a = 0; a < d; ++a) vol *= (hi[a] - lo[a]) / sub / 2;
    for (int cx = 0; cx < sub; ++cx)
      for (int cy = 0; cy < sub; ++cy)
        for (int cz = 0; cz < (d == 3 ? sub : 1); ++cz)
          for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
              for (int k = 0; k < (d == 3 ? 4 : 1); ++k) {
                int cell[3] = {cx, cy, cz};
                int idx[3] = {i, j, k};
                Point p{0, 0, 0};
                double w = 1;
                for (int a = 0; a < d; ++a) {
                  double side = (hi[a] - lo[a]) / sub;
                  p[a] = lo[a] + side * (cell[a] + 0.5 * (1 + gx[idx[a]]));
                  w *= gw[idx[a]];
                }
                acc += w * density(p);
              }
    return acc.value() * vol;
  };
  // Whether a box lies inside the support, checked on its boundary (convex support).
  auto box_inside = [&](const Point& lo, const Point& hi) {
    const int m = 6;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j)
        for (int k = 0; k <= (d == 3 ? m : 0); ++k) {
          int idx[3] = {i, j, k};
          bool on_face = false;
          Point p{0, 0, 0};
          for (int a = 0; a < d; ++a) {
            on_face = on_face || idx[a] == 0 || idx[a] == m;
            p[a] = lo[a] + (hi[a] - lo[a]) * idx[a] / m;
          }
          if (on_face && !inside(p)) return false;
        }
    return true;
  };

  // Conventional cell of the patch lattice at the mean density: centered
  // rectangle of the triangular lattice (2 points) or the FCC cube (4 points).
  std::vector<Point> basis_frac;
  Point cell{0, 0, 0};
  if (d == 2) {
    double a = std::sqrt(2 / (std::sqrt(3.0) * mean_density));
    cell = {a, a * std::sqrt(3.0), 0};
    basis_frac = {{0, 0, 0}, {0.5, 0.5, 0}};
  } else {
    double c = std::cbrt(4 / mean_density);
    cell = {c, c, c};
    basis_frac = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
  }
  const long per_cell = static_cast<long>(basis_frac.size());
  const int kc = std::max(1, static_cast<int>(std::lround(2 * r_cell / cell[1])));
  const int jc = std::max(1, static_cast<int>(std::lround(2 * r_cell / cell[0])));
  const double height = kc * cell[1];

  std::vector<Rect> rects;
  std::vector<long> counts;
  std::vector<Point> pts;
  // Slabs of cross-section height^{d-1}, cut along x into boxes whose mass is
  // exactly the number of lattice points they will carry.
  const int slabs = static_cast<int>(std::floor(2 * extent / height));
  const double offset = -0.5 * slabs * height;
  for (int sj = 0; sj < slabs; ++sj)
    for (int sk = 0; sk < (d == 3 ? slabs : 1); ++sk) {
      Point lo = center, hi = center;
      lo[1] += offset + sj * height;
      hi[1] = lo[1] + height;
      if (d == 3) {
        lo[2] += offset + sk * height;
        hi[2] = lo[2] + height;
      }
      auto fits = [&](double a, double b) {
        Point l = lo, h = hi;
        l[0] = a, h[0] = b;
        return box_inside(l, h);
      };
      // First position on the global cell grid where a thin box fits.
      double x = center[0] - std::ceil(extent / cell[0]) * cell[0];
      while (x < center[0] + extent && !fits(x, x + 0.05 * cell[0])) x += cell[0];
      while (x < center[0] + extent) {
        Point l = lo, h = hi;
        l[0] = x;
        const long target = per_cell * jc * (d == 3 ? kc * kc : kc);
        auto mass_at = [&](double w) {
          Point hh = h;
          hh[0] = x + w;
          return box_mass(l, hh);
        };
        double a = 0.25 * jc * cell[0], b = 4.0 * jc * cell[0];
        if (!fits(x, x + a) || mass_at(b) < target) break;
        for (int it = 0; it < 80; ++it) {
          double mid = 0.5 * (a + b);
          (mass_at(mid) < target ? a : b) = mid;
        }
        const double w = 0.5 * (a + b);
        if (!fits(x, x + w)) break;
        h[0] = x + w;
        rects.push_back({l, h});
        counts.push_back(target);
        // Lattice cells stretched to the box; the quarter-cell shift keeps
        // points off the box faces.
        const Point step{w / jc, cell[1], d == 3 ? cell[2] : 0.0};
        for (int i = 0; i < jc; ++i)
          for (int j = 0; j < kc; ++j)
            for (int k = 0; k < (d == 3 ? kc : 1); ++k)
              for (const Point& f : basis_frac) {
                Point p = l;
                int idx[3] = {i, j, k};
                for (int ax = 0; ax < d; ++ax) p[ax] += (idx[ax] + f[ax] + 0.25) * step[ax];
                pts.push_back(p);
              }
        x += w;
      }
    }
  const size_t lattice_points = pts.size();
  if (pts.size() > n) throw ContractError("tiling infeasible: tiles carry more than n points");
  if (rects.empty()) throw ContractError("tiling infeasible: no tile fits inside the support; use a larger n or smaller R_cell");
  {
    Configuration patch(d, pts);
    if (pts.size() > 1 && min_separation(patch).distance < r0)
      throw ContractError("tiling infeasible: patch spacing below r0; use a larger n or R_cell");
  }

  // Boundary strip. The patch lattice is continued over the rest of the
  // support (points nearest the center first); whatever mass is still
  // missing is placed by dart throwing: admissible draws from μ0 outside the
  // tiles at distance ≥ r0, keeping the farthest of a few candidates.
  std::mt19937_64 rng = seeded_rng(seed, 77);
  const size_t strip = n - pts.size();
  {
    const Point origin{center[0] - std::ceil(extent / cell[0]) * cell[0], center[1] + offset,
                       d == 3 ? center[2] + offset : 0.0};
    const int reach = static_cast<int>(std::ceil(2 * extent / std::min(cell[0], cell[1]))) + 2;
    std::vector<Point> cand;
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j)
        for (int k = (d == 3 ? -reach : 0); k <= (d == 3 ? reach : 0); ++k)
          for (const Point& f : basis_frac) {
            Point p = origin;
            int idx[3] = {i, j, k};
            for (int ax = 0; ax < d; ++ax) p[ax] += (idx[ax] + f[ax] + 0.25) * cell[ax];
            if (norm(p - center) > extent || !inside(p)) continue;
            bool in_tile = std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return in_rect(p, r, d); });
            if (!in_tile) cand.push_back(p);
          }
    std::sort(cand.begin(), cand.end(), [&](const Point& a, const Point& b) {
      double da = norm2(a - center), db = norm2(b - center);
      return da != db ? da < db : a < b;
    });
    for (const Point& p : cand) {
      if (pts.size() >= n) break;
      bool ok = std::all_of(pts.begin(), pts.end(), [&](const Point& q) { return norm2(p - q) >= r0 * r0; });
      if (ok) pts.push_back(p);
    }
  }
  const int candidates = 32;
  long attempts = 0;
  const long max_attempts = 20000 * static_cast<long>(n - pts.size() + 1);
  std::vector<Point> pool;
  while (pts.size() < n) {
    Point best{0, 0, 0};
    double best_gap = -1;
    for (int found = 0; found < candidates;) {
      if (++attempts > max_attempts)
        throw ContractError("tiling infeasible: boundary strip is too crowded; use a larger n or a smaller R_cell");
      if (pool.empty()) {
        pool = sample_measure(mu0, 4096, rng).points;
        std::reverse(pool.begin(), pool.end());
      }
      Point p = lam * pool.back();
      pool.pop_back();
      if (std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return in_rect(p, r, d); })) continue;
      double gap = inf;
      for (const Point& q : pts) gap = std::min(gap, norm2(p - q));
      if (gap < r0 * r0) continue;
      ++found;
      if (gap > best_gap) best_gap = gap, best = p;
    }
    pts.push_back(best);
  }

  Configuration out(d, pts);
  if (report) {
    report->tiles = rects.size();
    report->lattice_points = lattice_points;
    report->boundary_points = strip;
    report->r0 = r0;
    report->min_separation = min_separation(out).distance;
  }
  for (Point& p : out.points) p = (1 / lam) * p;
  return out;
}

} // namespace cgas
