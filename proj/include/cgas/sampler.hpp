#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgas/core.hpp"
#include "cgas/equilibrium.hpp"
#include "cgas/potential.hpp"

namespace cgas {

// Runs f(0..count-1) on up to `threads` workers. Results must be written to
// per-index slots so the reduction order never depends on scheduling.
void parallel_for(size_t count, int threads, const std::function<void(size_t)>& f);

// Default worker count: CGAS_THREADS if set, else 1.
int default_threads();

// Markov chain targeting exp(-(β/2) H_n), or H_λ when coupling ≠ 1.
struct Chain {
  Configuration config;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;
  double step = 0.1;  // Gaussian proposal scale
  long proposed = 0;
  long accepted = 0;
  long sweeps = 0;
  double energy = 0.0;   // cached H_n
  double coupling = 1.0; // weight λ of the pair term

  double acceptance_rate() const { return proposed ? double(accepted) / double(proposed) : 0.0; }
  void reset_counters() { proposed = accepted = 0; }

  nlohmann::json to_json() const;
  static Chain from_json(const nlohmann::json& j);
};

// Chain at inverse temperature beta started from c. A zero step picks a scale
// from the typical spacing n^{-1/d}.
Chain make_chain(const Configuration& c, const Potential& v, double beta, std::uint64_t seed, double step = 0.0);

// Change of λ Σ_{i≠j} w + n Σ V when point i moves to y; +∞ when y
// coincides with another point.
double move_energy_change(const Configuration& c, const Potential& v, size_t i, const Point& y,
                          double coupling = 1.0);
// λ Σ_{i≠j} w + n Σ V.
double coupled_energy(const Configuration& c, const Potential& v, double coupling);

// n single-particle Gaussian Metropolis moves on uniformly chosen points.
void metropolis_sweep(Chain& chain, const Potential& v);

// Burn-in with the proposal scale adapted toward 25-40% acceptance. The
// scale is frozen afterwards.
void burn_in(Chain& chain, const Potential& v, long sweeps);

// Recomputes H_n, returns |cached - exact| and refreshes the cache.
double audit_energy(Chain& chain, const Potential& v);

// Metropolis-adjusted Langevin move of all points together.
// Proposal y = x - (β dt/4) ∇H(x) + √dt ξ. Returns whether it was accepted.
bool langevin_step(Chain& chain, const Potential& v, double dt);

struct AnnealSchedule {
  std::vector<double> betas{1, 4, 16, 64}; // strictly increasing
  long sweeps_per_level = 200;
  int descent_steps = 20000; // budget for the final polish
  int restarts = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static AnnealSchedule from_json(const nlohmann::json& j);
};

struct GroundState {
  Configuration config;
  double energy = 0.0;
  double gradient_norm = 0.0; // ‖∇H_n‖_∞ after the polish
  int best_restart = 0;
  std::vector<double> restart_energies;
  bool converged = false;

  nlohmann::json to_json() const;
};

// Local minimization of H_n from c by L-BFGS with a backtracking (Armijo)
// line search. Stops once ‖∇H_n‖_∞ < tol.
GroundState polish(const Configuration& c, const Potential& v, double tol, int max_steps);

// Best of `restarts` annealing runs started from i.i.d. draws of μ0, each
// polished. Global optimality is not claimed.
GroundState find_ground_state(size_t n, const Potential& v, const EquilibriumMeasure& mu0,
                              const AnnealSchedule& schedule, std::uint64_t seed, double tol = 1e-7,
                              int threads = 1);

// n i.i.d. draws from μ0.
Configuration sample_measure(const EquilibriumMeasure& mu0, size_t n, std::mt19937_64& rng);

struct GibbsOptions {
  int chains = 4;
  long burn_in = 2000;
  long samples = 250;  // kept per chain
  long thin = 0;       // sweeps between kept samples; 0 picks from the autocorrelation time
  std::uint64_t seed = 1;
  int threads = 1;
  std::string start = "measure"; // "measure" or "ground-state"
  // Continue these chains (one per chain slot) instead of starting fresh: no
  // burn-in, and `thin` must be set.
  std::vector<Chain> resume;
};

struct GibbsRun {
  std::vector<Configuration> samples; // chain-major order
  std::vector<double> energies;
  std::vector<double> acceptance;     // per chain
  double autocorrelation_time = 0.0;  // integrated, in sweeps, from H_n
  long thin = 0;
  double r_hat = 1.0;                 // across chains, on H_n
  std::vector<Chain> chains;          // final states, for checkpoints

  nlohmann::json to_json() const;
};

GibbsRun sample_gibbs(size_t n, const Potential& v, const EquilibriumMeasure& mu0, double beta,
                      const GibbsOptions& opt);

// Integrated autocorrelation time with Sokal's self-consistent window.
double integrated_autocorrelation(const std::vector<double>& x);
// Gelman-Rubin potential scale reduction over equal-length chains.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct FreeEnergyProtocol {
  int lambda_nodes = 8; // Gauss-Legendre nodes on [0, 1]
  int chains = 2;
  long burn_in = 1000;
  long sweeps = 4000;
  int batches = 20;
  double r_hat_threshold = 1.1;
  std::uint64_t seed = 1;
  int threads = 1;

  nlohmann::json to_json() const;
  static FreeEnergyProtocol from_json(const nlohmann::json& j);
};

struct FreeEnergyEstimate {
  size_t n = 0;
  double beta = 0.0;
  double value = 0.0;      // F_{n,β} = -(2/β) log Z
  double error = 0.0;      // one standard error from batch means
  double reference = 0.0;  // F at λ = 0 (no interaction)
  std::vector<double> lambdas, mean_pair, pair_error, r_hat;
  bool flagged = false;    // some λ node failed the R̂ check

  nlohmann::json to_json() const;
};

// -(2n/β) log ∫ exp(-(nβ/2) V): free energy of non-interacting particles.
double independent_free_energy(const Potential& v, size_t n, double beta);

// Thermodynamic integration over H_λ = λ Σ_{i≠j} w + n Σ V.
FreeEnergyEstimate free_energy(size_t n, const Potential& v, const EquilibriumMeasure& mu0, double beta,
                               const FreeEnergyProtocol& protocol);

struct FreeEnergyBounds {
  double lower = 0.0; // splitting bound with the ζ-entropy term
  double upper = 0.0; // Gibbs variational bound with the product trial μ^{⊗n}
  double zeta_integral = 0.0;
  double trial_energy = 0.0, trial_entropy = 0.0, trial_interaction = 0.0;

  nlohmann::json to_json() const;
};

// Lower: n²E[μ0] - (n/2) log n 1_{d=2} + n^{2-2/d} L - (2n/β) log ∫ e^{-nβζ},
// with L the next-order lower bound. Upper: n² E[μ] + (2n/β)∫μ log μ - n D(μ,μ)
// for the trial μ (normally μ_β).
FreeEnergyBounds free_energy_bounds(size_t n, const Potential& v, const EquilibriumMeasure& mu0,
                                    const EquilibriumMeasure& trial, double beta);

struct TilingReport {
  size_t tiles = 0;
  size_t lattice_points = 0;
  size_t boundary_points = 0;
  double r0 = 0.0;
  double min_separation = 0.0; // blown-up scale
};

// Blown-up support tiled with rectangles of side about 2 R_cell carrying an
// integer mass, each filled with a triangular (d=2) or FCC (d=3) patch at the
// local density; the boundary strip is filled by dart throwing with minimum
// separation r0. Returns exactly n points at the original scale.
Configuration generate_tiled_configuration(const EquilibriumMeasure& mu0, size_t n, double r_cell,
                                           std::uint64_t seed, TilingReport* report = nullptr, double r0 = 0.0);

} // namespace cgas
