// Equilibrium measure of a general confining potential through the obstacle
// problem for its potential h: h ≥ c - V/2, -Δh ≥ 0, equality where μ0 > 0.

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgas/equilibrium.hpp"

namespace cgas {

namespace {

struct Level {
  Grid grid;
  std::vector<double> u;        // discrete potential
  std::vector<double> obstacle; // -V/2 at nodes (the obstacle is c + obstacle)
  std::vector<double> ghost;    // Σ of Dirichlet values of out-of-box neighbors
};

void set_boundary(Level& lv, const FarField& far) {
  const Grid& g = lv.grid;
  lv.ghost.assign(g.size(), 0.0);
  const int d = g.d;
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) {
        int c[3] = {i, j, k};
        size_t idx = g.index(i, j, k);
        Point p = g.node(idx);
        double s = 0;
        for (int a = 0; a < d; ++a) {
          for (int dir : {-1, 1}) {
            int t = c[a] + dir;
            if (t < 0 || t >= g.n[a]) {
              Point q = p;
              q[a] += dir * g.h;
              s += far(q);
            }
          }
        }
        lv.ghost[idx] = s;
      }
}

// Projected SOR until the sup-norm change of a sweep drops below tol.
// Returns the number of sweeps; `change` receives the last sweep's change.
long relax(Level& lv, double c, double omega, double tol, long budget, double& change) {
  const Grid& g = lv.grid;
  const int d = g.d;
  const int n0 = g.n[0], n1 = g.n[1], n2 = g.n[2];
  const size_t s1 = n0, s2 = static_cast<size_t>(n0) * n1;
  const double inv = 1.0 / (2 * d);
  double* u = lv.u.data();
  const double* ob = lv.obstacle.data();
  const double* gh = lv.ghost.data();
  long sweeps = 0;
  change = std::numeric_limits<double>::infinity();
  while (sweeps < budget) {
    double mx = 0;
    for (int k = 0; k < n2; ++k)
      for (int j = 0; j < n1; ++j) {
        size_t row = (static_cast<size_t>(k) * n1 + j) * n0;
        for (int i = 0; i < n0; ++i) {
          size_t idx = row + i;
          double s = gh[idx];
          if (i > 0) s += u[idx - 1];
          if (i + 1 < n0) s += u[idx + 1];
          if (j > 0) s += u[idx - s1];
          if (j + 1 < n1) s += u[idx + s1];
          if (d == 3) {
            if (k > 0) s += u[idx - s2];
            if (k + 1 < n2) s += u[idx + s2];
          }
          double old = u[idx];
          double nv = old + omega * (s * inv - old);
          double psi = c + ob[idx];
          if (nv < psi) nv = psi;
          u[idx] = nv;
          mx = std::max(mx, std::fabs(nv - old));
        }
      }
    ++sweeps;
    change = mx;
    if (mx < tol) break;
  }
  return sweeps;
}

// μ = max(0, -Δ_h u)/c_d on contact nodes, zero elsewhere.
std::vector<double> recover_density(const Level& lv, double c) {
  const Grid& g = lv.grid;
  const int d = g.d;
  const double cd = space_constants(d).c;
  std::vector<double> mu(g.size(), 0.0);
  const double tiny = 1e-12 * (1 + std::fabs(c));
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) {
        size_t idx = g.index(i, j, k);
        if (lv.u[idx] > c + lv.obstacle[idx] + tiny) continue;
        int co[3] = {i, j, k};
        double s = lv.ghost[idx];
        for (int a = 0; a < d; ++a)
          for (int dir : {-1, 1}) {
            int t = co[a] + dir;
            if (t < 0 || t >= g.n[a]) continue;
            int cc[3] = {i, j, k};
            cc[a] = t;
            s += lv.u[g.index(cc[0], cc[1], cc[2])];
          }
        double lap = (2 * d * lv.u[idx] - s) / (g.h * g.h);
        mu[idx] = std::max(0.0, lap) / cd;
      }
  return mu;
}

double mass_of(const Level& lv, double c) { return grid_integral(lv.grid, recover_density(lv, c)); }

Level make_level(const Grid& g, const Potential& v) {
  Level lv;
  lv.grid = g;
  lv.obstacle.resize(g.size());
  for (size_t k = 0; k < g.size(); ++k) lv.obstacle[k] = -0.5 * v(g.node(k));
  lv.u.assign(g.size(), 0.0);
  return lv;
}

} // namespace

EquilibriumMeasure solve_equilibrium_obstacle(const Potential& v, const Grid& grid, double tol,
                                              const ObstacleOptions& opt) {
  const int d = check_dim(v.d);
  if (grid.d != d) throw ContractError("grid dimension differs from potential dimension");
  if (!v.confining) throw ContractError("obstacle solver needs a confining potential");
  if (!(tol > 0)) throw DomainError("solver tolerance must be positive");

  // Level hierarchy, coarsest first.
  Point box_center = 0.5 * (grid.lo + grid.hi());
  double half = 0.5 * grid.n[0] * grid.h;
  for (int a = 1; a < d; ++a)
    if (grid.n[a] != grid.n[0]) throw ContractError("obstacle solver expects a cubic grid");
  std::vector<Grid> grids{grid};
  int max_coarse = opt.coarse_levels < 0 ? 8 : opt.coarse_levels;
  while (static_cast<int>(grids.size()) <= max_coarse && grids.front().n[0] / 2 >= 24) {
    Grid c = Grid::centered(d, box_center, half, grids.front().h * 2);
    grids.insert(grids.begin(), c);
  }

  FarField far = FarField::monopole(d, v.center);
  long budget = opt.max_sweeps;
  nlohmann::json level_stats = nlohmann::json::array();
  double c = 0, slope = 0;
  Level prev;
  bool have_prev = false;
  double last_change = 0;

  for (size_t L = 0; L < grids.size(); ++L) {
    Level lv = make_level(grids[L], v);
    set_boundary(lv, far);
    const int N = lv.grid.n[0];
    const double omega = opt.omega > 0 ? opt.omega : 2.0 / (1.0 + std::sin(pi / N));
    long used = 0;

    auto solve_at = [&](double cc) {
      double change;
      long s = relax(lv, cc, omega, tol, budget, change);
      used += s;
      budget -= s;
      last_change = change;
      if (budget <= 0)
        throw ConvergenceError("obstacle solver exhausted its sweep budget (last change " +
                                   std::to_string(change) + ")",
                               change);
      return mass_of(lv, cc) - 1.0;
    };

    if (!have_prev) {
      // Initial Robin guess: min of (far field + V/2) over the nodes.
      double guess = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < lv.grid.size(); ++k) {
        Point p = lv.grid.node(k);
        if (norm(p - far.centroid) < lv.grid.h) continue;
        guess = std::min(guess, far(p) - lv.obstacle[k]);
      }
      for (size_t k = 0; k < lv.grid.size(); ++k) {
        Point p = lv.grid.node(k);
        double fv = norm(p - far.centroid) < lv.grid.h ? guess : far(p);
        lv.u[k] = std::max(fv, guess + lv.obstacle[k]);
      }
      // Bracket the root of mass(c) - 1, then bisect/secant (Illinois).
      double step = 0.1 * (1 + std::fabs(guess));
      double a = guess, fa = solve_at(a);
      double b = a, fb = fa;
      int expand = 0;
      while (fa * fb > 0) {
        b = fa < 0 ? b + step : b - step;
        step *= 2;
        fb = solve_at(b);
        if (fa * fb > 0) {
          a = b;
          fa = fb;
        }
        if (++expand > 40) throw ConvergenceError("could not bracket the Robin constant", fb);
      }
      int side = 0;
      for (int it = 0; it < opt.max_robin_iterations; ++it) {
        double m = (a * fb - b * fa) / (fb - fa);
        double fm = solve_at(m);
        if (std::fabs(fm) < opt.mass_tol * 10 || std::fabs(b - a) < 1e-13) {
          c = m;
          break;
        }
        if (fm * fb < 0) {
          a = b;
          fa = fb;
          side = 0;
        } else {
          if (side == 1) fa *= 0.5;
          side = 1;
        }
        b = m;
        fb = fm;
        c = m;
      }
      slope = std::fabs(fb - fa) / std::max(std::fabs(b - a), 1e-300);
    } else {
      for (size_t k = 0; k < lv.grid.size(); ++k)
        lv.u[k] = std::max(grid_interpolate(prev.grid, prev.u, lv.grid.node(k)), c + lv.obstacle[k]);
      // Secant from the coarse-level Robin constant and slope.
      double c0 = c, f0 = solve_at(c0);
      if (std::fabs(f0) > opt.mass_tol) {
        double c1 = c0 - f0 / std::max(slope, 1e-12);
        double f1 = solve_at(c1);
        int it = 0;
        while (std::fabs(f1) > opt.mass_tol && it++ < opt.max_robin_iterations) {
          double denom = f1 - f0;
          double c2 = denom != 0 ? c1 - f1 * (c1 - c0) / denom : c1 - f1 / slope;
          c0 = c1;
          f0 = f1;
          c1 = c2;
          f1 = solve_at(c1);
        }
        if (std::fabs(f1) > opt.mass_tol)
          throw ConvergenceError("Robin constant iteration did not reach the mass tolerance", f1);
        if (c1 != c0) slope = std::fabs((f1 - f0) / (c1 - c0));
        c = c1;
      } else {
        c = c0;
      }
    }
    // Boundary data for the next level from this level's measure.
    std::vector<double> mu = recover_density(lv, c);
    level_stats.push_back({{"h", lv.grid.h}, {"cells", N}, {"omega", omega}, {"sweeps", used}, {"robin", c}});
    far = FarField::of_grid_density(lv.grid, mu);
    far.mass = 1.0;
    prev = std::move(lv);
    have_prev = true;
  }

  std::vector<double> mu = recover_density(prev, c);
  double raw = grid_integral(prev.grid, mu);
  for (double& x : mu) x /= raw;
  EquilibriumMeasure out;
  out.grid = prev.grid;
  out.density_values = std::move(mu);
  double mx = *std::max_element(out.density_values.begin(), out.density_values.end());
  out.support.assign(out.grid.size(), 0);
  for (size_t k = 0; k < out.grid.size(); ++k) out.support[k] = out.density_values[k] > 1e-8 * mx;
  out.robin_constant = c;
  out.node_potential = prev.u;
  out.model = "obstacle";
  out.interaction = coulomb_energy_on_grid(out.grid, out.density_values);
  out.far_field = FarField::of_grid_density(out.grid, out.density_values);
  out.stats = {{"levels", level_stats},
               {"robin_constant", c},
               {"raw_mass", raw},
               {"last_sweep_change", last_change},
               {"tolerance", tol}};
  return out;
}

} // namespace cgas
