#include "cgas/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <sstream>

#include "cgas/config_io.hpp"

namespace cgas {

double micro_radius(size_t n, int d) {
  check_dim(d);
  if (n < 1) throw DomainError("micro radius needs n >= 1");
  return std::pow(static_cast<double>(n), -1.0 / (d + 2));
}

double charge_discrepancy(const Configuration& c, const Background& mu0, const Point& x, double radius) {
  if (!(radius > 0)) throw DomainError("ball radius must be positive");
  if (mu0.dim() != c.d) throw ContractError("measure and configuration dimensions differ");
  long count = 0;
  const double r2 = radius * radius;
  for (const Point& p : c.points)
    if (norm2(p - x) < r2) ++count;
  return static_cast<double>(count) - static_cast<double>(c.size()) * mu0.ball_mass(x, radius);
}

Interval wilson_interval(long k, long m, double z) {
  if (m <= 0) return {0.0, 1.0};
  const double p = double(k) / m, z2 = z * z;
  const double den = 1 + z2 / m;
  const double mid = (p + z2 / (2 * m)) / den;
  const double half = z * std::sqrt(p * (1 - p) / m + z2 / (4.0 * m * m)) / den;
  return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == m ? 1.0 : std::min(1.0, mid + half)};
}

nlohmann::json TailTable::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"radius", r.radius},
                  {"lambda", r.lambda},
                  {"scale", r.scale},
                  {"exceed", r.exceed},
                  {"trials", r.trials},
                  {"probability", r.probability},
                  {"ci", {r.ci.lo, r.ci.hi}}});
  return {{"rows", rs}, {"centers", centers.size()}, {"few_samples", few_samples}, {"warning", warning}};
}

std::string TailTable::to_csv() const {
  std::ostringstream os;
  os << "radius,lambda,scale,exceed,trials,probability,ci_lo,ci_hi\n";
  for (const auto& r : rows)
    os << format_double(r.radius) << ',' << format_double(r.lambda) << ',' << r.scale << ',' << r.exceed << ','
       << r.trials << ',' << format_double(r.probability) << ',' << format_double(r.ci.lo) << ','
       << format_double(r.ci.hi) << '\n';
  return os.str();
}

std::vector<Point> interior_centers(const EquilibriumMeasure& mu0, double radius) {
  const int d = mu0.dim();
  const Point c = mu0.center();
  const double reach = mu0.support_radius();
  std::vector<Point> out;
  const int m = static_cast<int>(std::floor(reach / radius));
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j)
      for (int k = (d == 3 ? -m : 0); k <= (d == 3 ? m : 0); ++k) {
        Point x = c + radius * Point{double(i), double(j), double(k)};
        bool ok = true;
        // The ball must sit inside the support: probe its boundary.
        const int probes = 16;
        for (int a = 0; a < probes && ok; ++a) {
          double t = 2 * pi * a / probes;
          ok = mu0.density(x + radius * Point{std::cos(t), std::sin(t), 0}) > 0;
          if (ok && d == 3)
            ok = mu0.density(x + radius * Point{std::cos(t), 0, std::sin(t)}) > 0 &&
                 mu0.density(x + radius * Point{0, std::cos(t), std::sin(t)}) > 0;
        }
        if (ok) out.push_back(x);
      }
  return out;
}

TailTable fluctuation_tails(const std::vector<Configuration>& samples, const EquilibriumMeasure& mu0,
                            const std::vector<double>& radii, const std::vector<double>& lambdas,
                            const std::vector<Point>& centers) {
  if (samples.empty()) throw ContractError("fluctuation tails need samples");
  const int d = mu0.dim();
  const size_t n = samples.front().size();
  TailTable t;
  if (samples.size() < 1000) {
    t.few_samples = true;
    t.warning = "fewer than 1000 samples: intervals are wide";
  }
  const double rn = micro_radius(n, d);
  for (double r : radii) {
    if (!(r > 0)) throw DomainError("radii must be positive");
    std::vector<Point> cs = centers.empty() ? interior_centers(mu0, r) : centers;
    if (cs.empty()) throw ContractError("no admissible centers for radius " + format_double(r));
    if (t.centers.empty()) t.centers = cs;
    std::vector<double> expected(cs.size());
    for (size_t k = 0; k < cs.size(); ++k) expected[k] = static_cast<double>(n) * mu0.ball_mass(cs[k], r);
    std::vector<double> dev;
    dev.reserve(samples.size() * cs.size());
    for (const Configuration& c : samples) {
      if (c.size() != n || c.d != d) throw ContractError("samples must share n and d");
      for (size_t k = 0; k < cs.size(); ++k) {
        long count = 0;
        for (const Point& p : c.points)
          if (norm2(p - cs[k]) < r * r) ++count;
        dev.push_back(std::fabs(count - expected[k]));
      }
    }
    for (double lam : lambdas) {
      TailRow row;
      row.radius = r;
      row.lambda = lam;
      row.scale = r <= 2 * rn ? "micro" : "macro";
      const double thr = lam * n * std::pow(r, d);
      row.trials = static_cast<long>(dev.size());
      row.exceed = std::count_if(dev.begin(), dev.end(), [&](double x) { return x >= thr; });
      row.probability = double(row.exceed) / row.trials;
      row.ci = wilson_interval(row.exceed, row.trials);
      t.rows.push_back(row);
    }
  }
  return t;
}

nlohmann::json DensityProfile::to_json() const {
  return {{"grid", grid.to_json()}, {"l1", l1}, {"weak_proxy", weak_proxy}, {"bumps", bump_values.size()}};
}

namespace {

// ∫ exp(-|x-c|²/(2s²)) dμ0 on the measure grid. The bump factorizes over the
// axes, so it is tabulated per axis and truncated at 9s.
double bump_mass(const EquilibriumMeasure& mu0, const Point& c, double s) {
  const Grid& g = mu0.grid;
  std::array<std::vector<double>, 3> f;
  std::array<int, 3> lo{0, 0, 0}, hi{1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (a >= g.d) {
      f[a] = {1.0};
      continue;
    }
    lo[a] = std::max(0, static_cast<int>(std::floor((c[a] - 9 * s - g.lo[a]) / g.h)));
    hi[a] = std::min(g.n[a], static_cast<int>(std::ceil((c[a] + 9 * s - g.lo[a]) / g.h)) + 1);
    f[a].assign(g.n[a], 0.0);
    for (int i = lo[a]; i < hi[a]; ++i) {
      double t = g.lo[a] + (i + 0.5) * g.h - c[a];
      f[a][i] = std::exp(-t * t / (2 * s * s));
    }
  }
  Accumulator acc;
  for (int l = lo[2]; l < hi[2]; ++l)
    for (int j = lo[1]; j < hi[1]; ++j) {
      const double fjl = f[1][j] * f[2][l];
      const double* rho = &mu0.density_values[g.index(0, j, l)];
      double row = 0;
      for (int i = lo[0]; i < hi[0]; ++i) row += f[0][i] * rho[i];
      acc += fjl * row;
    }
  return acc.value() * g.cell_volume();
}

} // namespace

DensityProfile density_profile(const std::vector<Configuration>& samples, const EquilibriumMeasure& mu0,
                               const Grid& grid) {
  if (samples.empty()) throw ContractError("density profile needs samples");
  const int d = mu0.dim();
  if (grid.d != d) throw ContractError("grid and measure dimensions differ");
  DensityProfile prof;
  prof.grid = grid;
  prof.empirical.assign(grid.size(), 0.0);
  const double n = static_cast<double>(samples.front().size());
  const double total = n * samples.size();
  double outside = 0;
  for (const Configuration& c : samples)
    for (const Point& p : c.points) {
      if (!grid.contains(p)) {
        outside += 1 / total;
        continue;
      }
      size_t idx = 0;
      int ijk[3] = {0, 0, 0};
      for (int a = 0; a < d; ++a)
        ijk[a] = std::clamp(static_cast<int>(std::floor((p[a] - grid.lo[a]) / grid.h)), 0, grid.n[a] - 1);
      idx = grid.index(ijk[0], ijk[1], ijk[2]);
      prof.empirical[idx] += 1 / (total * grid.cell_volume());
    }
  // μ0 cell averages from 3^d sub-samples per cell.
  Accumulator l1;
  double covered = 0;
  for (size_t k = 0; k < grid.size(); ++k) {
    Point x = grid.node(k);
    double avg = 0;
    int cnt = 0;
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j)
        for (int l = (d == 3 ? -1 : 0); l <= (d == 3 ? 1 : 0); ++l) {
          avg += mu0.density(x + (grid.h / 3) * Point{double(i), double(j), double(l)});
          ++cnt;
        }
    avg /= cnt;
    covered += avg * grid.cell_volume();
    l1 += std::fabs(prof.empirical[k] - avg) * grid.cell_volume();
  }
  // Mass of either measure outside the grid counts fully.
  prof.l1 = l1.value() + outside + std::max(0.0, 1 - covered);

  // Gaussian bumps φ = exp(-|x-c|²/(2s²)); ‖∇φ‖_2² = (d/2) π^{d/2} s^{d-2}.
  const Point center = mu0.center();
  const double reach = mu0.support_radius();
  for (double f : {0.1, 0.2, 0.4}) {
    const double s = f * reach;
    const double grad = std::sqrt(0.5 * d * std::pow(pi, 0.5 * d) * std::pow(s, d - 2));
    const int m = static_cast<int>(std::floor(reach / s));
    for (int i = -m; i <= m; ++i)
      for (int j = -m; j <= m; ++j)
        for (int l = (d == 3 ? -m : 0); l <= (d == 3 ? m : 0); ++l) {
          Point c = center + s * Point{double(i), double(j), double(l)};
          auto phi = [&](const Point& x) { return std::exp(-norm2(x - c) / (2 * s * s)); };
          const double expected = n * bump_mass(mu0, c, s);
          Accumulator emp;
          for (const Configuration& cfg : samples)
            for (const Point& p : cfg.points) emp += phi(p);
          const double val = std::fabs(emp.value() / samples.size() - expected) / (n * grad);
          prof.bump_values.push_back(val);
          prof.bump_scales.push_back(s);
          prof.bump_centers.push_back(c);
          prof.weak_proxy = std::max(prof.weak_proxy, val);
        }
  }
  return prof;
}

// ------------------------------------------------------------- Delaunay / ψ6

namespace {

struct Tri {
  size_t a, b, c;
  double cx, cy, r2;
};

Tri make_tri(const std::vector<Point>& p, size_t a, size_t b, size_t c) {
  const double ax = p[a][0], ay = p[a][1], bx = p[b][0], by = p[b][1], qx = p[c][0], qy = p[c][1];
  const double dd = 2 * (ax * (by - qy) + bx * (qy - ay) + qx * (ay - by));
  if (dd == 0) return {a, b, c, 0, 0, std::numeric_limits<double>::infinity()};
  const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = qx * qx + qy * qy;
  const double ux = (a2 * (by - qy) + b2 * (qy - ay) + c2 * (ay - by)) / dd;
  const double uy = (a2 * (qx - bx) + b2 * (ax - qx) + c2 * (bx - ax)) / dd;
  return {a, b, c, ux, uy, (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy)};
}

double cross2(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Indices of points on the convex hull, collinear boundary points included.
std::vector<unsigned char> hull_mask(const std::vector<Point>& pts) {
  const size_t n = pts.size();
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return pts[a][0] != pts[b][0] ? pts[a][0] < pts[b][0] : pts[a][1] < pts[b][1];
  });
  std::vector<size_t> h(2 * n);
  size_t k = 0;
  const double eps = 1e-12;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[idx[i]]) < -eps) --k;
    h[k++] = idx[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[idx[i]]) < -eps) --k;
    h[k++] = idx[i];
  }
  std::vector<unsigned char> mask(n, 0);
  for (size_t i = 0; i < k; ++i) mask[h[i]] = 1;
  return mask;
}

} // namespace

std::vector<std::array<size_t, 3>> delaunay_triangles(const std::vector<Point>& input) {
  const size_t n = input.size();
  if (n < 3) throw ContractError("triangulation needs at least 3 points");
  std::vector<Point> p = input;
  double lo[2] = {p[0][0], p[0][1]}, hi[2] = {p[0][0], p[0][1]};
  for (const Point& q : p)
    for (int a = 0; a < 2; ++a) lo[a] = std::min(lo[a], q[a]), hi[a] = std::max(hi[a], q[a]);
  const double span = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  if (span == 0) throw ContractError("triangulation of coincident points");
  const double mx = 0.5 * (lo[0] + hi[0]), my = 0.5 * (lo[1] + hi[1]);
  p.push_back({mx - 50 * span, my - 50 * span, 0});
  p.push_back({mx + 50 * span, my - 50 * span, 0});
  p.push_back({mx, my + 50 * span, 0});
  std::vector<Tri> tris{make_tri(p, n, n + 1, n + 2)};
  const double tol = 1e-12 * span * span;
  for (size_t i = 0; i < n; ++i) {
    const double x = p[i][0], y = p[i][1];
    std::vector<std::pair<size_t, size_t>> edges;
    std::vector<Tri> keep;
    keep.reserve(tris.size() + 4);
    for (const Tri& t : tris) {
      double dx = x - t.cx, dy = y - t.cy;
      if (dx * dx + dy * dy < t.r2 - tol) {
        edges.push_back({t.a, t.b});
        edges.push_back({t.b, t.c});
        edges.push_back({t.c, t.a});
      } else {
        keep.push_back(t);
      }
    }
    // Boundary of the cavity: edges seen once.
    for (auto& e : edges)
      if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(edges.begin(), edges.end());
    for (size_t k = 0; k < edges.size(); ++k) {
      bool dup = (k + 1 < edges.size() && edges[k] == edges[k + 1]) || (k > 0 && edges[k] == edges[k - 1]);
      if (!dup) keep.push_back(make_tri(p, edges[k].first, edges[k].second, i));
    }
    tris.swap(keep);
  }
  std::vector<std::array<size_t, 3>> out;
  for (const Tri& t : tris)
    if (t.a < n && t.b < n && t.c < n) out.push_back({t.a, t.b, t.c});
  if (out.empty()) throw ContractError("degenerate point set: no triangles");
  return out;
}

BondOrder bond_order_psi6(const Configuration& c) {
  if (c.d != 2) throw ContractError("bond order ψ6 is planar");
  const size_t n = c.size();
  if (n < 7) throw ContractError("bond order needs at least 7 points");
  BondOrder b;
  // Bond weights are Voronoi facet lengths (distance between the circumcenters
  // of the two triangles sharing the edge). Hull edges get weight 1; only
  // interior points are reported and their edges are never on the hull.
  std::vector<std::map<size_t, double>> nb(n);
  try {
    std::map<std::pair<size_t, size_t>, std::vector<Point>> centers;
    for (const auto& t : delaunay_triangles(c.points)) {
      Tri cc = make_tri(c.points, t[0], t[1], t[2]);
      for (int e = 0; e < 3; ++e) {
        size_t i = t[e], j = t[(e + 1) % 3];
        centers[{std::min(i, j), std::max(i, j)}].push_back({cc.cx, cc.cy, 0});
      }
    }
    for (const auto& [edge, cs] : centers) {
      double wgt = cs.size() == 2 ? norm(cs[0] - cs[1]) : 1.0;
      nb[edge.first][edge.second] = wgt;
      nb[edge.second][edge.first] = wgt;
    }
  } catch (const ContractError&) {
    b.delaunay = false;
  }
  if (!b.delaunay) {
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, size_t>> dist;
      for (size_t j = 0; j < n; ++j)
        if (j != i) dist.push_back({norm2(c.points[j] - c.points[i]), j});
      std::partial_sort(dist.begin(), dist.begin() + 6, dist.end());
      for (int k = 0; k < 6; ++k) nb[i][dist[k].second] = 1.0;
    }
  }
  b.interior = hull_mask(c.points);
  for (auto& f : b.interior) f = !f;
  b.psi.assign(n, 0.0);
  b.bulk.assign(n, 0);
  double sb = 0, si = 0;
  size_t cb = 0, ci = 0;
  for (size_t i = 0; i < n; ++i) {
    std::complex<double> acc = 0;
    double total = 0;
    for (const auto& [j, wgt] : nb[i]) {
      Point dx = c.points[j] - c.points[i];
      acc += wgt * std::polar(1.0, 6 * std::atan2(dx[1], dx[0]));
      total += wgt;
    }
    b.psi[i] = total > 0 ? std::abs(acc) / total : 0.0;
    if (!b.interior[i]) continue;
    si += b.psi[i], ++ci;
    bool bulk = std::all_of(nb[i].begin(), nb[i].end(), [&](const auto& e) { return b.interior[e.first] != 0; });
    b.bulk[i] = bulk;
    if (bulk) sb += b.psi[i], ++cb;
  }
  b.interior_mean = ci ? si / ci : 0.0;
  b.bulk_mean = cb ? sb / cb : b.interior_mean;
  return b;
}

// ------------------------------------------------------- periodic density

nlohmann::json PeriodDensityReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"side", r.side}, {"ratio", r.ratio}, {"envelope", r.envelope}, {"within", r.within}});
  return {{"density", density}, {"rows", rs}, {"converges", converges}};
}

PeriodDensityReport period_density_check(const TorusConfiguration& tc, const std::vector<double>& sides) {
  const int d = tc.dim();
  const Lattice& lat = tc.periods;
  PeriodDensityReport rep;
  rep.density = static_cast<double>(tc.size()) / tc.volume();
  double diam = 0;
  for (int i = -1; i <= 1; i += 2)
    for (int j = -1; j <= 1; j += 2)
      for (int k = -1; k <= 1; k += 2) diam = std::max(diam, norm(lat.cartesian({0.5 * i, 0.5 * j, 0.5 * k})));
  diam *= 2;
  auto rec = lat.reciprocal();
  double prev = std::numeric_limits<double>::infinity();
  for (double side : sides) {
    if (!(side > 0)) throw DomainError("cube sides must be positive");
    const double half = side / 2;
    int bound[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a)
      bound[a] = static_cast<int>(std::ceil((half * std::sqrt(double(d)) + diam) * norm(rec[a]) / (2 * pi))) + 1;
    long count = 0;
    for (int i = -bound[0]; i <= bound[0]; ++i)
      for (int j = -bound[1]; j <= bound[1]; ++j)
        for (int k = -bound[2]; k <= bound[2]; ++k) {
          Point shift = lat.cartesian({double(i), double(j), double(k)});
          for (const Point& a : tc.points) {
            Point x = a + shift;
            bool in = true;
            for (int ax = 0; ax < d && in; ++ax) in = x[ax] >= -half && x[ax] < half;
            if (in) ++count;
          }
        }
    PeriodDensityRow row;
    row.side = side;
    row.ratio = count / std::pow(side, d);
    // Miscounted points sit in cells crossing the faces: a layer of width 2·diam.
    row.envelope = rep.density * 2 * d * 2 * diam * std::pow(side + 2 * diam, d - 1) / std::pow(side, d);
    row.within = std::fabs(row.ratio - rep.density) <= row.envelope * (1 + 1e-12);
    rep.converges = rep.converges && row.within && row.envelope <= prev;
    prev = row.envelope;
    rep.rows.push_back(row);
  }
  return rep;
}

} // namespace cgas
