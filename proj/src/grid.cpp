#include "cgas/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <mutex>

#include <boost/math/quadrature/gauss.hpp>
#include <fftw3.h>

namespace cgas {

Grid Grid::centered(int d, const Point& center, double half_width, double h) {
  check_dim(d);
  if (!(h > 0) || !(half_width > 0)) throw DomainError("grid spacing and half-width must be positive");
  int cells = std::max(2, static_cast<int>(std::ceil(2 * half_width / h - 1e-9)));
  Grid g;
  g.d = d;
  g.h = 2 * half_width / cells;
  g.n = {cells, cells, d == 3 ? cells : 1};
  g.lo = {center[0] - half_width, center[1] - half_width, d == 3 ? center[2] - half_width : 0.0};
  return g;
}

std::array<int, 3> Grid::coords(size_t idx) const {
  int i = static_cast<int>(idx % n[0]);
  size_t rest = idx / n[0];
  int j = static_cast<int>(rest % n[1]);
  int k = static_cast<int>(rest / n[1]);
  return {i, j, k};
}

Point Grid::node(size_t idx) const {
  auto c = coords(idx);
  Point p{lo[0] + (c[0] + 0.5) * h, lo[1] + (c[1] + 0.5) * h, 0.0};
  if (d == 3) p[2] = lo[2] + (c[2] + 0.5) * h;
  return p;
}

Point Grid::hi() const {
  return {lo[0] + n[0] * h, lo[1] + n[1] * h, d == 3 ? lo[2] + n[2] * h : 0.0};
}

bool Grid::contains(const Point& x) const {
  Point top = hi();
  for (int k = 0; k < d; ++k)
    if (x[k] < lo[k] || x[k] > top[k]) return false;
  return true;
}

nlohmann::json Grid::to_json() const {
  return {{"d", d},
          {"lo", {lo[0], lo[1], lo[2]}},
          {"h", h},
          {"n", {n[0], n[1], n[2]}}};
}

Grid Grid::from_json(const nlohmann::json& j) {
  Grid g;
  g.d = check_dim(j.at("d").get<int>());
  auto lo = j.at("lo");
  auto n = j.at("n");
  for (int k = 0; k < 3; ++k) {
    g.lo[k] = lo.at(k).get<double>();
    g.n[k] = n.at(k).get<int>();
  }
  g.h = j.at("h").get<double>();
  return g;
}

double grid_integral(const Grid& g, const std::vector<double>& f) {
  Accumulator acc;
  for (double v : f) acc += v;
  return acc.value() * g.cell_volume();
}

double grid_interpolate(const Grid& g, const std::vector<double>& f, const Point& x) {
  int base[3] = {0, 0, 0};
  double frac[3] = {0, 0, 0};
  for (int k = 0; k < g.d; ++k) {
    double t = (x[k] - g.lo[k]) / g.h - 0.5;
    t = std::clamp(t, 0.0, static_cast<double>(g.n[k] - 1));
    int b = std::min(static_cast<int>(std::floor(t)), g.n[k] - 2);
    base[k] = std::max(b, 0);
    frac[k] = t - base[k];
  }
  double v = 0;
  const int corners = g.d == 3 ? 8 : 4;
  for (int c = 0; c < corners; ++c) {
    double wgt = 1;
    int idx[3] = {0, 0, 0};
    for (int k = 0; k < g.d; ++k) {
      int bit = (c >> k) & 1;
      idx[k] = std::min(base[k] + bit, g.n[k] - 1);
      wgt *= bit ? frac[k] : 1 - frac[k];
    }
    if (wgt != 0) v += wgt * f[g.index(idx[0], idx[1], idx[2])];
  }
  return v;
}

double grid_cell_value(const Grid& g, const std::vector<double>& f, const Point& x) {
  int idx[3] = {0, 0, 0};
  for (int k = 0; k < g.d; ++k) {
    double t = (x[k] - g.lo[k]) / g.h;
    if (t < 0 || t >= g.n[k]) return 0.0;
    idx[k] = static_cast<int>(t);
  }
  return f[g.index(idx[0], idx[1], idx[2])];
}

double grid_l1_distance(const Grid& g, const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != g.size() || b.size() != g.size()) throw ContractError("grid field sizes differ");
  Accumulator acc;
  for (size_t k = 0; k < a.size(); ++k) acc += std::fabs(a[k] - b[k]);
  return acc.value() * g.cell_volume();
}

namespace {

constexpr int kNear = 2;

double kernel_unit(const double* z, int d) {
  double r2 = 0;
  for (int k = 0; k < d; ++k) r2 += z[k] * z[k];
  return d == 3 ? 1.0 / std::sqrt(r2) : -0.5 * std::log(r2);
}

using Integrand = std::function<double(const double*)>;

// Tensor Gauss–Legendre over a box, subdivided `split` times per axis.
double box_gauss(int d, const double* a, const double* b, const Integrand& f, int split) {
  using Q = boost::math::quadrature::gauss<double, 20>;
  const auto& ab = Q::abscissa();
  const auto& wt = Q::weights();
  // Full symmetric rule on [-1,1].
  std::vector<double> x, w;
  for (size_t i = 0; i < ab.size(); ++i) {
    if (ab[i] == 0) {
      x.push_back(0);
      w.push_back(wt[i]);
    } else {
      x.push_back(ab[i]);
      w.push_back(wt[i]);
      x.push_back(-ab[i]);
      w.push_back(wt[i]);
    }
  }
  const int q = static_cast<int>(x.size());
  Accumulator acc;
  int cells = 1;
  for (int k = 0; k < d; ++k) cells *= split;
  for (int c = 0; c < cells; ++c) {
    double lo[3], half[3];
    int rem = c;
    double jac = 1;
    for (int k = 0; k < d; ++k) {
      int part = rem % split;
      rem /= split;
      double width = (b[k] - a[k]) / split;
      lo[k] = a[k] + part * width;
      half[k] = 0.5 * width;
      jac *= half[k];
    }
    int total = 1;
    for (int k = 0; k < d; ++k) total *= q;
    for (int t = 0; t < total; ++t) {
      int r = t;
      double z[3];
      double wgt = jac;
      for (int k = 0; k < d; ++k) {
        int i = r % q;
        r /= q;
        z[k] = lo[k] + half[k] * (1 + x[i]);
        wgt *= w[i];
      }
      acc += wgt * f(z);
    }
  }
  return acc.value();
}

// Integral over the box with corner v (a vertex) and opposite corner o, for an
// integrand singular at v. Duffy decomposition into d pyramids; the radial
// variable is graded to tame the logarithm in d=2.
double box_duffy(int d, const double* v, const double* o, const Integrand& f) {
  using Q = boost::math::quadrature::gauss<double, 20>;
  const auto& ab = Q::abscissa();
  const auto& wt = Q::weights();
  std::vector<double> x, w; // rule on [0,1]
  for (size_t i = 0; i < ab.size(); ++i) {
    x.push_back(0.5 * (1 + ab[i]));
    w.push_back(0.5 * wt[i]);
    if (ab[i] != 0) {
      x.push_back(0.5 * (1 - ab[i]));
      w.push_back(0.5 * wt[i]);
    }
  }
  const int q = static_cast<int>(x.size());
  double side[3], jac = 1;
  for (int k = 0; k < d; ++k) {
    side[k] = o[k] - v[k];
    jac *= std::fabs(side[k]);
  }
  const int grade = d == 2 ? 3 : 1;
  Accumulator acc;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= q;
  for (int m = 0; m < d; ++m) {
    for (int t = 0; t < total; ++t) {
      int r = t;
      int idx[3];
      for (int k = 0; k < d; ++k) {
        idx[k] = r % q;
        r /= q;
      }
      double sig = x[idx[0]];
      double rho = std::pow(sig, grade);
      double drho = grade * std::pow(sig, grade - 1);
      double wgt = w[idx[0]] * drho * std::pow(rho, d - 1) * jac;
      double u[3];
      int slot = 1;
      for (int k = 0; k < d; ++k) {
        if (k == m) {
          u[k] = rho;
        } else {
          u[k] = rho * x[idx[slot]];
          wgt *= w[idx[slot]];
          ++slot;
        }
      }
      double z[3];
      for (int k = 0; k < d; ++k) z[k] = v[k] + side[k] * u[k];
      acc += wgt * f(z);
    }
  }
  return acc.value();
}

struct KernelTables {
  // Indexed by offsets in [-kNear, kNear]^d.
  std::vector<double> point_cell, cell_cell;
  int d;
  size_t slot(const int* j) const {
    size_t s = 0;
    for (int k = 0; k < d; ++k) s = s * (2 * kNear + 1) + (j[k] + kNear);
    return s;
  }
};

KernelTables build_tables(int d) {
  KernelTables t;
  t.d = d;
  int side = 2 * kNear + 1;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= side;
  t.point_cell.assign(total, 0);
  t.cell_cell.assign(total, 0);
  for (int s = 0; s < total; ++s) {
    int j[3] = {0, 0, 0};
    int r = s;
    for (int k = d - 1; k >= 0; --k) {
      j[k] = r % side - kNear;
      r /= side;
    }
    bool zero = true, near = true;
    for (int k = 0; k < d; ++k) {
      zero = zero && j[k] == 0;
      near = near && std::abs(j[k]) <= 1;
    }
    // ∫ over the unit cell centered at j of w.
    {
      auto f = [&](const double* z) { return kernel_unit(z, d); };
      double a[3], b[3];
      for (int k = 0; k < d; ++k) {
        a[k] = j[k] - 0.5;
        b[k] = j[k] + 0.5;
      }
      double v;
      if (zero) {
        v = 0;
        for (int o = 0; o < (1 << d); ++o) {
          double org[3] = {0, 0, 0}, opp[3];
          for (int k = 0; k < d; ++k) opp[k] = ((o >> k) & 1) ? 0.5 : -0.5;
          v += box_duffy(d, org, opp, f);
        }
      } else {
        v = box_gauss(d, a, b, f, 2);
      }
      t.point_cell[t.slot(j)] = v;
    }
    // Average of w(j + z) under the tent weight on [-1,1]^d.
    {
      auto f = [&](const double* z) {
        double y[3], tent = 1;
        for (int k = 0; k < d; ++k) {
          y[k] = j[k] + z[k];
          tent *= 1 - std::fabs(z[k]);
        }
        return tent == 0 ? 0.0 : kernel_unit(y, d) * tent;
      };
      double v = 0;
      for (int o = 0; o < (1 << d); ++o) {
        double a[3], b[3];
        bool has_vertex = near;
        for (int k = 0; k < d; ++k) {
          bool pos = (o >> k) & 1;
          a[k] = pos ? 0.0 : -1.0;
          b[k] = pos ? 1.0 : 0.0;
          double sing = -j[k];
          if (sing < a[k] || sing > b[k]) has_vertex = false;
        }
        if (has_vertex) {
          double vtx[3], opp[3];
          for (int k = 0; k < d; ++k) {
            vtx[k] = -j[k];
            opp[k] = vtx[k] == a[k] ? b[k] : a[k];
          }
          v += box_duffy(d, vtx, opp, f);
        } else {
          v += box_gauss(d, a, b, f, 2);
        }
      }
      t.cell_cell[t.slot(j)] = v;
    }
  }
  return t;
}

const KernelTables& tables(int d) {
  static std::once_flag once2, once3;
  static KernelTables t2, t3;
  if (d == 2) {
    std::call_once(once2, [] { t2 = build_tables(2); });
    return t2;
  }
  std::call_once(once3, [] { t3 = build_tables(3); });
  return t3;
}

enum class KernelKind { PointCell, CellCell };

// h-scaled kernel value for integer offset j.
double scaled_kernel(const Grid& g, const int* j, KernelKind kind) {
  const int d = g.d;
  bool near = true;
  double r2 = 0;
  for (int k = 0; k < d; ++k) {
    near = near && std::abs(j[k]) <= kNear;
    r2 += static_cast<double>(j[k]) * j[k];
  }
  double unit;
  if (near) {
    const KernelTables& t = tables(d);
    unit = kind == KernelKind::PointCell ? t.point_cell[t.slot(j)] : t.cell_cell[t.slot(j)];
  } else {
    unit = d == 3 ? 1.0 / std::sqrt(r2) : -0.5 * std::log(r2);
  }
  // Point-cell values are integrals over a unit cell; cell-cell values are averages.
  double vol = g.cell_volume();
  if (d == 3) {
    return kind == KernelKind::PointCell ? vol * unit / g.h : vol * vol * unit / g.h;
  }
  return kind == KernelKind::PointCell ? vol * (unit - std::log(g.h)) : vol * vol * (unit - std::log(g.h));
}

std::vector<double> convolve(const Grid& g, const std::vector<double>& rho, KernelKind kind) {
  if (rho.size() != g.size()) throw ContractError("density size does not match grid");
  const int d = g.d;
  int m[3] = {2 * g.n[0], 2 * g.n[1], d == 3 ? 2 * g.n[2] : 1};
  size_t total = static_cast<size_t>(m[0]) * m[1] * m[2];
  int last = m[0]; // fastest-varying axis
  size_t complex_total = total / last * (last / 2 + 1);
  double* a = fftw_alloc_real(total);
  double* b = fftw_alloc_real(total);
  fftw_complex* fa = fftw_alloc_complex(complex_total);
  fftw_complex* fb = fftw_alloc_complex(complex_total);
  // FFTW wants row-major with the last dimension fastest: index (x0 slowest).
  int dims[3];
  for (int k = 0; k < d; ++k) dims[k] = m[d - 1 - k];
  auto at = [&](int i, int j, int k) { return (static_cast<size_t>(k) * m[1] + j) * m[0] + i; };
  std::fill(a, a + total, 0.0);
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) a[at(i, j, k)] = rho[g.index(i, j, k)];
  for (int k = 0; k < m[2]; ++k)
    for (int j = 0; j < m[1]; ++j)
      for (int i = 0; i < m[0]; ++i) {
        int off[3] = {i < g.n[0] ? i : i - m[0], j < g.n[1] ? j : j - m[1], k < g.n[2] ? k : k - m[2]};
        b[at(i, j, k)] = scaled_kernel(g, off, kind);
      }
  fftw_plan pa = fftw_plan_dft_r2c(d, dims, a, fa, FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_r2c(d, dims, b, fb, FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_execute(pb);
  for (size_t i = 0; i < complex_total; ++i) {
    double re = fa[i][0] * fb[i][0] - fa[i][1] * fb[i][1];
    double im = fa[i][0] * fb[i][1] + fa[i][1] * fb[i][0];
    fa[i][0] = re;
    fa[i][1] = im;
  }
  fftw_plan pc = fftw_plan_dft_c2r(d, dims, fa, a, FFTW_ESTIMATE);
  fftw_execute(pc);
  std::vector<double> out(g.size());
  double scale = 1.0 / static_cast<double>(total);
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) out[g.index(i, j, k)] = a[at(i, j, k)] * scale;
  fftw_destroy_plan(pa);
  fftw_destroy_plan(pb);
  fftw_destroy_plan(pc);
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

} // namespace

std::vector<double> coulomb_potential_on_grid(const Grid& g, const std::vector<double>& density) {
  tables(g.d);
  std::lock_guard<std::mutex> lock(fftw_mutex()); // planner is not thread-safe
  return convolve(g, density, KernelKind::PointCell);
}

double coulomb_energy_on_grid(const Grid& g, const std::vector<double>& density) {
  tables(g.d);
  std::vector<double> psi;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    psi = convolve(g, density, KernelKind::CellCell);
  }
  Accumulator acc;
  for (size_t k = 0; k < psi.size(); ++k) acc += density[k] * psi[k];
  return acc.value();
}

} // namespace cgas
