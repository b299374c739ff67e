#include "cgas/background.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>

#include "cgas/core.hpp"

namespace cgas {

using boost::math::quadrature::gauss;

double numeric_ball_average(const std::function<double(const Point&)>& f, const Point& x, double ell, int d) {
  check_dim(d);
  if (!(ell > 0)) throw DomainError("smearing radius must be positive");
  using Q = gauss<double, 10>;
  using P = gauss<double, 8>;
  const int na = 24;
  Accumulator acc;
  for (size_t i = 0; i < Q::abscissa().size(); ++i) {
    for (int sgn : {-1, 1}) {
      if (i == 0 && sgn < 0 && Q::abscissa()[0] == 0) continue;
      double t = 0.5 * ell * (1 + sgn * Q::abscissa()[i]);
      double wr = 0.5 * Q::weights()[i];
      if (d == 2) {
        double radial_w = wr * 2 * t / ell;
        for (int a = 0; a < na; ++a) {
          double th = 2 * pi * (a + 0.5) / na;
          acc += radial_w * f(x + Point{t * std::cos(th), t * std::sin(th), 0}) / na;
        }
      } else {
        double radial_w = wr * 3 * t * t / (ell * ell);
        for (size_t p = 0; p < P::abscissa().size(); ++p) {
          for (int s2 : {-1, 1}) {
            double ct = s2 * P::abscissa()[p];
            double st = std::sqrt(1 - ct * ct);
            double wc = 0.5 * P::weights()[p];
            for (int a = 0; a < na; ++a) {
              double ph = 2 * pi * (a + 0.5) / na;
              acc += radial_w * wc * f(x + Point{t * st * std::cos(ph), t * st * std::sin(ph), t * ct}) / na;
            }
          }
        }
      }
    }
  }
  return acc.value();
}

namespace {

// ∬ -log|(u, v)| du dv.
double log_antiderivative(double u, double v) {
  double r2 = u * u + v * v;
  if (r2 == 0) return 0.0;
  double s = u * v * (std::log(r2) - 3);
  if (u != 0) s += u * u * std::atan(v / u);
  if (v != 0) s += v * v * std::atan(u / v);
  return -0.5 * s;
}

// log(a + r) with r = sqrt(a² + b²), stable for a < 0.
double log_a_plus_r(double a, double b2, double r) {
  if (a >= 0) return std::log(a + r);
  if (b2 == 0) return 0.0; // multiplied by a vanishing coefficient
  return std::log(b2 / (r - a));
}

// ∭ 1/|(u, v, w)| du dv dw.
double inverse_antiderivative(double u, double v, double w) {
  double r = std::sqrt(u * u + v * v + w * w);
  if (r == 0) return 0.0;
  double s = 0;
  if (u != 0 && v != 0) s += u * v * log_a_plus_r(w, u * u + v * v, r);
  if (v != 0 && w != 0) s += v * w * log_a_plus_r(u, v * v + w * w, r);
  if (w != 0 && u != 0) s += w * u * log_a_plus_r(v, w * w + u * u, r);
  if (u != 0) s -= 0.5 * u * u * std::atan(v * w / (u * r));
  if (v != 0) s -= 0.5 * v * v * std::atan(w * u / (v * r));
  if (w != 0) s -= 0.5 * w * w * std::atan(u * v / (w * r));
  return s;
}

} // namespace

UniformBoxBackground::UniformBoxBackground(int d, const Point& lo, const Point& hi, double density)
    : d_(check_dim(d)), lo_(lo), hi_(hi), m_(density) {
  for (int a = 0; a < d_; ++a)
    if (!(hi_[a] > lo_[a])) throw DomainError("box must have positive side lengths");
  if (!(m_ > 0)) throw DomainError("background density must be positive");
  if (d_ == 2) lo_[2] = hi_[2] = 0.0;
  // D(μ, μ) = m ∫_box h: the potential is smooth inside the box up to
  // corner singularities of its second derivatives, so composite Gauss is ample.
  using Q = gauss<double, 20>;
  const int panels = 3;
  std::vector<double> nodes[3], weights[3];
  for (int a = 0; a < d_; ++a) {
    double len = (hi_[a] - lo_[a]) / panels;
    for (int p = 0; p < panels; ++p) {
      double mid = lo_[a] + (p + 0.5) * len;
      for (size_t i = 0; i < Q::abscissa().size(); ++i)
        for (int sgn : {-1, 1}) {
          if (i == 0 && sgn < 0 && Q::abscissa()[0] == 0) continue;
          nodes[a].push_back(mid + sgn * 0.5 * len * Q::abscissa()[i]);
          weights[a].push_back(0.5 * len * Q::weights()[i]);
        }
    }
  }
  if (d_ == 2) {
    nodes[2] = {0.0};
    weights[2] = {1.0};
  }
  Accumulator acc;
  for (size_t k = 0; k < nodes[2].size(); ++k)
    for (size_t j = 0; j < nodes[1].size(); ++j)
      for (size_t i = 0; i < nodes[0].size(); ++i)
        acc += weights[0][i] * weights[1][j] * weights[2][k] * potential({nodes[0][i], nodes[1][j], nodes[2][k]});
  self_ = m_ * acc.value();
}

double UniformBoxBackground::mass() const {
  double v = m_;
  for (int a = 0; a < d_; ++a) v *= hi_[a] - lo_[a];
  return v;
}

double UniformBoxBackground::density(const Point& x) const {
  for (int a = 0; a < d_; ++a)
    if (x[a] < lo_[a] || x[a] > hi_[a]) return 0.0;
  return m_;
}

double UniformBoxBackground::potential(const Point& x) const {
  Accumulator acc;
  if (d_ == 2) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double u = x[0] - (a ? hi_[0] : lo_[0]);
        double v = x[1] - (b ? hi_[1] : lo_[1]);
        acc += ((a + b) % 2 ? -1.0 : 1.0) * log_antiderivative(u, v);
      }
  } else {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          double u = x[0] - (a ? hi_[0] : lo_[0]);
          double v = x[1] - (b ? hi_[1] : lo_[1]);
          double w = x[2] - (c ? hi_[2] : lo_[2]);
          acc += ((a + b + c) % 2 ? -1.0 : 1.0) * inverse_antiderivative(u, v, w);
        }
  }
  return m_ * acc.value();
}

double UniformBoxBackground::boundary_distance(const Point& x) const {
  bool inside = true;
  double out2 = 0, in = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d_; ++a) {
    double below = lo_[a] - x[a], above = x[a] - hi_[a];
    if (below > 0 || above > 0) inside = false;
    double e = std::max({below, above, 0.0});
    out2 += e * e;
    in = std::min(in, std::min(x[a] - lo_[a], hi_[a] - x[a]));
  }
  return inside ? in : std::sqrt(out2);
}

double UniformBoxBackground::smeared_potential(const Point& x, double ell) const {
  if (!(ell > 0)) throw DomainError("smearing radius must be positive");
  double dist = boundary_distance(x);
  if (dist >= ell) {
    // Outside: h is harmonic on the ball. Inside: h + c_d m |y|²/(2d) is,
    // and the ball mean of |y - x|² is d ℓ²/(d + 2).
    if (density(x) == 0) return potential(x);
    return potential(x) - space_constants(d_).c * m_ * ell * ell / (2.0 * (d_ + 2));
  }
  return numeric_ball_average([this](const Point& y) { return potential(y); }, x, ell, d_);
}

double UniformBoxBackground::ball_mass(const Point& x, double radius) const {
  if (!(radius > 0)) throw DomainError("ball radius must be positive");
  double dist = boundary_distance(x);
  double vol = d_ == 3 ? 4.0 / 3 * pi * radius * radius * radius : pi * radius * radius;
  if (dist >= radius) return density(x) > 0 ? m_ * vol : 0.0;
  // Straddling: midpoint rule on a fine lattice of the bounding cube.
  const int k = 64;
  double h = 2 * radius / k;
  long inside = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < (d_ == 3 ? k : 1); ++l) {
        Point y{x[0] - radius + (i + 0.5) * h, x[1] - radius + (j + 0.5) * h,
                d_ == 3 ? x[2] - radius + (l + 0.5) * h : 0.0};
        if (norm(y - x) < radius && density(y) > 0) ++inside;
      }
  return m_ * inside * (d_ == 3 ? h * h * h : h * h);
}

} // namespace cgas
