#include "sigmak/chart.hpp"

#include <cmath>
#include <numbers>

namespace sigmak::geom {

namespace {
constexpr double kPi = std::numbers::pi;

// 6th-order central stencil for profile derivatives when no analytic form.
double prof_d1(const std::function<double(double)>& f, double r, double h) {
  return (45.0 * (f(r + h) - f(r - h)) - 9.0 * (f(r + 2 * h) - f(r - 2 * h)) +
          (f(r + 3 * h) - f(r - 3 * h))) /
         (60.0 * h);
}
double prof_d2(const std::function<double(double)>& f, double r, double h) {
  return (2.0 * (f(r + 3 * h) + f(r - 3 * h)) - 27.0 * (f(r + 2 * h) + f(r - 2 * h)) +
          270.0 * (f(r + h) + f(r - h)) - 490.0 * f(r)) /
         (180.0 * h * h);
}
double prof_d3(const std::function<double(double)>& f, double r, double h) {
  return (f(r - 3 * h) / 8.0 - f(r - 2 * h) + 13.0 * f(r - h) / 8.0 - 13.0 * f(r + h) / 8.0 +
          f(r + 2 * h) - f(r + 3 * h) / 8.0) /
         (h * h * h);
}
constexpr double kProfH = 2e-3;
}  // namespace

double RadialProfile::deriv1(double r) const { return analytic ? d1(r) : prof_d1(f, r, kProfH); }
double RadialProfile::deriv2(double r) const { return analytic ? d2(r) : prof_d2(f, r, kProfH); }
double RadialProfile::deriv3(double r) const { return analytic ? d3(r) : prof_d3(f, r, kProfH); }

RadialProfile RadialProfile::zero() {
  RadialProfile p;
  p.f = [](double) { return 0.0; };
  p.d1 = p.f;
  p.d2 = p.f;
  p.d3 = p.f;
  p.analytic = true;
  p.name = "zero";
  return p;
}

RadialProfile RadialProfile::round_sphere() {
  RadialProfile p;
  p.f = [](double r) { return std::log1p(r * r) - std::log(2.0); };
  p.d1 = [](double r) { return 2.0 * r / (1.0 + r * r); };
  p.d2 = [](double r) {
    const double q = 1.0 + r * r;
    return 2.0 * (1.0 - r * r) / (q * q);
  };
  p.d3 = [](double r) {
    const double q = 1.0 + r * r;
    return 4.0 * r * (r * r - 3.0) / (q * q * q);
  };
  p.analytic = true;
  p.name = "round_sphere";
  return p;
}

RadialProfile RadialProfile::poly_r2(std::vector<double> coeff) {
  RadialProfile p;
  auto horner = [coeff](double s) {  // s = r^2
    double acc = 0.0;
    for (auto it = coeff.rbegin(); it != coeff.rend(); ++it) acc = acc * s + *it;
    return acc;
  };
  auto horner_d = [coeff](double s, int order) {
    double acc = 0.0;
    const int m = static_cast<int>(coeff.size());
    for (int j = m - 1; j >= order; --j) {
      double c = coeff[j];
      for (int d = 0; d < order; ++d) c *= (j - d);
      acc = acc * s + c;
    }
    return acc;
  };
  p.f = [horner](double r) { return horner(r * r); };
  // chain rule through s = r^2
  p.d1 = [horner_d](double r) { return 2.0 * r * horner_d(r * r, 1); };
  p.d2 = [horner_d](double r) {
    const double s = r * r;
    return 2.0 * horner_d(s, 1) + 4.0 * s * horner_d(s, 2);
  };
  p.d3 = [horner_d](double r) {
    const double s = r * r;
    return 12.0 * r * horner_d(s, 2) + 8.0 * r * s * horner_d(s, 3);
  };
  p.analytic = true;
  p.name = "poly_r2";
  return p;
}

double WField::value(const VectorXd& x) const {
  return is_radial_ ? radial_.value(x.norm()) : general_(x);
}

VectorXd WField::grad(const VectorXd& x) const {
  if (!is_radial_) return fd::gradient(general_, x, stencil_);
  const double r = x.norm();
  if (r < 1e-14) return VectorXd::Zero(x.size());
  return (radial_.deriv1(r) / r) * x;
}

MatrixXd WField::hess(const VectorXd& x) const {
  if (!is_radial_) return fd::hessian(general_, x, stencil_);
  const int n = static_cast<int>(x.size());
  const double r = x.norm();
  if (r < 1e-14) return radial_.deriv2(0.0) * MatrixXd::Identity(n, n);
  const VectorXd xh = x / r;
  const double w1 = radial_.deriv1(r), w2 = radial_.deriv2(r);
  return (w2 - w1 / r) * (xh * xh.transpose()) + (w1 / r) * MatrixXd::Identity(n, n);
}

std::vector<double> WField::third(const VectorXd& x) const {
  if (!is_radial_) return fd::third(general_, x, stencil_);
  const int n = static_cast<int>(x.size());
  std::vector<double> T(std::size_t(n) * n * n, 0.0);
  const double r = x.norm();
  if (r < 1e-14) return T;  // smooth radial profiles have vanishing odd part at 0
  const VectorXd xh = x / r;
  const double w1 = radial_.deriv1(r), w2 = radial_.deriv2(r), w3 = radial_.deriv3(r);
  const double A = w2 - w1 / r;
  auto at = [n, &T](int i, int j, int k) -> double& {
    return T[(std::size_t(i) * n + j) * n + k];
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double dij = (i == j), dik = (i == k), djk = (j == k);
        at(i, j, k) = (w3 - 3.0 * A / r) * xh[i] * xh[j] * xh[k] +
                      (A / r) * (dij * xh[k] + dik * xh[j] + djk * xh[i]);
      }
  return T;
}

void gauss_legendre(int m, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(m, 0.0);
  weights.assign(m, 0.0);
  // Newton on Legendre polynomials, standard [-1,1] rule mapped to [a,b].
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= m; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    const double dp = m * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = 0.5 * (b - a) * x + 0.5 * (a + b);
    weights[i] = (b - a) / ((1.0 - x * x) * dp * dp);
  }
}

double sphere_area(int d) {
  // |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
  return 2.0 * std::pow(kPi, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
}

std::vector<QuadNode> sphere_quadrature(int d, int n_theta, int n_phi, bool half) {
  std::vector<QuadNode> out;
  if (d == 0) {
    // S^0 = {-1, +1}
    VectorXd p(1);
    p << 1.0;
    out.push_back({p, 1.0});
    if (!half) {
      VectorXd q(1);
      q << -1.0;
      out.push_back({q, 1.0});
    }
    return out;
  }
  if (d == 1) {
    // trapezoid in the angle; spectrally accurate for smooth periodic data
    const int m = std::max(4, n_phi);
    if (!half) {
      for (int i = 0; i < m; ++i) {
        const double phi = 2.0 * kPi * i / m;
        VectorXd p(2);
        p << std::cos(phi), std::sin(phi);
        out.push_back({p, 2.0 * kPi / m});
      }
    } else {
      // upper half circle, Gauss-Legendre in the angle
      std::vector<double> th, tw;
      gauss_legendre(m, 0.0, kPi, th, tw);
      for (int i = 0; i < m; ++i) {
        VectorXd p(2);
        p << std::cos(th[i]), std::sin(th[i]);
        out.push_back({p, tw[i]});
      }
    }
    return out;
  }
  // recursive: x = (sin(theta) * omega, cos(theta)), dS = sin^{d-1}(theta) dtheta dS_{d-1};
  // the polar angle is measured from the LAST axis so that half-restriction is
  // x_last >= 0 i.e. theta in [0, pi/2].
  const auto base = sphere_quadrature(d - 1, n_theta, n_phi, false);
  std::vector<double> th, tw;
  gauss_legendre(n_theta, 0.0, half ? 0.5 * kPi : kPi, th, tw);
  for (int i = 0; i < n_theta; ++i) {
    const double s = std::sin(th[i]), c = std::cos(th[i]);
    const double wt = tw[i] * std::pow(s, d - 1);
    for (const auto& b : base) {
      VectorXd p(d + 1);
      p.head(d) = s * b.x;
      p[d] = c;
      out.push_back({p, wt * b.weight});
    }
  }
  return out;
}

double Chart::grid_spacing() const {
  switch (kind) {
    case ChartKind::general_grid: {
      double h = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) h = std::min(h, (hi[i] - lo[i]) / (res[i] - 1));
      return h;
    }
    default:
      return radius / std::max(2, radial_nodes);
  }
}

std::vector<QuadNode> Chart::interior_quadrature() const {
  std::vector<QuadNode> out;
  switch (kind) {
    case ChartKind::ball_conformally_flat:
    case ChartKind::half_ball_flat: {
      const bool half = (kind == ChartKind::half_ball_flat);
      const auto ang = sphere_quadrature(n - 1, angular_theta, angular_phi, half);
      std::vector<double> rn, rw;
      gauss_legendre(radial_nodes, 0.0, radius, rn, rw);
      out.reserve(ang.size() * rn.size());
      for (std::size_t i = 0; i < rn.size(); ++i) {
        const double jac = rw[i] * std::pow(rn[i], n - 1);
        for (const auto& a : ang) out.push_back({rn[i] * a.x, jac * a.weight});
      }
      return out;
    }
    case ChartKind::radial_profile: {
      std::vector<double> rn, rw;
      gauss_legendre(radial_nodes, 0.0, radius, rn, rw);
      const double area = sphere_area(n - 1);
      out.reserve(rn.size());
      for (std::size_t i = 0; i < rn.size(); ++i) {
        VectorXd p = VectorXd::Zero(n);
        p[n - 1] = rn[i];
        out.push_back({p, area * rw[i] * std::pow(rn[i], n - 1)});
      }
      return out;
    }
    case ChartKind::general_grid: {
      // tensor-product Simpson; each axis must have an odd node count >= 5
      std::vector<std::vector<double>> axis_w(n);
      double cell = 1.0;
      for (int a = 0; a < n; ++a) {
        const int m = res[a];
        if (m < 5 || m % 2 == 0) throw geometry_error("grid axes need odd node counts >= 5");
        const double h = (hi[a] - lo[a]) / (m - 1);
        cell *= h / 3.0;
        axis_w[a].assign(m, 2.0);
        for (int i = 1; i < m; i += 2) axis_w[a][i] = 4.0;
        axis_w[a][0] = axis_w[a][m - 1] = 1.0;
      }
      std::vector<int> idx(n, 0);
      while (true) {
        VectorXd p(n);
        double wq = cell;
        for (int a = 0; a < n; ++a) {
          p[a] = lo[a] + idx[a] * (hi[a] - lo[a]) / (res[a] - 1);
          wq *= axis_w[a][idx[a]];
        }
        out.push_back({p, wq});
        int a = 0;
        while (a < n && ++idx[a] == res[a]) idx[a++] = 0;
        if (a == n) break;
      }
      return out;
    }
  }
  throw geometry_error("unknown chart kind");
}

std::vector<QuadNode> Chart::boundary_quadrature() const {
  std::vector<QuadNode> out;
  switch (kind) {
    case ChartKind::ball_conformally_flat: {
      auto ang = sphere_quadrature(n - 1, angular_theta, angular_phi, false);
      const double jac = std::pow(radius, n - 1);
      for (auto& a : ang) out.push_back({radius * a.x, jac * a.weight});
      return out;
    }
    case ChartKind::half_ball_flat: {
      // the flat face x_n = 0: an (n-1)-ball
      const auto ang = sphere_quadrature(n - 2, angular_theta, angular_phi, false);
      std::vector<double> rn, rw;
      gauss_legendre(radial_nodes, 0.0, radius, rn, rw);
      for (std::size_t i = 0; i < rn.size(); ++i) {
        const double jac = rw[i] * std::pow(rn[i], n - 2);
        for (const auto& a : ang) {
          VectorXd p = VectorXd::Zero(n);
          p.head(n - 1) = rn[i] * a.x;
          out.push_back({p, jac * a.weight});
        }
      }
      return out;
    }
    case ChartKind::radial_profile: {
      VectorXd p = VectorXd::Zero(n);
      p[n - 1] = radius;
      out.push_back({p, sphere_area(n - 1) * std::pow(radius, n - 1)});
      return out;
    }
    case ChartKind::general_grid: {
      if (!fermi_form) throw geometry_error("boundary slice needs a Fermi-form grid chart");
      // the face x_n = lo[n-1]; Simpson over the remaining axes
      std::vector<std::vector<double>> axis_w(n - 1);
      double cell = 1.0;
      for (int a = 0; a < n - 1; ++a) {
        const int m = res[a];
        const double h = (hi[a] - lo[a]) / (m - 1);
        cell *= h / 3.0;
        axis_w[a].assign(m, 2.0);
        for (int i = 1; i < m; i += 2) axis_w[a][i] = 4.0;
        axis_w[a][0] = axis_w[a][m - 1] = 1.0;
      }
      std::vector<int> idx(n - 1, 0);
      while (true) {
        VectorXd p(n);
        double wq = cell;
        for (int a = 0; a < n - 1; ++a) {
          p[a] = lo[a] + idx[a] * (hi[a] - lo[a]) / (res[a] - 1);
          wq *= axis_w[a][idx[a]];
        }
        p[n - 1] = lo[n - 1];
        out.push_back({p, wq});
        int a = 0;
        while (a < n - 1 && ++idx[a] == res[a]) idx[a++] = 0;
        if (a == n - 1) break;
      }
      return out;
    }
  }
  throw geometry_error("unknown chart kind");
}

Chart Chart::coarsened() const {
  Chart c = *this;
  c.radial_nodes = std::max(6, radial_nodes / 2);
  c.angular_theta = std::max(4, angular_theta / 2);
  c.angular_phi = std::max(6, angular_phi / 2);
  if (kind == ChartKind::general_grid)
    for (int a = 0; a < n; ++a) c.res[a] = std::max(5, (res[a] - 1) / 2 + 1);
  return c;
}

Chart Chart::ball(int n, double radius, RadialProfile w, int radial_nodes, int n_theta,
                  int n_phi) {
  Chart c;
  c.kind = ChartKind::ball_conformally_flat;
  c.n = n;
  c.radius = radius;
  c.w = WField(std::move(w));
  c.radial_nodes = radial_nodes;
  c.angular_theta = n_theta;
  c.angular_phi = n_phi;
  return c;
}

Chart Chart::ball_general_w(int n, double radius, ScalarField w, double fd_step, int radial_nodes,
                            int n_theta, int n_phi) {
  Chart c = ball(n, radius, RadialProfile::zero(), radial_nodes, n_theta, n_phi);
  c.w = WField(std::move(w), fd_step);
  return c;
}

Chart Chart::half_ball(int n, double radius, int radial_nodes, int n_theta, int n_phi) {
  Chart c = ball(n, radius, RadialProfile::zero(), radial_nodes, n_theta, n_phi);
  c.kind = ChartKind::half_ball_flat;
  return c;
}

Chart Chart::radial(int n, double radius, RadialProfile w, int radial_nodes) {
  Chart c = ball(n, radius, std::move(w), radial_nodes, 4, 6);
  c.kind = ChartKind::radial_profile;
  return c;
}

Chart Chart::grid(int n, MetricCallback g, VectorXd lo, VectorXd hi, Eigen::VectorXi res,
                  bool fermi_form) {
  Chart c;
  c.kind = ChartKind::general_grid;
  c.n = n;
  c.metric = std::move(g);
  c.lo = std::move(lo);
  c.hi = std::move(hi);
  c.res = std::move(res);
  c.fermi_form = fermi_form;
  if (c.res.size() != n || c.lo.size() != n || c.hi.size() != n)
    throw geometry_error("grid chart: lo/hi/res must all have length n");
  return c;
}

}  // namespace sigmak::geom
