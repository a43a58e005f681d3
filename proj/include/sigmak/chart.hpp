#ifndef SIGMAK_CHART_HPP
#define SIGMAK_CHART_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sigmak/fd.hpp"
#include "sigmak/types.hpp"

namespace sigmak::geom {

enum class ChartKind { half_ball_flat, ball_conformally_flat, radial_profile, general_grid };

using ScalarField = std::function<double(const VectorXd&)>;
using MetricCallback = std::function<MatrixXd(const VectorXd&)>;

// Radial profile with optional analytic derivatives (value, d/dr, d2, d3).
// Profiles lacking analytic derivatives fall back to high-order 1D stencils.
struct RadialProfile {
  std::function<double(double)> f;
  std::function<double(double)> d1, d2, d3;
  bool analytic = false;
  std::string name = "custom";

  double value(double r) const { return f(r); }
  double deriv1(double r) const;
  double deriv2(double r) const;
  double deriv3(double r) const;

  static RadialProfile zero();
  static RadialProfile round_sphere();  // w(r) = ln((1+r^2)/2), g = e^{-2w} delta round
  static RadialProfile poly_r2(std::vector<double> coeff);  // sum_j c_j r^{2j}
};

// Conformal exponent field w with derivatives; either a smooth radial profile
// (chain rule, exact when the profile is analytic) or a general scalar field
// differentiated by stencils whose step follows the chart resolution.
class WField {
public:
  WField() : radial_(RadialProfile::zero()), is_radial_(true) {}
  explicit WField(RadialProfile radial) : radial_(std::move(radial)), is_radial_(true) {}
  WField(ScalarField general, double fd_step)
      : radial_(RadialProfile::zero()), is_radial_(false), general_(std::move(general)) {
    stencil_.h = fd_step;
  }

  bool is_radial() const { return is_radial_; }
  double value(const VectorXd& x) const;
  VectorXd grad(const VectorXd& x) const;
  MatrixXd hess(const VectorXd& x) const;
  std::vector<double> third(const VectorXd& x) const;  // n^3 symmetric

  const RadialProfile& radial() const { return radial_; }

private:
  RadialProfile radial_;
  bool is_radial_ = true;
  ScalarField general_;
  fd::Stencil stencil_;
};

struct QuadNode {
  VectorXd x;
  double weight;  // flat Lebesgue (interior) or flat surface (boundary) weight
};

// Gauss-Legendre nodes/weights on [a, b].
void gauss_legendre(int m, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

// Product quadrature on the unit sphere S^{d} in R^{d+1} (flat measure).
// half == true restricts to the hemisphere with last coordinate >= 0.
std::vector<QuadNode> sphere_quadrature(int d, int n_theta, int n_phi, bool half = false);

struct Chart {
  ChartKind kind = ChartKind::ball_conformally_flat;
  int n = 4;
  double radius = 1.0;
  WField w;

  // general_grid only
  MetricCallback metric;
  VectorXd lo, hi;
  Eigen::VectorXi res;
  bool fermi_form = false;  // metric = dx_n^2 + g_ab(x) dx^a dx^b, boundary at x_n = lo[n-1]

  // quadrature resolution for ball-type kinds
  int radial_nodes = 32;
  int angular_theta = 8;
  int angular_phi = 16;

  double grid_spacing() const;  // h used by stencil-based evaluations

  std::vector<QuadNode> interior_quadrature() const;
  std::vector<QuadNode> boundary_quadrature() const;

  // A copy with roughly half the resolution per axis; used for Richardson
  // style quadrature error estimates.
  Chart coarsened() const;

  static Chart ball(int n, double radius, RadialProfile w, int radial_nodes = 32,
                    int n_theta = 8, int n_phi = 16);
  static Chart ball_general_w(int n, double radius, ScalarField w, double fd_step,
                              int radial_nodes = 32, int n_theta = 8, int n_phi = 16);
  static Chart half_ball(int n, double radius, int radial_nodes = 32, int n_theta = 8,
                         int n_phi = 16);
  static Chart radial(int n, double radius, RadialProfile w, int radial_nodes = 64);
  static Chart grid(int n, MetricCallback g, VectorXd lo, VectorXd hi, Eigen::VectorXi res,
                    bool fermi_form = false);
};

double sphere_area(int d);  // |S^d|

}  // namespace sigmak::geom

#endif
