#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sigmak/variation.hpp"

using namespace sigmak;
using namespace sigmak::variation;
using conformal::ConformalState;
using geom::Chart;
using geom::RadialProfile;

namespace {
const std::vector<double> kSteps = {1e-2, 5e-3, 2.5e-3};

Chart round_ball(int n, double R, int radial = 24) {
  return Chart::ball(n, R, RadialProfile::round_sphere(), radial, 4, 6);
}

Perturbation radial_bump(double a, double b) {
  Perturbation p;
  p.phi = [a, b](const VectorXd& x) {
    const double r2 = x.squaredNorm();
    return a + b * r2 * (1.5 - r2);
  };
  return p;
}
}  // namespace

TEST_CASE("zero direction gives exactly zero derivative") {
  const ConformalState state = ConformalState::identity(round_ball(5, 0.7, 16));
  Perturbation zero;
  zero.phi = [](const VectorXd&) { return 0.0; };
  const VariationReport rep = first_variation_check(state, 2, zero, kSteps);
  CHECK(rep.fd_derivative == 0.0);
  CHECK(rep.formula_value == 0.0);
}

TEST_CASE("first variation matches the closed formula, n = 5 and 6, k = 2") {
  for (int n : {5, 6}) {
    const ConformalState state = ConformalState::identity(round_ball(n, 0.7, 24));
    const VariationReport rep = first_variation_check(state, 2, radial_bump(0.2, 0.7), kSteps);
    CHECK(std::abs(rep.formula_value) > 1e-2);  // genuinely nonzero content
    CHECK(rep.residual <= 1e-4);
    CHECK(rep.order_estimate >= 1.7);
  }
}

TEST_CASE("n = 2k: the functional is stationary in every direction") {
  const ConformalState state = ConformalState::identity(round_ball(4, 0.7, 24));
  const VariationReport rep = first_variation_check(state, 2, radial_bump(0.15, -0.5), kSteps);
  CHECK(std::abs(rep.formula_value) < 1e-12);  // coefficient 2k-n vanishes
  CHECK(std::abs(rep.fd_derivative) <= 1e-4);
}

TEST_CASE("k = 1 is rejected: no boundary density of order one") {
  const ConformalState state = ConformalState::identity(round_ball(5, 0.7, 12));
  CHECK_THROWS_AS(first_variation_check(state, 1, radial_bump(0.1, 0.2), kSteps),
                  domain_error);
}

TEST_CASE("volume-preserving projection zeroes the mean") {
  const ConformalState state = ConformalState::identity(round_ball(5, 0.7, 16));
  Perturbation p = radial_bump(0.4, 0.9);
  p.volume_preserving = true;
  // the projected direction still satisfies the variational identity
  const VariationReport rep = first_variation_check(state, 2, p, kSteps);
  CHECK(rep.residual <= 1e-4);
}

TEST_CASE("volume derivative: dV/dt = -n int phi dV") {
  for (int n : {4, 5}) {
    const ConformalState state = ConformalState::identity(round_ball(n, 0.8, 20));
    const VariationReport rep = volume_variation_check(state, radial_bump(0.3, -0.4), 1e-3);
    CHECK(rep.residual < 1e-9);
  }
}

TEST_CASE("Euler-Lagrange residuals: hemisphere is critical, perturbed metrics are not") {
  const Chart hemi = Chart::ball(4, 1.0, RadialProfile::round_sphere(), 20, 6, 8);
  const ConformalState crit = ConformalState::identity(hemi);
  const EulerLagrangeResidual at_crit = euler_lagrange_residual(crit, 2);
  CHECK(at_crit.sigma_mean == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(at_crit.interior_max < 1e-10);
  CHECK(at_crit.boundary_max < 1e-12);

  // flat half-ball: sigma_k constant (zero), boundary density zero
  const ConformalState flat = ConformalState::identity(Chart::half_ball(4, 1.0, 12, 4, 6));
  const EulerLagrangeResidual triv = euler_lagrange_residual(flat, 2);
  CHECK(triv.interior_max == 0.0);
  CHECK(triv.boundary_max == 0.0);

  const ConformalState off(
      hemi, [](const VectorXd& x) { return 0.2 * x.squaredNorm(); }, 2e-3);
  const EulerLagrangeResidual at_off = euler_lagrange_residual(off, 2);
  CHECK(at_off.interior_max > 1e-2);
}

TEST_CASE("weighted invariant: synthetic mu-power density, n = 6, k = 2") {
  // phi with vanishing normal derivative at the boundary keeps mu-powers
  // transforming with pure weight 2k-1
  const Chart cap = round_ball(6, 0.7, 20);
  const ConformalState state = ConformalState::identity(cap);
  Perturbation p;
  const double R2 = 0.49;
  p.phi = [R2](const VectorXd& x) {
    const double d = x.squaredNorm() - R2;
    return 0.3 + 0.8 * d * d;
  };
  const VariationReport rep =
      local_invariant_variation_check(state, 2, p, InvariantKind::mu_power, kSteps);
  CHECK(std::abs(rep.formula_value) > 1e-3);
  CHECK(rep.residual <= 1e-5);
}

TEST_CASE("weighted invariant: L4 vanishes identically on geodesic boundaries") {
  const Chart hemi = Chart::ball(4, 1.0, RadialProfile::round_sphere(), 12, 4, 6);
  const ConformalState state = ConformalState::identity(hemi);
  Perturbation p;
  p.phi = [](const VectorXd& x) {
    const double d = x.squaredNorm() - 1.0;
    return 0.2 * d * d - 0.1;
  };
  const VariationReport rep =
      local_invariant_variation_check(state, 2, p, InvariantKind::l4, kSteps);
  CHECK(std::abs(rep.formula_value) < 1e-12);
  CHECK(std::abs(rep.fd_derivative) < 1e-8);
}

TEST_CASE("Newton tensors of the Schouten operator are divergence free on LCF charts") {
  std::vector<VectorXd> pts;
  for (double r : {0.2, 0.45}) {
    VectorXd x = VectorXd::Zero(4);
    x[0] = 0.6 * r;
    x[2] = 0.8 * r;
    pts.push_back(x);
  }
  const Chart chart = Chart::ball(4, 1.0, RadialProfile::poly_r2({0.0, 0.4, -0.15}), 8, 4, 6);
  for (int q : {1, 2, 3}) {
    double res[2];
    for (int lvl = 0; lvl < 2; ++lvl)
      res[lvl] = newton_tensor_divergence(chart, q, 0.02 / (1 << lvl), pts);
    CHECK(res[1] < res[0] / 3.0);
    CHECK(res[1] < 1e-4);
  }
  // n = 6 spot check at one order
  std::vector<VectorXd> pts6;
  VectorXd x6 = VectorXd::Zero(6);
  x6[1] = 0.3;
  pts6.push_back(x6);
  const Chart c6 = Chart::ball(6, 1.0, RadialProfile::round_sphere(), 8, 4, 6);
  CHECK(newton_tensor_divergence(c6, 3, 5e-3, pts6) < 1e-6);
}

TEST_CASE("FD-vs-formula residual decreases at order >= 2 in the step") {
  const ConformalState state = ConformalState::identity(round_ball(5, 0.7, 20));
  const Perturbation p = radial_bump(0.25, 0.6);
  // brute single-step central differences at three step sizes
  double err[3];
  int idx = 0;
  const VariationReport ref = first_variation_check(state, 2, p, kSteps);
  for (double t : kSteps) {
    const double fp = functional_along(state, 2, p, t);
    const double fm = functional_along(state, 2, p, -t);
    err[idx++] = std::abs((fp - fm) / (2.0 * t) - ref.formula_value);
  }
  CHECK(err[1] < err[0] / 3.0);
  CHECK(err[2] < err[1] / 3.0);
}
