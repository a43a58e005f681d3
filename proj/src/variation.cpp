#include "sigmak/variation.hpp"

#include <cmath>

namespace sigmak::variation {

using conformal::functional_Fk;
using conformal::FunctionalValue;
using geom::Chart;

namespace {

ConformalState shifted_state(const ConformalState& state, const ScalarField& phi, double t) {
  const geom::WField u0 = state.u_field();
  const Chart& chart = state.chart();
  return ConformalState(
      chart, [u0, phi, t](const VectorXd& x) { return u0.value(x) + t * phi(x); },
      std::max(2e-3, chart.grid_spacing()));
}

// volume-weighted mean of phi in the state's metric
double mean_of(const ConformalState& state, const ScalarField& phi) {
  const int n = state.n();
  std::vector<double> num, den;
  for (const auto& q : state.chart().interior_quadrature()) {
    const double dv = std::exp(-n * state.total_exponent(q.x)) * q.weight;
    num.push_back(phi(q.x) * dv);
    den.push_back(dv);
  }
  return pairwise_sum(num) / pairwise_sum(den);
}

ScalarField projected(const ConformalState& state, const Perturbation& p) {
  if (!p.volume_preserving) return p.phi;
  const double mean = mean_of(state, p.phi);
  ScalarField phi = p.phi;
  return [phi, mean](const VectorXd& x) { return phi(x) - mean; };
}

double order_from_triplet(double d1, double d2, double d3) {
  const double a = std::abs(d1 - d2), b = std::abs(d2 - d3);
  if (b < 1e-15) return 8.0;  // differences at rounding level
  return std::log2(a / b);
}

}  // namespace

double functional_along(const ConformalState& state, int k, const Perturbation& phi, double t) {
  const ScalarField p = projected(state, phi);
  return functional_Fk(shifted_state(state, p, t), k).total;
}

VariationReport first_variation_check(const ConformalState& state, int k,
                                      const Perturbation& phi,
                                      const std::vector<double>& steps) {
  if (k < 2) throw domain_error("first variation needs k >= 2; no k = 1 boundary density");
  const int n = state.n();
  const ScalarField p = projected(state, phi);

  std::vector<double> diffs;
  for (double t : steps) {
    const double fp = functional_Fk(shifted_state(state, p, t), k).total;
    const double fm = functional_Fk(shifted_state(state, p, -t), k).total;
    diffs.push_back((fp - fm) / (2.0 * t));
  }
  VariationReport rep;
  rep.step = steps.back();
  rep.fd_derivative = diffs.back();
  if (diffs.size() >= 2)
    rep.fd_derivative = (4.0 * diffs.back() - diffs[diffs.size() - 2]) / 3.0;
  if (diffs.size() >= 3)
    rep.order_estimate = order_from_triplet(diffs[diffs.size() - 3], diffs[diffs.size() - 2],
                                            diffs.back());

  // (2k - n)(int sigma_k phi dV + oint B^k phi dS) at the base state
  std::vector<double> iterms;
  for (const auto& q : state.chart().interior_quadrature()) {
    const double dv = std::exp(-n * state.total_exponent(q.x)) * q.weight;
    iterms.push_back(symfun::sigma_k(state.schouten_hat_spectrum(q.x), k) * p(q.x) * dv);
  }
  std::vector<double> bterms;
  for (const auto& bn : geom::build_boundary(state.chart()).nodes) {
    const auto bd = state.boundary_data(bn);
    bterms.push_back(conformal::boundary_Bk_umbilic(bd.AT, bd.mu_hat, n, k) * p(bn.x) *
                     bd.ds_scale * bn.weight_flat);
  }
  rep.formula_value = (2.0 * k - n) * (pairwise_sum(iterms) + pairwise_sum(bterms));
  rep.residual =
      std::abs(rep.fd_derivative - rep.formula_value) / std::max(1.0, std::abs(rep.formula_value));
  return rep;
}

EulerLagrangeResidual euler_lagrange_residual(const ConformalState& state, int k) {
  const int n = state.n();
  EulerLagrangeResidual out;
  std::vector<double> num, den;
  std::vector<double> sig;
  for (const auto& q : state.chart().interior_quadrature()) {
    const double dv = std::exp(-n * state.total_exponent(q.x)) * q.weight;
    const double s = symfun::sigma_k(state.schouten_hat_spectrum(q.x), k);
    sig.push_back(s);
    num.push_back(s * dv);
    den.push_back(dv);
  }
  out.sigma_mean = pairwise_sum(num) / pairwise_sum(den);
  out.interior.reserve(sig.size());
  for (double s : sig) {
    out.interior.push_back(s - out.sigma_mean);
    out.interior_max = std::max(out.interior_max, std::abs(s - out.sigma_mean));
  }
  for (const auto& bn : geom::build_boundary(state.chart()).nodes) {
    const auto bd = state.boundary_data(bn);
    const double b = conformal::boundary_Bk_umbilic(bd.AT, bd.mu_hat, n, k);
    out.boundary.push_back(b);
    out.boundary_max = std::max(out.boundary_max, std::abs(b));
  }
  return out;
}

namespace {

double invariant_integral(const ConformalState& state, int k, InvariantKind kind,
                          const geom::BoundarySlice& slice) {
  const int n = state.n();
  std::vector<double> terms;
  for (const auto& bn : slice.nodes) {
    double density = 0.0;
    if (kind == InvariantKind::l4) {
      if (n != 4 || k != 2) throw domain_error("the L4 invariant lives at n = 4, k = 2");
      density = conformal::gauss_bonnet4(state, bn).L4;
    } else {
      density = std::pow(state.boundary_data(bn).mu_hat, 2 * k - 1);
    }
    const double ds = std::exp(-(n - 1) * (bn.wv + state.u_value(bn.x))) * bn.weight_flat;
    terms.push_back(density * ds);
  }
  return pairwise_sum(terms);
}

}  // namespace

VariationReport local_invariant_variation_check(const ConformalState& state, int k,
                                                const Perturbation& phi, InvariantKind kind,
                                                const std::vector<double>& steps) {
  const int n = state.n();
  const ScalarField p = projected(state, phi);
  const geom::BoundarySlice slice = geom::build_boundary(state.chart());

  std::vector<double> diffs;
  for (double t : steps) {
    const double fp = invariant_integral(shifted_state(state, p, t), k, kind, slice);
    const double fm = invariant_integral(shifted_state(state, p, -t), k, kind, slice);
    diffs.push_back((fp - fm) / (2.0 * t));
  }
  VariationReport rep;
  rep.step = steps.back();
  rep.fd_derivative = diffs.back();
  if (diffs.size() >= 2)
    rep.fd_derivative = (4.0 * diffs.back() - diffs[diffs.size() - 2]) / 3.0;
  if (diffs.size() >= 3)
    rep.order_estimate = order_from_triplet(diffs[diffs.size() - 3], diffs[diffs.size() - 2],
                                            diffs.back());

  std::vector<double> terms;
  for (const auto& bn : slice.nodes) {
    double density = 0.0;
    if (kind == InvariantKind::l4)
      density = conformal::gauss_bonnet4(state, bn).L4;
    else
      density = std::pow(state.boundary_data(bn).mu_hat, 2 * k - 1);
    const double ds = std::exp(-(n - 1) * (bn.wv + state.u_value(bn.x))) * bn.weight_flat;
    terms.push_back(density * p(bn.x) * ds);
  }
  rep.formula_value = (2.0 * k - n) * pairwise_sum(terms);
  rep.residual =
      std::abs(rep.fd_derivative - rep.formula_value) / std::max(1.0, std::abs(rep.formula_value));
  return rep;
}

VariationReport volume_variation_check(const ConformalState& state, const Perturbation& phi,
                                       double step) {
  const int n = state.n();
  const ScalarField p = phi.phi;  // volume check uses the raw direction
  auto vol = [&](double t) {
    const ConformalState s = shifted_state(state, p, t);
    std::vector<double> terms;
    for (const auto& q : s.chart().interior_quadrature())
      terms.push_back(std::exp(-n * s.total_exponent(q.x)) * q.weight);
    return pairwise_sum(terms);
  };
  VariationReport rep;
  rep.step = step;
  const double d1 = (vol(step) - vol(-step)) / (2.0 * step);
  const double d2 = (vol(step / 2) - vol(-step / 2)) / step;
  rep.fd_derivative = (4.0 * d2 - d1) / 3.0;
  std::vector<double> terms;
  for (const auto& q : state.chart().interior_quadrature())
    terms.push_back(p(q.x) * std::exp(-n * state.total_exponent(q.x)) * q.weight);
  rep.formula_value = -n * pairwise_sum(terms);
  rep.residual =
      std::abs(rep.fd_derivative - rep.formula_value) / std::max(1.0, std::abs(rep.formula_value));
  return rep;
}

double newton_tensor_divergence(const Chart& chart, int q, double fd_h,
                                const std::vector<VectorXd>& points) {
  const int n = chart.n;
  auto tq_field = [&](const VectorXd& x) {
    const geom::Jet3 j = geom::exponent_jet(chart.w, x, false);
    const MatrixXd M = std::exp(2.0 * j.v) * geom::conf_schouten(j);  // g^{-1} A
    return symfun::newton_tensor(symfun::SymTensor(M), q).entries;
  };
  double worst = 0.0;
  for (const VectorXd& x : points) {
    const geom::Jet3 j = geom::exponent_jet(chart.w, x, false);
    const geom::Tensor3 G = geom::conf_christoffel(j);
    const MatrixXd S = tq_field(x);
    // FD of the tensor field along each axis
    std::vector<MatrixXd> dS(n);
    for (int a = 0; a < n; ++a) {
      auto at = [&](double t) {
        VectorXd y = x;
        y[a] += t;
        return tq_field(y);
      };
      dS[a] = (8.0 * (at(fd_h) - at(-fd_h)) - (at(2 * fd_h) - at(-2 * fd_h))) / (12.0 * fd_h);
    }
    for (int jcol = 0; jcol < n; ++jcol) {
      double div = 0.0;
      for (int i = 0; i < n; ++i) {
        div += dS[i](i, jcol);
        for (int m = 0; m < n; ++m)
          div += G(i, i, m) * S(m, jcol) - G(m, i, jcol) * S(i, m);
      }
      worst = std::max(worst, std::abs(div));
    }
  }
  return worst;
}

}  // namespace sigmak::variation
