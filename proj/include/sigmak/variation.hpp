#ifndef SIGMAK_VARIATION_HPP
#define SIGMAK_VARIATION_HPP

#include "sigmak/conformal.hpp"

namespace sigmak::variation {

using conformal::ConformalState;
using geom::ScalarField;

struct Perturbation {
  ScalarField phi;
  bool volume_preserving = false;  // project out the mean when set
};

struct VariationReport {
  double fd_derivative = 0.0;     // Richardson-extrapolated d/dt F_k(e^{-2t phi} g)
  double formula_value = 0.0;     // (2k-n)(int sigma_k phi dV + oint B^k phi dS)
  double residual = 0.0;          // |fd - formula| / max(1, |formula|)
  double step = 0.0;              // smallest step used
  double order_estimate = 0.0;    // observed order of the plain central differences
};

// F_k along the conformal ray u_t = t phi around the state's metric.
double functional_along(const ConformalState& state, int k, const Perturbation& phi, double t);

VariationReport first_variation_check(const ConformalState& state, int k,
                                      const Perturbation& phi,
                                      const std::vector<double>& steps);

struct EulerLagrangeResidual {
  std::vector<double> interior;  // sigma_k(A_ghat) - mean, per interior node
  std::vector<double> boundary;  // B^k(ghat), per boundary node
  double interior_max = 0.0;
  double boundary_max = 0.0;
  double sigma_mean = 0.0;
};

EulerLagrangeResidual euler_lagrange_residual(const ConformalState& state, int k);

// Weighted boundary invariant: checks (oint Lcal dS)' = (2k-n) oint Lcal phi dS
// for a density transforming as Lcal(ghat) = e^{(2k-1)u} Lcal(g).
enum class InvariantKind { l4, mu_power };
VariationReport local_invariant_variation_check(const ConformalState& state, int k,
                                                const Perturbation& phi, InvariantKind kind,
                                                const std::vector<double>& steps);

// d/dt V(e^{-2t phi} g) at t = 0 against -n int phi dV.
VariationReport volume_variation_check(const ConformalState& state, const Perturbation& phi,
                                       double step);

// max |div T_q(A)| over sample points; LCF charts should drive this to zero
// under stencil refinement.
double newton_tensor_divergence(const geom::Chart& chart, int q, double fd_h,
                                const std::vector<VectorXd>& points);

}  // namespace sigmak::variation

#endif
