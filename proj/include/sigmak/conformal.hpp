#ifndef SIGMAK_CONFORMAL_HPP
#define SIGMAK_CONFORMAL_HPP

#include "sigmak/geom.hpp"

namespace sigmak::conformal {

using geom::BoundaryNode;
using geom::BoundarySlice;
using geom::Chart;
using geom::ScalarField;
using geom::Tensor4;
using symfun::SymTensor;

// ---- boundary curvature densities on raw slice data ----
// AT is the tangential Schouten block and L the second fundamental form, both
// as (n-1)x(n-1) matrices in a boundary-orthonormal frame.

double boundary_B2(const MatrixXd& AT, const MatrixXd& L, int n);

enum class BkForm { general, umbilic };

// general: sum_i C1(n,k,i) sigma_{2k-i-1,i}(AT, L), needs n >= 2k (k >= 3;
//          k = 2 falls back to boundary_B2)
// umbilic: sum_i C2(n,k,i) sigma_i(AT) mu^{2k-2i-1}, any n
double boundary_Bk(const MatrixXd& AT, const MatrixXd& L, int n, int k, BkForm form);
double boundary_Bk_umbilic(const MatrixXd& AT, double mu, int n, int k);

double coeff_C1(int n, int k, int i);
double coeff_C2(int n, int k, int i);

// ---- conformal change machinery ----

// Conformal state: base chart (metric g = e^{-2w} delta) plus a factor u so
// that ghat = e^{-2u} g. Derived tensors come from the transformation law
// Ahat = hess_g u + du x du - |du|_g^2/2 g + A_g evaluated pointwise.
class ConformalState {
public:
  ConformalState(Chart chart, ScalarField u, double u_fd_step);
  static ConformalState identity(Chart chart);  // u == 0

  const Chart& chart() const { return chart_; }
  int n() const { return chart_.n; }

  double u_value(const VectorXd& x) const { return u_.value(x); }

  // coordinate-frame Schouten of ghat via the transformation law
  MatrixXd schouten_hat(const VectorXd& x) const;
  // spectrum of ghat^{-1} Ahat
  symfun::Spectrum schouten_hat_spectrum(const VectorXd& x) const;
  // exponent of ghat against the flat background: w + u
  double total_exponent(const VectorXd& x) const;

  // boundary data of ghat at a base-slice node
  struct BoundaryData {
    MatrixXd AT;     // tangential Schouten of ghat, ghat-orthonormal frame
    double A_nn;
    double mu_hat;   // principal curvature of ghat
    double ds_scale; // dS_ghat / dS_flat
  };
  BoundaryData boundary_data(const BoundaryNode& base_node) const;

  const geom::WField& u_field() const { return u_; }

private:
  Chart chart_;
  geom::WField u_;
};

struct FunctionalValue {
  double interior = 0.0;   // integral of sigma_k(A_ghat) dV_ghat
  double boundary = 0.0;   // integral of B^k(ghat) dS_ghat
  double total = 0.0;
  double quad_error = 0.0; // coarse-grid Richardson estimate
  double volume = 0.0;     // V_ghat
};

// F_k(ghat) = int sigma_k(A) dV + oint B^k dS, umbilic boundary form.
FunctionalValue functional_Fk(const ConformalState& state, int k);

// ---- dimension-four Gauss-Bonnet boundary term ----

struct GaussBonnet4 {
  double B;        // (1/2) R h - R_nn h - R_gagb L^ab + h^3/3 - h|L|^2 + (2/3) tr L^3
  double L4;       // -2 sigma_1(AT) h - 2(n-3) A_ab L^ab + 2 R^g_agb L^ab
  double B2;       // boundary_B2 of the same data; B2 = B/2 + L4/4
};

// Pointwise evaluation from adapted-frame data: ambient Riemann (lowered, in
// the adapted orthonormal frame with the normal last), Schouten likewise.
GaussBonnet4 gauss_bonnet4_pointwise(const Tensor4& riem_frame, const MatrixXd& A_frame,
                                     const MatrixXd& L, int n);

// gauss-Bonnet boundary term of ghat at a base boundary node (n = 4 charts)
GaussBonnet4 gauss_bonnet4(const ConformalState& state, const BoundaryNode& base_node);

// ---- even-dimensional Gauss-Bonnet integrands on LCF charts ----

struct GBIntegrands {
  double E_kron, E_sigma;                  // interior density, two routes
  std::vector<double> Q_kron, Q_sigma;     // boundary densities, i = 0..n/2-1
};

// Pointwise densities at an interior point x (E) and a boundary node (Q).
double En_kronecker(const Tensor4& riem_frame, int n);
double En_sigma(const symfun::Spectrum& schouten_spec, int n);
double Qin_kronecker(const Tensor4& riem_frame, const MatrixXd& L, int n, int i);
double Qin_sigma(const MatrixXd& AT, const MatrixXd& L, int n, int i);

// Assembled Euler characteristic estimate (4pi)^{-n/2}(int E + oint sum Q).
struct EulerEstimate {
  double chi;
  double interior, boundary;
};
EulerEstimate euler_characteristic(const ConformalState& state);

// ---- deformation tensor ----

struct DeformedTensor {
  double t;
  MatrixXd At;       // A + (1-t)/2 tr(A) g, coordinate frame
  double trace;      // tr_g A^t
};

DeformedTensor deformed_tensor(const MatrixXd& A_coord, double w_exponent, double t, int n);
// spectrum-level shift: lambda + (1-t)/2 (sum lambda) e
symfun::Spectrum deformed_spectrum(const symfun::Spectrum& lam, double t);

}  // namespace sigmak::conformal

#endif
