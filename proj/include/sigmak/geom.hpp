#ifndef SIGMAK_GEOM_HPP
#define SIGMAK_GEOM_HPP

#include <optional>

#include "sigmak/chart.hpp"
#include "sigmak/symfun.hpp"

namespace sigmak::geom {

struct Tensor3 {
  int n = 0;
  std::vector<double> v;
  explicit Tensor3(int dim = 0) : n(dim), v(std::size_t(dim) * dim * dim, 0.0) {}
  double& operator()(int i, int j, int k) { return v[(std::size_t(i) * n + j) * n + k]; }
  double operator()(int i, int j, int k) const { return v[(std::size_t(i) * n + j) * n + k]; }
};

struct Tensor4 {
  int n = 0;
  std::vector<double> v;
  explicit Tensor4(int dim = 0) : n(dim), v(std::size_t(dim) * dim * dim * dim, 0.0) {}
  double& operator()(int i, int j, int k, int l) {
    return v[((std::size_t(i) * n + j) * n + k) * n + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return v[((std::size_t(i) * n + j) * n + k) * n + l];
  }
};

// Value, gradient, Hessian and (optionally) third derivatives of a conformal
// exponent at a point; everything the exact conformal curvature path needs.
struct Jet3 {
  double v = 0.0;
  VectorXd g;
  MatrixXd H;
  std::vector<double> T;  // n^3, may be empty when not requested
  double third(int i, int j, int k) const {
    const int n = static_cast<int>(g.size());
    return T[(std::size_t(i) * n + j) * n + k];
  }
};

Jet3 exponent_jet(const WField& w, const VectorXd& x, bool need_third);
// jet of w + scale * u
Jet3 combined_jet(const WField& w, const WField& u, double scale, const VectorXd& x,
                  bool need_third);

// ---- exact curvature of g = e^{-2v} delta from the exponent jet ----
// All outputs are coordinate-frame tensors of the curved metric.

MatrixXd conf_schouten(const Jet3& j);               // A_ij = v_ij + v_i v_j - |dv|^2/2 d_ij
Tensor3 conf_christoffel(const Jet3& j);             // Gamma^k_ij
Tensor4 conf_riemann(const Jet3& j);                 // lowered R_ijkl (Weyl-free form)
Tensor3 conf_grad_schouten(const Jet3& j);           // (nabla A)_{k,ij} = covariant deriv along k
double conf_scalar_curvature(const Jet3& j);         // R = 2(n-1) e^{2v} tr(A)
MatrixXd conf_ricci(const Jet3& j);

// ---- generic finite-difference engine over an arbitrary metric callback ----

class MetricEngine {
public:
  MetricEngine(MetricCallback g, int n, double h, int order = 4, bool half_space = false,
               double floor = 0.0);

  int dim() const { return n_; }
  MatrixXd metric(const VectorXd& x) const;
  MatrixXd inverse(const VectorXd& x) const;
  Tensor3 christoffel(const VectorXd& x) const;        // Gamma^k_ij
  Tensor4 riemann(const VectorXd& x) const;            // lowered R_ijkl
  MatrixXd ricci(const VectorXd& x) const;
  double scalar_curvature(const VectorXd& x) const;
  MatrixXd schouten(const VectorXd& x) const;
  Tensor4 weyl(const VectorXd& x) const;               // Ricci-subtraction formula
  Tensor3 cotton(const VectorXd& x) const;             // C_{k,ij} = A_{ij,k} - A_{ik,j} holder
  Tensor3 grad_schouten(const VectorXd& x) const;

  double step() const { return st_.h; }

private:
  MetricCallback g_;
  int n_;
  fd::Stencil st_;
};

// conformally flat chart as a metric callback (for generic-path cross checks)
MetricCallback conformal_metric_callback(const WField& w, int n);

// ---- boundary machinery ----

struct BoundaryNode {
  VectorXd x;
  double weight_flat;      // flat surface measure
  MatrixXd frame;          // columns: n-1 tangents then inner normal; g-orthonormal
  double wv;               // exponent value at x (conformal kinds)
  double mu;               // umbilic principal curvature
  double h;                // mean curvature = g^{ab} L_ab
  double umbilic_residual;
  MatrixXd A;              // ambient Schouten in the adapted frame (normal last)
};

struct BoundarySlice {
  int n = 0;
  std::vector<BoundaryNode> nodes;
};

struct PackNode {
  VectorXd x;
  double weight;  // flat Lebesgue weight
  double wv;      // conformal exponent (0 for general grids)
  MatrixXd A;     // coordinate Schouten
  double R;
};

struct CurvaturePack {
  Chart chart;
  std::vector<PackNode> nodes;
  bool conformal_path = true;

  // spectrum of g^{-1} A at a pack node
  symfun::Spectrum schouten_spectrum(std::size_t i) const;
};

CurvaturePack build_curvature(const Chart& chart);
BoundarySlice build_boundary(const Chart& chart);

void export_pack_csv(const CurvaturePack& pack, std::ostream& os);

// ---- identity checks (max residuals over sampled boundary nodes) ----

struct BoundaryIdentityReport {
  double res_normal_gradient = 0.0;   // A_an = mu_a
  double res_mu_hessian = 0.0;        // mu_ab = A_an,b + A_nn mu g_ab - A_ab mu
  double res_weyl_normal = 0.0;       // R_nanb = A_ab + A_nn g_ab (LCF)
  double res_radial_deriv = 0.0;      // A_ab,n - 2 mu A_ab = mu_ab - R_anbn mu (LCF)
  double t0 = 0.0;                    // |S_an - mu_a| for S = A
  double t1 = 0.0;                    // max eig of S_ab + S_nn g_ab - R_anbn (<= 0 wanted)
  double t2 = 0.0;                    // max eig of S_ab,n - 2 mu S_ab - mu_ab + R_anbn mu
};

BoundaryIdentityReport check_boundary_identities(const Chart& chart, double fd_h,
                                                 int max_nodes = 12);

struct FermiChristoffelReport {
  double res_normal_second;   // Gamma^n_ab - mu g_ab
  double res_mixed;           // Gamma^b_an + mu delta_ab
  double res_normal_normal;   // Gamma^n_an
  double res_induced;         // induced-metric Christoffels vs ambient tangential ones
  double mu = 0.0;
};

FermiChristoffelReport fermi_christoffels(const Chart& chart, int max_nodes = 9);

// Fermi-form warped slab g = dx_n^2 + a(x_n)^2 b(x')^2 delta_ab; umbilic with
// mu = -a'(0)/a(0) at the face x_n = 0.
MetricCallback warped_slab_metric(int n, std::function<double(double)> a,
                                  std::function<double(const VectorXd&)> b);

struct NormalDerivativeReport {
  double res_mixed_second = 0.0;   // u_na identity
  double res_third = 0.0;          // u_abn identity
  double mu_hat = 0.0;
};

// Verifies the boundary differentiation identities for a scalar u built to
// satisfy u_n = -mu + mu_hat e^{-u} exactly on the boundary sphere.
NormalDerivativeReport check_normal_derivative_identities(const Chart& chart,
                                                          const ScalarField& boundary_value,
                                                          double mu_hat, double fd_h,
                                                          int max_nodes = 12);

// Residual of the boundary trace identity for a conformal factor that makes
// the boundary totally geodesic: g^{ab}(Ahat_ab,n - 2 mu Ahat_ab) -> 0.
double check_boundary_bianchi(const Chart& chart, const ScalarField& boundary_value, double fd_h,
                              int max_nodes = 12);

// ---- shared helpers used by the conformal/variation modules ----

MatrixXd adapted_flat_frame(const VectorXd& x);  // tangents then inner normal -x/|x|

// Hessian of a boundary scalar with respect to the induced metric of the
// sphere r = R inside g = e^{-2w} delta, in the g-orthonormal adapted frame.
MatrixXd boundary_hessian(const WField& w, const ScalarField& f_on_sphere, const VectorXd& x,
                          double R, double fd_h);

VectorXd boundary_gradient(const ScalarField& f_on_sphere, const VectorXd& x, double R,
                           double fd_h);  // flat tangential gradient (coordinates)

}  // namespace sigmak::geom

#endif
