#ifndef SIGMAK_SOLVER_HPP
#define SIGMAK_SOLVER_HPP

#include "sigmak/chart.hpp"
#include "sigmak/symfun.hpp"

namespace sigmak::solver {

using geom::Chart;
using geom::RadialProfile;
using symfun::Spectrum;

enum class TargetKind { constant, exp_neg2u, exp_pos2u, fx_exp_neg2u };
enum class PathKind { none, pos, defm, lcf };

// Radially reduced boundary-value problem on the ball of radius R:
//   sigma_k^{1/k}(spectrum of ghat^... relative to g) = f(r, u)   in (0, R)
//   du/dn + mu_g = mu_hat e^{-u}                                   at r = R
//   u'(0) = 0
struct RadialProblem {
  int n = 4;
  int k = 2;
  double radius = 1.0;
  RadialProfile w = RadialProfile::zero();
  TargetKind target = TargetKind::exp_neg2u;
  double fscale = 1.0;
  std::function<double(double)> fx;  // spatial factor (fx_exp_neg2u)
  double mu_hat = 0.0;
  int nodes = 201;

  double spacing() const { return radius / (nodes - 1); }
};

struct PathState {
  PathKind kind = PathKind::none;
  double t = 1.0;
  double theta = 0.0;
  int m = 2;                        // cone order driven along the lcf path
  std::vector<double> frozen_f;     // per-node f(x) frozen at the path start
  double defm_f = 1.0;              // target level for the volume-deformation path
};

// Two distinct eigenvalues of the conformal Hessian operator in radial
// symmetry, returned as a full n-spectrum (radial once, tangential n-1 times).
Spectrum radial_hessian_spectrum(double u, double du, double ddu, const RadialProfile& w,
                                 double r, int n, double t_trace_shift = 1.0);

// Per-node spectra for a grid function (interior nodes 1..N-2).
std::vector<Spectrum> grid_spectra(const RadialProblem& p, const VectorXd& u);

VectorXd assemble_residual(const RadialProblem& p, const VectorXd& u, const PathState& path);
MatrixXd linearized_operator(const RadialProblem& p, const VectorXd& u, const PathState& path);

// smallest sigma_i (i <= k) over all interior nodes; positive inside the cone
double cone_margin(const RadialProblem& p, const VectorXd& u, const PathState& path);

struct NewtonOptions {
  double tol = 1e-11;
  int max_iter = 30;
};

struct SolveReport {
  bool converged = false;
  VectorXd u;
  std::vector<double> residual_history;
  int iterations = 0;
  double final_residual = 0.0;
  double cone_margin = 0.0;
  double quadratic_order = 0.0;  // observed convergence order on the tail
};

SolveReport newton_solve(const RadialProblem& p, const VectorXd& u0, const PathState& path,
                         const NewtonOptions& opts = {});

// volume-deformation ramp: 0 at t=0, 1 from t=1/2 on, C^1
double defm_ramp(double t);

// smallest Theta in {5,10,...} for which the shifted background spectrum has
// all eigenvalues >= 0.1 on the chart
double choose_theta(const RadialProblem& p, PathKind kind, int m = 2);

struct ContinuationStep {
  double t = 0.0;
  int newton_iters = 0;
  double residual = 0.0;
  double cone_margin = 0.0;
  double sup_u = 0.0, inf_u = 0.0;
  double max_grad = 0.0;   // max |nabla u|_g
  double max_lap = 0.0;    // max |Delta_g u|
  double defm_monitor = 0.0;  // (1-t)(int e^{-5u})^{2/5}
  double min_operator_gradient = 0.0;  // ellipticity monitor along the path
};

struct ContinuationReport {
  bool completed = false;
  double t_final = 0.0;
  VectorXd u;
  std::vector<ContinuationStep> steps;
  bool monitor_flagged = false;  // defm integral bound grew past its cap
  std::string stop_reason;
};

struct ContinuationOptions {
  double dt0 = 0.25;
  double dt_min = 1e-6;
  double grow = 1.5;
  NewtonOptions newton;
};

ContinuationReport run_continuation(const RadialProblem& p, PathKind kind,
                                    const ContinuationOptions& opts = {}, int lcf_m = 2);

struct ExtremalDiagnostics {
  int argmax = 0, argmin = 0;
  double sup_u = 0.0, inf_u = 0.0;
  double laplacian_at_max = 0.0;   // expect <= tol at an interior max
  double grad_at_max = 0.0;        // expect ~ 0 at a boundary max with u_n = 0
  double sigma_chain_lhs = 0.0;    // sigma_2^{1/2} at the max point
  double sigma_chain_rhs = 0.0;    // sqrt(6)/4 sigma_1 there (n = 4)
  bool max_at_boundary = false;
};

ExtremalDiagnostics extremal_diagnostics(const RadialProblem& p, const VectorXd& u,
                                         const PathState& path);

// trace CSV: t, r, u, residual, cone margin (one block of rows per step)
void write_trace_csv(const RadialProblem& p, const std::vector<std::pair<double, VectorXd>>& sols,
                     const PathState& path_template, std::ostream& os);

double total_volume(const RadialProblem& p);  // V_g of the chart

}  // namespace sigmak::solver

#endif
