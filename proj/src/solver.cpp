#include "sigmak/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <ostream>

namespace sigmak::solver {

using symfun::cone_membership;
using symfun::ConeVerdict;
using symfun::sigma_all;
using symfun::SymTensor;

namespace {

struct NodeGeom {
  double r, wv, w1, w2;
};

std::vector<NodeGeom> node_geometry(const RadialProblem& p) {
  std::vector<NodeGeom> g(p.nodes);
  const double d = p.spacing();
  for (int i = 0; i < p.nodes; ++i) {
    const double r = i * d;
    g[i] = {r, p.w.value(r), p.w.deriv1(r), p.w.deriv2(r)};
  }
  return g;
}

// base spectrum (no path shift) at an interior node from grid values
void base_eigs(const NodeGeom& ng, double du, double ddu, double& lam_rad, double& lam_tan) {
  const double e2 = std::exp(2.0 * ng.wv);
  lam_rad = e2 * (ddu + ng.w1 * du + 0.5 * du * du + ng.w2 + 0.5 * ng.w1 * ng.w1);
  lam_tan = e2 * (du / ng.r - ng.w1 * du - 0.5 * du * du + ng.w1 / ng.r -
                  0.5 * ng.w1 * ng.w1);
}

Spectrum full_spectrum(double lam_rad, double lam_tan, int n) {
  VectorXd v(n);
  v[0] = lam_rad;
  for (int i = 1; i < n; ++i) v[i] = lam_tan;
  return Spectrum(v);
}

// sigma_{k-1}(lambda with one entry removed), for the operator gradient
VectorXd sigma_gradient(const Spectrum& lam, int k) {
  const int n = lam.n();
  VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> e(k, 0.0);
    e[0] = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int l = k - 1; l >= 1; --l) e[l] += lam.values[j] * e[l - 1];
    }
    out[i] = e[k - 1];
  }
  return out;
}

// Simpson weights against dV_g = |S^{n-1}| e^{-n w} r^{n-1} dr
std::vector<double> volume_weights(const RadialProblem& p) {
  std::vector<double> w(p.nodes, 0.0);
  const double d = p.spacing();
  const double area = geom::sphere_area(p.n - 1);
  for (int i = 0; i < p.nodes; ++i) {
    double simp = (i == 0 || i == p.nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double r = i * d;
    w[i] = simp * d / 3.0 * area * std::pow(r, p.n - 1) * std::exp(-p.n * p.w.value(r));
  }
  return w;
}

double boundary_mu_g(const RadialProblem& p) {
  return std::exp(p.w.value(p.radius)) * (1.0 / p.radius - p.w.deriv1(p.radius));
}

double rhs_value(const RadialProblem& p, const PathState& path, int node, double u_node,
                 double nonlocal) {
  const double r = node * p.spacing();
  switch (path.kind) {
    case PathKind::pos:
    case PathKind::lcf:
      return path.frozen_f[node] * std::exp(2.0 * u_node);
    case PathKind::defm: {
      const double f = path.defm_f * (p.fx ? p.fx(r) : 1.0);
      return (1.0 - path.t) * nonlocal + defm_ramp(path.t) * f * std::exp(-2.0 * u_node);
    }
    case PathKind::none:
      break;
  }
  switch (p.target) {
    case TargetKind::constant:
      return p.fscale;
    case TargetKind::exp_neg2u:
      return p.fscale * std::exp(-2.0 * u_node);
    case TargetKind::exp_pos2u:
      return p.fscale * std::exp(2.0 * u_node);
    case TargetKind::fx_exp_neg2u:
      return p.fscale * p.fx(r) * std::exp(-2.0 * u_node);
  }
  throw domain_error("unknown target kind");
}

double rhs_du(const RadialProblem& p, const PathState& path, int node, double u_node) {
  const double r = node * p.spacing();
  switch (path.kind) {
    case PathKind::pos:
    case PathKind::lcf:
      return 2.0 * path.frozen_f[node] * std::exp(2.0 * u_node);
    case PathKind::defm: {
      const double f = path.defm_f * (p.fx ? p.fx(r) : 1.0);
      return -2.0 * defm_ramp(path.t) * f * std::exp(-2.0 * u_node);
    }
    case PathKind::none:
      break;
  }
  switch (p.target) {
    case TargetKind::constant:
      return 0.0;
    case TargetKind::exp_neg2u:
      return -2.0 * p.fscale * std::exp(-2.0 * u_node);
    case TargetKind::exp_pos2u:
      return 2.0 * p.fscale * std::exp(2.0 * u_node);
    case TargetKind::fx_exp_neg2u:
      return -2.0 * p.fscale * p.fx(r) * std::exp(-2.0 * u_node);
  }
  throw domain_error("unknown target kind");
}

struct PathShift {
  Spectrum shifted;          // spectrum entering the operator
  VectorXd chain;            // d shifted_a / d lambda_b is delta_ab + chain_b
};

// defm background shift (constant in u): (1-zeta)(c_V - lambda_A) per entry
void defm_background(const RadialProblem& p, const PathState& path, const NodeGeom& ng,
                     double c_V, VectorXd& shift) {
  const double e2 = std::exp(2.0 * ng.wv);
  const double a_rad = e2 * (ng.w2 + 0.5 * ng.w1 * ng.w1);
  const double a_tan = e2 * (ng.w1 / ng.r - 0.5 * ng.w1 * ng.w1);
  const double oneminus = 1.0 - defm_ramp(path.t);
  shift.resize(p.n);
  shift[0] = oneminus * (c_V - a_rad);
  for (int i = 1; i < p.n; ++i) shift[i] = oneminus * (c_V - a_tan);
}

PathShift apply_path(const RadialProblem& p, const PathState& path, const NodeGeom& ng,
                     const Spectrum& lam, double c_V, int node_for_error) {
  PathShift out;
  out.chain = VectorXd::Zero(p.n);
  switch (path.kind) {
    case PathKind::none:
      out.shifted = lam;
      return out;
    case PathKind::pos: {
      const double c = 0.5 * (1.0 - path.t);
      out.shifted = Spectrum(lam.values.array() + c * lam.values.sum());
      out.chain = VectorXd::Constant(p.n, c);
      return out;
    }
    case PathKind::defm: {
      VectorXd shift;
      defm_background(p, path, ng, c_V, shift);
      out.shifted = Spectrum(lam.values + shift);
      return out;
    }
    case PathKind::lcf: {
      const int m = path.m;
      const auto tag = cone_membership(lam, m - 1);
      if (m >= 2 && tag.verdict != ConeVerdict::inside)
        throw cone_error("spectrum left the order-" + std::to_string(m - 1) +
                             " cone at node " + std::to_string(node_for_error),
                         m - 1, tag.sigmas.empty() ? 0.0 : tag.sigmas.back());
      const double sm1 = symfun::sigma_k(lam, m - 1);
      const double c = 0.5 * (1.0 - path.t);
      const double root = std::pow(sm1, 1.0 / (m - 1));
      out.shifted = Spectrum(lam.values.array() + c * root);
      const VectorXd grad = sigma_gradient(lam, m - 1);
      out.chain = (c / (m - 1)) * std::pow(sm1, 1.0 / (m - 1) - 1.0) * grad;
      return out;
    }
  }
  throw domain_error("unknown path kind");
}

double nonlocal_integral(const RadialProblem& p, const VectorXd& u,
                         const std::vector<double>& vw) {
  std::vector<double> terms(p.nodes);
  for (int i = 0; i < p.nodes; ++i) terms[i] = vw[i] * std::exp(-5.0 * u[i]);
  return pairwise_sum(terms);
}

}  // namespace

double defm_ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 0.5) return 1.0;
  const double s = 2.0 * t;
  return s * s * (3.0 - 2.0 * s);
}

double total_volume(const RadialProblem& p) {
  const auto vw = volume_weights(p);
  return pairwise_sum(vw);
}

Spectrum radial_hessian_spectrum(double /*u*/, double du, double ddu, const RadialProfile& w,
                                 double r, int n, double t_trace_shift) {
  if (r <= 0.0) {
    // l'Hopital limits at the center; valid only with du -> 0 there
    const double e2 = std::exp(2.0 * w.value(0.0));
    const double lam = e2 * (ddu + w.deriv2(0.0));
    Spectrum s = full_spectrum(lam, lam, n);
    if (!s.values.allFinite()) throw std::runtime_error("center limit not finite");
    if (t_trace_shift != 1.0)
      return Spectrum(s.values.array() + 0.5 * (1.0 - t_trace_shift) * s.values.sum());
    return s;
  }
  NodeGeom ng{r, w.value(r), w.deriv1(r), w.deriv2(r)};
  double lr, lt;
  base_eigs(ng, du, ddu, lr, lt);
  Spectrum s = full_spectrum(lr, lt, n);
  if (!s.values.allFinite()) throw std::runtime_error("radial spectrum not finite");
  if (t_trace_shift != 1.0)
    return Spectrum(s.values.array() + 0.5 * (1.0 - t_trace_shift) * s.values.sum());
  return s;
}

std::vector<Spectrum> grid_spectra(const RadialProblem& p, const VectorXd& u) {
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  std::vector<Spectrum> out;
  out.reserve(p.nodes - 2);
  for (int i = 1; i + 1 < p.nodes; ++i) {
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
    const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
    double lr, lt;
    base_eigs(geo[i], du, ddu, lr, lt);
    out.push_back(full_spectrum(lr, lt, p.n));
  }
  return out;
}

VectorXd assemble_residual(const RadialProblem& p, const VectorXd& u, const PathState& path) {
  if (u.size() != p.nodes) throw domain_error("residual: wrong vector length");
  if (p.fscale <= 0.0 && path.kind == PathKind::none && p.target != TargetKind::fx_exp_neg2u)
    throw domain_error("target level f must be positive");
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  const double kroot = 1.0 / p.k;

  double nl = 0.0, c_V = 0.0;
  if (path.kind == PathKind::defm) {
    if (p.n != 4) throw domain_error("volume-deformation path is four-dimensional");
    const auto vw = volume_weights(p);
    nl = std::pow(nonlocal_integral(p, u, vw), 0.4);
    c_V = std::pow(pairwise_sum(vw), 0.4) / std::sqrt(6.0);
  }

  VectorXd res(p.nodes);
  res[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * d);
  for (int i = 1; i + 1 < p.nodes; ++i) {
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
    const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
    double lr, lt;
    base_eigs(geo[i], du, ddu, lr, lt);
    const PathShift ps = apply_path(p, path, geo[i], full_spectrum(lr, lt, p.n), c_V, i);
    const auto tag = cone_membership(ps.shifted, p.k);
    if (tag.verdict != ConeVerdict::inside) {
      int bad = 1;
      while (bad <= p.k && tag.sigmas[bad - 1] > 0.0) ++bad;
      throw cone_error("spectrum outside the positive " + std::to_string(p.k) +
                           "-cone at node " + std::to_string(i),
                       std::min(bad, p.k), tag.sigmas[std::min(bad, p.k) - 1]);
    }
    const double op = std::pow(tag.sigmas[p.k - 1], kroot);
    res[i] = op - rhs_value(p, path, i, u[i], nl);
  }
  const int N = p.nodes;
  const double u_n = -std::exp(geo[N - 1].wv) * (3.0 * u[N - 1] - 4.0 * u[N - 2] + u[N - 3]) /
                     (2.0 * d);
  res[N - 1] = u_n + boundary_mu_g(p) - p.mu_hat * std::exp(-u[N - 1]);
  return res;
}

MatrixXd linearized_operator(const RadialProblem& p, const VectorXd& u, const PathState& path) {
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  const int N = p.nodes;
  MatrixXd J = MatrixXd::Zero(N, N);

  double nl_int = 0.0, c_V = 0.0;
  std::vector<double> vw;
  if (path.kind == PathKind::defm) {
    vw = volume_weights(p);
    nl_int = nonlocal_integral(p, u, vw);
    c_V = std::pow(pairwise_sum(vw), 0.4) / std::sqrt(6.0);
  }

  J(0, 0) = -3.0 / (2.0 * d);
  J(0, 1) = 4.0 / (2.0 * d);
  J(0, 2) = -1.0 / (2.0 * d);

  for (int i = 1; i + 1 < N; ++i) {
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
    const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
    double lr, lt;
    base_eigs(geo[i], du, ddu, lr, lt);
    const Spectrum lam = full_spectrum(lr, lt, p.n);
    const PathShift ps = apply_path(p, path, geo[i], lam, c_V, i);

    const double sk = symfun::sigma_k(ps.shifted, p.k);
    const VectorXd grad_sigma = sigma_gradient(ps.shifted, p.k);
    const VectorXd grad_op = (1.0 / p.k) * std::pow(sk, 1.0 / p.k - 1.0) * grad_sigma;
    // chain through the path shift: d op/d lambda_b = grad_b + (sum grad) chain_b
    const double gsum = grad_op.sum();
    VectorXd gl = grad_op + gsum * ps.chain;  // wrong for pos? chain is uniform there

    // d lambda_rad / d(du, ddu), d lambda_tan / d(du)
    const double e2 = std::exp(2.0 * geo[i].wv);
    const double dlr_ddu = e2 * (geo[i].w1 + du);
    const double dlr_dddu = e2;
    const double dlt_ddu = e2 * (1.0 / geo[i].r - geo[i].w1 - du);

    const double g_rad = gl[0];
    double g_tan = 0.0;
    for (int a = 1; a < p.n; ++a) g_tan += gl[a];

    const double c_dprime = g_rad * dlr_dddu;             // multiplies u''
    const double c_prime = g_rad * dlr_ddu + g_tan * dlt_ddu;  // multiplies u'

    J(i, i - 1) += c_dprime / (d * d) - c_prime / (2.0 * d);
    J(i, i) += -2.0 * c_dprime / (d * d);
    J(i, i + 1) += c_dprime / (d * d) + c_prime / (2.0 * d);

    J(i, i) -= rhs_du(p, path, i, u[i]);

    if (path.kind == PathKind::defm) {
      // d/du_j of -(1-t) I^{2/5}, I = sum vw_j e^{-5u_j}
      const double coef = (1.0 - path.t) * 0.4 * std::pow(nl_int, -0.6) * 5.0;
      for (int j = 0; j < N; ++j) J(i, j) += coef * vw[j] * std::exp(-5.0 * u[j]);
    }
  }

  const double ew = std::exp(geo[N - 1].wv);
  J(N - 1, N - 1) = -3.0 * ew / (2.0 * d) + p.mu_hat * std::exp(-u[N - 1]);
  J(N - 1, N - 2) = 4.0 * ew / (2.0 * d);
  J(N - 1, N - 3) = -ew / (2.0 * d);
  return J;
}

double cone_margin(const RadialProblem& p, const VectorXd& u, const PathState& path) {
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  double c_V = 0.0;
  if (path.kind == PathKind::defm) c_V = std::pow(total_volume(p), 0.4) / std::sqrt(6.0);
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < p.nodes; ++i) {
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
    const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
    double lr, lt;
    base_eigs(geo[i], du, ddu, lr, lt);
    const PathShift ps = apply_path(p, path, geo[i], full_spectrum(lr, lt, p.n), c_V, i);
    const auto sig = sigma_all(ps.shifted);
    for (int q = 1; q <= p.k; ++q) margin = std::min(margin, sig[q]);
    if (path.kind == PathKind::lcf) {
      const auto sig0 = sigma_all(full_spectrum(lr, lt, p.n));
      for (int q = 1; q <= path.m - 1; ++q) margin = std::min(margin, sig0[q]);
    }
  }
  return margin;
}

SolveReport newton_solve(const RadialProblem& p, const VectorXd& u0, const PathState& path,
                         const NewtonOptions& opts) {
  SolveReport rep;
  rep.u = u0;
  VectorXd res = assemble_residual(p, rep.u, path);  // cone errors surface here
  double norm = res.norm();
  rep.residual_history.push_back(norm);

  for (int it = 0; it < opts.max_iter && norm > opts.tol; ++it) {
    const MatrixXd J = linearized_operator(p, rep.u, path);
    Eigen::FullPivLU<MatrixXd> lu(J);
    if (!lu.isInvertible())
      throw solve_error(solve_error::reason::singular_jacobian,
                        "linearized operator singular within tolerance");
    const VectorXd delta = lu.solve(-res);

    double s = 1.0;
    bool accepted = false;
    while (s >= std::pow(2.0, -20)) {
      VectorXd trial = rep.u + s * delta;
      try {
        VectorXd tres = assemble_residual(p, trial, path);
        const double tnorm = tres.norm();
        if (tnorm <= (1.0 - 1e-4 * s) * norm || tnorm <= opts.tol) {
          rep.u = std::move(trial);
          res = std::move(tres);
          norm = tnorm;
          accepted = true;
          break;
        }
      } catch (const cone_error&) {
        // cone guard: shorten the step rather than clamping the spectrum
      }
      s *= 0.5;
    }
    if (!accepted)
      throw solve_error(solve_error::reason::line_search,
                        "line search failed at residual " + std::to_string(norm));
    ++rep.iterations;
    rep.residual_history.push_back(norm);
  }
  if (norm > opts.tol)
    throw solve_error(solve_error::reason::max_iter,
                      "Newton did not reach tolerance in " + std::to_string(opts.max_iter) +
                          " iterations");
  rep.converged = true;
  rep.final_residual = norm;
  rep.cone_margin = cone_margin(p, rep.u, path);

  // observed order on the last contraction steps above rounding level
  const auto& h = rep.residual_history;
  for (std::size_t i = h.size(); i >= 3; --i) {
    const double r2 = h[i - 1], r1 = h[i - 2], r0 = h[i - 3];
    if (r2 > 1e-14 && r1 > 1e-13 && r0 > 1e-12 && r1 < 0.5 * r0) {
      rep.quadratic_order = std::log(r2 / r1) / std::log(r1 / r0);
      break;
    }
  }
  return rep;
}

double choose_theta(const RadialProblem& p, PathKind kind, int m) {
  const auto geo = node_geometry(p);
  for (double theta = 5.0; theta <= 100.0; theta += 5.0) {
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < p.nodes; ++i) {
      double lr, lt;
      base_eigs(geo[i], 0.0, 0.0, lr, lt);
      const Spectrum lam = full_spectrum(lr, lt, p.n);
      VectorXd shifted;
      if (kind == PathKind::pos) {
        shifted = lam.values.array() + 0.5 * (1.0 + theta) * lam.values.sum();
      } else {
        const double sm1 = symfun::sigma_k(lam, m - 1);
        if (sm1 <= 0.0) return -1.0;
        shifted = lam.values.array() + 0.5 * (1.0 + theta) * std::pow(sm1, 1.0 / (m - 1));
      }
      worst = std::min(worst, shifted.minCoeff());
    }
    if (worst >= 0.1) return theta;
  }
  throw solve_error(solve_error::reason::cone_guard,
                    "no admissible Theta up to 100 on this chart");
}

namespace {

std::vector<double> frozen_start_f(const RadialProblem& p, PathKind kind, double theta, int m) {
  const auto geo = node_geometry(p);
  std::vector<double> f(p.nodes, 0.0);
  for (int i = 0; i < p.nodes; ++i) {
    double lr, lt;
    if (i == 0) {
      const double e2 = std::exp(2.0 * geo[0].wv);
      lr = lt = e2 * p.w.deriv2(0.0);
    } else {
      base_eigs(geo[i], 0.0, 0.0, lr, lt);
    }
    Spectrum lam = full_spectrum(lr, lt, p.n);
    VectorXd shifted;
    if (kind == PathKind::pos)
      shifted = lam.values.array() + 0.5 * (1.0 + theta) * lam.values.sum();
    else {
      const double sm1 = symfun::sigma_k(lam, m - 1);
      shifted = lam.values.array() + 0.5 * (1.0 + theta) * std::pow(sm1, 1.0 / (m - 1));
    }
    const int kk = (kind == PathKind::lcf) ? m : p.k;
    f[i] = std::pow(symfun::sigma_k(Spectrum(shifted), kk), 1.0 / kk);
  }
  return f;
}

double min_operator_gradient(const RadialProblem& p, const VectorXd& u, const PathState& path) {
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  double c_V = 0.0;
  if (path.kind == PathKind::defm) c_V = std::pow(total_volume(p), 0.4) / std::sqrt(6.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < p.nodes; ++i) {
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
    const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
    double lr, lt;
    base_eigs(geo[i], du, ddu, lr, lt);
    const int kk = (path.kind == PathKind::lcf) ? path.m : p.k;
    const PathShift ps = apply_path(p, path, geo[i], full_spectrum(lr, lt, p.n), c_V, i);
    const double sk = symfun::sigma_k(ps.shifted, kk);
    const VectorXd grad = (1.0 / kk) * std::pow(sk, 1.0 / kk - 1.0) *
                          sigma_gradient(ps.shifted, kk);
    const VectorXd chained = grad + grad.sum() * ps.chain;
    worst = std::min(worst, chained.minCoeff());
  }
  return worst;
}

ContinuationStep make_step_record(const RadialProblem& p, const SolveReport& rep,
                                  const PathState& path) {
  ContinuationStep st;
  st.t = path.t;
  st.newton_iters = rep.iterations;
  st.residual = rep.final_residual;
  st.cone_margin = rep.cone_margin;
  st.sup_u = rep.u.maxCoeff();
  st.inf_u = rep.u.minCoeff();
  const auto geo = node_geometry(p);
  const double d = p.spacing();
  for (int i = 1; i + 1 < p.nodes; ++i) {
    const double du = (rep.u[i + 1] - rep.u[i - 1]) / (2.0 * d);
    const double ddu = (rep.u[i + 1] - 2.0 * rep.u[i] + rep.u[i - 1]) / (d * d);
    const double e2 = std::exp(2.0 * geo[i].wv);
    st.max_grad = std::max(st.max_grad, std::exp(geo[i].wv) * std::abs(du));
    const double lap = e2 * (ddu + (p.n - 1) * du / geo[i].r - (p.n - 2) * geo[i].w1 * du);
    st.max_lap = std::max(st.max_lap, std::abs(lap));
  }
  if (path.kind == PathKind::defm) {
    const auto vw = volume_weights(p);
    st.defm_monitor = (1.0 - path.t) * std::pow(nonlocal_integral(p, rep.u, vw), 0.4);
  }
  st.min_operator_gradient = min_operator_gradient(p, rep.u, path);
  return st;
}

}  // namespace

ContinuationReport run_continuation(const RadialProblem& p, PathKind kind,
                                    const ContinuationOptions& opts, int lcf_m) {
  ContinuationReport rep;
  PathState path;
  path.kind = kind;
  path.m = lcf_m;

  double t_start = 0.0;
  if (kind == PathKind::pos || kind == PathKind::lcf) {
    path.theta = choose_theta(p, kind, lcf_m);
    t_start = -path.theta;
    path.frozen_f = frozen_start_f(p, kind, path.theta, lcf_m);
  } else if (kind == PathKind::defm) {
    path.defm_f = p.fscale;
  } else {
    throw domain_error("continuation needs a path kind");
  }

  path.t = t_start;
  VectorXd u = VectorXd::Zero(p.nodes);
  // the discretized start is only an approximate solution of the discrete
  // system; one warm-start correction settles it
  SolveReport warm = newton_solve(p, u, path, opts.newton);
  u = warm.u;
  rep.steps.push_back(make_step_record(p, warm, path));

  double monitor_cap = 10.0 * std::max(1.0, rep.steps.front().defm_monitor);
  double dt = opts.dt0;
  double t = t_start;
  while (t < 1.0) {
    const double t_next = std::min(1.0, t + dt);
    path.t = t_next;
    try {
      SolveReport step = newton_solve(p, u, path, opts.newton);
      u = step.u;
      t = t_next;
      rep.steps.push_back(make_step_record(p, step, path));
      if (path.kind == PathKind::defm && rep.steps.back().defm_monitor > monitor_cap)
        rep.monitor_flagged = true;
      if (step.iterations <= 3) dt = std::min(dt * opts.grow, 0.5 * (1.0 - t_start));
    } catch (const solve_error&) {
      dt *= 0.5;
    } catch (const cone_error&) {
      dt *= 0.5;
    }
    if (dt < opts.dt_min * std::max(1.0, 1.0 - t_start)) {
      rep.completed = false;
      rep.t_final = t;
      rep.u = u;
      rep.stop_reason = "step underflow at t = " + std::to_string(t);
      return rep;
    }
  }
  rep.completed = true;
  rep.t_final = t;
  rep.u = u;
  rep.stop_reason = "reached t = 1";
  return rep;
}

ExtremalDiagnostics extremal_diagnostics(const RadialProblem& p, const VectorXd& u,
                                         const PathState& path) {
  ExtremalDiagnostics out;
  int imax = 0, imin = 0;
  u.maxCoeff(&imax);
  u.minCoeff(&imin);
  out.argmax = imax;
  out.argmin = imin;
  out.sup_u = u[imax];
  out.inf_u = u[imin];
  out.max_at_boundary = (imax == p.nodes - 1) || (imax == 0);

  const auto geo = node_geometry(p);
  const double d = p.spacing();
  const int i = std::min(std::max(imax, 1), p.nodes - 2);
  const double du = (u[i + 1] - u[i - 1]) / (2.0 * d);
  const double ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
  const double e2 = std::exp(2.0 * geo[i].wv);
  out.laplacian_at_max = e2 * (ddu + (p.n - 1) * du / geo[i].r - (p.n - 2) * geo[i].w1 * du);
  out.grad_at_max = std::exp(geo[i].wv) * std::abs(du);

  double c_V = 0.0;
  if (path.kind == PathKind::defm) c_V = std::pow(total_volume(p), 0.4) / std::sqrt(6.0);
  double lr, lt;
  base_eigs(geo[i], du, ddu, lr, lt);
  const PathShift ps = apply_path(p, path, geo[i], full_spectrum(lr, lt, p.n), c_V, i);
  const auto sig = sigma_all(ps.shifted);
  if (p.n == 4 && p.k == 2) {
    out.sigma_chain_lhs = std::sqrt(std::max(0.0, sig[2]));
    out.sigma_chain_rhs = std::sqrt(6.0) / 4.0 * sig[1];
  }
  return out;
}

void write_trace_csv(const RadialProblem& p, const std::vector<std::pair<double, VectorXd>>& sols,
                     const PathState& path_template, std::ostream& os) {
  os << "t,r,u,residual,cone_margin\n";
  char buf[64];
  auto put = [&](double v, bool lead) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    if (lead) os << ",";
    os << buf;
  };
  for (const auto& [t, u] : sols) {
    PathState path = path_template;
    path.t = t;
    const VectorXd res = assemble_residual(p, u, path);
    const double margin = cone_margin(p, u, path);
    for (int i = 0; i < p.nodes; ++i) {
      put(t, false);
      put(i * p.spacing(), true);
      put(u[i], true);
      put(res[i], true);
      put(margin, true);
      os << "\n";
    }
  }
}

}  // namespace sigmak::solver
