#include "sigmak/geom.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <ostream>

namespace sigmak::geom {

Jet3 exponent_jet(const WField& w, const VectorXd& x, bool need_third) {
  Jet3 j;
  j.v = w.value(x);
  j.g = w.grad(x);
  j.H = w.hess(x);
  if (need_third) j.T = w.third(x);
  return j;
}

Jet3 combined_jet(const WField& w, const WField& u, double scale, const VectorXd& x,
                  bool need_third) {
  Jet3 a = exponent_jet(w, x, need_third);
  const Jet3 b = exponent_jet(u, x, need_third);
  a.v += scale * b.v;
  a.g += scale * b.g;
  a.H += scale * b.H;
  if (need_third)
    for (std::size_t i = 0; i < a.T.size(); ++i) a.T[i] += scale * b.T[i];
  return a;
}

MatrixXd conf_schouten(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  return j.H + j.g * j.g.transpose() -
         0.5 * j.g.squaredNorm() * MatrixXd::Identity(n, n);
}

Tensor3 conf_christoffel(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  Tensor3 G(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        G(k, i, l) = -(j.g[i] * (k == l) + j.g[l] * (k == i) - j.g[k] * (i == l));
  return G;
}

Tensor4 conf_riemann(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  const MatrixXd A = conf_schouten(j);
  const double e2 = std::exp(-2.0 * j.v);
  Tensor4 R(n);
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          R(i, jj, k, l) = e2 * (A(i, k) * (jj == l) + A(jj, l) * (i == k) -
                                 A(i, l) * (jj == k) - A(jj, k) * (i == l));
  return R;
}

namespace {
Tensor3 conf_schouten_partial(const Jet3& j) {
  // partial_k A_ij for A = hess + grad x grad - |grad|^2/2 delta
  const int n = static_cast<int>(j.g.size());
  Tensor3 P(n);
  for (int k = 0; k < n; ++k) {
    double dot = 0.0;
    for (int l = 0; l < n; ++l) dot += j.g[l] * j.H(l, k);
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj < n; ++jj)
        P(k, i, jj) = j.third(i, jj, k) + j.H(i, k) * j.g[jj] + j.g[i] * j.H(jj, k) -
                      dot * (i == jj);
  }
  return P;
}
}  // namespace

Tensor3 conf_grad_schouten(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  const MatrixXd A = conf_schouten(j);
  const Tensor3 G = conf_christoffel(j);
  Tensor3 P = conf_schouten_partial(j);
  Tensor3 out(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj < n; ++jj) {
        double acc = P(k, i, jj);
        for (int m = 0; m < n; ++m) acc -= G(m, k, i) * A(m, jj) + G(m, k, jj) * A(i, m);
        out(k, i, jj) = acc;
      }
  return out;
}

double conf_scalar_curvature(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  return 2.0 * (n - 1) * std::exp(2.0 * j.v) * conf_schouten(j).trace();
}

MatrixXd conf_ricci(const Jet3& j) {
  const int n = static_cast<int>(j.g.size());
  const MatrixXd A = conf_schouten(j);
  return (n - 2) * A + A.trace() * MatrixXd::Identity(n, n);
}

// ---------------------------------------------------------------- generic FD

MetricEngine::MetricEngine(MetricCallback g, int n, double h, int order, bool half_space,
                           double floor)
    : g_(std::move(g)), n_(n) {
  st_.order = order;
  st_.h = h;
  if (half_space) {
    st_.restricted_axis = n - 1;
    st_.floor = floor;
  }
}

MatrixXd MetricEngine::metric(const VectorXd& x) const { return g_(x); }

MatrixXd MetricEngine::inverse(const VectorXd& x) const {
  return g_(x).llt().solve(MatrixXd::Identity(n_, n_));
}

Tensor3 MetricEngine::christoffel(const VectorXd& x) const {
  const MatrixXd ginv = inverse(x);
  std::vector<MatrixXd> dg(n_);
  for (int l = 0; l < n_; ++l) {
    dg[l].resize(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int jj = i; jj < n_; ++jj) {
        auto entry = [this, i, jj](const VectorXd& y) { return g_(y)(i, jj); };
        dg[l](i, jj) = dg[l](jj, i) = fd::partial(entry, x, l, st_);
      }
  }
  Tensor3 G(n_);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int jj = 0; jj < n_; ++jj) {
        double acc = 0.0;
        for (int l = 0; l < n_; ++l)
          acc += ginv(k, l) * (dg[i](jj, l) + dg[jj](i, l) - dg[l](i, jj));
        G(k, i, jj) = 0.5 * acc;
      }
  return G;
}

Tensor4 MetricEngine::riemann(const VectorXd& x) const {
  const MatrixXd g = metric(x);
  const Tensor3 G = christoffel(x);
  // dG[a](k,i,j) = partial_a Gamma^k_ij
  std::vector<Tensor3> dG(n_, Tensor3(n_));
  for (int a = 0; a < n_; ++a) {
    if (fd::needs_onesided(st_, x, a)) {
      auto at = [&](double off) {
        VectorXd y = x;
        y[a] += off;
        return christoffel(y);
      };
      const Tensor3 f0 = at(0.0), f1 = at(st_.h), f2 = at(2 * st_.h), f3 = at(3 * st_.h);
      for (std::size_t t = 0; t < dG[a].v.size(); ++t)
        dG[a].v[t] = (-11.0 / 6.0 * f0.v[t] + 3.0 * f1.v[t] - 1.5 * f2.v[t] + f3.v[t] / 3.0) /
                     st_.h;
    } else if (st_.order <= 2) {
      auto at = [&](double off) {
        VectorXd y = x;
        y[a] += off;
        return christoffel(y);
      };
      const Tensor3 fp = at(st_.h), fm = at(-st_.h);
      for (std::size_t t = 0; t < dG[a].v.size(); ++t)
        dG[a].v[t] = (fp.v[t] - fm.v[t]) / (2.0 * st_.h);
    } else {
      auto at = [&](double off) {
        VectorXd y = x;
        y[a] += off;
        return christoffel(y);
      };
      const Tensor3 f1 = at(st_.h), fm1 = at(-st_.h), f2 = at(2 * st_.h), fm2 = at(-2 * st_.h);
      for (std::size_t t = 0; t < dG[a].v.size(); ++t)
        dG[a].v[t] = (8.0 * (f1.v[t] - fm1.v[t]) - (f2.v[t] - fm2.v[t])) / (12.0 * st_.h);
    }
  }
  Tensor4 R(n_);
  for (int i = 0; i < n_; ++i)
    for (int jj = 0; jj < n_; ++jj)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) {
          double up = dG[k](i, jj, l) - dG[l](i, jj, k);
          for (int m = 0; m < n_; ++m)
            up += G(i, k, m) * G(m, l, jj) - G(i, l, m) * G(m, k, jj);
          R(i, jj, k, l) = up;  // R^i_jkl stored temporarily
        }
  // lower the first index
  Tensor4 low(n_);
  for (int i = 0; i < n_; ++i)
    for (int jj = 0; jj < n_; ++jj)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) {
          double acc = 0.0;
          for (int m = 0; m < n_; ++m) acc += g(i, m) * R(m, jj, k, l);
          low(i, jj, k, l) = acc;
        }
  return low;
}

MatrixXd MetricEngine::ricci(const VectorXd& x) const {
  const Tensor4 R = riemann(x);
  const MatrixXd ginv = inverse(x);
  MatrixXd ric = MatrixXd::Zero(n_, n_);
  for (int jj = 0; jj < n_; ++jj)
    for (int l = 0; l < n_; ++l) {
      double acc = 0.0;
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k) acc += ginv(i, k) * R(i, jj, k, l);
      ric(jj, l) = acc;
    }
  return ric;
}

double MetricEngine::scalar_curvature(const VectorXd& x) const {
  return (inverse(x) * ricci(x)).trace();
}

MatrixXd MetricEngine::schouten(const VectorXd& x) const {
  const MatrixXd ric = ricci(x);
  const MatrixXd g = metric(x);
  const double R = (inverse(x) * ric).trace();
  return (ric - R / (2.0 * (n_ - 1)) * g) / (n_ - 2);
}

Tensor4 MetricEngine::weyl(const VectorXd& x) const {
  const Tensor4 R = riemann(x);
  const MatrixXd g = metric(x);
  const MatrixXd ric = ricci(x);
  const double sc = (inverse(x) * ric).trace();
  Tensor4 W(n_);
  const double c1 = 1.0 / (n_ - 2);
  const double c2 = sc / ((n_ - 1) * (n_ - 2));
  for (int i = 0; i < n_; ++i)
    for (int jj = 0; jj < n_; ++jj)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l)
          W(i, jj, k, l) = R(i, jj, k, l) -
                           c1 * (g(i, k) * ric(jj, l) - g(i, l) * ric(jj, k) +
                                 g(jj, l) * ric(i, k) - g(jj, k) * ric(i, l)) +
                           c2 * (g(i, k) * g(jj, l) - g(i, l) * g(jj, k));
  return W;
}

Tensor3 MetricEngine::grad_schouten(const VectorXd& x) const {
  const Tensor3 G = christoffel(x);
  const MatrixXd A = schouten(x);
  Tensor3 out(n_);
  for (int k = 0; k < n_; ++k) {
    MatrixXd dA(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int jj = i; jj < n_; ++jj) {
        auto entry = [this, i, jj](const VectorXd& y) { return schouten(y)(i, jj); };
        dA(i, jj) = dA(jj, i) = fd::partial(entry, x, k, st_);
      }
    for (int i = 0; i < n_; ++i)
      for (int jj = 0; jj < n_; ++jj) {
        double acc = dA(i, jj);
        for (int m = 0; m < n_; ++m) acc -= G(m, k, i) * A(m, jj) + G(m, k, jj) * A(i, m);
        out(k, i, jj) = acc;
      }
  }
  return out;
}

Tensor3 MetricEngine::cotton(const VectorXd& x) const {
  const Tensor3 gs = grad_schouten(x);
  Tensor3 C(n_);
  // C(i,j,k) = A_ij,k - A_ik,j
  for (int i = 0; i < n_; ++i)
    for (int jj = 0; jj < n_; ++jj)
      for (int k = 0; k < n_; ++k) C(i, jj, k) = gs(k, i, jj) - gs(jj, i, k);
  return C;
}

MetricCallback conformal_metric_callback(const WField& w, int n) {
  return [w, n](const VectorXd& x) {
    return MatrixXd(std::exp(-2.0 * w.value(x)) * MatrixXd::Identity(n, n));
  };
}

// ------------------------------------------------------------------- packs

CurvaturePack build_curvature(const Chart& chart) {
  CurvaturePack pack;
  pack.chart = chart;
  const auto nodes = chart.interior_quadrature();
  pack.nodes.reserve(nodes.size());
  if (chart.kind == ChartKind::general_grid) {
    pack.conformal_path = false;
    MetricEngine eng(chart.metric, chart.n, chart.grid_spacing(), 4, chart.fermi_form,
                     chart.fermi_form ? chart.lo[chart.n - 1] : 0.0);
    for (const auto& q : nodes) {
      const MatrixXd g = chart.metric(q.x);
      Eigen::LLT<MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) {
        std::string where = "(";
        for (int i = 0; i < chart.n; ++i) where += std::to_string(q.x[i]) + (i + 1 < chart.n ? "," : ")");
        throw geometry_error("metric not positive definite at node " + where);
      }
      PackNode pn;
      pn.x = q.x;
      pn.weight = q.weight;
      pn.wv = 0.0;
      pn.A = eng.schouten(q.x);
      pn.R = eng.scalar_curvature(q.x);
      pack.nodes.push_back(std::move(pn));
    }
  } else {
    for (const auto& q : nodes) {
      const Jet3 j = exponent_jet(chart.w, q.x, false);
      PackNode pn;
      pn.x = q.x;
      pn.weight = q.weight;
      pn.wv = j.v;
      pn.A = conf_schouten(j);
      pn.R = conf_scalar_curvature(j);
      pack.nodes.push_back(std::move(pn));
    }
  }
  return pack;
}

symfun::Spectrum CurvaturePack::schouten_spectrum(std::size_t i) const {
  const PackNode& pn = nodes[i];
  if (conformal_path) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(pn.A, Eigen::EigenvaluesOnly);
    return symfun::Spectrum(std::exp(2.0 * pn.wv) * es.eigenvalues());
  }
  const MatrixXd g = chart.metric(pn.x);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(pn.A, g, Eigen::EigenvaluesOnly);
  return symfun::Spectrum(es.eigenvalues());
}

void export_pack_csv(const CurvaturePack& pack, std::ostream& os) {
  const int n = pack.chart.n;
  for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
  os << "w,R";
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) os << ",A" << i + 1 << j + 1;
  os << "\n";
  char buf[64];
  auto put = [&](double v, bool lead_comma) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    if (lead_comma) os << ",";
    os << buf;
  };
  for (const auto& pn : pack.nodes) {
    for (int i = 0; i < n; ++i) put(pn.x[i], i > 0);
    put(pn.wv, true);
    put(pn.R, true);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) put(pn.A(i, j), true);
    os << "\n";
  }
}

// ---------------------------------------------------------------- boundary

MatrixXd adapted_flat_frame(const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const VectorXd xh = x / x.norm();
  MatrixXd F(n, n);
  // Householder map sending e_n to xh; its first n-1 columns span the tangent
  VectorXd v = xh;
  v[n - 1] -= 1.0;
  const double vv = v.squaredNorm();
  if (vv < 1e-28) {
    F.setIdentity();
  } else {
    F = MatrixXd::Identity(n, n) - (2.0 / vv) * (v * v.transpose());
  }
  F.col(n - 1) = -xh;  // inner normal
  return F;
}

namespace {

double sphere_mu(const WField& w, const VectorXd& x, double R) {
  const VectorXd xh = x / x.norm();
  return std::exp(w.value(x)) * (1.0 / R - w.grad(x).dot(xh));
}

BoundaryNode make_sphere_node(const Chart& chart, const QuadNode& q) {
  BoundaryNode bn;
  bn.x = q.x;
  bn.weight_flat = q.weight;
  const double wv = chart.w.value(q.x);
  bn.wv = wv;
  const MatrixXd Fflat = adapted_flat_frame(q.x);
  bn.frame = std::exp(wv) * Fflat;
  bn.mu = sphere_mu(chart.w, q.x, chart.radius);
  bn.h = (chart.n - 1) * bn.mu;
  bn.umbilic_residual = 0.0;  // spheres stay umbilic under conformal factors
  const MatrixXd A = conf_schouten(exponent_jet(chart.w, q.x, false));
  bn.A = std::exp(2.0 * wv) * Fflat.transpose() * A * Fflat;
  return bn;
}

}  // namespace

BoundarySlice build_boundary(const Chart& chart) {
  BoundarySlice slice;
  slice.n = chart.n;
  const auto nodes = chart.boundary_quadrature();
  slice.nodes.reserve(nodes.size());

  switch (chart.kind) {
    case ChartKind::ball_conformally_flat:
    case ChartKind::radial_profile: {
      for (const auto& q : nodes) slice.nodes.push_back(make_sphere_node(chart, q));
      return slice;
    }
    case ChartKind::half_ball_flat: {
      for (const auto& q : nodes) {
        BoundaryNode bn;
        bn.x = q.x;
        bn.weight_flat = q.weight;
        bn.wv = 0.0;
        bn.frame = MatrixXd::Identity(chart.n, chart.n);  // inner normal +e_n
        bn.mu = 0.0;
        bn.h = 0.0;
        bn.umbilic_residual = 0.0;
        bn.A = MatrixXd::Zero(chart.n, chart.n);
        slice.nodes.push_back(std::move(bn));
      }
      return slice;
    }
    case ChartKind::general_grid: {
      if (!chart.fermi_form) throw geometry_error("boundary slice needs a Fermi-form chart");
      const int n = chart.n;
      MetricEngine eng(chart.metric, n, chart.grid_spacing(), 4, true, chart.lo[n - 1]);
      for (const auto& q : nodes) {
        const MatrixXd g = chart.metric(q.x);
        if (std::abs(g(n - 1, n - 1) - 1.0) > 1e-10 ||
            g.col(n - 1).head(n - 1).cwiseAbs().maxCoeff() > 1e-10)
          throw geometry_error("chart metric is not in Fermi form at a boundary node");
        const MatrixXd gT = g.topLeftCorner(n - 1, n - 1);
        // L_ab = -1/2 d_n g_ab, one-sided at the face
        MatrixXd L(n - 1, n - 1);
        for (int a = 0; a < n - 1; ++a)
          for (int b = a; b < n - 1; ++b) {
            auto entry = [&chart, a, b](const VectorXd& y) { return chart.metric(y)(a, b); };
            auto f1 = [&](double t) {
              VectorXd y = q.x;
              y[n - 1] += t;
              return entry(y);
            };
            L(a, b) = L(b, a) = -0.5 * fd::d1_onesided(f1, chart.grid_spacing());
          }
        Eigen::LLT<MatrixXd> llt(gT);
        const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(n - 1, n - 1));
        const MatrixXd V = Linv.transpose();  // columns g_T-orthonormal
        const MatrixXd Lon = V.transpose() * L * V;
        BoundaryNode bn;
        bn.x = q.x;
        bn.weight_flat = q.weight * std::sqrt(gT.determinant());  // fold metric area in
        bn.wv = 0.0;
        bn.mu = Lon.trace() / (n - 1);
        bn.h = Lon.trace();
        bn.umbilic_residual =
            (Lon - bn.mu * MatrixXd::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff();
        bn.frame = MatrixXd::Zero(n, n);
        bn.frame.topLeftCorner(n - 1, n - 1) = V;
        bn.frame(n - 1, n - 1) = 1.0;  // inner normal +e_n
        bn.A = bn.frame.transpose() * eng.schouten(q.x) * bn.frame;
        slice.nodes.push_back(std::move(bn));
      }
      return slice;
    }
  }
  throw geometry_error("unknown chart kind");
}

VectorXd boundary_gradient(const ScalarField& f_on_sphere, const VectorXd& x, double R,
                           double fd_h) {
  ScalarField ext = [f_on_sphere, R](const VectorXd& y) { return f_on_sphere(R * y / y.norm()); };
  fd::Stencil st;
  st.h = fd_h;
  return fd::gradient(ext, x, st);
}

MatrixXd boundary_hessian(const WField& w, const ScalarField& f_on_sphere, const VectorXd& x,
                          double R, double fd_h) {
  const int n = static_cast<int>(x.size());
  ScalarField ext = [f_on_sphere, R](const VectorXd& y) { return f_on_sphere(R * y / y.norm()); };
  fd::Stencil st;
  st.h = fd_h;
  const MatrixXd Hflat = fd::hessian(ext, x, st);
  const VectorXd gflat = fd::gradient(ext, x, st);
  const MatrixXd F = adapted_flat_frame(x);

  const VectorXd wg = w.grad(x);
  MatrixXd H(n - 1, n - 1);
  VectorXd chi(n - 1), m(n - 1);
  for (int a = 0; a < n - 1; ++a) {
    chi[a] = F.col(a).dot(wg);
    m[a] = F.col(a).dot(gflat);
  }
  const double cross = chi.dot(m);
  for (int a = 0; a < n - 1; ++a)
    for (int b = 0; b < n - 1; ++b)
      H(a, b) = F.col(a).dot(Hflat * F.col(b)) + chi[a] * m[b] + chi[b] * m[a] -
                cross * (a == b);
  return std::exp(2.0 * w.value(x)) * H;
}

// ------------------------------------------------------ boundary identities

namespace {

std::vector<std::size_t> sample_indices(std::size_t total, int want) {
  std::vector<std::size_t> idx;
  if (total == 0) return idx;
  const std::size_t stride = std::max<std::size_t>(1, total / std::max(1, want));
  for (std::size_t i = 0; i < total; i += stride) idx.push_back(i);
  return idx;
}

}  // namespace

BoundaryIdentityReport check_boundary_identities(const Chart& chart, double fd_h, int max_nodes) {
  if (chart.kind == ChartKind::general_grid)
    throw geometry_error("boundary identities expect a conformally flat chart");
  BoundaryIdentityReport rep;
  const int n = chart.n;
  const double R = chart.radius;
  const bool face = (chart.kind == ChartKind::half_ball_flat);

  const BoundarySlice slice = build_boundary(chart);
  MetricEngine generic(conformal_metric_callback(chart.w, n), n, fd_h, 2);

  ScalarField mu_field = [&chart, R](const VectorXd& y) { return sphere_mu(chart.w, y, R); };

  for (std::size_t ii : sample_indices(slice.nodes.size(), max_nodes)) {
    const BoundaryNode& bn = slice.nodes[ii];
    const MatrixXd& E = bn.frame;  // g-orthonormal, coordinate components
    const Jet3 j = exponent_jet(chart.w, bn.x, true);
    const Tensor3 gA = conf_grad_schouten(j);
    const Tensor4 Rex = conf_riemann(j);

    VectorXd mu_a = VectorXd::Zero(n - 1);
    MatrixXd mu_hess = MatrixXd::Zero(n - 1, n - 1);
    if (!face) {
      const VectorXd gmu = boundary_gradient(mu_field, bn.x, R, fd_h);
      for (int a = 0; a < n - 1; ++a) mu_a[a] = E.col(a).dot(gmu);
      mu_hess = boundary_hessian(chart.w, mu_field, bn.x, R, fd_h);
    }

    auto contract3 = [&](const Tensor3& T, const VectorXd& ek, const VectorXd& ei,
                         const VectorXd& ej) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l) acc += T(k, i, l) * ek[k] * ei[i] * ej[l];
      return acc;
    };
    auto contract4 = [&](const Tensor4& T, const VectorXd& a, const VectorXd& b,
                         const VectorXd& c, const VectorXd& d) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) acc += T(i, jj, k, l) * a[i] * b[jj] * c[k] * d[l];
      return acc;
    };

    const VectorXd en = E.col(n - 1);
    MatrixXd t1mat(n - 1, n - 1), t2mat(n - 1, n - 1);
    const Tensor4 Rgen = generic.riemann(bn.x);

    for (int a = 0; a < n - 1; ++a) {
      rep.res_normal_gradient =
          std::max(rep.res_normal_gradient, std::abs(bn.A(a, n - 1) - mu_a[a]));
      rep.t0 = rep.res_normal_gradient;
      for (int b = 0; b < n - 1; ++b) {
        const double A_an_b = contract3(gA, E.col(b), E.col(a), en);
        const double rhs_b = A_an_b + bn.A(n - 1, n - 1) * bn.mu * (a == b) - bn.A(a, b) * bn.mu;
        rep.res_mu_hessian = std::max(rep.res_mu_hessian, std::abs(mu_hess(a, b) - rhs_b));

        const double Rnanb = contract4(Rgen, en, E.col(a), en, E.col(b));
        const double rhs_c1 = bn.A(a, b) + bn.A(n - 1, n - 1) * (a == b);
        rep.res_weyl_normal = std::max(rep.res_weyl_normal, std::abs(Rnanb - rhs_c1));
        t1mat(a, b) = bn.A(a, b) + bn.A(n - 1, n - 1) * (a == b) -
                      contract4(Rex, E.col(a), en, E.col(b), en);

        const double A_ab_n = contract3(gA, en, E.col(a), E.col(b));
        const double Ranbn = contract4(Rex, E.col(a), en, E.col(b), en);
        const double lhs_c2 = A_ab_n - 2.0 * bn.mu * bn.A(a, b);
        const double rhs_c2 = mu_hess(a, b) - Ranbn * bn.mu;
        rep.res_radial_deriv = std::max(rep.res_radial_deriv, std::abs(lhs_c2 - rhs_c2));
        t2mat(a, b) = lhs_c2 - rhs_c2;
      }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> e1(0.5 * (t1mat + t1mat.transpose()),
                                               Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<MatrixXd> e2(0.5 * (t2mat + t2mat.transpose()),
                                               Eigen::EigenvaluesOnly);
    rep.t1 = std::max(rep.t1, e1.eigenvalues().maxCoeff());
    rep.t2 = std::max(rep.t2, e2.eigenvalues().maxCoeff());
  }
  return rep;
}

MetricCallback warped_slab_metric(int n, std::function<double(double)> a,
                                  std::function<double(const VectorXd&)> b) {
  return [n, a, b](const VectorXd& x) {
    const double av = a(x[n - 1]);
    const double bv = b(x.head(n - 1));
    MatrixXd g = (av * av * bv * bv) * MatrixXd::Identity(n, n);
    g(n - 1, n - 1) = 1.0;
    return g;
  };
}

FermiChristoffelReport fermi_christoffels(const Chart& chart, int max_nodes) {
  if (chart.kind != ChartKind::general_grid || !chart.fermi_form)
    throw geometry_error("Fermi Christoffel check needs a Fermi-form grid chart");
  const int n = chart.n;
  const double h = chart.grid_spacing();
  MetricEngine eng(chart.metric, n, h, 4, true, chart.lo[n - 1]);

  // induced metric on the face as its own (n-1)-dimensional engine
  const double face = chart.lo[n - 1];
  MetricCallback induced = [metric = chart.metric, n, face](const VectorXd& xp) {
    VectorXd y(n);
    y.head(n - 1) = xp;
    y[n - 1] = face;
    return MatrixXd(metric(y).topLeftCorner(n - 1, n - 1));
  };
  MetricEngine eng_ind(induced, n - 1, h, 4);

  FermiChristoffelReport rep{};
  const BoundarySlice slice = build_boundary(chart);
  for (std::size_t ii : sample_indices(slice.nodes.size(), max_nodes)) {
    const BoundaryNode& bn = slice.nodes[ii];
    const MatrixXd g = chart.metric(bn.x);
    const Tensor3 G = eng.christoffel(bn.x);
    rep.mu = bn.mu;
    for (int a = 0; a < n - 1; ++a) {
      rep.res_normal_normal = std::max(rep.res_normal_normal, std::abs(G(n - 1, a, n - 1)));
      for (int b = 0; b < n - 1; ++b) {
        rep.res_normal_second =
            std::max(rep.res_normal_second, std::abs(G(n - 1, a, b) - bn.mu * g(a, b)));
        rep.res_mixed = std::max(rep.res_mixed,
                                 std::abs(G(b, a, n - 1) + bn.mu * double(a == b)));
      }
    }
    const Tensor3 Gi = eng_ind.christoffel(bn.x.head(n - 1));
    for (int c = 0; c < n - 1; ++c)
      for (int a = 0; a < n - 1; ++a)
        for (int b = 0; b < n - 1; ++b)
          rep.res_induced = std::max(rep.res_induced, std::abs(Gi(c, a, b) - G(c, a, b)));
  }
  return rep;
}

// --------------------------------------- normal-derivative identity checks

namespace {

// u with u|_sphere = v and u_n = -mu + mu_hat e^{-v} exactly on r = R
ScalarField boundary_adapted_field(const Chart& chart, const ScalarField& v, double mu_hat) {
  const double R = chart.radius;
  const WField w = chart.w;
  return [R, w, v, mu_hat](const VectorXd& x) {
    const double r = x.norm();
    const VectorXd xb = R * x / r;
    const double vv = v(xb);
    const double mu = sphere_mu(w, xb, R);
    const double D = std::exp(-w.value(xb)) * (mu - mu_hat * std::exp(-vv));
    return vv + (r - R) * D;
  };
}

struct CovDerivs {
  double u_n, u_nn;
  VectorXd u_t;        // tangential first derivatives
  MatrixXd hess;       // covariant Hessian in the adapted frame (full n x n)
  MatrixXd third_n;    // (nabla^3 u)(e_a, e_b; deriv e_n), tangential block
};

CovDerivs covariant_derivs(const Chart& chart, const ScalarField& u, const VectorXd& x,
                           const MatrixXd& E, double fd_h) {
  const int n = chart.n;
  fd::Stencil st;
  st.h = fd_h;
  const VectorXd du = fd::gradient(u, x, st);
  const MatrixXd Hu = fd::hessian(u, x, st);
  const std::vector<double> Tu = fd::third(u, x, st);
  auto tt = [&](int i, int j, int k) { return Tu[(std::size_t(i) * n + j) * n + k]; };

  const Jet3 j = exponent_jet(chart.w, x, true);
  const Tensor3 G = conf_christoffel(j);

  MatrixXd cov = Hu;
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      for (int m = 0; m < n; ++m) cov(i, jj) -= G(m, i, jj) * du[m];

  // partial_k Gamma^m_ij from the exponent Hessian
  auto dGamma = [&](int k, int m, int i, int jj) {
    return -(j.H(i, k) * (m == jj) + j.H(jj, k) * (m == i) - j.H(m, k) * (i == jj));
  };

  // nabla_k (cov)_ij
  Tensor3 third(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj < n; ++jj) {
        double acc = tt(i, jj, k);
        for (int m = 0; m < n; ++m)
          acc -= dGamma(k, m, i, jj) * du[m] + G(m, i, jj) * Hu(m, k);
        for (int m = 0; m < n; ++m) acc -= G(m, k, i) * cov(m, jj) + G(m, k, jj) * cov(i, m);
        third(k, i, jj) = acc;
      }

  CovDerivs out;
  const VectorXd en = E.col(n - 1);
  out.u_n = du.dot(en);
  out.u_t.resize(n - 1);
  for (int a = 0; a < n - 1; ++a) out.u_t[a] = du.dot(E.col(a));
  out.hess.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj) out.hess(i, jj) = E.col(i).dot(cov * E.col(jj));
  out.u_nn = out.hess(n - 1, n - 1);
  out.third_n.resize(n - 1, n - 1);
  for (int a = 0; a < n - 1; ++a)
    for (int b = 0; b < n - 1; ++b) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int jj = 0; jj < n; ++jj)
            acc += third(k, i, jj) * en[k] * E.col(a)[i] * E.col(b)[jj];
      out.third_n(a, b) = acc;
    }
  return out;
}

}  // namespace

NormalDerivativeReport check_normal_derivative_identities(const Chart& chart,
                                                          const ScalarField& boundary_value,
                                                          double mu_hat, double fd_h,
                                                          int max_nodes) {
  if (chart.kind == ChartKind::general_grid || chart.kind == ChartKind::half_ball_flat)
    throw geometry_error("normal-derivative identities expect a sphere-boundary chart");
  const int n = chart.n;
  const double R = chart.radius;
  const ScalarField u = boundary_adapted_field(chart, boundary_value, mu_hat);
  ScalarField mu_field = [&chart, R](const VectorXd& y) { return sphere_mu(chart.w, y, R); };

  NormalDerivativeReport rep;
  rep.mu_hat = mu_hat;
  const BoundarySlice slice = build_boundary(chart);
  for (std::size_t ii : sample_indices(slice.nodes.size(), max_nodes)) {
    const BoundaryNode& bn = slice.nodes[ii];
    const MatrixXd& E = bn.frame;
    const CovDerivs cd = covariant_derivs(chart, u, bn.x, E, fd_h);
    const double uval = u(bn.x);

    const VectorXd gmu = boundary_gradient(mu_field, bn.x, R, fd_h);
    VectorXd mu_a(n - 1);
    for (int a = 0; a < n - 1; ++a) mu_a[a] = E.col(a).dot(gmu);
    const MatrixXd mu_hess = boundary_hessian(chart.w, mu_field, bn.x, R, fd_h);

    const double emu = mu_hat * std::exp(-uval);
    for (int a = 0; a < n - 1; ++a) {
      const double lhs = cd.hess(n - 1, a);
      const double rhs = -mu_a[a] + bn.mu * cd.u_t[a] - emu * cd.u_t[a];
      rep.res_mixed_second = std::max(rep.res_mixed_second, std::abs(lhs - rhs));
    }

    const Jet3 j = exponent_jet(chart.w, bn.x, false);
    const Tensor4 Rex = conf_riemann(j);
    const VectorXd en = E.col(n - 1);
    const double un = -bn.mu + emu;  // boundary condition value
    const double mgu = mu_a.dot(cd.u_t);
    for (int a = 0; a < n - 1; ++a)
      for (int b = 0; b < n - 1; ++b) {
        double Rnban = 0.0;
        for (int i = 0; i < n; ++i)
          for (int jj = 0; jj < n; ++jj)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                Rnban += Rex(i, jj, k, l) * en[i] * E.col(b)[jj] * E.col(a)[k] * en[l];
        const double lhs = cd.third_n(a, b);
        const double rhs = (2.0 * bn.mu - emu) * cd.hess(a, b) -
                           bn.mu * cd.u_nn * (a == b) + emu * cd.u_t[a] * cd.u_t[b] -
                           mu_hess(a, b) + mu_a[a] * cd.u_t[b] + mu_a[b] * cd.u_t[a] -
                           mgu * (a == b) + Rnban * un - bn.mu * un * un * (a == b);
        rep.res_third = std::max(rep.res_third, std::abs(lhs - rhs));
      }
  }
  return rep;
}

double check_boundary_bianchi(const Chart& chart, const ScalarField& boundary_value, double fd_h,
                              int max_nodes) {
  if (chart.kind == ChartKind::general_grid || chart.kind == ChartKind::half_ball_flat)
    throw geometry_error("boundary Bianchi check expects a sphere-boundary chart");
  const int n = chart.n;
  const ScalarField u = boundary_adapted_field(chart, boundary_value, 0.0);
  fd::Stencil st;
  st.h = fd_h;

  // Schouten of e^{-2u} g via the conformal transformation formula
  auto A_hat = [&](const VectorXd& y) {
    const Jet3 jw = exponent_jet(chart.w, y, false);
    const VectorXd du = fd::gradient(u, y, st);
    const MatrixXd Hu = fd::hessian(u, y, st);
    const Tensor3 G = conf_christoffel(jw);
    MatrixXd cov = Hu;
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj < n; ++jj)
        for (int m = 0; m < n; ++m) cov(i, jj) -= G(m, i, jj) * du[m];
    // |du|_g^2 g = |du|_flat^2 delta for g = e^{-2w} delta
    return MatrixXd(cov + du * du.transpose() -
                    0.5 * du.squaredNorm() * MatrixXd::Identity(n, n) + conf_schouten(jw));
  };

  double worst = 0.0;
  const BoundarySlice slice = build_boundary(chart);
  for (std::size_t ii : sample_indices(slice.nodes.size(), max_nodes)) {
    const BoundaryNode& bn = slice.nodes[ii];
    const MatrixXd& E = bn.frame;
    const Jet3 jw = exponent_jet(chart.w, bn.x, false);
    const Tensor3 G = conf_christoffel(jw);
    const MatrixXd Ah = A_hat(bn.x);

    // coordinate partials of A_hat by outer stencils
    Tensor3 dA(n);
    for (int k = 0; k < n; ++k) {
      auto along = [&](double t) {
        VectorXd y = bn.x;
        y[k] += t;
        return A_hat(y);
      };
      const MatrixXd f1 = along(st.h), fm1 = along(-st.h), f2 = along(2 * st.h),
                     fm2 = along(-2 * st.h);
      for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj)
          dA(k, i, jj) = (8.0 * (f1(i, jj) - fm1(i, jj)) - (f2(i, jj) - fm2(i, jj))) /
                         (12.0 * st.h);
    }
    double trace = 0.0;
    const VectorXd en = E.col(n - 1);
    for (int a = 0; a < n - 1; ++a) {
      double cov_an = 0.0;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int jj = 0; jj < n; ++jj) {
            double nabla = dA(k, i, jj);
            for (int m = 0; m < n; ++m)
              nabla -= G(m, k, i) * Ah(m, jj) + G(m, k, jj) * Ah(i, m);
            cov_an += nabla * en[k] * E.col(a)[i] * E.col(a)[jj];
          }
      double A_aa = E.col(a).dot(Ah * E.col(a));
      trace += cov_an - 2.0 * bn.mu * A_aa;
    }
    worst = std::max(worst, std::abs(trace));
  }
  return worst;
}

}  // namespace sigmak::geom
