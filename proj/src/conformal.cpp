#include "sigmak/conformal.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace sigmak::conformal {

using symfun::mixed_table;
using symfun::sigma_k;
using symfun::Spectrum;

double coeff_C1(int n, int k, int i) {
  return factorial(2 * k - i - 1) * factorial(n - 2 * k + i) /
         (factorial(n - k) * double_factorial(2 * k - 2 * i - 1) * factorial(i));
}

double coeff_C2(int n, int k, int i) {
  return factorial(n - i - 1) / (factorial(n - k) * double_factorial(2 * k - 2 * i - 1));
}

double boundary_B2(const MatrixXd& AT, const MatrixXd& L, int n) {
  if (n < 3) throw domain_error("boundary_B2 needs n >= 3");
  const SymTensor A(AT), B(L);
  if (n >= 4) {
    const auto tab = mixed_table(A, B, 3);
    return 2.0 / (n - 2) * tab.sigma[2][1] + 2.0 / double((n - 2) * (n - 3)) * tab.sigma[3][0];
  }
  const double h = L.trace();
  const double L2 = (L * L).trace();
  return 2.0 * mixed_table(A, B, 2).sigma[2][1] + h * h * h / 3.0 - 0.5 * h * L2;
}

double boundary_Bk(const MatrixXd& AT, const MatrixXd& L, int n, int k, BkForm form) {
  if (form == BkForm::umbilic) {
    const int m = static_cast<int>(L.rows());
    const double mu = L.trace() / m;
    if ((L - mu * MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + std::abs(mu)))
      throw geometry_error("umbilic boundary density requested on a non-umbilic slice");
    return boundary_Bk_umbilic(AT, mu, n, k);
  }
  if (k == 2) return boundary_B2(AT, L, n);
  if (k < 3) throw domain_error("general boundary density needs k >= 2");
  if (n < 2 * k) throw domain_error("general boundary density needs n >= 2k");
  const auto tab = mixed_table(SymTensor(AT), SymTensor(L), 2 * k - 1);
  double acc = 0.0;
  for (int i = 0; i <= k - 1; ++i) acc += coeff_C1(n, k, i) * tab.sigma[2 * k - i - 1][i];
  return acc;
}

double boundary_Bk_umbilic(const MatrixXd& AT, double mu, int n, int k) {
  if (k < 2) throw domain_error("boundary density defined for k >= 2");
  const auto sig = symfun::sigma_all(SymTensor(AT).spectrum());
  double acc = 0.0;
  for (int i = 0; i <= k - 1; ++i)
    acc += coeff_C2(n, k, i) * sig[i] * std::pow(mu, 2 * k - 2 * i - 1);
  return acc;
}

// ------------------------------------------------------------------ states

ConformalState::ConformalState(Chart chart, ScalarField u, double u_fd_step)
    : chart_(std::move(chart)), u_(geom::WField(std::move(u), u_fd_step)) {}

ConformalState ConformalState::identity(Chart chart) {
  return ConformalState(std::move(chart), [](const VectorXd&) { return 0.0; }, 1e-2);
}

double ConformalState::total_exponent(const VectorXd& x) const {
  return chart_.w.value(x) + u_.value(x);
}

MatrixXd ConformalState::schouten_hat(const VectorXd& x) const {
  const int n = chart_.n;
  const geom::Jet3 jw = geom::exponent_jet(chart_.w, x, false);
  const geom::Jet3 ju = geom::exponent_jet(u_, x, false);
  const geom::Tensor3 G = geom::conf_christoffel(jw);
  MatrixXd cov = ju.H;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) cov(i, j) -= G(m, i, j) * ju.g[m];
  // |du|_g^2 g_ij = |du|_flat^2 delta_ij for g = e^{-2w} delta
  return cov + ju.g * ju.g.transpose() -
         0.5 * ju.g.squaredNorm() * MatrixXd::Identity(n, n) + geom::conf_schouten(jw);
}

Spectrum ConformalState::schouten_hat_spectrum(const VectorXd& x) const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(schouten_hat(x), Eigen::EigenvaluesOnly);
  return Spectrum(std::exp(2.0 * total_exponent(x)) * es.eigenvalues());
}

ConformalState::BoundaryData ConformalState::boundary_data(const BoundaryNode& bn) const {
  const int n = chart_.n;
  BoundaryData out;
  const double uv = u_.value(bn.x);
  const MatrixXd Ah = schouten_hat(bn.x);
  // ghat-orthonormal adapted frame = e^{u} * (g-orthonormal frame)
  const MatrixXd E = std::exp(uv) * bn.frame;
  MatrixXd Aad(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Aad(i, j) = E.col(i).dot(Ah * E.col(j));
  out.AT = Aad.topLeftCorner(n - 1, n - 1);
  out.A_nn = Aad(n - 1, n - 1);
  const double u_n = u_.grad(bn.x).dot(bn.frame.col(n - 1));
  out.mu_hat = std::exp(uv) * (u_n + bn.mu);
  out.ds_scale = std::exp(-(n - 1) * (bn.wv + uv));
  return out;
}

// --------------------------------------------------------------- functional

namespace {

FunctionalValue functional_Fk_single(const ConformalState& state, const Chart& chart, int k) {
  const int n = chart.n;
  FunctionalValue out;
  std::vector<double> terms, vols;
  for (const auto& q : chart.interior_quadrature()) {
    const Spectrum lam = state.schouten_hat_spectrum(q.x);
    const double dv = std::exp(-n * state.total_exponent(q.x)) * q.weight;
    terms.push_back(sigma_k(lam, k) * dv);
    vols.push_back(dv);
  }
  out.interior = pairwise_sum(terms);
  out.volume = pairwise_sum(vols);

  std::vector<double> bterms;
  const geom::BoundarySlice slice = geom::build_boundary(chart);
  for (const auto& bn : slice.nodes) {
    const auto bd = state.boundary_data(bn);
    bterms.push_back(boundary_Bk_umbilic(bd.AT, bd.mu_hat, n, k) * bd.ds_scale *
                     bn.weight_flat);
  }
  out.boundary = pairwise_sum(bterms);
  out.total = out.interior + out.boundary;
  return out;
}

}  // namespace

FunctionalValue functional_Fk(const ConformalState& state, int k) {
  FunctionalValue fine = functional_Fk_single(state, state.chart(), k);
  const FunctionalValue coarse = functional_Fk_single(state, state.chart().coarsened(), k);
  fine.quad_error =
      std::abs(fine.total - coarse.total) + 1e-12 * (1.0 + std::abs(fine.total));
  return fine;
}

// ---------------------------------------------------------- Gauss-Bonnet 4d

GaussBonnet4 gauss_bonnet4_pointwise(const Tensor4& R, const MatrixXd& A, const MatrixXd& L,
                                     int n) {
  if (n != 4) throw domain_error("four-dimensional boundary term needs n = 4");
  GaussBonnet4 out{};
  const int nn = n - 1;  // normal index in the adapted frame
  const double h = L.trace();
  const double L2 = (L * L).trace();
  const double L3 = (L * L * L).trace();

  // frame scalar curvature and Ricci from the lowered Riemann
  MatrixXd ric = MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += R(i, j, i, l);
      ric(j, l) = acc;
    }
  const double sc = ric.trace();

  double RgLg = 0.0;  // R_{gamma alpha gamma beta} L^{alpha beta}
  for (int g = 0; g < nn; ++g)
    for (int a = 0; a < nn; ++a)
      for (int b = 0; b < nn; ++b) RgLg += R(g, a, g, b) * L(a, b);

  out.B = 0.5 * sc * h - ric(nn, nn) * h - RgLg + h * h * h / 3.0 - h * L2 + 2.0 / 3.0 * L3;

  const MatrixXd AT = A.topLeftCorner(nn, nn);
  double AL = 0.0;
  for (int a = 0; a < nn; ++a)
    for (int b = 0; b < nn; ++b) AL += AT(a, b) * L(a, b);
  out.L4 = -2.0 * AT.trace() * h - 2.0 * (n - 3) * AL + 2.0 * RgLg;

  out.B2 = boundary_B2(AT, L, n);
  return out;
}

GaussBonnet4 gauss_bonnet4(const ConformalState& state, const BoundaryNode& bn) {
  const int n = state.n();
  if (n != 4) throw domain_error("four-dimensional boundary term needs n = 4");
  // exact conformal curvature of ghat from the combined exponent
  const geom::Jet3 j =
      geom::combined_jet(state.chart().w, state.u_field(), 1.0, bn.x, false);
  const Tensor4 Rc = geom::conf_riemann(j);
  const MatrixXd Ac = geom::conf_schouten(j);
  const double uv = state.u_value(bn.x);
  const MatrixXd E = std::exp(uv) * bn.frame;  // ghat-orthonormal

  Tensor4 Rf(n);
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double acc = 0.0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d)
                  acc += Rc(a, b, c, d) * E(a, i) * E(b, jj) * E(c, k) * E(d, l);
          Rf(i, jj, k, l) = acc;
        }
  MatrixXd Af(n, n);
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj) Af(i, jj) = E.col(i).dot(Ac * E.col(jj));

  const auto bd = state.boundary_data(bn);
  const MatrixXd L = bd.mu_hat * MatrixXd::Identity(n - 1, n - 1);
  return gauss_bonnet4_pointwise(Rf, Af, L, n);
}

// --------------------------------------------------- Gauss-Bonnet integrand

namespace {

int perm_sign(std::vector<int> p) {
  int sign = 1;
  for (std::size_t i = 0; i < p.size(); ++i)
    while (p[i] != static_cast<int>(i)) {
      std::swap(p[i], p[p[i]]);
      sign = -sign;
    }
  return sign;
}

// sum over permutation pairs of products of curvature 2-blocks and L-columns;
// the frame is orthonormal so raised and lowered components coincide.
double kronecker_sum(const Tensor4& R, const MatrixXd* L, int m, int blocks, int l_count) {
  std::vector<int> up(m), lo(m);
  for (int i = 0; i < m; ++i) up[i] = i;
  double total = 0.0;
  std::vector<int> upv = up;
  do {
    const int su = perm_sign(upv);
    std::vector<int> lov = up;
    do {
      double term = su * perm_sign(lov);
      for (int b = 0; b < blocks; ++b)
        term *= R(upv[2 * b], upv[2 * b + 1], lov[2 * b], lov[2 * b + 1]);
      for (int c = 0; c < l_count; ++c)
        term *= (*L)(upv[2 * blocks + c], lov[2 * blocks + c]);
      total += term;
    } while (std::next_permutation(lov.begin(), lov.end()));
  } while (std::next_permutation(upv.begin(), upv.end()));
  return total;
}

}  // namespace

double En_kronecker(const Tensor4& R, int n) {
  if (n % 2 != 0) throw domain_error("Euler density needs even dimension");
  const double norm = std::pow(2.0, n / 2) * factorial(n / 2);
  return kronecker_sum(R, nullptr, n, n / 2, 0) / norm;
}

double En_sigma(const Spectrum& spec, int n) {
  if (n % 2 != 0) throw domain_error("Euler density needs even dimension");
  return std::pow(2.0, n / 2) * factorial(n / 2) * sigma_k(spec, n / 2);
}

double Qin_kronecker(const Tensor4& R, const MatrixXd& L, int n, int i) {
  const int m = n - 1;
  if (i < 0 || 2 * i > m) throw domain_error("boundary Euler density index out of range");
  const double norm = std::pow(2.0, 0.5 * n - 2 * i) /
                      (factorial(i) * double_factorial(n - 1 - 2 * i));
  return norm * kronecker_sum(R, &L, m, i, m - 2 * i);
}

double Qin_sigma(const MatrixXd& AT, const MatrixXd& L, int n, int i) {
  const double norm = std::pow(2.0, n / 2) * factorial(n / 2) * coeff_C1(n, n / 2, i);
  return norm * mixed_table(SymTensor(AT), SymTensor(L), n - 1 - i).sigma[n - 1 - i][i];
}

EulerEstimate euler_characteristic(const ConformalState& state) {
  const int n = state.n();
  if (n % 2 != 0) throw domain_error("Euler characteristic assembly needs even n");
  const Chart& chart = state.chart();

  std::vector<double> terms;
  for (const auto& q : chart.interior_quadrature()) {
    const Spectrum lam = state.schouten_hat_spectrum(q.x);
    terms.push_back(En_sigma(lam, n) * std::exp(-n * state.total_exponent(q.x)) * q.weight);
  }
  EulerEstimate out{};
  out.interior = pairwise_sum(terms);

  std::vector<double> bterms;
  for (const auto& bn : geom::build_boundary(chart).nodes) {
    const auto bd = state.boundary_data(bn);
    const MatrixXd L = bd.mu_hat * MatrixXd::Identity(n - 1, n - 1);
    double q = 0.0;
    for (int i = 0; i <= n / 2 - 1; ++i) q += Qin_sigma(bd.AT, L, n, i);
    bterms.push_back(q * bd.ds_scale * bn.weight_flat);
  }
  out.boundary = pairwise_sum(bterms);
  out.chi = (out.interior + out.boundary) / std::pow(4.0 * std::numbers::pi, n / 2);
  return out;
}

// ------------------------------------------------------------- deformation

DeformedTensor deformed_tensor(const MatrixXd& A_coord, double w_exponent, double t, int n) {
  DeformedTensor out;
  out.t = t;
  const double tr_g = std::exp(2.0 * w_exponent) * A_coord.trace();
  // in coordinates: A + (1-t)/2 tr_g(A) e^{-2w} delta = A + (1-t)/2 tr(A) delta
  out.At = A_coord + 0.5 * (1.0 - t) * A_coord.trace() * MatrixXd::Identity(n, n);
  out.trace = (1.0 + n * (1.0 - t) / 2.0) * tr_g;
  return out;
}

symfun::Spectrum deformed_spectrum(const Spectrum& lam, double t) {
  return Spectrum(lam.values.array() + 0.5 * (1.0 - t) * lam.values.sum());
}

}  // namespace sigmak::conformal
