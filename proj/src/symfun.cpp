#include "sigmak/symfun.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace sigmak::symfun {

Spectrum SymTensor::spectrum() const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(entries, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  return Spectrum(es.eigenvalues());
}

std::vector<double> sigma_all(const Spectrum& lambda) {
  const int n = lambda.n();
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double x = lambda.values[i];
    for (int j = std::min(i + 1, n); j >= 1; --j) e[j] += x * e[j - 1];
  }
  return e;
}

std::vector<double> sigma_all_charpoly(const MatrixXd& W) {
  const int n = static_cast<int>(W.rows());
  if (W.cols() != n) throw domain_error("sigma_all_charpoly: square matrix required");
  // power traces p_i = tr(W^i), then Newton's identities.
  std::vector<double> p(n + 1, 0.0);
  MatrixXd P = W;
  for (int i = 1; i <= n; ++i) {
    p[i] = P.trace();
    if (i < n) P = P * W;
  }
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    double acc = 0.0;
    double sign = 1.0;
    for (int i = 1; i <= k; ++i) {
      acc += sign * e[k - i] * p[i];
      sign = -sign;
    }
    e[k] = acc / k;
  }
  return e;
}

double sigma_k(const Spectrum& lambda, int k) {
  if (k < 0 || k > lambda.n()) throw domain_error("sigma_k: order out of range");
  if (k == 0) return 1.0;
  return sigma_all(lambda)[k];
}

double sigma_k(const SymTensor& W, int k) {
  if (k < 0 || k > W.n()) throw domain_error("sigma_k: order out of range");
  if (k == 0) return 1.0;
  return sigma_all(W.spectrum())[k];
}

SymTensor newton_tensor(const SymTensor& W, int q) {
  const int n = W.n();
  if (q < 0 || q > n) throw domain_error("newton_tensor: order out of range");
  const std::vector<double> e = sigma_all(W.spectrum());
  MatrixXd T = MatrixXd::Identity(n, n);
  for (int j = 1; j <= q; ++j) T = e[j] * MatrixXd::Identity(n, n) - T * W.entries;
  return SymTensor(T);
}

MixedTable mixed_table(const SymTensor& A, const SymTensor& B, int qmax) {
  const int m = A.n();
  if (B.n() != m) throw domain_error("mixed functions: dimension mismatch between A and B");
  if (qmax < 0 || qmax > m) throw domain_error("mixed functions: order out of range");

  MixedTable tab;
  tab.m = m;
  tab.qmax = qmax;
  tab.sigma.assign(qmax + 1, {});
  tab.tensor.assign(qmax + 1, {});
  tab.sigma[0] = {1.0};
  tab.tensor[0] = {MatrixXd::Identity(m, m)};

  const MatrixXd I = MatrixXd::Identity(m, m);
  for (int q = 1; q <= qmax; ++q) {
    tab.sigma[q].assign(q + 1, 0.0);
    tab.tensor[q].assign(q + 1, MatrixXd());
    for (int r = 0; r <= q; ++r) {
      // Contract the previous tensor with whichever slot exists; both routes
      // agree when 0 < r < q, which the tests exercise.
      double s;
      if (r >= 1)
        s = (tab.tensor[q - 1][r - 1] * A.entries).trace() / q;
      else
        s = (tab.tensor[q - 1][r] * B.entries).trace() / q;
      tab.sigma[q][r] = s;

      MatrixXd T = s * I;
      if (r >= 1) T -= (double(r) / q) * (A.entries * tab.tensor[q - 1][r - 1]);
      if (r <= q - 1) T -= (double(q - r) / q) * (B.entries * tab.tensor[q - 1][r]);
      // The delta expansion symmetrizes only after summing both slot groups.
      tab.tensor[q][r] = 0.5 * (T + T.transpose());
    }
  }
  return tab;
}

double mixed_sigma(const SymTensor& A, const SymTensor& B, int q, int r) {
  if (r < 0 || r > q) throw domain_error("mixed_sigma: need 0 <= r <= q");
  return mixed_table(A, B, q).sigma[q][r];
}

SymTensor mixed_newton(const SymTensor& A, const SymTensor& B, int q, int r) {
  if (r < 0 || r > q) throw domain_error("mixed_newton: need 0 <= r <= q");
  return SymTensor(mixed_table(A, B, q).tensor[q][r]);
}

ConeTag cone_membership(const Spectrum& lambda, int k, double tol) {
  const int n = lambda.n();
  if (k < 1 || k > n) throw domain_error("cone_membership: order out of range");
  const std::vector<double> e = sigma_all(lambda);
  const double scale = 1.0 + lambda.values.cwiseAbs().maxCoeff();

  ConeTag tag;
  tag.k = k;
  tag.sigmas.assign(e.begin() + 1, e.begin() + k + 1);
  tag.verdict = ConeVerdict::inside;
  double band = scale;
  for (int i = 1; i <= k; ++i) {
    band *= scale;  // tol * (1+|lambda|_inf)^i keeps strictness scale-aware
    const double thr = tol * band / scale;
    if (e[i] < -thr) return tag.verdict = ConeVerdict::outside, tag;
    if (e[i] <= thr) tag.verdict = ConeVerdict::boundary;
  }
  return tag;
}

namespace {

// sigma_{k}(lambda with index i removed), for all i at once.
VectorXd sigma_deleted(const VectorXd& lambda, int k) {
  const int n = static_cast<int>(lambda.size());
  VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> e(k + 1, 0.0);
    e[0] = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int l = k; l >= 1; --l) e[l] += lambda[j] * e[l - 1];
    }
    out[i] = e[k];
  }
  return out;
}

// sigma_{k}(lambda with indices i and j removed); i != j.
double sigma_deleted2(const VectorXd& lambda, int k, int i, int j) {
  const int n = static_cast<int>(lambda.size());
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (int l = 0; l < n; ++l) {
    if (l == i || l == j) continue;
    for (int m = k; m >= 1; --m) e[m] += lambda[l] * e[m - 1];
  }
  return e[k];
}

}  // namespace

FValue F_normalized(const Spectrum& lambda, int k, double cone_tol) {
  const int n = lambda.n();
  if (k < 1 || k > n) throw domain_error("F_normalized: order out of range");
  const ConeTag tag = cone_membership(lambda, k, cone_tol);
  if (tag.verdict != ConeVerdict::inside) {
    int bad = 1;
    while (bad <= k && tag.sigmas[bad - 1] > 0.0) ++bad;
    const int idx = std::min(bad, k);
    throw cone_error("F_normalized: spectrum not inside the positive k-cone", idx,
                     tag.sigmas[idx - 1]);
  }
  const double sk = tag.sigmas[k - 1];
  const double norm = std::pow(binomial(n, k), -1.0 / k);
  FValue out;
  out.value = norm * std::pow(sk, 1.0 / k);
  const VectorXd dsk = sigma_deleted(lambda.values, k - 1);
  out.gradient = Spectrum((norm / k) * std::pow(sk, 1.0 / k - 1.0) * dsk);
  return out;
}

MatrixXd F_hessian(const Spectrum& lambda, int k) {
  const int n = lambda.n();
  if (k < 1 || k > n) throw domain_error("F_hessian: order out of range");
  const double sk = sigma_k(lambda, k);
  const double norm = std::pow(binomial(n, k), -1.0 / k);
  const VectorXd g = sigma_deleted(lambda.values, k - 1);
  MatrixXd H(n, n);
  const double c1 = (norm / k) * std::pow(sk, 1.0 / k - 1.0);
  const double c2 = (norm / k) * (1.0 / k - 1.0) * std::pow(sk, 1.0 / k - 2.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double sij = (i == j || k < 2) ? 0.0 : sigma_deleted2(lambda.values, k - 2, i, j);
      H(i, j) = c1 * sij + c2 * g[i] * g[j];
    }
  }
  return H;
}

double uniform(std::uint64_t& state, double lo, double hi) {
  // splitmix64 step; stable across platforms and standard libraries.
  state += 0x9E3779B97f4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z = z ^ (z >> 31);
  const double u = double(z >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Spectrum sample_cone_point(int n, int k, std::uint64_t& state, int retry_cap) {
  VectorXd v(n);
  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    for (int i = 0; i < n; ++i) v[i] = uniform(state, -1.0, 2.0);
    Spectrum s(v);
    if (cone_membership(s, k).verdict == ConeVerdict::inside) return s;
  }
  throw std::runtime_error("sample_cone_point: retry cap exhausted");
}

StructureReport check_structure_conditions(int k, int n, int samples, std::uint64_t seed) {
  if (k < 1 || 2 * k < 2 || k > n) throw domain_error("check_structure_conditions: bad order");
  if (samples < 1) throw domain_error("check_structure_conditions: samples >= 1 required");

  StructureReport rep;
  rep.samples = samples;
  rep.epsilon = std::numeric_limits<double>::infinity();
  rep.rho = 0.0;
  rep.s1_margin = -std::numeric_limits<double>::infinity();
  rep.s0_min = std::numeric_limits<double>::infinity();
  rep.s2_min = std::numeric_limits<double>::infinity();

  std::uint64_t state = seed;
  for (int s = 0; s < samples; ++s) {
    const Spectrum lam = sample_cone_point(n, k, state);
    const FValue f = F_normalized(lam, k);
    const double sigma1 = lam.values.sum();

    rep.s0_min = std::min(rep.s0_min, f.value);
    rep.s2_min = std::min(rep.s2_min, f.gradient.values.minCoeff());
    rep.epsilon = std::min(rep.epsilon, f.gradient.values.minCoeff() * sigma1 / f.value);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(F_hessian(lam, k), Eigen::EigenvaluesOnly);
    rep.s1_margin = std::max(rep.s1_margin, es.eigenvalues().maxCoeff());

    const double gsum = f.gradient.values.sum();
    for (int i = 0; i < n; ++i) {
      if (lam.values[i] > 0.0) continue;
      ++rep.cond_a_samples;
      rep.rho = std::max(rep.rho, (gsum - f.gradient.values[i]) / f.gradient.values[i]);
    }
  }

  rep.s0 = rep.s0_min > 0.0;
  rep.s1 = rep.s1_margin <= 1e-8;  // numerical PSD test needs slack
  rep.s2 = rep.s2_min > 0.0;
  rep.s3 = rep.epsilon >= 1.0 / k - 1e-8;
  rep.cond_a = rep.cond_a_samples == 0 || rep.rho <= double(n - k) + 1e-8;
  return rep;
}

}  // namespace sigmak::symfun
