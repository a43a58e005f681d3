#ifndef SIGMAK_SYMFUN_HPP
#define SIGMAK_SYMFUN_HPP

#include <cstdint>
#include <vector>

#include "sigmak/types.hpp"

namespace sigmak::symfun {

// Ordered list of n real eigenvalues.
struct Spectrum {
  VectorXd values;
  int n() const { return static_cast<int>(values.size()); }

  Spectrum() = default;
  explicit Spectrum(VectorXd v) : values(std::move(v)) {
    if (values.size() < 1) throw domain_error("Spectrum needs n >= 1");
    if (!values.allFinite()) throw domain_error("Spectrum entries must be finite");
  }
  static Spectrum ones(int n) { return Spectrum(VectorXd::Ones(n)); }
};

// Symmetric matrix argument; symmetry is enforced at construction.
struct SymTensor {
  MatrixXd entries;
  int n() const { return static_cast<int>(entries.rows()); }

  SymTensor() = default;
  explicit SymTensor(const MatrixXd& m) : entries(0.5 * (m + m.transpose())) {
    if (m.rows() != m.cols() || m.rows() < 1) throw domain_error("SymTensor must be square");
    if (!entries.allFinite()) throw domain_error("SymTensor entries must be finite");
  }
  static SymTensor identity(int n) { return SymTensor(MatrixXd::Identity(n, n)); }

  Spectrum spectrum() const;
};

enum class ConeVerdict { inside, boundary, outside };

struct ConeTag {
  int k = 0;
  ConeVerdict verdict = ConeVerdict::outside;
  std::vector<double> sigmas;  // sigma_1 .. sigma_k
};

struct StructureReport {
  double epsilon = 0.0;          // worst sampled min_i F^i * sigma_1 / F
  double rho = 0.0;              // worst sampled sum_{j!=i} F^j / F^i over lambda_i <= 0
  double s1_margin = 0.0;        // largest Hessian eigenvalue seen (concavity wants <= 0)
  double s0_min = 0.0;           // smallest sampled F
  double s2_min = 0.0;           // smallest sampled gradient entry
  bool s0 = false, s1 = false, s2 = false, s3 = false, cond_a = false;
  int samples = 0;
  int cond_a_samples = 0;        // how many samples had some lambda_i <= 0
};

// All sigma_0..sigma_m of a spectrum via the product expansion of
// prod_i (x + lambda_i); exact up to roundoff, no cancellation surprises.
std::vector<double> sigma_all(const Spectrum& lambda);

// Characteristic-polynomial route (Newton's identities on power traces).
// Works for general square matrices, which the derivative tests rely on.
std::vector<double> sigma_all_charpoly(const MatrixXd& W);

double sigma_k(const Spectrum& lambda, int k);
double sigma_k(const SymTensor& W, int k);

// q-th Newton tensor T_q(W) = sigma_q I - T_{q-1} W.
SymTensor newton_tensor(const SymTensor& W, int q);

// Mixed symmetric functions / Newton tensors with r slots of A and q-r of B.
// Evaluated by a recursion in q obtained from expanding the generalized
// Kronecker delta along its last index pair:
//   sigma_{q,r} = tr(T_{q-1,r-1} A)/q = tr(T_{q-1,r} B)/q,
//   T_{q,r} = sigma_{q,r} I - (r/q) A T_{q-1,r-1} - ((q-r)/q) B T_{q-1,r}.
double mixed_sigma(const SymTensor& A, const SymTensor& B, int q, int r);
SymTensor mixed_newton(const SymTensor& A, const SymTensor& B, int q, int r);

// Whole table T_{q,r} for q <= qmax; cheaper when several orders are needed.
struct MixedTable {
  int m = 0, qmax = 0;
  // indexed [q][r], r <= q
  std::vector<std::vector<double>> sigma;
  std::vector<std::vector<MatrixXd>> tensor;
};
MixedTable mixed_table(const SymTensor& A, const SymTensor& B, int qmax);

ConeTag cone_membership(const Spectrum& lambda, int k, double tol = 1e-12);

struct FValue {
  double value = 0.0;
  Spectrum gradient;
};

// Normalized operator F = binom(n,k)^{-1/k} sigma_k^{1/k}, F(e) = 1.
// Throws cone_error when lambda is not strictly inside the positive k-cone.
FValue F_normalized(const Spectrum& lambda, int k, double cone_tol = 1e-12);

// Hessian of F in the eigenvalues (for the concavity check).
MatrixXd F_hessian(const Spectrum& lambda, int k);

// Rejection sampler for the positive k-cone, uniform draws in [-1,2]^n.
Spectrum sample_cone_point(int n, int k, std::uint64_t& state, int retry_cap = 100000);

StructureReport check_structure_conditions(int k, int n, int samples, std::uint64_t seed);

// xorshift-style generator kept local so sampled streams are stable across
// standard libraries; uniform in [lo, hi).
double uniform(std::uint64_t& state, double lo, double hi);

}  // namespace sigmak::symfun

#endif
