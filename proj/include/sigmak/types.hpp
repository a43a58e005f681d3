#ifndef SIGMAK_TYPES_HPP
#define SIGMAK_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigmak {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Thrown when an order/dimension argument is outside its admissible range.
class domain_error : public std::invalid_argument {
public:
  explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a spectrum required to lie in a positive cone does not.
// Carries the first failing sigma so callers can report or shrink steps.
class cone_error : public std::runtime_error {
public:
  cone_error(const std::string& what, int failing_order, double failing_sigma)
      : std::runtime_error(what), order(failing_order), sigma(failing_sigma) {}
  int order;
  double sigma;
};

// Geometry-side failures (non-positive-definite metric, unsupported chart form).
class geometry_error : public std::runtime_error {
public:
  explicit geometry_error(const std::string& what) : std::runtime_error(what) {}
};

// Solver-side failures with a distinct reason tag.
class solve_error : public std::runtime_error {
public:
  enum class reason { max_iter, line_search, cone_guard, step_underflow, singular_jacobian };
  solve_error(reason r, const std::string& what) : std::runtime_error(what), why(r) {}
  reason why;
};

inline double factorial(int m) {
  if (m < 0) throw domain_error("factorial of negative integer");
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

// (-1)!! = 0!! = 1 so that boundary coefficients stay defined at their edge terms.
inline double double_factorial(int m) {
  if (m < -1) throw domain_error("double factorial below -1");
  double f = 1.0;
  for (int i = m; i >= 2; i -= 2) f *= i;
  return f;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * double(n - k + i) / double(i);
  return b;
}

// Deterministic pairwise reduction; independent of any evaluation-order games
// upstream and much better conditioned than a running sum on long node lists.
inline double pairwise_sum(const std::vector<double>& v) {
  std::vector<double> buf(v);
  std::size_t m = buf.size();
  if (m == 0) return 0.0;
  while (m > 1) {
    std::size_t half = (m + 1) / 2;
    for (std::size_t i = 0; i < m / 2; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
    if (m % 2 == 1) buf[m / 2] = buf[m - 1];
    m = half;
  }
  return buf[0];
}

}  // namespace sigmak

#endif
