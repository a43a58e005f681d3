// Small finite-difference engine over scalar/matrix callbacks. Central
// stencils of order 2 or 4 in the interior; one-sided 3rd-order variants kick
// in when a half-space domain boundary sits closer than the stencil width.
#ifndef SIGMAK_FD_HPP
#define SIGMAK_FD_HPP

#include <functional>

#include "sigmak/types.hpp"

namespace sigmak::fd {

using Scalar1D = std::function<double(double)>;

struct Stencil {
  int order = 4;        // 2 or 4
  double h = 1e-3;
  // optional half-space restriction: axis >= floor is the admissible side
  int restricted_axis = -1;
  double floor = 0.0;
};

inline double d1(const Scalar1D& f, double h, int order) {
  if (order <= 2) return (f(h) - f(-h)) / (2.0 * h);
  return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
}

inline double d2(const Scalar1D& f, double h, int order) {
  if (order <= 2) return (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
  return (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) /
         (12.0 * h * h);
}

// third derivative, 4th-order central
inline double d3(const Scalar1D& f, double h) {
  return (f(-3.0 * h) / 8.0 - f(-2.0 * h) + 13.0 * f(-h) / 8.0 - 13.0 * f(h) / 8.0 + f(2.0 * h) -
          f(3.0 * h) / 8.0) /
         (h * h * h);
}

// one-sided 3rd-order first derivative at the low end of the domain
inline double d1_onesided(const Scalar1D& f, double h) {
  return (-11.0 / 6.0 * f(0.0) + 3.0 * f(h) - 1.5 * f(2.0 * h) + f(3.0 * h) / 3.0) / h;
}

// one-sided 3rd-order second derivative
inline double d2_onesided(const Scalar1D& f, double h) {
  return (35.0 / 12.0 * f(0.0) - 26.0 / 3.0 * f(h) + 9.5 * f(2.0 * h) - 14.0 / 3.0 * f(3.0 * h) +
          11.0 / 12.0 * f(4.0 * h)) /
         (h * h);
}

using ScalarND = std::function<double(const VectorXd&)>;

inline Scalar1D along(const ScalarND& f, const VectorXd& x, int axis) {
  return [&f, x, axis](double t) {
    VectorXd y = x;
    y[axis] += t;
    return f(y);
  };
}

inline bool needs_onesided(const Stencil& st, const VectorXd& x, int axis) {
  if (st.restricted_axis != axis) return false;
  const double margin = (st.order <= 2 ? 1.0 : 2.0) * st.h;
  return x[axis] - margin < st.floor - 1e-14;
}

inline double partial(const ScalarND& f, const VectorXd& x, int axis, const Stencil& st) {
  if (needs_onesided(st, x, axis)) return d1_onesided(along(f, x, axis), st.h);
  return d1(along(f, x, axis), st.h, st.order);
}

inline VectorXd gradient(const ScalarND& f, const VectorXd& x, const Stencil& st) {
  VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) g[i] = partial(f, x, i, st);
  return g;
}

inline MatrixXd hessian(const ScalarND& f, const VectorXd& x, const Stencil& st) {
  const int n = static_cast<int>(x.size());
  MatrixXd H(n, n);
  for (int i = 0; i < n; ++i) {
    if (needs_onesided(st, x, i))
      H(i, i) = d2_onesided(along(f, x, i), st.h);
    else
      H(i, i) = d2(along(f, x, i), st.h, st.order);
    for (int j = i + 1; j < n; ++j) {
      auto dj = [&](const VectorXd& y) { return partial(f, y, j, st); };
      H(i, j) = H(j, i) = partial(dj, x, i, st);
    }
  }
  return H;
}

// full third-derivative tensor, symmetric; interior points only
inline std::vector<double> third(const ScalarND& f, const VectorXd& x, const Stencil& st) {
  const int n = static_cast<int>(x.size());
  std::vector<double> T(std::size_t(n) * n * n, 0.0);
  auto at = [n, &T](int i, int j, int k) -> double& { return T[(std::size_t(i) * n + j) * n + k]; };
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        double v;
        if (i == j && j == k) {
          v = d3(along(f, x, i), st.h);
        } else if (i == j) {
          auto dii = [&](const VectorXd& y) { return d2(along(f, y, i), st.h, st.order); };
          v = partial(dii, x, k, st);
        } else if (j == k) {
          auto djj = [&](const VectorXd& y) { return d2(along(f, y, j), st.h, st.order); };
          v = partial(djj, x, i, st);
        } else {
          auto dk = [&](const VectorXd& y) { return partial(f, y, k, st); };
          auto djk = [&](const VectorXd& y) { return partial(dk, y, j, st); };
          v = partial(djk, x, i, st);
        }
        at(i, j, k) = at(i, k, j) = at(j, i, k) = at(j, k, i) = at(k, i, j) = at(k, j, i) = v;
      }
    }
  }
  return T;
}

}  // namespace sigmak::fd

#endif
