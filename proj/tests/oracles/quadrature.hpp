#pragma once

// Test-only oracles: composite Gauss-Legendre quadrature and a dense
// tridiagonal eigen-solve for the shifted harmonic oscillator.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>

namespace glsurf::oracle {

/// Composite 5-point Gauss-Legendre on [a, b] with `panels` panels.
inline double gauss_legendre(const std::function<double(double)>& g, double a, double b, int panels) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  const double hp = (b - a) / panels;
  double total = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * hp;
    for (int k = 0; k < 5; ++k) total += 0.5 * hp * w[k] * g(mid + 0.5 * hp * x[k]);
  }
  return total;
}

/// Lowest Neumann eigenvalue of -d^2 + (t + alpha)^2 on [0, t_max], cell-centred
/// finite differences (a different discretization from the library's nodal one).
inline double dense_lowest_eigenvalue(double alpha, double t_max, int n) {
  const double h = t_max / n;
  Eigen::VectorXd diag(n), off(n - 1);
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) * h;
    const int neighbours = (i == 0 || i == n - 1) ? 1 : 2;
    diag[i] = neighbours / (h * h) + (t + alpha) * (t + alpha);
  }
  off.setConstant(-1.0 / (h * h));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

struct DenseTheta0 {
  double theta0;
  double alpha0;
};

inline DenseTheta0 dense_theta0(double t_max = 20.0, int n = 4001) {
  // The ground-state energy is unimodal in alpha; golden section on a wide bracket.
  double lo = -1.5, hi = 0.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = dense_lowest_eigenvalue(c, t_max, n), fd = dense_lowest_eigenvalue(d, t_max, n);
  while (hi - lo > 1e-6) {
    if (fc < fd) {
      hi = d, d = c, fd = fc;
      c = hi - g * (hi - lo);
      fc = dense_lowest_eigenvalue(c, t_max, n);
    } else {
      lo = c, c = d, fc = fd;
      d = lo + g * (hi - lo);
      fd = dense_lowest_eigenvalue(d, t_max, n);
    }
  }
  const double a = 0.5 * (lo + hi);
  return {dense_lowest_eigenvalue(a, t_max, n), a};
}

}  // namespace glsurf::oracle
