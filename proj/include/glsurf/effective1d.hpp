#pragma once

// Effective half-line problem: profiles f(t) on [0, t_max], the shift alpha,
// the optimal pair (alpha*, f*), the potential function F, the cost function K
// and the linear threshold Theta0.

#include "glsurf/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace glsurf {

struct Grid1D {
  double t_max = 15.0;
  int n = 3001;

  Grid1D() = default;
  Grid1D(double t_max_, int n_);

  double h() const { return t_max / (n - 1); }
  double t(int i) const { return i * h(); }
  /// Trapezoid weight of node i.
  double weight(int i) const { return (i == 0 || i == n - 1) ? 0.5 * h() : h(); }
  /// Same grid with the spacing halved (2n - 1 points).
  Grid1D refined() const { return Grid1D(t_max, 2 * n - 1); }

  bool operator==(const Grid1D& o) const { return t_max == o.t_max && n == o.n; }
};

struct Profile1D {
  Grid1D grid;
  ArrayXd values;

  Profile1D() = default;
  Profile1D(const Grid1D& g, ArrayXd v);

  static Profile1D zero(const Grid1D& g);
  /// e^{-t^2/2}, the default initial guess.
  static Profile1D gaussian(const Grid1D& g);

  double sup_norm() const { return values.abs().maxCoeff(); }
  /// Linear interpolation; zero beyond t_max.
  double operator()(double t) const;
};

struct EffectiveSolution {
  double b = 0.0;
  double alpha_star = 0.0;
  Profile1D f_star;
  double energy = 0.0;
  double theta0 = 0.0;
  /// Centered-difference dE_alpha/dalpha at alpha_star.
  double dE_dalpha = 0.0;
  /// Envelope-theorem derivative 2 sum w (t + alpha) f^2 (equals F(t_max)).
  double dE_dalpha_envelope = 0.0;
  /// b outside (1, 1/theta0).
  bool regime_flag = false;
  /// Outer search hit a flat landscape; alpha_star is the midpoint.
  bool flat_flag = false;

  bool trivial(double tol = 1e-6) const { return f_star.sup_norm() <= tol; }
};

struct CostTable {
  Grid1D grid;
  ArrayXd F_values;
  ArrayXd K_values;

  double F_end() const { return F_values[F_values.size() - 1]; }
  double F_min() const { return F_values.minCoeff(); }
  double K_min() const { return K_values.minCoeff(); }
};

/// c e^{-(t+sqrt2)^2/2} <= f <= C e^{-(t+alpha)^2/2} where f > 1e-12.
struct DecayFit {
  double c_fit = 0.0;
  double C_fit = 0.0;
  bool ok = false;
  /// max f* over t >= t_max - 2.
  double tail_max = 0.0;
};

struct Theta0Result {
  double theta0 = 0.0;
  double alpha0 = 0.0;
  /// Same quantities on the refined grid (spacing / 2).
  double theta0_refined = 0.0;
  double alpha0_refined = 0.0;
  double agreement_gap = 0.0;
};

struct InnerOptions {
  double tol = 1e-9;
  int max_iterations = 200000;
  /// Residual below which a Newton step is attempted before the BB step.
  double newton_switch = 1e30;
};

struct OuterOptions {
  double scan_lo = -3.0;
  double scan_hi = 1.0;
  double scan_step = 0.1;
  double tol = 1e-7;
  double fd_step = 1e-4;
  InnerOptions inner;
};

struct ProfileMinimum {
  Profile1D profile;
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Discrete energy kernels, written against Eigen array expressions.
//
//   E = sum_links (f_{i+1} - f_i)^2 / h
//     + sum_i w_i [ (t_i + alpha)^2 f_i^2 - (2 f_i^2 - f_i^4) / (2b) ]

template <typename Derived>
typename Derived::Scalar energy_1d_kernel(const Eigen::ArrayBase<Derived>& f, const Grid1D& grid,
                                          typename Derived::Scalar alpha,
                                          typename Derived::Scalar b) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = f.size();
  const Scalar h = grid.h();
  const auto diff = f.tail(n - 1) - f.head(n - 1);
  Scalar kinetic = diff.square().sum() / h;
  Scalar potential = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar s = grid.t(int(i)) + alpha;
    const Scalar f2 = f[i] * f[i];
    potential += grid.weight(int(i)) * (s * s * f2 - (2 * f2 - f2 * f2) / (2 * b));
  }
  return kinetic + potential;
}

/// Gradient of energy_1d_kernel with respect to the nodal values.
template <typename Derived>
ArrayX<typename Derived::Scalar> gradient_1d_kernel(const Eigen::ArrayBase<Derived>& f,
                                                    const Grid1D& grid,
                                                    typename Derived::Scalar alpha,
                                                    typename Derived::Scalar b) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = f.size();
  const Scalar h = grid.h();
  ArrayX<Scalar> g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar lap = 0;
    if (i > 0) lap += f[i] - f[i - 1];
    if (i + 1 < n) lap += f[i] - f[i + 1];
    const Scalar s = grid.t(int(i)) + alpha;
    g[i] = 2 * lap / h +
           2 * grid.weight(int(i)) * (s * s * f[i] - (1 - f[i] * f[i]) * f[i] / b);
  }
  return g;
}

// ---------------------------------------------------------------------------

/// Quadrature of the half-line functional. Throws InvalidInputError on
/// non-finite values and ParameterError for b <= 0.
double eval_energy_1d(const Profile1D& f, double alpha, double b);

/// Mass-normalized discrete gradient g_i / (2 w_i): the discrete
/// Euler-Lagrange residual including the natural endpoint conditions.
ArrayXd discrete_residual_1d(const Profile1D& f, double alpha, double b);

ProfileMinimum minimize_profile(double alpha, double b, const Grid1D& grid, const Profile1D& init,
                                const InnerOptions& opts = {});

EffectiveSolution minimize_joint(double b, const Grid1D& grid = {}, const OuterOptions& opts = {});

/// Sup-norm of -f'' + (t+alpha)^2 f - (1-f^2) f / b on interior points plus |f'(0)|.
double el_residual(const EffectiveSolution& sol);
double el_residual(const Profile1D& f, double alpha, double b);

CostTable compute_cost_table(const EffectiveSolution& sol);
CostTable compute_cost_table(const Profile1D& f, double alpha);

DecayFit check_decay(const EffectiveSolution& sol);
DecayFit check_decay(const Profile1D& f, double alpha);

/// Lowest Neumann eigenvalue of -d^2/dt^2 + (t + alpha)^2 on the discretized half-line.
double lowest_eigenvalue(const Grid1D& grid, double alpha);

Theta0Result solve_theta0(const Grid1D& grid = Grid1D(15.0, 3001));

}  // namespace glsurf
