#include "glsurf/effective1d.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <tuple>

namespace glsurf {

namespace {

constexpr double kGolden = 0.6180339887498949;

void require_finite(const ArrayXd& v, const char* what) {
  if (!v.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite values");
}

ArrayXd weights(const Grid1D& g) {
  ArrayXd w = ArrayXd::Constant(g.n, g.h());
  w[0] = w[g.n - 1] = 0.5 * g.h();
  return w;
}

double residual_norm(const ArrayXd& grad, const ArrayXd& w) {
  return (grad / (2.0 * w)).abs().maxCoeff();
}

// Solves the symmetric tridiagonal system (diag, off) x = rhs. Returns false if
// a pivot is not strictly positive, i.e. the matrix is not positive definite.
bool solve_spd_tridiagonal(const ArrayXd& diag, double off, const ArrayXd& rhs, ArrayXd& x) {
  const Eigen::Index n = diag.size();
  ArrayXd c(n), d(n);
  double pivot = diag[0];
  if (!(pivot > 0)) return false;
  c[0] = off / pivot;
  d[0] = rhs[0] / pivot;
  for (Eigen::Index i = 1; i < n; ++i) {
    pivot = diag[i] - off * c[i - 1];
    if (!(pivot > 0)) return false;
    c[i] = off / pivot;
    d[i] = (rhs[i] - off * d[i - 1]) / pivot;
  }
  x.resize(n);
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return true;
}

struct Sample {
  double alpha;
  double energy;
};

}  // namespace

Grid1D::Grid1D(double t_max_, int n_) : t_max(t_max_), n(n_) {
  if (n < 3) throw ParameterError("Grid1D: need at least 3 points");
  if (!(t_max > 0) || !std::isfinite(t_max)) throw ParameterError("Grid1D: t_max must be positive");
}

Profile1D::Profile1D(const Grid1D& g, ArrayXd v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.n) throw InvalidInputError("Profile1D: size does not match grid");
}

Profile1D Profile1D::zero(const Grid1D& g) { return Profile1D(g, ArrayXd::Zero(g.n)); }

Profile1D Profile1D::gaussian(const Grid1D& g) {
  ArrayXd v(g.n);
  for (int i = 0; i < g.n; ++i) v[i] = std::exp(-0.5 * g.t(i) * g.t(i));
  return Profile1D(g, std::move(v));
}

double Profile1D::operator()(double t) const {
  if (t < 0) t = 0;
  if (t >= grid.t_max) return 0.0;
  const double x = t / grid.h();
  const int i = std::min(int(x), grid.n - 2);
  const double u = x - i;
  return (1 - u) * values[i] + u * values[i + 1];
}

double eval_energy_1d(const Profile1D& f, double alpha, double b) {
  if (!(b > 0)) throw ParameterError("eval_energy_1d: b must be positive");
  if (!std::isfinite(alpha)) throw ParameterError("eval_energy_1d: alpha must be finite");
  require_finite(f.values, "eval_energy_1d");
  return energy_1d_kernel(f.values, f.grid, alpha, b);
}

ArrayXd discrete_residual_1d(const Profile1D& f, double alpha, double b) {
  return gradient_1d_kernel(f.values, f.grid, alpha, b) / (2.0 * weights(f.grid));
}

ProfileMinimum minimize_profile(double alpha, double b, const Grid1D& grid, const Profile1D& init,
                                const InnerOptions& opts) {
  if (!(b > 0)) throw ParameterError("minimize_profile: b must be positive");
  if (grid.t_max < 10.0) throw ParameterError("minimize_profile: t_max must be at least 10");
  if (!(init.grid == grid)) throw InvalidInputError("minimize_profile: init lives on another grid");
  require_finite(init.values, "minimize_profile");

  const ArrayXd w = weights(grid);
  const double h = grid.h();
  const double fallback_step = 0.125 * h * h;

  ArrayXd f = init.values.max(0.0);
  double energy = energy_1d_kernel(f, grid, alpha, b);
  ArrayXd grad = gradient_1d_kernel(f, grid, alpha, b);
  double residual = residual_norm(grad, w);

  ArrayXd f_prev, G_prev;
  std::deque<double> history{energy};
  int it = 0;
  for (; residual > opts.tol; ++it) {
    if (it >= opts.max_iterations)
      throw ConvergenceError("minimize_profile: iteration cap reached", residual);

    bool stepped = false;
    if (residual < opts.newton_switch) {
      ArrayXd diag(grid.n);
      for (int i = 0; i < grid.n; ++i) {
        const double links = (i == 0 || i == grid.n - 1) ? 1.0 : 2.0;
        const double s = grid.t(i) + alpha;
        diag[i] = 2.0 * links / h + 2.0 * w[i] * (s * s - (1.0 - 3.0 * f[i] * f[i]) / b);
      }
      // Levenberg shift on the mass matrix when the Hessian is indefinite
      // (small profiles near the bifurcation).
      ArrayXd step;
      for (double mu = 0.0; mu <= 1e6 && !stepped; mu = (mu == 0.0 ? 1e-4 : 10.0 * mu)) {
        if (!solve_spd_tridiagonal(diag + 2.0 * mu * w, -2.0 / h, grad, step)) continue;
        for (double lambda = 1.0; lambda > 1e-4; lambda *= 0.5) {
          ArrayXd trial = (f - lambda * step).max(0.0);
          const double e = energy_1d_kernel(trial, grid, alpha, b);
          ArrayXd g = gradient_1d_kernel(trial, grid, alpha, b);
          const double r = residual_norm(g, w);
          const double slack = 1e-14 * (std::abs(energy) + 1e-300);
          if (e <= energy + slack || (mu == 0.0 && r < residual)) {
            f_prev.resize(0);
            f = std::move(trial);
            energy = e;
            grad = std::move(g);
            residual = r;
            stepped = true;
            break;
          }
        }
      }
    }
    if (stepped) continue;

    // Projected Barzilai-Borwein step on the mass-weighted gradient.
    const ArrayXd G = grad / w;
    double lambda = fallback_step;
    if (f_prev.size() == f.size()) {
      const ArrayXd s = f - f_prev;
      const ArrayXd y = G - G_prev;
      const double sy = (w * s * y).sum();
      if (sy > 0) lambda = (w * s * s).sum() / sy;
    }
    const double reference = *std::max_element(history.begin(), history.end());
    ArrayXd trial;
    double e = 0;
    for (;;) {
      trial = (f - lambda * G).max(0.0);
      e = energy_1d_kernel(trial, grid, alpha, b);
      const double decrease = (grad * (trial - f)).sum();
      if (e <= reference + 1e-4 * decrease || lambda <= fallback_step) break;
      lambda = std::max(0.5 * lambda, fallback_step);
    }
    f_prev = f;
    G_prev = G;
    f = std::move(trial);
    energy = e;
    grad = gradient_1d_kernel(f, grid, alpha, b);
    residual = residual_norm(grad, w);
    history.push_back(energy);
    if (history.size() > 10) history.pop_front();
  }

  ProfileMinimum out;
  out.profile = Profile1D(grid, std::move(f));
  out.energy = energy_1d_kernel(out.profile.values, grid, alpha, b);
  out.residual = residual;
  out.iterations = it;
  return out;
}

namespace {

double lowest_eigenvalue_impl(const Grid1D& grid, double alpha) {
  // Symmetrized generalized problem W^{-1/2} (K + W V) W^{-1/2}.
  const int n = grid.n;
  const double h = grid.h();
  const ArrayXd w = weights(grid);
  ArrayXd diag(n), off2(n - 1);
  for (int i = 0; i < n; ++i) {
    const double links = (i == 0 || i == n - 1) ? 1.0 : 2.0;
    const double s = grid.t(i) + alpha;
    diag[i] = links / h / w[i] + s * s;
  }
  for (int i = 0; i + 1 < n; ++i) off2[i] = 1.0 / (h * h * w[i] * w[i + 1]);

  // Sturm count of eigenvalues strictly below x.
  auto count_below = [&](double x) {
    int count = 0;
    double q = diag[0] - x;
    if (q < 0) ++count;
    for (int i = 1; i < n; ++i) {
      if (q == 0) q = 1e-300;
      q = diag[i] - x - off2[i - 1] / q;
      if (q < 0) ++count;
    }
    return count;
  };

  double lo = 0.0;
  double hi = 1.0;
  while (count_below(hi) == 0) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("lowest_eigenvalue: no eigenvalue bracket");
  }
  for (int k = 0; k < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (count_below(mid) >= 1 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> minimize_lowest_eigenvalue(const Grid1D& grid) {
  double best_a = -3.0;
  double best = std::numeric_limits<double>::infinity();
  for (double a = -3.0; a <= 1.0 + 1e-12; a += 0.1) {
    const double v = lowest_eigenvalue_impl(grid, a);
    if (v < best) {
      best = v;
      best_a = a;
    }
  }
  double lo = best_a - 0.1, hi = best_a + 0.1;
  double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
  double f1 = lowest_eigenvalue_impl(grid, x1), f2 = lowest_eigenvalue_impl(grid, x2);
  while (hi - lo > 1e-8) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = lowest_eigenvalue_impl(grid, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = lowest_eigenvalue_impl(grid, x2);
    }
  }
  const double a = 0.5 * (lo + hi);
  return {lowest_eigenvalue_impl(grid, a), a};
}

}  // namespace

double lowest_eigenvalue(const Grid1D& grid, double alpha) {
  if (!std::isfinite(alpha)) throw ParameterError("lowest_eigenvalue: alpha must be finite");
  return lowest_eigenvalue_impl(grid, alpha);
}

Theta0Result solve_theta0(const Grid1D& grid) {
  if (grid.t_max < 10.0) throw ParameterError("solve_theta0: t_max must be at least 10");
  Theta0Result r;
  std::tie(r.theta0, r.alpha0) = minimize_lowest_eigenvalue(grid);
  std::tie(r.theta0_refined, r.alpha0_refined) = minimize_lowest_eigenvalue(grid.refined());
  r.agreement_gap = std::abs(r.theta0 - r.theta0_refined);
  return r;
}

EffectiveSolution minimize_joint(double b, const Grid1D& grid, const OuterOptions& opts) {
  if (!(b > 0)) throw ParameterError("minimize_joint: b must be positive");

  EffectiveSolution sol;
  sol.b = b;
  sol.theta0 = minimize_lowest_eigenvalue(grid).first;
  sol.regime_flag = !(b > 1.0 && b < 1.0 / sol.theta0);

  // Coarse scan with warm starts.
  std::vector<Sample> scan;
  std::vector<Profile1D> profiles;
  Profile1D warm = Profile1D::gaussian(grid);
  const int steps = int(std::lround((opts.scan_hi - opts.scan_lo) / opts.scan_step));
  for (int k = 0; k <= steps; ++k) {
    const double a = opts.scan_lo + k * opts.scan_step;
    ProfileMinimum m = minimize_profile(a, b, grid, warm, opts.inner);
    // Restart from the Gaussian if the warm start collapsed to zero but a
    // nontrivial minimizer may exist at this shift.
    if (m.profile.sup_norm() < 1e-6 && warm.sup_norm() < 1e-6) {
      ProfileMinimum fresh = minimize_profile(a, b, grid, Profile1D::gaussian(grid), opts.inner);
      if (fresh.energy < m.energy) m = std::move(fresh);
    }
    scan.push_back({a, m.energy});
    warm = m.profile;
    profiles.push_back(std::move(m.profile));
  }

  std::size_t imin = 0;
  for (std::size_t k = 1; k < scan.size(); ++k)
    if (scan[k].energy < scan[imin].energy) imin = k;

  // Flat landscape: a contiguous run of scan points at the minimum level.
  const double level_tol = 1e-14 * std::max(1.0, std::abs(scan[imin].energy));
  std::size_t lo_i = imin, hi_i = imin;
  while (lo_i > 0 && scan[lo_i - 1].energy - scan[imin].energy <= level_tol) --lo_i;
  while (hi_i + 1 < scan.size() && scan[hi_i + 1].energy - scan[imin].energy <= level_tol) ++hi_i;

  double alpha_star;
  Profile1D start = profiles[imin];
  if (hi_i - lo_i >= 2) {
    sol.flat_flag = true;
    alpha_star = 0.5 * (scan[lo_i].alpha + scan[hi_i].alpha);
  } else {
    if (imin == 0 || imin + 1 == scan.size())
      throw SearchError("minimize_joint: minimum of the alpha scan sits on the bracket boundary");
    double lo = scan[imin - 1].alpha, hi = scan[imin + 1].alpha;
    auto energy_at = [&](double a) {
      ProfileMinimum m = minimize_profile(a, b, grid, start, opts.inner);
      start = m.profile;
      return m.energy;
    };
    double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
    double f1 = energy_at(x1), f2 = energy_at(x2);
    while (hi - lo > opts.tol) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kGolden * (hi - lo);
        f1 = energy_at(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kGolden * (hi - lo);
        f2 = energy_at(x2);
      }
    }
    alpha_star = 0.5 * (lo + hi);

    // Secant polish on the envelope derivative dE/dalpha = F(t_max), kept
    // inside the final golden bracket.
    auto slope_at = [&](double a) {
      ProfileMinimum m = minimize_profile(a, b, grid, start, opts.inner);
      start = m.profile;
      return compute_cost_table(m.profile, a).F_end();
    };
    const double bracket_lo = alpha_star - 10 * opts.tol, bracket_hi = alpha_star + 10 * opts.tol;
    double a0 = alpha_star - opts.tol, a1 = alpha_star + opts.tol;
    double g0 = slope_at(a0), g1 = slope_at(a1);
    for (int k = 0; k < 20 && std::abs(g1) > 1e-14 && g1 != g0; ++k) {
      const double a2 = a1 - g1 * (a1 - a0) / (g1 - g0);
      if (!(a2 > bracket_lo && a2 < bracket_hi)) break;
      a0 = a1;
      g0 = g1;
      a1 = a2;
      g1 = slope_at(a1);
    }
    if (std::abs(g1) < std::abs(slope_at(alpha_star))) alpha_star = a1;
  }

  ProfileMinimum best = minimize_profile(alpha_star, b, grid, start, opts.inner);
  sol.alpha_star = alpha_star;
  sol.f_star = best.profile;
  sol.energy = eval_energy_1d(sol.f_star, alpha_star, b);

  const double d = opts.fd_step;
  const double e_plus = minimize_profile(alpha_star + d, b, grid, sol.f_star, opts.inner).energy;
  const double e_minus = minimize_profile(alpha_star - d, b, grid, sol.f_star, opts.inner).energy;
  sol.dE_dalpha = (e_plus - e_minus) / (2 * d);
  sol.dE_dalpha_envelope = compute_cost_table(sol.f_star, alpha_star).F_end();
  return sol;
}

double el_residual(const Profile1D& f, double alpha, double b) {
  if (!(b > 0)) throw ParameterError("el_residual: b must be positive");
  require_finite(f.values, "el_residual");
  const Grid1D& g = f.grid;
  const double h = g.h();
  const ArrayXd& v = f.values;
  auto source = [&](int i) {
    const double s = g.t(i) + alpha;
    return s * s * v[i] - (1.0 - v[i] * v[i]) * v[i] / b;
  };
  double sup = 0.0;
  for (int i = 1; i + 1 < g.n; ++i) {
    const double lap = (v[i + 1] - 2 * v[i] + v[i - 1]) / (h * h);
    sup = std::max(sup, std::abs(-lap + source(i)));
  }
  // Second-order estimate of f'(0) using the equation to correct the one-sided quotient.
  const double fprime0 = (v[1] - v[0]) / h - 0.5 * h * source(0);
  return sup + std::abs(fprime0);
}

double el_residual(const EffectiveSolution& sol) {
  return el_residual(sol.f_star, sol.alpha_star, sol.b);
}

CostTable compute_cost_table(const Profile1D& f, double alpha) {
  require_finite(f.values, "compute_cost_table");
  const Grid1D& g = f.grid;
  CostTable table;
  table.grid = g;
  table.F_values = ArrayXd::Zero(g.n);
  auto integrand = [&](int i) { return 2.0 * f.values[i] * f.values[i] * (g.t(i) + alpha); };
  for (int i = 1; i < g.n; ++i)
    table.F_values[i] = table.F_values[i - 1] + 0.5 * g.h() * (integrand(i - 1) + integrand(i));
  table.K_values = f.values.square() + table.F_values;
  return table;
}

CostTable compute_cost_table(const EffectiveSolution& sol) {
  return compute_cost_table(sol.f_star, sol.alpha_star);
}

DecayFit check_decay(const Profile1D& f, double alpha) {
  require_finite(f.values, "check_decay");
  if (f.sup_norm() <= 1e-6) throw NotApplicableError("check_decay: trivial profile");
  const Grid1D& g = f.grid;
  DecayFit fit;
  fit.c_fit = std::numeric_limits<double>::infinity();
  fit.C_fit = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < g.n; ++i) {
    const double v = f.values[i];
    const double t = g.t(i);
    if (t >= g.t_max - 2.0) fit.tail_max = std::max(fit.tail_max, std::abs(v));
    if (v <= 1e-12) continue;
    const double upper = std::exp(-0.5 * (t + alpha) * (t + alpha));
    const double lower = std::exp(-0.5 * (t + sqrt2) * (t + sqrt2));
    fit.C_fit = std::max(fit.C_fit, v / upper);
    fit.c_fit = std::min(fit.c_fit, v / lower);
  }
  // No ordering between c and C: the lower envelope sits below the upper one
  // for t >= 0, so c > C is consistent (and is what f* gives).
  fit.ok = std::isfinite(fit.C_fit) && std::isfinite(fit.c_fit) && fit.c_fit > 0 &&
           fit.C_fit > 0 && fit.tail_max <= 1e-10;
  return fit;
}

DecayFit check_decay(const EffectiveSolution& sol) { return check_decay(sol.f_star, sol.alpha_star); }

}  // namespace glsurf
