#pragma once

// Test-only oracle: shooting on  f'' = (t + alpha)^2 f - (1 - f^2) f / b,
// f'(0) = 0, bisecting on f(0) between "crosses zero" and "turns upward in the
// confining region".
// Independent of the finite-difference/descent path in effective1d.

#include <cmath>
#include <vector>

namespace glsurf::oracle {

struct ShootingProfile {
  double f0 = 0.0;
  double dt = 0.0;
  std::vector<double> f;
  std::vector<double> fp;
};

inline ShootingProfile shoot(double alpha, double b, double f0, double dt, double t_end,
                             int* outcome) {
  ShootingProfile p;
  p.f0 = f0;
  p.dt = dt;
  auto rhs = [&](double t, double f) { return (t + alpha) * (t + alpha) * f - (1 - f * f) * f / b; };
  double t = 0, f = f0, fp = 0;
  p.f.push_back(f);
  p.fp.push_back(fp);
  *outcome = 0;
  const int steps = int(t_end / dt);
  for (int k = 0; k < steps; ++k) {
    const double k1f = fp, k1p = rhs(t, f);
    const double k2f = fp + 0.5 * dt * k1p, k2p = rhs(t + 0.5 * dt, f + 0.5 * dt * k1f);
    const double k3f = fp + 0.5 * dt * k2p, k3p = rhs(t + 0.5 * dt, f + 0.5 * dt * k2f);
    const double k4f = fp + dt * k3p, k4p = rhs(t + dt, f + dt * k3f);
    f += dt / 6 * (k1f + 2 * k2f + 2 * k3f + k4f);
    fp += dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    t += dt;
    if (f < 0) {
      *outcome = -1;
      return p;
    }
    // Past (t + alpha)^2 > 1/b the right-hand side is positive for f > 0, so a
    // rising profile there can only diverge.
    if (fp > 0 && (t + alpha) * (t + alpha) > 1.0 / b && t + alpha > 0) {
      *outcome = +1;
      return p;
    }
    p.f.push_back(f);
    p.fp.push_back(fp);
  }
  return p;
}

/// Decaying solution for the given shift; the tail past the divergence point is zero.
inline ShootingProfile decaying_solution(double alpha, double b, double dt = 1e-3, double t_end = 12.0) {
  double lo = 0.0, hi = 1.0;
  int outcome = 0;
  for (int k = 0; k < 200 && hi - lo > 1e-16; ++k) {
    const double mid = 0.5 * (lo + hi);
    shoot(alpha, b, mid, dt, t_end, &outcome);
    if (outcome < 0)
      lo = mid;
    else
      hi = mid;
  }
  ShootingProfile best = shoot(alpha, b, 0.5 * (lo + hi), dt, t_end, &outcome);
  // Drop the last few samples where the unstable branch starts to show.
  const std::size_t keep = best.f.size() > 50 ? best.f.size() - 50 : best.f.size();
  best.f.resize(keep);
  best.fp.resize(keep);
  return best;
}

/// Composite Simpson on uniformly spaced samples (odd count enforced by dropping the last one).
inline double simpson(const std::vector<double>& y, double dt) {
  std::size_t n = y.size();
  if (n % 2 == 0) --n;
  if (n < 3) return 0.0;
  double s = y[0] + y[n - 1];
  for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
  return s * dt / 3.0;
}

inline double shooting_energy(const ShootingProfile& p, double alpha, double b) {
  std::vector<double> integrand(p.f.size());
  for (std::size_t i = 0; i < p.f.size(); ++i) {
    const double t = i * p.dt;
    const double f2 = p.f[i] * p.f[i];
    integrand[i] = p.fp[i] * p.fp[i] + (t + alpha) * (t + alpha) * f2 - (2 * f2 - f2 * f2) / (2 * b);
  }
  return simpson(integrand, p.dt);
}

/// d/dalpha of the minimal energy: 2 * integral (t + alpha) f_alpha^2.
inline double shooting_slope(const ShootingProfile& p, double alpha) {
  std::vector<double> integrand(p.f.size());
  for (std::size_t i = 0; i < p.f.size(); ++i) integrand[i] = 2 * (i * p.dt + alpha) * p.f[i] * p.f[i];
  return simpson(integrand, p.dt);
}

struct ShootingOptimum {
  double alpha_star = 0.0;
  double energy = 0.0;
  double f0 = 0.0;
};

/// Bisection on the slope over [lo, hi] (the slope is increasing through alpha*).
inline ShootingOptimum shooting_optimum(double b, double lo = -1.5, double hi = -0.3) {
  for (int k = 0; k < 60 && hi - lo > 1e-11; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double s = shooting_slope(decaying_solution(mid, b), mid);
    if (s < 0)
      lo = mid;
    else
      hi = mid;
  }
  ShootingOptimum out;
  out.alpha_star = 0.5 * (lo + hi);
  const ShootingProfile p = decaying_solution(out.alpha_star, b);
  out.energy = shooting_energy(p, out.alpha_star, b);
  out.f0 = p.f0;
  return out;
}

}  // namespace glsurf::oracle
