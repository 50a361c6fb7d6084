#include "glsurf/gl2d.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace glsurf {

namespace {

constexpr double kGx[5] = {0.5, 0.5 - 0.2692346550528416, 0.5 + 0.2692346550528416,
                           0.5 - 0.4530899229693320, 0.5 + 0.4530899229693320};
constexpr double kGw[5] = {0.2844444444444444, 0.2393143352496832, 0.2393143352496832,
                           0.1184634425280945, 0.1184634425280945};

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* where) {
  if (!a.same_shape(b)) throw GridMismatchError(std::string(where) + ": fields live on different grids");
}

void require_potential_shape(const VectorPotential2D& A, const char* where) {
  const Grid2D& g = A.grid;
  if (A.ax.rows() != g.nx - 1 || A.ax.cols() != g.ny || A.ay.rows() != g.nx || A.ay.cols() != g.ny - 1)
    throw GridMismatchError(std::string(where) + ": potential arrays do not match the grid");
}

// Link weights (0 on absent links) and phase factors e^{i theta} for a fixed A.
struct Links {
  int nx = 0, ny = 0;
  Array2d wx, wy;
  Array2cd ux, uy;
};

Links make_links(const Grid2D& g, const VectorPotential2D& A, double epsilon) {
  Links L;
  L.nx = g.nx;
  L.ny = g.ny;
  const double e2 = epsilon * epsilon;
  const double hx = g.hx(), hy = g.hy();
  L.wx.setZero(g.nx - 1, g.ny);
  L.ux.resize(g.nx - 1, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      L.ux(i, j) = std::polar(1.0, A.ax(i, j) * hx / e2);
      if (g.inside(i, j) && g.inside(i + 1, j)) L.wx(i, j) = hy / hx;
    }
  L.wy.setZero(g.nx, g.ny - 1);
  L.uy.resize(g.nx, g.ny - 1);
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      L.uy(i, j) = std::polar(1.0, A.ay(i, j) * hy / e2);
      if (g.inside(i, j) && g.inside(i, j + 1)) L.wy(i, j) = hx / hy;
    }
  return L;
}

// Energy without the field term; gradient (2 dE/dpsi*) accumulated into grad when given.
double psi_energy(const Array2cd& psi, const Links& L, const Array2i& inside, double node_c,
                  Array2cd* grad) {
  const int nx = L.nx, ny = L.ny;
  double kinetic = 0.0;
  if (grad) grad->setZero(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double w = L.wx(i, j);
      if (w == 0.0) continue;
      const cplx hop = psi(i + 1, j) * L.ux(i, j);
      const cplx d = hop - psi(i, j);
      kinetic += w * std::norm(d);
      if (grad) {
        (*grad)(i, j) -= 2.0 * w * d;
        (*grad)(i + 1, j) += 2.0 * w * d * std::conj(L.ux(i, j));
      }
    }
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double w = L.wy(i, j);
      if (w == 0.0) continue;
      const cplx hop = psi(i, j + 1) * L.uy(i, j);
      const cplx d = hop - psi(i, j);
      kinetic += w * std::norm(d);
      if (grad) {
        (*grad)(i, j) -= 2.0 * w * d;
        (*grad)(i, j + 1) += 2.0 * w * d * std::conj(L.uy(i, j));
      }
    }
  }
  // node term -c (2|psi|^2 - |psi|^4), c = hx hy / (2 b eps^2)
  double nodes = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!inside(i, j)) continue;
      const double p = std::norm(psi(i, j));
      nodes -= node_c * (2.0 * p - p * p);
      if (grad) (*grad)(i, j) -= 4.0 * node_c * (1.0 - p) * psi(i, j);
    }
  return kinetic + nodes;
}

// Coefficients of E(psi + a d) - E(psi) = c1 a + c2 a^2 + c3 a^3 + c4 a^4.
struct Quartic {
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0;
  double value(double a) const { return a * (c1 + a * (c2 + a * (c3 + a * c4))); }
  double slope(double a) const { return c1 + a * (2 * c2 + a * (3 * c3 + a * 4 * c4)); }
};

Quartic line_quartic(const Array2cd& psi, const Array2cd& dir, const Links& L, const Array2i& inside,
                     double node_c) {
  Quartic q;
  const int nx = L.nx, ny = L.ny;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const double w = L.wx(i, j);
      if (w == 0.0) continue;
      const cplx dp = psi(i + 1, j) * L.ux(i, j) - psi(i, j);
      const cplx dd = dir(i + 1, j) * L.ux(i, j) - dir(i, j);
      q.c1 += 2.0 * w * (std::conj(dp) * dd).real();
      q.c2 += w * std::norm(dd);
    }
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double w = L.wy(i, j);
      if (w == 0.0) continue;
      const cplx dp = psi(i, j + 1) * L.uy(i, j) - psi(i, j);
      const cplx dd = dir(i, j + 1) * L.uy(i, j) - dir(i, j);
      q.c1 += 2.0 * w * (std::conj(dp) * dd).real();
      q.c2 += w * std::norm(dd);
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!inside(i, j)) continue;
      const double p0 = std::norm(psi(i, j));
      const double p1 = 2.0 * (std::conj(psi(i, j)) * dir(i, j)).real();
      const double p2 = std::norm(dir(i, j));
      q.c1 -= node_c * (2.0 * p1 - 2.0 * p0 * p1);
      q.c2 -= node_c * (2.0 * p2 - p1 * p1 - 2.0 * p0 * p2);
      q.c3 += 2.0 * node_c * p1 * p2;
      q.c4 += node_c * p2 * p2;
    }
  return q;
}

// Smallest local minimizer a > 0 of the quartic, given slope(0) < 0.
double quartic_step(const Quartic& q) {
  double lo = 0.0;
  double hi = q.c2 > 0 ? -q.c1 / (2.0 * q.c2) : 1e-3;
  if (!(hi > 0) || !std::isfinite(hi)) hi = 1e-3;
  int guard = 0;
  while (q.slope(hi) < 0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) return hi;
  }
  for (int k = 0; k < 100 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (q.slope(mid) < 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double dot_re(const Array2cd& a, const Array2cd& b) {
  double s = 0.0;
  const cplx* pa = a.data();
  const cplx* pb = b.data();
  for (Eigen::Index k = 0; k < a.size(); ++k) s += pa[k].real() * pb[k].real() + pa[k].imag() * pb[k].imag();
  return s;
}

double node_coefficient(const Grid2D& g, const GLConfig& cfg) {
  return g.cell_area() / (2.0 * cfg.b * cfg.epsilon * cfg.epsilon);
}

double field_energy(const VectorPotential2D& A, double epsilon) {
  const Array2d c = A.curl();
  const double e4 = std::pow(epsilon, 4);
  return A.grid.cell_area() * (c - 1.0).square().sum() / e4;
}

double residual_of(const Array2cd& grad, const Grid2D& g, const GLConfig& cfg) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < grad.size(); ++k) m = std::max(m, std::abs(grad.data()[k]));
  return cfg.epsilon * cfg.epsilon * m / (2.0 * g.cell_area());
}

double bulk_fraction(const ComplexField2D& psi, const CurvilinearPolygon& domain, double depth) {
  const Grid2D& g = psi.grid;
  double total = 0.0, bulk = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const double p = std::norm(psi.values(i, j));
      total += p;
      if (dist_to_boundary(domain, g.node(i, j)) > depth) bulk += p;
    }
  return total > 0 ? bulk / total : 0.0;
}

// NCG on psi with A fixed. Returns true on convergence.
bool relax_psi(Array2cd& psi, const Links& L, const Grid2D& g, const GLConfig& cfg, int max_iterations,
               double field_term, GLResult& out) {
  const double c = node_coefficient(g, cfg);
  Array2cd grad;
  double energy = psi_energy(psi, L, g.inside, c, &grad);
  double residual = residual_of(grad, g, cfg);
  out.energy_trace.push_back(energy + field_term);
  Array2cd dir = -grad;
  double gg = dot_re(grad, grad);
  int it = 0;
  bool steepest = true;
  while (residual > cfg.tol && it < max_iterations) {
    double slope = dot_re(grad, dir);
    if (!(slope < 0)) {
      dir = -grad;
      slope = -gg;
      steepest = true;
    }
    const Quartic q = line_quartic(psi, dir, L, g.inside, c);
    const double a = quartic_step(q);
    // The quartic is exact, so its sign decides acceptance; comparing the two
    // rounded totals stalls once the decrease drops below their rounding error.
    const double predicted = q.value(a);
    if (!(predicted < 0) || !std::isfinite(a)) {
      if (steepest) break;
      dir = -grad;
      steepest = true;
      continue;
    }
    Array2cd trial = psi + a * dir;
    Array2cd trial_grad;
    const double trial_energy = psi_energy(trial, L, g.inside, c, &trial_grad);
    if (!(trial_energy <= energy + 1e-12 * std::abs(energy))) {
      if (steepest) break;  // no descent left at working precision
      dir = -grad;
      steepest = true;
      continue;
    }
    ++it;
    const double gg_new = dot_re(trial_grad, trial_grad);
    const double overlap = dot_re(trial_grad, grad);
    // Powell restart once successive gradients stop being near-orthogonal.
    const double beta = std::abs(overlap) >= 0.2 * gg_new ? 0.0 : std::max(0.0, (gg_new - overlap) / gg);
    psi = std::move(trial);
    dir = -trial_grad + beta * dir;
    grad = std::move(trial_grad);
    gg = gg_new;
    energy = trial_energy;
    residual = residual_of(grad, g, cfg);
    out.energy_trace.push_back(energy + field_term);
    steepest = beta == 0.0;
  }
  out.iterations += it;
  out.residual = residual;
  return residual <= cfg.tol;
}

// A few NCG steps on the link values with psi fixed; accepts only decreases.
void relax_potential(const Array2cd& psi, VectorPotential2D& A, const GLConfig& cfg, int steps) {
  ComplexField2D field(A.grid);
  field.values = psi;
  auto total = [&](const VectorPotential2D& pot) {
    return eval_gl_energy(field, pot, cfg, FieldMode::Alternating);
  };
  double energy = total(A);
  VectorPotential2D g = gl_potential_gradient(field, A, cfg);
  Array2d dx = -g.ax, dy = -g.ay;
  double gg = g.ax.square().sum() + g.ay.square().sum();
  double step = 1e-12;
  for (int k = 0; k < steps && gg > 0; ++k) {
    double slope = (g.ax * dx).sum() + (g.ay * dy).sum();
    if (!(slope < 0)) {
      dx = -g.ax;
      dy = -g.ay;
      slope = -gg;
    }
    // Armijo backtracking from an expanding trial step.
    step *= 4.0;
    VectorPotential2D trial = A;
    double e = 0.0;
    bool accepted = false;
    for (int b = 0; b < 60; ++b) {
      trial.ax = A.ax + step * dx;
      trial.ay = A.ay + step * dy;
      e = total(trial);
      if (e <= energy + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const VectorPotential2D g_new = gl_potential_gradient(field, trial, cfg);
    const double gg_new = g_new.ax.square().sum() + g_new.ay.square().sum();
    const double overlap = (g_new.ax * g.ax).sum() + (g_new.ay * g.ay).sum();
    const double beta = std::max(0.0, (gg_new - overlap) / gg);
    dx = -g_new.ax + beta * dx;
    dy = -g_new.ay + beta * dy;
    A = std::move(trial);
    g = g_new;
    gg = gg_new;
    energy = e;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

double ComplexField2D::sup_abs() const { return values.size() ? values.abs().maxCoeff() : 0.0; }

Vec2d VectorPotential2D::operator()(const Vec2d& p) const {
  const Grid2D& g = grid;
  const double hx = g.hx(), hy = g.hy();
  auto bilinear = [](const Array2d& a, double fx, double fy) {
    const int i0 = std::clamp(int(std::floor(fx)), 0, int(a.rows()) - 2);
    const int j0 = std::clamp(int(std::floor(fy)), 0, int(a.cols()) - 2);
    const double u = fx - i0, v = fy - j0;
    return (1 - u) * (1 - v) * a(i0, j0) + u * (1 - v) * a(i0 + 1, j0) + (1 - u) * v * a(i0, j0 + 1) +
           u * v * a(i0 + 1, j0 + 1);
  };
  // ax sits at (xmin + (i + 1) hx, ymin + (j + 1/2) hy), ay at (xmin + (i + 1/2) hx, ymin + (j + 1) hy).
  const double ax = bilinear(this->ax, (p.x() - g.xmin) / hx - 1.0, (p.y() - g.ymin) / hy - 0.5);
  const double ay = bilinear(this->ay, (p.x() - g.xmin) / hx - 0.5, (p.y() - g.ymin) / hy - 1.0);
  return {ax, ay};
}

Array2d VectorPotential2D::curl() const {
  const Grid2D& g = grid;
  const double hx = g.hx(), hy = g.hy();
  Array2d c(g.nx - 1, g.ny - 1);
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i)
      c(i, j) = (ax(i, j) * hx + ay(i + 1, j) * hy - ax(i, j + 1) * hx - ay(i, j) * hy) / (hx * hy);
  return c;
}

Array2d VectorPotential2D::divergence() const {
  const Grid2D& g = grid;
  Array2d d = Array2d::Zero(g.nx, g.ny);
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i)
      d(i, j) = (ax(i, j) - ax(i - 1, j)) / g.hx() + (ay(i, j) - ay(i, j - 1)) / g.hy();
  return d;
}

double GLConfig::kappa() const { return 1.0 / (epsilon * std::sqrt(b)); }

double GLConfig::h_ex() const { return b * kappa() * kappa(); }

void GLConfig::validate() const {
  if (!(b > 0) || !std::isfinite(b)) throw ParameterError("GLConfig: b must be positive");
  if (!(epsilon > 0 && epsilon < 1)) throw ParameterError("GLConfig: epsilon must lie in (0, 1)");
  if (!(tol > 0)) throw ParameterError("GLConfig: tol must be positive");
  if (max_iterations < 1) throw ParameterError("GLConfig: max_iterations must be positive");
  if (!(c0 > 0)) throw ParameterError("GLConfig: c0 must be positive");
}

VectorPotential2D make_reference_potential(const Grid2D& grid, const Vec2d& center) {
  VectorPotential2D A;
  A.grid = grid;
  A.ax.resize(grid.nx - 1, grid.ny);
  A.ay.resize(grid.nx, grid.ny - 1);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i + 1 < grid.nx; ++i) A.ax(i, j) = -0.5 * (grid.y(j) - center.y());
  for (int j = 0; j + 1 < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) A.ay(i, j) = 0.5 * (grid.x(i) - center.x());
  return A;
}

VectorPotential2D make_reference_potential(const Grid2D& grid, const CurvilinearPolygon& domain) {
  return make_reference_potential(grid, domain.centroid());
}

double eval_gl_energy(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg,
                      FieldMode mode) {
  require_same_grid(psi.grid, A.grid, "eval_gl_energy");
  require_potential_shape(A, "eval_gl_energy");
  if (!psi.values.allFinite()) throw InvalidInputError("eval_gl_energy: non-finite psi");
  const Links L = make_links(psi.grid, A, cfg.epsilon);
  double e = psi_energy(psi.values, L, psi.grid.inside, node_coefficient(psi.grid, cfg), nullptr);
  if (mode == FieldMode::Alternating) e += field_energy(A, cfg.epsilon);
  return e;
}

double eval_gl_energy(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg) {
  return eval_gl_energy(psi, A, cfg, cfg.mode);
}

ComplexField2D gl_gradient(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg) {
  require_same_grid(psi.grid, A.grid, "gl_gradient");
  require_potential_shape(A, "gl_gradient");
  const Links L = make_links(psi.grid, A, cfg.epsilon);
  ComplexField2D g(psi.grid);
  psi_energy(psi.values, L, psi.grid.inside, node_coefficient(psi.grid, cfg), &g.values);
  return g;
}

VectorPotential2D gl_potential_gradient(const ComplexField2D& psi, const VectorPotential2D& A,
                                        const GLConfig& cfg) {
  require_same_grid(psi.grid, A.grid, "gl_potential_gradient");
  require_potential_shape(A, "gl_potential_gradient");
  const Grid2D& g = psi.grid;
  const Links L = make_links(g, A, cfg.epsilon);
  const double e2 = cfg.epsilon * cfg.epsilon;
  const double hx = g.hx(), hy = g.hy();
  VectorPotential2D out;
  out.grid = g;
  out.ax.setZero(g.nx - 1, g.ny);
  out.ay.setZero(g.nx, g.ny - 1);
  // kinetic: d/dtheta w |psi_j u - psi_i|^2 = 2 w Im(conj(psi_i) psi_j u)
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i)
      if (L.wx(i, j) != 0.0)
        out.ax(i, j) = 2.0 * L.wx(i, j) *
                       (std::conj(psi.values(i, j)) * psi.values(i + 1, j) * L.ux(i, j)).imag() * hx / e2;
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (L.wy(i, j) != 0.0)
        out.ay(i, j) = 2.0 * L.wy(i, j) *
                       (std::conj(psi.values(i, j)) * psi.values(i, j + 1) * L.uy(i, j)).imag() * hy / e2;
  // field: hx hy / eps^4 sum (c - 1)^2
  const Array2d c = A.curl();
  const double k = 2.0 * hx * hy / std::pow(cfg.epsilon, 4);
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double r = k * (c(i, j) - 1.0);
      out.ax(i, j) += r / hy;
      out.ax(i, j + 1) -= r / hy;
      out.ay(i + 1, j) += r / hx;
      out.ay(i, j) -= r / hx;
    }
  return out;
}

double gl_residual(const ComplexField2D& grad, const GLConfig& cfg) {
  return residual_of(grad.values, grad.grid, cfg);
}

GLResult minimize_gl(const CurvilinearPolygon& domain, const GLConfig& cfg, const ComplexField2D& init,
                     const VectorPotential2D& A0) {
  cfg.validate();
  require_same_grid(init.grid, A0.grid, "minimize_gl");
  require_potential_shape(A0, "minimize_gl");
  if (!init.values.allFinite()) throw InvalidInputError("minimize_gl: non-finite initial state");
  const Grid2D& g = init.grid;
  const double depth = cfg.c0 * cfg.epsilon * std::abs(std::log(cfg.epsilon));
  if (depth < 8.0 * std::max(g.hx(), g.hy()))
    throw ResolutionError("minimize_gl: fewer than 8 grid cells across the boundary layer");

  auto out = std::make_shared<GLResult>();
  out->potential = A0;
  Array2cd psi = init.values;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (!g.inside(i, j)) psi(i, j) = 0.0;

  const bool alternating = cfg.mode == FieldMode::Alternating;
  double field_term = alternating ? field_energy(out->potential, cfg.epsilon) : 0.0;
  Links L = make_links(g, out->potential, cfg.epsilon);
  bool ok = relax_psi(psi, L, g, cfg, cfg.max_iterations, field_term, *out);

  if (alternating && ok) {
    for (int round = 0; round < cfg.alternating_rounds; ++round) {
      ComplexField2D current(g);
      current.values = psi;
      const double before = eval_gl_energy(current, out->potential, cfg, FieldMode::Alternating);
      VectorPotential2D A = out->potential;
      relax_potential(psi, A, cfg, 50);
      Array2cd candidate = psi;
      GLResult scratch;
      const double candidate_field = field_energy(A, cfg.epsilon);
      const Links LA = make_links(g, A, cfg.epsilon);
      const bool cand_ok = relax_psi(candidate, LA, g, cfg, cfg.max_iterations, candidate_field, scratch);
      current.values = candidate;
      const double after = eval_gl_energy(current, A, cfg, FieldMode::Alternating);
      if (!(cand_ok && after < before)) break;
      psi = std::move(candidate);
      out->potential = std::move(A);
      out->iterations += scratch.iterations;
      out->residual = scratch.residual;
      out->energy_trace.push_back(after);
      L = LA;
    }
  }

  out->psi = ComplexField2D(g);
  out->psi.values = psi;
  out->energy = eval_gl_energy(out->psi, out->potential, cfg);
  out->sup_abs = out->psi.sup_abs();
  out->bulk_mass_fraction = bulk_fraction(out->psi, domain, depth);
  out->converged = ok;
  if (!ok) throw GLConvergenceError("minimize_gl: residual above tolerance (iteration cap or stalled descent)", out);
  return std::move(*out);
}

GLResult minimize_gl(const CurvilinearPolygon& domain, const GLConfig& cfg, const ComplexField2D& init) {
  return minimize_gl(domain, cfg, init, make_reference_potential(init.grid, domain));
}

cplx sample_field(const ComplexField2D& psi, const VectorPotential2D& A, double epsilon, const Vec2d& p) {
  const Grid2D& c = psi.grid;
  const double e2 = epsilon * epsilon;
  auto transported = [&](int ci, int cj) {
    const Vec2d q = c.node(ci, cj);
    // psi(p) ~ psi(q) e^{-i int_q^p A / eps^2} keeps (grad + i A / eps^2) psi small.
    return psi.values(ci, cj) * std::polar(1.0, -A(0.5 * (p + q)).dot(p - q) / e2);
  };
  const double fx = (p.x() - c.xmin) / c.hx() - 0.5, fy = (p.y() - c.ymin) / c.hy() - 0.5;
  const int i0 = std::clamp(int(std::floor(fx)), 0, c.nx - 2);
  const int j0 = std::clamp(int(std::floor(fy)), 0, c.ny - 2);
  const double u = std::clamp(fx - i0, 0.0, 1.0), v = std::clamp(fy - j0, 0.0, 1.0);
  cplx sum = 0.0;
  double wsum = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj) {
      const int ci = i0 + di, cj = j0 + dj;
      if (!c.inside(ci, cj)) continue;
      const double w = (di ? u : 1 - u) * (dj ? v : 1 - v);
      if (w == 0.0) continue;
      sum += w * transported(ci, cj);
      wsum += w;
    }
  if (wsum > 0) return sum / wsum;
  double best = std::numeric_limits<double>::infinity();
  cplx out = 0.0;
  for (int dj = -2; dj <= 3; ++dj)
    for (int di = -2; di <= 3; ++di) {
      const int ci = i0 + di, cj = j0 + dj;
      if (ci < 0 || cj < 0 || ci >= c.nx || cj >= c.ny || !c.inside(ci, cj)) continue;
      const double d = (p - c.node(ci, cj)).squaredNorm();
      if (d < best) {
        best = d;
        out = transported(ci, cj);
      }
    }
  return out;
}

ComplexField2D prolong_field(const ComplexField2D& coarse, const Grid2D& fine, const VectorPotential2D& A,
                             double epsilon) {
  require_same_grid(fine, A.grid, "prolong_field");
  ComplexField2D out(fine);
  for (int j = 0; j < fine.ny; ++j)
    for (int i = 0; i < fine.nx; ++i)
      if (fine.inside(i, j)) out.values(i, j) = sample_field(coarse, A, epsilon, fine.node(i, j));
  return out;
}

ComplexField2D random_field(const Grid2D& grid, unsigned seed, double amplitude) {
  ComplexField2D f(grid);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double re = u(rng), im = u(rng);
      if (grid.inside(i, j)) f.values(i, j) = cplx(re, im);
    }
  return f;
}

Array2d CurrentField::divergence() const {
  Array2d d = Array2d::Zero(grid.nx, grid.ny);
  const double hx = grid.hx(), hy = grid.hy();
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i + 1 < grid.nx; ++i) {
      d(i, j) += jx(i, j) / hx;
      d(i + 1, j) -= jx(i, j) / hx;
    }
  for (int j = 0; j + 1 < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      d(i, j) += jy(i, j) / hy;
      d(i, j + 1) -= jy(i, j) / hy;
    }
  return d;
}

CurrentField superconducting_current(const ComplexField2D& psi, const VectorPotential2D& A,
                                     const GLConfig& cfg) {
  require_same_grid(psi.grid, A.grid, "superconducting_current");
  require_potential_shape(A, "superconducting_current");
  const Grid2D& g = psi.grid;
  const Links L = make_links(g, A, cfg.epsilon);
  CurrentField j;
  j.grid = g;
  j.jx.setZero(g.nx - 1, g.ny);
  j.jy.setZero(g.nx, g.ny - 1);
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x + 1 < g.nx; ++x)
      if (L.wx(x, y) != 0.0)
        j.jx(x, y) = (std::conj(psi.values(x, y)) * psi.values(x + 1, y) * L.ux(x, y)).imag() / g.hx();
  for (int y = 0; y + 1 < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x)
      if (L.wy(x, y) != 0.0)
        j.jy(x, y) = (std::conj(psi.values(x, y)) * psi.values(x, y + 1) * L.uy(x, y)).imag() / g.hy();
  return j;
}

// ---------------------------------------------------------------------------
// Gauge phase

GaugePhase::GaugePhase(const VectorPotential2D& A, const BoundaryParam& param, double epsilon)
    : A_(&A), param_(&param), epsilon_(epsilon) {
  if (!(epsilon > 0 && epsilon < 1)) throw ParameterError("GaugePhase: epsilon must lie in (0, 1)");
  panel_ = 0.5 * std::min(A.grid.hx(), A.grid.hy());
  for (const Edge& e : param.edges) {
    const double len = e.length();
    const int panels = std::max(1, int(std::ceil(len / panel_)));
    const double pl = len / panels;
    std::vector<double> cum(panels + 1, 0.0);
    for (int p = 0; p < panels; ++p) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) {
        const double u = (p + kGx[k]) * pl;
        s += kGw[k] * A(e.point(u)).dot(e.tangent(u));
      }
      cum[p + 1] = cum[p] + s * pl;
    }
    edge_total_.push_back(cum.back());
    cumulative_.push_back(std::move(cum));
  }
  for (double v : edge_total_) flux_ += v;
  const double L = param.total_length;
  const double e2 = epsilon * epsilon;
  winding_ = long(std::floor(flux_ / (2.0 * kPi * e2)));
  delta_ = flux_ / (e2 * L) - 2.0 * kPi * double(winding_) / L;
}

double GaugePhase::tangential_integral(double sigma) const {
  const BoundaryParam& bp = *param_;
  const double turns = std::floor(sigma / bp.total_length);
  double s = sigma - turns * bp.total_length;
  if (s >= bp.total_length) s = 0.0;
  const int e = bp.edge_at(s);
  double total = turns * flux_;
  for (int k = 0; k < e; ++k) total += edge_total_[k];
  const Edge& edge = bp.edges[e];
  const std::vector<double>& cum = cumulative_[e];
  const int panels = int(cum.size()) - 1;
  const double pl = edge.length() / panels;
  const double u = std::clamp(s - bp.edge_start[e], 0.0, edge.length());
  const int p = std::min(panels - 1, int(u / pl));
  total += cum[p];
  const double a = p * pl, w = u - a;
  if (w > 0) {
    double part = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double v = a + kGx[k] * w;
      part += kGw[k] * (*A_)(edge.point(v)).dot(edge.tangent(v));
    }
    total += part * w;
  }
  return total;
}

double GaugePhase::normal_integral(double sigma, double tau) const {
  if (tau == 0.0) return 0.0;
  const Vec2d base = param_->point(sigma);
  const Vec2d nu = param_->normal(sigma);
  const int panels = std::max(1, int(std::ceil(std::abs(tau) / panel_)));
  const double pl = tau / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p)
    for (int k = 0; k < 5; ++k) total += kGw[k] * (*A_)(base + (p + kGx[k]) * pl * nu).dot(nu);
  return total * pl;
}

std::vector<double> GaugePhase::normal_profile(double sigma, const std::vector<double>& taus) const {
  const Vec2d base = param_->point(sigma);
  const Vec2d nu = param_->normal(sigma);
  std::vector<double> out(taus.size(), 0.0);
  double acc = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double gap = taus[k] - prev;
    if (gap < 0) throw InvalidInputError("GaugePhase::normal_profile: taus must increase from 0");
    if (gap > 0) {
      const int panels = std::max(1, int(std::ceil(gap / panel_)));
      const double pl = gap / panels;
      double part = 0.0;
      for (int p = 0; p < panels; ++p)
        for (int q = 0; q < 5; ++q) part += kGw[q] * (*A_)(base + (prev + (p + kGx[q]) * pl) * nu).dot(nu);
      acc += part * pl;
    }
    out[k] = acc;
    prev = taus[k];
  }
  return out;
}

std::vector<double> GaugePhase::phase_profile(double s, const std::vector<double>& ts) const {
  const double sigma = epsilon_ * s, e2 = epsilon_ * epsilon_;
  std::vector<double> taus(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) taus[k] = epsilon_ * ts[k];
  std::vector<double> out = normal_profile(sigma, taus);
  const double tangential = tangential_integral(sigma);
  for (double& v : out) v = (v + tangential) / e2 - delta_ * sigma;
  return out;
}

double GaugePhase::operator()(double s, double t) const {
  const double sigma = epsilon_ * s, tau = epsilon_ * t;
  const double e2 = epsilon_ * epsilon_;
  return (normal_integral(sigma, tau) + tangential_integral(sigma)) / e2 - delta_ * sigma;
}

double GaugePhase::tangential_potential(double s, double t) const {
  const double sigma = epsilon_ * s, tau = epsilon_ * t;
  const BoundaryParam& bp = *param_;
  const Vec2d gamma = bp.point(sigma);
  const Vec2d tangent = bp.tangent(sigma);
  const Vec2d nu = bp.normal(sigma);
  const double k = bp.curvature(sigma);
  const Vec2d r = gamma + tau * nu;
  const double ds = 1e-6;
  const double dN = (normal_integral(sigma + ds, tau) - normal_integral(sigma - ds, tau)) / (2.0 * ds);
  return ((1.0 - k * tau) * tangent.dot((*A_)(r)) - dN - (*A_)(gamma).dot(tangent)) / epsilon_ +
         epsilon_ * delta_;
}

double gauge_phase(const VectorPotential2D& A, const BoundaryParam& param, const LayerSpec& spec, double s,
                   double t) {
  if (t < 0 || spec.epsilon * t > spec.tau_layer() * (1.0 + 1e-12))
    throw InvalidInputError("gauge_phase: (s, t) outside the boundary layer");
  return GaugePhase(A, param, spec.epsilon)(s, t);
}

LayerGrid make_layer_grid(const BoundaryParam& param, const LayerSpec& spec, double target_h,
                          double target_ht) {
  validate_layer(param, spec);
  LayerGrid lg;
  lg.epsilon = spec.epsilon;
  const double eps = spec.epsilon;
  const double cut = spec.cell_half_width();
  const double T = spec.tau_layer() / eps;
  for (std::size_t k = 0; k < param.pieces.size(); ++k) {
    const SmoothPiece& p = param.pieces[k];
    LayerPatch patch;
    patch.piece = int(k);
    const double length_s = (p.length() - 2.0 * cut) / eps;
    patch.ns = std::max(2, int(std::lround(length_s / (target_h / eps))) + 1);
    patch.hs = length_s / (patch.ns - 1);
    patch.s0 = (p.sigma_begin + cut) / eps;
    patch.nt = std::max(2, int(std::lround(T / target_ht)) + 1);
    patch.ht = T / (patch.nt - 1);
    lg.patches.push_back(patch);
  }
  return lg;
}

TangentialPotential tangential_potential(const VectorPotential2D& A, const BoundaryParam& param,
                                         const LayerSpec& spec, double target_h) {
  TangentialPotential out;
  out.layer = make_layer_grid(param, spec, target_h, target_h / spec.epsilon);
  const GaugePhase phase(A, param, spec.epsilon);
  const double eps = spec.epsilon;
  out.eps_delta = eps * phase.delta();
  const double ds = 1e-6;
  double n2 = 0.0, r2 = 0.0;
  for (const LayerPatch& p : out.layer.patches) {
    Array2d a(p.ns, p.nt);
    std::vector<double> taus(p.nt);
    for (int q = 0; q < p.nt; ++q) taus[q] = eps * p.t(q);
    for (int m = 0; m < p.ns; ++m) {
      const double sigma = eps * p.s(m);
      const double k = param.curvature(sigma);
      const Vec2d gamma = param.point(sigma), tangent = param.tangent(sigma), nu = param.normal(sigma);
      const std::vector<double> plus = phase.normal_profile(sigma + ds, taus);
      const std::vector<double> minus = phase.normal_profile(sigma - ds, taus);
      const double edge = A(gamma).dot(tangent);
      for (int q = 0; q < p.nt; ++q) {
        const double t = p.t(q), tau = taus[q];
        const double dN = (plus[q] - minus[q]) / (2.0 * ds);
        a(m, q) = ((1.0 - k * tau) * tangent.dot(A(gamma + tau * nu)) - dN - edge) / eps + out.eps_delta;
        const double w = p.ws(m) * p.wt(q) * (1.0 - eps * k * t);
        n2 += w * (a(m, q) + t) * (a(m, q) + t);
        r2 += w * (a(m, q) + t - out.eps_delta) * (a(m, q) + t - out.eps_delta);
      }
      out.boundary_row_defect = std::max(out.boundary_row_defect, std::abs(a(m, 0) - out.eps_delta));
    }
    out.values.push_back(std::move(a));
  }
  out.norm_a_plus_t = std::sqrt(n2);
  out.norm_remainder = std::sqrt(r2);
  out.constant = out.norm_a_plus_t / (eps * spec.log_eps());
  return out;
}

// ---------------------------------------------------------------------------
// Trial state

TrialState build_trial_state(const CurvilinearPolygon& domain, const BoundaryParam& param,
                             const EffectiveSolution& sol1d, const LayerSpec& spec, const Grid2D& grid,
                             const VectorPotential2D& F) {
  if (sol1d.f_star.values.size() == 0 || sol1d.trivial())
    throw InvalidInputError("build_trial_state: missing or trivial 1D solution");
  require_same_grid(grid, F.grid, "build_trial_state");
  (void)domain;
  const double eps = spec.epsilon;
  const double L = param.total_length;
  TrialState out;
  out.psi = ComplexField2D(grid);
  out.winding_m = std::lround(sol1d.alpha_star * L / (2.0 * kPi * eps));
  out.alpha_closed = 2.0 * kPi * double(out.winding_m) * eps / L;
  out.alpha_mismatch = std::abs(out.alpha_closed - sol1d.alpha_star);
  const GaugePhase phase(F, param, eps);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (!grid.inside(i, j)) continue;
      const auto bc = nearest_chart(param, grid.node(i, j), eps);
      if (!bc) continue;
      const double f = sol1d.f_star(bc->t);
      if (f == 0.0) continue;
      const double chi = cutoff_chi(param, spec, bc->s);
      if (chi == 0.0) continue;
      const double theta = -out.alpha_closed * bc->s - phase(bc->s, bc->t);
      out.psi.values(i, j) = chi * f * std::polar(1.0, theta);
    }
  return out;
}

// ---------------------------------------------------------------------------
// I/O

void write_field_csv(const ComplexField2D& psi, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_field_csv: cannot open " + path);
  out << "x,y,re,im,abs2\n";
  char buf[160];
  const Grid2D& g = psi.grid;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const cplx v = psi.values(i, j);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", g.x(i), g.y(j), v.real(), v.imag(),
                    std::norm(v));
      out << buf;
    }
}

namespace {

static_assert(std::endian::native == std::endian::little, "raster I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InvalidInputError("read_field_raster: truncated file");
  return v;
}

}  // namespace

void write_field_raster(const ComplexField2D& psi, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("write_field_raster: cannot open " + path);
  const Grid2D& g = psi.grid;
  out.write("GLSR", 4);
  put<std::uint32_t>(out, 1);
  put<std::int32_t>(out, g.nx);
  put<std::int32_t>(out, g.ny);
  put<double>(out, g.xmin);
  put<double>(out, g.ymin);
  put<double>(out, g.xmax);
  put<double>(out, g.ymax);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const bool in = g.inside(i, j);
      put<double>(out, in ? psi.values(i, j).real() : nan);
      put<double>(out, in ? psi.values(i, j).imag() : nan);
    }
}

ComplexField2D read_field_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("read_field_raster: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GLSR", 4) != 0) throw InvalidInputError("read_field_raster: bad magic");
  if (get<std::uint32_t>(in) != 1) throw InvalidInputError("read_field_raster: unknown version");
  Grid2D g;
  g.nx = get<std::int32_t>(in);
  g.ny = get<std::int32_t>(in);
  if (g.nx < 2 || g.ny < 2) throw InvalidInputError("read_field_raster: bad dimensions");
  g.xmin = get<double>(in);
  g.ymin = get<double>(in);
  g.xmax = get<double>(in);
  g.ymax = get<double>(in);
  g.inside.setZero(g.nx, g.ny);
  ComplexField2D f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double re = get<double>(in), im = get<double>(in);
      if (std::isnan(re)) continue;
      f.grid.inside(i, j) = 1;
      f.values(i, j) = cplx(re, im);
    }
  return f;
}

}  // namespace glsurf
