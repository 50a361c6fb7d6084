#pragma once

// Ginzburg-Landau functional in epsilon-units on a cell-centred grid with a
// staggered, link-based vector potential:
//
//   G[psi, A] = sum_links w |psi_j e^{i theta_ij} - psi_i|^2
//             - sum_nodes hx hy (2|psi|^2 - |psi|^4) / (2 b eps^2)
//             + eps^{-4} sum_plaquettes hx hy (curl A - 1)^2
//
// with theta_ij = (integral of A along the link) / eps^2, w = hy/hx on
// x-links and hx/hy on y-links. Links leaving the domain are dropped, which is
// the natural (Neumann) boundary condition.

#include "glsurf/effective1d.hpp"
#include "glsurf/geometry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace glsurf {

struct ComplexField2D {
  Grid2D grid;
  /// nx x ny; zero outside the domain.
  Array2cd values;

  ComplexField2D() = default;
  explicit ComplexField2D(const Grid2D& g) : grid(g), values(Array2cd::Zero(g.nx, g.ny)) {}

  double sup_abs() const;
};

/// Link averages of A: ax on x-links ((nx-1) x ny, between nodes (i,j) and
/// (i+1,j)), ay on y-links (nx x (ny-1)). Defined on the whole bounding box.
struct VectorPotential2D {
  Grid2D grid;
  Array2d ax;
  Array2d ay;

  /// Bilinear interpolation (extrapolation near the box edges) of each component.
  Vec2d operator()(const Vec2d& p) const;
  /// Plaquette curl, (nx-1) x (ny-1).
  Array2d curl() const;
  /// Node divergence over interior nodes of the box (zero on the box rim).
  Array2d divergence() const;
};

enum class FieldMode { Frozen, Alternating };

struct GLConfig {
  double b = 1.5;
  double epsilon = 0.1;
  /// On the normalized residual eps^2 |grad| / (2 hx hy), sup over nodes.
  double tol = 1e-6;
  int max_iterations = 50000;
  FieldMode mode = FieldMode::Frozen;
  /// Alternating mode: number of (A, psi) relaxation rounds after the frozen solve.
  int alternating_rounds = 4;
  /// Layer depth coefficient used for the bulk-mass diagnostic.
  double c0 = 2.0;

  /// kappa and h_ex from eps = b^{-1/2} kappa^{-1}, h_ex = b kappa^2.
  double kappa() const;
  double h_ex() const;
  void validate() const;
};

struct GLResult {
  ComplexField2D psi;
  VectorPotential2D potential;
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double sup_abs = 0.0;
  /// Fraction of sum |psi|^2 at distance > c0 eps |log eps| from the boundary.
  double bulk_mass_fraction = 0.0;
  bool converged = false;
  /// Energy after every accepted step (starts with the initial energy).
  std::vector<double> energy_trace;
};

class GLConvergenceError : public ConvergenceError {
 public:
  GLConvergenceError(const std::string& what, std::shared_ptr<GLResult> state)
      : ConvergenceError(what, state->residual), state_(std::move(state)) {}
  const GLResult& state() const { return *state_; }

 private:
  std::shared_ptr<GLResult> state_;
};

/// F = (-(y - yc), x - xc) / 2 about the domain centroid.
VectorPotential2D make_reference_potential(const Grid2D& grid, const CurvilinearPolygon& domain);
VectorPotential2D make_reference_potential(const Grid2D& grid, const Vec2d& center);

/// Field term is skipped (exactly 0) in frozen mode.
double eval_gl_energy(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg);
double eval_gl_energy(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg,
                      FieldMode mode);

/// dE/dRe psi + i dE/dIm psi (zero outside the domain).
ComplexField2D gl_gradient(const ComplexField2D& psi, const VectorPotential2D& A, const GLConfig& cfg);

/// Gradient with respect to the link values of A (ax, ay), field term included.
VectorPotential2D gl_potential_gradient(const ComplexField2D& psi, const VectorPotential2D& A,
                                        const GLConfig& cfg);

/// eps^2 max |grad| / (2 hx hy): the discrete GL equation residual.
double gl_residual(const ComplexField2D& grad, const GLConfig& cfg);

/// Nonlinear conjugate gradient with exact quartic line search. The grid comes
/// from init; A starts at the reference potential.
GLResult minimize_gl(const CurvilinearPolygon& domain, const GLConfig& cfg, const ComplexField2D& init);
GLResult minimize_gl(const CurvilinearPolygon& domain, const GLConfig& cfg, const ComplexField2D& init,
                     const VectorPotential2D& A0);

/// psi at an arbitrary point: bilinear weights over the surrounding inside
/// nodes, each sample parallel-transported to p along the straight segment
/// (midpoint rule for the line integral of A). Falls back to the nearest
/// inside node; 0 when there is none nearby.
cplx sample_field(const ComplexField2D& psi, const VectorPotential2D& A, double epsilon, const Vec2d& p);

/// Gauge-covariant bilinear transfer to a finer grid: each coarse sample is
/// parallel-transported to the fine node along the straight segment (midpoint
/// rule for the line integral of A) before weighting. Coarse nodes outside the
/// domain carry no weight.
ComplexField2D prolong_field(const ComplexField2D& coarse, const Grid2D& fine, const VectorPotential2D& A,
                             double epsilon);

/// Uniform noise of the given amplitude inside the domain, deterministic in seed.
ComplexField2D random_field(const Grid2D& grid, unsigned seed, double amplitude = 0.5);

/// Link current j = Im(conj(psi_i) psi_j e^{i theta}) / h, zero on absent links.
struct CurrentField {
  Grid2D grid;
  Array2d jx;  // (nx-1) x ny
  Array2d jy;  // nx x (ny-1)

  /// Node divergence (outflow minus inflow over present links).
  Array2d divergence() const;
};

CurrentField superconducting_current(const ComplexField2D& psi, const VectorPotential2D& A,
                                     const GLConfig& cfg);

// ---------------------------------------------------------------------------
// Boundary gauge

/// phi_A(sigma, tau) = eps^{-2} [ int_0^tau A(gamma + eta nu) . nu deta
///                               + int_0^sigma A(gamma) . gamma' ] - delta_eps sigma
/// with nu the inward normal, so that Psi = psi e^{i phi_A} sees a purely
/// tangential potential a_A = (1 - eps k t) gamma' . A / eps - d_s phi_A.
class GaugePhase {
 public:
  GaugePhase(const VectorPotential2D& A, const BoundaryParam& param, double epsilon);

  /// Total flux int_Omega curl A = circulation along the boundary.
  double flux() const { return flux_; }
  double delta() const { return delta_; }
  /// floor(flux / (2 pi eps^2)); phi gains 2 pi winding() per turn.
  long winding() const { return winding_; }
  double epsilon() const { return epsilon_; }

  /// Rescaled arguments (s, t) = (sigma, tau) / eps.
  double operator()(double s, double t) const;
  /// Circulation int_0^sigma A(gamma) . gamma' (sigma may exceed one turn).
  double tangential_integral(double sigma) const;
  /// int_0^tau A(gamma(sigma) + eta nu(sigma)) . nu deta
  double normal_integral(double sigma, double tau) const;
  /// a_A(s, t)
  double tangential_potential(double s, double t) const;
  /// normal_integral(sigma, tau_k) for an increasing list starting at 0, accumulated panel by panel.
  std::vector<double> normal_profile(double sigma, const std::vector<double>& taus) const;
  /// phi_A(s, t_k) for an increasing list of t starting at 0.
  std::vector<double> phase_profile(double s, const std::vector<double>& ts) const;

 private:
  const VectorPotential2D* A_;
  const BoundaryParam* param_;
  double epsilon_;
  double flux_ = 0.0;
  double delta_ = 0.0;
  long winding_ = 0;
  double panel_ = 0.0;
  // Cumulative circulation at panel nodes of each edge.
  std::vector<std::vector<double>> cumulative_;
  std::vector<double> edge_total_;
};

double gauge_phase(const VectorPotential2D& A, const BoundaryParam& param, const LayerSpec& spec, double s,
                   double t);

/// Tensor (s, t) grid over the cut part of one smooth piece.
struct LayerPatch {
  int piece = 0;
  double s0 = 0.0;  // first s-node
  int ns = 0;
  double hs = 0.0;
  int nt = 0;
  double ht = 0.0;

  double s(int m) const { return s0 + m * hs; }
  double t(int k) const { return k * ht; }
  /// Trapezoid weights.
  double ws(int m) const { return (m == 0 || m == ns - 1) ? 0.5 * hs : hs; }
  double wt(int k) const { return (k == 0 || k == nt - 1) ? 0.5 * ht : ht; }
};

struct LayerGrid {
  double epsilon = 0.0;
  std::vector<LayerPatch> patches;
};

/// Patches over the cut parts of each smooth piece, t in [0, tau_layer / eps].
/// hs ~ target_h / eps and ht ~ target_ht are rounded so the nodes hit the ends.
LayerGrid make_layer_grid(const BoundaryParam& param, const LayerSpec& spec, double target_h, double target_ht);

struct TangentialPotential {
  LayerGrid layer;
  /// One ns x nt array per patch.
  std::vector<Array2d> values;
  /// || a + t ||_{L^2(A_cut)} in (s, t) measure (Jacobian 1 - eps k t).
  double norm_a_plus_t = 0.0;
  /// || a + t - eps delta || in the same measure.
  double norm_remainder = 0.0;
  /// norm_a_plus_t / (eps |log eps|)
  double constant = 0.0;
  /// max |a(s, 0) - eps delta|
  double boundary_row_defect = 0.0;
  double eps_delta = 0.0;
};

TangentialPotential tangential_potential(const VectorPotential2D& A, const BoundaryParam& param,
                                         const LayerSpec& spec, double target_h);

// ---------------------------------------------------------------------------
// Trial state

struct TrialState {
  ComplexField2D psi;
  /// Closed shift 2 pi m eps / |boundary| nearest to alpha*.
  double alpha_closed = 0.0;
  double alpha_mismatch = 0.0;
  long winding_m = 0;
};

/// chi(s) f*(t) e^{-i alpha s} e^{-i phi_F(s, t)} through the nearest-point chart
/// (0 where the foot is a corner or f* vanishes).
TrialState build_trial_state(const CurvilinearPolygon& domain, const BoundaryParam& param,
                             const EffectiveSolution& sol1d, const LayerSpec& spec, const Grid2D& grid,
                             const VectorPotential2D& F);

// ---------------------------------------------------------------------------
// I/O

/// x, y, re, im, abs2 for nodes inside the domain, 17 significant digits.
void write_field_csv(const ComplexField2D& psi, const std::string& path);

/// Little-endian raster: "GLSR", u32 version, i32 nx, i32 ny, f64 xmin ymin
/// xmax ymax, then (re, im) per node, rows of constant y, NaN outside.
void write_field_raster(const ComplexField2D& psi, const std::string& path);
ComplexField2D read_field_raster(const std::string& path);

}  // namespace glsurf
