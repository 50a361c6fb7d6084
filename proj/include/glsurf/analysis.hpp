#pragma once

// Numerical checks of the surface-superconductivity asymptotics: energy ratio,
// density profile, decay away from the boundary, restriction to the layer and
// the splitting psi = f* u e^{-i alpha* s} of the layer functional.

#include "glsurf/effective1d.hpp"
#include "glsurf/geometry.hpp"
#include "glsurf/gl2d.hpp"

#include <string>
#include <vector>

namespace glsurf {

/// eps E / (|boundary| E1D*). Throws NotApplicableError for a trivial profile.
double energy_ratio(double energy, double epsilon, const EffectiveSolution& sol1d, const BoundaryParam& param);
double energy_ratio(const GLResult& result, const GLConfig& cfg, const EffectiveSolution& sol1d,
                    const BoundaryParam& param);

struct DensityComparison {
  /// || |psi|^2 - f*^2(dist / eps) ||_{L^2(Omega)}
  double diff = 0.0;
  /// || f*^2(dist / eps) ||_{L^2(Omega)}
  double norm = 0.0;
};

DensityComparison density_l2_diff(const ComplexField2D& psi, const EffectiveSolution& sol1d,
                                  const CurvilinearPolygon& domain, double epsilon);
/// The same over nodes whose nearest boundary point is farther than
/// spec.cell_half_width() from every corner (the corner cells left out).
DensityComparison density_l2_diff_cut(const ComplexField2D& psi, const EffectiveSolution& sol1d,
                                      const CurvilinearPolygon& domain, const LayerSpec& spec);

struct AgmonCheck {
  /// Least-squares slope of log|psi| against dist / eps over dist in [2 eps, tau_layer].
  double rate = 0.0;
  int samples = 0;
  /// Share of sum |psi|^2 beyond tau_layer.
  double bulk_fraction = 0.0;
  /// |E - E restricted to {dist <= tau_layer}| / |E|
  double restriction_defect = 0.0;
};

/// Throws NotApplicableError with fewer than 10 usable samples in the annulus.
AgmonCheck agmon_check(const GLResult& result, const CurvilinearPolygon& domain, const GLConfig& cfg,
                       const LayerSpec& spec);

/// u on the cut layer, one ns x nt array per patch; t-nodes are those of the 1D grid.
struct LayerField {
  LayerGrid layer;
  std::vector<Array2cd> values;
};

/// Patches over the cut parts with t on the 1D grid nodes up to tau_layer / eps
/// and s-spacing close to target_h / eps.
LayerGrid make_splitting_grid(const BoundaryParam& param, const LayerSpec& spec, const Grid1D& grid1d,
                              double target_h);

struct SplittingTerms {
  /// E[u] = int f*^2 {|d_t u|^2 + |d_s u|^2 - 2 (t + alpha*) j_s[u] + f*^2 (1 - |u|^2)^2 / (2b)}
  double Eu = 0.0;
  /// (1/2b) int f*^4 (1 - |u|^2)^2
  double lower = 0.0;
  /// The current term -2 int f*^2 (t + alpha*) j_s[u] ...
  double current = 0.0;
  /// ... and the same term through the potential function, int F d_t j_s - [F j_s] at the top row.
  double current_by_parts = 0.0;
};

/// Discrete E[u] on a layer grid. The s-links carry the symmetric difference
/// that makes the splitting of the layer functional exact on the lattice.
SplittingTerms splitting_terms(const LayerField& u, const EffectiveSolution& sol1d, double b);

/// Layer functional int |d_t psi|^2 + |(d_s - i t) psi|^2 - (2|psi|^2 - |psi|^4)/(2b)
/// for psi given through psi e^{i alpha* s} on the layer grid.
double layer_functional(const LayerField& psi_hat, const EffectiveSolution& sol1d, double b);

struct SplittingEnergy {
  SplittingTerms terms;
  double Eu = 0.0;
  double lower = 0.0;
  /// F[psi] for the cut-off, gauge-transformed minimizer.
  double restricted = 0.0;
  /// -(1/2b) sum_s sum_{t <= T} f*^4: the lattice value of |boundary_cut| E1D* / eps
  /// with the t-integral stopped at T = tau_layer / eps.
  double leading = 0.0;
  /// |boundary_cut| E1D* / eps with the full 1D energy.
  double leading_full = 0.0;
  /// |restricted - leading - Eu|
  double identity_defect = 0.0;
  /// max(1e-6, 10 h^2 layer area)
  double tol_quad = 0.0;
  double cut_length = 0.0;
};

/// psi~ = psi e^{i phi_A} sampled on the layer, cut off in s near the corner
/// cells and in t near tau_layer, then u = psi~ e^{i alpha* s} / f*.
SplittingEnergy splitting_energy(const GLResult& result, const EffectiveSolution& sol1d, const BoundaryParam& param,
                                 const LayerSpec& spec, const GLConfig& cfg);

// ---------------------------------------------------------------------------
// Sweep

struct SweepRecord {
  double b = 0.0;
  double epsilon = 0.0;
  double E_gl = 0.0;
  double E_trial = 0.0;
  double ratio = 0.0;
  double density_l2_diff = 0.0;
  double density_l2_norm = 0.0;
  double bulk_mass_fraction = 0.0;
  double agmon_rate = 0.0;
  double Eu_value = 0.0;
  double Eu_lower_term = 0.0;
  // diagnostics beyond the fixed columns
  double E1D_star = 0.0;
  double perimeter = 0.0;
  double restriction_defect = 0.0;
  double a_norm = 0.0;
  double a_constant = 0.0;
  /// eps delta_eps and || a_A + t - eps delta_eps ||
  double a_eps_delta = 0.0;
  double a_remainder = 0.0;
  double density_cut_diff = 0.0;
  double density_cut_norm = 0.0;
  double splitting_defect = 0.0;
  double tol_quad = 0.0;
  double residual = 0.0;
  int iterations = 0;
  int grid_n = 0;
};

struct SweepOptions {
  /// Finest grid is n x n on the bounding box.
  int n = 512;
  /// Coarse-to-fine chain n / 2^k, k = levels - 1 .. 0 (levels below the layer resolution are skipped).
  int levels = 3;
  double c0 = 1.5;
  double c1 = 1.5;
  double tol = 1e-6;
  int max_iterations = 50000;
  FieldMode mode = FieldMode::Frozen;
  /// Independent epsilon values solved concurrently.
  int jobs = 1;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  /// One line per failed epsilon.
  std::vector<std::string> errors;
  /// Non-monotone convergence indicators, reported rather than thrown.
  std::vector<std::string> flags;
};

/// Everything for one (domain, b, epsilon): trial state, coarse-to-fine
/// minimization, all diagnostics. The 1D solution is shared read-only.
SweepRecord sweep_point(const CurvilinearPolygon& domain, const EffectiveSolution& sol1d, double epsilon,
                        const SweepOptions& opts, GLResult* result_out = nullptr);

/// epsilons must be strictly decreasing. Throws RegimeError when b is outside
/// the surface regime or the profile is trivial.
SweepResult make_sweep(const CurvilinearPolygon& domain, double b, const std::vector<double>& epsilons,
                       const SweepOptions& opts);
SweepResult make_sweep(const CurvilinearPolygon& domain, const EffectiveSolution& sol1d,
                       const std::vector<double>& epsilons, const SweepOptions& opts);

/// Fixed leading columns b, epsilon, E_gl, E_trial, ratio, diff, norm,
/// bulk_fraction, agmon_rate, Eu, Eu_lower, then the diagnostics; 17 significant digits.
void write_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path);
std::vector<SweepRecord> read_sweep_csv(const std::string& path);

}  // namespace glsurf
