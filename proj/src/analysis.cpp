#include "glsurf/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace glsurf {

namespace {

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

void require_nontrivial(const EffectiveSolution& sol, const char* where) {
  if (sol.f_star.values.size() == 0 || sol.trivial() || sol.energy == 0.0)
    throw NotApplicableError(std::string(where) + ": trivial 1D profile");
}

}  // namespace

double energy_ratio(double energy, double epsilon, const EffectiveSolution& sol1d, const BoundaryParam& param) {
  require_nontrivial(sol1d, "energy_ratio");
  return epsilon * energy / (param.total_length * sol1d.energy);
}

double energy_ratio(const GLResult& result, const GLConfig& cfg, const EffectiveSolution& sol1d,
                    const BoundaryParam& param) {
  return energy_ratio(result.energy, cfg.epsilon, sol1d, param);
}

DensityComparison density_l2_diff(const ComplexField2D& psi, const EffectiveSolution& sol1d,
                                  const CurvilinearPolygon& domain, double epsilon) {
  const Grid2D& g = psi.grid;
  double d2 = 0.0, n2 = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const double dist = std::max(0.0, dist_to_boundary(domain, g.node(i, j)));
      const double f = sol1d.f_star(dist / epsilon);
      const double model = f * f;
      const double diff = std::norm(psi.values(i, j)) - model;
      d2 += diff * diff;
      n2 += model * model;
    }
  return {std::sqrt(d2 * g.cell_area()), std::sqrt(n2 * g.cell_area())};
}

DensityComparison density_l2_diff_cut(const ComplexField2D& psi, const EffectiveSolution& sol1d,
                                      const CurvilinearPolygon& domain, const LayerSpec& spec) {
  const BoundaryParam param = build_boundary_param(domain);
  const Grid2D& g = psi.grid;
  const double cut = spec.cell_half_width();
  double d2 = 0.0, n2 = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const NearestPoint np = nearest_boundary_point(param, g.node(i, j));
      if (np.at_corner || param.corner_distance(np.sigma) <= cut) continue;
      const double f = sol1d.f_star(np.distance / spec.epsilon);
      const double diff = std::norm(psi.values(i, j)) - f * f;
      d2 += diff * diff;
      n2 += f * f * f * f;
    }
  return {std::sqrt(d2 * g.cell_area()), std::sqrt(n2 * g.cell_area())};
}

AgmonCheck agmon_check(const GLResult& result, const CurvilinearPolygon& domain, const GLConfig& cfg,
                       const LayerSpec& spec) {
  const ComplexField2D& psi = result.psi;
  const Grid2D& g = psi.grid;
  const double eps = cfg.epsilon, depth = spec.tau_layer();
  AgmonCheck out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, total = 0, beyond = 0;
  Grid2D layer = g;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const double dist = dist_to_boundary(domain, g.node(i, j));
      const double m = std::norm(psi.values(i, j));
      total += m;
      if (dist > depth) {
        beyond += m;
        layer.inside(i, j) = 0;
      }
      if (dist < 2 * eps || dist > depth || !(m > 1e-280)) continue;
      const double x = dist / eps, y = 0.5 * std::log(m);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++out.samples;
    }
  if (out.samples < 10) throw NotApplicableError("agmon_check: fewer than 10 samples in the decay annulus");
  const double n = out.samples;
  out.rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out.bulk_fraction = total > 0 ? beyond / total : 0.0;

  ComplexField2D restricted(layer);
  restricted.values = psi.values;
  const double full = eval_gl_energy(psi, result.potential, cfg);
  VectorPotential2D A = result.potential;
  A.grid = layer;
  const double part = eval_gl_energy(restricted, A, cfg);
  out.restriction_defect = std::abs(full - part) / std::abs(full);
  return out;
}

LayerGrid make_splitting_grid(const BoundaryParam& param, const LayerSpec& spec, const Grid1D& grid1d,
                              double target_h) {
  validate_layer(param, spec);
  LayerGrid lg;
  lg.epsilon = spec.epsilon;
  const double eps = spec.epsilon, cut = spec.cell_half_width();
  const double T = spec.tau_layer() / eps;
  const int nt = std::min(grid1d.n, int(std::floor(T / grid1d.h() + 1e-9)) + 1);
  for (std::size_t k = 0; k < param.pieces.size(); ++k) {
    const SmoothPiece& p = param.pieces[k];
    LayerPatch patch;
    patch.piece = int(k);
    const double length_s = (p.length() - 2.0 * cut) / eps;
    patch.ns = std::max(3, int(std::lround(length_s / (target_h / eps))) + 1);
    patch.hs = length_s / (patch.ns - 1);
    patch.s0 = (p.sigma_begin + cut) / eps;
    patch.nt = nt;
    patch.ht = grid1d.h();
    lg.patches.push_back(patch);
  }
  return lg;
}

double layer_functional(const LayerField& psi_hat, const EffectiveSolution& sol1d, double b) {
  const double alpha = sol1d.alpha_star;
  double total = 0.0;
  for (std::size_t n = 0; n < psi_hat.layer.patches.size(); ++n) {
    const LayerPatch& p = psi_hat.layer.patches[n];
    const Array2cd& v = psi_hat.values[n];
    for (int q = 0; q < p.nt; ++q) {
      const double beta = p.t(q) + alpha;
      for (int m = 0; m + 1 < p.ns; ++m) {
        // (d_s - i (t + alpha)) on the link, the potential taken at the link average
        const cplx d = (v(m + 1, q) - v(m, q)) / p.hs - cplx(0, beta) * 0.5 * (v(m, q) + v(m + 1, q));
        total += p.hs * p.wt(q) * std::norm(d);
      }
    }
    for (int m = 0; m < p.ns; ++m) {
      for (int q = 0; q + 1 < p.nt; ++q) total += p.ws(m) * std::norm(v(m, q + 1) - v(m, q)) / p.ht;
      for (int q = 0; q < p.nt; ++q) {
        const double r = std::norm(v(m, q));
        total -= p.ws(m) * p.wt(q) * (2 * r - r * r) / (2 * b);
      }
    }
  }
  return total;
}

SplittingTerms splitting_terms(const LayerField& u, const EffectiveSolution& sol1d, double b) {
  require_nontrivial(sol1d, "splitting_terms");
  const Profile1D& f = sol1d.f_star;
  const double alpha = sol1d.alpha_star;
  const CostTable cost = compute_cost_table(sol1d);
  SplittingTerms out;
  double kinetic = 0.0;
  for (std::size_t n = 0; n < u.layer.patches.size(); ++n) {
    const LayerPatch& p = u.layer.patches[n];
    if (std::abs(p.ht - f.grid.h()) > 1e-12 * f.grid.h() || p.nt > f.grid.n)
      throw GridMismatchError("splitting_terms: t-nodes must be the nodes of the 1D grid");
    const Array2cd& v = u.values[n];
    for (int q = 0; q < p.nt; ++q) {
      const double fq = f.values[q], beta = p.t(q) + alpha;
      const double f2 = fq * fq;
      for (int m = 0; m + 1 < p.ns; ++m) {
        const double js = (std::conj(v(m, q)) * v(m + 1, q)).imag() / p.hs;
        const double grad2 = std::norm(v(m + 1, q) - v(m, q)) / (p.hs * p.hs);
        const double w = p.hs * p.wt(q) * f2;
        kinetic += w * (1.0 - 0.25 * beta * beta * p.hs * p.hs) * grad2;
        out.current += -2.0 * beta * js * w;
      }
    }
    for (int m = 0; m < p.ns; ++m) {
      for (int q = 0; q + 1 < p.nt; ++q)
        kinetic += p.ws(m) * f.values[q] * f.values[q + 1] * std::norm(v(m, q + 1) - v(m, q)) / p.ht;
      for (int q = 0; q < p.nt; ++q) {
        const double f4 = std::pow(f.values[q], 4);
        const double gap = 1.0 - std::norm(v(m, q));
        out.lower += p.ws(m) * p.wt(q) * f4 * gap * gap / (2 * b);
      }
    }
    // Potential-function form: -2 (t + alpha) f^2 = -F', moved onto j_s by parts in t.
    // The t-links use the same trapezoid rule that builds F, so the two agree
    // to rounding when j_s does not depend on t.
    for (int m = 0; m + 1 < p.ns; ++m) {
      auto js = [&](int q) {
        return (std::conj(v(m, q)) * v(m + 1, q)).imag() / p.hs;
      };
      double part = -cost.F_values[p.nt - 1] * js(p.nt - 1) + cost.F_values[0] * js(0);
      for (int q = 0; q + 1 < p.nt; ++q) {
        // F d_t j_s integrated on [t_q, t_{q+1}] with F linear-trapezoid-consistent weights
        part += 0.5 * (cost.F_values[q] + cost.F_values[q + 1]) * (js(q + 1) - js(q));
      }
      out.current_by_parts += p.hs * part;
    }
  }
  out.Eu = kinetic + out.current + out.lower;
  return out;
}

SplittingEnergy splitting_energy(const GLResult& result, const EffectiveSolution& sol1d, const BoundaryParam& param,
                                 const LayerSpec& spec, const GLConfig& cfg) {
  require_nontrivial(sol1d, "splitting_energy");
  const double eps = spec.epsilon;
  const Grid2D& g = result.psi.grid;
  const double h = std::max(g.hx(), g.hy());
  LayerField psi_hat, u;
  psi_hat.layer = make_splitting_grid(param, spec, sol1d.f_star.grid, h);
  u.layer = psi_hat.layer;
  const GaugePhase phase(result.potential, param, eps);
  const double T = spec.tau_layer() / eps;
  const double log_eps = spec.log_eps();
  const Profile1D& f = sol1d.f_star;
  SplittingEnergy out;
  for (const LayerPatch& p : psi_hat.layer.patches) {
    double f4 = 0.0;
    for (int q = 0; q < p.nt; ++q) f4 += p.wt(q) * std::pow(f.values[q], 4);
    for (int m = 0; m < p.ns; ++m) out.leading -= p.ws(m) * f4 / (2 * cfg.b);
    Array2cd ph(p.ns, p.nt), uu(p.ns, p.nt);
    std::vector<double> ts(p.nt);
    for (int q = 0; q < p.nt; ++q) ts[q] = p.t(q);
    const double length_s = (p.ns - 1) * p.hs;
    out.cut_length += eps * length_s;
    // Cut-offs: chi1 vanishes at both ends of the patch (ramps of width |log eps|
    // or half the patch), chi2 drops to 0 over the last unit before T.
    const double ramp = std::min(log_eps, 0.5 * length_s);
    for (int m = 0; m < p.ns; ++m) {
      const double s = p.s(m);
      const double chi1 = smoothstep((m * p.hs) / ramp) * smoothstep(((p.ns - 1 - m) * p.hs) / ramp);
      const double sigma = eps * s;
      const Vec2d gamma = param.point(sigma), nu = param.normal(sigma);
      const std::vector<double> phi = phase.phase_profile(s, ts);
      const cplx shift = std::polar(1.0, sol1d.alpha_star * s);
      for (int q = 0; q < p.nt; ++q) {
        const double t = ts[q];
        const double chi2 = smoothstep(T - t);
        cplx v = 0.0;
        if (chi1 * chi2 > 0) {
          const cplx tilde = sample_field(result.psi, result.potential, eps, gamma + eps * t * nu) *
                             std::polar(1.0, phi[q]);
          v = chi1 * chi2 * tilde * shift;
        }
        ph(m, q) = v;
        const double fq = f.values[q];
        uu(m, q) = fq > 1e-10 ? v / fq : cplx(0.0);
      }
    }
    psi_hat.values.push_back(std::move(ph));
    u.values.push_back(std::move(uu));
  }
  out.terms = splitting_terms(u, sol1d, cfg.b);
  out.Eu = out.terms.Eu;
  out.lower = out.terms.lower;
  out.restricted = layer_functional(psi_hat, sol1d, cfg.b);
  out.leading_full = out.cut_length * sol1d.energy / eps;
  out.identity_defect = std::abs(out.restricted - out.leading - out.Eu);
  const double layer_area = out.cut_length * spec.tau_layer();
  out.tol_quad = std::max(1e-6, 10.0 * h * h * layer_area);
  return out;
}

// ---------------------------------------------------------------------------

SweepRecord sweep_point(const CurvilinearPolygon& domain, const EffectiveSolution& sol1d, double epsilon,
                        const SweepOptions& opts, GLResult* result_out) {
  require_nontrivial(sol1d, "sweep_point");
  const BoundaryParam param = build_boundary_param(domain);
  const LayerSpec spec(epsilon, opts.c0, opts.c1);
  validate_layer(param, spec);
  GLConfig cfg;
  cfg.b = sol1d.b;
  cfg.epsilon = epsilon;
  cfg.tol = opts.tol;
  cfg.max_iterations = opts.max_iterations;
  cfg.mode = opts.mode;
  cfg.c0 = opts.c0;
  cfg.validate();

  // Coarse-to-fine chain; levels that cannot resolve the layer are skipped.
  std::vector<int> sizes;
  for (int k = std::max(1, opts.levels) - 1; k >= 0; --k) {
    const int n = opts.n >> k;
    const Grid2D probe = make_grid(domain, n, n);
    if (spec.tau_layer() >= 8.0 * std::max(probe.hx(), probe.hy()) || k == 0) sizes.push_back(n);
  }

  GLResult result;
  int iterations = 0;
  for (std::size_t level = 0; level < sizes.size(); ++level) {
    const Grid2D g = make_grid(domain, sizes[level], sizes[level]);
    const VectorPotential2D F = make_reference_potential(g, domain);
    ComplexField2D init = level == 0 ? build_trial_state(domain, param, sol1d, spec, g, F).psi
                                     : prolong_field(result.psi, g, F, epsilon);
    result = minimize_gl(domain, cfg, init, F);
    iterations += result.iterations;
  }
  const Grid2D& g = result.psi.grid;
  const VectorPotential2D F = make_reference_potential(g, domain);
  const TrialState trial = build_trial_state(domain, param, sol1d, spec, g, F);
  const double E_trial = eval_gl_energy(trial.psi, F, cfg);
  if (result.energy > E_trial) {
    // The chain landed in a worse critical point than the certificate; redo from the trial.
    GLResult direct = minimize_gl(domain, cfg, trial.psi, F);
    iterations += direct.iterations;
    if (direct.energy < result.energy) result = std::move(direct);
  }

  SweepRecord r;
  r.b = sol1d.b;
  r.epsilon = epsilon;
  r.E_gl = result.energy;
  r.E_trial = E_trial;
  r.E1D_star = sol1d.energy;
  r.perimeter = param.total_length;
  r.ratio = energy_ratio(result.energy, epsilon, sol1d, param);
  const DensityComparison dc = density_l2_diff(result.psi, sol1d, domain, epsilon);
  r.density_l2_diff = dc.diff;
  r.density_l2_norm = dc.norm;
  const AgmonCheck ag = agmon_check(result, domain, cfg, spec);
  r.bulk_mass_fraction = ag.bulk_fraction;
  r.agmon_rate = ag.rate;
  r.restriction_defect = ag.restriction_defect;
  const TangentialPotential tp = tangential_potential(result.potential, param, spec, std::max(g.hx(), g.hy()));
  r.a_norm = tp.norm_a_plus_t;
  r.a_constant = tp.constant;
  r.a_eps_delta = tp.eps_delta;
  r.a_remainder = tp.norm_remainder;
  const DensityComparison cut = density_l2_diff_cut(result.psi, sol1d, domain, spec);
  r.density_cut_diff = cut.diff;
  r.density_cut_norm = cut.norm;
  const SplittingEnergy se = splitting_energy(result, sol1d, param, spec, cfg);
  r.Eu_value = se.Eu;
  r.Eu_lower_term = se.lower;
  r.splitting_defect = se.identity_defect;
  r.tol_quad = se.tol_quad;
  r.residual = result.residual;
  r.iterations = iterations;
  r.grid_n = g.nx;
  if (result_out) *result_out = std::move(result);
  return r;
}

SweepResult make_sweep(const CurvilinearPolygon& domain, const EffectiveSolution& sol1d,
                       const std::vector<double>& epsilons, const SweepOptions& opts) {
  if (epsilons.empty()) throw InvalidInputError("make_sweep: no epsilon values");
  for (std::size_t k = 1; k < epsilons.size(); ++k)
    if (!(epsilons[k] < epsilons[k - 1])) throw InvalidInputError("make_sweep: epsilons must be strictly decreasing");
  if (sol1d.regime_flag || sol1d.trivial())
    throw RegimeError("make_sweep: b outside (1, 1/theta0) or trivial 1D profile");

  SweepResult out;
  std::vector<SweepRecord> records(epsilons.size());
  std::vector<std::string> errors(epsilons.size());
  std::vector<char> done(epsilons.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < epsilons.size();) {
      try {
        records[k] = sweep_point(domain, sol1d, epsilons[k], opts);
        done[k] = 1;
      } catch (const std::exception& e) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "epsilon=%.6g: ", epsilons[k]);
        errors[k] = buf + std::string(e.what());
      }
    }
  };
  const int jobs = std::clamp(opts.jobs, 1, int(epsilons.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (done[k])
      out.records.push_back(records[k]);
    else
      out.errors.push_back(errors[k]);
  }
  // Convergence indicators along decreasing epsilon, 5% slack for discretization noise.
  const auto& rs = out.records;
  for (std::size_t k = 1; k < rs.size(); ++k) {
    char buf[160];
    const double r0 = std::abs(rs[k - 1].ratio - 1), r1 = std::abs(rs[k].ratio - 1);
    if (r1 > 1.05 * r0) {
      std::snprintf(buf, sizeof buf, "|ratio - 1| rose from %.4g to %.4g at epsilon=%.4g", r0, r1, rs[k].epsilon);
      out.flags.push_back(buf);
    }
    const double d0 = rs[k - 1].density_l2_diff / rs[k - 1].density_l2_norm;
    const double d1 = rs[k].density_l2_diff / rs[k].density_l2_norm;
    if (d1 > 1.05 * d0) {
      std::snprintf(buf, sizeof buf, "diff/norm rose from %.4g to %.4g at epsilon=%.4g", d0, d1, rs[k].epsilon);
      out.flags.push_back(buf);
    }
    if (rs[k].bulk_mass_fraction > rs[k - 1].bulk_mass_fraction) {
      std::snprintf(buf, sizeof buf, "bulk fraction rose from %.3g to %.3g at epsilon=%.4g",
                    rs[k - 1].bulk_mass_fraction, rs[k].bulk_mass_fraction, rs[k].epsilon);
      out.flags.push_back(buf);
    }
  }
  return out;
}

SweepResult make_sweep(const CurvilinearPolygon& domain, double b, const std::vector<double>& epsilons,
                       const SweepOptions& opts) {
  const EffectiveSolution sol = minimize_joint(b);
  return make_sweep(domain, sol, epsilons, opts);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct Column {
  const char* name;
  double SweepRecord::*real;
  int SweepRecord::*integer;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols = {
      {"b", &SweepRecord::b, nullptr},
      {"epsilon", &SweepRecord::epsilon, nullptr},
      {"E_gl", &SweepRecord::E_gl, nullptr},
      {"E_trial", &SweepRecord::E_trial, nullptr},
      {"ratio", &SweepRecord::ratio, nullptr},
      {"diff", &SweepRecord::density_l2_diff, nullptr},
      {"norm", &SweepRecord::density_l2_norm, nullptr},
      {"bulk_fraction", &SweepRecord::bulk_mass_fraction, nullptr},
      {"agmon_rate", &SweepRecord::agmon_rate, nullptr},
      {"Eu", &SweepRecord::Eu_value, nullptr},
      {"Eu_lower", &SweepRecord::Eu_lower_term, nullptr},
      {"E1D_star", &SweepRecord::E1D_star, nullptr},
      {"perimeter", &SweepRecord::perimeter, nullptr},
      {"restriction_defect", &SweepRecord::restriction_defect, nullptr},
      {"a_norm", &SweepRecord::a_norm, nullptr},
      {"a_constant", &SweepRecord::a_constant, nullptr},
      {"a_eps_delta", &SweepRecord::a_eps_delta, nullptr},
      {"a_remainder", &SweepRecord::a_remainder, nullptr},
      {"cut_diff", &SweepRecord::density_cut_diff, nullptr},
      {"cut_norm", &SweepRecord::density_cut_norm, nullptr},
      {"splitting_defect", &SweepRecord::splitting_defect, nullptr},
      {"tol_quad", &SweepRecord::tol_quad, nullptr},
      {"residual", &SweepRecord::residual, nullptr},
      {"iterations", nullptr, &SweepRecord::iterations},
      {"grid_n", nullptr, &SweepRecord::grid_n},
  };
  return cols;
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_sweep_csv: cannot open " + path);
  const auto& cols = columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
  out << '\n';
  char buf[64];
  for (const SweepRecord& r : records) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c].real)
        std::snprintf(buf, sizeof buf, "%.17g", r.*(cols[c].real));
      else
        std::snprintf(buf, sizeof buf, "%d", r.*(cols[c].integer));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

std::vector<SweepRecord> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("read_sweep_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInputError("read_sweep_csv: empty file");
  std::map<std::string, const Column*> by_name;
  for (const Column& c : columns()) by_name[c.name] = &c;
  std::vector<const Column*> order;
  {
    std::stringstream ss(line);
    for (std::string name; std::getline(ss, name, ',');) {
      auto it = by_name.find(name);
      order.push_back(it == by_name.end() ? nullptr : it->second);
    }
  }
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SweepRecord r;
    std::stringstream ss(line);
    std::size_t c = 0;
    for (std::string cell; std::getline(ss, cell, ','); ++c) {
      if (c >= order.size()) throw InvalidInputError("read_sweep_csv: too many cells");
      if (!order[c]) continue;
      try {
        if (order[c]->real)
          r.*(order[c]->real) = std::stod(cell);
        else
          r.*(order[c]->integer) = std::stoi(cell);
      } catch (const std::exception&) {
        throw InvalidInputError("read_sweep_csv: bad cell '" + cell + "'");
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace glsurf
