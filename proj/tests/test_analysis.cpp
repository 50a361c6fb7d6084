#include "glsurf/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

using namespace glsurf;

namespace {

const EffectiveSolution& sol15() {
  static const EffectiveSolution s = minimize_joint(1.5);
  return s;
}

GLConfig config(double eps) {
  GLConfig cfg;
  cfg.b = 1.5;
  cfg.epsilon = eps;
  cfg.c0 = 1.5;
  return cfg;
}

// The trial state packaged as a solver result, so the diagnostics can run without a solve.
GLResult trial_result(const CurvilinearPolygon& dom, double eps, int n) {
  const BoundaryParam param = build_boundary_param(dom);
  const Grid2D g = make_grid(dom, n, n);
  GLResult r;
  r.potential = make_reference_potential(g, dom);
  r.psi = build_trial_state(dom, param, sol15(), LayerSpec(eps, 1.5, 1.5), g, r.potential).psi;
  r.energy = eval_gl_energy(r.psi, r.potential, config(eps));
  return r;
}

// f*^2(dist / eps) as a field.
ComplexField2D model_field(const CurvilinearPolygon& dom, double eps, int n) {
  const Grid2D g = make_grid(dom, n, n);
  ComplexField2D psi(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.inside(i, j)) psi.values(i, j) = sol15().f_star(dist_to_boundary(dom, g.node(i, j)) / eps);
  return psi;
}

LayerField constant_layer(const LayerGrid& lg, cplx value) {
  LayerField u;
  u.layer = lg;
  for (const LayerPatch& p : lg.patches) u.values.push_back(Array2cd::Constant(p.ns, p.nt, value));
  return u;
}

}  // namespace

TEST(EnergyRatio, LeadingTermGivesOne) {
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const double eps = 0.07;
  const double E = param.total_length * sol15().energy / eps;
  EXPECT_NEAR(energy_ratio(E, eps, sol15(), param), 1.0, 1e-14);
  GLResult r;
  r.energy = 2 * E;
  EXPECT_NEAR(energy_ratio(r, config(eps), sol15(), param), 2.0, 1e-14);
}

TEST(EnergyRatio, TrivialProfileIsNotApplicable) {
  EffectiveSolution trivial = sol15();
  trivial.f_star.values.setZero();
  trivial.energy = 0.0;
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  EXPECT_THROW(energy_ratio(-1.0, 0.1, trivial, param), NotApplicableError);
}

TEST(Density, ExactCompositionHasZeroDifference) {
  const auto dom = CurvilinearPolygon::unit_square();
  const ComplexField2D psi = model_field(dom, 0.08, 96);
  const DensityComparison d = density_l2_diff(psi, sol15(), dom, 0.08);
  EXPECT_LT(d.diff, 1e-14);
  EXPECT_GT(d.norm, 0.0);
  const DensityComparison c = density_l2_diff_cut(psi, sol15(), dom, LayerSpec(0.08, 1.5, 1.5));
  EXPECT_LT(c.diff, 1e-14);
  EXPECT_GT(c.norm, 0.0);
  EXPECT_LT(c.norm, d.norm);
}

TEST(Density, NormScalesLikeRootEpsilon) {
  // ||f*^2(dist / eps)|| ~ sqrt(eps |boundary| int f*^4) away from the corners.
  const auto dom = CurvilinearPolygon::unit_square();
  const double n1 = density_l2_diff(model_field(dom, 0.08, 256), sol15(), dom, 0.08).norm;
  const double n2 = density_l2_diff(model_field(dom, 0.04, 256), sol15(), dom, 0.04).norm;
  EXPECT_NEAR(n1 / n2, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
  const Grid1D& g = sol15().f_star.grid;
  double f4 = 0.0;
  for (int i = 0; i < g.n; ++i) f4 += g.weight(i) * std::pow(sol15().f_star.values[i], 4);
  EXPECT_NEAR(n2, std::sqrt(0.04 * 4.0 * f4), 0.2 * n2);
}

TEST(Agmon, TrialStateDecays) {
  const auto dom = CurvilinearPolygon::unit_square();
  const double eps = 0.08;
  const GLResult r = trial_result(dom, eps, 128);
  const AgmonCheck a = agmon_check(r, dom, config(eps), LayerSpec(eps, 1.5, 1.5));
  EXPECT_LT(a.rate, 0.0);
  EXPECT_GE(a.samples, 10);
  EXPECT_LT(a.bulk_fraction, 1e-3);
  EXPECT_LT(a.restriction_defect, 1e-2);
}

TEST(Agmon, FieldInsideTheLayerHasNoRestrictionDefect) {
  const auto dom = CurvilinearPolygon::unit_square();
  const double eps = 0.08;
  const LayerSpec spec(eps, 1.5, 1.5);
  GLResult r = trial_result(dom, eps, 128);
  const Grid2D& g = r.psi.grid;
  const double margin = 3 * g.hx();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (dist_to_boundary(dom, g.node(i, j)) > spec.tau_layer() - margin) r.psi.values(i, j) = 0.0;
  r.energy = eval_gl_energy(r.psi, r.potential, config(eps));
  const AgmonCheck a = agmon_check(r, dom, config(eps), spec);
  EXPECT_LT(a.restriction_defect, 1e-13);
  EXPECT_EQ(a.bulk_fraction, 0.0);
}

TEST(Agmon, TooFewSamplesIsNotApplicable) {
  const auto dom = CurvilinearPolygon::unit_square();
  GLResult r = trial_result(dom, 0.08, 64);
  r.psi.values.setZero();
  EXPECT_THROW(agmon_check(r, dom, config(0.08), LayerSpec(0.08, 1.5, 1.5)), NotApplicableError);
}

TEST(SplittingGrid, UsesTheOneDimensionalNodes) {
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const LayerSpec spec(0.08, 1.5, 1.5);
  const Grid1D& g1 = sol15().f_star.grid;
  const LayerGrid lg = make_splitting_grid(param, spec, g1, 1.0 / 256);
  ASSERT_EQ(lg.patches.size(), 4u);
  for (const LayerPatch& p : lg.patches) {
    EXPECT_DOUBLE_EQ(p.ht, g1.h());
    EXPECT_LE(p.t(p.nt - 1), spec.tau_layer() / spec.epsilon + 1e-12);
    EXPECT_GT(p.t(p.nt - 1), spec.tau_layer() / spec.epsilon - g1.h());
    EXPECT_NEAR(0.08 * p.hs * (p.ns - 1), 1.0 - 2 * spec.cell_half_width(), 1e-12);
  }
}

TEST(Splitting, ConstantOneHasZeroEnergy) {
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const LayerGrid lg = make_splitting_grid(param, LayerSpec(0.08, 1.5, 1.5), sol15().f_star.grid, 1.0 / 128);
  const SplittingTerms t = splitting_terms(constant_layer(lg, 1.0), sol15(), 1.5);
  EXPECT_EQ(t.Eu, 0.0);
  EXPECT_EQ(t.lower, 0.0);
  EXPECT_EQ(t.current, 0.0);
}

TEST(Splitting, CurrentAgreesWithThePotentialFunctionForm) {
  // u = e^{iks}: j_s is constant in t, so -2 int (t + alpha) f^2 j_s = -F(T) j_s.
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const LayerGrid lg = make_splitting_grid(param, LayerSpec(0.08, 1.5, 1.5), sol15().f_star.grid, 1.0 / 128);
  LayerField u;
  u.layer = lg;
  const double k = 0.7;
  for (const LayerPatch& p : lg.patches) {
    Array2cd v(p.ns, p.nt);
    for (int m = 0; m < p.ns; ++m) v.row(m).setConstant(std::polar(1.0, k * p.s(m)));
    u.values.push_back(v);
  }
  const SplittingTerms t = splitting_terms(u, sol15(), 1.5);
  ASSERT_NE(t.current, 0.0);
  EXPECT_NEAR(t.current, t.current_by_parts, 1e-8 * std::abs(t.current));
  // and by hand: j_s = sin(k hs) / hs on every link
  const CostTable cost = compute_cost_table(sol15());
  double expected = 0.0;
  for (const LayerPatch& p : lg.patches)
    expected -= (p.ns - 1) * p.hs * std::sin(k * p.hs) / p.hs * cost.F_values[p.nt - 1];
  EXPECT_NEAR(t.current, expected, 1e-10 * std::abs(expected));
}

TEST(Splitting, IdentityOnRandomFields) {
  // F[f* u e^{-i alpha s}] = E[u] + (lattice leading term) whenever u vanishes on the top row.
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const LayerGrid lg = make_splitting_grid(param, LayerSpec(0.08, 1.5, 1.5), sol15().f_star.grid, 1.0 / 64);
  const Profile1D& f = sol15().f_star;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    LayerField u, psi_hat;
    u.layer = psi_hat.layer = lg;
    double leading = 0.0;
    const double a = U(rng), c = 2 * U(rng), d = U(rng);
    for (const LayerPatch& p : lg.patches) {
      Array2cd v(p.ns, p.nt), w(p.ns, p.nt);
      double f4 = 0.0;
      for (int q = 0; q < p.nt; ++q) f4 += p.wt(q) * std::pow(f.values[q], 4);
      for (int m = 0; m < p.ns; ++m) {
        leading -= p.ws(m) * f4 / 3.0;
        for (int q = 0; q < p.nt; ++q) {
          const double top = 1.0 - double(q) / (p.nt - 1);
          v(m, q) = top * (1.0 + a * std::sin(p.s(m) + d * p.t(q))) * std::polar(1.0, c * p.s(m) + a * p.t(q));
          w(m, q) = f.values[q] * v(m, q);
        }
      }
      u.values.push_back(v);
      psi_hat.values.push_back(w);
    }
    const SplittingTerms t = splitting_terms(u, sol15(), 1.5);
    const double F = layer_functional(psi_hat, sol15(), 1.5);
    EXPECT_NEAR(F, leading + t.Eu, 1e-7 * (std::abs(F) + std::abs(t.Eu))) << trial;
    EXPECT_GE(t.Eu, t.lower - 1e-9) << trial;
  }
}

TEST(Splitting, TrialStateSatisfiesTheIdentityAndTheLowerBound) {
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const double eps = 0.08;
  const LayerSpec spec(eps, 1.5, 1.5);
  const GLResult r = trial_result(CurvilinearPolygon::unit_square(), eps, 128);
  const SplittingEnergy s = splitting_energy(r, sol15(), param, spec, config(eps));
  EXPECT_LE(s.identity_defect, s.tol_quad);
  EXPECT_GE(s.Eu, s.lower - s.tol_quad);
  EXPECT_NEAR(s.cut_length, 4 * (1 - 2 * spec.cell_half_width()), 1e-12);
  EXPECT_NEAR(s.leading, s.leading_full, 0.05 * std::abs(s.leading_full));
}

TEST(Splitting, GridMismatchRejected) {
  const BoundaryParam param = build_boundary_param(CurvilinearPolygon::unit_square());
  const LayerGrid lg = make_splitting_grid(param, LayerSpec(0.08, 1.5, 1.5), Grid1D(15.0, 1501), 1.0 / 64);
  EXPECT_THROW(splitting_terms(constant_layer(lg, 1.0), sol15(), 1.5), GridMismatchError);
}

TEST(SweepCsv, RoundTripIsExact) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  std::vector<SweepRecord> rs(3);
  for (SweepRecord& r : rs) {
    r.b = 1.5;
    r.epsilon = std::abs(U(rng));
    r.E_gl = U(rng) / 3;
    r.ratio = std::exp(U(rng));
    r.Eu_lower_term = 1e-300 * U(rng);
    r.agmon_rate = -std::sqrt(2.0);
    r.iterations = 1234;
    r.grid_n = 512;
  }
  const std::string path = testing::TempDir() + "sweep_roundtrip.csv";
  write_sweep_csv(rs, path);
  const auto back = read_sweep_csv(path);
  ASSERT_EQ(back.size(), rs.size());
  for (std::size_t k = 0; k < rs.size(); ++k) {
    EXPECT_EQ(back[k].epsilon, rs[k].epsilon);
    EXPECT_EQ(back[k].E_gl, rs[k].E_gl);
    EXPECT_EQ(back[k].ratio, rs[k].ratio);
    EXPECT_EQ(back[k].Eu_lower_term, rs[k].Eu_lower_term);
    EXPECT_EQ(back[k].agmon_rate, rs[k].agmon_rate);
    EXPECT_EQ(back[k].iterations, 1234);
    EXPECT_EQ(back[k].grid_n, 512);
  }
  std::FILE* fp = std::fopen(path.c_str(), "r");
  char header[64] = {};
  ASSERT_TRUE(std::fgets(header, sizeof header, fp));
  std::fclose(fp);
  EXPECT_EQ(std::string(header).rfind("b,epsilon,E_gl,E_trial,ratio,diff,norm,bulk_fraction,agmon_rate", 0), 0u);
}

TEST(Sweep, RejectsTheBulkAndNormalRegimes) {
  const auto dom = CurvilinearPolygon::unit_square();
  SweepOptions o;
  EXPECT_THROW(make_sweep(dom, 1.9, {0.1}, o), RegimeError);
  EXPECT_THROW(make_sweep(dom, sol15(), {0.08, 0.1}, o), InvalidInputError);
  EXPECT_THROW(make_sweep(dom, sol15(), {}, o), InvalidInputError);
}

TEST(Sweep, PointDiagnosticsAreConsistent) {
  const auto dom = CurvilinearPolygon::unit_square();
  SweepOptions o;
  o.n = 128;
  o.levels = 2;
  GLResult res;
  const SweepRecord r = sweep_point(dom, sol15(), 0.12, o, &res);
  EXPECT_LE(r.E_gl, r.E_trial);
  EXPECT_EQ(r.E_gl, res.energy);
  EXPECT_LE(res.residual, o.tol);
  EXPECT_NEAR(r.ratio, 0.12 * r.E_gl / (4 * sol15().energy), 1e-14);
  EXPECT_LE(r.splitting_defect, r.tol_quad);
  EXPECT_GE(r.Eu_value, r.Eu_lower_term - r.tol_quad);
  EXPECT_LT(r.agmon_rate, 0.0);
  EXPECT_EQ(r.grid_n, 128);
  EXPECT_EQ(r.perimeter, 4.0);
  // flat edges: a_A + t is exactly the constant eps delta
  EXPECT_LT(r.a_remainder, 1e-8);
}

TEST(Sweep, ParallelJobsAreDeterministic) {
  const auto dom = CurvilinearPolygon::unit_square();
  SweepOptions o;
  o.n = 96;
  o.levels = 1;
  const SweepResult one = make_sweep(dom, sol15(), {0.14, 0.12}, o);
  o.jobs = 2;
  const SweepResult two = make_sweep(dom, sol15(), {0.14, 0.12}, o);
  ASSERT_EQ(one.records.size(), 2u);
  ASSERT_EQ(two.records.size(), 2u);
  EXPECT_TRUE(one.errors.empty());
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(one.records[k].epsilon, two.records[k].epsilon);
    EXPECT_EQ(one.records[k].E_gl, two.records[k].E_gl);
    EXPECT_EQ(one.records[k].density_l2_diff, two.records[k].density_l2_diff);
  }
}

TEST(Sweep, FailedPointIsReportedNotThrown) {
  // at 24^2 the layer of eps = 0.05 is under-resolved; eps = 0.14 still solves
  const auto dom = CurvilinearPolygon::unit_square();
  SweepOptions o;
  o.n = 24;
  o.levels = 1;
  const SweepResult r = make_sweep(dom, sol15(), {0.14, 0.05}, o);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("epsilon=0.05"), std::string::npos);
}
