#include "glsurf/effective1d.hpp"
#include "oracles/quadrature.hpp"
#include "oracles/shooting.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace glsurf;

namespace {

// Frozen after agreement of the shooting oracle (dt = 1e-3, t_end = 12) with the
// Richardson-extrapolated descent value; see ShootingAgreesWithDescent.
constexpr double kE1D_b15 = -0.0076071959;
constexpr double kAlphaStar_b15 = -0.7857739;
// Frozen from the dense cell-centred eigen-solve (n = 4001, t_max = 20).
constexpr double kTheta0 = 0.590104;

const EffectiveSolution& solution_b15() {
  static const EffectiveSolution sol = minimize_joint(1.5);
  return sol;
}

}  // namespace

TEST(Energy1D, ZeroProfileHasZeroEnergy) {
  const Grid1D g;
  EXPECT_EQ(eval_energy_1d(Profile1D::zero(g), 0.3, 1.5), 0.0);
  EXPECT_EQ(eval_energy_1d(Profile1D::zero(g), -2.0, 1.5), 0.0);
}

TEST(Energy1D, GaussianMatchesQuadratureOracle) {
  const auto integrand = [](double t) {
    const double e = std::exp(-t * t);
    return t * t * e + t * t * e - 0.5 * (2 * e - e * e);
  };
  const double exact = oracle::gauss_legendre(integrand, 0.0, 15.0, 300);
  EXPECT_NEAR(exact, std::sqrt(kPi / 2) / 4, 1e-13);

  const Grid1D coarse(15.0, 1501);
  const double e_coarse = eval_energy_1d(Profile1D::gaussian(coarse), 0.0, 1.0);
  const double e_fine = eval_energy_1d(Profile1D::gaussian(coarse.refined()), 0.0, 1.0);
  EXPECT_NEAR(e_fine, exact, 1e-5 * exact);
  const double ratio = (e_coarse - exact) / (e_fine - exact);
  EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(Energy1D, RejectsBadInput) {
  const Grid1D g(15.0, 101);
  Profile1D f = Profile1D::gaussian(g);
  EXPECT_THROW(eval_energy_1d(f, 0.0, 0.0), ParameterError);
  EXPECT_THROW(eval_energy_1d(f, 0.0, -1.0), ParameterError);
  f.values[10] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(eval_energy_1d(f, 0.0, 1.5), InvalidInputError);
}

TEST(Energy1D, GradientMatchesFiniteDifferences) {
  const Grid1D g(15.0, 301);
  const ArrayXd f = Profile1D::gaussian(g).values * 0.7;
  const ArrayXd grad = gradient_1d_kernel(f, g, -0.4, 1.3);
  const double step = 1e-6;
  for (int i : {0, 1, 50, 150, 300}) {
    ArrayXd fp = f, fm = f;
    fp[i] += step;
    fm[i] -= step;
    const double fd = (energy_1d_kernel(fp, g, -0.4, 1.3) - energy_1d_kernel(fm, g, -0.4, 1.3)) / (2 * step);
    EXPECT_NEAR(fd, grad[i], 1e-7 * std::max(1.0, std::abs(grad[i])));
  }
}

TEST(MinimizeProfile, TrivialAboveThreshold) {
  const Grid1D g;
  const Theta0Result th = solve_theta0(g);
  const ProfileMinimum m = minimize_profile(th.alpha0, 1.8, g, Profile1D::gaussian(g));
  EXPECT_LE(m.profile.sup_norm(), 1e-6);
  EXPECT_NEAR(m.energy, 0.0, 1e-10);
}

TEST(MinimizeProfile, PositiveDecreasingAtZeroShift) {
  const Grid1D g;
  const ProfileMinimum m = minimize_profile(0.0, 1.5, g, Profile1D::gaussian(g));
  ASSERT_GT(m.profile.values[0], 0.0);
  for (int i = 0; i + 1 < g.n; ++i) {
    ASSERT_GE(m.profile.values[i], 0.0);
    ASSERT_LE(m.profile.values[i + 1], m.profile.values[i]) << "at i = " << i;
  }
  EXPECT_DOUBLE_EQ(m.energy, eval_energy_1d(m.profile, 0.0, 1.5));
}

TEST(MinimizeProfile, OptimumIsAFixedPoint) {
  const EffectiveSolution& sol = solution_b15();
  const ProfileMinimum m = minimize_profile(sol.alpha_star, 1.5, sol.f_star.grid, sol.f_star);
  EXPECT_LE((m.profile.values - sol.f_star.values).abs().maxCoeff(), 1e-8);
}

TEST(MinimizeJoint, GoldenValuesAtB15) {
  const EffectiveSolution& sol = solution_b15();
  EXPECT_FALSE(sol.regime_flag);
  EXPECT_FALSE(sol.flat_flag);
  EXPECT_NEAR(sol.alpha_star, kAlphaStar_b15, 1e-5);
  // O(h^2) discretization error at h = 0.005 is ~4e-7.
  EXPECT_NEAR(sol.energy, kE1D_b15, 1e-6);
  EXPECT_LE(el_residual(sol), 1e-8);
  EXPECT_LE(std::abs(sol.dE_dalpha), 1e-6);
  EXPECT_DOUBLE_EQ(sol.energy, eval_energy_1d(sol.f_star, sol.alpha_star, 1.5));
}

TEST(MinimizeJoint, ShootingAgreesWithDescent) {
  for (double b : {1.2, 1.5, 1.65}) {
    const oracle::ShootingOptimum shot = oracle::shooting_optimum(b);
    const Grid1D g;
    const double coarse = minimize_joint(b, g).energy;
    const double fine = minimize_joint(b, g.refined()).energy;
    const double extrapolated = (4 * fine - coarse) / 3;
    EXPECT_NEAR(extrapolated, shot.energy, 1e-5 * std::abs(shot.energy)) << "b = " << b;
    // second-order refinement
    EXPECT_LT(std::abs(fine - extrapolated), 0.3 * std::abs(coarse - extrapolated)) << "b = " << b;
  }
  EXPECT_NEAR(oracle::shooting_optimum(1.5).energy, kE1D_b15, 1e-9);
}

TEST(MinimizeJoint, SmallProfileNearThreshold) {
  const EffectiveSolution sol = minimize_joint(1.0 / kTheta0 - 0.01);
  EXPECT_FALSE(sol.trivial());
  EXPECT_LT(sol.f_star.sup_norm(), 0.15);
  EXPECT_LT(std::abs(sol.energy), 1e-4);
}

TEST(MinimizeJoint, FlatLandscapeAboveThreshold) {
  const EffectiveSolution sol = minimize_joint(1.8);
  EXPECT_TRUE(sol.regime_flag);
  EXPECT_TRUE(sol.flat_flag);
  EXPECT_TRUE(sol.trivial());
}

TEST(ElResidual, ZeroAndPerturbed) {
  const Grid1D g;
  EXPECT_EQ(el_residual(Profile1D::zero(g), -0.7, 1.5), 0.0);

  const EffectiveSolution& sol = solution_b15();
  const double converged = el_residual(sol);
  EXPECT_LE(converged, 1e-6 * sol.f_star.sup_norm());
  Profile1D bumped = sol.f_star;
  for (int i = 0; i < g.n; ++i) bumped.values[i] += 0.01 * std::exp(-std::pow(g.t(i) - 2.0, 2) / 0.1);
  EXPECT_GT(el_residual(bumped, sol.alpha_star, 1.5), 10 * converged);
}

TEST(CostTable, EndpointsAndSigns) {
  const EffectiveSolution& sol = solution_b15();
  const CostTable ct = compute_cost_table(sol);
  EXPECT_EQ(ct.F_values[0], 0.0);
  EXPECT_DOUBLE_EQ(ct.K_values[0], sol.f_star.values[0] * sol.f_star.values[0]);
  EXPECT_LE(std::abs(ct.F_end()), 1e-5);
  EXPECT_LT(ct.F_min(), 0.0);
  EXPECT_GE(ct.K_min(), -1e-8);
  for (int i = 0; i < ct.grid.n; ++i)
    ASSERT_DOUBLE_EQ(ct.K_values[i], sol.f_star.values[i] * sol.f_star.values[i] + ct.F_values[i]);
}

TEST(CheckDecay, Cases) {
  const DecayFit fit = check_decay(solution_b15());
  EXPECT_TRUE(fit.ok);
  EXPECT_GT(fit.c_fit, 0.0);
  EXPECT_LT(fit.C_fit, 1e3);

  const Grid1D g;
  EXPECT_THROW(check_decay(Profile1D::zero(g), -0.7), NotApplicableError);
  const Profile1D one(g, ArrayXd::Ones(g.n));
  EXPECT_FALSE(check_decay(one, -0.7).ok);
}

TEST(Theta0, MatchesDenseOracle) {
  const oracle::DenseTheta0 dense = oracle::dense_theta0();
  EXPECT_NEAR(dense.theta0, kTheta0, 1e-6);

  const Theta0Result th = solve_theta0();
  EXPECT_NEAR(th.theta0, dense.theta0, 1e-3);
  EXPECT_NEAR(th.alpha0, dense.alpha0, 1e-3);
  EXPECT_LE(std::abs(std::abs(th.alpha0) - std::sqrt(th.theta0)), 1e-3);
  EXPECT_LE(th.agreement_gap, 1e-4);
  EXPECT_GT(lowest_eigenvalue(Grid1D(), 0.0), th.theta0);
}

TEST(Theta0, RejectsShortGrid) {
  EXPECT_THROW(solve_theta0(Grid1D(5.0, 501)), ParameterError);
}

// Properties over a scan of b inside the nontrivial window.
class EffectiveProperties : public ::testing::TestWithParam<double> {};

// f* is not globally decreasing: integrating the EL equation against f' at the
// optimum gives alpha*^2 = (1 - f*(0)^2 / 2) / b, hence f*''(0) = f*(0)^3 / (2b) > 0.
// It rises to a peak before |alpha*| and decreases after it.
TEST_P(EffectiveProperties, PositiveUnimodalAndCostNonnegative) {
  const double b = GetParam();
  const EffectiveSolution sol = minimize_joint(b);
  const ArrayXd& f = sol.f_star.values;
  Eigen::Index peak = 0;
  f.maxCoeff(&peak);
  EXPECT_LT(sol.f_star.grid.t(int(peak)), std::abs(sol.alpha_star));
  for (Eigen::Index i = 0; i + 1 < f.size(); ++i) {
    ASSERT_GE(f[i], 0.0);
    if (i < peak)
      ASSERT_GE(f[i + 1], f[i] - 1e-14) << "at i = " << i;
    else
      ASSERT_LE(f[i + 1], f[i] + 1e-14) << "at i = " << i;
  }
  const double f0 = f[0];
  EXPECT_NEAR(sol.alpha_star * sol.alpha_star, (1 - 0.5 * f0 * f0) / b, 1e-4);
  EXPECT_LE(el_residual(sol), 1e-6 * std::max(sol.f_star.sup_norm(), 1e-300));
  EXPECT_GE(compute_cost_table(sol).K_min(), -1e-8);
  // envelope identity dE/dalpha = F(t_max)
  EXPECT_NEAR(sol.dE_dalpha, sol.dE_dalpha_envelope, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(BScan, EffectiveProperties, ::testing::Values(1.1, 1.3, 1.45, 1.6));

TEST(EffectiveProperties, TrivialRegimeBeyondThreshold) {
  const Grid1D g;
  for (double b : {1.0 / kTheta0 + 0.06, 2.5}) {
    const ProfileMinimum m = minimize_profile(-std::sqrt(kTheta0), b, g, Profile1D::gaussian(g));
    EXPECT_LE(m.profile.sup_norm(), 1e-6) << "b = " << b;
  }
}
