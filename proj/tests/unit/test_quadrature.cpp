#include <omp.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "fcop/errors.hpp"
#include "fcop/gauss_legendre.hpp"
#include "fcop/quadrature.hpp"
#include "support/models.hpp"

namespace fcop {
namespace {

using testing::gaussian2;
using testing::nig_minus;
using testing::nig_plus;

ModelPtr gaussian1(double mean, double var) {
  return std::make_shared<GaussianModel>(Vec::Constant(1, mean), Mat::Constant(1, 1, var));
}

DampingVector minus_one(const MgfModel& m) { return DampingVector::make(m, Vec::Constant(m.dimension(), -1.0)); }

TEST(GaussLegendre, ExactForPolynomialsUpToDegree2mMinus1) {
  for (int m : {1, 2, 5, 16, 40}) {
    const GaussRule g = gauss_legendre(m);
    ASSERT_EQ(static_cast<int>(g.nodes.size()), m);
    for (int d = 0; d <= 2 * m - 1; ++d) {
      double s = 0.0;
      for (int k = 0; k < m; ++k) s += g.weights[k] * std::pow(g.nodes[k], d);
      const double exact = d % 2 ? 0.0 : 2.0 / (d + 1);
      EXPECT_NEAR(s, exact, 1e-14) << "m=" << m << " d=" << d;
    }
  }
}

TEST(CompositeRule, SymmetricAndSumsToLength) {
  for (Rule r : {Rule::gauss_legendre, Rule::midpoint}) {
    const AxisRule a = composite_rule(r, 12.5, 6);
    ASSERT_EQ(a.nodes.size(), 6u * kPanelOrder);
    EXPECT_NEAR(std::accumulate(a.weights.begin(), a.weights.end(), 0.0), 25.0, 1e-12);
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
      EXPECT_EQ(a.nodes[k], -a.nodes[a.nodes.size() - 1 - k]);
      EXPECT_EQ(a.weights[k], a.weights[a.nodes.size() - 1 - k]);
    }
  }
}

TEST(Quadrature, KernelPrefactor) {
  const double c = 1.0 / (2.0 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(kernel_prefactor(KernelKind::cdf, 1), -c);
  EXPECT_DOUBLE_EQ(kernel_prefactor(KernelKind::cdf, 2), c * c);
  EXPECT_DOUBLE_EQ(kernel_prefactor(KernelKind::pdf, 1), c);
  EXPECT_DOUBLE_EQ(kernel_prefactor(KernelKind::pdf, 3), c * c * c);
}

TEST(Quadrature, SpecValidation) {
  QuadratureSpec s;
  EXPECT_NO_THROW(s.validate(2));
  s.nodes = 4;
  EXPECT_THROW(s.validate(2), DomainError);
  s = {};
  s.tolerance = 0.0;
  EXPECT_THROW(s.validate(2), DomainError);
  s = {};
  s.half_widths = {10.0};
  EXPECT_THROW(s.validate(2), DomainError);
  s.half_widths = {10.0, -1.0};
  EXPECT_THROW(s.validate(2), DomainError);
}

// Phi(1.959964), phi(2), phi(0) from mpmath.
TEST(Quadrature, OneDimensionalGaussianCdfAndPdf) {
  const auto g = gaussian1(0.0, 1.0);
  const double x = 1.959964;
  const IntegralResult c = invert_cdf_nd(g, std::span(&x, 1), minus_one(*g), QuadratureSpec{});
  EXPECT_TRUE(c.converged);
  EXPECT_NEAR(c.value, 0.9750000009035576, 1e-7);
  QuadratureSpec ps;
  ps.tolerance = 1e-6;
  for (auto [x0, expect] : {std::pair{2.0, 0.053990966513188051951}, std::pair{0.0, 0.39894228040143267794}}) {
    const IntegralResult p = invert_pdf_nd(g, std::span(&x0, 1), minus_one(*g), ps);
    EXPECT_NEAR(p.value, expect, 1e-6);
  }
}

TEST(Quadrature, GaussianOrthantProbability) {
  const auto g = gaussian2(0.5);
  const double x[2] = {0.0, 0.0};
  const IntegralResult r = invert_cdf_nd(g, x, minus_one(*g), QuadratureSpec{});
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-7);
  EXPECT_LT(r.imaginary_residual, 1e-10);
}

TEST(Quadrature, StandardBivariateDensityAtOrigin) {
  const auto g = gaussian2(0.0);
  QuadratureSpec ps;
  ps.tolerance = 1e-6;
  const double x[2] = {0.0, 0.0};
  EXPECT_NEAR(invert_pdf_nd(g, x, minus_one(*g), ps).value, 0.15915494309189533577, 1e-6);
}

TEST(Quadrature, FarTailsStayAccurate) {
  const auto g = gaussian2(0.0);
  const double up[2] = {6.0, 6.0};
  const double phi6 = 0.5 * std::erfc(-6.0 / std::sqrt(2.0));
  EXPECT_NEAR(invert_cdf_nd(g, up, minus_one(*g), QuadratureSpec{}).value, phi6 * phi6, 1e-7);
  const double down[2] = {-4.0, 1.0};
  const double lo = 0.5 * std::erfc(4.0 / std::sqrt(2.0)) * 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
  EXPECT_NEAR(invert_cdf_nd(g, down, minus_one(*g), QuadratureSpec{}).value, lo, 1e-7);
}

// The tabulated, phase-separated kernel against the plain nested sum.
TEST(Quadrature, InverterMatchesSerialReference) {
  for (ModelPtr m : {ModelPtr(gaussian2(0.5)), ModelPtr(nig_minus())}) {
    for (KernelKind k : {KernelKind::cdf, KernelKind::pdf}) {
      FourierInverter inv(m, default_damping(*m), k, QuadratureSpec{});
      const double x[2] = {0.03, -0.11};
      for (int level : {0, 1}) {
        if (m->family() == "nig" && level == 1) continue;
        const auto axes = inv.axes(level);
        const auto fast = inv.evaluate_level(x, level);
        const auto ref = reference::integrate(*m, inv.damping(), k, axes, x);
        EXPECT_NEAR(fast.value, ref.value, 1e-12 * std::max(1.0, std::abs(ref.value)))
            << m->family() << " level " << level;
      }
    }
  }
}

TEST(Quadrature, ConjugateHalvingAgrees) {
  const auto m = nig_plus();
  QuadratureSpec half;
  half.conjugate_halving = true;
  FourierInverter a(m, default_damping(*m), KernelKind::cdf, QuadratureSpec{});
  FourierInverter b(m, default_damping(*m), KernelKind::cdf, half);
  const double x[2] = {-0.02, 0.01};
  EXPECT_NEAR(a.evaluate_level(x, 0).value, b.evaluate_level(x, 0).value, 1e-13);
}

TEST(Quadrature, ResultIndependentOfThreadCount) {
  const auto m = nig_minus();
  const double x[2] = {0.01, 0.02};
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const double one = FourierInverter(m, default_damping(*m), KernelKind::cdf, QuadratureSpec{}).evaluate(x).value;
  omp_set_num_threads(4);
  const double four = FourierInverter(m, default_damping(*m), KernelKind::cdf, QuadratureSpec{}).evaluate(x).value;
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(Quadrature, MidpointRuleCrossCheck) {
  const auto m = gaussian2(-0.5);
  QuadratureSpec mid;
  mid.rule = Rule::midpoint;
  const double x[2] = {0.3, -0.4};
  const double a = invert_cdf_nd(m, x, minus_one(*m), QuadratureSpec{}).value;
  const double b = invert_cdf_nd(m, x, minus_one(*m), mid).value;
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(Quadrature, DampingInvariance) {
  const auto m = nig_minus();
  const double x[2] = {0.02, -0.03};
  const DampingVector r1 = default_damping(*m);
  const DampingVector r2 = DampingVector::make(*m, Vec::Constant(2, -0.4));
  EXPECT_NEAR(invert_cdf_nd(m, x, r1, QuadratureSpec{}).value, invert_cdf_nd(m, x, r2, QuadratureSpec{}).value,
              4e-7);
}

// Pinned by self-convergence: half-widths and N doubled twice.
TEST(Quadrature, NigSelfConvergence) {
  const auto m = nig_plus();
  const double x[2] = {0.0, 0.0};
  FourierInverter base(m, default_damping(*m), KernelKind::cdf, QuadratureSpec{});
  const IntegralResult a = base.evaluate(x);
  QuadratureSpec big;
  big.half_widths = {4.0 * base.half_widths()[0], 4.0 * base.half_widths()[1]};
  big.nodes = 4 * 64;
  big.max_depth = 1;
  const IntegralResult b = invert_cdf_nd(m, x, default_damping(*m), big);
  EXPECT_NEAR(a.value, b.value, 1e-6);
}

TEST(Quadrature, AutoTruncationMeetsEnvelope) {
  const auto m = nig_minus();
  const DampingVector r = default_damping(*m);
  const double tau = 1e-9;
  const auto L = auto_truncation(*m, r, tau, KernelKind::cdf);
  ASSERT_EQ(L.size(), 2u);
  for (double f : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const double v0[2] = {L[0], f * L[1]};
    const double v1[2] = {f * L[0], L[1]};
    EXPECT_LT(integrand_envelope(*m, r, KernelKind::cdf, v0), tau);
    EXPECT_LT(integrand_envelope(*m, r, KernelKind::cdf, v1), tau);
  }
  const auto Lp = auto_truncation(*m, r, tau, KernelKind::pdf);
  EXPECT_GE(Lp[0], L[0]);
  EXPECT_GE(Lp[1], L[1]);
}

TEST(Quadrature, TruncationErrorWhenCapIsReached) {
  const auto g = gaussian1(0.0, 1e-9);
  try {
    auto_truncation(*g, minus_one(*g), 1e-12, KernelKind::cdf);
    FAIL() << "expected TruncationError";
  } catch (const TruncationError& e) {
    EXPECT_GT(e.last_envelope(), 1e-12);
  }
}

TEST(Quadrature, RejectsBadInput) {
  const auto g = gaussian2(0.2);
  FourierInverter inv(g, minus_one(*g), KernelKind::cdf, QuadratureSpec{});
  const double one[1] = {0.0};
  EXPECT_THROW(inv.evaluate(one), DomainError);
  const double nan[2] = {std::nan(""), 0.0};
  EXPECT_THROW(inv.evaluate(nan), DomainError);
}

}  // namespace
}  // namespace fcop
