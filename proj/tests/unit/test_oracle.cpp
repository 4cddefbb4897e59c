#include <omp.h>

#include <cmath>
#include <random>

#include <boost/math/special_functions/owens_t.hpp>
#include <gtest/gtest.h>

#include "fcop/errors.hpp"
#include "fcop/oracle.hpp"
#include "support/models.hpp"

namespace fcop {
namespace {

using namespace fcop::oracle;
using testing::gaussian2;
using testing::nig_minus;
using testing::nig_plus;

// Owen's T representation of the bivariate normal cdf, for h, k != 0.
double owen_bvn(double h, double k, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  const double beta = (h * k > 0.0 || (h * k == 0.0 && h + k >= 0.0)) ? 0.0 : 0.5;
  return 0.5 * normal_cdf(h) + 0.5 * normal_cdf(k) - boost::math::owens_t(h, (k - rho * h) / (h * s)) -
         boost::math::owens_t(k, (h - rho * k) / (k * s)) - beta;
}

SampleMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  SampleMatrix s;
  s.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) s.draws(r, c++) = v;
    ++r;
  }
  return s;
}

TEST(Oracle, SamplingIsReproducible) {
  const auto m = nig_minus();
  const SampleMatrix a = sample(*m, 70000, 7);
  const SampleMatrix b = sample(*m, 70000, 7);
  const SampleMatrix c = sample(*m, 70000, 8);
  EXPECT_TRUE(a.draws == b.draws);
  EXPECT_FALSE(a.draws == c.draws);
  EXPECT_EQ(a.generator, std::string(kGeneratorId));
  EXPECT_EQ(a.seed, 7u);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const SampleMatrix d = sample(*m, 70000, 7);
  omp_set_num_threads(saved);
  EXPECT_TRUE(a.draws == d.draws);
}

TEST(Oracle, GaussianSampleMeans) {
  Vec mean(2);
  mean << 1.0, 2.0;
  const GaussianModel g(mean, Mat::Identity(2, 2));
  const SampleMatrix s = sample(g, 1000000, 42);
  const Eigen::RowVectorXd mu = s.draws.colwise().mean();
  EXPECT_NEAR(mu[0], 1.0, 4e-3);
  EXPECT_NEAR(mu[1], 2.0, 4e-3);
}

TEST(Oracle, NigSampleMomentsWithinFiveStandardErrors) {
  for (const auto& m : {nig_plus(), nig_minus(), nig_plus(7.0)}) {
    const SampleMatrix s = sample(*m, 1000000, 2024);
    const Moments mo = moments(*m);
    const double n = static_cast<double>(s.rows());
    const Eigen::RowVectorXd mu = s.draws.colwise().mean();
    const Eigen::MatrixXd c = s.draws.rowwise() - mu;
    for (int i = 0; i < 2; ++i) {
      const double se = std::sqrt(c.col(i).squaredNorm() / (n - 1.0) / n);
      EXPECT_LE(std::abs(mu[i] - mo.mean[i]), 5.0 * se);
      for (int j = 0; j <= i; ++j) {
        const Eigen::ArrayXd p = c.col(i).array() * c.col(j).array();
        const double se_c = std::sqrt((p - p.mean()).square().sum() / (n - 1.0) / n);
        EXPECT_LE(std::abs(p.mean() - mo.covariance(i, j)), 5.0 * se_c);
      }
    }
  }
}

TEST(Oracle, NigSampleCorrelationMatchesClosedForm) {
  const SampleMatrix s = sample(*nig_plus(), 1000000, 1);
  const Eigen::RowVectorXd mu = s.draws.colwise().mean();
  const Eigen::MatrixXd c = s.draws.rowwise() - mu;
  const double rho = c.col(0).dot(c.col(1)) / (c.col(0).norm() * c.col(1).norm());
  EXPECT_NEAR(rho, 0.1015, 0.01);
}

TEST(Oracle, InverseGaussianMoments) {
  const double mean = 0.4;
  const double shape = 1.3;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  double s1 = 0.0;
  double s2 = 0.0;
  const int n = 400000;
  for (int k = 0; k < n; ++k) {
    const double z = inverse_gaussian(mean, shape, nd(rng), ud(rng));
    s1 += z;
    s2 += z * z;
  }
  const double m = s1 / n;
  const double v = s2 / n - m * m;
  EXPECT_NEAR(m, mean, 5.0 * std::sqrt(mean * mean * mean / shape / n));
  EXPECT_NEAR(v, mean * mean * mean / shape, 0.02 * mean * mean * mean / shape);
}

TEST(Oracle, EmpiricalCopulaSmallExample) {
  const SampleMatrix s = from_rows({{1, 1}, {2, 3}, {3, 2}});
  const double u[2] = {2.0 / 3.0, 2.0 / 3.0};
  EXPECT_DOUBLE_EQ(empirical_copula(s, u), 1.0 / 3.0);
  const double ones[2] = {1.0, 1.0};
  EXPECT_DOUBLE_EQ(empirical_copula(s, ones), 1.0);
  const double zero[2] = {0.0, 0.5};
  EXPECT_DOUBLE_EQ(empirical_copula(s, zero), 0.0);
}

TEST(Oracle, EmpiricalCopulaTiesAndGrid) {
  // Column 0 ties at rank 1.5/4.
  const SampleMatrix s = from_rows({{1, 4}, {1, 3}, {2, 2}, {3, 1}});
  const EmpiricalCopula c(s);
  const double a[2] = {0.375, 1.0};
  const double b[2] = {0.3, 1.0};
  EXPECT_DOUBLE_EQ(c(a), 0.5);
  EXPECT_DOUBLE_EQ(c(b), 0.0);
  const std::vector<std::vector<double>> axes{{0.25, 0.375, 0.75, 1.0}, {0.25, 0.5, 1.0}};
  const auto g = c.grid(axes);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double u[2] = {axes[0][i], axes[1][j]};
      EXPECT_DOUBLE_EQ(g[i * 3 + j], c(u));
    }
  }
  EXPECT_THROW(EmpiricalCopula(from_rows({{1, 2}})), DomainError);
}

TEST(Oracle, NormalHelpers) {
  EXPECT_NEAR(normal_quantile(0.975), 1.9599639845400542355, 1e-15);
  EXPECT_NEAR(normal_cdf(1.959964), 0.9750000009035576, 1e-15);
  EXPECT_NEAR(normal_pdf(2.0), 0.053990966513188051951, 3e-17);
  EXPECT_THROW(normal_quantile(1.0), DomainError);
}

TEST(Oracle, BivariateNormalMatchesOwensT) {
  for (double rho : {-0.95, -0.5, 0.3, 0.9, 0.999}) {
    for (double h : {-2.1, -0.4, 0.7, 1.8}) {
      for (double k : {-1.3, 0.2, 2.5}) {
        EXPECT_NEAR(bivariate_normal_cdf(h, k, rho), owen_bvn(h, k, rho), 1e-12) << rho << " " << h << " " << k;
      }
    }
  }
}

TEST(Oracle, GaussianCopulaExactValues) {
  const double u[2] = {0.3, 0.7};
  EXPECT_EQ(gaussian_copula_exact(u, 0.0), 0.21);
  const double m[2] = {0.5, 0.5};
  EXPECT_NEAR(gaussian_copula_exact(m, 0.5), 1.0 / 3.0, 1e-13);
  const double c[2] = {0.4, 0.7};
  EXPECT_NEAR(gaussian_copula_exact(c, 0.999999), 0.4, 1e-4);
  EXPECT_THROW(gaussian_copula_exact(u, 1.0), DomainError);
  EXPECT_NEAR(gaussian_copula_density_exact(m, 0.5), 1.154700538379251529, 1e-13);
}

TEST(Oracle, GaussianCopulaExactIsACopula) {
  std::vector<double> a;
  for (int k = 0; k <= 20; ++k) a.push_back(k / 20.0);
  for (double rho : {-0.9, 0.3, 0.95}) {
    std::vector<double> c(a.size() * a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double u[2] = {a[i], a[j]};
        c[i * a.size() + j] = gaussian_copula_exact(u, rho);
        EXPECT_GE(c[i * a.size() + j], std::max(a[i] + a[j] - 1.0, 0.0) - 1e-8);
        EXPECT_LE(c[i * a.size() + j], std::min(a[i], a[j]) + 1e-8);
      }
    }
    for (std::size_t i = 1; i < a.size(); ++i) {
      EXPECT_EQ(c[i * a.size()], 0.0);
      EXPECT_EQ(c[i * a.size() + a.size() - 1], a[i]);
      for (std::size_t j = 1; j < a.size(); ++j) {
        const std::size_t n = a.size();
        EXPECT_GE(c[i * n + j] - c[(i - 1) * n + j] - c[i * n + j - 1] + c[(i - 1) * n + j - 1], -1e-8);
      }
    }
  }
}

TEST(Oracle, RejectsUnsupportedFamily) {
  struct Other final : MgfModel {
    int dimension() const override { return 1; }
    using MgfModel::log_mgf;
    Complex log_mgf(std::span<const Complex>) const override { return 0.0; }
    double finiteness_slack(const Vec&) const override { return 1.0; }
    double boundary_distance(const Vec&) const override { return 1.0; }
    ModelPtr marginal(int) const override { return nullptr; }
    std::string family() const override { return "other"; }
    std::string fingerprint() const override { return "other"; }
  };
  EXPECT_THROW(sample(Other{}, 10, 1), DomainError);
}

}  // namespace
}  // namespace fcop
