#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcop/models.hpp"

namespace fcop::oracle {

/// Draws from `sample`, one row per draw.
struct SampleMatrix {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> draws;
  std::uint64_t seed = 0;
  std::string generator;

  Eigen::Index rows() const { return draws.rows(); }
  Eigen::Index cols() const { return draws.cols(); }
};

/// Generator identity recorded in every SampleMatrix. Bump the suffix when
/// the stream layout changes.
inline constexpr const char* kGeneratorId = "mt19937_64/splitmix64-shards-65536/v1";

/// Gaussian draws via the Cholesky factor of the covariance; NIG draws as a
/// normal mean-variance mixture over an inverse Gaussian subordinator.
/// Rows are produced in shards of 65536 with per-shard subseeds, so the
/// result does not depend on the thread count.
SampleMatrix sample(const MgfModel& model, std::int64_t count, std::uint64_t seed);

/// Inverse Gaussian draw with mean `mean` and shape `shape` from one
/// standard normal and one uniform (Michael, Schucany and Haas).
double inverse_gaussian(double mean, double shape, double normal, double uniform);

/// Rank-based empirical copula. Ranks use average ties and are scaled by 1/m.
class EmpiricalCopula {
 public:
  explicit EmpiricalCopula(const SampleMatrix& samples);

  double operator()(std::span<const double> u) const;
  /// Row-major over the tensor grid of `axes`.
  std::vector<double> grid(const std::vector<std::vector<double>>& axes) const;

  std::int64_t size() const { return m_; }

 private:
  std::int64_t m_;
  int n_;
  /// Scaled ranks, row-major.
  std::vector<double> ranks_;
};

double empirical_copula(const SampleMatrix& samples, std::span<const double> u);

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double u);

/// P(X <= a, Y <= b) for a standard bivariate normal with correlation rho,
/// by adaptive Gauss-Kronrod integration of phi(s) Phi((b - rho s)/sqrt(1 - rho^2))
/// over s <= a.
double bivariate_normal_cdf(double a, double b, double rho);

/// Gaussian copula on [0, 1]^2; throws DomainError for |rho| >= 1.
double gaussian_copula_exact(std::span<const double> u, double rho);

/// Gaussian copula density on (0, 1)^2.
double gaussian_copula_density_exact(std::span<const double> u, double rho);

}  // namespace fcop::oracle
