#pragma once

#include <complex>
#include <memory>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace fcop {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;

/// A random vector described by its extended moment generating function
/// M(z) = E[exp(<z, X>)] on a complex strip.
///
/// Implementations are immutable after construction, so every member is safe
/// to call concurrently.
class MgfModel {
 public:
  virtual ~MgfModel() = default;

  virtual int dimension() const = 0;

  /// log M(z) with the bilinear (non-Hermitian) pairing <z, x>. Throws
  /// DomainError when Re z lies outside the finiteness domain.
  virtual Complex log_mgf(std::span<const Complex> z) const = 0;
  Complex log_mgf(const CVec& z) const { return log_mgf(std::span<const Complex>(z.data(), z.size())); }

  /// Signed slack of the finiteness condition at a real point; >= 0 means
  /// M(r) < infinity. Infinite for families that are finite everywhere.
  virtual double finiteness_slack(const Vec& r) const = 0;

  /// Largest s >= 0 such that s*direction stays in the finiteness domain
  /// (infinity if unbounded).
  virtual double boundary_distance(const Vec& direction) const = 0;

  /// Required slack for the feasibility predicate.
  virtual double feasibility_margin() const { return 0.0; }

  /// One-dimensional law of coordinate i (0-based).
  virtual std::shared_ptr<const MgfModel> marginal(int i) const = 0;

  virtual std::string family() const = 0;

  /// Stable textual identity used for cache keys and metadata.
  virtual std::string fingerprint() const = 0;
};

using ModelPtr = std::shared_ptr<const MgfModel>;

/// Multivariate normal N(mean, cov).
class GaussianModel final : public MgfModel {
 public:
  /// Validates symmetry (1e-12 relative), clamps correlations to
  /// |rho| <= 1 - 1e-6 and requires the smallest eigenvalue to be at least
  /// 1e-8 * trace / n.
  GaussianModel(Vec mean, Mat cov);

  int dimension() const override { return static_cast<int>(mean_.size()); }
  using MgfModel::log_mgf;
  Complex log_mgf(std::span<const Complex> z) const override;
  double finiteness_slack(const Vec&) const override;
  double boundary_distance(const Vec&) const override;
  ModelPtr marginal(int i) const override;
  std::string family() const override { return "gaussian"; }
  std::string fingerprint() const override;

  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  bool correlation_clamped() const { return clamped_; }

  static constexpr double kMaxAbsCorrelation = 1.0 - 1e-6;

 private:
  Vec mean_;
  Mat cov_;
  bool clamped_ = false;
};

/// Marginal NIG parameters (alpha, beta, delta, mu), already time-scaled.
struct Nig1dParams {
  double alpha;
  double beta;
  double delta;
  double mu;
};

/// Multivariate normal inverse Gaussian law at Levy time t:
/// NIG_n(alpha, beta, delta*t, mu*t, Delta).
class NigModel final : public MgfModel {
 public:
  NigModel(double alpha, Vec beta, double delta, Vec mu, Mat shape, double t = 1.0);

  int dimension() const override { return static_cast<int>(beta_.size()); }
  using MgfModel::log_mgf;
  Complex log_mgf(std::span<const Complex> z) const override;
  double finiteness_slack(const Vec& r) const override;
  double boundary_distance(const Vec& direction) const override;
  double feasibility_margin() const override { return 1e-9 * alpha_ * alpha_; }
  ModelPtr marginal(int i) const override;
  std::string family() const override { return "nig"; }
  std::string fingerprint() const override;

  double alpha() const { return alpha_; }
  const Vec& beta() const { return beta_; }
  /// Base (t = 1) scale and location.
  double delta() const { return delta_; }
  const Vec& mu() const { return mu_; }
  const Mat& shape() const { return shape_; }
  double time() const { return t_; }
  /// sqrt(alpha^2 - <beta, Delta beta>).
  double gamma() const { return gamma_; }

  /// alpha^2 - <beta + r, Delta (beta + r)>.
  double radicand(const Vec& r) const;

 private:
  double alpha_;
  Vec beta_;
  double delta_;
  Vec mu_;
  Mat shape_;
  double t_;
  double gamma_;
};

/// Damping vector R of the inversion integrals: strictly negative and
/// feasible for the model it was made for.
class DampingVector {
 public:
  /// Throws DomainError naming the failed condition.
  static DampingVector make(const MgfModel& model, Vec r);

  const Vec& values() const { return r_; }
  double operator[](int i) const { return r_[i]; }
  int size() const { return static_cast<int>(r_.size()); }

 private:
  explicit DampingVector(Vec r) : r_(std::move(r)) {}
  Vec r_;
};

/// M(z) = exp(log M(z)); NumericalError on overflow.
Complex mgf(const MgfModel& model, const CVec& z);

/// R_i < 0 for all i and the family's finiteness/integrability condition
/// holds with the family's margin.
bool feasible(const MgfModel& model, const Vec& r);

/// Starts at (-1, ..., -1) and halves toward 0 until feasible with at least
/// 10% of the ray distance to the finiteness boundary left.
DampingVector default_damping(const MgfModel& model);

/// Marginal parameters of coordinate i (0-based), via the Schur complement
/// of Delta; time-scaled.
Nig1dParams nig_marginal(const NigModel& model, int i);

/// Law of X at time model.time() * t.
NigModel levy_at_time(const NigModel& model, double t);

struct Moments {
  Vec mean;
  Mat covariance;
  Mat correlation() const;
};

/// Mean and covariance from central differences of log M at 0 with
/// Richardson extrapolation.
Moments moments(const MgfModel& model);

}  // namespace fcop
