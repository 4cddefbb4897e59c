#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "fcop/models.hpp"
#include "fcop/quadrature.hpp"

namespace fcop {

inline constexpr double kDefaultUMin = 1e-4;
inline constexpr double kDefaultTolU = 1e-6;

struct QuantileEntry {
  double u;
  double x;
  /// |F_i(x) - u| at the returned x.
  double achieved_tolerance;
};

/// Quantiles of one axis, sorted by u with x strictly increasing.
struct QuantileTable {
  int axis = 0;
  std::vector<QuantileEntry> entries;
};

/// Default specs for the marginal inversions: the cdf/pdf kernels at
/// tau_q = 1e-7 / 1e-6.
QuadratureSpec default_cdf_spec();
QuadratureSpec default_pdf_spec();

/// CDF, PDF and quantiles of coordinate `axis` of a joint model, computed by
/// one-dimensional Fourier inversion of the marginal MGF.
class MarginalEngine {
 public:
  /// Uses `damping` when it is feasible for the marginal law, otherwise the
  /// marginal's default damping.
  MarginalEngine(const ModelPtr& joint, int axis, double damping, QuadratureSpec cdf_spec = default_cdf_spec(),
                 QuadratureSpec pdf_spec = default_pdf_spec(), double u_min = kDefaultUMin);

  IntegralResult cdf_raw(double x) const;
  /// cdf_raw clamped into [0, 1].
  double cdf(double x) const;

  IntegralResult pdf_raw(double x) const;
  /// pdf_raw floored at 0; each floor is counted.
  double pdf(double x) const;

  /// Bisection after geometric bracket expansion from mean +- 6 sd.
  /// Throws QuantileBandError outside [u_min, 1 - u_min], BracketError if
  /// no bracket is found within 60 doublings.
  QuantileEntry quantile(double u, double tol_u = kDefaultTolU) const;

  QuantileTable quantile_table(std::span<const double> u, double tol_u = kDefaultTolU) const;

  const MgfModel& model() const { return *marginal_; }
  const ModelPtr& model_ptr() const { return marginal_; }
  int axis() const { return axis_; }
  double damping() const { return r_[0]; }
  double mean() const { return mean_; }
  double sd() const { return sd_; }
  double u_min() const { return u_min_; }
  std::size_t floor_count() const { return floors_.load(); }

 private:
  const FourierInverter& pdf_inverter() const;

  ModelPtr marginal_;
  int axis_;
  DampingVector r_;
  QuadratureSpec pdf_spec_;
  double u_min_;
  double mean_ = 0.0;
  double sd_ = 1.0;
  std::unique_ptr<FourierInverter> cdf_;
  mutable std::once_flag pdf_once_;
  mutable std::unique_ptr<FourierInverter> pdf_;
  mutable std::atomic<std::size_t> floors_{0};
};

/// F_i(x); R_i must be feasible for the i-th marginal.
double marginal_cdf(const ModelPtr& model, int i, double x, double r_i, const QuadratureSpec& spec);

/// f_i(x) floored at 0; R_i must be feasible for the i-th marginal.
double marginal_pdf(const ModelPtr& model, int i, double x, double r_i, const QuadratureSpec& spec);

/// F_i^{-1}(u) with the marginal's default damping and default specs.
double marginal_quantile(const ModelPtr& model, int i, double u, double tol_u = kDefaultTolU,
                         double u_min = kDefaultUMin);

}  // namespace fcop
