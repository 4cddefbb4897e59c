#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fcop/marginals.hpp"
#include "fcop/models.hpp"
#include "fcop/quadrature.hpp"

namespace fcop {

struct CopulaOptions {
  QuadratureSpec cdf_spec = default_cdf_spec();
  QuadratureSpec pdf_spec = default_pdf_spec();
  double tol_u = kDefaultTolU;
  double u_min = kDefaultUMin;
  /// Smallest marginal density accepted in the density quotient.
  double density_floor = 1e-12;
};

/// One copula or copula-density value with its diagnostics.
struct PointEvaluation {
  double value = 0.0;
  /// Before clamping into the theoretical range.
  double raw = 0.0;
  double imaginary_residual = 0.0;
  int refinement_depth = 0;
  bool converged = true;
  /// Set analytically from the uniform-margin boundary conditions.
  bool boundary = false;
  /// Some u_i was moved into [u_min, 1 - u_min].
  bool u_clamped = false;
  /// The raw value was outside [0, 1] (copula) or negative (density).
  bool value_clamped = false;
};

/// Read-mostly map of marginal quantiles keyed by (model hash, axis, u, tol_u).
/// Concurrent duplicate computation is allowed; the first insert wins.
class QuantileCache {
 public:
  using Key = std::tuple<std::size_t, int, double, double>;

  std::optional<QuantileEntry> find(const Key& key) const;
  QuantileEntry insert(const Key& key, const QuantileEntry& entry);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<Key, QuantileEntry> entries_;
};

enum class SurfaceKernel { copula, density };

struct GridSpec {
  /// Per-axis sorted u values in [0, 1].
  std::vector<std::vector<double>> axes;
  SurfaceKernel kernel = SurfaceKernel::copula;
  /// Defaults to default_damping(model).
  std::optional<Vec> damping;
  std::optional<CopulaOptions> options;
  /// Throw when the surface breaks an invariant beyond its slack.
  bool strict = true;

  /// M + 1 points k/M per axis for the copula kernel; the interior points
  /// k/M, 0 < k < M, for the density kernel.
  static GridSpec equispaced(int dimension, int m, SurfaceKernel kernel = SurfaceKernel::copula);

  void validate(int dimension, double u_min) const;
};

struct SurfaceDiagnostics {
  double max_imaginary_residual = 0.0;
  std::size_t clamp_count = 0;
  std::size_t floor_count = 0;
  int max_refinement_depth = 0;
  std::size_t unconverged_count = 0;
  std::vector<std::string> invariant_violations;
};

struct SurfaceMetadata {
  std::string model;
  std::vector<double> damping;
  std::vector<double> half_widths;
  std::vector<int> base_panels;
  double tolerance = 0.0;
  std::string timestamp;
};

/// Values on the tensor grid, row-major with axis 0 slowest (lexicographic
/// in (u1, ..., un)).
struct CopulaSurface {
  std::vector<std::vector<double>> axes;
  SurfaceKernel kernel = SurfaceKernel::copula;
  std::vector<double> values;
  std::vector<double> raw;
  std::vector<double> imaginary_residual;
  std::vector<int> refinement_depth;
  SurfaceDiagnostics diagnostics;
  SurfaceMetadata metadata;

  std::size_t size() const { return values.size(); }
  std::size_t flat_index(std::span<const std::size_t> idx) const;
  double at(std::size_t i, std::size_t j) const;
};

/// Copula and copula density of one model at one damping vector, with the
/// marginal engines, inverters and quantile cache shared across calls.
class CopulaEngine {
 public:
  explicit CopulaEngine(ModelPtr model, std::optional<DampingVector> r = std::nullopt,
                        CopulaOptions options = {});
  ~CopulaEngine();

  /// C(u): analytic on the boundary, clamp(F(F_1^{-1}(u_1), ...)) inside.
  PointEvaluation value(std::span<const double> u) const;

  /// c(u) = f(x) / prod f_i(x_i) at x_i = F_i^{-1}(u_i), floored at 0.
  PointEvaluation density(std::span<const double> u) const;

  QuantileEntry quantile(int axis, double u) const;

  CopulaSurface grid(const GridSpec& grid) const;

  const MarginalEngine& marginal(int axis) const { return *marginals_.at(axis); }
  const FourierInverter& cdf_inverter() const { return *cdf_; }
  const FourierInverter& pdf_inverter() const;
  const DampingVector& damping() const { return r_; }
  const CopulaOptions& options() const { return options_; }
  const ModelPtr& model() const { return model_; }
  const QuantileCache& quantile_cache() const { return cache_; }

 private:
  ModelPtr model_;
  DampingVector r_;
  CopulaOptions options_;
  std::size_t model_hash_;
  std::vector<std::unique_ptr<MarginalEngine>> marginals_;
  std::unique_ptr<FourierInverter> cdf_;
  mutable std::once_flag pdf_once_;
  mutable std::unique_ptr<FourierInverter> pdf_;
  mutable QuantileCache cache_;
};

double copula_value(const ModelPtr& model, std::span<const double> u, const DampingVector& r,
                    const QuadratureSpec& spec);
double copula_density(const ModelPtr& model, std::span<const double> u, const DampingVector& r,
                      const QuadratureSpec& spec);
CopulaSurface copula_grid(const ModelPtr& model, const GridSpec& grid);

/// Boundary, Frechet bounds (2 tau), axis monotonicity (2 tau) and, for
/// n = 2, the rectangle inequality (4 tau) on the raw values of a copula
/// surface. Returns one message per violated node.
std::vector<std::string> check_copula_invariants(const CopulaSurface& surface, double tau);

}  // namespace fcop
