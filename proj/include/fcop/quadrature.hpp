#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "fcop/models.hpp"

namespace fcop {

enum class Rule { gauss_legendre, midpoint };

/// cdf: integrand M(R+iv) e^{-<R+iv,x>} / prod(R_i + i v_i), scaled by 1/(-2pi)^n.
/// pdf: integrand M(R+iv) e^{-<R+iv,x>}, scaled by 1/(2pi)^n.
enum class KernelKind { cdf, pdf };

struct QuadratureSpec {
  /// Per-axis truncation half-widths; empty selects auto_truncation.
  std::vector<double> half_widths;
  /// Minimum nodes per axis at depth 0.
  int nodes = 64;
  Rule rule = Rule::gauss_legendre;
  /// Successive-refinement tolerance tau_q.
  double tolerance = 1e-7;
  /// Envelope threshold tau_t used by auto_truncation.
  double truncation_tolerance = 1e-9;
  int max_depth = 5;
  /// Sum only v_1 >= 0 and take twice the real part.
  bool conjugate_halving = false;

  /// Throws DomainError on N < 8, tau_q <= 0, tau_t <= 0, L_i <= 0 or a
  /// wrong number of half-widths.
  void validate(int dimension) const;
};

struct IntegralResult {
  double value = 0.0;
  /// |Im| of the scaled complex quadrature sum.
  double imaginary_residual = 0.0;
  int refinement_depth = 0;
  /// Largest integrand envelope on the truncation boundary.
  double tail_estimate = 0.0;
  /// |value(depth) - value(depth - 1)|.
  double achieved_difference = std::numeric_limits<double>::infinity();
  bool converged = false;
};

/// One-dimensional rule on [-L, L]: `panels` equal panels, 16 nodes each.
struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kPanelOrder = 16;

AxisRule composite_rule(Rule rule, double half_width, int panels);

/// 1/(-2pi)^n for the cdf kernel (the (-1)^n of the indicator transform
/// folded into the 1/(2pi)^n inversion constant), 1/(2pi)^n for the pdf.
double kernel_prefactor(KernelKind kernel, int dimension);

/// |M(R+iv)| * w(v) with w = 1/prod|R_i + i v_i| (cdf) or
/// max(1, 1/prod|R_i + i v_i|) (pdf, so it dominates the cdf envelope).
double integrand_envelope(const MgfModel& model, const DampingVector& r, KernelKind kernel,
                          std::span<const double> v);

/// Per-axis half-widths: doubling from 8 until the envelope on the face
/// v_i = L_i, maximised over off-axis probes, drops below tau_t. Throws
/// TruncationError beyond kMaxHalfWidth.
std::vector<double> auto_truncation(const MgfModel& model, const DampingVector& r, double tau_t,
                                    KernelKind kernel);

inline constexpr double kMaxHalfWidth = 16384.0;
/// Levels with more tensor nodes than this are not evaluated.
inline constexpr std::size_t kMaxLevelNodes = std::size_t{1} << 27;
/// Levels up to this size keep the x-independent kernel values in memory.
inline constexpr std::size_t kMaxTabulatedNodes = std::size_t{1} << 23;

/// Damped Fourier inversion prepared for one (model, R, kernel, spec).
///
/// The x-independent factor of the integrand is tabulated per refinement
/// level on first use; evaluating at a new x then costs one complex
/// multiply-add per node. Safe to share between threads.
class FourierInverter {
 public:
  FourierInverter(ModelPtr model, DampingVector r, KernelKind kernel, QuadratureSpec spec);
  ~FourierInverter();
  FourierInverter(const FourierInverter&) = delete;
  FourierInverter& operator=(const FourierInverter&) = delete;

  /// Refines (doubling the panel count) until two successive levels differ
  /// by less than tau_q or the depth/node budget runs out.
  IntegralResult evaluate(std::span<const double> x) const;

  struct LevelValue {
    double value;
    double imaginary_residual;
  };
  /// Single level, no refinement.
  LevelValue evaluate_level(std::span<const double> x, int level) const;

  /// Builds the kernel tables of levels [0, levels) up front.
  void prepare(int levels) const;

  std::vector<AxisRule> axes(int level) const;
  std::size_t nodes_at_level(int level) const;
  const std::vector<double>& half_widths() const { return half_widths_; }
  const std::vector<int>& base_panels() const { return panels_; }
  double tail_estimate() const { return tail_estimate_; }
  const QuadratureSpec& spec() const { return spec_; }
  const DampingVector& damping() const { return r_; }
  const MgfModel& model() const { return *model_; }
  KernelKind kernel() const { return kernel_; }

 private:
  struct Level;
  const Level& level(int l) const;
  void tabulate(Level& lv) const;
  Complex kernel_value(std::span<const Complex> z) const;
  LevelValue assemble(Complex sum, std::span<const double> x) const;

  ModelPtr model_;
  DampingVector r_;
  KernelKind kernel_;
  QuadratureSpec spec_;
  int n_;
  std::vector<double> half_widths_;
  std::vector<int> panels_;
  double tail_estimate_ = 0.0;
  double prefactor_;
  mutable std::vector<std::unique_ptr<Level>> levels_;
};

IntegralResult invert_cdf_nd(const ModelPtr& model, std::span<const double> x, const DampingVector& r,
                             const QuadratureSpec& spec);
IntegralResult invert_pdf_nd(const ModelPtr& model, std::span<const double> x, const DampingVector& r,
                             const QuadratureSpec& spec);

namespace reference {

/// Serial nested-loop sum of the full integrand, including
/// e^{-<R+iv,x>}, over the tensor product of `axes`. No tabulation, no
/// separable phases, no threading. Kept as the check for FourierInverter.
FourierInverter::LevelValue integrate(const MgfModel& model, const DampingVector& r, KernelKind kernel,
                                      std::span<const AxisRule> axes, std::span<const double> x);

}  // namespace reference

}  // namespace fcop
