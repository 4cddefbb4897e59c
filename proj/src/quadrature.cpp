#include "fcop/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "fcop/errors.hpp"
#include "fcop/gauss_legendre.hpp"

namespace fcop {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLogMax = 709.0;
// Parallelise a level only when it is worth a fork/join.
constexpr std::size_t kParallelThreshold = 1 << 14;

bool may_fork(std::size_t work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}

// a += b * c without the NaN-recovery path of operator*.
inline void mul_add(Complex& a, const Complex& b, const Complex& c) {
  a = Complex(a.real() + b.real() * c.real() - b.imag() * c.imag(),
              a.imag() + b.real() * c.imag() + b.imag() * c.real());
}

inline Complex mul(const Complex& b, const Complex& c) {
  return Complex(b.real() * c.real() - b.imag() * c.imag(), b.real() * c.imag() + b.imag() * c.real());
}

// Second derivative of the cumulant along e_i at R, read off the decay of
// |M(R + i eps e_i)|; sets the panel width near the origin.
double curvature(const MgfModel& model, const DampingVector& r, int i) {
  const int n = model.dimension();
  std::vector<Complex> z(n);
  for (int k = 0; k < n; ++k) z[k] = r[k];
  const double k0 = model.log_mgf(z).real();
  constexpr double eps = 1e-3;
  z[i] += Complex(0.0, eps);
  const double k1 = model.log_mgf(z).real();
  return std::max(2.0 * (k0 - k1) / (eps * eps), 1e-300);
}

}  // namespace

void QuadratureSpec::validate(int dimension) const {
  if (nodes < 8) throw DomainError(fmt::format("quadrature: N >= 8 violated ({})", nodes));
  if (!(tolerance > 0.0)) throw DomainError("quadrature: tau_q > 0 violated");
  if (!(truncation_tolerance > 0.0)) throw DomainError("quadrature: tau_t > 0 violated");
  if (max_depth < 1) throw DomainError("quadrature: max depth >= 1 violated");
  if (!half_widths.empty()) {
    if (static_cast<int>(half_widths.size()) != dimension) {
      throw DomainError(fmt::format("quadrature: {} half-widths for dimension {}", half_widths.size(),
                                    dimension));
    }
    for (std::size_t i = 0; i < half_widths.size(); ++i) {
      if (!(half_widths[i] > 0.0) || !std::isfinite(half_widths[i])) {
        throw DomainError(fmt::format("quadrature: L[{}] > 0 violated", i));
      }
    }
  }
}

AxisRule composite_rule(Rule rule, double half_width, int panels) {
  AxisRule out;
  const std::size_t total = static_cast<std::size_t>(panels) * kPanelOrder;
  out.nodes.reserve(total);
  out.weights.reserve(total);
  const double h = 2.0 * half_width / panels;
  if (rule == Rule::midpoint) {
    const double dh = h / kPanelOrder;
    for (std::size_t k = 0; k < total; ++k) {
      out.nodes.push_back(-half_width + (static_cast<double>(k) + 0.5) * dh);
      out.weights.push_back(dh);
    }
  } else {
    static const GaussRule gl = gauss_legendre(kPanelOrder);
    for (int p = 0; p < panels; ++p) {
      const double centre = -half_width + (p + 0.5) * h;
      for (int k = 0; k < kPanelOrder; ++k) {
        out.nodes.push_back(centre + 0.5 * h * gl.nodes[k]);
        out.weights.push_back(0.5 * h * gl.weights[k]);
      }
    }
  }
  // Mirror about 0 so the node set is exactly symmetric.
  const std::size_t m = out.nodes.size();
  for (std::size_t k = 0; k < m / 2; ++k) {
    out.nodes[m - 1 - k] = -out.nodes[k];
    out.weights[m - 1 - k] = out.weights[k];
  }
  return out;
}

double kernel_prefactor(KernelKind kernel, int dimension) {
  const double base = std::pow(kTwoPi, -dimension);
  return (kernel == KernelKind::cdf && dimension % 2 == 1) ? -base : base;
}

double integrand_envelope(const MgfModel& model, const DampingVector& r, KernelKind kernel,
                          std::span<const double> v) {
  const int n = model.dimension();
  std::vector<Complex> z(n);
  double w = 1.0;
  for (int i = 0; i < n; ++i) {
    z[i] = Complex(r[i], v[i]);
    w /= std::abs(z[i]);
  }
  const double mag = std::exp(model.log_mgf(z).real());
  return kernel == KernelKind::cdf ? mag * w : mag * std::max(1.0, w);
}

std::vector<double> auto_truncation(const MgfModel& model, const DampingVector& r, double tau_t,
                                    KernelKind kernel) {
  if (!(tau_t > 0.0)) throw DomainError("auto_truncation: tau_t > 0 violated");
  const int n = model.dimension();
  static constexpr double kProbe[] = {0.0, 0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 1.0, -1.0};
  constexpr int kProbes = 9;

  std::vector<double> out(n);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    double half = 8.0;
    double env = 0.0;
    for (;;) {
      env = 0.0;
      std::size_t combos = 1;
      for (int k = 0; k < n - 1; ++k) combos *= kProbes;
      for (std::size_t c = 0; c < combos; ++c) {
        std::size_t rest = c;
        for (int k = 0; k < n; ++k) {
          if (k == i) {
            v[k] = half;
            continue;
          }
          v[k] = kProbe[rest % kProbes] * half;
          rest /= kProbes;
        }
        env = std::max(env, integrand_envelope(model, r, kernel, v));
      }
      if (env < tau_t) break;
      if (half * 2.0 > kMaxHalfWidth) {
        throw TruncationError(
            fmt::format("auto_truncation: envelope {:.3g} still above tau_t={:.3g} on axis {} at L={}",
                        env, tau_t, i, half),
            env);
      }
      half *= 2.0;
    }
    out[i] = half;
  }
  return out;
}

// ---------------------------------------------------------------- inverter

struct FourierInverter::Level {
  std::vector<AxisRule> axes;
  std::vector<std::size_t> strides;
  std::size_t total = 0;
  bool tabulated = false;
  std::vector<Complex> table;
  std::once_flag once;
};

FourierInverter::FourierInverter(ModelPtr model, DampingVector r, KernelKind kernel, QuadratureSpec spec)
    : model_(std::move(model)),
      r_(std::move(r)),
      kernel_(kernel),
      spec_(std::move(spec)),
      n_(model_->dimension()),
      prefactor_(kernel_prefactor(kernel, n_)) {
  if (r_.size() != n_) throw DomainError("FourierInverter: damping dimension mismatch");
  if (!feasible(*model_, r_.values())) throw DomainError("FourierInverter: damping vector infeasible");
  spec_.validate(n_);

  if (spec_.half_widths.empty()) {
    half_widths_ = auto_truncation(*model_, r_, spec_.truncation_tolerance, kernel_);
    if (kernel_ == KernelKind::pdf) {
      // The pdf box must contain the cdf box for the same tolerance.
      const auto cdf = auto_truncation(*model_, r_, spec_.truncation_tolerance, KernelKind::cdf);
      for (int i = 0; i < n_; ++i) half_widths_[i] = std::max(half_widths_[i], cdf[i]);
    }
  } else {
    half_widths_ = spec_.half_widths;
  }

  std::vector<double> v(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    v.assign(n_, 0.0);
    v[i] = half_widths_[i];
    tail_estimate_ = std::max(tail_estimate_, integrand_envelope(*model_, r_, kernel_, v));
  }

  panels_.resize(n_);
  const int from_nodes = (spec_.nodes + kPanelOrder - 1) / kPanelOrder;
  for (int i = 0; i < n_; ++i) {
    const double width = std::min(4.0 * std::abs(r_[i]), 4.0 / std::sqrt(curvature(*model_, r_, i)));
    int p = std::max(from_nodes, static_cast<int>(std::ceil(2.0 * half_widths_[i] / width)));
    p += p % 2;
    panels_[i] = std::max(p, 2);
  }
  levels_.resize(static_cast<std::size_t>(spec_.max_depth) + 1);
  for (auto& slot : levels_) slot = std::make_unique<Level>();
}

FourierInverter::~FourierInverter() = default;

std::vector<AxisRule> FourierInverter::axes(int level) const {
  std::vector<AxisRule> out;
  out.reserve(n_);
  for (int i = 0; i < n_; ++i) {
    out.push_back(composite_rule(spec_.rule, half_widths_[i], panels_[i] << level));
  }
  return out;
}

std::size_t FourierInverter::nodes_at_level(int level) const {
  std::size_t total = 1;
  for (int i = 0; i < n_; ++i) {
    total *= static_cast<std::size_t>(panels_[i] << level) * kPanelOrder;
    if (total > (std::size_t{1} << 62)) break;
  }
  return total;
}

Complex FourierInverter::kernel_value(std::span<const Complex> z) const {
  Complex value = std::exp(model_->log_mgf(z));
  if (kernel_ == KernelKind::cdf) {
    for (const Complex& zi : z) value /= zi;
  }
  return value;
}

const FourierInverter::Level& FourierInverter::level(int l) const {
  Level& lv = *levels_.at(static_cast<std::size_t>(l));
  std::call_once(lv.once, [&] {
    lv.axes = axes(l);
    lv.strides.assign(n_, 1);
    for (int i = n_ - 2; i >= 0; --i) lv.strides[i] = lv.strides[i + 1] * lv.axes[i + 1].nodes.size();
    lv.total = lv.strides[0] * lv.axes[0].nodes.size();
    if (lv.total <= kMaxTabulatedNodes) tabulate(lv);
  });
  return lv;
}

void FourierInverter::tabulate(Level& lv) const {
  lv.table.resize(lv.total);
  const std::size_t rows = lv.axes[0].nodes.size();
  const std::size_t row_len = lv.strides[0];
  bool bad = false;
#pragma omp parallel for schedule(static) if (may_fork(lv.total)) reduction(|| : bad)
  for (std::size_t j = 0; j < rows; ++j) {
    std::vector<Complex> z(n_);
    std::vector<std::size_t> idx(n_, 0);
    idx[0] = j;
    for (std::size_t k = 0; k < row_len; ++k) {
      std::size_t rest = k;
      for (int a = n_ - 1; a >= 1; --a) {
        const std::size_t len = lv.axes[a].nodes.size();
        idx[a] = rest % len;
        rest /= len;
      }
      for (int a = 0; a < n_; ++a) z[a] = Complex(r_[a], lv.axes[a].nodes[idx[a]]);
      const Complex kv = kernel_value(z);
      if (!std::isfinite(kv.real()) || !std::isfinite(kv.imag())) bad = true;
      lv.table[j * row_len + k] = kv;
    }
  }
  if (bad) throw NumericalError("FourierInverter: non-finite integrand value while tabulating");
  lv.tabulated = true;
}

void FourierInverter::prepare(int levels) const {
  for (int l = 0; l < std::min(levels, spec_.max_depth + 1); ++l) {
    if (nodes_at_level(l) > kMaxLevelNodes) break;
    (void)level(l);
  }
}

FourierInverter::LevelValue FourierInverter::assemble(Complex sum, std::span<const double> x) const {
  double rx = 0.0;
  for (int i = 0; i < n_; ++i) rx += r_[i] * x[i];
  const double re = prefactor_ * sum.real();
  const double im = std::abs(prefactor_ * sum.imag());
  if (std::abs(rx) <= 30.0) {
    const double scale = std::exp(-rx);
    return {re * scale, im * scale};
  }
  // exp(-<R,x>) folded in through logarithms.
  auto fold = [&](double a) {
    if (a == 0.0) return 0.0;
    const double l = std::log(std::abs(a)) - rx;
    if (l > kLogMax) {
      throw NumericalError(fmt::format("inversion overflow: log|value| = {:.4g} at <R,x> = {:.4g}", l, rx));
    }
    return std::copysign(std::exp(l), a);
  };
  return {fold(re), std::abs(fold(im))};
}

FourierInverter::LevelValue FourierInverter::evaluate_level(std::span<const double> x, int l) const {
  if (static_cast<int>(x.size()) != n_) throw DomainError("inversion: x dimension mismatch");
  for (double xi : x) {
    if (!std::isfinite(xi)) throw DomainError("inversion: x must be finite");
  }
  if (l < 0 || l > spec_.max_depth) throw DomainError("inversion: level out of range");
  if (nodes_at_level(l) > kMaxLevelNodes) throw NumericalError("inversion: level exceeds the node budget");
  const Level& lv = level(l);

  // Separable phases with the quadrature weights folded in.
  std::vector<std::vector<Complex>> phase(n_);
  for (int a = 0; a < n_; ++a) {
    const auto& ax = lv.axes[a];
    phase[a].resize(ax.nodes.size());
    for (std::size_t k = 0; k < ax.nodes.size(); ++k) {
      const double t = -ax.nodes[k] * x[a];
      phase[a][k] = Complex(ax.weights[k] * std::cos(t), ax.weights[k] * std::sin(t));
    }
  }

  const std::size_t rows = lv.axes[0].nodes.size();
  const std::size_t first = spec_.conjugate_halving ? rows / 2 : 0;
  std::vector<Complex> row_sum(rows, Complex(0.0));
  bool bad = false;

  // Row j holds sum over axes 1..n-1 of K(v) * prod_{a>=1} phase_a; each row
  // is summed serially, so the result does not depend on the thread count.
#pragma omp parallel for schedule(static) if (may_fork(lv.total)) reduction(|| : bad)
  for (std::size_t j = first; j < rows; ++j) {
    if (n_ == 1) {
      if (lv.tabulated) {
        row_sum[j] = lv.table[j];
      } else {
        const Complex z(r_[0], lv.axes[0].nodes[j]);
        row_sum[j] = kernel_value(std::span<const Complex>(&z, 1));
      }
      continue;
    }
    std::vector<std::size_t> idx(n_, 0);
    std::vector<Complex> z(n_);
    const std::size_t row_len = lv.strides[0];
    if (lv.tabulated && n_ == 2) {
      const Complex* block = lv.table.data() + j * row_len;
      const Complex* ph = phase[1].data();
      double sr = 0.0, si = 0.0;
      for (std::size_t k = 0; k < row_len; ++k) {
        sr += block[k].real() * ph[k].real() - block[k].imag() * ph[k].imag();
        si += block[k].real() * ph[k].imag() + block[k].imag() * ph[k].real();
      }
      row_sum[j] = Complex(sr, si);
      continue;
    }
    Complex acc(0.0);
    for (std::size_t k = 0; k < row_len; ++k) {
      std::size_t rest = k;
      Complex weight(1.0);
      for (int a = n_ - 1; a >= 1; --a) {
        const std::size_t len = lv.axes[a].nodes.size();
        idx[a] = rest % len;
        rest /= len;
        weight = mul(weight, phase[a][idx[a]]);
      }
      Complex kv;
      if (lv.tabulated) {
        kv = lv.table[j * row_len + k];
      } else {
        z[0] = Complex(r_[0], lv.axes[0].nodes[j]);
        for (int a = 1; a < n_; ++a) z[a] = Complex(r_[a], lv.axes[a].nodes[idx[a]]);
        kv = kernel_value(z);
        if (!std::isfinite(kv.real()) || !std::isfinite(kv.imag())) bad = true;
      }
      mul_add(acc, kv, weight);
    }
    row_sum[j] = acc;
  }
  if (bad) throw NumericalError("inversion: non-finite integrand value");

  Complex sum(0.0);
  for (std::size_t j = first; j < rows; ++j) mul_add(sum, row_sum[j], phase[0][j]);
  if (spec_.conjugate_halving) sum = Complex(2.0 * sum.real(), 0.0);
  return assemble(sum, x);
}

IntegralResult FourierInverter::evaluate(std::span<const double> x) const {
  IntegralResult out;
  out.tail_estimate = tail_estimate_;
  if (nodes_at_level(0) > kMaxLevelNodes) {
    throw NumericalError(fmt::format("inversion: {} tensor nodes at depth 0 exceed the budget of {}; raise tau_t",
                                     nodes_at_level(0), kMaxLevelNodes));
  }
  double previous = 0.0;
  for (int l = 0; l <= spec_.max_depth; ++l) {
    if (nodes_at_level(l) > kMaxLevelNodes) break;
    const LevelValue lv = evaluate_level(x, l);
    if (l > 0) {
      out.achieved_difference = std::abs(lv.value - previous);
    }
    out.value = lv.value;
    out.imaginary_residual = lv.imaginary_residual;
    out.refinement_depth = l;
    if (l > 0 && out.achieved_difference < spec_.tolerance) {
      out.converged = true;
      return out;
    }
    previous = lv.value;
  }
  return out;
}

IntegralResult invert_cdf_nd(const ModelPtr& model, std::span<const double> x, const DampingVector& r,
                             const QuadratureSpec& spec) {
  return FourierInverter(model, r, KernelKind::cdf, spec).evaluate(x);
}

IntegralResult invert_pdf_nd(const ModelPtr& model, std::span<const double> x, const DampingVector& r,
                             const QuadratureSpec& spec) {
  return FourierInverter(model, r, KernelKind::pdf, spec).evaluate(x);
}

}  // namespace fcop
