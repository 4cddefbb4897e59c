#include "fcop/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fcop/errors.hpp"

namespace fcop {
namespace {

DampingVector marginal_damping(const MgfModel& marginal, double r_i) {
  const Vec r = Vec::Constant(1, r_i);
  if (feasible(marginal, r)) return DampingVector::make(marginal, r);
  return default_damping(marginal);
}

}  // namespace

QuadratureSpec default_cdf_spec() {
  QuadratureSpec s;
  s.tolerance = 1e-7;
  return s;
}

QuadratureSpec default_pdf_spec() {
  QuadratureSpec s;
  s.tolerance = 1e-6;
  return s;
}

MarginalEngine::MarginalEngine(const ModelPtr& joint, int axis, double damping, QuadratureSpec cdf_spec,
                               QuadratureSpec pdf_spec, double u_min)
    : marginal_(joint->marginal(axis)),
      axis_(axis),
      r_(marginal_damping(*marginal_, damping)),
      pdf_spec_(std::move(pdf_spec)),
      u_min_(u_min) {
  if (!(u_min_ > 0.0 && u_min_ < 0.5)) throw DomainError("u_min must lie in (0, 0.5)");
  // Half-widths are chosen per marginal, never inherited from a joint box.
  cdf_spec.half_widths.clear();
  pdf_spec_.half_widths.clear();
  cdf_ = std::make_unique<FourierInverter>(marginal_, r_, KernelKind::cdf, std::move(cdf_spec));
  const Moments m = moments(*marginal_);
  mean_ = m.mean[0];
  sd_ = std::sqrt(m.covariance(0, 0));
  if (!std::isfinite(mean_) || !(sd_ > 0.0) || !std::isfinite(sd_)) {
    throw NumericalError(fmt::format("marginal {}: non-finite moments", axis));
  }
}

const FourierInverter& MarginalEngine::pdf_inverter() const {
  std::call_once(pdf_once_, [&] {
    pdf_ = std::make_unique<FourierInverter>(marginal_, r_, KernelKind::pdf, pdf_spec_);
  });
  return *pdf_;
}

IntegralResult MarginalEngine::cdf_raw(double x) const { return cdf_->evaluate(std::span<const double>(&x, 1)); }

double MarginalEngine::cdf(double x) const { return std::clamp(cdf_raw(x).value, 0.0, 1.0); }

IntegralResult MarginalEngine::pdf_raw(double x) const {
  return pdf_inverter().evaluate(std::span<const double>(&x, 1));
}

double MarginalEngine::pdf(double x) const {
  const double v = pdf_raw(x).value;
  if (v < 0.0) {
    floors_.fetch_add(1);
    return 0.0;
  }
  return v;
}

QuantileEntry MarginalEngine::quantile(double u, double tol_u) const {
  if (!(u >= u_min_ && u <= 1.0 - u_min_)) {
    throw QuantileBandError(fmt::format(
        "quantile: u = {:.17g} outside [{:g}, 1 - {:g}]; use the analytic boundary values", u, u_min_, u_min_));
  }
  if (!(tol_u > 0.0)) throw DomainError("quantile: tol_u > 0 violated");
  const double target = 1e-3 * tol_u;

  double lo = mean_ - 6.0 * sd_;
  double hi = mean_ + 6.0 * sd_;
  double f_lo = cdf_raw(lo).value;
  double f_hi = cdf_raw(hi).value;
  for (int k = 0; f_lo > u; ++k) {
    if (k == 60) throw BracketError(fmt::format("quantile: no lower bracket for u = {:.17g}", u));
    lo = mean_ - 2.0 * (mean_ - lo);
    f_lo = cdf_raw(lo).value;
  }
  for (int k = 0; f_hi < u; ++k) {
    if (k == 60) throw BracketError(fmt::format("quantile: no upper bracket for u = {:.17g}", u));
    hi = mean_ + 2.0 * (hi - mean_);
    f_hi = cdf_raw(hi).value;
  }

  double best_x = 0.5 * (lo + hi);
  double best_err = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f = cdf_raw(mid).value;
    const double err = std::abs(f - u);
    if (err < best_err) {
      best_err = err;
      best_x = mid;
    }
    if (err <= target) break;
    if (f < u) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  return QuantileEntry{u, best_x, best_err};
}

QuantileTable MarginalEngine::quantile_table(std::span<const double> u, double tol_u) const {
  QuantileTable table;
  table.axis = axis_;
  std::vector<double> sorted(u.begin(), u.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  table.entries.reserve(sorted.size());
  for (double ui : sorted) {
    table.entries.push_back(quantile(ui, tol_u));
    const auto n = table.entries.size();
    if (n > 1 && !(table.entries[n - 1].x > table.entries[n - 2].x)) {
      throw NumericalError(fmt::format("quantile table axis {}: x not strictly increasing at u = {:.17g}",
                                       axis_, ui));
    }
  }
  return table;
}

double marginal_cdf(const ModelPtr& model, int i, double x, double r_i, const QuadratureSpec& spec) {
  const ModelPtr marginal = model->marginal(i);
  QuadratureSpec s = spec;
  if (s.half_widths.size() != 1) s.half_widths.clear();
  FourierInverter inv(marginal, DampingVector::make(*marginal, Vec::Constant(1, r_i)), KernelKind::cdf, s);
  return std::clamp(inv.evaluate(std::span<const double>(&x, 1)).value, 0.0, 1.0);
}

double marginal_pdf(const ModelPtr& model, int i, double x, double r_i, const QuadratureSpec& spec) {
  const ModelPtr marginal = model->marginal(i);
  QuadratureSpec s = spec;
  if (s.half_widths.size() != 1) s.half_widths.clear();
  FourierInverter inv(marginal, DampingVector::make(*marginal, Vec::Constant(1, r_i)), KernelKind::pdf, s);
  return std::max(0.0, inv.evaluate(std::span<const double>(&x, 1)).value);
}

double marginal_quantile(const ModelPtr& model, int i, double u, double tol_u, double u_min) {
  const ModelPtr marginal = model->marginal(i);
  const DampingVector r = default_damping(*marginal);
  MarginalEngine engine(model, i, r[0], default_cdf_spec(), default_pdf_spec(), u_min);
  return engine.quantile(u, tol_u).x;
}

}  // namespace fcop
