#include "fcop/copula.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <omp.h>

#include "fcop/errors.hpp"

namespace fcop {
namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Analytic value on the boundary of the cube, or nullopt for interior nodes.
// Coordinates equal to 1 that do not reduce C to a single margin are moved
// into the band along with those in (0, u_min).
struct Placement {
  std::optional<double> analytic;
  std::vector<double> u;
  bool clamped = false;
};

Placement place(std::span<const double> u, double u_min) {
  Placement p;
  const int n = static_cast<int>(u.size());
  int ones = 0;
  int free_axis = -1;
  for (int i = 0; i < n; ++i) {
    if (!(u[i] >= 0.0 && u[i] <= 1.0)) {
      throw DomainError(fmt::format("copula: u[{}] = {:.17g} outside [0, 1]", i, u[i]));
    }
    if (u[i] == 0.0) {
      p.analytic = 0.0;
      return p;
    }
    if (u[i] == 1.0) {
      ++ones;
    } else {
      free_axis = i;
    }
  }
  if (ones == n) {
    p.analytic = 1.0;
    return p;
  }
  if (ones == n - 1) {
    p.analytic = u[free_axis];
    return p;
  }
  p.u.assign(u.begin(), u.end());
  for (double& ui : p.u) {
    const double c = std::clamp(ui, u_min, 1.0 - u_min);
    if (c != ui) p.clamped = true;
    ui = c;
  }
  return p;
}

void require_band(std::span<const double> u, double u_min) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= u_min && u[i] <= 1.0 - u_min)) {
      throw QuantileBandError(
          fmt::format("density: u[{}] = {:.17g} outside [{:g}, 1 - {:g}]", i, u[i], u_min, u_min));
    }
  }
}

// Runs body(k) for k in [0, count) on the OpenMP team; the first exception
// is rethrown after the loop.
template <class F>
void parallel_for(std::size_t count, F&& body) {
  std::exception_ptr error;
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(fcop_parallel_for_error)
      {
        if (!error) error = std::current_exception();
      }
      failed.store(true);
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::optional<QuantileEntry> QuantileCache::find(const Key& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

QuantileEntry QuantileCache::insert(const Key& key, const QuantileEntry& entry) {
  std::unique_lock lock(mutex_);
  return entries_.emplace(key, entry).first->second;
}

std::size_t QuantileCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

GridSpec GridSpec::equispaced(int dimension, int m, SurfaceKernel kernel) {
  if (dimension < 1) throw DomainError("grid: dimension >= 1 violated");
  if (m < 2 || m > 2048) throw DomainError(fmt::format("grid: M = {} outside [2, 2048]", m));
  std::vector<double> axis;
  if (kernel == SurfaceKernel::copula) {
    for (int k = 0; k <= m; ++k) axis.push_back(static_cast<double>(k) / m);
  } else {
    for (int k = 1; k < m; ++k) axis.push_back(static_cast<double>(k) / m);
  }
  GridSpec g;
  g.axes.assign(dimension, axis);
  g.kernel = kernel;
  return g;
}

void GridSpec::validate(int dimension, double u_min) const {
  if (static_cast<int>(axes.size()) != dimension) {
    throw DomainError(fmt::format("grid: {} axes for a {}-dimensional model", axes.size(), dimension));
  }
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const auto& a = axes[i];
    if (a.empty()) throw DomainError(fmt::format("grid: axis {} is empty", i));
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!(a[k] >= 0.0 && a[k] <= 1.0)) {
        throw DomainError(fmt::format("grid: axis {} value {:.17g} outside [0, 1]", i, a[k]));
      }
      if (k > 0 && !(a[k] > a[k - 1])) {
        throw DomainError(fmt::format("grid: axis {} not strictly increasing at index {}", i, k));
      }
      if (kernel == SurfaceKernel::density && !(a[k] >= u_min && a[k] <= 1.0 - u_min)) {
        throw QuantileBandError(fmt::format(
            "grid: density axis {} value {:.17g} outside [{:g}, 1 - {:g}]", i, a[k], u_min, u_min));
      }
    }
  }
  if (damping && damping->size() != dimension) throw DomainError("grid: damping has the wrong dimension");
}

std::size_t CopulaSurface::flat_index(std::span<const std::size_t> idx) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < axes.size(); ++i) flat = flat * axes[i].size() + idx[i];
  return flat;
}

double CopulaSurface::at(std::size_t i, std::size_t j) const {
  const std::size_t idx[2] = {i, j};
  return values.at(flat_index(idx));
}

CopulaEngine::CopulaEngine(ModelPtr model, std::optional<DampingVector> r, CopulaOptions options)
    : model_(std::move(model)),
      r_(r ? *r : default_damping(*model_)),
      options_(std::move(options)),
      model_hash_(std::hash<std::string>{}(model_->fingerprint())) {
  const int n = model_->dimension();
  if (r_.size() != n) throw DomainError("copula: damping vector has the wrong dimension");
  if (!feasible(*model_, r_.values())) throw DomainError("copula: damping vector not feasible for the model");
  if (!(options_.tol_u > 0.0)) throw DomainError("copula: tol_u > 0 violated");
  options_.cdf_spec.validate(n);
  options_.pdf_spec.validate(n);
  for (int i = 0; i < n; ++i) {
    QuadratureSpec cs = options_.cdf_spec;
    QuadratureSpec ps = options_.pdf_spec;
    cs.half_widths.clear();
    ps.half_widths.clear();
    marginals_.push_back(std::make_unique<MarginalEngine>(model_, i, r_[i], cs, ps, options_.u_min));
  }
  cdf_ = std::make_unique<FourierInverter>(model_, r_, KernelKind::cdf, options_.cdf_spec);
}

CopulaEngine::~CopulaEngine() = default;

const FourierInverter& CopulaEngine::pdf_inverter() const {
  std::call_once(pdf_once_, [&] {
    pdf_ = std::make_unique<FourierInverter>(model_, r_, KernelKind::pdf, options_.pdf_spec);
  });
  return *pdf_;
}

QuantileEntry CopulaEngine::quantile(int axis, double u) const {
  const QuantileCache::Key key{model_hash_, axis, u, options_.tol_u};
  if (auto hit = cache_.find(key)) return *hit;
  return cache_.insert(key, marginals_.at(axis)->quantile(u, options_.tol_u));
}

PointEvaluation CopulaEngine::value(std::span<const double> u) const {
  const int n = model_->dimension();
  if (static_cast<int>(u.size()) != n) throw DomainError("copula: u has the wrong dimension");
  const Placement p = place(u, options_.u_min);
  PointEvaluation out;
  if (p.analytic) {
    out.value = out.raw = *p.analytic;
    out.boundary = true;
    return out;
  }
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = quantile(i, p.u[i]).x;
  const IntegralResult res = cdf_->evaluate(x);
  out.raw = res.value;
  out.value = std::clamp(res.value, 0.0, 1.0);
  out.value_clamped = out.value != out.raw;
  out.u_clamped = p.clamped;
  out.imaginary_residual = res.imaginary_residual;
  out.refinement_depth = res.refinement_depth;
  out.converged = res.converged;
  return out;
}

PointEvaluation CopulaEngine::density(std::span<const double> u) const {
  const int n = model_->dimension();
  if (static_cast<int>(u.size()) != n) throw DomainError("density: u has the wrong dimension");
  require_band(u, options_.u_min);
  std::vector<double> x(n);
  double denom = 1.0;
  for (int i = 0; i < n; ++i) {
    x[i] = quantile(i, u[i]).x;
    const double fi = marginals_[i]->pdf(x[i]);
    if (!(fi > options_.density_floor)) {
      throw VanishingDensityError(
          fmt::format("density: marginal {} density {:.3g} at x = {:.17g} is below the floor", i, fi, x[i]));
    }
    denom *= fi;
  }
  const IntegralResult res = pdf_inverter().evaluate(x);
  PointEvaluation out;
  out.raw = res.value / denom;
  out.value = std::max(0.0, out.raw);
  out.value_clamped = out.value != out.raw;
  out.imaginary_residual = res.imaginary_residual / denom;
  out.refinement_depth = res.refinement_depth;
  out.converged = res.converged;
  return out;
}

CopulaSurface CopulaEngine::grid(const GridSpec& spec) const {
  const int n = model_->dimension();
  spec.validate(n, options_.u_min);
  const bool is_density = spec.kernel == SurfaceKernel::density;

  CopulaSurface s;
  s.axes = spec.axes;
  s.kernel = spec.kernel;
  std::size_t total = 1;
  for (const auto& a : spec.axes) total *= a.size();
  s.values.assign(total, 0.0);
  s.raw.assign(total, 0.0);
  s.imaginary_residual.assign(total, 0.0);
  s.refinement_depth.assign(total, 0);

  // Phase 1: every interior quantile the grid needs, then the marginal
  // densities for the density kernel.
  std::vector<std::pair<int, double>> jobs;
  for (int i = 0; i < n; ++i) {
    for (double ui : spec.axes[i]) {
      const double c = std::clamp(ui, options_.u_min, 1.0 - options_.u_min);
      if (ui > 0.0 && ui < 1.0) jobs.emplace_back(i, c);
      else if (ui == 1.0 && n > 2) jobs.emplace_back(i, c);
    }
  }
  std::sort(jobs.begin(), jobs.end());
  jobs.erase(std::unique(jobs.begin(), jobs.end()), jobs.end());
  parallel_for(jobs.size(), [&](std::size_t k) { quantile(jobs[k].first, jobs[k].second); });

  std::vector<std::vector<double>> xq(n), fq(n);
  for (int i = 0; i < n; ++i) {
    for (double ui : spec.axes[i]) {
      const double c = std::clamp(ui, options_.u_min, 1.0 - options_.u_min);
      const bool needed = (ui > 0.0 && ui < 1.0) || (ui == 1.0 && n > 2);
      xq[i].push_back(needed ? quantile(i, c).x : std::numeric_limits<double>::quiet_NaN());
    }
    if (is_density) {
      fq[i].resize(xq[i].size());
      parallel_for(xq[i].size(), [&](std::size_t k) { fq[i][k] = marginals_[i]->pdf(xq[i][k]); });
      for (std::size_t k = 0; k < fq[i].size(); ++k) {
        if (!(fq[i][k] > options_.density_floor)) {
          throw VanishingDensityError(fmt::format("density grid: marginal {} density {:.3g} at u = {:.17g}", i,
                                                  fq[i][k], spec.axes[i][k]));
        }
      }
    }
  }

  const FourierInverter& inv = is_density ? pdf_inverter() : *cdf_;
  inv.prepare(2);

  // Phase 2: joint inversions over the tensor grid.
  std::atomic<std::size_t> clamps{0};
  std::atomic<std::size_t> floors{0};
  std::atomic<std::size_t> unconverged{0};
  parallel_for(total, [&](std::size_t flat) {
    std::vector<std::size_t> idx(n);
    std::size_t rem = flat;
    for (int i = n - 1; i >= 0; --i) {
      idx[i] = rem % spec.axes[i].size();
      rem /= spec.axes[i].size();
    }
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) u[i] = spec.axes[i][idx[i]];

    if (is_density) {
      std::vector<double> x(n);
      double denom = 1.0;
      for (int i = 0; i < n; ++i) {
        x[i] = xq[i][idx[i]];
        denom *= fq[i][idx[i]];
      }
      const IntegralResult r = inv.evaluate(x);
      s.raw[flat] = r.value / denom;
      s.values[flat] = std::max(0.0, s.raw[flat]);
      if (s.raw[flat] < 0.0) floors.fetch_add(1);
      s.imaginary_residual[flat] = r.imaginary_residual / denom;
      s.refinement_depth[flat] = r.refinement_depth;
      if (!r.converged) unconverged.fetch_add(1);
      return;
    }

    const Placement p = place(u, options_.u_min);
    if (p.analytic) {
      s.values[flat] = s.raw[flat] = *p.analytic;
      return;
    }
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = xq[i][idx[i]];
    const IntegralResult r = inv.evaluate(x);
    s.raw[flat] = r.value;
    s.values[flat] = std::clamp(r.value, 0.0, 1.0);
    if (s.values[flat] != s.raw[flat]) clamps.fetch_add(1);
    s.imaginary_residual[flat] = r.imaginary_residual;
    s.refinement_depth[flat] = r.refinement_depth;
    if (!r.converged) unconverged.fetch_add(1);
  });

  auto& d = s.diagnostics;
  d.clamp_count = clamps.load();
  d.floor_count = floors.load();
  d.unconverged_count = unconverged.load();
  for (std::size_t k = 0; k < total; ++k) {
    d.max_imaginary_residual = std::max(d.max_imaginary_residual, s.imaginary_residual[k]);
    d.max_refinement_depth = std::max(d.max_refinement_depth, s.refinement_depth[k]);
  }

  auto& m = s.metadata;
  m.model = model_->fingerprint();
  m.damping.assign(r_.values().data(), r_.values().data() + n);
  m.half_widths = inv.half_widths();
  m.base_panels = inv.base_panels();
  m.tolerance = inv.spec().tolerance;
  m.timestamp = utc_timestamp();

  if (!is_density) {
    d.invariant_violations = check_copula_invariants(s, options_.cdf_spec.tolerance);
    if (spec.strict && !d.invariant_violations.empty()) {
      throw NumericalError(fmt::format("copula grid: {} invariant violations, first: {}",
                                       d.invariant_violations.size(), d.invariant_violations.front()));
    }
  }
  return s;
}

double copula_value(const ModelPtr& model, std::span<const double> u, const DampingVector& r,
                    const QuadratureSpec& spec) {
  CopulaOptions o;
  o.cdf_spec = spec;
  return CopulaEngine(model, r, o).value(u).value;
}

double copula_density(const ModelPtr& model, std::span<const double> u, const DampingVector& r,
                      const QuadratureSpec& spec) {
  CopulaOptions o;
  o.pdf_spec = spec;
  return CopulaEngine(model, r, o).density(u).value;
}

CopulaSurface copula_grid(const ModelPtr& model, const GridSpec& grid) {
  std::optional<DampingVector> r;
  if (grid.damping) r = DampingVector::make(*model, *grid.damping);
  return CopulaEngine(model, r, grid.options.value_or(CopulaOptions{})).grid(grid);
}

std::vector<std::string> check_copula_invariants(const CopulaSurface& s, double tau) {
  std::vector<std::string> out;
  const std::size_t n = s.axes.size();
  const std::size_t total = s.raw.size();
  std::vector<std::size_t> idx(n, 0);
  auto label = [&](const std::vector<std::size_t>& id) {
    std::string t = "(";
    for (std::size_t i = 0; i < n; ++i) t += fmt::format("{}{:.6g}", i ? ", " : "", s.axes[i][id[i]]);
    return t + ")";
  };
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t i = n; i-- > 0;) {
      idx[i] = rem % s.axes[i].size();
      rem /= s.axes[i].size();
    }
    const double c = s.raw[flat];
    double lower = 1.0 - static_cast<double>(n);
    double upper = 1.0;
    bool zero = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = s.axes[i][idx[i]];
      lower += u;
      upper = std::min(upper, u);
      zero = zero || u == 0.0;
    }
    lower = std::max(lower, 0.0);
    if (zero && c != 0.0) out.push_back(fmt::format("boundary: C{} = {:.3g} != 0", label(idx), c));
    if (c < lower - 2.0 * tau || c > upper + 2.0 * tau) {
      out.push_back(fmt::format("frechet: C{} = {:.17g} outside [{:.6g}, {:.6g}]", label(idx), c, lower, upper));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (idx[i] == 0) continue;
      std::size_t prev = flat;
      std::size_t stride = 1;
      for (std::size_t j = n; j-- > i + 1;) stride *= s.axes[j].size();
      prev -= stride;
      if (c < s.raw[prev] - 2.0 * tau) {
        out.push_back(fmt::format("monotone: axis {} decreases by {:.3g} at {}", i, s.raw[prev] - c, label(idx)));
      }
    }
    if (n == 2 && idx[0] > 0 && idx[1] > 0) {
      const std::size_t m = s.axes[1].size();
      const double rect = c - s.raw[flat - 1] - s.raw[flat - m] + s.raw[flat - m - 1];
      if (rect < -4.0 * tau) {
        out.push_back(fmt::format("2-increasing: rectangle mass {:.3g} at {}", rect, label(idx)));
      }
    }
  }
  return out;
}

}  // namespace fcop
