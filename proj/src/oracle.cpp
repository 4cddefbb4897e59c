#include "fcop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <fmt/format.h>

#include "fcop/errors.hpp"

namespace fcop::oracle {
namespace {

constexpr std::int64_t kShardRows = 65536;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on (0, 1) from the top 53 bits.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

double inverse_gaussian(double mean, double shape, double normal, double uniform) {
  const double y = normal * normal;
  const double my = mean * y;
  const double x = mean + mean * my / (2.0 * shape) - (mean / (2.0 * shape)) * std::sqrt(4.0 * shape * my + my * my);
  return uniform <= mean / (mean + x) ? x : mean * mean / x;
}

SampleMatrix sample(const MgfModel& model, std::int64_t count, std::uint64_t seed) {
  if (count <= 0) throw DomainError("sample: count > 0 violated");
  const int n = model.dimension();

  // Per-family draw: one row from one stream.
  Vec shift;
  Mat factor;
  Vec drift;
  double ig_mean = 0.0;
  double ig_shape = 0.0;
  bool nig = false;
  if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) {
    shift = g->mean();
    factor = Eigen::LLT<Mat>(g->cov()).matrixL();
  } else if (const auto* m = dynamic_cast<const NigModel*>(&model)) {
    nig = true;
    const double t = m->time();
    shift = m->mu() * t;
    factor = Eigen::LLT<Mat>(m->shape()).matrixL();
    drift = m->shape() * m->beta();
    ig_mean = m->delta() * t / m->gamma();
    ig_shape = (m->delta() * t) * (m->delta() * t);
  } else {
    throw DomainError(fmt::format("sample: unsupported model family '{}'", model.family()));
  }

  SampleMatrix out;
  out.seed = seed;
  out.generator = kGeneratorId;
  out.draws.resize(count, n);
  const std::int64_t shards = (count + kShardRows - 1) / kShardRows;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t s = 0; s < shards; ++s) {
    Stream rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s))));
    Vec w(n);
    const std::int64_t end = std::min(count, (s + 1) * kShardRows);
    for (std::int64_t row = s * kShardRows; row < end; ++row) {
      for (int i = 0; i < n; ++i) w[i] = rng.normal();
      if (nig) {
        const double z = inverse_gaussian(ig_mean, ig_shape, rng.normal(), rng.uniform());
        out.draws.row(row) = (shift + z * drift + std::sqrt(z) * (factor * w)).transpose();
      } else {
        out.draws.row(row) = (shift + factor * w).transpose();
      }
    }
  }
  return out;
}

EmpiricalCopula::EmpiricalCopula(const SampleMatrix& samples)
    : m_(samples.rows()), n_(static_cast<int>(samples.cols())) {
  if (m_ < 2) throw DomainError("empirical_copula: at least 2 rows required");
  ranks_.assign(static_cast<std::size_t>(m_) * n_, 0.0);
  std::vector<std::int64_t> order(m_);
  for (int i = 0; i < n_; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::int64_t a, std::int64_t b) { return samples.draws(a, i) < samples.draws(b, i); });
    for (std::int64_t k = 0; k < m_;) {
      std::int64_t j = k;
      while (j + 1 < m_ && samples.draws(order[j + 1], i) == samples.draws(order[k], i)) ++j;
      // Ranks k+1..j+1 share their average.
      const double rank = 0.5 * static_cast<double>(k + j + 2) / static_cast<double>(m_);
      for (std::int64_t q = k; q <= j; ++q) ranks_[order[q] * n_ + i] = rank;
      k = j + 1;
    }
  }
}

double EmpiricalCopula::operator()(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != n_) throw DomainError("empirical_copula: u has the wrong dimension");
  std::int64_t hits = 0;
  for (std::int64_t r = 0; r < m_; ++r) {
    bool in = true;
    for (int i = 0; i < n_ && in; ++i) in = ranks_[r * n_ + i] <= u[i] + 1e-12;
    hits += in;
  }
  return static_cast<double>(hits) / static_cast<double>(m_);
}

std::vector<double> EmpiricalCopula::grid(const std::vector<std::vector<double>>& axes) const {
  if (static_cast<int>(axes.size()) != n_) throw DomainError("empirical_copula: wrong number of axes");
  // Histogram by the first grid index whose u covers the rank, then
  // cumulative sums along every axis.
  std::vector<std::size_t> sizes(n_);
  std::size_t total = 1;
  for (int i = 0; i < n_; ++i) {
    sizes[i] = axes[i].size();
    total *= sizes[i];
  }
  std::vector<double> counts(total, 0.0);
  for (std::int64_t r = 0; r < m_; ++r) {
    std::size_t flat = 0;
    bool in = true;
    for (int i = 0; i < n_ && in; ++i) {
      const auto& a = axes[i];
      const auto it = std::lower_bound(a.begin(), a.end(), ranks_[r * n_ + i] - 1e-12);
      if (it == a.end()) {
        in = false;
      } else {
        flat = flat * sizes[i] + static_cast<std::size_t>(it - a.begin());
      }
    }
    if (in) counts[flat] += 1.0;
  }
  std::size_t stride = 1;
  for (int i = n_ - 1; i >= 0; --i) {
    for (std::size_t k = 0; k < total; ++k) {
      if ((k / stride) % sizes[i] != 0) counts[k] += counts[k - stride];
    }
    stride *= sizes[i];
  }
  for (double& c : counts) c /= static_cast<double>(m_);
  return counts;
}

double empirical_copula(const SampleMatrix& samples, std::span<const double> u) {
  return EmpiricalCopula(samples)(u);
}

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError(fmt::format("normal_quantile: u = {:.17g} outside (0, 1)", u));
  return boost::math::quantile(boost::math::normal_distribution<double>(), u);
}

double bivariate_normal_cdf(double a, double b, double rho) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("bivariate_normal_cdf: |rho| < 1 violated");
  if (std::isinf(a) || std::isinf(b)) {
    if (a == -INFINITY || b == -INFINITY) return 0.0;
    if (a == INFINITY) return normal_cdf(b);
    return normal_cdf(a);
  }
  if (rho == 0.0) return normal_cdf(a) * normal_cdf(b);

  const double lo = -40.0;
  if (a <= lo) return 0.0;
  const double sd = std::sqrt((1.0 - rho) * (1.0 + rho));
  auto f = [&](double s) { return normal_pdf(s) * normal_cdf((b - rho * s) / sd); };

  // Break points around the conditional step at s = b / rho.
  std::vector<double> cuts{lo, a};
  const double step = b / rho;
  const double width = sd / std::abs(rho);
  for (double k : {-8.0, -1.0, 0.0, 1.0, 8.0}) {
    const double c = step + k * width;
    if (c > lo && c < a) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] <= 0.0) continue;
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[k], cuts[k + 1], 15, 1e-13);
  }
  return std::clamp(sum, 0.0, 1.0);
}

double gaussian_copula_exact(std::span<const double> u, double rho) {
  if (u.size() != 2) throw DomainError("gaussian_copula_exact: u must have 2 coordinates");
  if (!(std::abs(rho) < 1.0)) throw DomainError("gaussian_copula_exact: |rho| < 1 violated");
  for (double ui : u) {
    if (!(ui >= 0.0 && ui <= 1.0)) throw DomainError("gaussian_copula_exact: u outside [0, 1]");
  }
  if (u[0] == 0.0 || u[1] == 0.0) return 0.0;
  if (u[0] == 1.0) return u[1];
  if (u[1] == 1.0) return u[0];
  if (rho == 0.0) return u[0] * u[1];
  return bivariate_normal_cdf(normal_quantile(u[0]), normal_quantile(u[1]), rho);
}

double gaussian_copula_density_exact(std::span<const double> u, double rho) {
  if (u.size() != 2) throw DomainError("gaussian_copula_density_exact: u must have 2 coordinates");
  if (!(std::abs(rho) < 1.0)) throw DomainError("gaussian_copula_density_exact: |rho| < 1 violated");
  const double a = normal_quantile(u[0]);
  const double b = normal_quantile(u[1]);
  const double q = 1.0 - rho * rho;
  return std::exp(-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * q)) / std::sqrt(q);
}

}  // namespace fcop::oracle
