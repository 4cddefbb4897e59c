#include "fcop/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "fcop/errors.hpp"

namespace fcop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_vec(const Vec& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += fmt::format("{}{:.17g}", i ? "," : "", v[i]);
  }
  return out + "]";
}

std::string format_mat(const Mat& m) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += i ? "," : "";
    out += format_vec(m.row(i).transpose());
  }
  return out + "]";
}

void require_symmetric(const Mat& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw DomainError(fmt::format("{} must be square, got {}x{}", name, m.rows(), m.cols()));
  }
  const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError(fmt::format("{} must be symmetric within 1e-12 relative", name));
  }
}

// Base (t = 1) marginal parameters from the Schur complement of Delta.
Nig1dParams base_marginal(const NigModel& m, int i) {
  const int n = m.dimension();
  if (i < 0 || i >= n) {
    throw DomainError(fmt::format("marginal index {} out of range [0, {})", i, n));
  }
  const Mat& d = m.shape();
  const Vec& b = m.beta();
  const double dii = d(i, i);
  double quad = 0.0;   // beta_J^T (Delta_JJ - Delta_Ji Delta_iJ / Delta_ii) beta_J
  double shift = 0.0;  // Delta_iJ beta_J
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    shift += d(i, j) * b[j];
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      quad += b[j] * (d(j, k) - d(j, i) * d(i, k) / dii) * b[k];
    }
  }
  const double alpha2 = (m.alpha() * m.alpha() - quad) / dii;
  return Nig1dParams{std::sqrt(alpha2), b[i] + shift / dii, m.delta() * std::sqrt(dii), m.mu()[i]};
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

GaussianModel::GaussianModel(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto n = mean_.size();
  if (n < 1) throw DomainError("gaussian: dimension must be positive");
  if (cov_.rows() != n || cov_.cols() != n) {
    throw DomainError(fmt::format("gaussian: cov must be {}x{} to match mean", n, n));
  }
  if (!mean_.allFinite() || !cov_.allFinite()) throw DomainError("gaussian: non-finite parameter");
  require_symmetric(cov_, "gaussian: cov");
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(cov_(i, i) > 0.0)) throw DomainError(fmt::format("gaussian: cov[{}][{}] > 0 violated", i, i));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = std::sqrt(cov_(i, i) * cov_(j, j));
      const double rho = cov_(i, j) / s;
      if (std::abs(rho) > kMaxAbsCorrelation) {
        const double c = std::copysign(kMaxAbsCorrelation, rho) * s;
        cov_(i, j) = c;
        cov_(j, i) = c;
        clamped_ = true;
      }
    }
  }
  const double floor = 1e-8 * cov_.trace() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < floor) {
    throw DomainError(fmt::format(
        "gaussian: smallest eigenvalue of cov >= 1e-8*trace/n violated ({:.6g} < {:.6g})",
        eig.eigenvalues().minCoeff(), floor));
  }
}

Complex GaussianModel::log_mgf(std::span<const Complex> z) const {
  const auto n = static_cast<std::size_t>(mean_.size());
  if (z.size() != n) throw DomainError("gaussian: argument dimension mismatch");
  Complex lin = 0.0;
  Complex quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += z[i] * mean_[i];
    Complex row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += cov_(i, j) * z[j];
    quad += z[i] * row;
  }
  return lin + 0.5 * quad;
}

double GaussianModel::finiteness_slack(const Vec&) const { return kInf; }
double GaussianModel::boundary_distance(const Vec&) const { return kInf; }

ModelPtr GaussianModel::marginal(int i) const {
  if (i < 0 || i >= dimension()) {
    throw DomainError(fmt::format("marginal index {} out of range [0, {})", i, dimension()));
  }
  return std::make_shared<GaussianModel>(Vec::Constant(1, mean_[i]), Mat::Constant(1, 1, cov_(i, i)));
}

std::string GaussianModel::fingerprint() const {
  return fmt::format("gaussian(mean={},cov={})", format_vec(mean_), format_mat(cov_));
}

// ---------------------------------------------------------------- NIG

NigModel::NigModel(double alpha, Vec beta, double delta, Vec mu, Mat shape, double t)
    : alpha_(alpha),
      beta_(std::move(beta)),
      delta_(delta),
      mu_(std::move(mu)),
      shape_(std::move(shape)),
      t_(t),
      gamma_(0.0) {
  const auto n = beta_.size();
  if (n < 1) throw DomainError("nig: dimension must be positive");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw DomainError("nig: alpha > 0 violated");
  if (!(delta_ > 0.0) || !std::isfinite(delta_)) throw DomainError("nig: delta > 0 violated");
  if (!(t_ > 0.0) || !std::isfinite(t_)) throw DomainError("nig: t > 0 violated");
  if (mu_.size() != n) throw DomainError("nig: mu and beta must have the same length");
  if (shape_.rows() != n || shape_.cols() != n) {
    throw DomainError(fmt::format("nig: Delta must be {}x{} to match beta", n, n));
  }
  if (!beta_.allFinite() || !mu_.allFinite() || !shape_.allFinite()) {
    throw DomainError("nig: non-finite parameter");
  }
  require_symmetric(shape_, "nig: Delta");
  shape_ = 0.5 * (shape_ + shape_.transpose()).eval();
  Eigen::LLT<Mat> llt(shape_);
  Eigen::SelfAdjointEigenSolver<Mat> eig(shape_, Eigen::EigenvaluesOnly);
  if (llt.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw DomainError("nig: Delta positive definite violated");
  }
  const double a2 = alpha_ * alpha_;
  const double bdb = beta_.dot(shape_ * beta_);
  if (!(a2 > bdb)) {
    throw DomainError(
        fmt::format("nig: alpha^2 > <beta, Delta beta> violated ({:.6g} <= {:.6g})", a2, bdb));
  }
  gamma_ = std::sqrt(a2 - bdb);
}

double NigModel::radicand(const Vec& r) const {
  const Vec w = beta_ + r;
  return alpha_ * alpha_ - w.dot(shape_ * w);
}

Complex NigModel::log_mgf(std::span<const Complex> z) const {
  const auto n = static_cast<std::size_t>(beta_.size());
  if (z.size() != n) throw DomainError("nig: argument dimension mismatch");
  double re_quad = 0.0;
  Complex quad = 0.0;
  Complex lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex wi = beta_[i] + z[i];
    Complex row = 0.0;
    double re_row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += shape_(i, j) * (beta_[j] + z[j]);
      re_row += shape_(i, j) * (beta_[j] + z[j].real());
    }
    quad += wi * row;
    re_quad += (beta_[i] + z[i].real()) * re_row;
    lin += z[i] * mu_[i];
  }
  const double a2 = alpha_ * alpha_;
  if (a2 - re_quad < 0.0) {
    throw DomainError(fmt::format(
        "nig: alpha^2 - <beta + Re z, Delta (beta + Re z)> >= 0 violated ({:.6g})", a2 - re_quad));
  }
  return t_ * (lin + delta_ * (gamma_ - std::sqrt(Complex(a2) - quad)));
}

double NigModel::finiteness_slack(const Vec& r) const { return radicand(r); }

double NigModel::boundary_distance(const Vec& direction) const {
  // alpha^2 - <beta + s d, Delta (beta + s d)> = 0, positive root in s.
  const double a = direction.dot(shape_ * direction);
  const double b = 2.0 * direction.dot(shape_ * beta_);
  const double c = -gamma_ * gamma_;
  if (!(a > 0.0)) return kInf;
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

ModelPtr NigModel::marginal(int i) const {
  const Nig1dParams p = base_marginal(*this, i);
  return std::make_shared<NigModel>(p.alpha, Vec::Constant(1, p.beta), p.delta, Vec::Constant(1, p.mu),
                                    Mat::Identity(1, 1), t_);
}

std::string NigModel::fingerprint() const {
  return fmt::format("nig(alpha={:.17g},beta={},delta={:.17g},mu={},Delta={},t={:.17g})", alpha_,
                     format_vec(beta_), delta_, format_vec(mu_), format_mat(shape_), t_);
}

// ---------------------------------------------------------------- operations

DampingVector DampingVector::make(const MgfModel& model, Vec r) {
  if (r.size() != model.dimension()) {
    throw DomainError(fmt::format("damping vector has {} components, model dimension is {}", r.size(),
                                  model.dimension()));
  }
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!(r[i] < 0.0) || !std::isfinite(r[i])) {
      throw DomainError(fmt::format("damping R[{}] < 0 violated ({:.6g})", i, r[i]));
    }
  }
  if (!(model.finiteness_slack(r) >= model.feasibility_margin())) {
    throw DomainError(fmt::format("damping R={} outside the finiteness domain of {}", format_vec(r),
                                  model.family()));
  }
  return DampingVector(std::move(r));
}

Complex mgf(const MgfModel& model, const CVec& z) {
  const Complex lm = model.log_mgf(z);
  if (lm.real() > std::log(std::numeric_limits<double>::max())) {
    throw NumericalError(fmt::format("mgf overflow: Re log M = {:.6g}", lm.real()));
  }
  const Complex m = std::exp(lm);
  if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) {
    throw NumericalError("mgf: non-finite value");
  }
  return m;
}

bool feasible(const MgfModel& model, const Vec& r) {
  if (r.size() != model.dimension()) return false;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!(r[i] < 0.0) || !std::isfinite(r[i])) return false;
  }
  return model.finiteness_slack(r) >= model.feasibility_margin();
}

DampingVector default_damping(const MgfModel& model) {
  const int n = model.dimension();
  const Vec dir = Vec::Constant(n, -1.0 / std::sqrt(static_cast<double>(n)));
  const double limit = 0.9 * model.boundary_distance(dir);
  double s = std::sqrt(static_cast<double>(n));
  for (int k = 0; k < 60; ++k, s *= 0.5) {
    const Vec r = s * dir;
    if (s <= limit && feasible(model, r)) return DampingVector::make(model, r);
  }
  throw NoFeasiblePointError("default_damping: no feasible point on the ray toward 0");
}

Nig1dParams nig_marginal(const NigModel& model, int i) {
  Nig1dParams p = base_marginal(model, i);
  p.delta *= model.time();
  p.mu *= model.time();
  return p;
}

NigModel levy_at_time(const NigModel& model, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError(fmt::format("levy_at_time: t > 0 violated ({:.6g})", t));
  }
  return NigModel(model.alpha(), model.beta(), model.delta(), model.mu(), model.shape(), model.time() * t);
}

Mat Moments::correlation() const {
  const Vec s = covariance.diagonal().cwiseSqrt();
  return s.cwiseInverse().asDiagonal() * covariance * s.cwiseInverse().asDiagonal();
}

Moments moments(const MgfModel& model) {
  const int n = model.dimension();

  // Keep every probe well inside the finiteness domain.
  double h = 0.05;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (double si : {-1.0, 1.0}) {
        for (double sj : {-1.0, 1.0}) {
          Vec d = Vec::Zero(n);
          d[i] += si;
          d[j] += sj;
          if (d.norm() == 0.0) continue;
          d.normalize();
          h = std::min(h, 0.1 * model.boundary_distance(d));
        }
      }
    }
  }
  if (!(h > 0.0)) throw NumericalError("moments: 0 is not interior to the finiteness domain");

  auto cumulant = [&](const Vec& r) {
    const CVec z = r.cast<Complex>();
    const double k = model.log_mgf(z).real();
    if (!std::isfinite(k)) throw NumericalError("moments: non-finite cumulant");
    return k;
  };

  const double k0 = cumulant(Vec::Zero(n));
  auto first = [&](int i, double step) {
    Vec e = Vec::Zero(n);
    e[i] = step;
    return (cumulant(e) - cumulant(-e)) / (2.0 * step);
  };
  auto second = [&](int i, int j, double step) {
    if (i == j) {
      Vec e = Vec::Zero(n);
      e[i] = step;
      return (cumulant(e) - 2.0 * k0 + cumulant(-e)) / (step * step);
    }
    Vec pp = Vec::Zero(n), pm = Vec::Zero(n);
    pp[i] = step;
    pp[j] = step;
    pm[i] = step;
    pm[j] = -step;
    return (cumulant(pp) - cumulant(pm) - cumulant(-pm) + cumulant(-pp)) / (4.0 * step * step);
  };
  // Three-level Richardson tableau for an even error series in h.
  auto richardson = [&](auto&& estimate) {
    const double t0 = estimate(h), t1 = estimate(h / 2), t2 = estimate(h / 4);
    const double r1 = (4.0 * t1 - t0) / 3.0, r2 = (4.0 * t2 - t1) / 3.0;
    const double r = (16.0 * r2 - r1) / 15.0;
    if (!std::isfinite(r)) throw NumericalError("moments: non-finite difference (step underflow)");
    return r;
  };

  Moments out{Vec(n), Mat(n, n)};
  for (int i = 0; i < n; ++i) {
    out.mean[i] = richardson([&](double s) { return first(i, s); });
    for (int j = 0; j <= i; ++j) {
      const double c = richardson([&](double s) { return second(i, j, s); });
      out.covariance(i, j) = c;
      out.covariance(j, i) = c;
    }
  }
  return out;
}

}  // namespace fcop
