#pragma once

#include <memory>

#include "fcop/models.hpp"

namespace fcop::testing {

inline std::shared_ptr<const GaussianModel> gaussian2(double rho, double m1 = 0.0, double m2 = 0.0, double s1 = 1.0,
                                                      double s2 = 1.0) {
  Vec mean(2);
  mean << m1, m2;
  Mat cov(2, 2);
  cov << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
  return std::make_shared<GaussianModel>(mean, cov);
}

/// alpha = 10.2, beta = (-3.8, -2.5), delta = 0.15, mu = 0 with Delta = I.
inline std::shared_ptr<const NigModel> nig_plus(double t = 1.0) {
  Vec beta(2);
  beta << -3.8, -2.5;
  return std::make_shared<NigModel>(10.2, beta, 0.15, Vec::Zero(2), Mat::Identity(2, 2), t);
}

/// Same parameters with Delta = [[1, -1], [-1, 2]].
inline std::shared_ptr<const NigModel> nig_minus(double t = 1.0) {
  Vec beta(2);
  beta << -3.8, -2.5;
  Mat d(2, 2);
  d << 1.0, -1.0, -1.0, 2.0;
  return std::make_shared<NigModel>(10.2, beta, 0.15, Vec::Zero(2), d, t);
}

}  // namespace fcop::testing
