#pragma once

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace csaes {

/// CDF of Student's t with nu degrees of freedom through the regularized
/// incomplete beta function. For t >= 0, F(t) = 1 - I_x(nu/2, 1/2) / 2 with
/// x = nu / (nu + t^2); the complement form keeps precision for large nu.
inline double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("student_t_cdf: nu must be positive");
  if (std::isnan(t)) throw std::invalid_argument("student_t_cdf: t is NaN");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double t2 = t * t;
  // I_x(nu/2, 1/2) == I^c_{1-x}(1/2, nu/2), with 1 - x = t^2 / (nu + t^2).
  const double tail = 0.5 * boost::math::ibetac(0.5, 0.5 * nu, t2 / (nu + t2));
  return t > 0 ? 1.0 - tail : tail;
}

}  // namespace csaes
