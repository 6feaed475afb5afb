#include "dwos/bessel.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

namespace dwos::bessel {
namespace {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

// Above this argument the plain functions are replaced by the large-argument
// expansion, which is exact to double precision there.
constexpr double kAsymptotic = 600.0;

// sum_k (-1)^k a_k(nu) / x^k for the Hankel expansions of I and K.
double hankel_series(double nu, double x, bool alternate) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * x);
    sum += alternate && (k % 2 == 1) ? -term : term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

double i_scaled_asymptotic(double nu, double x) {
  return hankel_series(nu, x, true) / std::sqrt(2.0 * std::numbers::pi * x);
}

double k_scaled_asymptotic(double nu, double x) {
  return hankel_series(nu, x, false) * std::sqrt(std::numbers::pi / (2.0 * x));
}

}  // namespace

double i0(double x) { return boost::math::cyl_bessel_i(0, x, Policy()); }
double i1(double x) { return boost::math::cyl_bessel_i(1, x, Policy()); }
double k0(double x) { return boost::math::cyl_bessel_k(0, x, Policy()); }
double k1(double x) { return boost::math::cyl_bessel_k(1, x, Policy()); }

double i0e(double x) { return x < kAsymptotic ? i0(x) * std::exp(-x) : i_scaled_asymptotic(0.0, x); }
double i1e(double x) { return x < kAsymptotic ? i1(x) * std::exp(-x) : i_scaled_asymptotic(1.0, x); }
double k0e(double x) { return x < kAsymptotic ? k0(x) * std::exp(x) : k_scaled_asymptotic(0.0, x); }
double k1e(double x) { return x < kAsymptotic ? k1(x) * std::exp(x) : k_scaled_asymptotic(1.0, x); }

}  // namespace dwos::bessel
