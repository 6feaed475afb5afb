#include "dwos/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dwos/bessel.hpp"
#include "dwos/errors.hpp"

namespace dwos {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;

// Power series in z = lambda^2 / 4 used for small lambda in 2D:
//   i0 = sum z^k / (k!)^2,  a = (i0 - 1) / z,  plus their z-derivatives.
struct SmallSeries2D {
  double i0 = 0.0;
  double a = 0.0;
  double di0 = 0.0;
  double da = 0.0;
};

SmallSeries2D series_2d(double z) {
  SmallSeries2D s;
  double term = 1.0;  // z^k / (k!)^2
  s.i0 = 1.0;
  for (int k = 1; k < 40; ++k) {
    const double prev = term;  // z^{k-1} / ((k-1)!)^2
    term = prev * z / (static_cast<double>(k) * k);
    const double coeff = prev / (static_cast<double>(k) * k);  // z^{k-1} / (k!)^2
    s.i0 += term;
    s.a += coeff;
    s.di0 += k * coeff;
    if (k >= 2) s.da += (k - 1) * coeff / z;
    if (term < 1e-18 * s.i0) break;
  }
  return s;
}

// q2(lambda) = (1 - 1/I0(lambda)) / lambda^2, so that |G| = R^2 q2.
double q2(double lambda, double mu) {
  if (lambda < 2.0) {
    const SmallSeries2D s = series_2d(0.25 * lambda * lambda);
    return s.a / (4.0 * s.i0);
  }
  return (1.0 - mu) / (lambda * lambda);
}

// q2'(lambda) / lambda.
double dq2_over_lambda(double lambda, double mu) {
  if (lambda < 2.0) {
    const SmallSeries2D s = series_2d(0.25 * lambda * lambda);
    return (s.da * s.i0 - s.a * s.di0) / (8.0 * s.i0 * s.i0);
  }
  const double ratio = bessel::i1e(lambda) / bessel::i0e(lambda);
  const double l2 = lambda * lambda;
  return mu * ratio / (l2 * lambda) - 2.0 * (1.0 - mu) / (l2 * l2);
}

// lambda / sinh(lambda), stable for all lambda >= 0.
double lambda_over_sinh(double lambda) {
  if (lambda < 1e-8) return 1.0;
  return 2.0 * lambda * std::exp(-lambda) / -std::expm1(-2.0 * lambda);
}

// q3(lambda) = (1 - lambda / sinh lambda) / lambda^2.
double q3(double lambda, double mu) {
  if (lambda < 1.0) {
    // (sinh x - x) / x^3 = sum_{k>=1} x^{2k-2} / (2k+1)!
    const double l2 = lambda * lambda;
    double term = 1.0 / 6.0;
    double sum = term;
    for (int k = 2; k < 20; ++k) {
      term *= l2 / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return sum * mu;
  }
  return (1.0 - mu) / (lambda * lambda);
}

// q3'(lambda) / lambda.
double dq3_over_lambda(double lambda, double mu) {
  if (lambda < 0.2) {
    constexpr double c1 = -7.0 / 360.0;
    constexpr double c2 = 31.0 / 15120.0;
    constexpr double c3 = -127.0 / 604800.0;
    constexpr double c4 = 73.0 / 3421440.0;
    constexpr double c5 = -(4094.0 * 691.0) / (2730.0 * 479001600.0);
    const double l2 = lambda * lambda;
    return 2.0 * c1 + l2 * (4.0 * c2 + l2 * (6.0 * c3 + l2 * (8.0 * c4 + l2 * 10.0 * c5)));
  }
  const double dmu = mu * (1.0 / lambda - 1.0 / std::tanh(lambda));
  const double l2 = lambda * lambda;
  return -dmu / (l2 * lambda) - 2.0 * (1.0 - mu) / (l2 * l2);
}

// I(w) = sum w^k / (k!)^2 and A(w) = sum_{k>=1} H_k w^k / (k!)^2 with their
// w-derivatives; I0(x) = I(x^2/4) and K0(x) = A(x^2/4) - (ln(x/2) + gamma) I0(x).
struct BesselPowerSums {
  double i = 1.0;
  double di = 0.0;
  double a = 0.0;
  double da = 0.0;
};

BesselPowerSums bessel_power_sums(double w) {
  BesselPowerSums s;
  double coeff = 1.0;  // 1 / (k!)^2
  double power = 1.0;  // w^(k-1)
  double harmonic = 0.0;
  for (int k = 1; k < 60; ++k) {
    coeff /= static_cast<double>(k) * k;
    harmonic += 1.0 / k;
    const double d_term = k * coeff * power;
    power *= w;
    const double term = coeff * power;
    s.i += term;
    s.di += d_term;
    s.a += harmonic * term;
    s.da += harmonic * d_term;
    if (term < 1e-18 * s.i && d_term < 1e-18 * s.di) break;
  }
  return s;
}

// (x coth x - 1) / x^2.
double coth_excess(double x) {
  if (x < 0.5) {
    const double x2 = x * x;
    return 1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (-1.0 / 4725.0 + x2 * 2.0 / 93555.0)));
  }
  return (x / std::tanh(x) - 1.0) / (x * x);
}

// 1 - x K1(x).
double one_minus_x_k1(double x) {
  if (x < 2.0) {
    const double z = 0.25 * x * x;
    double term = 1.0;  // z^k / (k! (k+1)!)
    double i1_sum = 1.0;
    double psi_sum = (-kEulerGamma) + (1.0 - kEulerGamma);  // psi(1) + psi(2)
    double harmonic = 1.0;                                  // H_{k+1}
    for (int k = 1; k < 40; ++k) {
      term *= z / (static_cast<double>(k) * (k + 1));
      const double h_k = harmonic;
      harmonic += 1.0 / (k + 1);
      i1_sum += term;
      psi_sum += term * ((h_k - kEulerGamma) + (harmonic - kEulerGamma));
      if (term < 1e-18) break;
    }
    const double i1 = 0.5 * x * i1_sum;
    return -x * std::log(0.5 * x) * i1 + z * psi_sum;
  }
  return 1.0 - x * bessel::k1e(x) * std::exp(-x);
}

// e^{-lambda} sinh(b) and e^{-lambda} cosh(b) for 0 <= b <= lambda.
void scaled_sinh_cosh(double b, double lambda, double& sb, double& cb) {
  if (b < 20.0) {
    const double e = std::exp(-lambda);
    sb = std::sinh(b) * e;
    cb = std::cosh(b) * e;
  } else {
    const double ep = std::exp(b - lambda);
    const double em = std::exp(-b - lambda);
    sb = 0.5 * (ep - em);
    cb = 0.5 * (ep + em);
  }
}

// e^{-lambda} (sinh lambda - sinh B - x cosh B),  x = lambda t,  B = lambda - x.
double scaled_mass_3d(double lambda, double t) {
  const double x = lambda * t;
  double sb, cb;
  scaled_sinh_cosh(lambda - x, lambda, sb, cb);
  if (x < 1.0) {
    double term = x;  // x^n / n!
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
      term *= x / n;
      sum += term * ((n % 2 == 0) ? sb : cb);
      if (term < 1e-18) break;
    }
    return sum;
  }
  return -0.5 * std::expm1(-2.0 * lambda) - sb - x * cb;
}

double scaled_total_mass_3d(double lambda) {
  if (lambda < 1.0) {
    const double l2 = lambda * lambda;
    double term = lambda * l2 / 6.0;
    double sum = term;
    for (int k = 2; k < 20; ++k) {
      term *= l2 / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return sum * std::exp(-lambda);
  }
  return -0.5 * std::expm1(-2.0 * lambda) - lambda * std::exp(-lambda);
}

}  // namespace

BallKernel::BallKernel(int dimension, Vec3 center, double radius, double sigma)
    : dim_(dimension), center_(center), radius_(radius), sigma_(sigma) {
  if (dim_ != 2 && dim_ != 3) throw DomainError("kernel dimension must be 2 or 3");
  if (!(radius_ > 0.0)) throw DomainError("kernel radius must be positive");
  if (!(sigma_ >= 0.0)) throw DomainError("screening coefficient must be non-negative");
  const double r2 = radius_ * radius_;
  harmonic_ = sigma_ * r2 < kHarmonicThreshold;
  area_ = dim_ == 2 ? 2.0 * kPi * radius_ : 4.0 * kPi * r2;
  if (harmonic_) {
    mu_ = 1.0;
    norm_ = dim_ == 2 ? 0.25 * r2 : r2 / 6.0;
    return;
  }
  lambda_ = radius_ * std::sqrt(sigma_);
  if (dim_ == 2) {
    mu_ = std::exp(-lambda_) / bessel::i0e(lambda_);
    const double q = q2(lambda_, mu_);
    norm_ = r2 * q;
    mass_ = lambda_ * lambda_ * q;
    bessel_ratio_ = bessel::k0e(lambda_) / bessel::i0e(lambda_);
  } else {
    mu_ = lambda_over_sinh(lambda_);
    norm_ = r2 * q3(lambda_, mu_);
    mass_ = scaled_total_mass_3d(lambda_);
  }
}

double BallKernel::green(double r) const {
  if (!(r > 0.0) || r > radius_) throw DomainError("green: r must satisfy 0 < r <= R");
  return green_unchecked(r);
}

double BallKernel::green_unchecked(double r) const {
  if (r >= radius_) return 0.0;
  if (harmonic_) {
    if (dim_ == 2) return std::log(radius_ / r) / (2.0 * kPi);
    return (1.0 / r - 1.0 / radius_) / (4.0 * kPi);
  }
  if (dim_ == 2) {
    const double x = lambda_ * (r / radius_);
    const double k0 = bessel::k0e(x) * std::exp(-x);
    const double i0_part = bessel_ratio_ * bessel::i0e(x) * std::exp(x - 2.0 * lambda_);
    return (k0 - i0_part) / (2.0 * kPi);
  }
  const double s = std::sqrt(sigma_);
  return std::exp(-r * s) * -std::expm1(-2.0 * (radius_ - r) * s) / (4.0 * kPi * r * -std::expm1(-2.0 * radius_ * s));
}

double BallKernel::dgreen_norm_dsigma() const {
  const double r4 = radius_ * radius_ * radius_ * radius_;
  if (harmonic_) return dim_ == 2 ? -3.0 * r4 / 64.0 : -7.0 * r4 / 360.0;
  const double d = dim_ == 2 ? dq2_over_lambda(lambda_, mu_) : dq3_over_lambda(lambda_, mu_);
  return 0.5 * r4 * d;
}

double BallKernel::dlog_green_dsigma(double r) const {
  if (!(r > 0.0) || !(r < radius_)) throw DomainError("dlog_green_dsigma: r must satisfy 0 < r < R");
  const double t = r / radius_;
  const double r2 = radius_ * radius_;
  if (dim_ == 3) {
    // log G = log sinh((R - r) s) - log sinh(R s) + const, with s = sqrt(sigma).
    const double s = harmonic_ ? 0.0 : std::sqrt(sigma_);
    const double b = radius_ - r;
    return 0.5 * (b * b * coth_excess(b * s) - r2 * coth_excess(radius_ * s));
  }
  if (lambda_ < 2.0) {
    // 2 pi G = -ln t I(z t^2) + A(z t^2) - A(z) I(z t^2) / I(z), z = lambda^2 / 4.
    const double z = 0.25 * lambda_ * lambda_;
    const double t2 = t * t;
    const BesselPowerSums at = bessel_power_sums(z * t2);
    const BesselPowerSums a1 = bessel_power_sums(z);
    const double ratio = a1.a / a1.i;
    const double dratio = (a1.da * a1.i - a1.a * a1.di) / (a1.i * a1.i);
    const double lt = std::log(t);
    const double g = -lt * at.i + at.a - ratio * at.i;
    const double dg = t2 * (-lt * at.di + at.da - ratio * at.di) - dratio * at.i;
    return 0.25 * r2 * dg / g;
  }
  // Both G and dG/dlambda scaled by e^x.
  const double x = lambda_ * t;
  const double e = std::exp(2.0 * (x - lambda_));
  const double i0l = bessel::i0e(lambda_);
  const double i0x = bessel::i0e(x);
  const double g = bessel::k0e(x) - bessel_ratio_ * i0x * e;
  const double dg = -t * bessel::k1e(x) + i0x * e / (lambda_ * i0l * i0l) - t * bessel_ratio_ * bessel::i1e(x) * e;
  return 0.5 * r2 * dg / (lambda_ * g);
}

double BallKernel::dlog_throughput_dsigma() const {
  const double r2 = radius_ * radius_;
  if (harmonic_) return dim_ == 2 ? -0.25 * r2 : -r2 / 6.0;
  if (dim_ == 2) return -0.5 * r2 * bessel::i1e(lambda_) / (lambda_ * bessel::i0e(lambda_));
  double g;
  if (lambda_ < 0.1) {
    const double l2 = lambda_ * lambda_;
    g = -1.0 / 3.0 + l2 * (1.0 / 45.0 + l2 * (-2.0 / 945.0 + l2 / 4725.0));
  } else {
    g = (1.0 / lambda_ - 1.0 / std::tanh(lambda_)) / lambda_;
  }
  return 0.5 * r2 * g;
}

double BallKernel::radial_cdf(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double f;
  if (harmonic_) {
    f = dim_ == 2 ? t * t * (1.0 - 2.0 * std::log(t)) : t * t * (3.0 - 2.0 * t);
  } else if (dim_ == 2) {
    const double x = lambda_ * t;
    const double i1_part = bessel_ratio_ * x * bessel::i1e(x) * std::exp(x - 2.0 * lambda_);
    f = (one_minus_x_k1(x) - i1_part) / mass_;
  } else {
    f = scaled_mass_3d(lambda_, t) / mass_;
  }
  return std::clamp(f, 0.0, 1.0);
}

double BallKernel::radial_density(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  if (harmonic_) return dim_ == 2 ? -4.0 * t * std::log(t) : 6.0 * t * (1.0 - t);
  if (dim_ == 2) {
    const double x = lambda_ * t;
    const double k0 = bessel::k0e(x) * std::exp(-x);
    const double i0_part = bessel_ratio_ * bessel::i0e(x) * std::exp(x - 2.0 * lambda_);
    return lambda_ * lambda_ * t * (k0 - i0_part) / mass_;
  }
  double sb, cb;
  scaled_sinh_cosh(lambda_ * (1.0 - t), lambda_, sb, cb);
  return lambda_ * lambda_ * t * sb / mass_;
}

namespace {

// Approximate inverse of the sigma = 0 radial CDF, a starting point for Newton.
double harmonic_guess(int dim, double u) {
  if (dim == 2) {
    double t = std::sqrt(u);
    for (int k = 0; k < 3; ++k) t = std::sqrt(u / (1.0 - 2.0 * std::log(t)));
    return t;
  }
  // 3t^2 - 2t^3 is antisymmetric about (1/2, 1/2).
  const bool upper = u > 0.5;
  const double v = upper ? 1.0 - u : u;
  double t = std::sqrt(v / 3.0);
  for (int k = 0; k < 2; ++k) t -= (t * t * (3.0 - 2.0 * t) - v) / (6.0 * t * (1.0 - t));
  t = upper ? 1.0 - t : t;
  return t;
}

}  // namespace

void BallKernel::radial_terms(double t, double& cdf, double& pdf, double& dpdf) const {
  if (harmonic_) {
    if (dim_ == 2) {
      const double lt = std::log(t);
      cdf = t * t * (1.0 - 2.0 * lt);
      pdf = -4.0 * t * lt;
      dpdf = -4.0 * (lt + 1.0);
    } else {
      cdf = t * t * (3.0 - 2.0 * t);
      pdf = 6.0 * t * (1.0 - t);
      dpdf = 6.0 - 12.0 * t;
    }
    return;
  }
  const double l2 = lambda_ * lambda_;
  const double x = lambda_ * t;
  if (dim_ == 2) {
    const double ex = std::exp(-x);
    const double ei = bessel_ratio_ * std::exp(x - 2.0 * lambda_);
    const double k0 = bessel::k0e(x) * ex;
    const double k1 = bessel::k1e(x) * ex;
    const double i0 = bessel::i0e(x) * ei;
    const double i1 = bessel::i1e(x) * ei;
    const double head = x < 2.0 ? one_minus_x_k1(x) : 1.0 - x * k1;
    cdf = (head - x * i1) / mass_;
    pdf = l2 * t * (k0 - i0) / mass_;
    dpdf = l2 * ((k0 - i0) - x * (k1 + i1)) / mass_;
  } else {
    double sb, cb;
    scaled_sinh_cosh(lambda_ - x, lambda_, sb, cb);
    cdf = scaled_mass_3d(lambda_, t) / mass_;
    pdf = l2 * t * sb / mass_;
    dpdf = l2 * (sb - x * cb) / mass_;
  }
}

double BallKernel::invert_radial_cdf(double u, double tolerance) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  double t = harmonic_guess(dim_, u);
  if (!harmonic_ && lambda_ > 1.0) t = std::min(t, 2.0 / lambda_ + 0.5 * t);
  // Halley iterations kept inside a shrinking bisection bracket. A step that
  // fails to halve the one before last falls back to bisection.
  double dx = 1.0;
  double dx_old = 1.0;
  for (int it = 0; it < 200; ++it) {
    double cdf, pdf, dpdf;
    radial_terms(t, cdf, pdf, dpdf);
    const double f = cdf - u;
    if (f < 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    const double denom = 2.0 * pdf * pdf - f * dpdf;
    double next = (pdf > 0.0 && denom > 0.0) ? t - 2.0 * f * pdf / denom : 0.5 * (lo + hi);
    bool halley = next > lo && next < hi && std::abs(next - t) < 0.5 * std::abs(dx_old);
    if (!halley) next = 0.5 * (lo + hi);
    dx_old = dx;
    dx = next - t;
    const double step = std::abs(dx);
    t = next;
    // Once converging, a Halley step of size h leaves an error of order h^3 / t^2.
    if (step < tolerance || hi - lo < tolerance ||
        (halley && step * step * step < 1e-3 * tolerance * t * t)) {
      break;
    }
  }
  return t;
}

namespace {

Vec3 direction(int dim, Sampler& s) {
  if (dim == 2) {
    const double phi = 2.0 * kPi * s.next_uniform();
    return {std::cos(phi), std::sin(phi), 0.0};
  }
  const double z = 1.0 - 2.0 * s.next_uniform();
  const double phi = 2.0 * kPi * s.next_uniform();
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

}  // namespace

Vec3 sample_green_point(const BallKernel& k, Sampler& s, double tolerance) {
  const double t = k.invert_radial_cdf(s.next_uniform(), tolerance);
  return k.center() + direction(k.dimension(), s) * (t * k.radius());
}

KernelSample sample_green(const BallKernel& k, Sampler& s, double tolerance) {
  const Vec3 y = sample_green_point(k, s, tolerance);
  const double r = distance(y, k.center());
  const double g = r > 0.0 ? k.green(std::min(r, k.radius())) : std::numeric_limits<double>::infinity();
  return {y, g / k.green_norm()};
}

Vec3 sample_sphere_point(const BallKernel& k, Sampler& s) {
  return k.center() + direction(k.dimension(), s) * k.radius();
}

KernelSample sample_sphere(const BallKernel& k, Sampler& s) {
  return {sample_sphere_point(k, s), 1.0 / k.sphere_area()};
}

}  // namespace dwos
