#pragma once

#include "dwos/rng.hpp"
#include "dwos/vec.hpp"

namespace dwos {

/// Below this value of sigma * R^2 the harmonic (sigma = 0) formulas are used.
inline constexpr double kHarmonicThreshold = 1e-12;

/// Default tolerance on the normalised radius when inverting the radial CDF.
inline constexpr double kDefaultRadialTolerance = 1e-10;

/// Green's function, Poisson kernel and their integrals for the screened
/// operator  Delta u - sigma u  on the ball B(center, R), in 2D or 3D.
///
///   2D: G(r) = 1/(2 pi) [K0(r s) - K0(R s)/I0(R s) I0(r s)],  s = sqrt(sigma)
///   3D: G(r) = sinh((R - r) s) / (4 pi r sinh(R s))
///
/// All quantities that depend only on (R, sigma) are computed once at
/// construction, so a kernel is built per walk step and queried cheaply.
class BallKernel {
 public:
  BallKernel(int dimension, Vec3 center, double radius, double sigma);

  int dimension() const { return dim_; }
  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }
  double sigma() const { return sigma_; }
  bool harmonic() const { return harmonic_; }

  /// G at distance r from the centre; DomainError unless 0 < r <= R.
  double green(double r) const;
  /// Integral of G over the ball, |G|.
  double green_norm() const { return norm_; }
  /// Normal derivative of G on the sphere (constant over the sphere).
  double poisson_kernel() const { return mu_ / area_; }
  /// |dB|, circumference in 2D and area in 3D.
  double sphere_area() const { return area_; }
  /// P |dB| = 1 - sigma |G|: ratio of Poisson kernel to uniform sphere pdf.
  double throughput() const { return mu_; }

  /// d|G| / d sigma.
  double dgreen_norm_dsigma() const;
  /// d log(P |dB|) / d sigma.
  double dlog_throughput_dsigma() const;
  /// d log G(r) / d sigma at fixed r, for 0 < r < R.
  double dlog_green_dsigma(double r) const;

  /// Fraction of |G| within normalised radius t = r / R.
  double radial_cdf(double t) const;
  /// d radial_cdf / dt.
  double radial_density(double t) const;
  /// Solves radial_cdf(t) = u to |dt| < tolerance with safeguarded Newton.
  double invert_radial_cdf(double u, double tolerance) const;

 private:
  double green_unchecked(double r) const;
  /// CDF, density and density derivative at t, sharing special functions.
  void radial_terms(double t, double& cdf, double& pdf, double& dpdf) const;

  int dim_;
  Vec3 center_;
  double radius_;
  double sigma_;
  bool harmonic_;
  double lambda_ = 0.0;  // R sqrt(sigma)
  double mu_ = 1.0;
  double norm_ = 0.0;
  double area_ = 0.0;
  double mass_ = 0.0;          // sigma |G| = 1 - mu, dimensionless
  double bessel_ratio_ = 0.0;  // 2D: K0(lambda) / I0(lambda) * e^{2 lambda}
};

struct KernelSample {
  Vec3 point;
  double pdf = 0.0;
};

/// Point distributed proportionally to G(center, .) inside the ball.
/// Consumes one draw for the radius, then the direction draws.
KernelSample sample_green(const BallKernel& k, Sampler& s, double tolerance = kDefaultRadialTolerance);
/// Same draws as sample_green without evaluating the pdf.
Vec3 sample_green_point(const BallKernel& k, Sampler& s, double tolerance = kDefaultRadialTolerance);

/// Uniform point on the sphere; one draw in 2D, two in 3D.
KernelSample sample_sphere(const BallKernel& k, Sampler& s);
Vec3 sample_sphere_point(const BallKernel& k, Sampler& s);

}  // namespace dwos
