#pragma once

namespace dwos::bessel {

// Modified Bessel functions of integer order 0 and 1 for x > 0 (I also at 0).
double i0(double x);
double i1(double x);
double k0(double x);
double k1(double x);

// Exponentially scaled variants: i*e(x) = I(x) e^{-x}, k*e(x) = K(x) e^{x}.
// These stay finite for arguments where the plain functions overflow.
double i0e(double x);
double i1e(double x);
double k0e(double x);
double k1e(double x);

}  // namespace dwos::bessel
