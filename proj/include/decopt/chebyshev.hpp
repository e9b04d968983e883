#pragma once

#include <cmath>

#include "decopt/types.hpp"

namespace decopt {

template <typename Scalar>
struct ChebyshevResult {
  StackT<Scalar> x;
  StackT<Scalar> residual;  // rhs - K x, carried by the recurrence
  int applications = 0;
};

// Chebyshev semi-iteration for K x = rhs with K symmetric positive definite
// and spectrum inside [lmin, lmax]. Starts from x0 with residual r0 and
// applies K exactly `iterations` times.
template <typename Scalar, typename ApplyK>
ChebyshevResult<Scalar> chebyshev_solve(ApplyK&& apply, const StackT<Scalar>& x0,
                                        const StackT<Scalar>& r0, Scalar lmin, Scalar lmax,
                                        int iterations) {
  ChebyshevResult<Scalar> out{x0, r0, 0};
  const Scalar centre = (lmax + lmin) / 2;
  const Scalar half_width = (lmax - lmin) / 2;
  if (iterations <= 0) return out;
  if (!(half_width > Scalar(0))) {
    // Single-point spectrum: Richardson with the exact inverse.
    for (int k = 0; k < iterations; ++k) {
      StackT<Scalar> step = out.residual / centre;
      out.x += step;
      out.residual -= apply(step);
      ++out.applications;
    }
    return out;
  }
  const Scalar sigma = centre / half_width;
  Scalar rho = 1 / sigma;
  StackT<Scalar> dir = out.residual / centre;
  for (int k = 0; k < iterations; ++k) {
    out.x += dir;
    out.residual -= apply(dir);
    ++out.applications;
    const Scalar rho_next = 1 / (2 * sigma - rho);
    dir = (rho_next * rho) * dir + (2 * rho_next / half_width) * out.residual;
    rho = rho_next;
  }
  return out;
}

}  // namespace decopt
