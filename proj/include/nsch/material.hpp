#pragma once

#include "nsch/grid.hpp"
#include "nsch/params.hpp"

namespace nsch {

/// W'(c) for the double well W = 1/4 (c^2-1)^2.
inline double double_well_prime(double c) { return c * c * c - c; }

/// W''(c) = 3c^2 - 1.
inline double double_well_second(double c) { return 3.0 * c * c - 1.0; }

inline double clamp_phase(double c) { return c < -1.0 ? -1.0 : (c > 1.0 ? 1.0 : c); }

/// Linear blend between rho2 (c=-1) and rho1 (c=+1), clamped to the phase range.
inline double blend_density(double c, const PhysicalParams& p) {
    const double cc = clamp_phase(c);
    return p.rho1 * 0.5 * (1.0 + cc) + p.rho2 * 0.5 * (1.0 - cc);
}

inline double blend_viscosity(double c, const PhysicalParams& p) {
    const double cc = clamp_phase(c);
    return p.nu1 * 0.5 * (1.0 + cc) + p.nu2 * 0.5 * (1.0 - cc);
}

/// rho^{n+1/2} = (rho(c_new) + rho(c_old)) / 2, pointwise.
Array2D intermediate_density(const Array2D& c_new, const Array2D& c_old,
                             const PhysicalParams& p);

}  // namespace nsch
