#pragma once

#include <array>

#include "nsch/grid.hpp"
#include "nsch/params.hpp"

namespace nsch {

/// (1-c)-weighted mean velocity with midpoint quadrature, u interpolated to
/// cell centers. Throws DegenerateWeight if the bubble phase is (nearly) empty.
std::array<double, 2> bubble_velocity(const Array2D& u, const Array2D& v, const Array2D& c,
                                      const GridSpec& g);

/// (1-c)/2-weighted y-centroid of the bubble phase.
double centroid_y(const Array2D& c, const GridSpec& g);
double centroid_x(const Array2D& c, const GridSpec& g);

/// Integral of c over the domain (midpoint quadrature).
double total_mass(const Array2D& c, const GridSpec& g);

/// Ginzburg-Landau energy  sigma_tilde * int( W(c)/eps + eps/2 |grad c|^2 ),
/// with one-sided gradients at no-flux boundaries.
double gl_energy(const Array2D& c, const GridSpec& g, const PhysicalParams& p);

}  // namespace nsch
