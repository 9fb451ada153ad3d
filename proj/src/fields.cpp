#include "nsch/diagnostics.hpp"
#include "nsch/material.hpp"

namespace nsch {

std::function<std::array<double, 2>(double)> gravity_force(double rho1, double rho2, double g) {
    return [rho1, rho2, g](double c) -> std::array<double, 2> {
        const double cc = clamp_phase(c);
        const double rho = rho1 * 0.5 * (1.0 + cc) + rho2 * 0.5 * (1.0 - cc);
        return {0.0, -rho * g};
    };
}

Array2D intermediate_density(const Array2D& c_new, const Array2D& c_old,
                             const PhysicalParams& p) {
    Array2D out(c_new.nx, c_new.ny);
    for (size_t k = 0; k < out.a.size(); ++k)
        out.a[k] = 0.5 * (blend_density(c_new.a[k], p) + blend_density(c_old.a[k], p));
    return out;
}

std::array<double, 2> bubble_velocity(const Array2D& u, const Array2D& v, const Array2D& c,
                                      const GridSpec& g) {
    double w_sum = 0.0, ux_sum = 0.0, uy_sum = 0.0;
    const double da = g.h * g.h;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double w = (1.0 - c(i, j)) * da;
            w_sum += w;
            ux_sum += w * 0.5 * (u(i, j) + u(i + 1, j));
            uy_sum += w * 0.5 * (v(i, j) + v(i, j + 1));
        }
    if (w_sum <= 1e-12 * g.area())
        throw DegenerateWeight("bubble_velocity: integral of (1-c) is degenerate");
    return {ux_sum / w_sum, uy_sum / w_sum};
}

namespace {
double centroid(const Array2D& c, const GridSpec& g, bool ycoord) {
    double w_sum = 0.0, m_sum = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double w = 0.5 * (1.0 - c(i, j));
            w_sum += w;
            m_sum += w * (ycoord ? g.yc(j) : g.xc(i));
        }
    if (w_sum * g.h * g.h <= 1e-12 * g.area())
        throw DegenerateWeight("centroid: integral of (1-c)/2 is degenerate");
    return m_sum / w_sum;
}
}  // namespace

double centroid_y(const Array2D& c, const GridSpec& g) { return centroid(c, g, true); }
double centroid_x(const Array2D& c, const GridSpec& g) { return centroid(c, g, false); }

double total_mass(const Array2D& c, const GridSpec& g) {
    double s = 0.0;
    for (double v : c.a) s += v;
    return s * g.h * g.h;
}

double gl_energy(const Array2D& c, const GridSpec& g, const PhysicalParams& p) {
    const double h = g.h;
    double e = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double cc = c(i, j);
            const double w = 0.25 * (cc * cc - 1.0) * (cc * cc - 1.0);
            e += w / p.eps * h * h;
        }
    // gradient part from cell-face differences (no-flux / wrap-free one-sided at edges)
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            const double d = (c(i + 1, j) - c(i, j)) / h;
            e += 0.5 * p.eps * d * d * h * h;
        }
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double d = (c(i, j + 1) - c(i, j)) / h;
            e += 0.5 * p.eps * d * d * h * h;
        }
    return p.sigma_tilde * e;
}

}  // namespace nsch
