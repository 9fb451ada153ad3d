#include "nsch/operators.hpp"

namespace nsch {

namespace {
int wrap(int i, int n) { return ((i % n) + n) % n; }
int clampi(int i, int lo, int hi) { return i < lo ? lo : (i > hi ? hi : i); }
}  // namespace

StencilOps::StencilOps(const GridSpec& g, const BoundaryConditionSet& bc) : g_(g), bc_(bc) {
    g_.validate();
    bc_.validate();
}

double StencilOps::cat(const Array2D& c, int i, int j) const {
    i = bc_.periodic_x() ? wrap(i, g_.nx) : clampi(i, 0, g_.nx - 1);
    j = bc_.periodic_y() ? wrap(j, g_.ny) : clampi(j, 0, g_.ny - 1);
    return c(i, j);
}

double StencilOps::uat(const Array2D& u, int i, int j) const {
    // x direction: normal to the u faces
    if (bc_.periodic_x()) {
        i = wrap(i, g_.nx);
    } else if (i < 0) {
        if (bc_.left.type == VelBc::Open) i = 0;            // zero normal gradient
        else return -uat(u, -i, j);                         // odd reflection about the wall face
    } else if (i > g_.nx) {
        if (bc_.right.type == VelBc::Open) i = g_.nx;
        else return -uat(u, 2 * g_.nx - i, j);
    }
    // y direction: tangential ghosts
    if (j < 0) {
        if (bc_.periodic_y()) j = wrap(j, g_.ny);
        else if (bc_.bottom.type == VelBc::NoSlip) return -u(i, 0);
        else j = 0;  // free-slip / open: zero tangential gradient
    } else if (j >= g_.ny) {
        if (bc_.periodic_y()) j = wrap(j, g_.ny);
        else if (bc_.top.type == VelBc::NoSlip) return -u(i, g_.ny - 1);
        else j = g_.ny - 1;
    }
    return u(i, j);
}

double StencilOps::vat(const Array2D& v, int i, int j) const {
    if (bc_.periodic_y()) {
        j = wrap(j, g_.ny);
    } else if (j < 0) {
        if (bc_.bottom.type == VelBc::Open) j = 0;
        else return -vat(v, i, -j);
    } else if (j > g_.ny) {
        if (bc_.top.type == VelBc::Open) j = g_.ny;
        else return -vat(v, i, 2 * g_.ny - j);
    }
    if (i < 0) {
        if (bc_.periodic_x()) i = wrap(i, g_.nx);
        else if (bc_.left.type == VelBc::NoSlip) return -v(0, j);
        else i = 0;
    } else if (i >= g_.nx) {
        if (bc_.periodic_x()) i = wrap(i, g_.nx);
        else if (bc_.right.type == VelBc::NoSlip) return -v(g_.nx - 1, j);
        else i = g_.nx - 1;
    }
    return v(i, j);
}

bool StencilOps::u_dirichlet(int i, int j) const {
    (void)j;
    if (bc_.periodic_x()) return false;
    if (i == 0) return bc_.left.type == VelBc::NoSlip || bc_.left.type == VelBc::FreeSlip;
    if (i == g_.nx) return bc_.right.type == VelBc::NoSlip || bc_.right.type == VelBc::FreeSlip;
    return false;
}

bool StencilOps::v_dirichlet(int i, int j) const {
    (void)i;
    if (bc_.periodic_y()) return false;
    if (j == 0) return bc_.bottom.type == VelBc::NoSlip || bc_.bottom.type == VelBc::FreeSlip;
    if (j == g_.ny) return bc_.top.type == VelBc::NoSlip || bc_.top.type == VelBc::FreeSlip;
    return false;
}

Array2D StencilOps::laplace(const Array2D& c) const {
    const double h2 = g_.h * g_.h;
    Array2D out(g_.nx, g_.ny);
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i)
            out(i, j) = (cat(c, i + 1, j) + cat(c, i - 1, j) + cat(c, i, j + 1) +
                         cat(c, i, j - 1) - 4.0 * c(i, j)) / h2;
    return out;
}

Array2D StencilOps::chemical_potential(const Array2D& c, const PhysicalParams& p) const {
    Array2D lap = laplace(c);
    Array2D mu(g_.nx, g_.ny);
    for (size_t k = 0; k < mu.a.size(); ++k)
        mu.a[k] = p.sigma_tilde / p.eps * double_well_prime(c.a[k]) - p.sigma_tilde * p.eps * lap.a[k];
    return mu;
}

FaceField StencilOps::ns_rhs_g(const Array2D& u, const Array2D& v, const Array2D& c,
                               const Array2D& mu, const PhysicalParams& p, double frame_u,
                               double frame_v) const {
    const double h = g_.h;
    FaceField out(g_);

    // x component at u faces
    for (int j = 0; j < g_.ny; ++j) {
        for (int i = 0; i <= g_.nx; ++i) {
            if (u_dirichlet(i, j)) continue;
            const double cW = cat(c, i - 1, j), cE = cat(c, i, j);
            const double rho_f = 0.5 * (blend_density(cW, p) + blend_density(cE, p));

            const double du_dx = (uat(u, i + 1, j) - uat(u, i - 1, j)) / (2 * h);
            const double du_dy = (uat(u, i, j + 1) - uat(u, i, j - 1)) / (2 * h);
            const double v_f = 0.25 * (vat(v, i - 1, j) + vat(v, i, j) + vat(v, i - 1, j + 1) +
                                       vat(v, i, j + 1));
            const double adv = (uat(u, i, j) - frame_u) * du_dx + (v_f - frame_v) * du_dy;

            const double nuE = blend_viscosity(cE, p), nuW = blend_viscosity(cW, p);
            double txx_e = 2.0 * nuE * (uat(u, i + 1, j) - uat(u, i, j)) / h;
            double txx_w = 2.0 * nuW * (uat(u, i, j) - uat(u, i - 1, j)) / h;
            const double nuN = blend_viscosity(
                0.25 * (cW + cE + cat(c, i - 1, j + 1) + cat(c, i, j + 1)), p);
            const double nuS = blend_viscosity(
                0.25 * (cW + cE + cat(c, i - 1, j - 1) + cat(c, i, j - 1)), p);
            const double t_n = nuN * ((uat(u, i, j + 1) - uat(u, i, j)) / h +
                                      (vat(v, i, j + 1) - vat(v, i - 1, j + 1)) / h);
            const double t_s = nuS * ((uat(u, i, j) - uat(u, i, j - 1)) / h +
                                      (vat(v, i, j) - vat(v, i - 1, j)) / h);
            const double visc = (txx_e - txx_w) / h + (t_n - t_s) / h;

            const double mu_f = 0.5 * (cat(mu, i - 1, j) + cat(mu, i, j));
            const double st = mu_f * (cE - cW) / h;

            double fx = 0.0;
            if (p.body_force) fx = 0.5 * (p.body_force(cW)[0] + p.body_force(cE)[0]);

            out.x(i, j) = -rho_f * adv + visc + fx + st;
        }
    }

    // y component at v faces
    for (int j = 0; j <= g_.ny; ++j) {
        for (int i = 0; i < g_.nx; ++i) {
            if (v_dirichlet(i, j)) continue;
            const double cS = cat(c, i, j - 1), cN = cat(c, i, j);
            const double rho_f = 0.5 * (blend_density(cS, p) + blend_density(cN, p));

            const double dv_dy = (vat(v, i, j + 1) - vat(v, i, j - 1)) / (2 * h);
            const double dv_dx = (vat(v, i + 1, j) - vat(v, i - 1, j)) / (2 * h);
            const double u_f = 0.25 * (uat(u, i, j - 1) + uat(u, i + 1, j - 1) + uat(u, i, j) +
                                       uat(u, i + 1, j));
            const double adv = (u_f - frame_u) * dv_dx + (vat(v, i, j) - frame_v) * dv_dy;

            const double nuN = blend_viscosity(cN, p), nuS = blend_viscosity(cS, p);
            double tyy_n = 2.0 * nuN * (vat(v, i, j + 1) - vat(v, i, j)) / h;
            double tyy_s = 2.0 * nuS * (vat(v, i, j) - vat(v, i, j - 1)) / h;
            const double nuE = blend_viscosity(
                0.25 * (cS + cN + cat(c, i + 1, j - 1) + cat(c, i + 1, j)), p);
            const double nuW = blend_viscosity(
                0.25 * (cS + cN + cat(c, i - 1, j - 1) + cat(c, i - 1, j)), p);
            const double t_e = nuE * ((vat(v, i + 1, j) - vat(v, i, j)) / h +
                                      (uat(u, i + 1, j) - uat(u, i + 1, j - 1)) / h);
            const double t_w = nuW * ((vat(v, i, j) - vat(v, i - 1, j)) / h +
                                      (uat(u, i, j) - uat(u, i, j - 1)) / h);
            const double visc = (tyy_n - tyy_s) / h + (t_e - t_w) / h;

            const double mu_f = 0.5 * (cat(mu, i, j - 1) + cat(mu, i, j));
            const double st = mu_f * (cN - cS) / h;

            double fy = 0.0;
            if (p.body_force) fy = 0.5 * (p.body_force(cS)[1] + p.body_force(cN)[1]);

            out.y(i, j) = -rho_f * adv + visc + fy + st;
        }
    }
    return out;
}

Array2D StencilOps::ch_rhs_f(const Array2D& u, const Array2D& v, const Array2D& c,
                             const Array2D& mu, const PhysicalParams& p, double frame_u,
                             double frame_v) const {
    const double h = g_.h;
    Array2D out(g_.nx, g_.ny);
    for (int j = 0; j < g_.ny; ++j) {
        for (int i = 0; i < g_.nx; ++i) {
            const double fe = (uat(u, i + 1, j) - frame_u) * 0.5 * (c(i, j) + cat(c, i + 1, j));
            const double fw = (uat(u, i, j) - frame_u) * 0.5 * (cat(c, i - 1, j) + c(i, j));
            const double fn = (vat(v, i, j + 1) - frame_v) * 0.5 * (c(i, j) + cat(c, i, j + 1));
            const double fs = (vat(v, i, j) - frame_v) * 0.5 * (cat(c, i, j - 1) + c(i, j));
            const double adv = -(fe - fw + fn - fs) / h;
            const double diff = p.mobility *
                                (cat(mu, i + 1, j) + cat(mu, i - 1, j) + cat(mu, i, j + 1) +
                                 cat(mu, i, j - 1) - 4.0 * mu(i, j)) / (h * h);
            out(i, j) = adv + diff;
        }
    }
    return out;
}

FaceField StencilOps::surface_tension_force(const Array2D& mu, const Array2D& c) const {
    const double h = g_.h;
    FaceField out(g_);
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i <= g_.nx; ++i) {
            if (u_dirichlet(i, j)) continue;
            out.x(i, j) = 0.5 * (cat(mu, i - 1, j) + cat(mu, i, j)) *
                          (cat(c, i, j) - cat(c, i - 1, j)) / h;
        }
    for (int j = 0; j <= g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i) {
            if (v_dirichlet(i, j)) continue;
            out.y(i, j) = 0.5 * (cat(mu, i, j - 1) + cat(mu, i, j)) *
                          (cat(c, i, j) - cat(c, i, j - 1)) / h;
        }
    return out;
}

Array2D StencilOps::divergence(const Array2D& u, const Array2D& v) const {
    Array2D out(g_.nx, g_.ny);
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i)
            out(i, j) = (u(i + 1, j) - u(i, j) + v(i, j + 1) - v(i, j)) / g_.h;
    return out;
}

FaceField StencilOps::grad_p(const Array2D& p) const {
    const double h = g_.h;
    FaceField out(g_);
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i <= g_.nx; ++i) {
            if (u_dirichlet(i, j)) continue;
            if (!bc_.periodic_x() && i == 0 && bc_.left.type == VelBc::Open)
                out.x(i, j) = (p(0, j) - bc_.left.pressure) / (0.5 * h);
            else if (!bc_.periodic_x() && i == g_.nx && bc_.right.type == VelBc::Open)
                out.x(i, j) = (bc_.right.pressure - p(g_.nx - 1, j)) / (0.5 * h);
            else
                out.x(i, j) = (cat(p, i, j) - cat(p, i - 1, j)) / h;
        }
    for (int j = 0; j <= g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i) {
            if (v_dirichlet(i, j)) continue;
            if (!bc_.periodic_y() && j == 0 && bc_.bottom.type == VelBc::Open)
                out.y(i, j) = (p(i, 0) - bc_.bottom.pressure) / (0.5 * h);
            else if (!bc_.periodic_y() && j == g_.ny && bc_.top.type == VelBc::Open)
                out.y(i, j) = (bc_.top.pressure - p(i, g_.ny - 1)) / (0.5 * h);
            else
                out.y(i, j) = (cat(p, i, j) - cat(p, i, j - 1)) / h;
        }
    return out;
}

std::array<double, 2> StencilOps::grad_c_at_uface(const Array2D& c, int i, int j) const {
    const double h = g_.h;
    const double dcdx = (cat(c, i, j) - cat(c, i - 1, j)) / h;
    const double dcdy = (cat(c, i - 1, j + 1) + cat(c, i, j + 1) - cat(c, i - 1, j - 1) -
                         cat(c, i, j - 1)) / (4.0 * h);
    return {dcdx, dcdy};
}

std::array<double, 2> StencilOps::grad_c_at_vface(const Array2D& c, int i, int j) const {
    const double h = g_.h;
    const double dcdy = (cat(c, i, j) - cat(c, i, j - 1)) / h;
    const double dcdx = (cat(c, i + 1, j - 1) + cat(c, i + 1, j) - cat(c, i - 1, j - 1) -
                         cat(c, i - 1, j)) / (4.0 * h);
    return {dcdx, dcdy};
}

Eigen::VectorXd StencilOps::pack_velocity(const Array2D& u, const Array2D& v) const {
    Eigen::VectorXd x(n_u() + n_v());
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i <= g_.nx; ++i) x[iu(i, j)] = u(i, j);
    for (int j = 0; j <= g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i) x[iv(i, j)] = v(i, j);
    return x;
}

void StencilOps::unpack_velocity(const Eigen::VectorXd& x, Array2D& u, Array2D& v) const {
    u = Array2D(g_.nx + 1, g_.ny);
    v = Array2D(g_.nx, g_.ny + 1);
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i <= g_.nx; ++i) u(i, j) = x[iu(i, j)];
    for (int j = 0; j <= g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i) v(i, j) = x[iv(i, j)];
}

StabTerm StencilOps::assemble_anisotropic(const Array2D& u_prev, const Array2D& v_prev,
                                          const Array2D& c_prev, double scale, bool projection,
                                          double delta2) const {
    const double h = g_.h;
    const int n = n_u() + n_v();
    std::vector<Triplet> trips;
    trips.reserve(size_t(16) * size_t(g_.nx) * size_t(g_.ny) * 2);

    // exact bilinear element stiffness on a square of 4 grid points
    // (1D stiffness x 1D mass); one-point quadrature is avoided because its
    // hourglass null mode is exactly the near-cutoff perturbation the term
    // exists to damp
    const double bx[4] = {-1, 1, -1, 1};  // sw, se, nw, ne
    const double by[4] = {-1, -1, 1, 1};
    static const double Mxx[4][4] = {{2, -2, 1, -1}, {-2, 2, -1, 1}, {1, -1, 2, -2},
                                     {-1, 1, -2, 2}};
    static const double Myy[4][4] = {{2, 1, -2, -1}, {1, 2, -1, -2}, {-2, -1, 2, 1},
                                     {-1, -2, 1, 2}};

    // K = anisotropy tensor averaged over the 4 element corners; corner
    // evaluation keeps the compact one-cell difference in each face-normal
    // direction, which a midpoint evaluation would smear over 2h and badly
    // underestimate on coarse grids.
    auto add_element = [&](const int cols[4], const std::array<double, 2> gr[4]) {
        double kxx = 0, kxy = 0, kyy = 0;
        for (int q = 0; q < 4; ++q) {
            const double gx = gr[q][0], gy = gr[q][1];
            if (!projection) {
                kxx += scale * gx * gx;
                kxy += scale * gx * gy;
                kyy += scale * gy * gy;
            } else {
                const double n2 = gx * gx + gy * gy;
                const double mag = std::sqrt(n2);
                const double w = mag / (n2 + delta2);
                kxx += scale * (mag - w * gx * gx);
                kxy += scale * (-w * gx * gy);
                kyy += scale * (mag - w * gy * gy);
            }
        }
        kxx *= 0.25;
        kxy *= 0.25;
        kyy *= 0.25;
        // Strong-form row: element stiffness divided by the lumped cell mass
        // h^2, so entries scale like K/h^2 and match the finite-difference
        // momentum rows they are added to. The mixed term is exact at one
        // quadrature point.
        const double s = 1.0 / (h * h);
        for (int l = 0; l < 4; ++l)
            for (int m = 0; m < 4; ++m) {
                const double e = s * (kxx * Mxx[l][m] / 6.0 + kyy * Myy[l][m] / 6.0 +
                                      kxy * (bx[l] * by[m] + by[l] * bx[m]) * 0.25);
                if (e != 0.0) trips.emplace_back(cols[l], cols[m], e);
            }
    };

    // u-component grid: squares of 4 u-points centered at the y-face points
    for (int j = 0; j + 1 < g_.ny; ++j)
        for (int i = 0; i < g_.nx; ++i) {
            const std::array<double, 2> gr[4] = {
                grad_c_at_uface(c_prev, i, j), grad_c_at_uface(c_prev, i + 1, j),
                grad_c_at_uface(c_prev, i, j + 1), grad_c_at_uface(c_prev, i + 1, j + 1)};
            const int cols[4] = {iu(i, j), iu(i + 1, j), iu(i, j + 1), iu(i + 1, j + 1)};
            add_element(cols, gr);
        }
    // v-component grid: squares of 4 v-points centered at the x-face points
    for (int j = 0; j < g_.ny; ++j)
        for (int i = 0; i + 1 < g_.nx; ++i) {
            const std::array<double, 2> gr[4] = {
                grad_c_at_vface(c_prev, i, j), grad_c_at_vface(c_prev, i + 1, j),
                grad_c_at_vface(c_prev, i, j + 1), grad_c_at_vface(c_prev, i + 1, j + 1)};
            const int cols[4] = {iv(i, j), iv(i + 1, j), iv(i, j + 1), iv(i + 1, j + 1)};
            add_element(cols, gr);
        }

    StabTerm t;
    t.mat = SpMat(n, n);
    t.mat.setFromTriplets(trips.begin(), trips.end());
    t.rhs = t.mat * pack_velocity(u_prev, v_prev);
    return t;
}

StabTerm StencilOps::assemble_S1(const Array2D& u_prev, const Array2D& v_prev,
                                 const Array2D& c_prev, const PhysicalParams& p, double theta,
                                 double tau, double omega) const {
    const double scale = omega * tau * theta * theta * p.sigma_tilde * p.eps;
    return assemble_anisotropic(u_prev, v_prev, c_prev, scale, false, 0.0);
}

StabTerm StencilOps::assemble_S2(const Array2D& u_prev, const Array2D& v_prev,
                                 const Array2D& c_prev, const PhysicalParams& p, double theta,
                                 double tau, double omega) const {
    const double scale = omega * p.sigma * theta * theta * tau;
    const double delta = 1e-8 / p.eps;
    return assemble_anisotropic(u_prev, v_prev, c_prev, scale, true, delta * delta);
}

}  // namespace nsch
