#include "nsch/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <fstream>
#include <iomanip>

namespace nsch {

namespace {
int wrap(int i, int n) { return ((i % n) + n) % n; }
}

SpMat BlockSystem::full() const {
    const int n1 = int(A_NS.rows());
    const int n2 = int(A_CH.rows());
    std::vector<Triplet> t;
    t.reserve(size_t(A_NS.nonZeros() + A_CH.nonZeros() + M_c.nonZeros() + N_c.nonZeros()));
    for (int k = 0; k < A_NS.outerSize(); ++k)
        for (SpMat::InnerIterator it(A_NS, k); it; ++it)
            t.emplace_back(int(it.row()), int(it.col()), it.value());
    for (int k = 0; k < A_CH.outerSize(); ++k)
        for (SpMat::InnerIterator it(A_CH, k); it; ++it)
            t.emplace_back(n1 + int(it.row()), n1 + int(it.col()), it.value());
    if (M_c.nonZeros())
        for (int k = 0; k < M_c.outerSize(); ++k)
            for (SpMat::InnerIterator it(M_c, k); it; ++it)
                t.emplace_back(int(it.row()), n1 + int(it.col()), it.value());
    if (N_c.nonZeros())
        for (int k = 0; k < N_c.outerSize(); ++k)
            for (SpMat::InnerIterator it(N_c, k); it; ++it)
                t.emplace_back(n1 + int(it.row()), int(it.col()), it.value());
    SpMat A(n1 + n2, n1 + n2);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

Vec BlockSystem::full_rhs() const {
    Vec b(b1.size() + b2.size());
    b << b1, b2;
    return b;
}

SystemAssembler::SystemAssembler(const GridSpec& g, const BoundaryConditionSet& bc,
                                 const PhysicalParams& p, const SchemeConfig& cfg)
    : g_(g), bc_(bc), p_(p), cfg_(cfg), ops_(g, bc), lay_(g) {}

namespace {

/// Resolves a logical face index to a stored unknown and a folding weight.
struct ColFold {
    const GridSpec& g;
    const BoundaryConditionSet& bc;
    const Layout& lay;

    std::pair<int, double> ucol(int i, int j) const {
        double w = 1.0;
        if (bc.periodic_x()) {
            i = wrap(i, g.nx);
        } else if (i < 0) {
            if (bc.left.type == VelBc::Open) i = 0;
            else { i = -i; w = -w; }
        } else if (i > g.nx) {
            if (bc.right.type == VelBc::Open) i = g.nx;
            else { i = 2 * g.nx - i; w = -w; }
        }
        if (j < 0) {
            if (bc.periodic_y()) j = wrap(j, g.ny);
            else { if (bc.bottom.type == VelBc::NoSlip) w = -w; j = 0; }
        } else if (j >= g.ny) {
            if (bc.periodic_y()) j = wrap(j, g.ny);
            else { if (bc.top.type == VelBc::NoSlip) w = -w; j = g.ny - 1; }
        }
        return {lay.iu(i, j), w};
    }

    std::pair<int, double> vcol(int i, int j) const {
        double w = 1.0;
        if (bc.periodic_y()) {
            j = wrap(j, g.ny);
        } else if (j < 0) {
            if (bc.bottom.type == VelBc::Open) j = 0;
            else { j = -j; w = -w; }
        } else if (j > g.ny) {
            if (bc.top.type == VelBc::Open) j = g.ny;
            else { j = 2 * g.ny - j; w = -w; }
        }
        if (i < 0) {
            if (bc.periodic_x()) i = wrap(i, g.nx);
            else { if (bc.left.type == VelBc::NoSlip) w = -w; i = 0; }
        } else if (i >= g.nx) {
            if (bc.periodic_x()) i = wrap(i, g.nx);
            else { if (bc.right.type == VelBc::NoSlip) w = -w; i = g.nx - 1; }
        }
        return {lay.iv(i, j), w};
    }

    int cell(int i, int j) const {  // clamped / wrapped cell index (CH-local c ordering)
        i = bc.periodic_x() ? wrap(i, g.nx) : std::max(0, std::min(g.nx - 1, i));
        j = bc.periodic_y() ? wrap(j, g.ny) : std::max(0, std::min(g.ny - 1, j));
        return j * g.nx + i;
    }
};

}  // namespace

NsSystem SystemAssembler::assemble_ns_block(const FieldSet& sk, const FieldSet& sn) const {
    const GridSpec& g = g_;
    const double h = g.h, th = cfg_.theta, tau = cfg_.tau;
    const double fx = cfg_.frame_u, fy = cfg_.frame_v;
    const bool implicit_coupling = (cfg_.coupling == CouplingMode::Implicit);
    const ColFold F{g, bc_, lay_};

    Array2D rho_half = intermediate_density(sk.c, sn.c, p_);
    FaceField gn = ops_.ns_rhs_g(sn.u, sn.v, sn.c, sn.mu, p_, fx, fy);
    FaceField st = implicit_coupling ? FaceField(g) : ops_.surface_tension_force(sk.mu, sk.c);

    const int n = lay_.n_ns();
    std::vector<Triplet> T;
    T.reserve(size_t(n) * 12);
    Vec b = Vec::Zero(n);
    std::vector<char> fixed_row(n, 0);  // dirichlet / alias rows

    // ---- u momentum -----------------------------------------------------
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i <= g.nx; ++i) {
            const int row = lay_.iu(i, j);
            if (bc_.periodic_x() && i == g.nx) {  // alias of face 0
                T.emplace_back(row, row, 1.0);
                T.emplace_back(row, lay_.iu(0, j), -1.0);
                fixed_row[row] = 1;
                continue;
            }
            if (ops_.u_dirichlet(i, j)) {
                T.emplace_back(row, row, 1.0);
                fixed_row[row] = 1;
                continue;
            }
            const double cW = ops_.cat(sk.c, i - 1, j), cE = ops_.cat(sk.c, i, j);
            const double rho_f = 0.5 * (ops_.cat(rho_half, i - 1, j) + ops_.cat(rho_half, i, j));
            const double rho_k = 0.5 * (blend_density(cW, p_) + blend_density(cE, p_));

            auto add_u = [&](int ii, int jj, double coef) {
                auto [c0, w] = F.ucol(ii, jj);
                T.emplace_back(row, c0, coef * w);
            };
            auto add_v = [&](int ii, int jj, double coef) {
                auto [c0, w] = F.vcol(ii, jj);
                T.emplace_back(row, c0, coef * w);
            };

            // mass
            T.emplace_back(row, row, rho_f / tau);
            b[row] += rho_f / tau * sn.u(i, j);

            // convection theta * rho(c_k) (u_k - frame) . grad u_{k+1}
            const double au = ops_.uat(sk.u, i, j) - fx;
            const double av = 0.25 * (ops_.vat(sk.v, i - 1, j) + ops_.vat(sk.v, i, j) +
                                      ops_.vat(sk.v, i - 1, j + 1) + ops_.vat(sk.v, i, j + 1)) - fy;
            add_u(i + 1, j, th * rho_k * au / (2 * h));
            add_u(i - 1, j, -th * rho_k * au / (2 * h));
            add_u(i, j + 1, th * rho_k * av / (2 * h));
            add_u(i, j - 1, -th * rho_k * av / (2 * h));

            // viscosity -theta div(nu D(u))
            const double nuE = blend_viscosity(cE, p_), nuW = blend_viscosity(cW, p_);
            const bool skipW = (!bc_.periodic_x() && i == 0 && bc_.left.type == VelBc::Open);
            const bool skipE = (!bc_.periodic_x() && i == g.nx && bc_.right.type == VelBc::Open);
            if (!skipE) {
                add_u(i + 1, j, -th * 2 * nuE / (h * h));
                add_u(i, j, th * 2 * nuE / (h * h));
            }
            if (!skipW) {
                add_u(i, j, th * 2 * nuW / (h * h));
                add_u(i - 1, j, -th * 2 * nuW / (h * h));
            }
            const double nuN = blend_viscosity(
                0.25 * (cW + cE + ops_.cat(sk.c, i - 1, j + 1) + ops_.cat(sk.c, i, j + 1)), p_);
            const double nuS = blend_viscosity(
                0.25 * (cW + cE + ops_.cat(sk.c, i - 1, j - 1) + ops_.cat(sk.c, i, j - 1)), p_);
            // -theta (T_N - T_S)/h
            add_u(i, j + 1, -th * nuN / (h * h));
            add_u(i, j, th * nuN / (h * h));
            add_v(i, j + 1, -th * nuN / (h * h));
            add_v(i - 1, j + 1, th * nuN / (h * h));
            add_u(i, j, th * nuS / (h * h));
            add_u(i, j - 1, -th * nuS / (h * h));
            add_v(i, j, th * nuS / (h * h));
            add_v(i - 1, j, -th * nuS / (h * h));

            // pressure gradient
            if (!bc_.periodic_x() && i == 0 && bc_.left.type == VelBc::Open) {
                T.emplace_back(row, lay_.ip(0, j), 2.0 / h);
                b[row] += 2.0 / h * bc_.left.pressure;
            } else if (!bc_.periodic_x() && i == g.nx && bc_.right.type == VelBc::Open) {
                T.emplace_back(row, lay_.ip(g.nx - 1, j), -2.0 / h);
                b[row] -= 2.0 / h * bc_.right.pressure;
            } else {
                const int ie = bc_.periodic_x() ? wrap(i, g.nx) : i;
                const int iw = bc_.periodic_x() ? wrap(i - 1, g.nx) : i - 1;
                T.emplace_back(row, lay_.ip(ie, j), 1.0 / h);
                T.emplace_back(row, lay_.ip(iw, j), -1.0 / h);
            }

            // forces
            if (p_.body_force)
                b[row] += th * 0.5 * (p_.body_force(cW)[0] + p_.body_force(cE)[0]);
            b[row] += th * st.x(i, j) + (1.0 - th) * gn.x(i, j);
        }
    }

    // ---- v momentum -----------------------------------------------------
    for (int j = 0; j <= g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int row = lay_.iv(i, j);
            if (bc_.periodic_y() && j == g.ny) {
                T.emplace_back(row, row, 1.0);
                T.emplace_back(row, lay_.iv(i, 0), -1.0);
                fixed_row[row] = 1;
                continue;
            }
            if (ops_.v_dirichlet(i, j)) {
                T.emplace_back(row, row, 1.0);
                fixed_row[row] = 1;
                continue;
            }
            const double cS = ops_.cat(sk.c, i, j - 1), cN = ops_.cat(sk.c, i, j);
            const double rho_f = 0.5 * (ops_.cat(rho_half, i, j - 1) + ops_.cat(rho_half, i, j));
            const double rho_k = 0.5 * (blend_density(cS, p_) + blend_density(cN, p_));

            auto add_u = [&](int ii, int jj, double coef) {
                auto [c0, w] = F.ucol(ii, jj);
                T.emplace_back(row, c0, coef * w);
            };
            auto add_v = [&](int ii, int jj, double coef) {
                auto [c0, w] = F.vcol(ii, jj);
                T.emplace_back(row, c0, coef * w);
            };

            T.emplace_back(row, row, rho_f / tau);
            b[row] += rho_f / tau * sn.v(i, j);

            const double av = ops_.vat(sk.v, i, j) - fy;
            const double au = 0.25 * (ops_.uat(sk.u, i, j - 1) + ops_.uat(sk.u, i + 1, j - 1) +
                                      ops_.uat(sk.u, i, j) + ops_.uat(sk.u, i + 1, j)) - fx;
            add_v(i + 1, j, th * rho_k * au / (2 * h));
            add_v(i - 1, j, -th * rho_k * au / (2 * h));
            add_v(i, j + 1, th * rho_k * av / (2 * h));
            add_v(i, j - 1, -th * rho_k * av / (2 * h));

            const double nuN = blend_viscosity(cN, p_), nuS = blend_viscosity(cS, p_);
            const bool skipS = (!bc_.periodic_y() && j == 0 && bc_.bottom.type == VelBc::Open);
            const bool skipN = (!bc_.periodic_y() && j == g.ny && bc_.top.type == VelBc::Open);
            if (!skipN) {
                add_v(i, j + 1, -th * 2 * nuN / (h * h));
                add_v(i, j, th * 2 * nuN / (h * h));
            }
            if (!skipS) {
                add_v(i, j, th * 2 * nuS / (h * h));
                add_v(i, j - 1, -th * 2 * nuS / (h * h));
            }
            const double nuE = blend_viscosity(
                0.25 * (cS + cN + ops_.cat(sk.c, i + 1, j - 1) + ops_.cat(sk.c, i + 1, j)), p_);
            const double nuW = blend_viscosity(
                0.25 * (cS + cN + ops_.cat(sk.c, i - 1, j - 1) + ops_.cat(sk.c, i - 1, j)), p_);
            add_v(i + 1, j, -th * nuE / (h * h));
            add_v(i, j, th * nuE / (h * h));
            add_u(i + 1, j, -th * nuE / (h * h));
            add_u(i + 1, j - 1, th * nuE / (h * h));
            add_v(i, j, th * nuW / (h * h));
            add_v(i - 1, j, -th * nuW / (h * h));
            add_u(i, j, th * nuW / (h * h));
            add_u(i, j - 1, -th * nuW / (h * h));

            if (!bc_.periodic_y() && j == 0 && bc_.bottom.type == VelBc::Open) {
                T.emplace_back(row, lay_.ip(i, 0), 2.0 / h);
                b[row] += 2.0 / h * bc_.bottom.pressure;
            } else if (!bc_.periodic_y() && j == g.ny && bc_.top.type == VelBc::Open) {
                T.emplace_back(row, lay_.ip(i, g.ny - 1), -2.0 / h);
                b[row] -= 2.0 / h * bc_.top.pressure;
            } else {
                const int jn = bc_.periodic_y() ? wrap(j, g.ny) : j;
                const int js = bc_.periodic_y() ? wrap(j - 1, g.ny) : j - 1;
                T.emplace_back(row, lay_.ip(i, jn), 1.0 / h);
                T.emplace_back(row, lay_.ip(i, js), -1.0 / h);
            }

            if (p_.body_force)
                b[row] += th * 0.5 * (p_.body_force(cS)[1] + p_.body_force(cN)[1]);
            b[row] += th * st.y(i, j) + (1.0 - th) * gn.y(i, j);
        }
    }

    // ---- stabilizer ------------------------------------------------------
    if (cfg_.coupling == CouplingMode::S1 || cfg_.coupling == CouplingMode::S2) {
        StabTerm stab = (cfg_.coupling == CouplingMode::S1)
                            ? ops_.assemble_S1(sk.u, sk.v, sk.c, p_, th, tau, cfg_.omega)
                            : ops_.assemble_S2(sk.u, sk.v, sk.c, p_, th, tau, cfg_.omega);
        for (int k = 0; k < stab.mat.outerSize(); ++k)
            for (SpMat::InnerIterator it(stab.mat, k); it; ++it)
                if (!fixed_row[it.row()]) T.emplace_back(int(it.row()), int(it.col()), it.value());
        for (int r = 0; r < stab.rhs.size(); ++r)
            if (!fixed_row[r]) b[r] += stab.rhs[r];
    }

    // ---- continuity ------------------------------------------------------
    const bool pin = !bc_.has_open();
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int row = lay_.ip(i, j);
            if (pin && i == 0 && j == 0) {
                T.emplace_back(row, row, 1.0);
                continue;
            }
            auto ue = F.ucol(i + 1, j), uw = F.ucol(i, j);
            auto vn = F.vcol(i, j + 1), vs = F.vcol(i, j);
            T.emplace_back(row, ue.first, ue.second / h);
            T.emplace_back(row, uw.first, -uw.second / h);
            T.emplace_back(row, vn.first, vn.second / h);
            T.emplace_back(row, vs.first, -vs.second / h);
        }
    }

    NsSystem sys;
    sys.A = SpMat(n, n);
    sys.A.setFromTriplets(T.begin(), T.end());
    sys.b = std::move(b);
    return sys;
}

ChSystem SystemAssembler::assemble_ch_block(const FieldSet& sk, const FieldSet& sn,
                                            const Array2D& u_new, const Array2D& v_new) const {
    const GridSpec& g = g_;
    const double h = g.h, th = cfg_.theta, tau = cfg_.tau;
    const double fx = cfg_.frame_u, fy = cfg_.frame_v;
    const double st_e = p_.sigma_tilde * p_.eps;   // sigma_tilde * eps
    const double st_ie = p_.sigma_tilde / p_.eps;  // sigma_tilde / eps
    const bool implicit_coupling = (cfg_.coupling == CouplingMode::Implicit);
    const ColFold F{g, bc_, lay_};

    Array2D fn = ops_.ch_rhs_f(sn.u, sn.v, sn.c, sn.mu, p_, fx, fy);

    const int n = lay_.n_ch();
    std::vector<Triplet> T;
    T.reserve(size_t(n) * 8);
    Vec b = Vec::Zero(n);

    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int crow = lay_.ic(i, j);
            const int murow = lay_.imu(i, j);

            T.emplace_back(crow, lay_.ic(i, j), 1.0 / tau);
            b[crow] += sn.c(i, j) / tau + (1.0 - th) * fn(i, j);

            if (!implicit_coupling) {
                // theta * div((u_new - frame) c_{k+1}), centered flux form
                const double ue = ops_.uat(u_new, i + 1, j) - fx;
                const double uw = ops_.uat(u_new, i, j) - fx;
                const double vn = ops_.vat(v_new, i, j + 1) - fy;
                const double vs = ops_.vat(v_new, i, j) - fy;
                auto addc = [&](int ii, int jj, double coef) {
                    T.emplace_back(crow, F.cell(ii, jj), coef);
                };
                addc(i, j, th * ue / (2 * h));
                addc(i + 1, j, th * ue / (2 * h));
                addc(i - 1, j, -th * uw / (2 * h));
                addc(i, j, -th * uw / (2 * h));
                addc(i, j, th * vn / (2 * h));
                addc(i, j + 1, th * vn / (2 * h));
                addc(i, j - 1, -th * vs / (2 * h));
                addc(i, j, -th * vs / (2 * h));
            }

            // -theta div(M grad mu): zero-flux folding, keep only real neighbors
            for (auto& d : dirs) {
                const int ni = i + d[0], nj = j + d[1];
                const bool ok_x = bc_.periodic_x() || (ni >= 0 && ni < g.nx);
                const bool ok_y = bc_.periodic_y() || (nj >= 0 && nj < g.ny);
                if (!ok_x || !ok_y) continue;
                T.emplace_back(crow, lay_.Np + F.cell(ni, nj), -th * p_.mobility / (h * h));
                T.emplace_back(crow, lay_.imu(i, j), th * p_.mobility / (h * h));
            }

            // mu row: mu - st_ie (W'(c_k) + W''(c_k)(c - c_k)) + st_e Lap c = 0
            const double ck = sk.c(i, j);
            T.emplace_back(murow, lay_.imu(i, j), 1.0);
            T.emplace_back(murow, lay_.ic(i, j), -st_ie * double_well_second(ck));
            for (auto& d : dirs) {
                const int ni = i + d[0], nj = j + d[1];
                const bool ok_x = bc_.periodic_x() || (ni >= 0 && ni < g.nx);
                const bool ok_y = bc_.periodic_y() || (nj >= 0 && nj < g.ny);
                if (!ok_x || !ok_y) continue;
                T.emplace_back(murow, F.cell(ni, nj), st_e / (h * h));
                T.emplace_back(murow, lay_.ic(i, j), -st_e / (h * h));
            }
            b[murow] = st_ie * (double_well_prime(ck) - double_well_second(ck) * ck);
        }
    }

    ChSystem sys;
    sys.A = SpMat(n, n);
    sys.A.setFromTriplets(T.begin(), T.end());
    sys.b = std::move(b);
    return sys;
}

BlockSystem SystemAssembler::assemble_coupled(const FieldSet& sk, const FieldSet& sn) const {
    const GridSpec& g = g_;
    const double h = g.h, th = cfg_.theta;
    const double fx = cfg_.frame_u, fy = cfg_.frame_v;
    const ColFold F{g, bc_, lay_};

    NsSystem ns = assemble_ns_block(sk, sn);
    ChSystem ch = assemble_ch_block(sk, sn, sk.u, sk.v);

    BlockSystem sys;
    sys.A_NS = std::move(ns.A);
    sys.b1 = std::move(ns.b);
    sys.A_CH = std::move(ch.A);
    sys.b2 = std::move(ch.b);

    // M_c: -theta grad c_k acting on mu_{k+1} in the momentum rows
    std::vector<Triplet> Tm;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            if (ops_.u_dirichlet(i, j) || (bc_.periodic_x() && i == g.nx)) continue;
            const double dcdx = (ops_.cat(sk.c, i, j) - ops_.cat(sk.c, i - 1, j)) / h;
            if (dcdx == 0.0) continue;
            const int row = lay_.iu(i, j);
            Tm.emplace_back(row, lay_.Np + F.cell(i - 1, j), -th * 0.5 * dcdx);
            Tm.emplace_back(row, lay_.Np + F.cell(i, j), -th * 0.5 * dcdx);
        }
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (ops_.v_dirichlet(i, j) || (bc_.periodic_y() && j == g.ny)) continue;
            const double dcdy = (ops_.cat(sk.c, i, j) - ops_.cat(sk.c, i, j - 1)) / h;
            if (dcdy == 0.0) continue;
            const int row = lay_.iv(i, j);
            Tm.emplace_back(row, lay_.Np + F.cell(i, j - 1), -th * 0.5 * dcdy);
            Tm.emplace_back(row, lay_.Np + F.cell(i, j), -th * 0.5 * dcdy);
        }
    sys.M_c = SpMat(lay_.n_ns(), lay_.n_ch());
    sys.M_c.setFromTriplets(Tm.begin(), Tm.end());

    // N_c: theta div(u_{k+1} c_k) in the c rows
    std::vector<Triplet> Tn;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int crow = lay_.ic(i, j);
            const double ce = 0.5 * (sk.c(i, j) + ops_.cat(sk.c, i + 1, j));
            const double cw = 0.5 * (ops_.cat(sk.c, i - 1, j) + sk.c(i, j));
            const double cn = 0.5 * (sk.c(i, j) + ops_.cat(sk.c, i, j + 1));
            const double cs = 0.5 * (ops_.cat(sk.c, i, j - 1) + sk.c(i, j));
            auto ue = F.ucol(i + 1, j), uw = F.ucol(i, j);
            auto vn = F.vcol(i, j + 1), vs = F.vcol(i, j);
            if (ce != 0.0) Tn.emplace_back(crow, ue.first, th / h * ce * ue.second);
            if (cw != 0.0) Tn.emplace_back(crow, uw.first, -th / h * cw * uw.second);
            if (cn != 0.0) Tn.emplace_back(crow, vn.first, th / h * cn * vn.second);
            if (cs != 0.0) Tn.emplace_back(crow, vs.first, -th / h * cs * vs.second);
            // moving-frame part of the advection is a known term
            sys.b2[crow] += th / h * (fx * (ce - cw) + fy * (cn - cs));
        }
    sys.N_c = SpMat(lay_.n_ch(), lay_.n_ns());
    sys.N_c.setFromTriplets(Tn.begin(), Tn.end());
    return sys;
}

// ---------------------------------------------------------------------------

Vec solve_direct(const SpMat& A, const Vec& b) {
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw SingularMatrix("solve_direct: sparse LU factorization failed");
    Vec x = lu.solve(b);
    const double bn = b.lpNorm<Eigen::Infinity>();
    if (bn > 0.0) {
        double rn = (A * x - b).lpNorm<Eigen::Infinity>() / bn;
        if (rn > 1e-10) {
            x += lu.solve(b - A * x);  // one step of iterative refinement
            rn = (A * x - b).lpNorm<Eigen::Infinity>() / bn;
            if (rn > 1e-6 || !x.allFinite())
                throw SolverFailure("solve_direct: residual " + std::to_string(rn));
        }
    }
    if (!x.allFinite()) throw SolverFailure("solve_direct: non-finite solution");
    return x;
}

Vec solve_defect_corrected(const SpMat& A, const Vec& b, const Vec& x_prev, double omega_ls,
                           bool backtracking) {
    const Vec r = b - A * x_prev;
    const Vec d = solve_direct(A, r);
    double w = omega_ls;
    Vec x = x_prev + w * d;
    if (backtracking) {
        const double r0 = r.norm();
        for (int k = 0; k < 4 && (b - A * x).norm() > r0; ++k) {
            w *= 0.5;
            x = x_prev + w * d;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// FGMRES with the two-stage block right preconditioner of the coupled system.

namespace {

struct BlockPrecond {
    const BlockSystem& sys;
    double alpha;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_ns, lu_ch;
    Eigen::IncompleteLUT<double> ilu_ns, ilu_ch;
    bool exact_ns, exact_ch;

    BlockPrecond(const BlockSystem& s, const PreconditionerConfig& pc)
        : sys(s), alpha(pc.alpha),
          exact_ns(pc.inner_ns == InnerPrecond::ExactSubSolve),
          exact_ch(pc.inner_ch == InnerPrecond::ExactSubSolve) {
        if (exact_ns) {
            lu_ns.compute(sys.A_NS);
            if (lu_ns.info() != Eigen::Success)
                throw SingularMatrix("fgmres: NS sub-block factorization failed");
        } else {
            ilu_ns.setFillfactor(30);
            ilu_ns.compute(sys.A_NS);
        }
        if (exact_ch) {
            lu_ch.compute(sys.A_CH);
            if (lu_ch.info() != Eigen::Success)
                throw SingularMatrix("fgmres: CH sub-block factorization failed");
        } else {
            ilu_ch.setFillfactor(30);
            ilu_ch.compute(sys.A_CH);
        }
    }

    Vec apply(const Vec& w) const {
        const int n1 = int(sys.A_NS.rows());
        const int n2 = int(sys.A_CH.rows());
        const Vec w1 = w.head(n1), w2 = w.tail(n2);
        Vec z2 = exact_ch ? Vec(lu_ch.solve(w2)) : Vec(ilu_ch.solve(w2));
        z2 *= alpha;
        Vec t = w1;
        if (sys.M_c.nonZeros()) t -= sys.M_c * z2;
        Vec z1 = exact_ns ? Vec(lu_ns.solve(t)) : Vec(ilu_ns.solve(t));
        Vec z(n1 + n2);
        z << z1, z2;
        return z;
    }
};

}  // namespace

FgmresResult solve_fgmres(const BlockSystem& sys, const PreconditionerConfig& pc) {
    const SpMat A = sys.full();
    const Vec b = sys.full_rhs();
    const int n = int(A.rows());
    BlockPrecond M(sys, pc);

    FgmresResult res;
    res.x = Vec::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    int total_it = 0;
    const int m = pc.gmres_restart;
    while (total_it < pc.gmres_maxit) {
        Vec r = b - A * res.x;
        double beta = r.norm();
        if (beta / bnorm < pc.gmres_tol) {
            res.converged = true;
            res.rel_residual = beta / bnorm;
            res.iterations = total_it;
            return res;
        }
        std::vector<Vec> V(1, r / beta), Z;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        Vec g = Vec::Zero(m + 1);
        g[0] = beta;
        std::vector<double> cs(m, 0.0), sn(m, 0.0);
        int k = 0;
        for (; k < m && total_it < pc.gmres_maxit; ++k, ++total_it) {
            Z.push_back(M.apply(V[k]));
            Vec w = A * Z[k];
            for (int i = 0; i <= k; ++i) {
                H(i, k) = w.dot(V[i]);
                w -= H(i, k) * V[i];
            }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 1e-14) V.push_back(w / H(k + 1, k));
            else V.push_back(Vec::Zero(n));
            // apply accumulated Givens rotations
            for (int i = 0; i < k; ++i) {
                const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = t;
            }
            const double d = std::hypot(H(k, k), H(k + 1, k));
            cs[k] = H(k, k) / d;
            sn[k] = H(k + 1, k) / d;
            H(k, k) = d;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) / bnorm < pc.gmres_tol) {
                ++k;
                ++total_it;
                break;
            }
        }
        // solve the small triangular system and update x
        Vec y = Vec::Zero(k);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int jj = i + 1; jj < k; ++jj) s -= H(i, jj) * y[jj];
            y[i] = s / H(i, i);
        }
        for (int i = 0; i < k; ++i) res.x += y[i] * Z[i];
        res.rel_residual = (b - A * res.x).norm() / bnorm;
        res.iterations = total_it;
        if (res.rel_residual < pc.gmres_tol) {
            res.converged = true;
            return res;
        }
    }
    return res;  // best iterate, converged == false
}

void write_matrix_market(const SpMat& A, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_matrix_market: cannot open " + path);
    f << "%%MatrixMarket matrix coordinate real general\n";
    f << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
    f << std::setprecision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            f << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
    if (!f) throw std::runtime_error("write_matrix_market: write failed for " + path);
}

}  // namespace nsch
