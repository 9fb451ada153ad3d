#include "nsch/stepper.hpp"

#include <cmath>

namespace nsch {

TimeIntegrator::TimeIntegrator(const GridSpec& g, const BoundaryConditionSet& bc,
                               const PhysicalParams& p, const SchemeConfig& cfg)
    : g_(g), bc_(bc), p_(p), cfg_(cfg) {
    g_.validate();
    bc_.validate();
    p_.validate();
}

StepReport TimeIntegrator::step(FieldSet& state) const {
    return cfg_.coupling == CouplingMode::Implicit ? step_fully_coupled(state)
                                                   : step_gauss_seidel(state);
}

namespace {

void unpack_scalar(const Vec& x, int offset, Array2D& f) {
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) f(i, j) = x[offset + j * f.nx + i];
}

constexpr double kDivergedResidual = 1e8;

}  // namespace

StepReport TimeIntegrator::step_gauss_seidel(FieldSet& state) const {
    SystemAssembler as(g_, bc_, p_, cfg_);
    const Layout& lay = as.layout();
    const StencilOps& ops = as.ops();
    const FieldSet sn = state;  // time level n
    FieldSet sk = state;        // current sub-iterate

    StepReport rep;
    for (int it = 1; it <= cfg_.max_iter; ++it) {
        rep.iterations = it;
        NsSystem ns = as.assemble_ns_block(sk, sn);
        Vec x;
        if (cfg_.defect_correction) {
            Vec xp(lay.n_ns());
            xp.head(lay.Nu + lay.Nv) = ops.pack_velocity(sk.u, sk.v);
            for (int j = 0; j < g_.ny; ++j)
                for (int i = 0; i < g_.nx; ++i) xp[lay.ip(i, j)] = sk.p(i, j);
            x = solve_defect_corrected(ns.A, ns.b, xp);
        } else {
            x = solve_direct(ns.A, ns.b);
        }
        Array2D u_new(g_.nx + 1, g_.ny), v_new(g_.nx, g_.ny + 1);
        ops.unpack_velocity(x.head(lay.Nu + lay.Nv), u_new, v_new);
        unpack_scalar(x, lay.Nu + lay.Nv, sk.p);

        ChSystem ch = as.assemble_ch_block(sk, sn, u_new, v_new);
        Vec y = solve_direct(ch.A, ch.b);
        Array2D c_new(g_.nx, g_.ny);
        unpack_scalar(y, 0, c_new);
        unpack_scalar(y, lay.Np, sk.mu);

        rep.residual = max_abs_diff(c_new, sk.c);
        sk.u = u_new;
        sk.v = v_new;
        sk.c = c_new;
        if (!std::isfinite(rep.residual) || rep.residual > kDivergedResidual || !sk.finite()) {
            state = sk;
            return rep;  // diverged, converged stays false
        }
        if (rep.residual < cfg_.tol) {
            rep.converged = true;
            break;
        }
    }
    state = sk;
    return rep;
}

StepReport TimeIntegrator::step_fully_coupled(FieldSet& state) const {
    SchemeConfig cfg = cfg_;
    cfg.coupling = CouplingMode::Implicit;
    SystemAssembler as(g_, bc_, p_, cfg);
    const Layout& lay = as.layout();
    const StencilOps& ops = as.ops();
    const FieldSet sn = state;
    FieldSet sk = state;

    StepReport rep;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        rep.iterations = it;
        BlockSystem sys = as.assemble_coupled(sk, sn);
        Vec x;
        if (coupled_direct_) {
            x = solve_direct(sys.full(), sys.full_rhs());
        } else {
            FgmresResult r = solve_fgmres(sys, pc_);
            rep.linear_iterations += r.iterations;
            if (!r.converged) x = solve_direct(sys.full(), sys.full_rhs());
            else x = std::move(r.x);
        }
        Array2D u_new(g_.nx + 1, g_.ny), v_new(g_.nx, g_.ny + 1);
        ops.unpack_velocity(x.head(lay.Nu + lay.Nv), u_new, v_new);
        unpack_scalar(x, lay.Nu + lay.Nv, sk.p);
        Array2D c_new(g_.nx, g_.ny);
        unpack_scalar(x, lay.n_ns(), c_new);
        unpack_scalar(x, lay.n_ns() + lay.Np, sk.mu);

        rep.residual = max_abs_diff(c_new, sk.c);
        sk.u = u_new;
        sk.v = v_new;
        sk.c = c_new;
        if (!std::isfinite(rep.residual) || rep.residual > kDivergedResidual || !sk.finite()) {
            state = sk;
            return rep;
        }
        if (rep.residual < cfg.tol) {
            rep.converged = true;
            break;
        }
    }
    state = sk;
    return rep;
}

StepReport TimeIntegrator::step_semi_implicit_euler(FieldSet& state) const {
    TimeIntegrator ti(*this);
    ti.cfg_.theta = 1.0;
    ti.cfg_.max_iter = 1;
    if (ti.cfg_.coupling == CouplingMode::Implicit) ti.cfg_.coupling = CouplingMode::Explicit;
    StepReport rep = ti.step_gauss_seidel(state);
    rep.converged = state.finite();  // single sweep, convergence by definition
    return rep;
}

double adaptive_timestep(const Array2D& c_new, const Array2D& c_old, const GridSpec& g,
                         double tau_prev, const TimestepPolicy& pol) {
    const double h = g.h;
    double ext = pol.use_max ? 0.0 : std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double dc = std::abs(c_new(i, j) - c_old(i, j));
            if (dc < pol.dc_floor) continue;
            const double gx =
                (c_new(std::min(i + 1, g.nx - 1), j) - c_new(std::max(i - 1, 0), j)) / (2 * h);
            const double gy =
                (c_new(i, std::min(j + 1, g.ny - 1)) - c_new(i, std::max(j - 1, 0))) / (2 * h);
            const double gn = std::sqrt(gx * gx + gy * gy);
            if (gn < pol.grad_floor) continue;
            const double r = h * gn / dc;
            ext = pol.use_max ? std::max(ext, r) : std::min(ext, r);
            any = true;
        }
    }
    double tau = any ? 0.5 * tau_prev * ext : tau_prev * pol.stagnation_factor;
    tau = std::min(tau, pol.growth_limit * tau_prev);
    tau = std::min(tau, pol.tau_ceiling);
    return tau;
}

Trajectory run_transient(FieldSet& state, const GridSpec& g, const BoundaryConditionSet& bc,
                         const PhysicalParams& p, SchemeConfig cfg, const TransientOptions& opt) {
    Trajectory traj;
    double t = 0.0;
    double tau = cfg.tau;
    for (int n = 0; n < opt.max_steps && t < opt.t_end - 1e-14; ++n) {
        if (opt.callback) opt.callback(n, t, state, cfg);
        if (opt.moving_frame) {
            try {
                auto ub = bubble_velocity(state.u, state.v, state.c, g);
                cfg.frame_u = ub[0];
                cfg.frame_v = ub[1];
            } catch (const DegenerateWeight&) {
                cfg.frame_u = cfg.frame_v = 0.0;
            }
        }
        double step_tau = std::min(tau, opt.t_end - t);
        const FieldSet saved = state;
        StepReport rep;
        int tries = 0;
        for (;;) {
            cfg.tau = step_tau;
            TimeIntegrator ti(g, bc, p, cfg);
            ti.set_coupled_direct(opt.coupled_direct);
            rep = ti.step(state);
            if (rep.converged && state.finite()) break;
            if (++tries > opt.max_retries)
                throw NoConvergence("run_transient: step failed after " +
                                    std::to_string(opt.max_retries) + " retries at t=" +
                                    std::to_string(t));
            state = saved;
            step_tau *= 0.5;
        }
        t += step_tau;
        tau = step_tau;

        StepRow row;
        row.t = t;
        row.tau = step_tau;
        row.iterations = rep.iterations;
        row.dc_max = max_abs_diff(state.c, saved.c);
        row.mass = total_mass(state.c, g);
        try {
            row.centroid_x = centroid_x(state.c, g);
            row.centroid_y = centroid_y(state.c, g);
            auto ub = bubble_velocity(state.u, state.v, state.c, g);
            row.ub_x = ub[0];
            row.ub_y = ub[1];
        } catch (const DegenerateWeight&) {
            row.centroid_x = row.centroid_y = row.ub_x = row.ub_y =
                std::numeric_limits<double>::quiet_NaN();
        }
        traj.rows.push_back(row);
        traj.t_end = t;

        if (opt.stationary_tol > 0.0 && row.dc_max / step_tau < opt.stationary_tol) {
            traj.reached_stationary = true;
            break;
        }
        if (opt.adaptive) tau = adaptive_timestep(state.c, saved.c, g, step_tau, opt.policy);
    }
    return traj;
}

}  // namespace nsch
