#include "nsch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace nsch {

namespace {
double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

std::vector<double> roc_table(const std::vector<double>& positions, const std::vector<double>& taus,
                              double reference_position) {
    if (positions.size() != taus.size())
        throw std::invalid_argument("roc_table: positions/taus size mismatch");
    std::vector<double> err(taus.size()), roc;
    for (size_t i = 0; i < taus.size(); ++i) err[i] = std::abs(positions[i] - reference_position);
    for (size_t i = 0; i + 1 < taus.size(); ++i) {
        if (!(taus[i] > taus[i + 1]))
            throw std::invalid_argument("roc_table: taus must be strictly decreasing");
        roc.push_back(std::log(err[i] / err[i + 1]) / std::log(taus[i] / taus[i + 1]));
    }
    return roc;
}

// ---------------------------------------------------------------------------
// rising bubble

GridSpec BubbleConfig::grid() const { return GridSpec::make(nx, ny, 0.0, 1.0, 0.0, 2.0); }

PhysicalParams BubbleConfig::physical() const {
    PhysicalParams p = PhysicalParams::make(rho1, rho2, nu1, nu2, sigma, eps, gamma);
    p.body_force = gravity_force(rho1, rho2, g);
    return p;
}

FieldSet BubbleConfig::initial_state() const {
    const GridSpec g2 = grid();
    FieldSet f(g2);
    for (int j = 0; j < g2.ny; ++j)
        for (int i = 0; i < g2.nx; ++i) {
            const double d = std::hypot(g2.xc(i) - cx, g2.yc(j) - cy) - radius;
            f.c(i, j) = std::tanh(d / (std::sqrt(2.0) * eps));
        }
    StencilOps ops(g2, BoundaryConditionSet::box());
    f.mu = ops.chemical_potential(f.c, physical());
    return f;
}

BenchmarkResult run_rising_bubble(const BubbleConfig& cfg) {
    const GridSpec g2 = cfg.grid();
    const BoundaryConditionSet bc = BoundaryConditionSet::box();
    const PhysicalParams p = cfg.physical();
    FieldSet state = cfg.initial_state();
    const double mass0 = total_mass(state.c, g2);

    TransientOptions opt;
    opt.t_end = cfg.t_end;
    opt.coupled_direct = true;

    BenchmarkResult res;
    const double t0 = now_seconds();
    try {
        res.traj = run_transient(state, g2, bc, p, cfg.scheme, opt);
    } catch (const NoConvergence&) {
        res.converged = false;
    }
    res.wall_seconds = now_seconds() - t0;
    for (const auto& r : res.traj.rows) res.total_iterations += r.iterations;
    res.final_centroid_x = centroid_x(state.c, g2);
    res.final_centroid_y = centroid_y(state.c, g2);
    res.mass_drift = std::abs(total_mass(state.c, g2) - mass0);
    res.reached_stationary = res.traj.reached_stationary;
    return res;
}

RocStudy bubble_roc_study(BubbleConfig cfg, const std::vector<double>& taus, double tau_ref) {
    RocStudy st;
    st.taus = taus;

    BubbleConfig ref = cfg;
    ref.scheme.theta = 0.5;
    ref.scheme.tau = tau_ref;
    st.reference_position = run_rising_bubble(ref).final_centroid_y;

    for (double tau : taus) {
        BubbleConfig run = cfg;
        run.scheme.tau = tau;
        st.positions.push_back(run_rising_bubble(run).final_centroid_y);
    }
    for (double pos : st.positions) st.errors.push_back(std::abs(pos - st.reference_position));
    st.roc = roc_table(st.positions, st.taus, st.reference_position);
    return st;
}

std::vector<ModeRun> run_mode_comparison(const BubbleConfig& base,
                                         const std::vector<CouplingMode>& modes,
                                         const std::vector<double>& sigma_factors,
                                         const std::vector<double>& mobility_factors) {
    std::vector<ModeRun> out;
    for (double sf : sigma_factors)
        for (double mf : mobility_factors)
            for (CouplingMode mode : modes) {
                BubbleConfig cfg = base;
                cfg.sigma *= sf;
                cfg.gamma *= mf;
                cfg.scheme.coupling = mode;
                ModeRun row;
                row.mode = mode;
                row.sigma_factor = sf;
                row.mobility_factor = mf;
                const GridSpec g2 = cfg.grid();
                const PhysicalParams p = cfg.physical();
                FieldSet state = cfg.initial_state();
                SchemeConfig sc = cfg.scheme;
                TimeIntegrator ti(g2, BoundaryConditionSet::box(), p, sc);
                ti.set_coupled_direct(true);
                const double t0 = now_seconds();
                double t = 0.0;
                row.converged = true;
                while (t < cfg.t_end - 1e-14) {
                    ti.config().tau = std::min(sc.tau, cfg.t_end - t);
                    StepReport rep = ti.step(state);
                    row.total_iterations += rep.iterations;
                    ++row.steps;
                    if (!rep.converged || !state.finite()) {
                        row.converged = false;  // failure is data here: no retries
                        break;
                    }
                    t += ti.config().tau;
                }
                row.wall_seconds = now_seconds() - t0;
                if (state.c.finite()) {
                    try {
                        row.final_centroid_y = centroid_y(state.c, g2);
                    } catch (const DegenerateWeight&) {
                        row.final_centroid_y = std::numeric_limits<double>::quiet_NaN();
                    }
                } else {
                    row.final_centroid_y = std::numeric_limits<double>::quiet_NaN();
                }
                out.push_back(row);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Taylor flow

GridSpec TaylorConfig::grid() const { return GridSpec::make(nx, ny, 0.0, 10.0, 0.0, 1.0); }

PhysicalParams TaylorConfig::physical() const {
    return PhysicalParams::make(rho, rho, nu, nu, sigma, eps, mobility);
}

FieldSet TaylorConfig::initial_state() const {
    const GridSpec g2 = grid();
    FieldSet f(g2);
    // capsule of total length bubble_length centered in the channel
    const double yc = 0.5;
    const double x0 = 5.0 - (bubble_length / 2.0 - bubble_radius);
    const double x1 = 5.0 + (bubble_length / 2.0 - bubble_radius);
    for (int j = 0; j < g2.ny; ++j)
        for (int i = 0; i < g2.nx; ++i) {
            const double x = g2.xc(i), y = g2.yc(j);
            const double px = std::clamp(x, x0, x1);
            const double d = std::hypot(x - px, y - yc) - bubble_radius;
            f.c(i, j) = std::tanh(d / (std::sqrt(2.0) * eps));
        }
    if (poiseuille_init) {
        for (int j = 0; j < g2.ny; ++j) {
            const double yb = g2.yc(j);  // u_mean = u_target across the channel
            const double up = 6.0 * u_target * yb * (1.0 - yb);
            for (int i = 0; i <= g2.nx; ++i) f.u(i, j) = up;
        }
    }
    StencilOps ops(g2, BoundaryConditionSet::channel(0.0, 0.0));
    f.mu = ops.chemical_potential(f.c, physical());
    return f;
}

TaylorResult run_taylor_2d(const TaylorConfig& cfg) {
    const GridSpec g2 = cfg.grid();
    const PhysicalParams p = cfg.physical();
    BoundaryConditionSet bc = BoundaryConditionSet::channel(cfg.dp0, 0.0);
    FieldSet state = cfg.initial_state();

    SchemeConfig sc;
    sc.theta = 1.0;
    sc.coupling = cfg.mode;
    sc.omega = cfg.omega;
    sc.max_iter = 1;  // single sub-iteration per step in every mode
    sc.tau = cfg.tau0;

    TimestepPolicy pol;
    pol.use_max = cfg.use_max_extremum;
    pol.grad_floor = 1e-14 / cfg.eps;
    if (cfg.tau_ceiling > 0.0) pol.tau_ceiling = cfg.tau_ceiling;

    TaylorResult res;
    res.bench.converged = true;
    const double t0_wall = now_seconds();
    double t = 0.0, tau = cfg.tau0, dp = cfg.dp0;
    double ub_x = cfg.u_target;

    auto flux_residual = [&]() {
        double qin = 0.0, qout = 0.0;
        for (int j = 0; j < g2.ny; ++j) {
            qin += state.u(0, j) * g2.h;
            qout += state.u(g2.nx, j) * g2.h;
        }
        return std::abs(qin - qout);
    };

    for (int n = 0; n < cfg.max_steps; ++n) {
        if (n > 0 && n % cfg.controller_interval == 0 && std::isfinite(ub_x) &&
            std::abs(ub_x) > 1e-12) {
            dp *= std::clamp(cfg.u_target / ub_x, 0.5, 2.0);
            bc.left.pressure = dp;
        }
        try {
            auto ub = bubble_velocity(state.u, state.v, state.c, g2);
            const double w = (n == 0) ? 1.0 : cfg.frame_relax;
            sc.frame_u += w * (ub[0] - sc.frame_u);
            sc.frame_v = 0.0;
        } catch (const DegenerateWeight&) {
            sc.frame_u = sc.frame_v = 0.0;
        }

        const FieldSet saved = state;
        int tries = 0;
        StepReport rep;
        for (;;) {
            sc.tau = tau;
            TimeIntegrator ti(g2, bc, p, sc);
            ti.set_coupled_direct(true);
            bool ok = true;
            try {
                rep = cfg.mode == CouplingMode::Implicit ? ti.step_fully_coupled(state)
                                                         : ti.step_semi_implicit_euler(state);
            } catch (const SolverFailure&) {
                ok = false;
            }
            if (ok && state.finite() && state.c.max_abs() < 10.0) break;
            state = saved;
            tau *= 0.5;
            if (++tries > 40 || tau < 1e-14) {
                res.bench.converged = false;
                res.bench.wall_seconds = now_seconds() - t0_wall;
                return res;
            }
        }
        t += tau;

        StepRow row;
        row.t = t;
        row.tau = tau;
        row.iterations = std::max(1, rep.iterations);
        row.dc_max = max_abs_diff(state.c, saved.c);
        row.mass = total_mass(state.c, g2);
        try {
            row.centroid_x = centroid_x(state.c, g2);
            row.centroid_y = centroid_y(state.c, g2);
            auto ub = bubble_velocity(state.u, state.v, state.c, g2);
            row.ub_x = ub[0];
            row.ub_y = ub[1];
        } catch (const DegenerateWeight&) {
            row.centroid_x = row.centroid_y = row.ub_x = row.ub_y =
                std::numeric_limits<double>::quiet_NaN();
        }
        ub_x = row.ub_x;
        res.bench.traj.rows.push_back(row);
        res.bench.traj.t_end = t;
        res.dp_trace.push_back(dp);
        res.bench.total_iterations += row.iterations;
        res.bench.flux_residual = std::max(res.bench.flux_residual, flux_residual());

        if (row.dc_max / tau < cfg.stationary_tol) {
            res.bench.traj.reached_stationary = true;
            break;
        }
        tau = adaptive_timestep(state.c, saved.c, g2, tau, pol);
    }
    res.bench.wall_seconds = now_seconds() - t0_wall;
    res.bench.reached_stationary = res.bench.traj.reached_stationary;
    res.final_dp = dp;
    res.final_ub = ub_x;
    if (!res.bench.traj.rows.empty()) {
        res.bench.final_centroid_x = res.bench.traj.rows.back().centroid_x;
        res.bench.final_centroid_y = res.bench.traj.rows.back().centroid_y;
    }
    return res;
}

// ---------------------------------------------------------------------------
// spinodal decomposition (CH only)

std::vector<double> run_spinodal(int n, double eps, double mobility, double tau, int steps,
                                 std::uint64_t seed, FieldSet* out) {
    const GridSpec g = GridSpec::unit(n);
    const BoundaryConditionSet bc = BoundaryConditionSet::box();
    const PhysicalParams p = PhysicalParams::make(1.0, 1.0, 1.0, 1.0, 1.0, eps, mobility);
    SchemeConfig sc;
    sc.theta = 1.0;  // gradient-flow steps: backward Euler keeps energy monotone

    FieldSet f(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f.c(i, j) = noise(rng);
    StencilOps ops(g, bc);
    f.mu = ops.chemical_potential(f.c, p);

    SystemAssembler as(g, bc, p, sc);
    const Layout& lay = as.layout();
    const Array2D zero_u(g.nx + 1, g.ny), zero_v(g.nx, g.ny + 1);

    std::vector<double> energies;
    for (int s = 0; s < steps; ++s) {
        FieldSet sn = f;
        // fix-point loop on the CH system alone (velocity stays zero)
        for (int it = 0; it < sc.max_iter; ++it) {
            SchemeConfig sct = sc;
            sct.tau = tau;
            SystemAssembler ast(g, bc, p, sct);
            ChSystem sys = ast.assemble_ch_block(f, sn, zero_u, zero_v);
            Vec y = solve_direct(sys.A, sys.b);
            Array2D c_new(g.nx, g.ny);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    c_new(i, j) = y[lay.ic(i, j)];
                    f.mu(i, j) = y[lay.imu(i, j)];
                }
            const double res = max_abs_diff(c_new, f.c);
            f.c = c_new;
            if (res < sc.tol) break;
        }
        energies.push_back(gl_energy(f.c, g, p));
    }
    if (out) *out = f;
    return energies;
}

// ---------------------------------------------------------------------------
// file output

namespace {

/// Cell scalar interpolated to grid node (i,j), i in [0,nx], j in [0,ny].
double node_value(const Array2D& c, const GridSpec& g, int i, int j) {
    const int iw = std::max(0, i - 1), ie = std::min(g.nx - 1, i);
    const int js = std::max(0, j - 1), jn = std::min(g.ny - 1, j);
    return 0.25 * (c(iw, js) + c(ie, js) + c(iw, jn) + c(ie, jn));
}

}  // namespace

void write_vtk(const FieldSet& f, const GridSpec& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_vtk: cannot open " + path);
    os.precision(17);
    const int npx = g.nx + 1, npy = g.ny + 1;
    os << "# vtk DataFile Version 3.0\n";
    os << "two-phase flow snapshot\n";
    os << "ASCII\n";
    os << "DATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << npx << " " << npy << " 1\n";
    os << "ORIGIN " << g.x_min << " " << g.y_min << " 0\n";
    os << "SPACING " << g.h << " " << g.h << " " << g.h << "\n";
    os << "POINT_DATA " << npx * npy << "\n";

    auto scalars = [&](const char* name, const Array2D& c) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int j = 0; j < npy; ++j)
            for (int i = 0; i < npx; ++i) os << node_value(c, g, i, j) << "\n";
    };
    scalars("c", f.c);
    scalars("p", f.p);
    scalars("mu", f.mu);

    os << "VECTORS u double\n";
    for (int j = 0; j < npy; ++j)
        for (int i = 0; i < npx; ++i) {
            const int js = std::max(0, j - 1), jn = std::min(g.ny - 1, j);
            const double ux = 0.5 * (f.u(i, js) + f.u(i, jn));
            const int iw = std::max(0, i - 1), ie = std::min(g.nx - 1, i);
            const double vy = 0.5 * (f.v(iw, j) + f.v(ie, j));
            os << ux << " " << vy << " 0\n";
        }
    if (!os) throw std::runtime_error("write_vtk: write failed for " + path);
}

std::map<std::string, std::vector<double>> read_vtk_point_data(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_vtk_point_data: cannot open " + path);
    std::map<std::string, std::vector<double>> out;
    std::string line;
    long n_points = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "POINT_DATA") {
            ls >> n_points;
        } else if (tok == "SCALARS") {
            std::string name;
            ls >> name;
            std::getline(is, line);  // LOOKUP_TABLE
            auto& vals = out[name];
            for (long k = 0; k < n_points; ++k) {
                double v;
                is >> v;
                vals.push_back(v);
            }
        } else if (tok == "VECTORS") {
            std::string name;
            ls >> name;
            auto& vals = out[name];
            for (long k = 0; k < 3 * n_points; ++k) {
                double v;
                is >> v;
                vals.push_back(v);
            }
        }
    }
    return out;
}

void write_diagnostics_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_diagnostics_csv: cannot open " + path);
    os.precision(17);
    os << "t,tau,iterations,centroid_x,centroid_y,ub_x,ub_y,dc_max,mass\n";
    for (const auto& r : traj.rows)
        os << r.t << ',' << r.tau << ',' << r.iterations << ',' << r.centroid_x << ','
           << r.centroid_y << ',' << r.ub_x << ',' << r.ub_y << ',' << r.dc_max << ',' << r.mass
           << '\n';
}

// ---------------------------------------------------------------------------
// config files

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        cfg.kv_[section.empty() ? key : section + "." + key] = val;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str());
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stod(it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stoi(it->second);
}

void KeyValueConfig::set_double(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    kv_[key] = os.str();
}

std::string KeyValueConfig::to_string() const {
    std::ostringstream os;
    std::string section;
    bool first = true;
    for (const auto& [key, val] : kv_) {
        const size_t dot = key.find('.');
        const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        if (sec != section || first) {
            if (!first) os << "\n";
            if (!sec.empty()) os << "[" << sec << "]\n";
            section = sec;
            first = false;
        }
        os << name << " = " << val << "\n";
    }
    return os.str();
}

void KeyValueConfig::write_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("config: cannot open " + path + " for writing");
    os << to_string();
    if (!os) throw std::runtime_error("config: write failed for " + path);
}

}  // namespace nsch
