#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "nsch/bench.hpp"
#include "nsch/stability.hpp"

namespace fs = std::filesystem;
using namespace nsch;

namespace {

CouplingMode parse_mode(const std::string& s) {
    if (s == "explicit") return CouplingMode::Explicit;
    if (s == "s1") return CouplingMode::S1;
    if (s == "s2") return CouplingMode::S2;
    if (s == "implicit") return CouplingMode::Implicit;
    throw CLI::ValidationError("--mode", "unknown coupling mode '" + s + "'");
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 20260101;
    std::string profile = "desk";
    std::string mode = "explicit";
    double theta = 0.5;
    double tau = -1.0;

    KeyValueConfig load() const {
        KeyValueConfig cfg;
        if (!config_path.empty()) cfg = KeyValueConfig::parse_file(config_path);
        return cfg;
    }
    void echo(KeyValueConfig cfg) const {
        fs::create_directories(out_dir);
        cfg.set("run.profile", profile);
        cfg.set("run.seed", std::to_string(seed));
        cfg.write_file((fs::path(out_dir) / "resolved.cfg").string());
    }
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config_path, "key-value config file");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--profile", o.profile, "parameter profile")
        ->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--mode", o.mode, "coupling mode: explicit|s1|s2|implicit");
    sub->add_option("--theta", o.theta, "theta-scheme parameter");
    sub->add_option("--tau", o.tau, "time step");
}

std::vector<StabilityCase> sweep_cases(const CommonOpts& o, const KeyValueConfig& cfg) {
    std::vector<double> sigmas, gammas, epss, rhos, hr;
    if (o.profile == "paper") {
        sigmas = {1e2, 1e3, 1e4};
        gammas = {1e-5, 1e-6, 1e-7};
        epss = {0.08, 0.04, 0.02};
        rhos = {0.1, 1.0, 10.0};
        hr = {2.0, 1.0};
    } else {
        sigmas = {1e2, 1e3};
        gammas = {1e-5, 1e-6};
        epss = {0.08, 0.04};
        rhos = {1.0};
        hr = {2.0};
    }
    auto cases = factorial_cases(sigmas, gammas, epss, rhos, hr, parse_mode(o.mode), o.seed);
    for (auto& c : cases) c.omega = cfg.get_double("scheme.omega", 0.2);
    return cases;
}

int cmd_sweep(const CommonOpts& o) {
    KeyValueConfig cfg = o.load();
    o.echo(cfg);
    SweepOptions sw;
    sw.csv_path = (fs::path(o.out_dir) / "sweep.csv").string();
    sw.n_workers = cfg.get_int("run.workers", 1);
    auto records = run_sweep(sweep_cases(o, cfg), sw);
    int failed = 0;
    for (const auto& r : records)
        if (!r.error.empty()) ++failed;
    std::cout << "sweep: " << records.size() << " cases, " << failed << " failed, results in "
              << sw.csv_path << "\n";
    try {
        FitResult fit = fit_exponents(records);
        std::cout << "fitted law: tau_max ~ " << fit.alpha[0] << " * h^" << fit.alpha[1]
                  << " * eps^" << fit.alpha[2] << " * sigma^" << fit.alpha[3] << " * gamma^"
                  << fit.alpha[4] << " * rho^" << fit.alpha[5]
                  << "  (rms " << fit.residual_rms << ", n=" << fit.n_cases << ")\n";
    } catch (const RankDeficient& e) {
        std::cout << "fit skipped: " << e.what() << "\n";
    }
    return 0;
}

std::vector<StabilityRecord> read_sweep_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument(path + ": empty file");
    std::vector<StabilityRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) f.push_back(tok);
        if (f.size() < 12) throw std::invalid_argument(path + ": malformed row: " + line);
        StabilityRecord r;
        r.cs.sigma = std::stod(f[1]);
        r.cs.gamma = std::stod(f[2]);
        r.cs.eps = std::stod(f[3]);
        r.cs.h = std::stod(f[4]);
        r.h_actual = std::stod(f[4]);
        r.cs.rho = std::stod(f[5]);
        r.cs.nu = std::stod(f[6]);
        r.cs.seed = std::stoull(f[7]);
        r.cs.mode = parse_mode(f[8]);
        r.tau_max = std::stod(f[9]);
        r.capped = std::stoi(f[10]) != 0;
        records.push_back(r);
    }
    return records;
}

int cmd_fit(const std::string& in_csv) {
    FitResult fit = fit_exponents(read_sweep_csv(in_csv));
    std::cout << "alpha1 (prefactor) = " << fit.alpha[0] << "\n"
              << "alpha2 (h)         = " << fit.alpha[1] << "\n"
              << "alpha3 (eps)       = " << fit.alpha[2] << "\n"
              << "alpha4 (sigma)     = " << fit.alpha[3] << "\n"
              << "alpha5 (gamma)     = " << fit.alpha[4] << "\n"
              << "alpha6 (rho)       = " << fit.alpha[5] << "\n"
              << "residual_rms = " << fit.residual_rms << ", n_cases = " << fit.n_cases << "\n";
    std::cout << "csv: alpha1,alpha2,alpha3,alpha4,alpha5,alpha6,residual_rms,n_cases\n"
              << "csv: " << fit.alpha[0] << ',' << fit.alpha[1] << ',' << fit.alpha[2] << ','
              << fit.alpha[3] << ',' << fit.alpha[4] << ',' << fit.alpha[5] << ','
              << fit.residual_rms << ',' << fit.n_cases << "\n";
    return 0;
}

BubbleConfig bubble_config(const CommonOpts& o, const KeyValueConfig& cfg) {
    BubbleConfig bc;
    if (o.profile == "paper") {
        bc.eps = 0.02;
        bc.nx = 50;
        bc.ny = 100;
    }
    bc.eps = cfg.get_double("physical.eps", bc.eps);
    bc.gamma = cfg.get_double("physical.mobility", bc.gamma);
    bc.sigma = cfg.get_double("physical.sigma", bc.sigma);
    bc.g = cfg.get_double("physical.gravity", bc.g);
    bc.nx = cfg.get_int("grid.nx", bc.nx);
    bc.ny = cfg.get_int("grid.ny", bc.ny);
    bc.t_end = cfg.get_double("run.t_end", bc.t_end);
    bc.scheme.theta = o.theta;
    bc.scheme.coupling = parse_mode(o.mode);
    bc.scheme.tau = o.tau > 0 ? o.tau : cfg.get_double("scheme.tau", 0.01);
    bc.scheme.omega = cfg.get_double("scheme.omega", 0.2);
    return bc;
}

int cmd_bubble(const CommonOpts& o, bool roc) {
    KeyValueConfig cfg = o.load();
    o.echo(cfg);
    BubbleConfig bc = bubble_config(o, cfg);
    if (roc) {
        RocStudy st = bubble_roc_study(bc, {0.04, 0.02, 0.01, 0.005}, 0.0025);
        std::cout << "reference position (theta=0.5, tau=0.0025): " << st.reference_position
                  << "\n";
        for (size_t i = 0; i < st.taus.size(); ++i) {
            std::cout << "tau=" << st.taus[i] << " position=" << st.positions[i]
                      << " error=" << st.errors[i];
            if (i > 0) std::cout << " roc=" << st.roc[i - 1];
            std::cout << "\n";
        }
        return 0;
    }
    BenchmarkResult res = run_rising_bubble(bc);
    write_diagnostics_csv(res.traj, (fs::path(o.out_dir) / "diagnostics.csv").string());
    std::cout << "bubble: " << res.traj.rows.size() << " steps, final centroid ("
              << res.final_centroid_x << ", " << res.final_centroid_y << "), iterations "
              << res.total_iterations << ", mass drift " << res.mass_drift << "\n";
    if (!res.converged) throw NoConvergence("bubble run failed to converge");
    return 0;
}

int cmd_compare_modes(const CommonOpts& o) {
    KeyValueConfig cfg = o.load();
    o.echo(cfg);
    BubbleConfig bc = bubble_config(o, cfg);
    const std::vector<CouplingMode> modes{CouplingMode::Explicit, CouplingMode::S1,
                                          CouplingMode::S2, CouplingMode::Implicit};
    auto rows = run_mode_comparison(bc, modes, {1.0, 2.0, 4.0}, {1.0});
    std::cout << "mode,sigma_factor,converged,steps,total_iterations,wall_s,final_centroid_y\n";
    for (const auto& r : rows)
        std::cout << to_string(r.mode) << ',' << r.sigma_factor << ',' << (r.converged ? 1 : 0)
                  << ',' << r.steps << ',' << r.total_iterations << ',' << r.wall_seconds << ','
                  << r.final_centroid_y << "\n";
    return 0;
}

int cmd_taylor(const CommonOpts& o) {
    KeyValueConfig cfg = o.load();
    o.echo(cfg);
    TaylorConfig tc;
    tc.mode = parse_mode(o.mode);
    if (o.profile == "paper") {
        tc.eps = 0.015;
        tc.mobility = 3e-6;
        tc.ny = 66;
        tc.nx = 660;
    }
    if (tc.mode == CouplingMode::Implicit) {
        tc.use_max_extremum = true;
        tc.tau_ceiling = 0.03;
    }
    tc.eps = cfg.get_double("physical.eps", tc.eps);
    tc.mobility = cfg.get_double("physical.mobility", tc.mobility);
    tc.sigma = cfg.get_double("physical.sigma", tc.sigma);
    tc.max_steps = cfg.get_int("run.max_steps", tc.max_steps);
    tc.tau_ceiling = cfg.get_double("run.tau_ceiling", tc.tau_ceiling);
    if (o.tau > 0) tc.tau0 = o.tau;
    TaylorResult r = run_taylor_2d(tc);
    write_diagnostics_csv(r.bench.traj, (fs::path(o.out_dir) / "diagnostics.csv").string());
    std::cout << "taylor: " << r.bench.traj.rows.size() << " steps, stationary "
              << (r.bench.reached_stationary ? "yes" : "no") << ", dp " << r.final_dp << ", ub "
              << r.final_ub << ", flux residual " << r.bench.flux_residual << "\n";
    return 0;
}

int cmd_step(const CommonOpts& o) {
    StabilityCase cs;
    cs.mode = parse_mode(o.mode);
    cs.seed = o.seed;
    const double tau = o.tau > 0 ? o.tau : cfl_law_prediction(cs);
    ProbeOutcome out = probe_single_step(cs, tau);
    std::cout << "single step: tau=" << tau << " converged=" << (out.converged ? 1 : 0)
              << " iterations=" << out.iterations << "\n";
    return out.converged ? 0 : 3;
}

int cmd_spinodal(const CommonOpts& o) {
    KeyValueConfig cfg = o.load();
    o.echo(cfg);
    FieldSet final_state;
    auto energies = run_spinodal(cfg.get_int("grid.nx", 32), cfg.get_double("physical.eps", 0.05),
                                 cfg.get_double("physical.mobility", 1.0),
                                 o.tau > 0 ? o.tau : 1e-4, cfg.get_int("run.steps", 50), o.seed,
                                 &final_state);
    bool monotone = true;
    for (size_t k = 1; k < energies.size(); ++k)
        if (energies[k] > energies[k - 1] + 1e-12) monotone = false;
    std::cout << "spinodal: " << energies.size() << " steps, energy " << energies.front()
              << " -> " << energies.back() << ", non-increasing " << (monotone ? "yes" : "no")
              << "\n";
    write_vtk(final_state, GridSpec::unit(cfg.get_int("grid.nx", 32)),
              (fs::path(o.out_dir) / "spinodal.vtk").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffuse-interface two-phase flow laboratory"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string fit_in;
    bool bubble_roc = false;

    auto* sweep = app.add_subcommand("sweep", "flat-interface max-time-step sweep");
    add_common(sweep, o);
    auto* fit = app.add_subcommand("fit", "fit the power-law exponents from a sweep CSV");
    fit->add_option("--in", fit_in, "sweep CSV path")->required();
    auto* bubble = app.add_subcommand("bubble", "rising-bubble benchmark");
    add_common(bubble, o);
    bubble->add_flag("--roc", bubble_roc, "run the temporal-convergence study");
    auto* cmp = app.add_subcommand("compare-modes", "coupling-mode performance comparison");
    add_common(cmp, o);
    auto* taylor = app.add_subcommand("taylor", "2D Taylor-flow channel benchmark");
    add_common(taylor, o);
    auto* step = app.add_subcommand("step", "single-step solvability probe");
    add_common(step, o);
    auto* spinodal = app.add_subcommand("spinodal", "Cahn-Hilliard-only spinodal sanity run");
    add_common(spinodal, o);

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sweep->parsed()) return cmd_sweep(o);
        if (fit->parsed()) return cmd_fit(fit_in);
        if (bubble->parsed()) return cmd_bubble(o, bubble_roc);
        if (cmp->parsed()) return cmd_compare_modes(o);
        if (taylor->parsed()) return cmd_taylor(o);
        if (step->parsed()) return cmd_step(o);
        if (spinodal->parsed()) return cmd_spinodal(o);
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const NoConvergence& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return 3;
    } catch (const ProbeNeverConverged& e) {
        std::cerr << "probe never converged: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
