#include "nsch/stability.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace nsch {

void StabilityCase::validate() const {
    if (!(sigma > 0 && gamma > 0 && eps > 0 && h > 0 && rho > 0 && nu > 0))
        throw std::invalid_argument("StabilityCase: all parameters must be positive");
}

PhysicalParams StabilityCase::physical() const {
    return PhysicalParams::make(rho, rho, nu, nu, sigma, eps, gamma);
}

double cfl_law_prediction(const StabilityCase& cs) {
    return 7.0 * cs.eps * std::pow(cs.sigma, -1.0 / 3.0) * std::pow(cs.gamma, 1.0 / 3.0) *
           std::pow(cs.rho, 2.0 / 3.0);
}

GridSpec case_grid(const StabilityCase& cs) {
    int n = int(std::lround(1.0 / cs.h));
    n = std::max(n, 4);
    return GridSpec::unit(n);
}

FieldSet make_perturbed_interface(const GridSpec& g, double eps, std::uint64_t seed,
                                  double amplitude) {
    FieldSet f(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-amplitude, amplitude);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.c(i, j) = std::tanh((g.yc(j) - 0.5) / (std::sqrt(2.0) * eps)) +
                        (amplitude > 0.0 ? noise(rng) : 0.0);
    StencilOps ops(g, BoundaryConditionSet::box());
    PhysicalParams p;
    p.eps = eps;
    p.sigma = 1.0;
    p.sigma_tilde = 3.0 / (2.0 * std::sqrt(2.0));
    f.mu = ops.chemical_potential(f.c, p);
    // mu above used sigma=1; the probe recomputes it with the case sigma
    return f;
}

ProbeOutcome probe_single_step(const StabilityCase& cs, double tau) {
    cs.validate();
    const GridSpec g = case_grid(cs);
    const BoundaryConditionSet bc = BoundaryConditionSet::box();
    const PhysicalParams p = cs.physical();

    FieldSet state = make_perturbed_interface(g, cs.eps, cs.seed);
    StencilOps ops(g, bc);
    state.mu = ops.chemical_potential(state.c, p);

    SchemeConfig cfg;
    cfg.theta = 0.5;
    cfg.coupling = cs.mode;
    cfg.omega = cs.omega;
    cfg.tau = tau;

    ProbeOutcome out;
    out.tau = tau;
    try {
        TimeIntegrator ti(g, bc, p, cfg);
        ti.set_coupled_direct(true);
        StepReport rep = ti.step(state);
        out.converged = rep.converged && state.finite();
        out.iterations = rep.iterations;
    } catch (const SolverFailure&) {
        out.converged = false;
        out.solver_breakdown = true;
    }
    return out;
}

StabilityRecord find_max_timestep(const StabilityCase& cs, double tau0, double tau_cap) {
    cs.validate();
    const double pred = cfl_law_prediction(cs);
    if (tau0 <= 0.0) tau0 = pred / 100.0;
    if (tau_cap <= 0.0) tau_cap = 1e6 * pred;

    StabilityRecord rec;
    rec.cs = cs;
    rec.h_actual = case_grid(cs).h;

    ProbeOutcome first = probe_single_step(cs, tau0);
    rec.probes.push_back(first);
    if (!first.converged) {
        // guard against a mis-scaled starting guess before giving up
        double t = tau0;
        bool ok = false;
        for (int k = 0; k < 20; ++k) {
            t *= 0.5;
            ProbeOutcome o = probe_single_step(cs, t);
            rec.probes.push_back(o);
            if (o.converged) {
                ok = true;
                tau0 = t;
                break;
            }
        }
        if (!ok) throw ProbeNeverConverged("find_max_timestep: no convergent tau down to " +
                                           std::to_string(t));
    }

    double tau_ok = tau0;
    double tau = tau0 * 1.1;
    while (true) {
        if (tau > tau_cap) {
            rec.capped = true;
            break;
        }
        ProbeOutcome o = probe_single_step(cs, tau);
        rec.probes.push_back(o);
        if (!o.converged) break;
        tau_ok = tau;
        tau *= 1.1;
    }
    rec.tau_max = tau_ok;
    return rec;
}

std::string sweep_csv_header() {
    return "case_id,sigma,gamma,eps,h,rho,nu,seed,coupling_mode,tau_max,capped,probes_run";
}

std::string sweep_csv_row(int case_id, const StabilityRecord& r) {
    std::ostringstream os;
    os.precision(17);
    os << case_id << ',' << r.cs.sigma << ',' << r.cs.gamma << ',' << r.cs.eps << ','
       << r.h_actual << ',' << r.cs.rho << ',' << r.cs.nu << ',' << r.cs.seed << ','
       << to_string(r.cs.mode) << ',' << r.tau_max << ',' << (r.capped ? 1 : 0) << ','
       << r.probes.size();
    return os.str();
}

std::vector<StabilityRecord> run_sweep(const std::vector<StabilityCase>& cases,
                                       const SweepOptions& opt) {
    if (cases.empty()) throw std::invalid_argument("run_sweep: empty case list");
    const int n = int(cases.size());
    std::vector<StabilityRecord> out(n);
    std::vector<char> done(n, 0);

    std::ofstream csv;
    if (!opt.csv_path.empty()) {
        csv.open(opt.csv_path);
        if (!csv) throw std::runtime_error("run_sweep: cannot open " + opt.csv_path);
        csv << sweep_csv_header() << '\n' << std::flush;
    }

    std::mutex m;
    int next_case = 0;
    int next_write = 0;

    auto worker = [&]() {
        for (;;) {
            int k;
            {
                std::lock_guard<std::mutex> lk(m);
                if (next_case >= n) return;
                k = next_case++;
            }
            StabilityRecord rec;
            try {
                rec = find_max_timestep(cases[k], opt.tau0, opt.tau_cap);
            } catch (const std::exception& e) {
                rec.cs = cases[k];
                rec.h_actual = case_grid(cases[k]).h;
                rec.error = e.what();
            }
            {
                std::lock_guard<std::mutex> lk(m);
                out[k] = std::move(rec);
                done[k] = 1;
                // flush completed records in case order for byte-stable CSVs
                while (next_write < n && done[next_write]) {
                    if (csv.is_open())
                        csv << sweep_csv_row(next_write, out[next_write]) << '\n' << std::flush;
                    ++next_write;
                }
            }
        }
    };

    const int nw = std::max(1, opt.n_workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

std::vector<StabilityCase> factorial_cases(const std::vector<double>& sigmas,
                                           const std::vector<double>& gammas,
                                           const std::vector<double>& epss,
                                           const std::vector<double>& rhos,
                                           const std::vector<double>& h_over_eps,
                                           CouplingMode mode, std::uint64_t seed) {
    std::vector<StabilityCase> cs;
    for (double s : sigmas)
        for (double ga : gammas)
            for (double e : epss)
                for (double r : rhos)
                    for (double he : h_over_eps) {
                        StabilityCase c;
                        c.sigma = s;
                        c.gamma = ga;
                        c.eps = e;
                        c.h = he * e;
                        c.rho = r;
                        c.mode = mode;
                        c.seed = seed;
                        cs.push_back(c);
                    }
    return cs;
}

FitResult fit_exponents(const std::vector<StabilityRecord>& records) {
    std::vector<const StabilityRecord*> ok;
    for (const auto& r : records)
        if (r.error.empty() && !r.capped && r.tau_max > 0.0) ok.push_back(&r);
    const int n = int(ok.size());
    if (n < 7) throw RankDeficient("fit_exponents: need >= 7 usable records, got " +
                                   std::to_string(n));

    // full design: [1, ln h, ln eps, ln sigma, ln gamma, ln rho]
    Eigen::MatrixXd X(n, 6);
    Vec y(n);
    for (int r = 0; r < n; ++r) {
        const auto& c = ok[r]->cs;
        X(r, 0) = 1.0;
        X(r, 1) = std::log(ok[r]->h_actual);
        X(r, 2) = std::log(c.eps);
        X(r, 3) = std::log(c.sigma);
        X(r, 4) = std::log(c.gamma);
        X(r, 5) = std::log(c.rho);
        y[r] = std::log(ok[r]->tau_max);
    }

    // drop constant parameter columns; their exponents are undetermined
    std::vector<int> keep{0};
    for (int j = 1; j < 6; ++j) {
        const double span = X.col(j).maxCoeff() - X.col(j).minCoeff();
        if (span > 1e-12) keep.push_back(j);
    }
    if (keep.size() < 2)
        throw RankDeficient("fit_exponents: no parameter varies across the records");

    Eigen::MatrixXd Xk(n, keep.size());
    for (size_t j = 0; j < keep.size(); ++j) Xk.col(j) = X.col(keep[j]);
    Vec beta = Xk.colPivHouseholderQr().solve(y);

    FitResult fit;
    fit.n_cases = n;
    for (size_t j = 0; j < keep.size(); ++j) {
        fit.alpha[keep[j]] = beta[j];
        fit.determined[keep[j]] = true;
    }
    fit.alpha[0] = std::exp(fit.alpha[0]);
    for (int j = 1; j < 6; ++j)
        if (!fit.determined[j]) fit.alpha[j] = std::numeric_limits<double>::quiet_NaN();
    fit.residual_rms = std::sqrt((Xk * beta - y).squaredNorm() / n);
    return fit;
}

GainStats stabilizer_gain(const std::vector<StabilityRecord>& base,
                          const std::vector<StabilityRecord>& stabilized) {
    if (base.size() != stabilized.size())
        throw std::invalid_argument("stabilizer_gain: record lists differ in length");
    GainStats g;
    double logsum = 0.0;
    g.min = std::numeric_limits<double>::infinity();
    g.max = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < base.size(); ++k) {
        if (!base[k].error.empty() || !stabilized[k].error.empty()) continue;
        if (!(base[k].tau_max > 0.0)) continue;
        const double r = stabilized[k].tau_max / base[k].tau_max;
        g.min = std::min(g.min, r);
        g.max = std::max(g.max, r);
        logsum += std::log(r);
        ++g.n;
    }
    if (g.n == 0) throw std::invalid_argument("stabilizer_gain: no usable record pairs");
    g.geomean = std::exp(logsum / g.n);
    return g;
}

}  // namespace nsch
