#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsch/stepper.hpp"

namespace nsch {

/// One point of the flat-interface stability study.
struct StabilityCase {
    double sigma = 1000.0;
    double gamma = 1e-5;  // mobility
    double eps = 0.04;
    double h = 0.04;
    double rho = 1.0;
    double nu = 0.01;
    std::uint64_t seed = 20260101;
    CouplingMode mode = CouplingMode::Explicit;
    double omega = 0.2;

    void validate() const;
    PhysicalParams physical() const;
};

/// tau_max ~ 7.0 eps sigma^-1/3 gamma^1/3 rho^2/3 (the fitted, rounded law).
double cfl_law_prediction(const StabilityCase& cs);

/// Unit square with nx = round(1/h) cells per side; the realized spacing
/// 1/nx is what enters the exponent fit.
GridSpec case_grid(const StabilityCase& cs);

/// c = tanh((y-0.5)/(sqrt(2) eps)) plus i.i.d. uniform noise in [-amp, amp]
/// per cell (row-major draw order), u = v = p = 0, mu consistent with c.
FieldSet make_perturbed_interface(const GridSpec& g, double eps, std::uint64_t seed,
                                  double amplitude = 1e-3);

struct ProbeOutcome {
    double tau = 0.0;
    bool converged = false;
    int iterations = 0;
    bool solver_breakdown = false;  // linear solver failed (vs fix-point stall)
};

/// One Crank-Nicolson step from the seeded perturbed interface at the given
/// tau; failure (fix-point stall or solver breakdown) is data, not an error.
ProbeOutcome probe_single_step(const StabilityCase& cs, double tau);

struct StabilityRecord {
    StabilityCase cs;
    double h_actual = 0.0;  // realized grid spacing used in the fit
    double tau_max = 0.0;
    bool capped = false;
    std::vector<ProbeOutcome> probes;
    std::string error;  // non-empty if the case failed outright
};

/// Escalates tau by 1.1x from tau0 (default: prediction/100), re-probing from
/// the same seeded state, until the first failure or tau_cap (default:
/// 1e6 x prediction). Throws ProbeNeverConverged if tau0 itself fails after
/// a guarded sequence of halvings.
StabilityRecord find_max_timestep(const StabilityCase& cs, double tau0 = -1.0,
                                  double tau_cap = -1.0);

struct SweepOptions {
    int n_workers = 1;
    std::string csv_path;   // incremental record CSV; empty = no file
    double tau0 = -1.0;
    double tau_cap = -1.0;
};

std::string sweep_csv_header();
std::string sweep_csv_row(int case_id, const StabilityRecord& r);

/// Runs find_max_timestep per case on a worker pool; per-case errors are
/// captured in the record. CSV rows are written in case-index order so a
/// rerun with the same seeds is byte-identical.
std::vector<StabilityRecord> run_sweep(const std::vector<StabilityCase>& cases,
                                       const SweepOptions& opt = {});

/// The reduced paper-replication grid: sigma x gamma x eps x rho factorial,
/// h = h_over_eps * eps for each requested ratio.
std::vector<StabilityCase> factorial_cases(const std::vector<double>& sigmas,
                                           const std::vector<double>& gammas,
                                           const std::vector<double>& epss,
                                           const std::vector<double>& rhos,
                                           const std::vector<double>& h_over_eps,
                                           CouplingMode mode = CouplingMode::Explicit,
                                           std::uint64_t seed = 20260101);

struct FitResult {
    std::array<double, 6> alpha{};  // prefactor, then exponents of h, eps, sigma, gamma, rho
    std::array<bool, 6> determined{};
    double residual_rms = 0.0;
    int n_cases = 0;
};

/// Exact linear least squares in log space: ln tau_max ~ ln a1 + a2 ln h +
/// a3 ln eps + a4 ln sigma + a5 ln gamma + a6 ln rho, solved by QR. Columns
/// constant across all records are dropped and flagged undetermined; throws
/// RankDeficient if nothing varies or fewer than 7 usable records remain.
FitResult fit_exponents(const std::vector<StabilityRecord>& records);

struct GainStats {
    double min = 0.0, max = 0.0, geomean = 0.0;
    int n = 0;
};

/// Per-case tau_max(stabilized)/tau_max(explicit); records are matched by
/// index and must come from identical cases up to the coupling mode.
GainStats stabilizer_gain(const std::vector<StabilityRecord>& base,
                          const std::vector<StabilityRecord>& stabilized);

}  // namespace nsch
