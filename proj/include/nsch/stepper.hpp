#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "nsch/diagnostics.hpp"
#include "nsch/linalg.hpp"

namespace nsch {

/// Outcome of one time step's fix-point loop.
struct StepReport {
    int iterations = 0;         // sub-iterations used
    bool converged = false;     // ||c_{k+1}-c_k||_inf dropped below tol
    double residual = 0.0;      // final phase-field increment (inf norm)
    int linear_iterations = 0;  // accumulated FGMRES iterations (coupled mode)
};

/// Advances a field set by one step of the theta scheme. The coupling mode in
/// the scheme configuration selects the fix-point strategy; Explicit/S1/S2 use
/// the block Gauss-Seidel loop, Implicit solves one coupled system per
/// sub-iteration.
class TimeIntegrator {
  public:
    TimeIntegrator(const GridSpec& g, const BoundaryConditionSet& bc, const PhysicalParams& p,
                   const SchemeConfig& cfg);

    SchemeConfig& config() { return cfg_; }
    const SchemeConfig& config() const { return cfg_; }
    PreconditionerConfig& precond() { return pc_; }

    /// Solve coupled sub-systems with sparse LU on the full block matrix
    /// instead of preconditioned FGMRES (robust fallback, used by default
    /// when FGMRES stalls).
    void set_coupled_direct(bool on) { coupled_direct_ = on; }

    /// Dispatches on the configured coupling mode.
    StepReport step(FieldSet& state) const;

    StepReport step_gauss_seidel(FieldSet& state) const;
    StepReport step_fully_coupled(FieldSet& state) const;

    /// Classical semi-implicit Euler step: theta = 1 and exactly one
    /// Gauss-Seidel sweep, reported as converged by definition.
    StepReport step_semi_implicit_euler(FieldSet& state) const;

    const GridSpec& grid() const { return g_; }
    const BoundaryConditionSet& bc() const { return bc_; }
    const PhysicalParams& params() const { return p_; }

  private:
    GridSpec g_;
    BoundaryConditionSet bc_;
    PhysicalParams p_;
    SchemeConfig cfg_;
    PreconditionerConfig pc_;
    bool coupled_direct_ = false;
};

/// Controls the interface-resolving adaptive step size
/// tau_new = 1/2 tau_prev * ext_cells( h |grad c| / |c_new - c_old| ).
struct TimestepPolicy {
    bool use_max = false;  // use the max instead of the (safer) min extremum
    double tau_ceiling = std::numeric_limits<double>::infinity();
    double growth_limit = 2.0;      // tau_new <= growth_limit * tau_prev
    double stagnation_factor = 2.0; // applied when the field barely moved
    double dc_floor = 1e-14;        // cells below these floors are excluded
    double grad_floor = 1e-14;      // callers typically use 1e-14 / eps
};

double adaptive_timestep(const Array2D& c_new, const Array2D& c_old, const GridSpec& g,
                         double tau_prev, const TimestepPolicy& pol);

/// Per-step diagnostics emitted by run_transient.
struct StepRow {
    double t = 0.0, tau = 0.0;
    int iterations = 0;
    double centroid_x = 0.0, centroid_y = 0.0;
    double ub_x = 0.0, ub_y = 0.0;  // bubble mean velocity
    double dc_max = 0.0;            // ||c^{n+1}-c^n||_inf
    double mass = 0.0;              // integral of c
};

struct Trajectory {
    std::vector<StepRow> rows;
    double t_end = 0.0;
    bool reached_stationary = false;
};

struct TransientOptions {
    double t_end = 1.0;
    int max_steps = 1000000;
    bool adaptive = false;
    TimestepPolicy policy;
    double stationary_tol = -1.0;  // stop when ||c^{n+1}-c^n||_inf / tau < tol; <0 disables
    bool moving_frame = false;     // track the bubble with the frame velocity
    int max_retries = 8;           // halve tau and retry a failed step
    bool coupled_direct = false;
    /// Invoked before every step; may adjust the state or the scheme
    /// configuration (e.g. a driving-pressure controller).
    std::function<void(int step, double t, const FieldSet&, SchemeConfig&)> callback;
};

/// Integrates to t_end (or stationarity), halving tau on failed steps.
/// Throws NoConvergence when a step fails max_retries times in a row.
Trajectory run_transient(FieldSet& state, const GridSpec& g, const BoundaryConditionSet& bc,
                         const PhysicalParams& p, SchemeConfig cfg, const TransientOptions& opt);

}  // namespace nsch
