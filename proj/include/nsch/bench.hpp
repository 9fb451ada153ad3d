#pragma once

#include <map>
#include <string>
#include <vector>

#include "nsch/stepper.hpp"

namespace nsch {

/// error_i = |pos_i - pos_ref|, roc_i = log(err_i/err_{i+1}) / log(tau_i/tau_{i+1}).
/// taus must be strictly decreasing; returns size()-1 rates.
std::vector<double> roc_table(const std::vector<double>& positions, const std::vector<double>& taus,
                              double reference_position);

/// Rising-bubble benchmark configuration (closed box, lighter phase c=-1
/// rising under gravity). Defaults are the desk profile.
struct BubbleConfig {
    int nx = 25, ny = 50;                    // domain [0,1] x [0,2]
    double eps = 0.04;
    double gamma = 2e-5;                     // mobility
    double rho1 = 1000.0, rho2 = 100.0;      // ambient / bubble
    double nu1 = 10.0, nu2 = 1.0;
    double sigma = 24.5;
    double g = 0.98;
    double radius = 0.25, cx = 0.5, cy = 0.5;
    double t_end = 0.2;
    SchemeConfig scheme;  // theta, tau, coupling, omega, tol, max_iter

    GridSpec grid() const;
    PhysicalParams physical() const;
    FieldSet initial_state() const;
};

struct BenchmarkResult {
    Trajectory traj;
    double final_centroid_x = 0.0, final_centroid_y = 0.0;
    long total_iterations = 0;
    double wall_seconds = 0.0;
    bool reached_stationary = false;
    bool converged = true;        // false if any step exhausted its retries
    double mass_drift = 0.0;      // |int c(t_end) - int c(0)|
    double flux_residual = 0.0;   // open boundaries: max |inflow - outflow|
};

BenchmarkResult run_rising_bubble(const BubbleConfig& cfg);

struct RocStudy {
    std::vector<double> taus;
    std::vector<double> positions;  // final bubble centroid_y per tau
    double reference_position = 0.0;
    std::vector<double> errors;
    std::vector<double> roc;
};

/// Runs the bubble for each tau plus a Crank-Nicolson reference at tau_ref
/// (the study's finest step) and tabulates the observed convergence order.
RocStudy bubble_roc_study(BubbleConfig cfg, const std::vector<double>& taus, double tau_ref);

struct ModeRun {
    CouplingMode mode = CouplingMode::Explicit;
    double sigma_factor = 1.0;
    double mobility_factor = 1.0;
    bool converged = false;
    long total_iterations = 0;
    int steps = 0;
    double wall_seconds = 0.0;
    double final_centroid_y = 0.0;
};

/// Same bubble run across coupling modes and surface-tension / mobility
/// scalings; non-convergence is recorded, not raised.
std::vector<ModeRun> run_mode_comparison(const BubbleConfig& base,
                                         const std::vector<CouplingMode>& modes,
                                         const std::vector<double>& sigma_factors,
                                         const std::vector<double>& mobility_factors);

/// Taylor-flow (elongated channel bubble) configuration; defaults are the
/// desk profile of the 2D setup.
struct TaylorConfig {
    int nx = 160, ny = 16;            // domain [0,10] x [0,1]
    double eps = 0.075;
    double mobility = 3e-5;           // desk default; the reference setup uses 3e-6
    double rho = 1.0, nu = 10.0;
    double sigma = 5000.0;
    double bubble_length = 5.0, bubble_radius = 0.3;
    double omega = 1.0;
    double tau0 = 1e-4;
    double tau_ceiling = -1.0;        // <0: none
    bool use_max_extremum = false;    // paper-literal adaptive extremum
    double u_target = 1.0;            // bubble velocity the controller aims for
    double dp0 = 1900.0;              // initial driving pressure difference
    int controller_interval = 10;     // steps between pressure adjustments
    double stationary_tol = 1e-3;
    int max_steps = 500;
    CouplingMode mode = CouplingMode::Implicit;
    bool poiseuille_init = true;  // start from the developed channel profile
    double frame_relax = 0.05;    // under-relaxation of the frame-velocity update

    /// Laminar-channel estimate of the pressure difference driving a mean
    /// velocity u_target: dp = 12 nu L u / H^2.
    double poiseuille_dp() const { return 12.0 * nu * 10.0 * u_target; }

    GridSpec grid() const;
    PhysicalParams physical() const;
    FieldSet initial_state() const;
};

struct TaylorResult {
    BenchmarkResult bench;
    std::vector<double> dp_trace;   // driving pressure per step
    double final_dp = 0.0;
    double final_ub = 0.0;
};

/// Semi-implicit stepping (theta=1, one sub-iteration; the Implicit mode uses
/// one coupled solve per step) in the bubble's moving frame, with the
/// driving-pressure controller and interface-resolving adaptive tau.
TaylorResult run_taylor_2d(const TaylorConfig& cfg);

/// Cahn-Hilliard-only spinodal decomposition from seeded uniform noise in
/// [-0.05, 0.05] with u = 0 (no flow solve): returns the Ginzburg-Landau
/// energy after each step; final state written back through `out` if given.
std::vector<double> run_spinodal(int n, double eps, double mobility, double tau, int steps,
                                 std::uint64_t seed, FieldSet* out = nullptr);

/// Legacy-text VTK structured-points snapshot with node-interpolated scalars
/// c, p, mu and the velocity vector field.
void write_vtk(const FieldSet& f, const GridSpec& g, const std::string& path);

/// Parses POINT_DATA arrays back out of a file written by write_vtk.
std::map<std::string, std::vector<double>> read_vtk_point_data(const std::string& path);

/// Writes the per-step diagnostics table (t, tau, iterations, centroid_x,
/// centroid_y, ub_x, ub_y, dc_max, mass).
void write_diagnostics_csv(const Trajectory& traj, const std::string& path);

/// Flat sectioned key-value config: "[section]" headers, "key = value" lines,
/// '#' comments. Keys are exposed as "section.key".
class KeyValueConfig {
  public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set_double(const std::string& key, double value);

    /// Serializes back to sectioned text (sorted, deterministic) — the
    /// resolved.cfg echo emitted next to every scenario's results.
    std::string to_string() const;
    void write_file(const std::string& path) const;

  private:
    std::map<std::string, std::string> kv_;  // "section.key" -> value
};

}  // namespace nsch
